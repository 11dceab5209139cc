"""Actor diversity over linked-data entities and knowledge-source
representation audits."""

from .audit import (
    ALIGNMENTS,
    DEFAULT_SCHEDULE,
    BaselineTable,
    DateInterval,
    NormalizationMap,
    PartyRecord,
    PoliticianRecord,
    RepresentationVerdict,
    VisibilityBounds,
    activity_period,
    baseline_share,
    classify,
    compute_bounds,
    normalize_affiliations,
    run_audit,
    select_active,
    validate_snapshot,
)
from .diversity import (
    ACTOR_TYPES,
    BalanceVector,
    DisparityMatrix,
    DiversityParams,
    DiversityResult,
    EntityRecord,
    FeatureSet,
    compute_balance,
    compute_disparity,
    gini_simpson,
    stirling_delta,
)
from .pipeline import (
    AnnotationClient,
    EntityMention,
    LocalOntology,
    MatchRule,
    TextDocument,
    Token,
    aggregate_mentions,
    annotate,
    enrich_entity,
    match_rules,
)
from .report import FigureSpec, emit_figure_svg, emit_series_csv, order_parties
from .sparql import (
    EndpointConfig,
    QueryTemplate,
    RdfTerm,
    ResultTable,
    execute_query,
    parse_results,
    serialize_results,
)

__version__ = "0.1.0"

__all__ = [
    "ACTOR_TYPES",
    "ALIGNMENTS",
    "DEFAULT_SCHEDULE",
    "AnnotationClient",
    "BalanceVector",
    "BaselineTable",
    "DateInterval",
    "DisparityMatrix",
    "DiversityParams",
    "DiversityResult",
    "EndpointConfig",
    "EntityMention",
    "EntityRecord",
    "FeatureSet",
    "FigureSpec",
    "LocalOntology",
    "MatchRule",
    "NormalizationMap",
    "PartyRecord",
    "PoliticianRecord",
    "QueryTemplate",
    "RdfTerm",
    "RepresentationVerdict",
    "ResultTable",
    "TextDocument",
    "Token",
    "VisibilityBounds",
    "activity_period",
    "aggregate_mentions",
    "annotate",
    "baseline_share",
    "classify",
    "compute_balance",
    "compute_bounds",
    "compute_disparity",
    "emit_figure_svg",
    "emit_series_csv",
    "enrich_entity",
    "execute_query",
    "gini_simpson",
    "match_rules",
    "normalize_affiliations",
    "order_parties",
    "parse_results",
    "run_audit",
    "select_active",
    "serialize_results",
    "stirling_delta",
    "validate_snapshot",
]
