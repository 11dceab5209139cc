"""Stirling-style actor diversity: variety, balance, disparity.

The diversity of a set of entities is computed as a sum over ordered pairs
of entities, weighting the pairwise dissimilarity (disparity) against the
product of the entities' frequency shares (balance). Variety is the number
of distinct entities present.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

ACTOR_TYPES = ("person", "organisation", "geopolitical-entity")

DEFAULT_METRIC = "jaccard"


@dataclass(frozen=True)
class FeatureSet:
    """A set of (feature_name, feature_value) pairs describing one entity.

    Multiple values per feature name are allowed; exact duplicates are not
    (the frozenset collapses them).
    """

    pairs: frozenset[tuple[str, str]] = frozenset()

    @classmethod
    def of(cls, *pairs: tuple[str, str]) -> "FeatureSet":
        return cls(frozenset(pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __bool__(self) -> bool:
        return bool(self.pairs)


@dataclass(frozen=True)
class EntityRecord:
    """A recognized actor with its enriched features."""

    id: str
    label: str
    actor_type: str
    features: FeatureSet = field(default_factory=FeatureSet)

    def __post_init__(self) -> None:
        if self.actor_type not in ACTOR_TYPES:
            raise ValueError(
                f"actor_type must be one of {ACTOR_TYPES}, got {self.actor_type!r}"
            )


@dataclass(frozen=True)
class BalanceVector:
    """Frequency shares p_i per entity id; shares sum to 1 unless empty."""

    shares: Mapping[str, float]

    def __post_init__(self) -> None:
        for entity_id, p in self.shares.items():
            if p < 0:
                raise ValueError(f"negative share for {entity_id!r}: {p}")
        if self.shares:
            total = sum(self.shares.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"shares sum to {total}, expected 1")

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self.shares)

    def __len__(self) -> int:
        return len(self.shares)


class DisparityMatrix:
    """Symmetric pairwise dissimilarities in [0, 1] with zero diagonal."""

    def __init__(self, ids: Sequence[str], values: Mapping[tuple[str, str], float]):
        """Build from values keyed by unordered id pairs (either orientation).

        Missing pairs default to 0. Diagonal entries must be absent or 0.
        """
        ids = tuple(ids)
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate entity ids in disparity matrix")
        known = set(ids)
        store: dict[frozenset[str], float] = {}
        for (i, j), d in values.items():
            if i not in known or j not in known:
                raise ValueError(f"pair ({i!r}, {j!r}) references unknown entity id")
            if i == j:
                if d != 0:
                    raise ValueError(f"diagonal entry d({i!r},{i!r}) must be 0, got {d}")
                continue
            if not 0.0 <= d <= 1.0:
                raise ValueError(f"disparity d({i!r},{j!r}) = {d} outside [0, 1]")
            key = frozenset((i, j))
            if key in store and store[key] != d:
                raise ValueError(f"conflicting values for pair ({i!r}, {j!r})")
            store[key] = d
        self._ids = ids
        self._store = store

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    def value(self, i: str, j: str) -> float:
        if i == j:
            return 0.0
        return self._store.get(frozenset((i, j)), 0.0)

    def with_value(self, i: str, j: str, d: float) -> "DisparityMatrix":
        """Return a copy with one off-diagonal pair replaced."""
        values = {tuple(sorted(k)): v for k, v in self._store.items()}
        values[(min(i, j), max(i, j))] = d
        return DisparityMatrix(self._ids, values)


@dataclass(frozen=True)
class DiversityParams:
    """Exponents weighting disparity (alpha) and balance (beta)."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")


@dataclass(frozen=True)
class DiversityResult:
    delta: float
    variety: int
    balance: BalanceVector
    per_pair_terms: Mapping[tuple[str, str], float] | None = None


def jaccard_distance(a: FeatureSet, b: FeatureSet) -> float:
    """Jaccard complement over feature pairs.

    Two empty sets are indistinguishable (0); an empty set against a
    nonempty one is maximally distant (1).
    """
    if not a.pairs and not b.pairs:
        return 0.0
    union = a.pairs | b.pairs
    if not union:
        return 0.0
    return 1.0 - len(a.pairs & b.pairs) / len(union)


DISPARITY_METRICS = {
    "jaccard": jaccard_distance,
}


def compute_balance(counts: Mapping[str, int]) -> BalanceVector:
    """Normalize occurrence counts into frequency shares."""
    if not counts:
        return BalanceVector({})
    for entity_id, c in counts.items():
        if c < 0:
            raise ValueError(f"negative count for {entity_id!r}: {c}")
    total = sum(counts.values())
    if total == 0:
        raise ValueError("no occurrences: all counts are zero")
    return BalanceVector({entity_id: c / total for entity_id, c in counts.items()})


def compute_disparity(
    entities: Sequence[EntityRecord], metric: str = DEFAULT_METRIC
) -> DisparityMatrix:
    """Pairwise dissimilarity matrix over the entities' feature sets."""
    try:
        distance = DISPARITY_METRICS[metric]
    except KeyError:
        raise ValueError(
            f"unknown disparity metric {metric!r}; known: {sorted(DISPARITY_METRICS)}"
        ) from None
    ids = [e.id for e in entities]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate entity ids")
    values: dict[tuple[str, str], float] = {}
    for idx, a in enumerate(entities):
        for b in entities[idx + 1 :]:
            values[(a.id, b.id)] = distance(a.features, b.features)
    return DisparityMatrix(ids, values)


def stirling_delta(
    balance: BalanceVector,
    disparity: DisparityMatrix,
    params: DiversityParams = DiversityParams(),
    keep_terms: bool = False,
) -> DiversityResult:
    """Diversity as the sum over ordered pairs i != j of d_ij^alpha * (p_i p_j)^beta.

    Pairs with zero disparity contribute 0 for every alpha (this pins the
    0^0 case: identical entities never add diversity). A set of at most one
    entity has diversity 0.
    """
    if set(balance.ids) != set(disparity.ids):
        raise ValueError("balance and disparity cover different entity ids")
    ids = balance.ids
    terms: dict[tuple[str, str], float] = {} if keep_terms else None
    delta = 0.0
    if len(ids) > 1:
        for i in ids:
            p_i = balance.shares[i]
            for j in ids:
                if i == j:
                    continue
                d = disparity.value(i, j)
                if d == 0.0:
                    term = 0.0
                else:
                    term = d**params.alpha * (p_i * balance.shares[j]) ** params.beta
                delta += term
                if terms is not None:
                    terms[(i, j)] = term
    return DiversityResult(
        delta=delta, variety=len(ids), balance=balance, per_pair_terms=terms
    )


def gini_simpson(balance: BalanceVector) -> float:
    """1 minus the sum of squared shares; the alpha=0, beta=1 reduction."""
    return 1.0 - sum(p * p for p in balance.shares.values())
