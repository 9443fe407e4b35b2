"""Design matrices for the three model families and their column/node maps.

Families: linear models with pairwise interaction columns, additive models
with a hinge (piecewise-linear) spline basis per continuous variable, and
additive models with tensor-product interaction bases. Continuous inputs
are expected on [0, 1]; ``normalize_minmax`` fits that scaling on training
data so it can be reapplied to held-out rows (which may fall outside [0, 1];
no clamping is applied).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .prior_graph import PriorGraph

__all__ = [
    "DesignSpec",
    "DesignMatrix",
    "MinMaxScale",
    "normalize_minmax",
    "spline_basis",
    "build_linear_interactions",
    "build_gam_design",
    "build_gam_interaction_design",
]

FAMILIES = ("linear_interactions", "gam", "gam_interactions")
TRANSFORMS = ("none", "log1p")


@dataclass
class DesignSpec:
    """Recipe for building a design matrix from a raw predictor table."""

    family: str
    K: int = 0
    transforms: dict[int, str] = field(default_factory=dict)
    normalize: bool = True
    binary_columns: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family != "linear_interactions" and self.K < 2:
            raise ConfigError(f"spline families need K >= 2 knots, got K={self.K}")
        for j, t in self.transforms.items():
            if t not in TRANSFORMS:
                raise ConfigError(f"unknown transform {t!r} for variable {j}")
        self.binary_columns = frozenset(self.binary_columns)


@dataclass
class MinMaxScale:
    """Fitted min-max scaling for one column; reapplies to new data unclamped."""

    lo: float
    hi: float

    def apply(self, x):
        return (np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo)


def normalize_minmax(x) -> tuple[np.ndarray, MinMaxScale]:
    """Scale a column to [0, 1] by its observed range, returning the fit."""
    x = np.asarray(x, dtype=float)
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        raise DataError(f"column is constant (value {lo:g}); cannot min-max scale")
    scale = MinMaxScale(lo, hi)
    return scale.apply(x), scale


def spline_basis(x, K: int) -> np.ndarray:
    """Hinge basis (x - tau_k)_+ at evenly spaced knots tau_k = (k-1)/(K-1).

    Accepts a scalar or a 1-d array; returns shape (K,) or (n, K). Values
    outside [0, 1] are allowed and follow the same hinge definition.
    """
    if K < 2:
        raise ConfigError(f"need K >= 2 knots, got {K}")
    x = np.asarray(x, dtype=float)
    knots = np.arange(K) / (K - 1)
    return np.maximum(0.0, x[..., None] - knots)


@dataclass
class DesignMatrix:
    """A built design: values, per-column structural roles, and node ids.

    ``node_ids[m]`` is the prior-graph node carrying column m's coefficient;
    it is populated when a graph is supplied at build time (or later through
    ``align_with``). The intercept is never a column.
    """

    values: np.ndarray
    column_roles: list[tuple]
    node_ids: np.ndarray | None = None

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def align_with(self, graph: PriorGraph) -> np.ndarray:
        """Resolve node ids from column roles and verify the map is a bijection."""
        if len(graph) != self.n_columns:
            raise ConfigError(
                f"graph has {len(graph)} nodes but design has {self.n_columns} columns")
        try:
            ids = np.array([graph.role_to_id[role] for role in self.column_roles],
                           dtype=np.int64)
        except KeyError as exc:
            raise ConfigError(f"design column role {exc.args[0]!r} has no graph node") from exc
        if len(set(ids.tolist())) != self.n_columns:
            raise ConfigError("column -> node map is not one-to-one")
        self.node_ids = ids
        return ids


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DataError(f"predictor matrix must be 2-d, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("predictor matrix contains non-finite values")
    return X


def build_linear_interactions(X, graph: PriorGraph | None = None) -> DesignMatrix:
    """Columns: the p mains, then the p(p-1)/2 products X_j * X_k for k < j.

    Column order matches the heredity graph constructors' node order.
    """
    X = _as_matrix(X)
    n, p = X.shape
    if p < 2:
        raise ConfigError(f"need at least 2 predictors for interactions, got p={p}")
    cols = [X]
    roles: list[tuple] = [("main", j) for j in range(p)]
    inter = np.empty((n, p * (p - 1) // 2))
    idx = 0
    for j in range(p):
        for k in range(j):
            inter[:, idx] = X[:, j] * X[:, k]
            roles.append(("inter", j, k))
            idx += 1
    cols.append(inter)
    design = DesignMatrix(values=np.concatenate(cols, axis=1), column_roles=roles)
    if graph is not None:
        design.align_with(graph)
    return design


def build_gam_design(X, K: int, binary_columns=(),
                     graph: PriorGraph | None = None) -> DesignMatrix:
    """Columns: one linear column per variable, then K hinge columns per
    continuous variable (binary variables get no basis expansion).
    """
    X = _as_matrix(X)
    n, p = X.shape
    binary = frozenset(binary_columns)
    cols = [X]
    roles: list[tuple] = [("main", j) for j in range(p)]
    for j in range(p):
        if j in binary:
            continue
        cols.append(spline_basis(X[:, j], K))
        roles.extend(("basis", j, k) for k in range(K))
    design = DesignMatrix(values=np.concatenate(cols, axis=1), column_roles=roles)
    if graph is not None:
        design.align_with(graph)
    return design


def build_gam_interaction_design(X, K: int,
                                 graph: PriorGraph | None = None) -> DesignMatrix:
    """Columns: mains, per-variable hinge bases, pairwise linear interactions,
    and tensor products of the two variables' hinge bases for each pair.
    """
    X = _as_matrix(X)
    n, p = X.shape
    if p < 2:
        raise ConfigError(f"need at least 2 predictors for interactions, got p={p}")
    bases = [spline_basis(X[:, j], K) for j in range(p)]

    cols = [X]
    roles: list[tuple] = [("main", j) for j in range(p)]
    for j in range(p):
        cols.append(bases[j])
        roles.extend(("basis", j, k) for k in range(K))
    inter = np.empty((n, p * (p - 1) // 2))
    idx = 0
    for j in range(p):
        for k in range(j):
            inter[:, idx] = X[:, j] * X[:, k]
            roles.append(("inter", j, k))
            idx += 1
    cols.append(inter)
    for j in range(p):
        for k in range(j):
            # (n, K, K) tensor product flattened with l (j's knot) outer, m inner
            tp = bases[j][:, :, None] * bases[k][:, None, :]
            cols.append(tp.reshape(n, K * K))
            roles.extend(("inter_basis", j, k, l, m)
                         for l in range(K) for m in range(K))
    design = DesignMatrix(values=np.concatenate(cols, axis=1), column_roles=roles)
    if graph is not None:
        design.align_with(graph)
    return design
