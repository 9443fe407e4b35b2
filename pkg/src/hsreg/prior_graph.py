"""Hierarchical sparsity priors as a DAG of latent scale factors.

Each regression coefficient gets a conditional variance

    Psi_j = s_j * d * f_j(parent etas) * eta_j

where eta_j is a positive latent factor with a mean-1 mixing law, s_j is
the sparsity shape of that law, d is a global scale shared by every node,
and f_j combines the parents' factors through a product (small if ANY
parent is small) or an average (small only if ALL parents are small).
Because the parent factors are independent with mean 1, E[f_j] = 1 for
both combinators and E[Psi_j] = s_j * d.

Constructors are provided for the four concrete priors used in practice:
interaction models with strong or weak heredity, additive (spline) models,
and additive models with pairwise interaction surfaces.
"""
from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .distributions import GammaParams, GammaGammaParams, PointMass, MixingLaw
from .errors import ConfigError

__all__ = [
    "Combinator",
    "EtaNode",
    "PriorGraph",
    "compute_psi",
    "prior_logdensity",
    "build_strong_heredity",
    "build_weak_heredity",
    "build_gam",
    "build_gam_interactions",
    "mean_one_gg",
    "mean_one_gamma",
]

DEFAULT_TAIL = 3.0


class Combinator(enum.Enum):
    """How a node's scale combines its parents' latent factors."""

    PRODUCT = "product"
    MEAN = "mean"


def mean_one_gg(shape: float, tail: float = DEFAULT_TAIL) -> GammaGammaParams:
    """Gamma-gamma law with the given shape, rescaled to mean 1 (needs tail > 1)."""
    if tail <= 1:
        raise ConfigError(f"mean-1 gamma-gamma law needs tail > 1, got {tail}")
    return GammaGammaParams(shape=shape, tail=tail, scale=(tail - 1.0) / shape)


def mean_one_gamma(shape: float) -> GammaParams:
    """Gamma law with the given shape and mean 1 (rate = shape)."""
    return GammaParams(shape=shape, rate=shape)


@dataclass(frozen=True)
class EtaNode:
    """One latent scale factor in the prior graph.

    ``role`` is a structural tag like ("main", j) or ("basis", j, k) used to
    align design-matrix columns with nodes and to label summaries.
    """

    id: int
    level: int
    parents: tuple[int, ...]
    law: MixingLaw
    cond_shape: float
    combinator: Combinator
    role: tuple = ()

    def __post_init__(self):
        if self.level < 1:
            raise ConfigError(f"node {self.id}: level must be >= 1, got {self.level}")
        if self.combinator is Combinator.MEAN and len(self.parents) == 0:
            raise ConfigError(f"node {self.id}: mean combinator needs at least one parent")
        self._check_mean_one()

    def _check_mean_one(self):
        law = self.law
        if isinstance(law, GammaParams):
            if not np.isclose(law.rate, law.shape):
                raise ConfigError(
                    f"node {self.id}: gamma law must have rate == shape for mean 1")
            if not np.isclose(self.cond_shape, law.shape):
                raise ConfigError(f"node {self.id}: cond_shape must equal the law shape")
        elif isinstance(law, GammaGammaParams):
            if law.tail <= 1:
                raise ConfigError(f"node {self.id}: gamma-gamma law needs tail > 1")
            if not np.isclose(law.scale, (law.tail - 1.0) / law.shape):
                raise ConfigError(
                    f"node {self.id}: gamma-gamma scale must be (tail-1)/shape for mean 1")
            if not np.isclose(self.cond_shape, law.shape):
                raise ConfigError(f"node {self.id}: cond_shape must equal the law shape")
        elif isinstance(law, PointMass):
            if not np.isclose(law.value, 1.0):
                raise ConfigError(f"node {self.id}: point-mass law must sit at 1")
        else:
            raise ConfigError(f"node {self.id}: unsupported law {type(law).__name__}")


class PriorGraph:
    """Immutable DAG of latent scale nodes, topologically ordered by level.

    ``coeff_map`` maps design-matrix column index -> node id for the
    canonical column order of the matching design family.
    """

    def __init__(self, nodes: list[EtaNode], coeff_map: dict[int, int] | None = None):
        self.nodes = list(nodes)
        n = len(self.nodes)
        ids = [node.id for node in self.nodes]
        if ids != list(range(n)):
            raise ConfigError("node ids must be 0..n-1 in list order")
        for node in self.nodes:
            for pid in node.parents:
                if not 0 <= pid < n:
                    raise ConfigError(f"node {node.id}: parent {pid} out of range")
                if self.nodes[pid].level >= node.level:
                    raise ConfigError(
                        f"node {node.id} (level {node.level}) has parent {pid} "
                        f"at level {self.nodes[pid].level}; parents must sit strictly lower")
        if coeff_map is None:
            coeff_map = {i: i for i in range(n)}
        if sorted(coeff_map.values()) != list(range(n)):
            raise ConfigError("coeff_map must be a bijection onto the node ids")
        self.coeff_map = dict(coeff_map)
        self.levels = max((node.level for node in self.nodes), default=0)
        self.role_to_id = {node.role: node.id for node in self.nodes if node.role}
        self._compile()

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def _compile(self):
        """Precompute vectorized lookup arrays used by compute_psi and the sampler."""
        n = len(self.nodes)
        max_par = max((len(node.parents) for node in self.nodes), default=0)
        self.max_parents = max_par
        self.parent_pad = np.full((n, max(max_par, 1)), -1, dtype=np.int64)
        self.parent_count = np.zeros(n, dtype=np.int64)
        self.is_mean = np.zeros(n, dtype=bool)
        self.shapes = np.array([node.cond_shape for node in self.nodes], dtype=float)
        self.level_of = np.array([node.level for node in self.nodes], dtype=np.int64)
        children: list[list[int]] = [[] for _ in range(n)]
        for node in self.nodes:
            self.parent_count[node.id] = len(node.parents)
            for slot, pid in enumerate(node.parents):
                self.parent_pad[node.id, slot] = pid
                children[pid].append(node.id)
            self.is_mean[node.id] = node.combinator is Combinator.MEAN
        self.children = [np.array(c, dtype=np.int64) for c in children]
        self.is_leaf = np.array([len(c) == 0 for c in children])

    # -- core operations ---------------------------------------------------

    def compute_psi(self, eta, d, shapes=None):
        """Conditional variances Psi for latent factors ``eta`` and scale ``d``.

        ``eta`` may be a single (n_nodes,) vector or a batch (..., n_nodes).
        ``shapes`` overrides the per-node sparsity shapes (used when the
        shapes are themselves being sampled).
        """
        eta = np.asarray(eta, dtype=float)
        if eta.shape[-1] != len(self.nodes):
            raise ValueError(f"eta has {eta.shape[-1]} entries, graph has {len(self.nodes)}")
        if not np.all(np.isfinite(eta)) or np.any(eta <= 0):
            raise ValueError("eta must be finite and positive")
        d = np.asarray(d, dtype=float)
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ValueError("d must be finite and positive")
        if shapes is None:
            shapes = self.shapes
        f = self._combine_parents(eta)
        return shapes * d * f * eta

    def _combine_parents(self, eta):
        pad = self.parent_pad
        # product nodes: pad with 1; mean nodes: pad with 0 and divide by count
        eta_pad1 = np.concatenate([eta, np.ones(eta.shape[:-1] + (1,))], axis=-1)
        prod = np.prod(eta_pad1[..., pad], axis=-1)
        if self.is_mean.any():
            eta_pad0 = np.concatenate([eta, np.zeros(eta.shape[:-1] + (1,))], axis=-1)
            tot = np.sum(eta_pad0[..., pad], axis=-1)
            mean = tot / np.maximum(self.parent_count, 1)
            return np.where(self.is_mean, mean, prod)
        return prod

    def prior_logdensity(self, eta):
        """Sum of the per-node log densities (nodes are independent a priori)."""
        eta = np.asarray(eta, dtype=float)
        if np.any(~np.isfinite(eta)) or np.any(eta <= 0):
            raise ValueError("eta must be finite and positive")
        total = np.zeros(eta.shape[:-1])
        for node in self.nodes:
            total = total + node.law.logpdf(eta[..., node.id])
        return float(total) if total.ndim == 0 else total

    def sample_eta(self, rng: np.random.Generator, size: int | None = None):
        """Independent prior draws of all latent factors, shape (size, n_nodes)."""
        cols = [np.atleast_1d(node.law.sample(rng, size=size)) for node in self.nodes]
        out = np.stack(cols, axis=-1)
        return out[0] if size is None else out

    def sample_psi_node(self, node_id: int, rng: np.random.Generator,
                        size: int, d: float = 1.0):
        """Marginal prior draws of Psi for one node (draws only its parents and itself)."""
        node = self.nodes[node_id]
        eta = node.law.sample(rng, size=size)
        if node.parents:
            pars = np.stack([self.nodes[p].law.sample(rng, size=size)
                             for p in node.parents], axis=0)
            if node.combinator is Combinator.MEAN:
                f = pars.mean(axis=0)
            else:
                f = pars.prod(axis=0)
        else:
            f = 1.0
        return node.cond_shape * d * f * eta

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        def law_dict(law):
            if isinstance(law, GammaParams):
                return {"kind": "gamma", "shape": law.shape, "rate": law.rate}
            if isinstance(law, GammaGammaParams):
                return {"kind": "gamma_gamma", "shape": law.shape,
                        "tail": law.tail, "scale": law.scale}
            return {"kind": "point_mass", "value": law.value}

        return {
            "nodes": [
                {
                    "id": node.id,
                    "level": node.level,
                    "parents": list(node.parents),
                    "law": law_dict(node.law),
                    "cond_shape": node.cond_shape,
                    "combinator": node.combinator.value,
                    "role": list(node.role),
                }
                for node in self.nodes
            ],
            "coeff_map": {str(k): v for k, v in self.coeff_map.items()},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PriorGraph":
        def law_from(d):
            kind = d["kind"]
            if kind == "gamma":
                return GammaParams(d["shape"], d["rate"])
            if kind == "gamma_gamma":
                return GammaGammaParams(d["shape"], d["tail"], d["scale"])
            if kind == "point_mass":
                return PointMass(d["value"])
            raise ConfigError(f"unknown law kind {kind!r}")

        nodes = [
            EtaNode(
                id=nd["id"],
                level=nd["level"],
                parents=tuple(nd["parents"]),
                law=law_from(nd["law"]),
                cond_shape=nd["cond_shape"],
                combinator=Combinator(nd["combinator"]),
                role=tuple(nd["role"]),
            )
            for nd in payload["nodes"]
        ]
        coeff_map = {int(k): v for k, v in payload["coeff_map"].items()}
        return cls(nodes, coeff_map)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_json(cls, path) -> "PriorGraph":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# -- module-level operation aliases ----------------------------------------

def compute_psi(graph: PriorGraph, eta, d, shapes=None):
    return graph.compute_psi(eta, d, shapes=shapes)


def prior_logdensity(graph: PriorGraph, eta):
    return graph.prior_logdensity(eta)


# -- constructors ------------------------------------------------------------

def _pairs(p: int):
    """Canonical interaction pair order: (j, k) for j = 1..p-1, k < j."""
    return [(j, k) for j in range(p) for k in range(j)]


def _warn_if_not_sparser(lambda1: float, lambda2: float):
    if lambda2 >= lambda1:
        warnings.warn(
            f"interaction shape lambda2={lambda2:g} >= lambda1={lambda1:g}; "
            "interactions are usually assumed sparser than main effects",
            UserWarning, stacklevel=3)


def build_strong_heredity(p: int, lambda1: float, lambda2: float,
                          c: float = DEFAULT_TAIL) -> PriorGraph:
    """Interaction prior where a pair's scale is the product of its parents'.

    Level 1 holds one node per variable; level 2 holds one node per pair
    (j, k), k < j, whose scale multiplies both parents' factors, so the
    interaction is shrunk hard when either main effect is.
    """
    if p < 2:
        raise ConfigError(f"need at least 2 variables for interactions, got p={p}")
    _warn_if_not_sparser(lambda1, lambda2)
    nodes = [
        EtaNode(id=j, level=1, parents=(), law=mean_one_gg(lambda1, c),
                cond_shape=lambda1, combinator=Combinator.PRODUCT, role=("main", j))
        for j in range(p)
    ]
    for j, k in _pairs(p):
        nid = len(nodes)
        nodes.append(EtaNode(
            id=nid, level=2, parents=(j, k), law=mean_one_gg(lambda2, c),
            cond_shape=lambda2, combinator=Combinator.PRODUCT, role=("inter", j, k)))
    return PriorGraph(nodes)


def build_weak_heredity(p: int, lambda1: float, lambda2: float,
                        c: float = DEFAULT_TAIL) -> PriorGraph:
    """Interaction prior where a pair's scale averages its parents' factors.

    As build_strong_heredity, but the interaction scale uses the mean of the
    two parent factors, so the interaction is shrunk hard only when both
    main effects are.
    """
    if p < 2:
        raise ConfigError(f"need at least 2 variables for interactions, got p={p}")
    _warn_if_not_sparser(lambda1, lambda2)
    nodes = [
        EtaNode(id=j, level=1, parents=(), law=mean_one_gg(lambda1, c),
                cond_shape=lambda1, combinator=Combinator.PRODUCT, role=("main", j))
        for j in range(p)
    ]
    for j, k in _pairs(p):
        nid = len(nodes)
        nodes.append(EtaNode(
            id=nid, level=2, parents=(j, k), law=mean_one_gg(lambda2, c),
            cond_shape=lambda2, combinator=Combinator.MEAN, role=("inter", j, k)))
    return PriorGraph(nodes)


def build_gam(p: int, K: int, lambda1: float, lambda2, c: float = DEFAULT_TAIL,
              binary_columns=()) -> PriorGraph:
    """Additive-model prior: one variable-level node per predictor plus K
    basis-level nodes per continuous predictor, each tied to its variable.

    ``lambda2`` gives the basis-level shape per variable (length p; entries
    for binary columns are ignored since those get no basis expansion).
    """
    if p < 1 or K < 1:
        raise ConfigError(f"need p >= 1 and K >= 1, got p={p}, K={K}")
    lambda2 = np.asarray(lambda2, dtype=float)
    if lambda2.ndim == 0:
        lambda2 = np.full(p, float(lambda2))
    if lambda2.shape != (p,):
        raise ConfigError(f"lambda2 must have one entry per variable ({p}), "
                          f"got shape {lambda2.shape}")
    binary = frozenset(binary_columns)
    nodes = [
        EtaNode(id=j, level=1, parents=(), law=mean_one_gg(lambda1, c),
                cond_shape=lambda1, combinator=Combinator.PRODUCT, role=("main", j))
        for j in range(p)
    ]
    for j in range(p):
        if j in binary:
            continue
        for k in range(K):
            nid = len(nodes)
            nodes.append(EtaNode(
                id=nid, level=2, parents=(j,), law=mean_one_gg(float(lambda2[j]), c),
                cond_shape=float(lambda2[j]), combinator=Combinator.PRODUCT,
                role=("basis", j, k)))
    return PriorGraph(nodes)


def build_gam_interactions(p: int, K: int, lambda1: float, lambda2: float,
                           lambda3, lambda4, c: float = DEFAULT_TAIL) -> PriorGraph:
    """Four-level prior for additive models with pairwise interaction surfaces.

    Levels: main effects (p nodes); interactions (p(p-1)/2 nodes, product of
    the pair's main factors); main-effect bases (pK nodes, tied to their
    variable); interaction bases (p(p-1)/2 * K^2 nodes, product of the pair
    node and both main factors). ``lambda3`` is per variable, ``lambda4``
    per pair in canonical (j, k), k < j order.

    The coefficient count is p + p(p-1)/2 + pK + p(p-1)/2 * K^2 (1065 for
    p=5, K=10).
    """
    if p < 2 or K < 1:
        raise ConfigError(f"need p >= 2 and K >= 1, got p={p}, K={K}")
    _warn_if_not_sparser(lambda1, lambda2)
    pairs = _pairs(p)
    lambda3 = np.asarray(lambda3, dtype=float)
    if lambda3.ndim == 0:
        lambda3 = np.full(p, float(lambda3))
    if lambda3.shape != (p,):
        raise ConfigError(f"lambda3 must have one entry per variable ({p}), "
                          f"got shape {lambda3.shape}")
    lambda4 = np.asarray(lambda4, dtype=float)
    if lambda4.ndim == 0:
        lambda4 = np.full(len(pairs), float(lambda4))
    if lambda4.shape != (len(pairs),):
        raise ConfigError(f"lambda4 must have one entry per pair ({len(pairs)}), "
                          f"got shape {lambda4.shape}")

    nodes = [
        EtaNode(id=j, level=1, parents=(), law=mean_one_gg(lambda1, c),
                cond_shape=lambda1, combinator=Combinator.PRODUCT, role=("main", j))
        for j in range(p)
    ]
    pair_node: dict[tuple[int, int], int] = {}
    for j, k in pairs:
        nid = len(nodes)
        pair_node[(j, k)] = nid
        nodes.append(EtaNode(
            id=nid, level=2, parents=(j, k), law=mean_one_gg(lambda2, c),
            cond_shape=lambda2, combinator=Combinator.PRODUCT, role=("inter", j, k)))
    for j in range(p):
        for k in range(K):
            nid = len(nodes)
            nodes.append(EtaNode(
                id=nid, level=3, parents=(j,), law=mean_one_gg(float(lambda3[j]), c),
                cond_shape=float(lambda3[j]), combinator=Combinator.PRODUCT,
                role=("basis", j, k)))
    for idx, (j, k) in enumerate(pairs):
        lam4 = float(lambda4[idx])
        for l in range(K):
            for m in range(K):
                nid = len(nodes)
                nodes.append(EtaNode(
                    id=nid, level=4, parents=(pair_node[(j, k)], j, k),
                    law=mean_one_gg(lam4, c), cond_shape=lam4,
                    combinator=Combinator.PRODUCT, role=("inter_basis", j, k, l, m)))

    # canonical design column order: mains, main bases, interaction linears,
    # interaction bases -- map it onto the level-ordered node list
    role_to_id = {node.role: node.id for node in nodes}
    col_roles = (
        [("main", j) for j in range(p)]
        + [("basis", j, k) for j in range(p) for k in range(K)]
        + [("inter", j, k) for j, k in pairs]
        + [("inter_basis", j, k, l, m) for j, k in pairs
           for l in range(K) for m in range(K)]
    )
    coeff_map = {col: role_to_id[role] for col, role in enumerate(col_roles)}
    return PriorGraph(nodes, coeff_map)
