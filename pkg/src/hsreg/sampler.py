"""Posterior simulation for hierarchical sparsity regression models.

One sweep updates, in order: the noise variance (conjugate inverse-gamma),
the intercept and coefficient block (one joint multivariate-normal draw),
every latent scale factor, the global scale d, and the sparsity
hyperparameters. The scale factors, d, and hyperparameters move by
adaptive random-walk Metropolis on the log scale (ratios in (0,1) on the
logit scale), with each acceptance ratio computed from the exact full
conditional in eta-space: a move that changes a node's shape also changes
that node's conditional variance, so the affected coefficient terms enter
the ratio. Proposal variances follow the stochastic-approximation
recursion log s2 <- log s2 + i^(-a) (alpha - tau), which drives every
per-target acceptance rate to tau.

Several chains run against the likelihood raised to inverse temperatures
on a geometric ladder; adjacent chains exchange states after each sweep
and only the coldest chain is recorded. Latent factors that no other node
depends on have mutually independent full conditionals, so their
single-site updates are executed as one vectorized batch.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy import special

from .errors import ConfigError, DataError, NumericalError
from .prior_graph import PriorGraph
from .design import DesignMatrix

__all__ = [
    "ChainConfig",
    "GammaHyper",
    "ExponentialHyper",
    "BetaHyper",
    "HeavyTailScale",
    "HyperParam",
    "RegressionModel",
    "ModelState",
    "Sampler",
    "TemperedChains",
    "SampleStore",
    "run_chain",
    "adapt_proposal",
    "effective_sample_size",
]

LOG2PI = np.log(2.0 * np.pi)
PSI_REFRESH_INTERVAL = 1024  # sweeps between full recomputes of the Psi cache


# -- configuration -----------------------------------------------------------

@dataclass
class ChainConfig:
    """Sampler settings; defaults follow the adaptive-scaling choices a=0.55,
    target acceptance 0.3, and a large upper bound on all scale-type
    parameters."""

    n_iter: int = 50_000
    n_burn: int = 10_000
    thin: int = 10
    a: float = 0.55
    tau_target: float = 0.3
    upper_bound: float = 1e8
    n_temperatures: int = 4
    ladder_ratio: float = 0.5
    swap_target: float = 0.23
    adapt: bool = True
    adapt_ladder: bool = True
    init_proposal_sd: float = 0.5
    accept_window: int = 10_000
    regression_method: str = "auto"
    seed: int = 0

    def __post_init__(self):
        if not 0.5 < self.a <= 1.0:
            raise ConfigError(f"adaptation exponent a must lie in (1/2, 1], got {self.a}")
        if not 0.0 < self.tau_target < 1.0:
            raise ConfigError(f"target acceptance must lie in (0,1), got {self.tau_target}")
        if self.n_iter <= 0 or self.n_burn < 0 or self.thin <= 0:
            raise ConfigError("n_iter, n_burn, thin must be positive (n_burn >= 0)")
        if self.n_burn >= self.n_iter:
            raise ConfigError(f"n_burn={self.n_burn} must be below n_iter={self.n_iter}")
        if self.upper_bound <= 0:
            raise ConfigError("upper_bound must be positive")
        if self.n_temperatures < 1:
            raise ConfigError("need at least one temperature")
        if not 0.0 < self.ladder_ratio < 1.0:
            raise ConfigError("ladder_ratio must lie in (0, 1)")
        if self.regression_method not in ("auto", "direct", "woodbury"):
            raise ConfigError(f"unknown regression method {self.regression_method!r}")


# -- hyperprior laws ---------------------------------------------------------

@dataclass(frozen=True)
class GammaHyper:
    shape: float
    rate: float

    def logpdf(self, x: float) -> float:
        return (self.shape * np.log(self.rate) - special.gammaln(self.shape)
                + (self.shape - 1.0) * np.log(x) - self.rate * x)

    @property
    def mean(self) -> float:
        return self.shape / self.rate


@dataclass(frozen=True)
class ExponentialHyper:
    rate: float

    def logpdf(self, x: float) -> float:
        return np.log(self.rate) - self.rate * x

    @property
    def mean(self) -> float:
        return 1.0 / self.rate


@dataclass(frozen=True)
class BetaHyper:
    """Beta law for a ratio-type hyperparameter constrained to (0, 1)."""

    a: float
    b: float

    def logpdf(self, x: float) -> float:
        return ((self.a - 1.0) * np.log(x) + (self.b - 1.0) * np.log1p(-x)
                - special.betaln(self.a, self.b))

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)


@dataclass(frozen=True)
class HeavyTailScale:
    """Density proportional to (1+x)^-2 on (0, inf): median 1, no finite mean."""

    def logpdf(self, x: float) -> float:
        return -2.0 * np.log1p(x)

    @property
    def mean(self) -> float:
        return 1.0  # median; the mean does not exist


@dataclass
class HyperParam:
    """One sampled hyperparameter and the graph nodes whose shape it scales.

    A node's shape is the product of all components assigned to it (so a
    ratio component r with the same nodes as a base component lambda1
    realizes shape = r * lambda1). ``is_ratio`` components live on (0, 1)
    and move on the logit scale.
    """

    name: str
    law: object
    nodes: np.ndarray
    is_ratio: bool = False
    init: float | None = None

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.int64)
        if self.init is None:
            self.init = float(self.law.mean)
        if self.is_ratio and not 0.0 < self.init < 1.0:
            raise ConfigError(f"ratio component {self.name} needs init in (0,1)")


# -- model bundle ------------------------------------------------------------

LAW_GAMMA, LAW_GG, LAW_POINT = 0, 1, 2


class RegressionModel:
    """A prior graph wired to a design matrix plus hyperparameter structure.

    ``alpha_prior_var`` of None means the flat intercept prior; a float
    gives a proper N(0, var) prior. ``sigma2_prior`` of None is the
    scale-invariant 1/sigma^2 choice; a (shape, scale) pair gives a proper
    inverse-gamma. Proper settings exist mainly so simulation-based
    correctness checks have a proper joint to target.
    """

    def __init__(self, graph: PriorGraph, design: DesignMatrix, y_dim_check: bool = True,
                 hyper: list[HyperParam] | None = None,
                 d_law=HeavyTailScale(), sample_d: bool = True,
                 alpha_prior_var: float | None = None,
                 sigma2_prior: tuple[float, float] | None = None):
        self.graph = graph
        self.design = design
        if design.node_ids is None:
            design.align_with(graph)
        self.X = np.asarray(design.values, dtype=float)
        self.node_ids = np.asarray(design.node_ids, dtype=np.int64)
        n_nodes = len(graph)
        if self.X.shape[1] != n_nodes:
            raise ConfigError("design and graph disagree on the coefficient count")
        self.col_of_node = np.empty(n_nodes, dtype=np.int64)
        self.col_of_node[self.node_ids] = np.arange(n_nodes)

        self.hyper = list(hyper) if hyper else []
        for comp in self.hyper:
            if np.any(comp.nodes < 0) or np.any(comp.nodes >= n_nodes):
                raise ConfigError(f"hyper component {comp.name}: node index out of range")
        self.d_law = d_law
        self.sample_d = sample_d
        self.alpha_prior_var = alpha_prior_var
        self.sigma2_prior = sigma2_prior

        # per-node law layout (shape parameters may be overridden by hyper comps)
        from .distributions import GammaParams, GammaGammaParams, PointMass
        kinds = np.empty(n_nodes, dtype=np.int64)
        tails = np.full(n_nodes, np.nan)
        for node in graph.nodes:
            if isinstance(node.law, GammaParams):
                kinds[node.id] = LAW_GAMMA
            elif isinstance(node.law, GammaGammaParams):
                kinds[node.id] = LAW_GG
                tails[node.id] = node.law.tail
            elif isinstance(node.law, PointMass):
                kinds[node.id] = LAW_POINT
        self.law_kind = kinds
        self.tail = tails
        self.base_shapes = graph.shapes.copy()
        controlled = np.zeros(n_nodes, dtype=bool)
        for comp in self.hyper:
            controlled[comp.nodes] = True
        self._controlled = controlled
        self.updatable = self.law_kind != LAW_POINT

    @property
    def n_columns(self) -> int:
        return self.X.shape[1]

    def shapes_from_phi(self, phi: np.ndarray) -> np.ndarray:
        shapes = np.where(self._controlled, 1.0, self.base_shapes)
        for k, comp in enumerate(self.hyper):
            shapes[comp.nodes] *= phi[k]
        return shapes

    def init_phi(self) -> np.ndarray:
        return np.array([comp.init for comp in self.hyper], dtype=float)

    def eta_logprior_terms(self, eta, shapes, idx) -> np.ndarray:
        """Per-node log density of eta[idx] under its mean-1 law with the
        given shape parameters (gamma: rate=shape; gamma-gamma:
        scale=(tail-1)/shape)."""
        eta = np.asarray(eta, dtype=float)
        shapes = np.asarray(shapes, dtype=float)
        out = np.zeros(eta.shape)
        kinds = self.law_kind[idx]
        g = kinds == LAW_GAMMA
        if np.any(g):
            lam = shapes[g]
            out[g] = (lam * np.log(lam) - special.gammaln(lam)
                      + (lam - 1.0) * np.log(eta[g]) - lam * eta[g])
        h = kinds == LAW_GG
        if np.any(h):
            lam = shapes[h]
            c = self.tail[idx][h]
            scale = (c - 1.0) / lam
            out[h] = (-lam * np.log(scale) + special.gammaln(lam + c)
                      - special.gammaln(lam) - special.gammaln(c)
                      + (lam - 1.0) * np.log(eta[h])
                      - (lam + c) * np.log1p(eta[h] / scale))
        return out


@dataclass
class ModelState:
    """Snapshot of one chain's sampled quantities (Psi is the cached
    deterministic function of eta, d, and the current shapes)."""

    alpha: float
    beta: np.ndarray
    sigma2: float
    eta: np.ndarray
    d: float
    phi: np.ndarray
    psi: np.ndarray


# -- adaptation --------------------------------------------------------------

def adapt_proposal(log_var, accept_prob, i: int, a: float = 0.55, tau: float = 0.3):
    """One step of the diminishing-adaptation recursion on a log proposal
    variance: log s2 + i^(-a) * (accept_prob - tau). Vectorized."""
    if i < 1:
        raise ValueError(f"iteration index must be >= 1, got {i}")
    return log_var + i ** (-a) * (np.asarray(accept_prob) - tau)


# -- single-temperature sampler ----------------------------------------------

class Sampler:
    """One MCMC chain at inverse temperature kappa (kappa=1: the posterior).

    Tempering raises the data likelihood alone to kappa; the prior, and in
    particular the coefficient-given-scale terms, stay at full strength.
    """

    def __init__(self, model: RegressionModel, y, config: ChainConfig,
                 rng: np.random.Generator, kappa: float = 1.0):
        self.model = model
        self.config = config
        self.rng = rng
        self.kappa = float(kappa)
        self.y = np.asarray(y, dtype=float)
        if self.y.ndim != 1 or self.y.size == 0:
            raise DataError("response must be a nonempty 1-d array")
        if model.X.shape[0] != self.y.size:
            raise DataError(f"design has {model.X.shape[0]} rows, response has {self.y.size}")
        self.n = self.y.size
        self.P = model.n_columns

        graph = model.graph
        self._flat_alpha = model.alpha_prior_var is None
        if self._flat_alpha:
            self.col_means = model.X.mean(axis=0) if self.P else np.zeros(0)
            self.Xc = model.X - self.col_means
            self._XtX = self.Xc.T @ self.Xc if self._use_direct(self.P) else None
        else:
            self.Xa = np.concatenate([np.ones((self.n, 1)), model.X], axis=1)
            self._XtX = self.Xa.T @ self.Xa if self._use_direct(self.P + 1) else None

        # state
        self.alpha = float(self.y.mean())
        self.beta = np.zeros(self.P)
        v = float(self.y.var())
        self.sigma2 = v if v > 0 else 1.0
        self.eta = np.ones(len(graph))
        self.d = 1.0
        self.phi = model.init_phi()
        self.shapes = model.shapes_from_phi(self.phi)
        self.psi = graph.compute_psi(self.eta, self.d, shapes=self.shapes)
        self.xb = model.X @ self.beta if self.P else np.zeros(self.n)
        self.b2_node = np.zeros(len(graph))

        # adaptation state
        lv = 2.0 * np.log(config.init_proposal_sd)
        self.log_var_eta = np.full(len(graph), lv)
        self.log_var_d = lv
        self.log_var_phi = np.full(len(model.hyper), lv)
        self.it = 0

        # acceptance accounting (running totals and a resettable window)
        n_targets = len(graph) + 1 + len(model.hyper)
        self.acc_sum = np.zeros(n_targets)
        self.acc_cnt = np.zeros(n_targets)
        self.win_sum = np.zeros(n_targets)
        self.win_cnt = np.zeros(n_targets)

        self._leaf_idx = np.where(graph.is_leaf & model.updatable)[0]
        nonleaf = np.where(~graph.is_leaf & model.updatable)[0]
        self._nonleaf_idx = nonleaf[np.argsort(graph.level_of[nonleaf], kind="stable")]
        self._dep = {}
        for j in self._nonleaf_idx:
            ch = graph.children[j]
            self._dep[j] = {
                "prod": ch[~graph.is_mean[ch]],
                "mean": ch[graph.is_mean[ch]],
            }

    # -- helpers -------------------------------------------------------------

    @staticmethod
    def _use_direct_static(p_eff: int, n: int, method: str) -> bool:
        if method == "direct":
            return True
        if method == "woodbury":
            return False
        return p_eff <= n

    def _use_direct(self, p_eff: int) -> bool:
        return self._use_direct_static(p_eff, self.n, self.config.regression_method)

    def set_response(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != self.y.shape:
            raise DataError("replacement response has a different length")
        self.y = y

    def state(self) -> ModelState:
        return ModelState(alpha=self.alpha, beta=self.beta.copy(),
                          sigma2=self.sigma2, eta=self.eta.copy(), d=self.d,
                          phi=self.phi.copy(), psi=self.psi.copy())

    def _state_payload(self) -> dict:
        return {k: getattr(self, k) for k in
                ("alpha", "beta", "sigma2", "eta", "d", "phi", "shapes",
                 "psi", "xb", "b2_node")}

    def _set_state_payload(self, payload: dict):
        for k, v in payload.items():
            setattr(self, k, v)

    def loglik(self) -> float:
        """Untempered data log likelihood at the current state."""
        resid = self.y - self.alpha - self.xb
        return float(-0.5 * self.n * (LOG2PI + np.log(self.sigma2))
                     - 0.5 * np.dot(resid, resid) / self.sigma2)

    def _gauss_terms(self, psi_vals, b2_vals):
        return -0.5 * (LOG2PI + np.log(psi_vals) + b2_vals / psi_vals)

    def refresh_psi(self):
        self.psi = self.model.graph.compute_psi(self.eta, self.d, shapes=self.shapes)

    # -- conjugate blocks ------------------------------------------------------

    def gibbs_sigma2(self):
        """Inverse-gamma draw for the noise variance given everything else."""
        resid = self.y - self.alpha - self.xb
        rss = float(np.dot(resid, resid))
        a0, b0 = self.model.sigma2_prior if self.model.sigma2_prior else (0.0, 0.0)
        shape = a0 + 0.5 * self.kappa * self.n
        scale = b0 + 0.5 * self.kappa * rss
        if not scale > 0:
            raise NumericalError("non-positive inverse-gamma scale for sigma2",
                                 {"rss": rss})
        self.sigma2 = scale / self.rng.gamma(shape)

    def _chol_with_jitter(self, A: np.ndarray):
        diag_mean = float(np.mean(np.diag(A))) if A.size else 1.0
        for jitter in (0.0, 1e-10, 1e-8, 1e-6):
            try:
                return sla.cho_factor(A + jitter * diag_mean * np.eye(A.shape[0]),
                                      lower=True)
            except sla.LinAlgError:
                continue
        diag = np.diag(A)
        raise NumericalError(
            "regression-block factorization failed even with jitter",
            {"diag_min": float(diag.min()), "diag_max": float(diag.max()),
             "max_jitter": 1e-6})

    def _draw_gaussian(self, Xmat, yvec, prior_var, XtX=None):
        """Exact draw from N(A^-1 w X'y, A^-1), A = w X'X + diag(1/prior_var),
        with w = kappa/sigma2. Direct P x P factorization when columns are
        few, Woodbury-form data-space factorization when P exceeds n."""
        w = self.kappa / self.sigma2
        p_eff = Xmat.shape[1]
        if self._use_direct(p_eff):
            if XtX is None:
                XtX = Xmat.T @ Xmat
            A = w * XtX + np.diag(1.0 / prior_var)
            cf = self._chol_with_jitter(A)
            mu = sla.cho_solve(cf, w * (Xmat.T @ yvec))
            z = self.rng.standard_normal(p_eff)
            return mu + sla.solve_triangular(cf[0], z, lower=True, trans="T")
        sw = np.sqrt(w)
        u = self.rng.standard_normal(p_eff) * np.sqrt(prior_var)
        delta = self.rng.standard_normal(self.n)
        v = sw * (Xmat @ u) + delta
        M = w * ((Xmat * prior_var) @ Xmat.T) + np.eye(self.n)
        cf = self._chol_with_jitter(M)
        wstar = sla.cho_solve(cf, sw * yvec - v)
        return u + prior_var * (sw * (Xmat.T @ wstar))

    def gibbs_regression_block(self):
        """Joint draw of (alpha, beta) from their multivariate-normal full
        conditional. With the flat intercept prior the coefficients are
        drawn against the centered design (the intercept integrated out)
        and the intercept follows from its exact conditional."""
        psi_cols = self.psi[self.model.node_ids] if self.P else np.zeros(0)
        if self._flat_alpha:
            ybar = float(self.y.mean())
            if self.P:
                yc = self.y - ybar
                self.beta = self._draw_gaussian(self.Xc, yc, psi_cols, self._XtX)
            mean_fit = float(self.col_means @ self.beta) if self.P else 0.0
            avar = self.sigma2 / (self.kappa * self.n)
            self.alpha = (ybar - mean_fit) + np.sqrt(avar) * self.rng.standard_normal()
        else:
            prior_var = np.concatenate([[self.model.alpha_prior_var], psi_cols])
            theta = self._draw_gaussian(self.Xa, self.y, prior_var, self._XtX)
            self.alpha = float(theta[0])
            self.beta = theta[1:]
        self.xb = self.model.X @ self.beta if self.P else np.zeros(self.n)
        b2 = self.beta * self.beta
        self.b2_node = b2[self.model.col_of_node] if self.P else self.b2_node

    # -- adaptive Metropolis-Hastings updates ----------------------------------

    def _record(self, target_idx, acc_prob):
        self.acc_sum[target_idx] += acc_prob
        self.acc_cnt[target_idx] += 1
        self.win_sum[target_idx] += acc_prob
        self.win_cnt[target_idx] += 1

    def reset_acceptance_window(self):
        self.win_sum[:] = 0.0
        self.win_cnt[:] = 0.0

    def log_ratio_eta(self, j: int, eta_new: float):
        """Log MH ratio (excluding the proposal's log-scale Jacobian) for
        moving node j's factor to eta_new, with the Psi values it implies."""
        model = self.model
        eta_old = self.eta[j]
        ratio = eta_new / eta_old
        dep = self._dep.get(j)
        if dep is None:      # leaf: only its own coefficient is affected
            idx = np.array([j])
            psi_new = self.psi[idx] * ratio
        else:
            prod_idx = dep["prod"]
            mean_idx = dep["mean"]
            idx = np.concatenate([[j], prod_idx, mean_idx])
            psi_new = np.empty(idx.size)
            psi_new[:1 + prod_idx.size] = self.psi[idx[:1 + prod_idx.size]] * ratio
            if mean_idx.size:
                graph = model.graph
                f_old = self.psi[mean_idx] / (self.shapes[mean_idx] * self.d
                                              * self.eta[mean_idx])
                f_new = f_old + (eta_new - eta_old) / graph.parent_count[mean_idx]
                psi_new[1 + prod_idx.size:] = self.psi[mean_idx] * (f_new / f_old)
        b2 = self.b2_node[idx]
        delta = float(np.sum(self._gauss_terms(psi_new, b2)
                             - self._gauss_terms(self.psi[idx], b2)))
        lp_new = model.eta_logprior_terms(np.array([eta_new]),
                                          self.shapes[[j]], np.array([j]))
        lp_old = model.eta_logprior_terms(np.array([eta_old]),
                                          self.shapes[[j]], np.array([j]))
        delta += float(lp_new[0] - lp_old[0])
        return delta, idx, psi_new

    def _update_eta_single(self, j: int):
        i = self.it + 1
        step = self.rng.standard_normal() * np.exp(0.5 * self.log_var_eta[j])
        eta_new = self.eta[j] * np.exp(step)
        u = self.rng.uniform()
        if eta_new > self.config.upper_bound:
            acc = 0.0
        else:
            delta, idx, psi_new = self.log_ratio_eta(j, eta_new)
            acc = float(np.exp(min(0.0, delta + step)))
            if u < acc:
                self.eta[j] = eta_new
                self.psi[idx] = psi_new
        if self.config.adapt:
            self.log_var_eta[j] = adapt_proposal(
                self.log_var_eta[j], acc, i, self.config.a, self.config.tau_target)
        self._record(j, acc)

    def _update_eta_leaves(self):
        """Batched single-site updates for all childless nodes: their full
        conditionals are mutually independent given the rest of the state,
        so elementwise accept/reject composes the same kernels as a
        one-at-a-time scan."""
        idx = self._leaf_idx
        if idx.size == 0:
            return
        i = self.it + 1
        cfg = self.config
        step = self.rng.standard_normal(idx.size) * np.exp(0.5 * self.log_var_eta[idx])
        u = self.rng.uniform(size=idx.size)
        eta_old = self.eta[idx]
        eta_new = eta_old * np.exp(step)
        psi_old = self.psi[idx]
        psi_new = psi_old * np.exp(step)
        b2 = self.b2_node[idx]
        delta = (self._gauss_terms(psi_new, b2) - self._gauss_terms(psi_old, b2)
                 + self.model.eta_logprior_terms(eta_new, self.shapes[idx], idx)
                 - self.model.eta_logprior_terms(eta_old, self.shapes[idx], idx)
                 + step)
        acc = np.exp(np.minimum(0.0, delta))
        acc[eta_new > cfg.upper_bound] = 0.0
        take = u < acc
        self.eta[idx[take]] = eta_new[take]
        self.psi[idx[take]] = psi_new[take]
        if cfg.adapt:
            self.log_var_eta[idx] = adapt_proposal(
                self.log_var_eta[idx], acc, i, cfg.a, cfg.tau_target)
        self._record(idx, acc)

    def log_ratio_d(self, d_new: float):
        ratio = d_new / self.d
        psi_new = self.psi * ratio
        delta = float(np.sum(self._gauss_terms(psi_new, self.b2_node)
                             - self._gauss_terms(self.psi, self.b2_node)))
        delta += self.model.d_law.logpdf(d_new) - self.model.d_law.logpdf(self.d)
        return delta, psi_new

    def _update_d(self):
        if not self.model.sample_d:
            return
        i = self.it + 1
        t = len(self.model.graph)
        step = self.rng.standard_normal() * np.exp(0.5 * self.log_var_d)
        d_new = self.d * np.exp(step)
        u = self.rng.uniform()
        if d_new > self.config.upper_bound:
            acc = 0.0
        else:
            delta, psi_new = self.log_ratio_d(d_new)
            acc = float(np.exp(min(0.0, delta + step)))
            if u < acc:
                self.d = d_new
                self.psi = psi_new
        if self.config.adapt:
            self.log_var_d = adapt_proposal(
                self.log_var_d, acc, i, self.config.a, self.config.tau_target)
        self._record(t, acc)

    def log_ratio_phi(self, k: int, value_new: float):
        """Log MH ratio (excluding proposal Jacobian) for moving component k.

        Changing a shape changes both the mean-1 law of the affected nodes'
        factors and, through the shape multiplier, their conditional
        variances, so the affected coefficient terms appear here as well.
        """
        comp = self.model.hyper[k]
        nodes = comp.nodes
        ratio = value_new / self.phi[k]
        shapes_new = self.shapes[nodes] * ratio
        psi_new = self.psi[nodes] * ratio
        b2 = self.b2_node[nodes]
        delta = float(np.sum(self._gauss_terms(psi_new, b2)
                             - self._gauss_terms(self.psi[nodes], b2)))
        eta_vals = self.eta[nodes]
        delta += float(np.sum(
            self.model.eta_logprior_terms(eta_vals, shapes_new, nodes)
            - self.model.eta_logprior_terms(eta_vals, self.shapes[nodes], nodes)))
        delta += comp.law.logpdf(value_new) - comp.law.logpdf(self.phi[k])
        return delta, nodes, shapes_new, psi_new

    def _update_phi(self, k: int):
        i = self.it + 1
        comp = self.model.hyper[k]
        t = len(self.model.graph) + 1 + k
        sd = np.exp(0.5 * self.log_var_phi[k])
        eps = self.rng.standard_normal() * sd
        u = self.rng.uniform()
        x = self.phi[k]
        if comp.is_ratio:
            logit_new = np.log(x / (1.0 - x)) + eps
            x_new = 1.0 / (1.0 + np.exp(-logit_new))
            jac = (np.log(x_new) + np.log1p(-x_new)) - (np.log(x) + np.log1p(-x))
            out_of_bounds = not (0.0 < x_new < 1.0)
        else:
            x_new = x * np.exp(eps)
            jac = eps
            out_of_bounds = x_new > self.config.upper_bound
        if out_of_bounds:
            acc = 0.0
        else:
            delta, nodes, shapes_new, psi_new = self.log_ratio_phi(k, x_new)
            acc = float(np.exp(min(0.0, delta + jac)))
            if u < acc:
                self.phi[k] = x_new
                self.shapes[nodes] = shapes_new
                self.psi[nodes] = psi_new
        if self.config.adapt:
            self.log_var_phi[k] = adapt_proposal(
                self.log_var_phi[k], acc, i, self.config.a, self.config.tau_target)
        self._record(t, acc)

    def amh_update_scalar(self, kind: str, index: int | None = None):
        """Run one adaptive Metropolis update of a named scalar target:
        kind 'eta' with a node index, 'd', or 'phi' with a component index."""
        if kind == "eta":
            self._update_eta_single(int(index))
        elif kind == "d":
            self._update_d()
        elif kind == "phi":
            self._update_phi(int(index))
        else:
            raise ConfigError(f"unknown scalar target kind {kind!r}")

    # -- one sweep -------------------------------------------------------------

    def sweep(self):
        self.gibbs_sigma2()
        self.gibbs_regression_block()
        for j in self._nonleaf_idx:
            self._update_eta_single(j)
        self._update_eta_leaves()
        self._update_d()
        for k in range(len(self.model.hyper)):
            self._update_phi(k)
        self.it += 1
        if self.it % PSI_REFRESH_INTERVAL == 0:
            self.refresh_psi()

    def acceptance_rates(self, window: bool = False) -> dict:
        s, c = (self.win_sum, self.win_cnt) if window else (self.acc_sum, self.acc_cnt)
        n_nodes = len(self.model.graph)
        with np.errstate(invalid="ignore"):
            rates = np.where(c > 0, s / np.maximum(c, 1), np.nan)
        out = {"eta": rates[:n_nodes], "d": rates[n_nodes]}
        out["phi"] = {comp.name: rates[n_nodes + 1 + k]
                      for k, comp in enumerate(self.model.hyper)}
        return out


# -- parallel tempering ------------------------------------------------------

class TemperedChains:
    """A ladder of chains with geometric inverse temperatures kappa_t = rho^t.

    After each sweep every adjacent pair proposes a state exchange with the
    standard tempered-exchange ratio; the ladder spacing is tuned toward
    the target swap acceptance during burn-in. With one temperature this
    reduces to the plain sampler (the swap machinery never draws)."""

    def __init__(self, model: RegressionModel, y, config: ChainConfig):
        self.model = model
        self.config = config
        seq = np.random.SeedSequence(config.seed)
        children = seq.spawn(config.n_temperatures + 1)
        self.swap_rng = np.random.default_rng(children[-1])
        self.log_neg_log_rho = float(np.log(-np.log(config.ladder_ratio)))
        kappas = self._ladder()
        self.chains = [Sampler(model, y, config, np.random.default_rng(children[t]),
                               kappa=kappas[t])
                       for t in range(config.n_temperatures)]
        self.swap_acc_sum = 0.0
        self.swap_cnt = 0
        self.it = 0

    def _ladder(self) -> np.ndarray:
        rho = float(np.exp(-np.exp(self.log_neg_log_rho)))
        return rho ** np.arange(self.config.n_temperatures)

    @property
    def cold(self) -> Sampler:
        return self.chains[0]

    def sweep(self):
        for chain in self.chains:
            chain.sweep()
        self.it += 1
        if len(self.chains) > 1:
            self._swap_round()

    def _swap_round(self):
        cfg = self.config
        probs = []
        for t in range(len(self.chains) - 1):
            lo, hi = self.chains[t], self.chains[t + 1]
            log_a = (lo.kappa - hi.kappa) * (hi.loglik() - lo.loglik())
            acc = float(np.exp(min(0.0, log_a)))
            probs.append(acc)
            if self.swap_rng.uniform() < acc:
                pa, pb = lo._state_payload(), hi._state_payload()
                lo._set_state_payload(pb)
                hi._set_state_payload(pa)
            self.swap_acc_sum += acc
            self.swap_cnt += 1
        if (cfg.adapt and cfg.adapt_ladder and self.it <= cfg.n_burn):
            mean_acc = float(np.mean(probs))
            self.log_neg_log_rho += self.it ** (-cfg.a) * (mean_acc - cfg.swap_target)
            for t, kappa in enumerate(self._ladder()):
                self.chains[t].kappa = kappa

    def swap_rate(self) -> float:
        return self.swap_acc_sum / self.swap_cnt if self.swap_cnt else float("nan")


# -- sample storage ----------------------------------------------------------

class SampleStore:
    """Thinned post-burn-in draws from the cold chain plus diagnostics."""

    def __init__(self, model: RegressionModel, config: ChainConfig,
                 sweeps: np.ndarray, alpha, beta, sigma2, eta, d, phi, psi,
                 acceptance: dict, swap_rate: float):
        self.model = model
        self.config = config
        self.sweeps = sweeps
        self.alpha = alpha
        self.beta = beta
        self.sigma2 = sigma2
        self.eta = eta
        self.d = d
        self.phi = phi
        self.psi = psi
        self.acceptance = acceptance
        self.swap_rate = swap_rate
        self.phi_names = [comp.name for comp in model.hyper]

    @property
    def n_draws(self) -> int:
        return self.alpha.size

    def column_names(self) -> list[str]:
        p = self.beta.shape[1]
        n_nodes = self.eta.shape[1]
        return (["sweep", "alpha", "sigma2", "d"]
                + [f"phi_{name}" for name in self.phi_names]
                + [f"beta_{m}" for m in range(p)]
                + [f"eta_{j}" for j in range(n_nodes)]
                + [f"psi_{j}" for j in range(n_nodes)])

    def to_matrix(self) -> np.ndarray:
        return np.column_stack([self.sweeps, self.alpha, self.sigma2, self.d,
                                self.phi, self.beta, self.eta, self.psi])

    def to_csv(self, path):
        header = ",".join(self.column_names())
        np.savetxt(path, self.to_matrix(), delimiter=",", header=header,
                   comments="", fmt="%.17g")

    @staticmethod
    def read_csv(path) -> dict[str, np.ndarray]:
        with open(path) as fh:
            names = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return {name: data[:, i] for i, name in enumerate(names)}

    def scalar_ess(self) -> dict[str, float]:
        out = {"alpha": effective_sample_size(self.alpha),
               "sigma2": effective_sample_size(self.sigma2),
               "d": effective_sample_size(self.d)}
        for k, name in enumerate(self.phi_names):
            out[f"phi_{name}"] = effective_sample_size(self.phi[:, k])
        return out

    def manifest(self, data_digest: str = "", extra: dict | None = None) -> dict:
        cfg = self.config
        payload = {
            "config": {k: getattr(cfg, k) for k in (
                "n_iter", "n_burn", "thin", "a", "tau_target", "upper_bound",
                "n_temperatures", "ladder_ratio", "swap_target", "adapt",
                "adapt_ladder", "init_proposal_sd", "regression_method", "seed")},
            "graph": self.model.graph.to_dict(),
            "hyper": [{"name": c.name, "law": type(c.law).__name__,
                       "is_ratio": c.is_ratio} for c in self.model.hyper],
            "n_draws": int(self.n_draws),
            "swap_rate": self.swap_rate,
            "data_digest": data_digest,
        }
        if extra:
            payload.update(extra)
        return payload

    def save_manifest(self, path, data_digest: str = "", extra: dict | None = None):
        with open(path, "w") as fh:
            json.dump(self.manifest(data_digest, extra), fh, indent=1, sort_keys=True)


def run_chain(model: RegressionModel, y, config: ChainConfig) -> SampleStore:
    """Run the tempered sampler and collect thinned post-burn-in cold-chain
    draws. Deterministic for a fixed seed and temperature count."""
    tc = TemperedChains(model, y, config)
    n_rec = len(range(config.n_burn, config.n_iter, config.thin))
    n_nodes = len(model.graph)
    alpha = np.empty(n_rec)
    sigma2 = np.empty(n_rec)
    d = np.empty(n_rec)
    beta = np.empty((n_rec, model.n_columns))
    eta = np.empty((n_rec, n_nodes))
    psi = np.empty((n_rec, n_nodes))
    phi = np.empty((n_rec, len(model.hyper)))
    sweeps = np.empty(n_rec)

    window_start = max(0, config.n_iter - config.accept_window)
    r = 0
    for i in range(config.n_iter):
        if i == window_start:
            for chain in tc.chains:
                chain.reset_acceptance_window()
        tc.sweep()
        if i >= config.n_burn and (i - config.n_burn) % config.thin == 0:
            cold = tc.cold
            sweeps[r] = i
            alpha[r] = cold.alpha
            sigma2[r] = cold.sigma2
            d[r] = cold.d
            beta[r] = cold.beta
            eta[r] = cold.eta
            psi[r] = cold.psi
            phi[r] = cold.phi
            r += 1
    acceptance = {
        "full": tc.cold.acceptance_rates(window=False),
        "window": tc.cold.acceptance_rates(window=True),
    }
    return SampleStore(model, config, sweeps, alpha, beta, sigma2, eta, d, phi,
                       psi, acceptance, tc.swap_rate())


# -- diagnostics ---------------------------------------------------------------

def effective_sample_size(x) -> float:
    """ESS from the initial monotone positive autocorrelation sequence."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    x0 = x - x.mean()
    var = float(np.dot(x0, x0)) / n
    if var == 0:
        return 1.0
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x0, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / acov[0]
    # Geyer: sum pairs rho[2k+1] + rho[2k+2] while positive and non-increasing
    tau = 1.0
    prev = np.inf
    for k in range(0, (n - 2) // 2):
        pair = rho[2 * k + 1] + rho[2 * k + 2]
        if pair <= 0:
            break
        pair = min(pair, prev)
        tau += 2.0 * pair
        prev = pair
    return float(min(n, max(1.0, n / tau)))
