"""
Posterior inference for finite-rank SLGPs.

With ``Z = sigma / sqrt(p) * phi . eps`` and a standard normal prior on
``eps``, the log posterior (up to a constant) is

    sum_i [ Z(x_i, t_i) - log int_T exp(Z(x_i, u)) du ] - ||eps||^2 / 2

The numerator is evaluated at the exact observations; the normalizer uses
the quadrature grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.linalg import LinearOperator, cg

from .density import QuadratureGrid, logsumexp_w, moments, normalize_log_density, quantiles
from .kernels import DomainSpec, KernelSpec
from .rff import RFFBasis, build_basis, eval_features, expected_features, field_on_grid

logger = logging.getLogger(__name__)


@dataclass
class Dataset:
    """Observations ``(x_i, t_i)`` in the (rescaled) domain.

    ``keys`` optionally labels each record (e.g. a station id) and
    ``passthrough`` carries extra per-record columns untouched.
    """

    x: np.ndarray
    t: np.ndarray
    domain: DomainSpec
    keys: np.ndarray | None = None
    passthrough: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1, self.domain.d_D)
        self.t = np.asarray(self.t, dtype=float).reshape(-1, self.domain.d_T)
        if self.x.shape[0] != self.t.shape[0]:
            raise ValueError("x and t must have the same number of rows")
        if self.keys is not None:
            self.keys = np.asarray(self.keys).astype(str)
            if self.keys.shape != (self.n,):
                raise ValueError("keys must have one entry per record")
        if self.n and not self.domain.contains(x=self.x, t=self.t):
            raise ValueError("dataset points lie outside the domain")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @classmethod
    def empty(cls, domain: DomainSpec) -> "Dataset":
        return cls(np.zeros((0, domain.d_D)), np.zeros((0, domain.d_T)), domain)

    def subset(self, mask) -> "Dataset":
        mask = np.asarray(mask)
        return Dataset(
            self.x[mask], self.t[mask], self.domain,
            None if self.keys is None else self.keys[mask],
            {k: np.asarray(v)[mask] for k, v in self.passthrough.items()},
            dict(self.metadata),
        )


class PosteriorEval(NamedTuple):
    logpost: float
    grad: np.ndarray


class SLGPPosterior:
    """Log posterior of the weights for a fixed basis, dataset and grid.

    Observations sharing a location share one normalizing integral, and the
    numerator reduces to the summed observation features, so evaluation
    costs ``O(n_locations * M * p)``.
    """

    def __init__(self, basis: RFFBasis, dataset: Dataset, grid: QuadratureGrid):
        if grid.size == 0:
            raise ValueError("empty quadrature grid")
        if dataset.domain.d_D != basis.domain.d_D or dataset.domain.d_T != basis.domain.d_T:
            raise ValueError("dataset and basis dimensions differ")
        self.basis = basis
        self.grid = grid
        self.n = dataset.n
        if dataset.n:
            self.locations, self.counts = np.unique(dataset.x, axis=0, return_counts=True)
            phi_obs = eval_features(basis, np.hstack([dataset.x, dataset.t]))
            self.obs_features = phi_obs.sum(axis=0)
        else:
            self.locations = np.zeros((0, basis.domain.d_D))
            self.counts = np.zeros(0, dtype=int)
            self.obs_features = np.zeros(basis.n_features)

    def log_likelihood(self, eps) -> float:
        eps = np.asarray(eps, dtype=float)
        if self.n == 0:
            return 0.0
        z = field_on_grid(self.basis, eps, self.locations, self.grid.nodes)
        lse = logsumexp_w(z, self.grid.weights)
        return float(self.basis.scale * (self.obs_features @ eps) - self.counts @ lse)

    def __call__(self, eps) -> PosteriorEval:
        eps = np.asarray(eps, dtype=float)
        if eps.shape != (self.basis.n_features,):
            raise ValueError(f"weight vector must have shape ({self.basis.n_features},)")
        if self.n == 0:
            return PosteriorEval(float(-0.5 * eps @ eps), -eps.copy())
        c = self.basis.scale
        z = field_on_grid(self.basis, eps, self.locations, self.grid.nodes)
        lse = logsumexp_w(z, self.grid.weights)
        probs = np.exp(z - lse[:, None]) * self.grid.weights
        ephi = expected_features(self.basis, self.locations, self.grid.nodes, probs)
        loglik = c * (self.obs_features @ eps) - self.counts @ lse
        grad = c * (self.obs_features - self.counts @ ephi) - eps
        return PosteriorEval(float(loglik - 0.5 * eps @ eps), grad)

    def hessp(self, eps, v) -> np.ndarray:
        """Hessian-vector product of the log posterior.

        The likelihood Hessian is ``-c^2 sum_u n_u Cov_u[phi]`` with the
        covariance taken under each location's current density.
        """
        eps = np.asarray(eps, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.n == 0:
            return -v
        c = self.basis.scale
        nodes, w = self.grid.nodes, self.grid.weights
        z = field_on_grid(self.basis, eps, self.locations, nodes)
        probs = np.exp(z - logsumexp_w(z, w)[:, None]) * w
        # phi(x_u, t_m) . v on the grid
        s = field_on_grid(self.basis, v, self.locations, nodes) / c
        mean_s = np.sum(probs * s, axis=1)
        e_phi_s = expected_features(self.basis, self.locations, nodes, probs * s)
        e_phi = expected_features(self.basis, self.locations, nodes, probs)
        cov_v = e_phi_s - e_phi * mean_s[:, None]
        return -c**2 * (self.counts @ cov_v) - v


def log_posterior_and_grad(basis: RFFBasis, eps, dataset: Dataset, grid: QuadratureGrid) -> PosteriorEval:
    """Log posterior (additive constants dropped) and its gradient in ``eps``."""
    return SLGPPosterior(basis, dataset, grid)(eps)


@dataclass
class MAPResult:
    eps: np.ndarray
    logpost: float
    grad_norm: float
    n_iter: int
    converged: bool
    message: str
    trace: list = field(default_factory=list, repr=False)


def map_estimate(basis: RFFBasis, dataset: Dataset, grid: QuadratureGrid, init=None,
                 tol: float = 1e-6, max_iter: int = 10_000) -> MAPResult:
    """Maximize the log posterior with L-BFGS (gradient-only, line-searched).

    ``converged`` is True when ``max|grad| <= tol``; otherwise the best point
    reached is returned with ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    post = SLGPPosterior(basis, dataset, grid)
    x0 = np.zeros(basis.n_features) if init is None else np.array(init, dtype=float)
    start = post(x0)
    trace = [start.logpost]
    cache = {}

    def fun(e):
        key = e.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = post(e)
        r = cache[key]
        return -r.logpost, -r.grad

    def callback(xk):
        trace.append(-fun(xk)[0])

    res = minimize(fun, x0, jac=True, method="L-BFGS-B", callback=callback,
                   options={"maxiter": int(max_iter), "maxfun": 4 * int(max_iter),
                            "gtol": tol, "ftol": 1e-15, "maxcor": 20})
    eps = res.x
    final = post(eps)
    if final.logpost < start.logpost:
        eps, final = x0, start
    if np.max(np.abs(final.grad), initial=0.0) > tol:
        eps, final = _newton_polish(post, eps, final, tol)
        trace.append(final.logpost)
    gnorm = float(np.max(np.abs(final.grad))) if final.grad.size else 0.0
    converged = gnorm <= tol
    if not converged:
        logger.info("MAP stopped at max|grad|=%.3g after %d iterations: %s", gnorm, res.nit, res.message)
    return MAPResult(eps, final.logpost, gnorm, int(res.nit), converged, str(res.message), trace)


def _newton_polish(post, eps, cur, tol, max_steps=20):
    # line searches on f stall near the optimum once changes in f reach
    # rounding level; Newton steps judged on the gradient still make progress
    dim = eps.size
    for _ in range(max_steps):
        g = cur.grad
        if np.max(np.abs(g)) <= tol:
            break
        H = LinearOperator((dim, dim), matvec=lambda v, e=eps: -post.hessp(e, v), dtype=float)
        step, _ = cg(H, g, rtol=1e-10, maxiter=10 * dim)
        trial = post(eps + step)
        if not np.isfinite(trial.logpost):
            break
        worse_f = trial.logpost < cur.logpost - 1e-9 * max(1.0, abs(cur.logpost))
        if worse_f or np.max(np.abs(trial.grad)) >= np.max(np.abs(g)):
            break
        eps, cur = eps + step, trial
    return eps, cur


@dataclass(frozen=True)
class MCMCConfig:
    beta: float = 0.1
    n_iter: int = 50_000
    burn_in: int = 10_000
    thin: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if self.n_iter < 1 or not 0 <= self.burn_in < self.n_iter:
            raise ValueError("need 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    @property
    def n_retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


@dataclass
class PosteriorSamples:
    samples: np.ndarray
    acceptance_rate: float
    n_accepted: int
    n_iter: int
    loglik_trace: np.ndarray = field(repr=False)
    logpost_trace: np.ndarray = field(repr=False)

    def __len__(self):
        return self.samples.shape[0]


def pcn_sample(basis: RFFBasis, dataset: Dataset, grid: QuadratureGrid, config: MCMCConfig,
               init=None) -> PosteriorSamples:
    """Preconditioned Crank-Nicolson chain over the weights.

    Proposal ``sqrt(1 - beta^2) eps + beta xi`` leaves the N(0, I) prior
    invariant, so acceptance uses the likelihood ratio only.
    """
    post = SLGPPosterior(basis, dataset, grid)
    rng = np.random.default_rng(config.seed)
    dim = basis.n_features
    eps = np.zeros(dim) if init is None else np.array(init, dtype=float)
    ll = post.log_likelihood(eps)
    rho = np.sqrt(1.0 - config.beta**2)
    kept = np.empty((config.n_retained, dim))
    ll_trace = np.empty(config.n_iter)
    lp_trace = np.empty(config.n_iter)
    n_acc = 0
    k = 0
    for it in range(config.n_iter):
        prop = rho * eps + config.beta * rng.standard_normal(dim)
        ll_prop = post.log_likelihood(prop)
        if rng.random() < np.exp(min(0.0, ll_prop - ll)):
            eps, ll = prop, ll_prop
            n_acc += 1
        ll_trace[it] = ll
        lp_trace[it] = ll - 0.5 * eps @ eps
        if it >= config.burn_in and (it - config.burn_in + 1) % config.thin == 0:
            kept[k] = eps
            k += 1
    return PosteriorSamples(kept[:k], n_acc / config.n_iter, n_acc, config.n_iter, ll_trace, lp_trace)


@dataclass
class HyperGrid:
    """Lengthscale candidates, each a vector of fractions of the per-dimension range."""

    candidates: np.ndarray
    variance: float = 1.0

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.candidates, dtype=float))
        if c.size == 0:
            raise ValueError("empty hyperparameter grid")
        if np.any(c <= 0):
            raise ValueError("lengthscale fractions must be positive")
        self.candidates = c

    @classmethod
    def product(cls, per_dim: Sequence[Sequence[float]], variance: float = 1.0,
                tie: Sequence[Sequence[int]] = ()) -> "HyperGrid":
        """Cartesian product of per-dimension fraction lists.

        ``tie`` groups dimensions that share one value (e.g. latitude and
        longitude); the group takes the list of its first member.
        """
        d = len(per_dim)
        groups, seen = [], set()
        for g in tie:
            groups.append(list(g))
            seen.update(g)
        groups += [[i] for i in range(d) if i not in seen]
        mesh = np.meshgrid(*[np.asarray(per_dim[g[0]], dtype=float) for g in groups], indexing="ij")
        cand = np.empty((mesh[0].size, d))
        for g, m in zip(groups, mesh):
            for i in g:
                cand[:, i] = m.ravel()
        return cls(cand, variance)


@dataclass
class GridSearchResult:
    fractions: np.ndarray
    lengthscales: np.ndarray
    neg_log_posterior: np.ndarray
    converged: np.ndarray
    errors: list
    best_index: int
    best_map: MAPResult | None = field(default=None, repr=False)

    @property
    def best_fractions(self) -> np.ndarray:
        return self.fractions[self.best_index]

    @property
    def best_lengthscales(self) -> np.ndarray:
        return self.lengthscales[self.best_index]

    def table(self) -> list:
        return [
            {"fractions": f.tolist(), "lengthscales": l.tolist(), "neg_log_posterior": float(v),
             "converged": bool(c), "error": e}
            for f, l, v, c, e in zip(self.fractions, self.lengthscales, self.neg_log_posterior,
                                     self.converged, self.errors)
        ]


def _pick_best(values, fractions, rtol=1e-9):
    finite = np.isfinite(values)
    if not finite.any():
        raise ArithmeticError("every grid-search candidate failed")
    vmin = np.min(values[finite])
    near = np.flatnonzero(finite & (values <= vmin + rtol * max(1.0, abs(vmin))))
    # ties go to the smoother model
    smooth = np.sum(np.log(fractions[near]), axis=1)
    return int(near[np.argmax(smooth)])


def hyper_grid_search(spec_template: KernelSpec, hyper: HyperGrid, dataset: Dataset,
                      grid: QuadratureGrid, p: int, seed: int, tol: float = 1e-6,
                      max_iter: int = 10_000) -> GridSearchResult:
    """MAP fit for each lengthscale candidate, keeping the lowest negative log posterior.

    Every candidate uses the same basis seed, so only the lengthscales differ.
    """
    domain = dataset.domain
    ranges = np.array([hi - lo for lo, hi in domain.bounds_D + domain.bounds_T])
    if hyper.candidates.shape[1] != ranges.size:
        raise ValueError(f"candidates need {ranges.size} entries, got {hyper.candidates.shape[1]}")
    K = hyper.candidates.shape[0]
    nlp = np.full(K, np.inf)
    conv = np.zeros(K, dtype=bool)
    errors: list = [None] * K
    fits: list = [None] * K
    for k, frac in enumerate(hyper.candidates):
        spec = KernelSpec(spec_template.family, hyper.variance, frac * ranges, nu=spec_template.nu)
        try:
            basis = build_basis(spec, domain, p, seed)
            fit = map_estimate(basis, dataset, grid, tol=tol, max_iter=max_iter)
        except (ArithmeticError, FloatingPointError, ValueError) as exc:
            errors[k] = f"{type(exc).__name__}: {exc}"
            logger.warning("candidate %s failed: %s", frac, exc)
            continue
        fits[k] = fit
        nlp[k] = -fit.logpost
        conv[k] = fit.converged
        if not fit.converged:
            errors[k] = f"not converged: {fit.message}"
    best = _pick_best(nlp, hyper.candidates)
    return GridSearchResult(hyper.candidates.copy(), hyper.candidates * ranges, nlp, conv,
                            errors, best, fits[best])


@dataclass
class Prediction:
    x: np.ndarray
    draws: np.ndarray = field(repr=False)
    mean: np.ndarray = field(repr=False)
    band_probs: np.ndarray
    bands: np.ndarray = field(repr=False)
    probs: np.ndarray
    draw_quantiles: np.ndarray | None = field(repr=False)
    draw_means: np.ndarray = field(repr=False)
    draw_variances: np.ndarray = field(repr=False)

    @property
    def quantile_mean(self):
        return None if self.draw_quantiles is None else self.draw_quantiles.mean(axis=0)

    @property
    def quantile_std(self):
        return None if self.draw_quantiles is None else self.draw_quantiles.std(axis=0)


def predict_density(basis: RFFBasis, samples, x, grid: QuadratureGrid,
                    probs: Sequence[float] = (0.1, 0.5, 0.9),
                    band_probs: Sequence[float] = (0.1, 0.9)) -> Prediction:
    """Posterior predictive density slices at location ``x``.

    ``samples`` is a :class:`PosteriorSamples` or an array of weight vectors.
    Per-draw slices, their average, pointwise empirical bands and per-draw
    moments and quantiles are returned.
    """
    eps = samples.samples if isinstance(samples, PosteriorSamples) else np.atleast_2d(samples)
    if eps.shape[0] == 0:
        raise ValueError("empty posterior chain")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not basis.domain.contains(x=x):
        raise ValueError(f"location {x} outside D")
    z = field_on_grid(basis, eps, x[None, :], grid.nodes)[:, 0, :]
    draws = normalize_log_density(z, grid)
    band_probs = np.asarray(band_probs, dtype=float)
    bands = np.quantile(draws, band_probs, axis=0)
    probs = np.asarray(probs, dtype=float)
    dq = quantiles(draws, grid, probs) if grid.d_T == 1 and probs.size else None
    dm, dv = moments(draws, grid)
    return Prediction(x, draws, draws.mean(axis=0), band_probs, bands, probs, dq, dm, dv)
