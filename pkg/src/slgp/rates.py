"""
Monte Carlo estimates of ``E[D(Y_x0, Y_x0+h)^gamma]`` for prior SLGPs and
log-log slope fits against the theoretical exponents.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .density import QuadratureGrid, build_grid, normalize_log_density
from .kernels import DomainSpec, KernelSpec, spectral_sample
from .metrics import MetricKind, hellinger, kl, total_variation
from .rff import RFFBasis, field_on_grid

RATE_METRICS = (MetricKind.HELLINGER, MetricKind.KL, MetricKind.TV)
DEFAULT_FIT_RANGE = (0.01, 0.1)


def theoretical_rate(metric, gamma: float, alpha1: float) -> float:
    """Exponent of ``||x - x'||`` bounding the mean power of the dissimilarity.

    ``gamma * alpha1 / 2`` for Hellinger, ``gamma * alpha1`` for KL and TV.
    """
    metric = MetricKind.parse(metric)
    if gamma <= 0 or alpha1 <= 0:
        raise ValueError("gamma and alpha1 must be positive")
    if metric == MetricKind.HELLINGER:
        return gamma * alpha1 / 2
    if metric in (MetricKind.KL, MetricKind.TV):
        return gamma * alpha1
    raise ValueError(f"no rate for metric {metric.value!r}")


def default_offsets(domain: DomainSpec | None = None, n: int = 16) -> np.ndarray:
    """Geometric lags from 0.005 to 0.3 of the domain diameter."""
    diam = 1.0 if domain is None else domain.diam_D
    return diam * np.geomspace(0.005, 0.3, n)


@dataclass
class RateExperiment:
    kernel: KernelSpec
    metric: MetricKind = MetricKind.HELLINGER
    gamma: float = 1.0
    offsets: np.ndarray = field(default_factory=default_offsets)
    n_reps: int = 1000
    p: int = 512
    seed: int = 0
    domain: DomainSpec = field(default_factory=lambda: DomainSpec.unit(1, 1))

    def __post_init__(self):
        self.metric = MetricKind.parse(self.metric)
        if self.metric not in RATE_METRICS:
            raise ValueError("rate experiments use Hellinger, KL or TV")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        self.offsets = np.asarray(self.offsets, dtype=float)
        if self.offsets.ndim != 1 or self.offsets.size == 0:
            raise ValueError("offsets must be a non-empty vector")
        if np.any(self.offsets < 0) or np.any(np.diff(self.offsets) <= 0):
            raise ValueError("offsets must be non-negative and increasing")
        if self.n_reps < 100:
            raise ValueError("rate experiments need at least 100 replicates")
        if self.p < 1:
            raise ValueError("p must be positive")


@dataclass
class RateResult:
    metric: MetricKind
    gamma: float
    offsets: np.ndarray
    estimates: np.ndarray
    stderr: np.ndarray
    theoretical: float
    slope: float = float("nan")
    fit_range: tuple = DEFAULT_FIT_RANGE

    def to_dict(self) -> dict:
        return {"metric": self.metric.value, "gamma": self.gamma, "slope": self.slope,
                "theoretical_exponent": self.theoretical, "fit_range": list(self.fit_range),
                "offsets": self.offsets.tolist(), "estimates": self.estimates.tolist(),
                "stderr": self.stderr.tolist()}


def _lag_points(domain, offsets):
    x0 = domain.center_D
    xs = np.repeat(x0[None, :], offsets.size + 1, axis=0)
    xs[1:, 0] += offsets
    if not domain.contains(x=xs):
        raise ValueError("offsets move the second location outside D")
    return xs


def simulate_distances(kernel: KernelSpec, offsets, grid: QuadratureGrid, n_reps: int = 1000,
                       p: int = 512, seed: int = 0, domain: DomainSpec | None = None,
                       metrics=RATE_METRICS) -> dict:
    """Per-replicate dissimilarities between ``Y(x0, .)`` and ``Y(x0 + h e_1, .)``.

    Each replicate draws a fresh frequency set and fresh weights from
    independent child seeds, so replicates are exchangeable and the
    ordered reduction is reproducible. ``x0`` is the centre of ``D``.

    Returns
    -------
    dict
        ``MetricKind -> array of shape (n_reps, len(offsets))``.
    """
    domain = DomainSpec.unit(1, 1) if domain is None else domain
    offsets = np.asarray(offsets, dtype=float)
    xs = _lag_points(domain, offsets)
    metrics = [MetricKind.parse(m) for m in metrics]
    out = {m: np.empty((n_reps, offsets.size)) for m in metrics}
    fns = {MetricKind.HELLINGER: hellinger, MetricKind.KL: kl, MetricKind.TV: total_variation}
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(n_reps)):
        ss_basis, ss_eps = child.spawn(2)
        basis = RFFBasis(spectral_sample(kernel, p, ss_basis), kernel.variance, None, domain, kernel)
        eps = np.random.default_rng(ss_eps).standard_normal(basis.n_features)
        dens = normalize_log_density(field_on_grid(basis, eps, xs, grid.nodes), grid)
        for m in metrics:
            out[m][r] = fns[m](dens[:1], dens[1:], grid)
    return out


def rate_result(distances, offsets, metric, gamma: float, alpha1: float,
                fit_range=DEFAULT_FIT_RANGE) -> RateResult:
    """Average ``distances ** gamma`` over replicates and fit the slope."""
    metric = MetricKind.parse(metric)
    powered = np.asarray(distances, dtype=float) ** gamma
    est = powered.mean(axis=0)
    se = powered.std(axis=0, ddof=1) / np.sqrt(powered.shape[0]) if powered.shape[0] > 1 \
        else np.full(est.shape, np.nan)
    res = RateResult(metric, gamma, np.asarray(offsets, dtype=float), est, se,
                     theoretical_rate(metric, gamma, alpha1), fit_range=tuple(fit_range))
    in_range = (res.offsets >= fit_range[0]) & (res.offsets <= fit_range[1])
    if in_range.sum() >= 4 and np.all(est[in_range] > 0):
        res.slope = fit_rate_slope(res, fit_range)
    return res


def simulate_mean_power(exp: RateExperiment, grid: QuadratureGrid | None = None,
                        fit_range=None) -> RateResult:
    """Estimate ``E[D^gamma]`` at each offset for a prior SLGP."""
    grid = build_grid(exp.domain, 201) if grid is None else grid
    fit_range = tuple(np.asarray(DEFAULT_FIT_RANGE) * exp.domain.diam_D) if fit_range is None else fit_range
    dist = simulate_distances(exp.kernel, exp.offsets, grid, exp.n_reps, exp.p, exp.seed,
                              exp.domain, metrics=(exp.metric,))
    return rate_result(dist[exp.metric], exp.offsets, exp.metric, exp.gamma,
                       exp.kernel.holder_alpha1, fit_range)


def fit_rate_slope(result, fit_range=DEFAULT_FIT_RANGE) -> float:
    """Least-squares slope of ``log(estimate)`` against ``log(offset)`` within ``fit_range``.

    ``result`` is a :class:`RateResult` or a pair ``(offsets, estimates)``.
    """
    if isinstance(result, RateResult):
        h, e = result.offsets, result.estimates
    else:
        h, e = (np.asarray(v, dtype=float) for v in result)
    lo, hi = fit_range
    sel = (h >= lo) & (h <= hi)
    if sel.sum() < 4:
        raise ValueError("need at least 4 offsets inside the fit range")
    if np.any(e[sel] <= 0):
        raise ValueError("estimates must be positive inside the fit range")
    slope, _ = np.polyfit(np.log(h[sel]), np.log(e[sel]), 1)
    return float(slope)
