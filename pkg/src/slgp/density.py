"""
The spatial logistic density transform on a quadrature grid over ``T``.

``Y(x, t) = exp(Z(x, t)) / int_T exp(Z(x, u)) du``, with the integral taken
by a tensor-product trapezoid rule and a weight-aware log-sum-exp.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import logsumexp

from .kernels import DomainSpec
from .rff import RFFBasis, field_on_grid


@dataclass(frozen=True)
class QuadratureGrid:
    """Regular tensor grid over ``T`` with trapezoid weights.

    ``nodes`` has shape (M, d_T) in C order over ``axes``; ``weights`` has
    shape (M,) and sums to the volume of ``T``.
    """

    axes: tuple = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def m(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def d_T(self) -> int:
        return len(self.axes)

    def same_as(self, other: "QuadratureGrid") -> bool:
        return (self.m == other.m
                and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes)))


def _trapezoid_weights(axis):
    h = np.diff(axis)
    w = np.zeros_like(axis)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def build_grid(domain: DomainSpec, m) -> QuadratureGrid:
    """Trapezoid grid over ``domain``'s response box with ``m`` nodes per dimension."""
    ms = [int(m)] * domain.d_T if np.ndim(m) == 0 else [int(v) for v in m]
    if len(ms) != domain.d_T:
        raise ValueError(f"need {domain.d_T} node counts, got {len(ms)}")
    if any(v < 2 for v in ms):
        raise ValueError("at least 2 nodes per dimension")
    axes = tuple(np.linspace(lo, hi, k) for (lo, hi), k in zip(domain.bounds_T, ms))
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=-1)
    wmesh = np.meshgrid(*[_trapezoid_weights(a) for a in axes], indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wmesh], axis=-1), axis=-1)
    for arr in (nodes, weights):
        arr.flags.writeable = False
    return QuadratureGrid(axes, nodes, weights)


@dataclass(frozen=True)
class DensitySlice:
    """Density of ``Y(x, .)`` at the nodes of a grid."""

    x: np.ndarray
    values: np.ndarray = field(repr=False)

    @property
    def log_values(self) -> np.ndarray:
        return np.log(self.values)


def logsumexp_w(z, weights, axis=-1):
    """``log sum_m weights[m] * exp(z[..., m])`` computed stably."""
    return logsumexp(z, axis=axis, b=weights)


def normalize_log_density(z, grid: QuadratureGrid) -> np.ndarray:
    """Apply the logistic transform to log-density values ``z`` on ``grid``.

    ``z`` has the grid along its last axis; leading axes are independent
    slices. Adding any per-slice constant to ``z`` leaves the result unchanged.
    """
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != grid.size:
        raise ValueError(f"last axis must have {grid.size} entries, got {z.shape[-1]}")
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite log-density values")
    return np.exp(z - logsumexp_w(z, grid.weights)[..., None])


def slogt_values(basis: RFFBasis, eps, xs, grid: QuadratureGrid) -> np.ndarray:
    """Density values at ``grid`` for each row of ``xs``.

    ``eps`` may be a single weight vector (result shape (n, M)) or a stack
    (result shape (R, n, M)).
    """
    z = field_on_grid(basis, eps, xs, grid.nodes)
    return normalize_log_density(z, grid)


def slogt_field(basis: RFFBasis, eps, x, grid: QuadratureGrid) -> DensitySlice:
    """Density slice ``Y(x, .)`` induced by weight vector ``eps``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not basis.domain.contains(x=x):
        raise ValueError(f"location {x} outside D")
    vals = slogt_values(basis, eps, x[None, :], grid)[0]
    return DensitySlice(x, vals)


@dataclass
class Summary:
    mean: np.ndarray
    variance: np.ndarray
    quantiles: np.ndarray | None
    probs: np.ndarray | None


def _check_probs(probs):
    probs = np.asarray(probs, dtype=float)
    if np.any((probs <= 0) | (probs >= 1)):
        raise ValueError("probabilities must lie in (0, 1)")
    return probs


def cdf_1d(values, grid: QuadratureGrid) -> np.ndarray:
    """Cumulative trapezoid CDF along the (1-d) grid, pinned to end at 1."""
    if grid.d_T != 1:
        raise ValueError("CDF requires a one-dimensional response space")
    values = np.asarray(values, dtype=float)
    c = cumulative_trapezoid(values, grid.axes[0], axis=-1, initial=0.0)
    return c / c[..., -1:]


def _invert_cdf(cdf, nodes, probs):
    idx = np.searchsorted(cdf, probs, side="left")
    idx = np.clip(idx, 1, len(nodes) - 1)
    hit = cdf[idx] == probs
    lo, hi = cdf[idx - 1], cdf[idx]
    frac = (probs - lo) / (hi - lo)
    q = nodes[idx - 1] + frac * (nodes[idx] - nodes[idx - 1])
    return np.where(hit, nodes[idx], q)


def quantiles(values, grid: QuadratureGrid, probs) -> np.ndarray:
    """Quantiles by linear inversion of the trapezoid CDF.

    ``values`` may carry leading batch axes; the result has shape
    ``values.shape[:-1] + (len(probs),)``.
    """
    probs = _check_probs(np.atleast_1d(probs))
    values = np.asarray(values, dtype=float)
    cdf = cdf_1d(values, grid)
    flat = cdf.reshape(-1, cdf.shape[-1])
    out = np.array([_invert_cdf(c, grid.axes[0], probs) for c in flat])
    return out.reshape(values.shape[:-1] + (probs.size,))


def moments(values, grid: QuadratureGrid):
    """Mean and per-dimension variance of the density(ies) in ``values``."""
    values = np.asarray(values, dtype=float)
    wv = values * grid.weights
    mean = wv @ grid.nodes
    centred = grid.nodes - mean[..., None, :]
    var = np.sum(wv[..., None] * centred**2, axis=-2)
    return mean, var


def summarize(slice_: DensitySlice, grid: QuadratureGrid, probs: Sequence[float] = ()) -> Summary:
    """Mean, variance and (for 1-d ``T``) quantiles of a density slice."""
    probs = _check_probs(np.atleast_1d(np.asarray(probs, dtype=float)))
    mean, var = moments(slice_.values, grid)
    if probs.size == 0:
        return Summary(mean, var, None, None)
    if grid.d_T != 1:
        raise ValueError("quantiles require a one-dimensional response space")
    return Summary(mean, var, quantiles(slice_.values, grid, probs), probs)


def grid_from_nodes(nodes) -> QuadratureGrid:
    """Rebuild a tensor trapezoid grid from its node list (C order)."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    axes = tuple(np.unique(nodes[:, j]) for j in range(nodes.shape[1]))
    if any(len(a) < 2 for a in axes):
        raise ValueError("need at least 2 distinct nodes per dimension")
    mesh = np.meshgrid(*axes, indexing="ij")
    expect = np.stack([g.ravel() for g in mesh], axis=-1)
    if expect.shape != nodes.shape or not np.array_equal(expect, nodes):
        raise ValueError("nodes do not form a sorted tensor grid")
    wmesh = np.meshgrid(*[_trapezoid_weights(a) for a in axes], indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wmesh], axis=-1), axis=-1)
    return QuadratureGrid(axes, expect, weights)


def sample_slice(values, grid: QuadratureGrid, n: int, rng) -> np.ndarray:
    """Draw ``n`` responses from a 1-d density slice by CDF inversion."""
    cdf = cdf_1d(values, grid)
    return np.interp(rng.random(n), cdf, grid.axes[0])
