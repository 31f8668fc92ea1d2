"""
Dissimilarities between densities sampled on a shared quadrature grid.

All functions accept :class:`~slgp.density.DensitySlice` objects or raw value
arrays; raw arrays may carry leading batch axes with the grid on the last axis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .density import DensitySlice, QuadratureGrid


class MetricKind(str, enum.Enum):
    HELLINGER = "hellinger"
    KL = "kl"
    TV = "tv"
    SUPLOG = "suplog"

    @classmethod
    def parse(cls, value) -> "MetricKind":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "").replace("_", "")
        aliases = {"h": "hellinger", "totalvariation": "tv", "kullbackleibler": "kl",
                   "sup": "suplog", "suplog": "suplog"}
        return cls(aliases.get(key, key))


def _values(f):
    return f.values if isinstance(f, DensitySlice) else np.asarray(f, dtype=float)


def _pair(f, g, grid):
    fv, gv = _values(f), _values(g)
    if fv.shape[-1] != grid.size or gv.shape[-1] != grid.size:
        raise ValueError("densities are not sampled on the given grid")
    return fv, gv


def _require_positive(*arrs):
    for a in arrs:
        if np.any(a <= 0):
            raise ValueError("strictly positive densities required")


def hellinger(f, g, grid: QuadratureGrid):
    """``sqrt(1/2 int (sqrt f - sqrt g)^2)``, clipped into [0, 1]."""
    fv, gv = _pair(f, g, grid)
    sq = 0.5 * np.sum(grid.weights * (np.sqrt(fv) - np.sqrt(gv)) ** 2, axis=-1)
    return np.clip(np.sqrt(sq), 0.0, 1.0)


def kl(f, g, grid: QuadratureGrid):
    """``int f log(f / g)``."""
    fv, gv = _pair(f, g, grid)
    _require_positive(fv, gv)
    return np.clip(np.sum(grid.weights * fv * (np.log(fv) - np.log(gv)), axis=-1), 0.0, None)


def total_variation(f, g, grid: QuadratureGrid):
    """``1/2 int |f - g|``."""
    fv, gv = _pair(f, g, grid)
    return np.clip(0.5 * np.sum(grid.weights * np.abs(fv - gv), axis=-1), 0.0, 1.0)


def suplog(f, g, grid: QuadratureGrid):
    """``max |log f - log g|`` over the grid nodes."""
    fv, gv = _pair(f, g, grid)
    _require_positive(fv, gv)
    return np.max(np.abs(np.log(fv) - np.log(gv)), axis=-1)


_DISPATCH = {
    MetricKind.HELLINGER: hellinger,
    MetricKind.KL: kl,
    MetricKind.TV: total_variation,
    MetricKind.SUPLOG: suplog,
}


def divergence(kind, f, g, grid: QuadratureGrid):
    """Evaluate the dissimilarity named by ``kind`` between ``f`` and ``g``."""
    out = _DISPATCH[MetricKind.parse(kind)](f, g, grid)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class HellingerBound:
    d_H: float
    h: float
    bound: float
    bound_satisfied: bool


def check_hellinger_bound(f, g, grid: QuadratureGrid, atol: float = 1e-10) -> HellingerBound:
    """Check ``d_H(f, g) <= h exp(h / 2)`` with ``h`` the sup-log distance."""
    dh = float(hellinger(f, g, grid))
    h = float(suplog(f, g, grid))
    bound = h * np.exp(h / 2)
    return HellingerBound(dh, h, bound, bool(dh <= bound + atol))


def integrated_hellinger(field_f, field_g, d_weights, grid: QuadratureGrid) -> float:
    """Integrated Hellinger distance between two density fields.

    ``field_f`` and ``field_g`` hold one slice per node of a quadrature grid
    over ``D`` (shape (n_x, M) or lists of slices); ``d_weights`` are that
    grid's weights. Returns ``sqrt(1/2 sum_x w_x sum_t w_t (sqrt f - sqrt g)^2)``.
    """
    F = np.array([_values(s) for s in field_f]) if isinstance(field_f, (list, tuple)) else _values(field_f)
    G = np.array([_values(s) for s in field_g]) if isinstance(field_g, (list, tuple)) else _values(field_g)
    d_weights = np.asarray(d_weights, dtype=float)
    if F.shape != G.shape or F.ndim != 2 or F.shape[0] != d_weights.size:
        raise ValueError("fields must share the same D-grid and T-grid")
    if F.shape[1] != grid.size:
        raise ValueError("fields are not sampled on the given T-grid")
    per_x = np.sum(grid.weights * (np.sqrt(F) - np.sqrt(G)) ** 2, axis=-1)
    return float(np.sqrt(0.5 * np.dot(d_weights, per_x)))
