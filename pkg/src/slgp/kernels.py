"""
Stationary covariance kernels on the product space ``D x T``.

Functions
---------
eval_kernel
    Evaluate ``k(y, y2)`` for a :class:`KernelSpec`.
canonical_semidistance
    ``sqrt(k(y, y) + k(y2, y2) - 2 k(y, y2))``.
increment_kernel
    Covariance of the log-increments ``Z(x, t1) - Z(x, t2)``.
spectral_sample
    Draw frequencies from the normalized spectral measure of a kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

FAMILIES = ("matern", "squared_exponential")
MATERN_NUS = (0.5, 1.5, 2.5)

# radicand noise tolerated before clamping to zero
_SEMIDIST_CLAMP = 1e-12


@dataclass(frozen=True)
class DomainSpec:
    """Boxes ``D`` (spatial index) and ``T`` (response space).

    Parameters
    ----------
    bounds_D, bounds_T : sequence of (lower, upper)
        One closed interval per dimension, ``lower < upper``.
    """

    bounds_D: tuple
    bounds_T: tuple

    def __init__(self, bounds_D: Sequence, bounds_T: Sequence):
        bD = _as_bounds(bounds_D, "bounds_D")
        bT = _as_bounds(bounds_T, "bounds_T")
        object.__setattr__(self, "bounds_D", bD)
        object.__setattr__(self, "bounds_T", bT)

    @classmethod
    def unit(cls, d_D: int = 1, d_T: int = 1) -> "DomainSpec":
        return cls([(0.0, 1.0)] * d_D, [(0.0, 1.0)] * d_T)

    @property
    def d_D(self) -> int:
        return len(self.bounds_D)

    @property
    def d_T(self) -> int:
        return len(self.bounds_T)

    @property
    def dim(self) -> int:
        return self.d_D + self.d_T

    @property
    def volume_D(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds_D]))

    @property
    def volume_T(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds_T]))

    @property
    def diam_D(self) -> float:
        """Sup-norm diameter of ``D``."""
        return float(max(hi - lo for lo, hi in self.bounds_D))

    @property
    def center_D(self) -> np.ndarray:
        return np.array([(lo + hi) / 2 for lo, hi in self.bounds_D])

    def contains(self, x=None, t=None, atol: float = 1e-12) -> bool:
        """True if every row of ``x`` lies in ``D`` and of ``t`` in ``T``."""
        for pts, bounds in ((x, self.bounds_D), (t, self.bounds_T)):
            if pts is None:
                continue
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            lo = np.array([b[0] for b in bounds])
            hi = np.array([b[1] for b in bounds])
            if pts.shape[-1] != len(bounds):
                return False
            if np.any(pts < lo - atol) or np.any(pts > hi + atol):
                return False
        return True

    def to_dict(self) -> dict:
        return {"bounds_D": [list(b) for b in self.bounds_D],
                "bounds_T": [list(b) for b in self.bounds_T]}

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        return cls(d["bounds_D"], d["bounds_T"])


def _as_bounds(bounds, name):
    out = []
    for b in bounds:
        lo, hi = (float(v) for v in b)
        if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
            raise ValueError(f"{name}: interval {b!r} must satisfy lower < upper")
        out.append((lo, hi))
    if not out:
        raise ValueError(f"{name}: at least one dimension required")
    return tuple(out)


@dataclass(frozen=True)
class KernelSpec:
    """Stationary kernel: family, variance and per-dimension lengthscales.

    ``family`` is ``"matern"`` (with ``nu`` in {1/2, 3/2, 5/2}) or
    ``"squared_exponential"``. Distances are ``r = ||(y - y2) / lengthscales||_2``.
    """

    family: str
    variance: float
    lengthscales: np.ndarray = field(repr=False)
    nu: float | None = None

    def __post_init__(self):
        fam = self.family.lower().replace("-", "_")
        if fam in ("se", "gaussian", "rbf"):
            fam = "squared_exponential"
        if fam == "exponential":
            fam, nu = "matern", 0.5
        else:
            nu = self.nu
        if fam not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if fam == "matern":
            if nu is None or float(nu) not in MATERN_NUS:
                raise ValueError(f"Matern nu must be one of {MATERN_NUS}, got {nu!r}")
            nu = float(nu)
        else:
            nu = None
        theta = np.atleast_1d(np.asarray(self.lengthscales, dtype=float)).copy()
        if theta.ndim != 1 or theta.size == 0 or np.any(~np.isfinite(theta)) or np.any(theta <= 0):
            raise ValueError("lengthscales must be a non-empty vector of positive reals")
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise ValueError("variance must be positive")
        theta.flags.writeable = False
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "variance", float(self.variance))
        object.__setattr__(self, "lengthscales", theta)

    @classmethod
    def matern(cls, nu: float, variance: float, lengthscales) -> "KernelSpec":
        return cls("matern", variance, lengthscales, nu=nu)

    @classmethod
    def squared_exponential(cls, variance: float, lengthscales) -> "KernelSpec":
        return cls("squared_exponential", variance, lengthscales)

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    @property
    def holder_alpha1(self) -> float:
        """Hölder exponent of ``d_k^2`` in the spatial lag.

        Exponential (Matern 1/2) kernels give 1; the differentiable
        families give 2.
        """
        if self.family == "matern" and self.nu == 0.5:
            return 1.0
        return 2.0

    @property
    def holder_alpha2(self) -> float:
        return self.holder_alpha1

    def with_lengthscales(self, lengthscales) -> "KernelSpec":
        return KernelSpec(self.family, self.variance, lengthscales, nu=self.nu)

    def with_variance(self, variance: float) -> "KernelSpec":
        return KernelSpec(self.family, variance, self.lengthscales, nu=self.nu)

    def to_dict(self) -> dict:
        return {"family": self.family, "nu": self.nu, "variance": self.variance,
                "lengthscales": self.lengthscales.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(d["family"], d["variance"], d["lengthscales"], nu=d.get("nu"))

    def __eq__(self, other):
        if not isinstance(other, KernelSpec):
            return NotImplemented
        return (self.family == other.family and self.nu == other.nu
                and self.variance == other.variance
                and np.array_equal(self.lengthscales, other.lengthscales))

    def __hash__(self):
        return hash((self.family, self.nu, self.variance, self.lengthscales.tobytes()))


def correlation(spec: KernelSpec, r) -> np.ndarray:
    """Unit-variance radial profile ``k(r) / sigma^2`` at scaled distance ``r``."""
    r = np.asarray(r, dtype=float)
    if spec.family == "squared_exponential":
        return np.exp(-0.5 * r**2)
    nu = spec.nu
    if nu == 0.5:
        return np.exp(-r)
    if nu == 1.5:
        s = np.sqrt(3.0) * r
        return (1.0 + s) * np.exp(-s)
    s = np.sqrt(5.0) * r
    return (1.0 + s + s**2 / 3.0) * np.exp(-s)


def _scaled_distance(spec, y, y2):
    y = np.asarray(y, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if y.shape[-1] != spec.dim or y2.shape[-1] != spec.dim:
        raise ValueError(
            f"points must have dimension {spec.dim}, got {y.shape[-1]} and {y2.shape[-1]}")
    diff = (y - y2) / spec.lengthscales
    return np.sqrt(np.sum(diff**2, axis=-1))


def eval_kernel(spec: KernelSpec, y, y2):
    """Evaluate ``k(y, y2)``.

    ``y`` and ``y2`` are arrays whose last axis has length ``d_D + d_T``;
    leading axes broadcast.
    """
    out = spec.variance * correlation(spec, _scaled_distance(spec, y, y2))
    return out if np.ndim(out) else float(out)


def kernel_matrix(spec: KernelSpec, Y, Y2=None) -> np.ndarray:
    """Gram matrix ``[k(Y[i], Y2[j])]``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    Y2 = Y if Y2 is None else np.atleast_2d(np.asarray(Y2, dtype=float))
    return eval_kernel(spec, Y[:, None, :], Y2[None, :, :])


def canonical_semidistance(spec: KernelSpec, y, y2):
    """Canonical semi-distance ``d_k(y, y2)``."""
    sq = eval_kernel(spec, y, y) + eval_kernel(spec, y2, y2) - 2.0 * eval_kernel(spec, y, y2)
    sq = np.asarray(sq, dtype=float)
    if np.any(sq < -_SEMIDIST_CLAMP * spec.variance):
        raise ArithmeticError("negative squared semi-distance beyond rounding noise")
    out = np.sqrt(np.clip(sq, 0.0, None))
    return out if np.ndim(out) else float(out)


def increment_kernel(spec: KernelSpec, a, b):
    """Covariance of ``Z(x, t1) - Z(x, t2)`` and ``Z(x', t1') - Z(x', t2')``.

    Parameters
    ----------
    a, b : tuple (x, t1, t2)
        Spatial location and the two response values of each increment.
    """
    x, t1, t2 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in a)
    xp, s1, s2 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in b)

    def k(u, tu, v, tv):
        return eval_kernel(spec, np.concatenate([u, tu], axis=-1), np.concatenate([v, tv], axis=-1))

    return float(k(x, t1, xp, s1) + k(x, t2, xp, s2) - k(x, t1, xp, s2) - k(x, t2, xp, s1))


def spectral_sample(spec: KernelSpec, n: int, seed) -> np.ndarray:
    """Draw ``n`` frequency vectors from the kernel's spectral measure.

    The convention is the one for which ``E[cos(w . tau)] = k(tau) / sigma^2``.
    Lengthscales are folded in (coordinate-wise division), so features are
    evaluated at raw coordinates.

    Returns
    -------
    ndarray, shape (n, d)
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    d = spec.dim
    g = rng.standard_normal((n, d))
    if spec.family == "matern":
        dof = 2.0 * spec.nu
        s = rng.chisquare(dof, size=(n, 1))
        g = g * np.sqrt(dof / s)
    return g / spec.lengthscales
