"""
Random Fourier feature bases and the finite-rank GPs they define.

A basis holds ``p`` frequencies ``w_j`` (lengthscales already folded in).
The feature map is ``phi(y) = [cos(w_1.y) .. cos(w_p.y), sin(w_1.y) .. sin(w_p.y)]``
and the finite-rank GP is ``Z(y) = sigma / sqrt(p) * phi(y) . eps`` with
``eps ~ N(0, I_2p)``, whose covariance is ``sigma^2 / p * phi(y) . phi(y2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import DomainSpec, KernelSpec, spectral_sample


@dataclass(frozen=True)
class RFFBasis:
    frequencies: np.ndarray = field(repr=False)
    variance: float
    seed: int | None
    domain: DomainSpec
    kernel: KernelSpec | None = None

    def __post_init__(self):
        w = np.array(self.frequencies, dtype=float, ndmin=2)
        if w.shape[1] != self.domain.dim:
            raise ValueError(
                f"frequencies have dimension {w.shape[1]}, domain has {self.domain.dim}")
        w.flags.writeable = False
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def p(self) -> int:
        return self.frequencies.shape[0]

    @property
    def n_features(self) -> int:
        return 2 * self.p

    @property
    def scale(self) -> float:
        """``sigma / sqrt(p)``, the weight-to-field factor."""
        return float(np.sqrt(self.variance / self.p))

    def to_dict(self) -> dict:
        return {
            "frequencies": self.frequencies.tolist(),
            "variance": self.variance,
            "seed": self.seed,
            "domain": self.domain.to_dict(),
            "kernel": None if self.kernel is None else self.kernel.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RFFBasis":
        kern = d.get("kernel")
        return cls(
            frequencies=np.asarray(d["frequencies"], dtype=float),
            variance=d["variance"],
            seed=d.get("seed"),
            domain=DomainSpec.from_dict(d["domain"]),
            kernel=None if kern is None else KernelSpec.from_dict(kern),
        )


def build_basis(spec: KernelSpec, domain: DomainSpec, p: int, seed: int) -> RFFBasis:
    """Sample a ``p``-frequency basis approximating ``spec`` on ``domain``."""
    if int(p) < 1:
        raise ValueError("p must be >= 1")
    if spec.dim != domain.dim:
        raise ValueError(f"kernel has {spec.dim} lengthscales, domain dimension is {domain.dim}")
    w = spectral_sample(spec, int(p), seed)
    return RFFBasis(w, spec.variance, seed, domain, spec)


def _check_points(basis, y):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != basis.domain.dim:
        raise ValueError(f"points must have dimension {basis.domain.dim}, got {y.shape[-1]}")
    return y


def eval_features(basis: RFFBasis, y) -> np.ndarray:
    """Feature vectors ``phi(y)``, shape ``y.shape[:-1] + (2p,)``."""
    y = _check_points(basis, y)
    phase = y @ basis.frequencies.T
    return np.concatenate([np.cos(phase), np.sin(phase)], axis=-1)


def approx_kernel(basis: RFFBasis, y, y2):
    """Finite-rank kernel ``sigma^2 / p * phi(y) . phi(y2)``."""
    out = basis.variance / basis.p * np.sum(eval_features(basis, y) * eval_features(basis, y2), axis=-1)
    return out if np.ndim(out) else float(out)


def _check_eps(basis, eps):
    eps = np.asarray(eps, dtype=float)
    if eps.shape[-1] != basis.n_features:
        raise ValueError(f"weight vector must have length {basis.n_features}, got {eps.shape[-1]}")
    return eps


def gp_eval(basis: RFFBasis, eps, y):
    """Finite-rank GP value ``sigma / sqrt(p) * phi(y) . eps``.

    ``eps`` may be a single weight vector or a stack of shape (R, 2p); a stack
    puts the replicate axis first.
    """
    eps = _check_eps(basis, eps)
    out = basis.scale * (eval_features(basis, y) @ eps.T)
    if eps.ndim == 2 and np.ndim(out) == 2:
        out = out.T
    return out if np.ndim(out) else float(out)


def _split_phases(basis, xs, t_nodes):
    dD = basis.domain.d_D
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    t_nodes = np.asarray(t_nodes, dtype=float)
    if t_nodes.ndim == 1:
        t_nodes = t_nodes[:, None]
    if xs.shape[1] != dD or t_nodes.shape[1] != basis.domain.d_T:
        raise ValueError("location or response dimension does not match the basis domain")
    a = xs @ basis.frequencies[:, :dD].T
    b = t_nodes @ basis.frequencies[:, dD:].T
    return a, b


def field_on_grid(basis: RFFBasis, eps, xs, t_nodes) -> np.ndarray:
    """``Z(x_i, t_m)`` for every location ``x_i`` and response node ``t_m``.

    Uses the angle-addition split ``w.(x, t) = w_D.x + w_T.t`` so the cost is
    ``O(n p M)`` without materialising an ``(n, M, 2p)`` feature tensor.

    Parameters
    ----------
    eps : array, shape (2p,) or (R, 2p)
    xs : array, shape (n, d_D)
    t_nodes : array, shape (M, d_T) or (M,)

    Returns
    -------
    ndarray, shape (n, M) or (R, n, M)
    """
    eps = _check_eps(basis, eps)
    a, b = _split_phases(basis, xs, t_nodes)
    p = basis.p
    cb, sb = np.cos(b), np.sin(b)
    ec, es = eps[..., :p], eps[..., p:]
    # Z = ca @ (cb ec + sb es)^T + sa @ (cb es - sb ec)^T
    u = cb * ec[..., None, :] + sb * es[..., None, :]
    v = cb * es[..., None, :] - sb * ec[..., None, :]
    ca, sa = np.cos(a), np.sin(a)
    z = ca @ np.swapaxes(u, -1, -2) + sa @ np.swapaxes(v, -1, -2)
    return basis.scale * z


def expected_features(basis: RFFBasis, xs, t_nodes, probs) -> np.ndarray:
    """``sum_m probs[i, m] * phi(x_i, t_m)`` for each location, shape (n, 2p)."""
    a, b = _split_phases(basis, xs, t_nodes)
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    pc = probs @ np.cos(b)
    ps = probs @ np.sin(b)
    ca, sa = np.cos(a), np.sin(a)
    return np.concatenate([ca * pc - sa * ps, sa * pc + ca * ps], axis=-1)
