"""Pointwise reaction dynamics of the bulk potential.

Covers the reaction ODE dQ/dt = -bulk_gradient(Q), its reduction to the two
free eigenvalues, the long-time map onto the s_plus manifold and the
small-bulk counterexample ODE driven by a strain-rate matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from berislab import qtensor as qt
from berislab.errors import DegenerateInputError, DivergenceError, DomainError
from berislab.qtensor import Params


@dataclass(frozen=True)
class OdeConfig:
    dt: float = 1e-3
    method: str = "rk4"  # "rk4" or "eigenframe"
    t_end: float = 1.0
    tol: float = 1e-10

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("OdeConfig.dt must be positive")
        if not self.t_end >= 0:
            raise DomainError("OdeConfig.t_end must be non-negative")
        if self.method not in ("rk4", "eigenframe"):
            raise DomainError(f"unknown ODE method {self.method!r}")


def reaction_rhs(q: np.ndarray, p: Params) -> np.ndarray:
    """-aQ + b(Q^2 - tr(Q^2) I/3) - c tr(Q^2) Q."""
    return -qt.bulk_gradient(q, p)


def _steps(t_end: float, dt: float) -> tuple[int, float]:
    nsteps = max(1, math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    return nsteps, (t_end / nsteps if nsteps else 0.0)


def rk4(rhs, y: np.ndarray, t_end: float, dt: float, t0: float = 0.0) -> np.ndarray:
    """Classical RK4 for an autonomous ``rhs(y)`` with a uniform step <= dt."""
    nsteps, h = _steps(t_end, dt)
    y = np.array(y, dtype=float, copy=True)
    for i in range(nsteps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite state at t={t0 + i * h:.6g}", time=t0 + i * h, step=i)
    return y


def eigen_rhs(l1: np.ndarray, l2: np.ndarray, p: Params) -> tuple[np.ndarray, np.ndarray]:
    """Reaction flow restricted to diag(l1, l2, -l1-l2)."""
    shared = 2.0 * p.c * (l1 * l1 + l2 * l2 + l1 * l2) + p.a
    d1 = -l1 * shared + p.b * (l1 * l1 / 3.0 - 2.0 * l2 * l2 / 3.0 - 2.0 * l1 * l2 / 3.0)
    d2 = -l2 * shared + p.b * (l2 * l2 / 3.0 - 2.0 * l1 * l1 / 3.0 - 2.0 * l1 * l2 / 3.0)
    return d1, d2


def eigenvalue_flow(l0, p: Params, cfg: OdeConfig) -> np.ndarray:
    """Integrate the two-eigenvalue system; ``l0`` has shape ``(2, ...)``."""
    y0 = np.asarray(l0, dtype=float)
    return rk4(lambda y: np.array(eigen_rhs(y[0], y[1], p)), y0, cfg.t_end, cfg.dt)


def _eigh_field(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched eigen-decomposition; returns ``w (..., 3)`` and ``v (..., 3, 3)``."""
    mat = np.moveaxis(qt.to_matrix(q), (0, 1), (-2, -1))
    return np.linalg.eigh(mat)


def _from_eigen(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    mat = np.einsum("...ik,...k,...jk->...ij", v, w, v)
    return qt.from_matrix(np.moveaxis(mat, (-2, -1), (0, 1)))


def integrate_reaction(q0: np.ndarray, p: Params, cfg: OdeConfig) -> np.ndarray:
    """Approximate the reaction flow at ``cfg.t_end`` from ``q0`` (shape ``(5, ...)``).

    The eigenframe method diagonalises once and evolves only the eigenvalues,
    since the reaction flow leaves eigenvectors fixed.
    """
    q0 = np.asarray(q0, dtype=float)
    if cfg.method == "rk4":
        return rk4(lambda y: reaction_rhs(y, p), q0, cfg.t_end, cfg.dt)
    w, v = _eigh_field(q0)
    lam = np.moveaxis(w, -1, 0)
    out = eigenvalue_flow(lam[:2], p, cfg)
    w_new = np.stack([out[0], out[1], -out[0] - out[1]], axis=-1)
    return _from_eigen(w_new, v)


def long_time_limit(q0: np.ndarray, p: Params) -> np.ndarray:
    """s_plus (n n^T - I/3) with n the leading eigenvector of ``q0``."""
    if not (p.a < 0 and p.b > 0 and p.c > 0):
        raise DomainError("long-time limit needs a < 0, b > 0, c > 0")
    _, s_plus, _ = qt.stationary_scalars(p)
    w, v = _eigh_field(q0)
    if np.any(w[..., 2] - w[..., 1] <= 1e-10):
        raise DegenerateInputError("leading eigenvalue is repeated; director undefined")
    director = np.moveaxis(v[..., :, 2], -1, 0)
    return qt.uniaxial(s_plus, director)


def hessian_spectrum(p: Params) -> tuple[float, float]:
    """Closed-form pair (-a - 2b s+ - 18c s+^2, -a + 2b s+ - 6c s+^2)."""
    _, sp, _ = qt.stationary_scalars(p)
    return (-p.a - 2.0 * p.b * sp - 18.0 * p.c * sp * sp, -p.a + 2.0 * p.b * sp - 6.0 * p.c * sp * sp)


def eigen_jacobian(l1: float, l2: float, p: Params, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the two-eigenvalue system at (l1, l2)."""
    jac = np.empty((2, 2))
    for j, (e1, e2) in enumerate(((h, 0.0), (0.0, h))):
        fp = np.array(eigen_rhs(l1 + e1, l2 + e2, p))
        fm = np.array(eigen_rhs(l1 - e1, l2 - e2, p))
        jac[:, j] = (fp - fm) / (2.0 * h)
    return jac


def linearization_spectrum(p: Params) -> tuple[float, float]:
    """Exact decay rates of the eigenvalue system at the s_plus state (-m, -m).

    Both are negative when a < 0: the slower one is the radial rate of the
    uniaxial amplitude equation, the faster one the biaxial rate.
    """
    _, sp, _ = qt.stationary_scalars(p)
    # radial: d/ds of (-a s + b s^2/3 - 2c s^3/3) at s+
    radial = -p.a + 2.0 * p.b * sp / 3.0 - 2.0 * p.c * sp * sp
    # biaxial splitting mode l1 - l2 at l1 = l2 = -s+/3
    biaxial = -p.b * sp
    return tuple(sorted((radial, biaxial)))


def r0_counterexample_rhs(r: np.ndarray, strain: np.ndarray) -> np.ndarray:
    """DR + RD + (2/3)D - 2(R + I/3) tr(RD) for a symmetric traceless strain rate D ``(3, 3, ...)``."""
    rm = qt.to_matrix(r)
    d = np.asarray(strain, dtype=float)
    dr = np.einsum("ij...,jk...->ik...", d, rm)
    rd = np.einsum("ij...,jk...->ik...", rm, d)
    tr_rd = np.einsum("ij...,ji...->...", rm, d)
    eye = np.eye(3).reshape((3, 3) + (1,) * (d.ndim - 2))
    out = dr + rd + (2.0 / 3.0) * d - 2.0 * (rm + eye / 3.0) * tr_rd
    return qt.from_matrix(out)


def r0_exit_time(strain: np.ndarray, p: Params, t_max: float, dt: float = 1e-3) -> float | None:
    """First time the strain-driven ODE started at R = 0 leaves [-m, 2m]; None if it never does."""
    lo, hi = qt.interval(p)
    r = np.zeros((5,) + np.shape(strain)[2:])
    nsteps, h = _steps(t_max, dt)

    def rhs(y):
        return r0_counterexample_rhs(y, strain)

    for i in range(nsteps):
        k1 = rhs(r)
        k2 = rhs(r + 0.5 * h * k1)
        k3 = rhs(r + 0.5 * h * k2)
        k4 = rhs(r + h * k3)
        r_new = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ev = qt.eigenvalues(r_new)
        if np.any(ev[0] < lo) or np.any(ev[2] > hi):
            # linear interpolation of the crossing inside the step
            ev_old = qt.eigenvalues(r)
            over_new = max(np.max(ev[2] - hi), np.max(lo - ev[0]))
            over_old = max(np.max(ev_old[2] - hi), np.max(lo - ev_old[0]))
            frac = -over_old / (over_new - over_old) if over_new != over_old else 1.0
            return (i + frac) * h
        r = r_new
    return None
