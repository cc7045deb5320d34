"""Time stepper for the coupled velocity / Q-tensor system.

    u_t + u.grad u + grad P = eps lap u + div(sigma(Q)),   div u = 0
    Q_t + u.grad Q - S(grad u, Q) = eps lap Q - bulk_gradient(Q)

Velocity is a 3-vector depending on (x, y) only.  Diffusion is integrated
exactly in Fourier space (integrating factor) and every other term with
classical RK4, so constant-in-space states follow the reaction ODE to RK4
accuracy.  Products are dealiased with the two-thirds rule; cubic terms keep
a small residual aliasing error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from berislab import qtensor as qt
from berislab import spectral2d as sp
from berislab.errors import DivergenceError, DomainError
from berislab.qtensor import Params
from berislab.spectral2d import Grid

EYE3 = np.eye(3)


@dataclass
class SimState:
    grid: Grid
    u: np.ndarray  # (3, n, n)
    Q: np.ndarray  # (5, n, n)
    t: float = 0.0
    step: int = 0

    def copy(self) -> SimState:
        return replace(self, u=self.u.copy(), Q=self.Q.copy())


@dataclass(frozen=True)
class StepConfig:
    dt: float = 1e-3
    scheme: str = "ifrk4"
    cfl_max: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("StepConfig.dt must be positive")
        if self.scheme != "ifrk4":
            raise DomainError(f"unknown time scheme {self.scheme!r}")


@dataclass
class DiagRecord:
    t: float
    min_eig: float
    max_eig: float
    linf_Q: float
    kinetic: float
    free_energy: float
    max_gradQ: float
    Y: float | None = None
    resolved: bool = True
    extra: dict = field(default_factory=dict)

    def energy(self, eps: float) -> float:
        """Total energy kinetic + eps * free_energy, the Lyapunov functional at xi = 0."""
        return self.kinetic + eps * self.free_energy


def _eye_like(shape_tail) -> np.ndarray:
    return EYE3.reshape((3, 3) + (1,) * len(shape_tail))


def _mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ij...,jk...->ik...", a, b)


def velocity_gradient(grid: Grid, u: np.ndarray) -> np.ndarray:
    """(3, 3, n, n) array with entry [i, j] = d_j u_i (no dependence on the third coordinate)."""
    uhat = grid.fft(u)
    ikx, iky = grid.deriv_multipliers
    grad = np.zeros((3, 3) + u.shape[1:])
    grad[:, 0] = grid.ifft(ikx * uhat)
    grad[:, 1] = grid.ifft(iky * uhat)
    return grad


def s_term(grad_u: np.ndarray, q: np.ndarray, xi: float) -> np.ndarray:
    """(xi D + W)(Q + I/3) + (Q + I/3)(xi D - W) - 2 xi (Q + I/3) tr(Q grad u).

    ``grad_u[i, j] = d_j u_i``; D and W are its symmetric and antisymmetric parts.
    """
    grad_u = np.asarray(grad_u, dtype=float)
    qm = qt.to_matrix(q)
    vort = 0.5 * (grad_u - np.swapaxes(grad_u, 0, 1))
    if xi == 0.0:
        return qt.from_matrix(_mm(vort, qm) - _mm(qm, vort))
    strain = 0.5 * (grad_u + np.swapaxes(grad_u, 0, 1))
    qp = qm + _eye_like(qm.shape[2:]) / 3.0
    tr_qg = np.einsum("ij...,ji...->...", qm, grad_u)
    out = _mm(xi * strain + vort, qp) + _mm(qp, xi * strain - vort) - 2.0 * xi * qp * tr_qg
    return qt.from_matrix(out)


def _stress(q, dq_x, dq_y, lap_q, p: Params) -> np.ndarray:
    """Elastic stress tensor (3, 3, n, n) whose divergence drives the velocity."""
    qm = qt.to_matrix(q)
    lm = qt.to_matrix(lap_q)
    gx = qt.to_matrix(dq_x)
    gy = qt.to_matrix(dq_y)
    eps2 = p.eps * p.eps
    sig = np.zeros_like(qm)
    # distortion stress (grad Q . grad Q)_ij = d_i Q : d_j Q, in-plane only
    sig[0, 0] = np.einsum("kl...,kl...->...", gx, gx)
    sig[1, 1] = np.einsum("kl...,kl...->...", gy, gy)
    sig[0, 1] = sig[1, 0] = np.einsum("kl...,kl...->...", gx, gy)
    sig += _mm(lm, qm) - _mm(qm, lm)
    sig *= -eps2
    if p.xi != 0.0:
        qp = qm + _eye_like(qm.shape[2:]) / 3.0
        q_lap = np.einsum("ij...,ij...->...", qm, lm)
        sig -= eps2 * p.xi * (_mm(lm, qp) + _mm(qp, lm) - 2.0 * qp * q_lap)
        hm = qt.to_matrix(qt.bulk_gradient(q, p))
        q_h = np.einsum("ij...,ij...->...", qm, hm)
        sig += 2.0 * p.eps * p.xi * p.kappa * (_mm(qp, hm) - qp * q_h)
    return sig


class BerisOperator:
    """Spectral right-hand side of the coupled system on one grid."""

    def __init__(self, grid: Grid, p: Params):
        self.grid = grid
        self.p = p
        self.mask = grid.dealias_mask
        self.ikx, self.iky = grid.deriv_multipliers
        self.lin = -p.eps * grid.k2

    def physical(self, y: np.ndarray):
        g = self.grid
        uhat, qhat = y[:3], y[3:]
        stack = np.concatenate(
            [uhat, self.ikx * uhat, self.iky * uhat, qhat, self.ikx * qhat, self.iky * qhat, -g.k2 * qhat]
        )
        phys = g.ifft(stack)
        u, ux, uy = phys[0:3], phys[3:6], phys[6:9]
        q, qx, qy, lq = phys[9:14], phys[14:19], phys[19:24], phys[24:29]
        return u, ux, uy, q, qx, qy, lq

    def __call__(self, y: np.ndarray) -> np.ndarray:
        g, p = self.grid, self.p
        u, ux, uy, q, qx, qy, lq = self.physical(y)
        sig = _stress(q, qx, qy, lq, p)
        # momentum flux in divergence form: sigma - u u^T, only in-plane derivatives
        flux_x = sig[:, 0] - u * u[0]
        flux_y = sig[:, 1] - u * u[1]
        grad_u = np.zeros((3, 3) + u.shape[1:])
        grad_u[:, 0] = ux
        grad_u[:, 1] = uy
        q_rhs = -(u[0] * qx + u[1] * qy) + s_term(grad_u, q, p.xi) - qt.bulk_gradient(q, p)
        fluxes = g.fft(np.concatenate([flux_x, flux_y, q_rhs]))
        mom = self.ikx * fluxes[0:3] + self.iky * fluxes[3:6]
        mom = sp.leray_project_hat(g, mom)
        return np.concatenate([mom, fluxes[6:11]]) * self.mask


def elastic_stress_divergence(grid: Grid, q: np.ndarray, p: Params) -> np.ndarray:
    """Divergence of the elastic stress as a (3, n, n) field, dealiased."""
    qhat = grid.fft(q) * grid.dealias_mask
    ikx, iky = grid.deriv_multipliers
    phys = grid.ifft(np.concatenate([qhat, ikx * qhat, iky * qhat, -grid.k2 * qhat]))
    sig = _stress(phys[0:5], phys[5:10], phys[10:15], phys[15:20], p)
    sx = grid.fft(sig[:, 0])
    sy = grid.fft(sig[:, 1])
    return grid.ifft((ikx * sx + iky * sy) * grid.dealias_mask)


def ifrk4_step(rhs, lin: np.ndarray, y: np.ndarray, h: float) -> np.ndarray:
    """One integrating-factor RK4 step for y' = lin * y + rhs(y) with diagonal ``lin``."""
    e1 = np.exp(0.5 * h * lin)
    e2 = e1 * e1
    k1 = rhs(y)
    k2 = rhs(e1 * (y + 0.5 * h * k1))
    k3 = rhs(e1 * y + 0.5 * h * k2)
    k4 = rhs(e2 * y + h * e1 * k3)
    return e2 * y + (h / 6.0) * (e2 * k1 + 2.0 * e1 * (k2 + k3) + k4)


class BerisSolver:
    """Owns the spectral state of one run; ``advance`` takes fixed-size steps."""

    def __init__(self, state: SimState, p: Params, cfg: StepConfig):
        self.grid = state.grid
        self.p = p
        self.cfg = cfg
        self.op = BerisOperator(self.grid, p)
        self.t = state.t
        self.step_index = state.step
        g = self.grid
        uhat = sp.leray_project_hat(g, g.fft(state.u)) * g.dealias_mask
        qhat = g.fft(state.Q) * g.dealias_mask
        self.y = np.concatenate([uhat, qhat])

    @property
    def state(self) -> SimState:
        phys = self.grid.ifft(self.y)
        return SimState(self.grid, phys[:3], phys[3:], self.t, self.step_index)

    def step(self) -> None:
        h = self.cfg.dt
        if self.cfg.cfl_max > 0:
            umax = float(np.max(np.abs(self.grid.ifft(self.y[:2]))))
            if umax * h / self.grid.dx > self.cfg.cfl_max:
                warnings.warn(f"Courant number {umax * h / self.grid.dx:.3g} exceeds {self.cfg.cfl_max}", stacklevel=2)
        # blow-up is reported below as DivergenceError, not as numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            y = ifrk4_step(self.op, self.op.lin, self.y, h)
        y[:3] = sp.leray_project_hat(self.grid, y[:3])
        if not np.all(np.isfinite(y)):
            raise DivergenceError(
                f"non-finite field at step {self.step_index + 1}", time=self.t, step=self.step_index + 1
            )
        self.y = y
        self.step_index += 1
        self.t += h

    def advance(self, t_end: float, callback=None) -> None:
        nsteps = int(round((t_end - self.t) / self.cfg.dt))
        for _ in range(nsteps):
            self.step()
            if callback is not None:
                callback(self)


def step(state: SimState, p: Params, cfg: StepConfig) -> SimState:
    """Advance ``state`` by one step of size ``cfg.dt``."""
    solver = BerisSolver(state, p, cfg)
    solver.step()
    return solver.state


def q_gradient(grid: Grid, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    qhat = grid.fft(q)
    ikx, iky = grid.deriv_multipliers
    d = grid.ifft(np.concatenate([ikx * qhat, iky * qhat]))
    return d[:5], d[5:]


def grad_q_density(grid: Grid, q: np.ndarray) -> np.ndarray:
    """Pointwise |grad Q|^2 (Frobenius over the full matrix, summed over x and y)."""
    qx, qy = q_gradient(grid, q)
    return qt.trace_sq(qx) + qt.trace_sq(qy)


def monitor(state: SimState, p: Params) -> DiagRecord:
    g = state.grid
    ev = qt.eigenvalues(state.Q)
    gq2 = grad_q_density(g, state.Q)
    free = g.integrate(0.5 * p.eps * gq2 + qt.bulk_energy(state.Q, p))
    return DiagRecord(
        t=state.t,
        min_eig=float(ev[0].min()),
        max_eig=float(ev[2].max()),
        linf_Q=float(np.sqrt(qt.trace_sq(state.Q).max())),
        kinetic=0.5 * g.integrate(state.u * state.u),
        free_energy=free,
        max_gradQ=float(math.sqrt(gq2.max())),
    )


def divergence_l2(state: SimState) -> float:
    return sp.l2_norm(state.grid, sp.divergence(state.grid, state.u))
