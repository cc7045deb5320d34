"""Lie splitting of the Q equation under a prescribed velocity.

Over each of ``n_split`` intervals the pointwise reaction flow is applied
first and then the linear advection / rotation / diffusion evolution.  The
rate study compares the composition with an unsplit reference solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from berislab import bulk_ode
from berislab import qtensor as qt
from berislab import spectral2d as sp
from berislab.beris_solver import ifrk4_step
from berislab.errors import DivergenceError, DomainError
from berislab.flows import StationaryFlow
from berislab.qtensor import Params
from berislab.spectral2d import Grid


class PrescribedFlow:
    """Velocity and velocity gradient on a grid as functions of time.

    ``evaluator(grid, t)`` returns ``(u (3, n, n), grad_u (3, 3, n, n))`` with
    ``grad_u[i, j] = d_j u_i``.  Stationary flows are evaluated once per grid.
    """

    def __init__(self, evaluator: Callable, stationary: bool = False, name: str = "custom"):
        self.evaluator = evaluator
        self.stationary = stationary
        self.name = name
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @classmethod
    def from_stationary(cls, flow: StationaryFlow) -> PrescribedFlow:
        return cls(lambda grid, t: flow.on_grid(grid), stationary=True, name=flow.name)

    @classmethod
    def sampled(cls, grid_u: np.ndarray) -> PrescribedFlow:
        """Frozen flow from grid samples; the gradient is computed spectrally."""

        def evaluate(grid, t):
            from berislab.beris_solver import velocity_gradient

            return grid_u, velocity_gradient(grid, grid_u)

        return cls(evaluate, stationary=True, name="sampled")

    def __call__(self, grid: Grid, t: float) -> tuple[np.ndarray, np.ndarray]:
        if not self.stationary:
            return self.evaluator(grid, t)
        if grid.n not in self._cache:
            self._cache[grid.n] = self.evaluator(grid, 0.0)
        return self._cache[grid.n]


@dataclass(frozen=True)
class SplitConfig:
    n_split: int
    T: float = 1.0
    dt: float = 1e-3

    def __post_init__(self):
        if self.n_split < 1:
            raise DomainError("n_split must be at least 1")
        if not self.dt > 0 or not self.T > 0:
            raise DomainError("T and dt must be positive")


def _substeps(span: float, dt: float) -> tuple[int, float]:
    nsteps = max(1, math.ceil(span / dt - 1e-9))
    return nsteps, span / nsteps


def _transport_rhs(grid: Grid, flow: PrescribedFlow, t: float, p: Params | None):
    """Spectral RHS of -u.grad R + W R - R W [- bulk_gradient(R)] at time t."""
    u, grad_u = flow(grid, t)
    vort = 0.5 * (grad_u - np.swapaxes(grad_u, 0, 1))
    ikx, iky = grid.deriv_multipliers
    mask = grid.dealias_mask

    def rhs(rhat):
        phys = grid.ifft(np.concatenate([rhat, ikx * rhat, iky * rhat]))
        r, rx, ry = phys[:5], phys[5:10], phys[10:15]
        rm = qt.to_matrix(r)
        rot = np.einsum("ij...,jk...->ik...", vort, rm)
        out = -(u[0] * rx + u[1] * ry) + qt.from_matrix(rot + np.swapaxes(rot, 0, 1))
        if p is not None:
            out = out - qt.bulk_gradient(r, p)
        return grid.fft(out) * mask

    return rhs


def _evolve(grid, R, flow, s, t, eps, dt, p=None):
    if not t > s:
        raise DomainError("evolution needs t > s")
    nsteps, h = _substeps(t - s, dt)
    lin = -eps * grid.k2
    rhat = grid.fft(R)
    for i in range(nsteps):
        tau = s + i * h
        if flow.stationary:
            rhs = _transport_rhs(grid, flow, tau, p)
            rhat = ifrk4_step(rhs, lin, rhat, h)
        else:
            rhat = _ifrk4_timed(grid, flow, p, lin, rhat, tau, h)
        if not np.all(np.isfinite(rhat)):
            raise DivergenceError(f"non-finite field at t={tau:.6g}", time=tau, step=i)
    return grid.ifft(rhat)


def _ifrk4_timed(grid, flow, p, lin, y, tau, h):
    e1 = np.exp(0.5 * h * lin)
    e2 = e1 * e1
    f0 = _transport_rhs(grid, flow, tau, p)
    fh = _transport_rhs(grid, flow, tau + 0.5 * h, p)
    f1 = _transport_rhs(grid, flow, tau + h, p)
    k1 = f0(y)
    k2 = fh(e1 * (y + 0.5 * h * k1))
    k3 = fh(e1 * y + 0.5 * h * k2)
    k4 = f1(e2 * y + h * e1 * k3)
    return e2 * y + (h / 6.0) * (e2 * k1 + 2.0 * e1 * (k2 + k3) + k4)


def advection_diffusion_substep(
    grid: Grid, R: np.ndarray, flow: PrescribedFlow, s: float, t: float, eps: float, dt: float = 1e-3
) -> np.ndarray:
    """Solve R_t - eps lap R = -u.grad R + W R - R W from s to t.

    Diffusion is exact in Fourier space; the transport terms use RK4 with
    steps no larger than ``dt`` and a dealiased product.
    """
    return _evolve(grid, R, flow, s, t, eps, dt)


def reaction_half_flow(R: np.ndarray, p: Params, span: float, dt: float) -> np.ndarray:
    nsteps, h = _substeps(span, dt)
    return bulk_ode.integrate_reaction(R, p, bulk_ode.OdeConfig(dt=h, method="eigenframe", t_end=span))


def splitting_solve(
    grid: Grid, Q0: np.ndarray, flow: PrescribedFlow, p: Params, cfg: SplitConfig, on_step=None
) -> np.ndarray:
    """Compose reaction then evolution over each of the ``n_split`` intervals of [0, T]."""
    Q = np.array(Q0, dtype=float, copy=True)
    span = cfg.T / cfg.n_split
    for k in range(1, cfg.n_split + 1):
        Q = reaction_half_flow(Q, p, span, cfg.dt)
        if on_step is not None:
            on_step("reaction", k, Q)
        Q = _evolve(grid, Q, flow, (k - 1) * span, k * span, p.eps, cfg.dt)
        if on_step is not None:
            on_step("evolution", k, Q)
    return Q


def direct_solve(grid: Grid, Q0: np.ndarray, flow: PrescribedFlow, p: Params, T: float, dt: float) -> np.ndarray:
    """Unsplit solve of Q_t = eps lap Q - u.grad Q + W Q - Q W - bulk_gradient(Q)."""
    return _evolve(grid, Q0, flow, 0.0, T, p.eps, dt, p=p)


@dataclass
class RateStudy:
    n: list[int]
    h2_error: list[float]
    slope_so_far: list[float | None]
    log2_ratios: list[float]
    reference_error: float
    slope: float | None = None
    rows: list[tuple] = field(default_factory=list)

    @property
    def reference_ok(self) -> bool:
        """Reference error must be at most 10% of the coarsest splitting error."""
        return self.reference_error <= 0.1 * self.h2_error[0]


def fitted_slope(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def rate_study(
    grid: Grid,
    Q0: np.ndarray,
    flow: PrescribedFlow,
    p: Params,
    T: float,
    n_list,
    dt: float = 1e-3,
    dt_ref: float | None = None,
) -> RateStudy:
    """H^2 error of the splitting against a fine unsplit reference for each n in ``n_list``."""
    n_list = list(n_list)
    if n_list != sorted(n_list):
        raise DomainError("n_list must be ascending")
    if dt_ref is None:
        dt_ref = T / (16 * max(n_list))
    ref = direct_solve(grid, Q0, flow, p, T, dt_ref)
    ref_half = direct_solve(grid, Q0, flow, p, T, 0.5 * dt_ref)
    ref_err = sp.sobolev_norm(grid, ref - ref_half, 2)

    errors, slopes = [], []
    for i, n in enumerate(n_list):
        Qn = splitting_solve(grid, Q0, flow, p, SplitConfig(n_split=n, T=T, dt=min(dt, T / n)))
        errors.append(sp.sobolev_norm(grid, Qn - ref_half, 2))
        slopes.append(fitted_slope(n_list[: i + 1], errors) if i > 0 else None)
    ratios = [math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)]
    study = RateStudy(n_list, errors, slopes, ratios, ref_err, slope=slopes[-1])
    study.rows = list(zip(n_list, errors, slopes))
    return study
