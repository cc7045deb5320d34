"""Defect experiments: phase mismatch under the pure reaction flow,
vorticity-driven director shear near stagnation points, and eigenvalue
escape for non-zero xi with weak bulk coefficients.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from berislab import bulk_ode
from berislab import qtensor as qt
from berislab.beris_solver import DiagRecord, grad_q_density
from berislab.errors import DegenerateFlowError, DomainError
from berislab.flows import StationaryFlow, builtin_flow
from berislab.limit_system import LimitSolver, LimitState, interpolate, lagrangian_oracle, trace_particles
from berislab.qtensor import Params
from berislab.spectral2d import Grid

log = logging.getLogger(__name__)

__all__ = [
    "StagnationPoint",
    "builtin_flow",
    "find_stagnation_points",
    "phase_mismatch_run",
    "vortex_defect_run",
    "xi_escape_run",
]

RESOLVED_TAIL = 1e-8


def wrap(a):
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def max_grad(grid: Grid, q: np.ndarray) -> float:
    return float(np.sqrt(grad_q_density(grid, q).max()))


# --- stagnation points --------------------------------------------------------


@dataclass(frozen=True)
class StagnationPoint:
    x: float
    y: float
    kind: str  # "elliptic", "hyperbolic" or "degenerate"
    omega: float
    nondegenerate: bool


def find_stagnation_points(flow: StationaryFlow, grid: Grid, tol: float = 1e-10) -> list[StagnationPoint]:
    """Zeros of the velocity, refined by Newton from cells where both components change sign.

    Points are classified by the sign of det Hess(psi).  ``nondegenerate``
    records that omega differs from its stagnation value along a shrinking
    ring of nearby samples.
    """
    x, y = grid.coords
    v = flow.velocity(x, y)
    if np.max(np.abs(v[:2])) < 1e-14:
        raise DegenerateFlowError(f"flow {flow.name!r} vanishes identically; every point stagnates")

    def changes(f):
        corners = [f, np.roll(f, -1, 0), np.roll(f, -1, 1), np.roll(np.roll(f, -1, 0), -1, 1)]
        lo = np.minimum.reduce(corners)
        hi = np.maximum.reduce(corners)
        return (lo <= 0) & (hi >= 0)

    cand = changes(v[0]) & changes(v[1])
    found: list[StagnationPoint] = []
    for i, j in zip(*np.nonzero(cand)):
        pt = np.array([x[i, j] + 0.5 * grid.dx, y[i, j] + 0.5 * grid.dx])
        for _ in range(50):
            vel = flow.velocity(pt[0], pt[1])[:2]
            if np.hypot(*vel) <= tol:
                break
            jac = flow.gradient(pt[0], pt[1])[:2, :2]
            pt = pt - np.linalg.lstsq(jac, vel, rcond=None)[0]
        vel = flow.velocity(pt[0], pt[1])[:2]
        if np.hypot(*vel) > tol:
            log.warning("Newton did not converge near (%.3f, %.3f); point dropped", x[i, j], y[i, j])
            continue
        pt = wrap(pt)
        if any(_torus_dist(pt, (s.x, s.y)) < 1e-6 for s in found):
            continue
        hess = flow.psi_hessian(pt[0], pt[1])
        d = float(np.linalg.det(hess))
        if abs(d) < 1e-10:
            kind = "degenerate"
        else:
            kind = "elliptic" if d > 0 else "hyperbolic"
        w0 = float(flow.vorticity(pt[0], pt[1]))
        found.append(StagnationPoint(float(pt[0]), float(pt[1]), kind, w0, kind != "degenerate" and _omega_varies(flow, pt, w0)))
    return found


def _torus_dist(a, b) -> float:
    d = wrap(np.asarray(a) - np.asarray(b))
    return float(np.hypot(*d))


def _omega_varies(flow, pt, w0) -> bool:
    angles = np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False)
    for k in range(8):
        r = 0.1 * 2.0**-k
        w = flow.vorticity(pt[0] + r * np.cos(angles), pt[1] + r * np.sin(angles))
        if np.max(np.abs(w - w0)) < 1e-14:
            return False
    return True


# --- phase mismatch -----------------------------------------------------------


def phase_mismatch_initial(grid: Grid, scale: float = 1.0) -> np.ndarray:
    """scale * x exp(-x^2) (e1 e1^T - I/3): uniaxial amplitude changing sign across x = 0."""
    x, _ = grid.coords
    return qt.uniaxial(scale * x * np.exp(-x * x), np.array([1.0, 0.0, 0.0])[:, None, None] + 0 * x)


@dataclass
class PhaseMismatchResult:
    records: list[DiagRecord]
    R: np.ndarray
    amplitude: np.ndarray  # uniaxial amplitude along x at the final time

    def growth_ratio(self, t1: float, t2: float) -> float:
        g = {round(r.t, 9): r.max_gradQ for r in self.records}
        return g[round(t2, 9)] / g[round(t1, 9)]


def phase_mismatch_run(
    p: Params, grid: Grid, T: float, times=None, dt: float = 5e-3, scale: float = 1.0
) -> PhaseMismatchResult:
    """Pointwise reaction flow from the sign-changing uniaxial profile; max|grad R| over time."""
    if not (p.a < 0 and p.b > 0 and p.c > 0):
        raise DomainError("phase mismatch needs a < 0, b > 0, c > 0")
    times = sorted(set([0.0, *(times if times is not None else np.arange(0.0, T + 1e-9, 1.0))]))
    times = [t for t in times if t <= T + 1e-12]
    R = phase_mismatch_initial(grid, scale)
    records, t_prev = [], 0.0
    for t in times:
        if t > t_prev:
            R = bulk_ode.integrate_reaction(R, p, bulk_ode.OdeConfig(dt=dt, t_end=t - t_prev))
            t_prev = t
        rec = _field_record(grid, R, p, t)
        records.append(rec)
    # R = s (e1 e1^T - I/3), so q11 = 2s/3
    return PhaseMismatchResult(records, R, 1.5 * R[0, :, 0])


def _field_record(grid, R, p, t) -> DiagRecord:
    ev = qt.eigenvalues(R)
    gq2 = grad_q_density(grid, R)
    return DiagRecord(
        t=float(t),
        min_eig=float(ev[0].min()),
        max_eig=float(ev[2].max()),
        linf_Q=float(np.sqrt(qt.trace_sq(R).max())),
        kinetic=0.0,
        free_energy=grid.integrate(0.5 * p.eps * gq2 + qt.bulk_energy(R, p)),
        max_gradQ=float(np.sqrt(gq2.max())),
    )


# --- vorticity-driven defects -------------------------------------------------


@dataclass
class GrowthRow:
    t: float
    max_grad_R: float | None
    max_grad_oracle: float
    resolved: bool
    probe_angle: float | None
    probe_angle_oracle: float | None
    rel_l2: float | None = None  # ||R - oracle|| / ||oracle|| in L2

    @property
    def agreement(self) -> float | None:
        if self.max_grad_R is None or self.max_grad_oracle == 0:
            return None
        return abs(self.max_grad_R - self.max_grad_oracle) / self.max_grad_oracle


@dataclass
class VortexReport:
    rows: list[GrowthRow]
    probe: dict = field(default_factory=dict)

    def row(self, t: float) -> GrowthRow:
        return min(self.rows, key=lambda r: abs(r.t - t))

    def growth_ratio(self, t1: float, t2: float, oracle: bool = False) -> float | None:
        """max|grad R|(t2) / max|grad R|(t1); None if the PDE was under-resolved at either time."""
        a, b = self.row(t1), self.row(t2)
        if oracle:
            return b.max_grad_oracle / a.max_grad_oracle
        if a.max_grad_R is None or b.max_grad_R is None:
            return None
        return b.max_grad_R / a.max_grad_R


def director(q: np.ndarray) -> np.ndarray:
    """Leading eigenvector(s) of component arrays ``(5, N)``."""
    mat = np.moveaxis(qt.to_matrix(q), (0, 1), (-2, -1))
    _, v = np.linalg.eigh(mat)
    return np.moveaxis(v[..., :, 2], -1, 0)


def director_angle(q_a: np.ndarray, q_b: np.ndarray) -> np.ndarray:
    """Unsigned angle in [0, pi/2] between the leading directors of two tensors."""
    na, nb = director(q_a), director(q_b)
    cos = np.clip(np.abs(np.sum(na * nb, axis=0)), 0.0, 1.0)
    return np.arccos(cos)


def probe_time(flow: StationaryFlow, center, offset) -> tuple[float, float]:
    """(delta, t) with delta the vorticity gap between a probe and the stagnation point and
    t = pi/|delta|, the time at which their directors are predicted to be perpendicular."""
    delta = float(flow.vorticity(center[0] + offset[0], center[1] + offset[1]) - flow.vorticity(*center))
    if delta == 0:
        raise DegenerateFlowError("probe sees no vorticity difference")
    return delta, math.pi / abs(delta)


def vortex_defect_run(
    flow: StationaryFlow,
    p: Params,
    grid: Grid,
    times,
    Q0=None,
    dt: float = 1e-2,
    probe_center=(0.0, 0.0),
    probe_offset=(0.6, 0.0),
    oracle_dt: float = 1e-2,
) -> VortexReport:
    """Co-rotational transport by a steady flow, checked against the exact Lagrangian solution.

    ``Q0`` defaults to uniform s+(e1 e1^T - I/3); it may be any callable
    ``(x, y) -> (5, ...)`` on the s_plus manifold.  Rows after the first
    under-resolved step keep only oracle values.  ``probe_offset=None`` skips
    the director-angle probe.
    """
    _, s_plus, _ = qt.stationary_scalars(p)
    if Q0 is None:
        q_const = qt.uniaxial(s_plus, np.array([1.0, 0.0, 0.0]))

        def Q0(x, y):
            shape = np.shape(x)
            return np.broadcast_to(q_const.reshape((5,) + (1,) * len(shape)), (5,) + shape).copy()

    x, y = grid.coords
    state = LimitState(grid, flow.vorticity(x, y), np.zeros_like(x), Q0(x, y))
    solver = LimitSolver(state, p, xi=0.0, dt=dt)

    delta, t_probe, seeds = 0.0, None, None
    if probe_offset is not None:
        seeds = np.array([[probe_center[0], probe_center[0] + probe_offset[0]], [probe_center[1], probe_center[1] + probe_offset[1]]])
        try:
            delta, t_probe = probe_time(flow, probe_center, probe_offset)
        except DegenerateFlowError:
            log.warning("no vorticity difference at the probe; director angles skipped")
    times = set(float(t) for t in times)
    if t_probe is not None:
        times.add(round(t_probe / dt) * dt)
    times = sorted(times)

    rows, resolved = [], True
    for t_req in times:
        nsteps = int(round(t_req / dt))
        while solver.step_index < nsteps:
            solver.step()
            if resolved and solver.tail_fraction() > RESOLVED_TAIL:
                resolved = False
                log.warning("transport solution under-resolved at t=%.4g", solver.t)
        # snap to the step grid so both solutions are compared at the same time
        t = nsteps * dt
        oracle = lagrangian_oracle(grid, Q0, flow, t, p, dt=oracle_dt)
        g_oracle = max_grad(grid, oracle)
        angle = angle_oracle = None
        if t_probe is not None:
            traj = trace_particles(flow, seeds, t, oracle_dt, record_every=10**9)
            q_seed = Q0(seeds[0], seeds[1])
            b = traj.B[-1]
            q_t = qt.from_matrix(np.einsum("ik...,kl...,jl...->ij...", b, qt.to_matrix(q_seed), b))
            angle_oracle = float(director_angle(q_t[:, :1], q_t[:, 1:])[0])
        if resolved:
            R = solver.state.R
            if t_probe is not None:
                pos = traj.X[-1]
                q_probe = interpolate(grid, R, pos[0], pos[1])
                angle = float(director_angle(q_probe[:, :1], q_probe[:, 1:])[0])
            rel = float(np.sqrt(grid.integrate(qt.trace_sq(R - oracle)) / grid.integrate(qt.trace_sq(oracle))))
            rows.append(GrowthRow(t, max_grad(grid, R), g_oracle, True, angle, angle_oracle, rel))
        else:
            rows.append(GrowthRow(t, None, g_oracle, False, None, angle_oracle))
    report = VortexReport(rows, {"delta": delta, "t_probe": t_probe, "center": probe_center, "offset": probe_offset})
    return report


# --- non-corotational escape --------------------------------------------------


@dataclass
class EscapeReport:
    escaped: bool
    first_exit_time: float | None
    margin: float  # max excursion beyond the interval, as a fraction of its width
    width: float
    t_run: float
    ode_exit_time: float | None
    history: list[tuple[float, float, float]] = field(default_factory=list)  # (t, min_eig, max_eig)


def xi_escape_run(
    p0: Params,
    lam: float,
    xi: float,
    grid: Grid,
    T: float,
    flow: StationaryFlow | str = "shear",
    dt: float = 5e-3,
    margin_target: float = 0.05,
) -> EscapeReport:
    """Transport from R = 0 with scaled bulk coefficients (lam a, sqrt(lam) b, c) and report
    the first time any grid eigenvalue leaves [-m, 2m].

    The run stops once the excursion reaches ``margin_target`` of the interval
    width; otherwise it continues to T.  The strain-driven pointwise ODE is
    integrated at the strongest-strain grid point as a cross-check.
    """
    if isinstance(flow, str):
        flow = builtin_flow(flow)
    p = p0.scaled(lam).with_(xi=xi)
    if not (p.b > 0 and p.c > 0):
        raise DomainError("need b0 > 0 and c0 > 0")
    lo, hi = qt.interval(p)
    width = hi - lo
    x, y = grid.coords
    state = LimitState(grid, flow.vorticity(x, y), np.zeros_like(x), np.zeros((5, grid.n, grid.n)))
    solver = LimitSolver(state, p, xi=xi, dt=dt)

    def excursion(R):
        ev = qt.eigenvalues(R)
        return float(max(ev[2].max() - hi, lo - ev[0].min())), float(ev[0].min()), float(ev[2].max())

    first_exit, margin, history = None, 0.0, [(0.0, 0.0, 0.0)]
    prev_exc = excursion(state.R)[0]
    nsteps = int(round(T / dt))
    for _ in range(nsteps):
        solver.step()
        exc, emin, emax = excursion(solver.state.R)
        history.append((solver.t, emin, emax))
        if exc > 0 and first_exit is None:
            frac = -prev_exc / (exc - prev_exc) if exc != prev_exc else 1.0
            first_exit = solver.t - dt + frac * dt
        margin = max(margin, exc / width)
        prev_exc = exc
        if first_exit is not None and margin >= margin_target:
            break

    grad = flow.gradient(x, y)
    strain = 0.5 * (grad + np.swapaxes(grad, 0, 1))
    strength = np.sqrt(np.sum(strain * strain, axis=(0, 1)))
    ode_exit = None
    if strength.max() > 0:
        i, j = np.unravel_index(np.argmax(strength), strength.shape)
        ode_exit = bulk_ode.r0_exit_time(strain[:, :, i, j], p, t_max=T, dt=min(dt, 1e-3))
    return EscapeReport(first_exit is not None, first_exit, max(margin, 0.0), width, solver.t, ode_exit, history)
