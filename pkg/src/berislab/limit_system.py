"""Inviscid limit: 2-D Euler in vorticity form with a passive third velocity
component, inviscid Q transport, exact Lagrangian solutions and the
velocity / Q error functional used to measure the approach to the limit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from berislab import qtensor as qt
from berislab import spectral2d as sp
from berislab.beris_solver import BerisSolver, SimState, StepConfig, s_term
from berislab.errors import DivergenceError, DomainError
from berislab.qtensor import Params
from berislab.spectral2d import Grid


@dataclass
class LimitState:
    grid: Grid
    omega: np.ndarray  # (n, n)
    v3: np.ndarray  # (n, n)
    R: np.ndarray  # (5, n, n)
    t: float = 0.0

    @classmethod
    def from_velocity(cls, grid: Grid, u: np.ndarray, R: np.ndarray, t: float = 0.0) -> LimitState:
        uhat = grid.fft(u)
        ikx, iky = grid.deriv_multipliers
        omega = grid.ifft(ikx * uhat[1] - iky * uhat[0])
        return cls(grid, omega, np.array(u[2], dtype=float), np.array(R, dtype=float), t)

    def velocity(self) -> np.ndarray:
        """(v1, v2, v3) with the in-plane part recovered from the vorticity."""
        g = self.grid
        vin = g.ifft(sp.stream_velocity_hat(g, g.fft(self.omega)))
        return np.concatenate([vin, self.v3[None]])


class LimitOperator:
    """Spectral right-hand side on packed coefficients [omega, v3, R(5)]."""

    def __init__(self, grid: Grid, p: Params | None, xi: float, filter_strength: float = 0.0):
        self.grid = grid
        self.p = p
        self.xi = xi
        self.ikx, self.iky = grid.deriv_multipliers
        self.mask = grid.dealias_mask
        if filter_strength > 0:
            kx, ky = grid.wavenumbers
            kmax = np.maximum(np.abs(kx), ky) / (grid.n / 3.0)
            self.mask = self.mask * np.exp(-filter_strength * kmax**36)

    def fields(self, y: np.ndarray):
        g = self.grid
        vin = sp.stream_velocity_hat(g, y[0])
        scal = y[:7]
        stack = np.concatenate([vin, self.ikx * vin, self.iky * vin, scal, self.ikx * scal, self.iky * scal])
        phys = g.ifft(stack)
        v = phys[0:2]
        grad_u = np.zeros((3, 3) + v.shape[1:])
        grad_u[0:2, 0] = phys[2:4]
        grad_u[0:2, 1] = phys[4:6]
        s, sx, sy = phys[6:13], phys[13:20], phys[20:27]
        grad_u[2, 0] = sx[1]
        grad_u[2, 1] = sy[1]
        return v, grad_u, s, sx, sy

    def __call__(self, y: np.ndarray, evolve_flow: bool = True, evolve_q: bool = True) -> np.ndarray:
        v, grad_u, s, sx, sy = self.fields(y)
        adv = -(v[0] * sx + v[1] * sy)
        out = np.zeros_like(adv)
        if evolve_flow:
            out[0:2] = adv[0:2]
        if evolve_q:
            r = s[2:7]
            rhs = adv[2:7] + s_term(grad_u, r, self.xi)
            if self.p is not None:
                rhs = rhs - qt.bulk_gradient(r, self.p)
            out[2:7] = rhs
        return self.grid.fft(out) * self.mask


def _pack(state: LimitState) -> np.ndarray:
    g = state.grid
    y = g.fft(np.concatenate([state.omega[None], state.v3[None], state.R]))
    return y


def _unpack(state: LimitState, y: np.ndarray, t: float) -> LimitState:
    phys = state.grid.ifft(y)
    return replace(state, omega=phys[0], v3=phys[1], R=phys[2:7], t=t)


def _rk4(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class LimitSolver:
    """Joint RK4 stepping of the Euler flow and the transported Q field."""

    def __init__(self, state: LimitState, p: Params | None, xi: float = 0.0, dt: float = 1e-3, filter_strength=0.0):
        self.grid = state.grid
        self.op = LimitOperator(self.grid, p, xi, filter_strength)
        self.dt = dt
        self.t = state.t
        self.step_index = 0
        self._template = state
        self.y = _pack(state) * self.op.mask

    @property
    def state(self) -> LimitState:
        return _unpack(self._template, self.y, self.t)

    def velocity(self) -> np.ndarray:
        g = self.grid
        vin = g.ifft(sp.stream_velocity_hat(g, self.y[0]))
        return np.concatenate([vin, g.ifft(self.y[1])[None]])

    def step(self) -> None:
        y = _rk4(self.op, self.y, self.dt)
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite field at t={self.t:.6g}", time=self.t, step=self.step_index + 1)
        self.y = y
        self.t += self.dt
        self.step_index += 1

    def advance(self, t_end: float, callback=None) -> None:
        nsteps = int(round((t_end - self.t) / self.dt))
        for _ in range(nsteps):
            self.step()
            if callback is not None:
                callback(self)

    def tail_fraction(self) -> float:
        return sp.tail_fraction(self.grid, self.y[2:7])


def limit_step(state: LimitState, p: Params | None, xi: float, dt: float) -> LimitState:
    """One joint RK4 step of flow and Q."""
    op = LimitOperator(state.grid, p, xi)
    y = _rk4(op, _pack(state) * op.mask, dt)
    _check(y, state.t)
    return _unpack(state, y, state.t + dt)


def euler_step(state: LimitState, dt: float) -> LimitState:
    """Advance vorticity and v3 by one RK4 step; R is left untouched."""
    op = LimitOperator(state.grid, None, 0.0)
    y = _rk4(lambda z: op(z, evolve_q=False), _pack(state) * op.mask, dt)
    _check(y, state.t)
    out = _unpack(state, y, state.t + dt)
    out.R = state.R.copy()
    return out


def transport_q_step(state: LimitState, p: Params | None, xi: float, dt: float) -> LimitState:
    """Advance R by one RK4 step with the velocity frozen at its current value."""
    op = LimitOperator(state.grid, p, xi)
    y = _rk4(lambda z: op(z, evolve_flow=False), _pack(state) * op.mask, dt)
    _check(y, state.t)
    out = _unpack(state, y, state.t + dt)
    out.omega, out.v3 = state.omega.copy(), state.v3.copy()
    return out


def _check(y, t):
    if not np.all(np.isfinite(y)):
        raise DivergenceError(f"non-finite field at t={t:.6g}", time=t)


# --- trajectories ---------------------------------------------------------


class SpectralFlow:
    """Off-grid evaluation of a sampled stream-function flow by direct Fourier summation."""

    periodic = True

    def __init__(self, grid: Grid, omega: np.ndarray, v3: np.ndarray | None = None, name: str = "spectral"):
        self.name = name
        n = grid.n
        k = np.fft.fftfreq(n, 1.0 / n)
        kx, ky = np.meshgrid(k, k, indexing="ij")
        paired = (np.abs(kx) < n // 2) & (np.abs(ky) < n // 2)
        k2 = kx * kx + ky * ky
        k2[0, 0] = 1.0
        psi_hat = np.fft.fft2(omega) / k2 / (n * n)
        psi_hat[0, 0] = 0.0
        keep = (np.abs(psi_hat) > 0) & paired
        self.kx, self.ky, self.c = kx[keep], ky[keep], psi_hat[keep]
        if v3 is not None:
            v3_hat = np.fft.fft2(v3) / (n * n)
            keep3 = (np.abs(v3_hat) > 0) & paired
            self.v3 = (kx[keep3], ky[keep3], v3_hat[keep3])
        else:
            self.v3 = None

    def _sum(self, x, y, kx, ky, c, factor):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        flat_x, flat_y = x.ravel(), y.ravel()
        out = np.empty(flat_x.shape)
        chunk = 2048
        for i in range(0, flat_x.size, chunk):
            phase = np.exp(1j * (np.outer(flat_x[i : i + chunk] + np.pi, kx) + np.outer(flat_y[i : i + chunk] + np.pi, ky)))
            out[i : i + chunk] = np.real(phase @ (c * factor))
        return out.reshape(x.shape)

    def psi(self, x, y):
        return self._sum(x, y, self.kx, self.ky, self.c, 1.0)

    def vorticity(self, x, y):
        return self._sum(x, y, self.kx, self.ky, self.c, self.kx**2 + self.ky**2)

    def velocity(self, x, y):
        kx, ky, c = self.kx, self.ky, self.c
        v1 = self._sum(x, y, kx, ky, c, 1j * ky)
        v2 = self._sum(x, y, kx, ky, c, -1j * kx)
        v3 = self._sum(x, y, *self.v3, 1.0) if self.v3 else np.zeros_like(v1)
        return np.array([v1, v2, v3])

    def gradient(self, x, y):
        kx, ky, c = self.kx, self.ky, self.c
        g = np.zeros((3, 3) + np.shape(x))
        g[0, 0] = self._sum(x, y, kx, ky, c, -kx * ky)
        g[0, 1] = self._sum(x, y, kx, ky, c, -ky * ky)
        g[1, 0] = self._sum(x, y, kx, ky, c, kx * kx)
        g[1, 1] = -g[0, 0]
        if self.v3:
            g[2, 0] = self._sum(x, y, *self.v3, 1j * self.v3[0])
            g[2, 1] = self._sum(x, y, *self.v3, 1j * self.v3[1])
        return g

    def rotation_rate(self, x, y):
        g = self.gradient(x, y)
        return 0.5 * (g - np.swapaxes(g, 0, 1))


@dataclass
class TrajectorySet:
    seeds: np.ndarray  # (2, N)
    times: np.ndarray  # (nt,)
    X: np.ndarray  # (nt, 2, N)
    B: np.ndarray  # (nt, 3, 3, N)
    omega: np.ndarray  # (nt, N)

    def orthogonality_defect(self) -> float:
        """max over seeds and times of ||B^T B - I||_F."""
        btb = np.einsum("tki...,tkj...->tij...", self.B, self.B)
        eye = np.eye(3)[None, :, :, None]
        return float(np.sqrt(np.sum((btb - eye) ** 2, axis=(1, 2))).max())

    def vorticity_deviation(self) -> float:
        return float(np.abs(self.omega - self.omega[0]).max())


def _traj_rhs(flow, direction):
    def rhs(state):
        x, y, b = state
        v = flow.velocity(x, y)
        w = flow.rotation_rate(x, y)
        db = np.einsum("ij...,jk...->ik...", w, b)
        return direction * v[0], direction * v[1], direction * db

    return rhs


def _rk4_tuple(f, state, h):
    def axpy(s, k, a):
        return tuple(si + a * ki for si, ki in zip(s, k))

    k1 = f(state)
    k2 = f(axpy(state, k1, 0.5 * h))
    k3 = f(axpy(state, k2, 0.5 * h))
    k4 = f(axpy(state, k3, h))
    return tuple(s + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d) for s, a, b, c, d in zip(state, k1, k2, k3, k4))


def trace_particles(flow, seeds, t_end: float, dt: float = 1e-2, direction: int = 1, record_every: int = 1) -> TrajectorySet:
    """RK4 trajectories from ``seeds`` (2, N) with dB/dt = W(X) B co-integrated.

    ``direction=-1`` integrates backward in time; B then solves the same ODE
    in reversed time so that B(t) maps the backward path.
    """
    if direction not in (1, -1):
        raise DomainError("direction must be +1 or -1")
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    npts = seeds.shape[1]
    nsteps = max(1, int(np.ceil(t_end / dt - 1e-9))) if t_end > 0 else 0
    h = t_end / nsteps if nsteps else 0.0
    b = np.repeat(np.eye(3)[:, :, None], npts, axis=2)
    state = (seeds[0].copy(), seeds[1].copy(), b)
    rhs = _traj_rhs(flow, direction)
    times, xs, bs, ws = [0.0], [seeds.copy()], [b.copy()], [flow.vorticity(seeds[0], seeds[1])]
    for i in range(1, nsteps + 1):
        state = _rk4_tuple(rhs, state, h)
        if i % record_every == 0 or i == nsteps:
            times.append(direction * i * h)
            xs.append(np.array([state[0], state[1]]))
            bs.append(state[2].copy())
            ws.append(flow.vorticity(state[0], state[1]))
    return TrajectorySet(seeds, np.array(times), np.array(xs), np.array(bs), np.array(ws))


def manifold_residual(q: np.ndarray, p: Params) -> np.ndarray:
    """Pointwise distance from the s_plus uniaxial manifold.

    A traceless Q equals s+(n n^T - I/3) exactly when Q^2 - (s+/3) Q = (2 s+^2 / 9) I.
    """
    _, s_plus, _ = qt.stationary_scalars(p)
    qm = qt.to_matrix(q)
    eye = np.eye(3).reshape((3, 3) + (1,) * (qm.ndim - 2))
    res = np.einsum("ij...,jk...->ik...", qm, qm) - (s_plus / 3.0) * qm - (2.0 * s_plus**2 / 9.0) * eye
    return np.sqrt(np.sum(res * res, axis=(0, 1)))


def lagrangian_oracle(grid: Grid, Q0, flow, t: float, p: Params, dt: float = 1e-2) -> np.ndarray:
    """Exact co-rotational solution B Q0(y) B^T for Q0 on the s_plus manifold.

    ``y`` is the foot of the backward trajectory from each grid node and B
    the rotation accumulated along the forward path from ``y``.  ``Q0`` is a
    callable ``(x, y) -> (5, ...)`` or a grid array (interpolated spectrally).
    """
    x, y = grid.coords
    q0_grid = Q0(x, y) if callable(Q0) else np.asarray(Q0, dtype=float)
    if np.max(manifold_residual(q0_grid, p)) > 1e-8:
        raise DomainError("initial data is not on the s_plus manifold")
    if t == 0:
        return q0_grid.copy()
    seeds = np.array([x.ravel(), y.ravel()])
    back = trace_particles(flow, seeds, t, dt, direction=-1, record_every=10**9)
    feet = back.X[-1]
    fwd = trace_particles(flow, feet, t, dt, direction=1, record_every=10**9)
    b = fwd.B[-1]
    if callable(Q0):
        q_feet = Q0(feet[0], feet[1])
    else:
        q_feet = interpolate(grid, q0_grid, feet[0], feet[1])
    qm = qt.to_matrix(q_feet)
    out = np.einsum("ik...,kl...,jl...->ij...", b, qm, b)
    return qt.from_matrix(out).reshape(5, grid.n, grid.n)


def interpolate(grid: Grid, f: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation of grid data ``(ncomp, n, n)`` at arbitrary points."""
    n = grid.n
    k = np.fft.fftfreq(n, 1.0 / n)
    fhat = np.fft.fft2(f) / (n * n)
    half = n // 2
    fhat[..., half, :] = 0.0
    fhat[..., :, half] = 0.0
    ex = np.exp(1j * np.outer(x + np.pi, k))  # (N, n)
    ey = np.exp(1j * np.outer(y + np.pi, k))
    out = np.einsum("px,cxy,py->cp", ex, fhat, ey)
    return np.real(out)


# --- error functional -------------------------------------------------------


def error_functional(grid: Grid, w: np.ndarray, S: np.ndarray, eps: float) -> float:
    """||w||^2 + eps^2 ||grad S||^2 + eps ||S||^2 with Frobenius norms on the full matrix."""
    w_sq = grid.integrate(w * w)
    s_sq = grid.integrate(qt.trace_sq(S))
    from berislab.beris_solver import grad_q_density

    gs_sq = grid.integrate(grad_q_density(grid, S))
    return w_sq + eps * eps * gs_sq + eps * s_sq


@dataclass
class EricksenStudy:
    eps: list[float]
    sup_Y: list[float]
    slope: float | None
    halving_ratios: list[float]
    series: dict


def ericksen_study(
    grid: Grid,
    u0: np.ndarray,
    Q0: np.ndarray,
    p: Params,
    xi: float,
    eps_list,
    T: float,
    dt: float = 1e-3,
    sample_every: int = 10,
) -> EricksenStudy:
    """sup over sampled times of the error functional between each viscous run and the inviscid limit."""
    from berislab.trotter_split import fitted_slope

    eps_list = sorted(eps_list)
    nsteps = int(round(T / dt))
    limit = LimitSolver(LimitState.from_velocity(grid, u0, Q0), p, xi, dt)
    samples = [(0, limit.velocity(), limit.state.R)]
    for i in range(1, nsteps + 1):
        limit.step()
        if i % sample_every == 0 or i == nsteps:
            samples.append((i, limit.velocity(), limit.state.R))

    sup_y, series = [], {}
    for eps in eps_list:
        solver = BerisSolver(SimState(grid, u0, Q0), p.with_(eps=eps, xi=xi), StepConfig(dt=dt, cfl_max=0))
        ys = []
        done = 0
        for i, v, r in samples:
            while done < i:
                solver.step()
                done += 1
            st = solver.state
            ys.append(error_functional(grid, st.u - v, st.Q - r, eps))
        series[eps] = ys
        sup_y.append(max(ys))
    slope = fitted_slope(eps_list, sup_y) if len(eps_list) > 1 else None
    ratios = [sup_y[i] / sup_y[i + 1] for i in range(len(sup_y) - 1)]
    return EricksenStudy(eps_list, sup_y, slope, ratios, series)
