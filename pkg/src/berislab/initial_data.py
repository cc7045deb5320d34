"""Seed-deterministic smooth initial data."""

from __future__ import annotations

import numpy as np

from berislab import qtensor as qt
from berislab import spectral2d as sp
from berislab.qtensor import Params
from berislab.spectral2d import Grid


def band_limited(
    grid: Grid, rng: np.random.Generator, ncomp: int, kmax: float = 4.0, mean: bool = False
) -> np.ndarray:
    """Random real trigonometric polynomial with modes |k| <= kmax, unit RMS per component.

    The k = 0 mode is kept only when ``mean`` is set.
    """
    shape = (ncomp,) + grid.k2.shape
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    keep = (grid.k2 <= kmax * kmax) & ((grid.k2 > 0) | mean)
    f = grid.ifft(coef * keep)
    rms = np.sqrt(np.mean(f * f, axis=(-2, -1), keepdims=True))
    return f / np.where(rms > 0, rms, 1.0)


def random_velocity(grid: Grid, rng: np.random.Generator, amplitude: float = 1.0, kmax: float = 4.0) -> np.ndarray:
    """Divergence-free band-limited 3-vector field with max |u| = amplitude."""
    u = sp.leray_project(grid, band_limited(grid, rng, 3, kmax))
    peak = np.sqrt(np.sum(u * u, axis=0)).max()
    return u * (amplitude / peak)


def random_qtensor(
    grid: Grid, rng: np.random.Generator, p: Params | None = None, fill: float = 0.9, kmax: float = 4.0
) -> np.ndarray:
    """Band-limited Q field: unit-RMS fluctuations around a random O(1) mean.

    With ``p`` given the field is rescaled so its eigenvalues fill ``fill`` of
    the interval [-m, 2m].
    """
    q = band_limited(grid, rng, 5, kmax) + rng.standard_normal(5)[:, None, None]
    if p is None:
        return q
    lo, hi = qt.interval(p)
    ev = qt.eigenvalues(q)
    scale = fill * min(hi / ev[2].max(), lo / ev[0].min())
    return scale * q


def taylor_green_velocity(grid: Grid, amplitude: float = 1.0) -> np.ndarray:
    x, y = grid.coords
    return amplitude * np.array([-np.cos(x) * np.sin(y), np.sin(x) * np.cos(y), np.zeros_like(x)])


def uniform_uniaxial(grid: Grid, s: float, director=(1.0, 0.0, 0.0)) -> np.ndarray:
    q = qt.uniaxial(s, np.asarray(director, dtype=float))
    return np.broadcast_to(q[:, None, None], (5, grid.n, grid.n)).copy()


def lowest_shell_flow(grid: Grid, rng: np.random.Generator, amplitude: float = 1.0) -> np.ndarray:
    """Random steady Euler flow built from the |k| = 1 Fourier shell.

    The stream function psi is a combination of cos/sin of x and y, so
    -lap psi = psi and the flow is stationary for the inviscid equations; the
    third component is a multiple of psi and is therefore stationary too.
    """
    x, y = grid.coords
    c = rng.standard_normal(5)
    psi = c[0] * np.cos(x) + c[1] * np.sin(x) + c[2] * np.cos(y) + c[3] * np.sin(y)
    psi_x = -c[0] * np.sin(x) + c[1] * np.cos(x)
    psi_y = -c[2] * np.sin(y) + c[3] * np.cos(y)
    u = np.array([psi_y, -psi_x, c[4] * psi])
    peak = np.sqrt(np.sum(u * u, axis=0)).max()
    return u * (amplitude / peak)
