"""Analytic two-dimensional flows given by a stream function.

Velocity is (d_y psi, -d_x psi, 0), vorticity omega = d_x v2 - d_y v1 = -lap psi,
and ``gradient(x, y)[i, j] = d_j v_i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from berislab.errors import DomainError
from berislab.spectral2d import Grid, derivative

Array = np.ndarray


@dataclass(frozen=True)
class StationaryFlow:
    name: str
    psi: Callable[[Array, Array], Array]
    velocity: Callable[[Array, Array], Array]
    vorticity: Callable[[Array, Array], Array]
    gradient: Callable[[Array, Array], Array]
    psi_hessian: Callable[[Array, Array], Array]
    periodic: bool = True

    def rotation_rate(self, x, y) -> Array:
        """Antisymmetric part of the velocity gradient, (3, 3, ...)."""
        g = self.gradient(x, y)
        return 0.5 * (g - np.swapaxes(g, 0, 1))

    def on_grid(self, grid: Grid) -> tuple[Array, Array]:
        x, y = grid.coords
        return self.velocity(x, y), self.gradient(x, y)

    def stationarity_residual(self, grid: Grid) -> float:
        """max |v . grad omega| on the grid, with grad omega by spectral differentiation."""
        x, y = grid.coords
        w = self.vorticity(x, y)
        wx = derivative(grid, w, 0)
        wy = derivative(grid, w, 1)
        v = self.velocity(x, y)
        return float(np.max(np.abs(v[0] * wx + v[1] * wy)))


def _zeros(x, y):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)


def _taylor_green() -> StationaryFlow:
    def velocity(x, y):
        return np.array([-np.cos(x) * np.sin(y), np.sin(x) * np.cos(y), _zeros(x, y)])

    def gradient(x, y):
        z = _zeros(x, y)
        sx, cx, sy, cy = np.sin(x), np.cos(x), np.sin(y), np.cos(y)
        return np.array([[sx * sy, -cx * cy, z], [cx * cy, -sx * sy, z], [z, z, z]])

    def hessian(x, y):
        sx, cx, sy, cy = np.sin(x), np.cos(x), np.sin(y), np.cos(y)
        return np.array([[-cx * cy, sx * sy], [sx * sy, -cx * cy]])

    return StationaryFlow(
        "taylor_green",
        psi=lambda x, y: np.cos(x) * np.cos(y),
        velocity=velocity,
        vorticity=lambda x, y: 2.0 * np.cos(x) * np.cos(y),
        gradient=gradient,
        psi_hessian=hessian,
    )


def _shear() -> StationaryFlow:
    def velocity(x, y):
        z = _zeros(x, y)
        return np.array([np.sin(y) + z, z, z])

    def gradient(x, y):
        z = _zeros(x, y)
        return np.array([[z, np.cos(y) + z, z], [z, z, z], [z, z, z]])

    def hessian(x, y):
        z = _zeros(x, y)
        return np.array([[z, z], [z, np.cos(y) + z]])

    return StationaryFlow(
        "shear",
        psi=lambda x, y: -np.cos(y) + _zeros(x, y),
        velocity=velocity,
        vorticity=lambda x, y: -np.cos(y) + _zeros(x, y),
        gradient=gradient,
        psi_hessian=hessian,
    )


def _zero() -> StationaryFlow:
    return StationaryFlow(
        "zero",
        psi=_zeros,
        velocity=lambda x, y: np.array([_zeros(x, y)] * 3),
        vorticity=_zeros,
        gradient=lambda x, y: np.zeros((3, 3) + _zeros(x, y).shape),
        psi_hessian=lambda x, y: np.zeros((2, 2) + _zeros(x, y).shape),
    )


def rigid_rotation(rate: float) -> StationaryFlow:
    """Solid-body rotation v = rate (-y, x, 0); not periodic, used for trajectory checks."""

    def gradient(x, y):
        z = _zeros(x, y)
        return np.array([[z, z - rate, z], [z + rate, z, z], [z, z, z]])

    return StationaryFlow(
        "rigid_rotation",
        psi=lambda x, y: -0.5 * rate * (x * x + y * y),
        velocity=lambda x, y: np.array([-rate * y + _zeros(x, y), rate * x + _zeros(x, y), _zeros(x, y)]),
        vorticity=lambda x, y: 2.0 * rate + _zeros(x, y),
        gradient=gradient,
        psi_hessian=lambda x, y: np.array([[_zeros(x, y) - rate, _zeros(x, y)], [_zeros(x, y), _zeros(x, y) - rate]]),
        periodic=False,
    )


_BUILTIN = {"taylor_green": _taylor_green, "shear": _shear, "zero": _zero}


def builtin_flow(name: str) -> StationaryFlow:
    try:
        return _BUILTIN[name]()
    except KeyError:
        raise DomainError(f"unknown flow {name!r}; choose from {sorted(_BUILTIN)}") from None
