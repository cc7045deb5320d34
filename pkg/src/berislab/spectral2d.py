"""Fourier pseudo-spectral tools on the periodic square [-pi, pi]^2.

Physical arrays have shape ``(..., n, n)`` with axis -2 the x direction and
axis -1 the y direction; spectral arrays are the matching real-to-complex
transforms of shape ``(..., n, n // 2 + 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from berislab.errors import DomainError

KINDS = {"scalar": 1, "vec3": 3, "qtensor": 5}

_workers = 1


def set_workers(n: int) -> None:
    """Thread count used by every transform (results are deterministic for a fixed count)."""
    global _workers
    _workers = max(1, int(n))


@dataclass(frozen=True, eq=False)
class Grid:
    n: int

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise DomainError(f"grid size must be even and >= 8, got {self.n}")

    @property
    def dx(self) -> float:
        return 2.0 * np.pi / self.n

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (x, y) of node positions -pi + j dx, indexing 'ij'."""
        x = -np.pi + self.dx * np.arange(self.n)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        kx = np.fft.fftfreq(self.n, 1.0 / self.n)[:, None]
        ky = np.fft.rfftfreq(self.n, 1.0 / self.n)[None, :]
        return kx, ky

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky = self.wavenumbers
        return kx * kx + ky * ky

    @cached_property
    def inv_k2(self) -> np.ndarray:
        k2 = self.k2.copy()
        k2[0, 0] = 1.0
        out = 1.0 / k2
        out[0, 0] = 0.0
        return out

    @cached_property
    def deriv_multipliers(self) -> tuple[np.ndarray, np.ndarray]:
        """ik for first derivatives with the unpaired Nyquist modes dropped."""
        kx, ky = self.wavenumbers
        half = self.n // 2
        kx = np.where(np.abs(kx) == half, 0.0, kx)
        ky = np.where(ky == half, 0.0, ky)
        return 1j * kx, 1j * ky

    @cached_property
    def projector_wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        ikx, iky = self.deriv_multipliers
        return ikx.imag, iky.imag

    @cached_property
    def projector_inv_k2(self) -> np.ndarray:
        kx, ky = self.projector_wavenumbers
        k2 = kx * kx + ky * ky
        return np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        kx, ky = self.wavenumbers
        return ((np.abs(kx) <= self.n / 3.0) & (ky <= self.n / 3.0)).astype(float)

    @cached_property
    def spectral_weights(self) -> np.ndarray:
        """Multiplicity of each half-spectrum column in the full spectrum."""
        w = np.full((1, self.n // 2 + 1), 2.0)
        w[0, 0] = 1.0
        w[0, -1] = 1.0
        return w

    def fft(self, f: np.ndarray) -> np.ndarray:
        return sfft.rfft2(f, axes=(-2, -1), workers=_workers)

    def ifft(self, fhat: np.ndarray) -> np.ndarray:
        return sfft.irfft2(fhat, s=(self.n, self.n), axes=(-2, -1), workers=_workers)

    def integrate(self, f: np.ndarray) -> float:
        """Trapezoidal (spectrally exact) integral over the torus, summed over leading axes."""
        return float(np.sum(f) * self.cell_area)


@dataclass
class Field:
    """A payload on a grid: ``data`` has shape ``(ncomp, n, n)``."""

    grid: Grid
    kind: str
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown payload kind {self.kind!r}")
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim == 2:
            self.data = self.data[None]
        expect = (KINDS[self.kind], self.grid.n, self.grid.n)
        if self.data.shape != expect:
            raise DomainError(f"{self.kind} field needs shape {expect}, got {self.data.shape}")


def derivative(grid: Grid, f: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
    """Spectral derivative of order 1 or 2 along axis 0 (x) or 1 (y)."""
    if order not in (1, 2):
        raise DomainError("derivative order must be 1 or 2")
    if axis not in (0, 1):
        raise DomainError("axis must be 0 (x) or 1 (y)")
    fhat = grid.fft(f)
    if order == 1:
        mult = grid.deriv_multipliers[axis]
    else:
        k = grid.wavenumbers[axis]
        mult = -(k * k)
    return grid.ifft(mult * fhat)


def gradient_hat(grid: Grid, fhat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ikx, iky = grid.deriv_multipliers
    return ikx * fhat, iky * fhat


def dealias(grid: Grid, fhat: np.ndarray) -> np.ndarray:
    """Two-thirds rule: zero modes with max(|kx|, |ky|) > n/3."""
    return fhat * grid.dealias_mask


def leray_project_hat(grid: Grid, uhat: np.ndarray) -> np.ndarray:
    """Project the in-plane part of a spectral 3-vector onto divergence-free fields.

    Uses the same wavenumbers as ``derivative`` (Nyquist dropped), so the
    result has zero discrete divergence for any input.
    """
    kx, ky = grid.projector_wavenumbers
    out = uhat.copy()
    kdotu = (kx * uhat[0] + ky * uhat[1]) * grid.projector_inv_k2
    out[0] = uhat[0] - kx * kdotu
    out[1] = uhat[1] - ky * kdotu
    return out


def leray_project(grid: Grid, u: np.ndarray) -> np.ndarray:
    return grid.ifft(leray_project_hat(grid, grid.fft(u)))


def divergence(grid: Grid, u: np.ndarray) -> np.ndarray:
    uhat = grid.fft(u[:2])
    ikx, iky = grid.deriv_multipliers
    return grid.ifft(ikx * uhat[0] + iky * uhat[1])


def l2_norm(grid: Grid, f: np.ndarray) -> float:
    return float(np.sqrt(np.sum(f * f) * grid.cell_area))


def sobolev_norm_hat(grid: Grid, fhat: np.ndarray, s: int) -> float:
    weight = (1.0 + grid.k2) ** s * grid.spectral_weights
    coef = np.abs(fhat) ** 2 / float(grid.n) ** 4
    return float(2.0 * np.pi * np.sqrt(np.sum(weight * coef)))


def sobolev_norm(grid: Grid, f: np.ndarray, s: int) -> float:
    """sqrt(sum_k (1+|k|^2)^s |f_k|^2) scaled so that s = 0 is the L^2 norm on the torus."""
    if s not in (0, 1, 2, 3):
        raise DomainError("Sobolev index must be 0, 1, 2 or 3")
    return sobolev_norm_hat(grid, grid.fft(f), s)


def stream_velocity_hat(grid: Grid, omega_hat: np.ndarray) -> np.ndarray:
    """In-plane velocity (d_y psi, -d_x psi) from vorticity, with -lap psi = omega."""
    psi = omega_hat * grid.inv_k2
    ikx, iky = grid.deriv_multipliers
    return np.array([iky * psi, -ikx * psi])


def tail_fraction(grid: Grid, fhat: np.ndarray) -> float:
    """Energy fraction in the outer shell of retained modes, n/3 - 2 < max|k| <= n/3."""
    kx, ky = grid.wavenumbers
    kmax = np.maximum(np.abs(kx), ky)
    energy = np.abs(fhat) ** 2 * grid.spectral_weights
    energy = energy.reshape(-1, *grid.k2.shape).sum(axis=0)
    total = energy.sum()
    if total == 0:
        return 0.0
    shell = (kmax > grid.n / 3.0 - 2.0) & (kmax <= grid.n / 3.0)
    return float(energy[shell].sum() / total)
