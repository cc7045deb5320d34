"""Pointwise algebra of symmetric traceless 3x3 tensors.

A Q-tensor is stored as its five independent components
``(q11, q12, q13, q22, q23)`` along the leading axis of an array, so a single
tensor has shape ``(5,)`` and a grid field has shape ``(5, n, n)``.  The
remaining entries follow from symmetry and ``q33 = -q11 - q22``.  Every
function here broadcasts over trailing axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from berislab.errors import DomainError

NCOMP = 5
DEGENERATE_NORM = 1e-14

# (row, col) of each stored component in the full matrix
COMPONENT_INDEX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2))


@dataclass(frozen=True)
class Params:
    """Coefficients of the non-dimensional flow model.

    eps is the inverse Ericksen/Reynolds scale, xi the tumbling/aligning ratio,
    kappa the bulk-stress weight and (a, b, c) the Landau coefficients of the
    bulk potential.
    """

    eps: float = 1.0
    xi: float = 0.0
    kappa: float = 1.0
    a: float = -0.2
    b: float = 1.0
    c: float = 1.0

    def validate(self) -> Params:
        for name in ("eps", "xi", "kappa", "a", "b", "c"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.eps <= 0:
            raise DomainError("constraint violated: eps > 0")
        if self.kappa <= 0:
            raise DomainError("constraint violated: kappa > 0")
        if self.b <= 0:
            raise DomainError("constraint violated: b > 0")
        if self.c <= 0:
            raise DomainError("constraint violated: c > 0")
        return self

    @property
    def a_admissible(self) -> bool:
        """True when |a| < b^2/(3c), the range where the nonzero minima are stable."""
        return abs(self.a) < self.b**2 / (3.0 * self.c)

    @property
    def discriminant(self) -> float:
        return self.b**2 - 24.0 * self.a * self.c

    def with_(self, **kw) -> Params:
        return replace(self, **kw)

    def scaled(self, lam: float) -> Params:
        """Coefficients (lam*a, sqrt(lam)*b, c) used by the small-bulk escape construction."""
        return replace(self, a=lam * self.a, b=math.sqrt(lam) * self.b)


def stationary_scalars(p: Params) -> tuple[float, float, float]:
    """Return ``(s_minus, s_plus, m)`` with ``m = s_plus / 3``.

    s_minus and s_plus are the nonzero uniaxial amplitudes where the bulk
    gradient vanishes; [-m, 2m] is the eigenvalue interval kept invariant by
    the co-rotational dynamics.
    """
    disc = p.discriminant
    if disc < 0:
        raise DomainError(f"b^2 - 24ac = {disc} < 0: no real stationary amplitudes")
    root = math.sqrt(disc)
    s_plus = (p.b + root) / (4.0 * p.c)
    s_minus = (p.b - root) / (4.0 * p.c)
    return s_minus, s_plus, s_plus / 3.0


def interval(p: Params) -> tuple[float, float]:
    """Endpoints ``(-m, 2m)`` of the physical eigenvalue interval."""
    if p.discriminant < 0:
        raise DomainError(f"b^2 - 24ac = {p.discriminant} < 0: no real stationary amplitudes")
    top = p.b + math.sqrt(p.discriminant)
    return -top / (12.0 * p.c), top / (6.0 * p.c)


def qtensor(q11: float, q12: float, q13: float, q22: float, q23: float) -> np.ndarray:
    return np.array([q11, q12, q13, q22, q23], dtype=float)


def to_matrix(q: np.ndarray) -> np.ndarray:
    """Expand components ``(5, ...)`` into full matrices ``(3, 3, ...)``."""
    q = np.asarray(q, dtype=float)
    q11, q12, q13, q22, q23 = q
    q33 = -q11 - q22
    return np.array([[q11, q12, q13], [q12, q22, q23], [q13, q23, q33]])


def from_matrix(mat: np.ndarray) -> np.ndarray:
    """Symmetric traceless part of ``(3, 3, ...)`` matrices, as components."""
    mat = np.asarray(mat, dtype=float)
    tr3 = (mat[0, 0] + mat[1, 1] + mat[2, 2]) / 3.0
    return np.array(
        [
            mat[0, 0] - tr3,
            0.5 * (mat[0, 1] + mat[1, 0]),
            0.5 * (mat[0, 2] + mat[2, 0]),
            mat[1, 1] - tr3,
            0.5 * (mat[1, 2] + mat[2, 1]),
        ]
    )


def uniaxial(s: float | np.ndarray, director: np.ndarray) -> np.ndarray:
    """``s (n n^T - I/3)`` for a director ``(3, ...)`` (normalised here)."""
    n = np.asarray(director, dtype=float)
    n = n / np.sqrt(np.sum(n * n, axis=0))
    outer = np.einsum("i...,j...->ij...", n, n)
    return np.asarray(s) * from_matrix(outer)


def trace_sq(q: np.ndarray) -> np.ndarray:
    """tr(Q^2) = |Q|^2."""
    q11, q12, q13, q22, q23 = q
    q33 = -q11 - q22
    return q11 * q11 + q22 * q22 + q33 * q33 + 2.0 * (q12 * q12 + q13 * q13 + q23 * q23)


def det(q: np.ndarray) -> np.ndarray:
    q11, q12, q13, q22, q23 = q
    q33 = -q11 - q22
    return (
        q11 * (q22 * q33 - q23 * q23)
        - q12 * (q12 * q33 - q23 * q13)
        + q13 * (q12 * q23 - q22 * q13)
    )


def trace_cube(q: np.ndarray) -> np.ndarray:
    """tr(Q^3), equal to 3 det(Q) for traceless Q."""
    return 3.0 * det(q)


def norm(q: np.ndarray) -> np.ndarray:
    return np.sqrt(trace_sq(q))


def square_traceless(q: np.ndarray) -> np.ndarray:
    """Components of ``Q^2 - tr(Q^2) I / 3``."""
    q11, q12, q13, q22, q23 = q
    q33 = -q11 - q22
    t3 = trace_sq(q) / 3.0
    return np.array(
        [
            q11 * q11 + q12 * q12 + q13 * q13 - t3,
            q11 * q12 + q12 * q22 + q13 * q23,
            q11 * q13 + q12 * q23 + q13 * q33,
            q12 * q12 + q22 * q22 + q23 * q23 - t3,
            q12 * q13 + q22 * q23 + q23 * q33,
        ]
    )


def eigenvalues(q: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues, shape ``(3, ...)``.

    Uses the trigonometric solution of lambda^3 - (tr Q^2 / 2) lambda - det Q = 0.
    Exactly diagonal inputs return their sorted diagonal, and tensors with
    |Q| < 1e-14 return zeros.  Near a repeated eigenvalue the pair is accurate
    to roughly 1e-8 |Q| because of the arccos conditioning.
    """
    q = np.asarray(q, dtype=float)
    tsq = trace_sq(q)
    j2 = 0.5 * tsq
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        cos3 = 0.5 * det(q) * (3.0 / j2) ** 1.5
    cos3 = np.clip(np.nan_to_num(cos3), -1.0, 1.0)
    theta = np.arccos(cos3) / 3.0
    r = 2.0 * np.sqrt(j2 / 3.0)
    top = r * np.cos(theta)
    low = r * np.cos(theta + 2.0 * np.pi / 3.0)
    mid = -top - low
    out = np.array([low, mid, top])

    q11, q12, q13, q22, q23 = q
    diagonal = (q12 == 0) & (q13 == 0) & (q23 == 0)
    if np.any(diagonal):
        diag = np.sort(np.array([q11, q22, -q11 - q22]), axis=0)
        out = np.where(diagonal, diag, out)
    tiny = np.sqrt(tsq) < DEGENERATE_NORM
    if np.any(tiny):
        out = np.where(tiny, 0.0, out)
    return out


def bulk_energy(q: np.ndarray, p: Params) -> np.ndarray:
    """f_B(Q) = (a/2) tr Q^2 - (b/3) tr Q^3 + (c/4) (tr Q^2)^2."""
    t2 = trace_sq(q)
    return 0.5 * p.a * t2 - p.b * det(q) + 0.25 * p.c * t2 * t2


def bulk_gradient(q: np.ndarray, p: Params) -> np.ndarray:
    """Trace-free derivative of the bulk potential: aQ - b(Q^2 - tr(Q^2)I/3) + c tr(Q^2) Q."""
    q = np.asarray(q, dtype=float)
    return (p.a + p.c * trace_sq(q)) * q - p.b * square_traceless(q)


def in_physical_interval(q: np.ndarray, p: Params, tol: float = 1e-12) -> bool:
    """True when every eigenvalue (of every tensor in ``q``) lies in [-m - tol, 2m + tol]."""
    lo, hi = interval(p)
    ev = eigenvalues(q)
    return bool(np.all(ev[0] >= lo - tol) and np.all(ev[2] <= hi + tol))


def frobenius_inner(q: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Q:R for component arrays."""
    return (
        2.0 * q[0] * r[0]
        + 2.0 * q[3] * r[3]
        + q[0] * r[3]
        + q[3] * r[0]
        + 2.0 * (q[1] * r[1] + q[2] * r[2] + q[4] * r[4])
    )
