"""Singular Björling data: potential, prescribed curve, singularity type.

The data are real polynomials s, t, theta on an interval J containing 0,
describing a null curve f0 with f0' = s (cos theta, sin theta, 1) and the
transverse field v = t (cos theta, sin theta, 1).  Internally theta is
shifted so theta(0) = -pi/2; the surface is rotated back about e3 at the
end so that it contains the curve exactly as prescribed.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad_vec

from .potentials import AnalyticFunction, SingularPotential
from .surface import SurfaceGrid, build_surfaces


class SingularityType(str, enum.Enum):
    CUSPIDAL_EDGE = "CuspidalEdge"
    SWALLOWTAIL = "Swallowtail"
    CUSPIDAL_CROSS_CAP = "CuspidalCrossCap"
    DEGENERATE = "Degenerate"
    CONE_POINT_CANDIDATE = "ConePointCandidate"
    UNCLASSIFIED = "Unclassified"


class BjorlingError(ValueError):
    pass


def _poly(c) -> Polynomial:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
        raise BjorlingError("polynomial coefficients must be a non-empty finite list")
    return Polynomial(c)


@dataclass(frozen=True, eq=False)
class BjorlingData:
    """Coefficients are in increasing degree: [c0, c1, ...] means c0 + c1 x + ..."""

    s_coeffs: tuple
    t_coeffs: tuple
    theta_coeffs: tuple
    H: float
    J: tuple = (-1.0, 1.0)

    def __post_init__(self):
        for name in ("s_coeffs", "t_coeffs", "theta_coeffs"):
            object.__setattr__(self, name, tuple(float(v) for v in np.atleast_1d(getattr(self, name))))
        object.__setattr__(self, "J", (float(self.J[0]), float(self.J[1])))
        if not self.H > 0:
            raise BjorlingError("H must be positive")
        if not self.J[0] <= 0 <= self.J[1] or self.J[0] == self.J[1]:
            raise BjorlingError("J must be an interval containing 0")
        x = _common_zero(self.s, self.t, self.J)
        if x is not None:
            raise BjorlingError(f"s and t vanish simultaneously at x = {x:.6g}")

    @property
    def s(self) -> Polynomial:
        return _poly(self.s_coeffs)

    @property
    def t(self) -> Polynomial:
        return _poly(self.t_coeffs)

    @property
    def theta(self) -> Polynomial:
        return _poly(self.theta_coeffs)

    @property
    def theta_normalized(self) -> Polynomial:
        th = self.theta
        return th - th(0.0) - math.pi / 2

    @property
    def frame_rotation(self) -> float:
        """Angle about e3 taking the normalized picture to the prescribed one."""
        return float(self.theta(0.0)) + math.pi / 2

    def j_samples(self, n: int = 2001) -> np.ndarray:
        return np.linspace(self.J[0], self.J[1], n)

    def tol_zero(self) -> float:
        x = self.j_samples()
        scale = max(np.max(np.abs(self.s(x))), np.max(np.abs(self.t(x))), 1.0)
        return 1e-10 * scale

    def _check_x(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.J[0] - 1e-12) or np.any(x > self.J[1] + 1e-12):
            raise BjorlingError("point outside J")
        return x


def _common_zero(s: Polynomial, t: Polynomial, J) -> float | None:
    lo, hi = J
    tol = 1e-12 * max(1.0, np.max(np.abs(s.coef)), np.max(np.abs(t.coef)))

    def real_roots(p):
        if np.all(np.abs(p.coef) <= tol):
            return None
        r = p.trim(tol).roots() if p.trim(tol).degree() > 0 else np.array([])
        r = r[np.abs(r.imag) <= 1e-9].real
        return r[(r >= lo - 1e-12) & (r <= hi + 1e-12)]

    rs, rt = real_roots(s), real_roots(t)
    if rs is None and rt is None:
        return 0.0
    cands = rs if rs is not None else rt
    other = t if rs is not None else s
    for x in cands:
        if abs(other(x)) <= 1e-9 * max(1.0, np.max(np.abs(other.coef))):
            return float(x)
    return None


def data_to_singular_potential(d: BjorlingData) -> SingularPotential:
    """a = H(-s + i t)/4, b = i H t/2, r = (theta' + H t)/2, extended to z."""
    H = d.H
    s, t = d.s.coef, d.t.coef
    n = max(s.size, t.size)
    s = np.pad(s, (0, n - s.size))
    t = np.pad(t, (0, n - t.size))
    a = H * (-s + 1j * t) / 4
    b = 1j * H * t / 2
    r = np.polynomial.polynomial.polyadd(d.theta.deriv().coef, H * d.t.coef) / 2
    return SingularPotential(AnalyticFunction(a), AnalyticFunction(b),
                             AnalyticFunction(np.asarray(r, dtype=complex)), H)


def classify_singularity(d: BjorlingData, x0: float) -> SingularityType:
    """Generic singularity type at the point x0 of the singular curve."""
    x0 = float(d._check_x(x0))
    tol = d.tol_zero()
    if abs(d.theta.deriv()(x0)) <= tol:
        return SingularityType.DEGENERATE
    if np.all(np.abs(d.s.coef) <= tol):
        return SingularityType.CONE_POINT_CANDIDATE
    s0, t0 = d.s(x0), d.t(x0)
    s1, t1 = d.s.deriv()(x0), d.t.deriv()(x0)

    def nz(v):
        return abs(v) > tol

    if nz(t0) and nz(s0):
        return SingularityType.CUSPIDAL_EDGE
    if nz(t0) and not nz(s0) and nz(s1):
        return SingularityType.SWALLOWTAIL
    if nz(s0) and not nz(t0) and nz(t1):
        return SingularityType.CUSPIDAL_CROSS_CAP
    return SingularityType.UNCLASSIFIED


def is_degenerate(d: BjorlingData) -> bool:
    """theta' vanishes identically, so no big cell meets a neighbourhood of J."""
    return bool(np.all(np.abs(d.theta.deriv().coef) <= d.tol_zero()))


def null_direction(d: BjorlingData, x: float) -> np.ndarray:
    """Coefficients of d/dx and d/dy spanning the kernel of df on J."""
    x = d._check_x(x)
    return np.array([d.t(x), -d.s(x)], dtype=float)


def singular_frame_on_curve(d: BjorlingData, x: float) -> np.ndarray:
    """Diagonal frame on J; the identity at x = 0."""
    x = d._check_x(x)
    phase = np.exp(1j * (2 * d.theta_normalized(x) + math.pi) / 4)
    return np.array([[phase, 0], [0, np.conj(phase)]])


def reconstruct_curve(d: BjorlingData, x) -> np.ndarray:
    """f0(x) = integral from 0 of s (cos theta, sin theta, 1)."""
    x = d._check_x(x)
    s, th = d.s, d.theta

    def tangent(u):
        return s(u) * np.array([np.cos(th(u)), np.sin(th(u)), 1.0])

    xs = np.atleast_1d(x)
    out = np.array([quad_vec(tangent, 0.0, float(xi), epsabs=1e-14, epsrel=1e-13)[0]
                    for xi in xs])
    return out.reshape(np.shape(x) + (3,))


def solve_bjorling(d: BjorlingData, grid, lambda0s=(1.0,), **kw) -> list[SurfaceGrid]:
    """Surfaces containing the prescribed curve, one per lambda0.

    The curve is reproduced at lambda0 = 1; other values give the
    associated family placed with the same rigid motion.
    """
    xi = data_to_singular_potential(d)
    return build_surfaces(xi, grid, lambda0s, rotation=d.frame_rotation,
                          translation=(0.0, 0.0, 0.0), **kw)
