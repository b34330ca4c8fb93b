"""Holomorphic potentials and the frame ODE dPhi = Phi xi.

Scalar holomorphic functions are Taylor polynomials at 0.  A potential is
anything exposing ``degrees`` and ``laurent(z)`` returning the dz-coefficient
of each lambda-degree as a stack of 2x2 matrices; both the singular and
the standard potential implement this.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .loop_algebra import (DEFAULT_N, TOL_DET, LoopMatrix, coeffs_from_samples,
                           eval_coeffs, mat2_det, mat2_mul)


class DomainError(ValueError):
    """Evaluation requested outside the region where a potential is defined."""


class ConditionAError(ValueError):
    """The coefficient a vanishes at an evaluated point."""


class IntegrationError(RuntimeError):
    """Step-size underflow or uncontrolled determinant drift."""


@dataclass(frozen=True, eq=False)
class AnalyticFunction:
    """f(z) = sum_n taylor_coeffs[n] z^n, defined for |z| < radius."""

    taylor_coeffs: np.ndarray
    radius: float = math.inf

    def __post_init__(self):
        c = np.atleast_1d(np.array(self.taylor_coeffs, dtype=complex))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("taylor_coeffs must be a non-empty 1-d sequence")
        c.setflags(write=False)
        object.__setattr__(self, "taylor_coeffs", c)
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @classmethod
    def constant(cls, value) -> "AnalyticFunction":
        return cls([value])

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if np.isfinite(self.radius) and np.any(np.abs(z) >= self.radius):
            raise DomainError(f"|z| reaches the radius {self.radius}")
        return np.polynomial.polynomial.polyval(z, self.taylor_coeffs)

    def tilde(self) -> "AnalyticFunction":
        """z -> conj(f(conj z))."""
        return AnalyticFunction(np.conj(self.taylor_coeffs), self.radius)

    def derivative(self) -> "AnalyticFunction":
        return AnalyticFunction(
            np.polynomial.polynomial.polyder(self.taylor_coeffs)
            if self.taylor_coeffs.size > 1 else [0.0], self.radius)

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.taylor_coeffs) <= tol))

    def _coerce(self, other) -> "AnalyticFunction":
        if isinstance(other, AnalyticFunction):
            return other
        return AnalyticFunction.constant(other)

    def __add__(self, other):
        o = self._coerce(other)
        return AnalyticFunction(np.polynomial.polynomial.polyadd(self.taylor_coeffs, o.taylor_coeffs),
                                min(self.radius, o.radius))

    __radd__ = __add__

    def __neg__(self):
        return AnalyticFunction(-self.taylor_coeffs, self.radius)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return AnalyticFunction(np.polynomial.polynomial.polymul(self.taylor_coeffs, o.taylor_coeffs),
                                min(self.radius, o.radius))

    __rmul__ = __mul__

    def __repr__(self):
        return f"AnalyticFunction({self.taylor_coeffs.tolist()})"


class Potential(Protocol):
    degrees: tuple[int, ...]

    def laurent(self, z) -> np.ndarray:
        """dz-coefficients at z, shape z.shape + (len(degrees), 2, 2)."""


def _as_fn(f) -> AnalyticFunction:
    return f if isinstance(f, AnalyticFunction) else AnalyticFunction(f)


@dataclass(frozen=True, eq=False)
class SingularPotential:
    """The singular potential built from holomorphic a, b, r and H > 0."""

    a: AnalyticFunction
    b: AnalyticFunction
    r: AnalyticFunction
    H: float
    r_tol: float = 1e-12

    degrees = (-3, -2, -1, 0, 1, 2, 3)

    def __post_init__(self):
        for name in ("a", "b", "r"):
            object.__setattr__(self, name, _as_fn(getattr(self, name)))
        if not self.H > 0:
            raise ValueError("H must be positive")
        if np.max(np.abs(self.r.taylor_coeffs.imag)) > self.r_tol:
            raise ValueError("r must be real on the real axis")
        if self.a.is_zero():
            raise ConditionAError("a vanishes identically")

    @property
    def radius(self) -> float:
        return min(self.a.radius, self.b.radius, self.r.radius)

    def laurent(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        zc = np.conj(z)
        a, b, r = self.a(z), self.b(z), self.r(z)
        at, bt = np.conj(self.a(zc)), np.conj(self.b(zc))
        if np.any(a == 0):
            raise ConditionAError("a(z) = 0 at an evaluated point")
        out = np.zeros(z.shape + (7, 2, 2), dtype=complex)
        out[..., 0, 1, 0] = -a           # lambda^-3
        out[..., 1, 0, 0] = -a           # lambda^-2
        out[..., 1, 1, 1] = a
        out[..., 2, 0, 1] = a            # lambda^-1
        out[..., 2, 1, 0] = b
        out[..., 3, 0, 0] = 1j * r       # lambda^0
        out[..., 3, 1, 1] = -1j * r
        out[..., 4, 0, 1] = bt           # lambda^1
        out[..., 4, 1, 0] = at
        out[..., 5, 0, 0] = at           # lambda^2
        out[..., 5, 1, 1] = -at
        out[..., 6, 0, 1] = -at          # lambda^3
        return out

    def check_condition_a(self, z) -> float:
        """Smallest |a| over the given points."""
        return float(np.min(np.abs(self.a(np.asarray(z)))))


@dataclass(frozen=True, eq=False)
class StandardPotential:
    """Potential with lambda-degrees >= -1 given by analytic matrix entries.

    ``terms`` maps a degree to a 2x2 nested sequence of AnalyticFunction
    (or None for a zero entry).
    """

    terms: dict

    def __post_init__(self):
        clean = {}
        for k, m in self.terms.items():
            if k < -1:
                raise ValueError("standard potentials start at lambda^-1")
            clean[int(k)] = tuple(tuple(None if e is None else _as_fn(e) for e in row) for row in m)
        object.__setattr__(self, "terms", dict(sorted(clean.items())))

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(self.terms)

    def laurent(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape + (len(self.terms), 2, 2), dtype=complex)
        for n, m in enumerate(self.terms.values()):
            for i in range(2):
                for j in range(2):
                    if m[i][j] is not None:
                        out[..., n, i, j] = m[i][j](z)
        return out

    def entry(self, k: int, i: int, j: int) -> AnalyticFunction | None:
        m = self.terms.get(k)
        return None if m is None else m[i][j]


def eval_singular_potential(xi: SingularPotential, z: complex, N: int = DEFAULT_N) -> LoopMatrix:
    """dz-coefficient of the singular potential at a single point."""
    if np.isfinite(xi.radius) and abs(z) >= xi.radius:
        raise DomainError(f"|z| = {abs(z)} outside radius {xi.radius}")
    c = xi.laurent(np.asarray(z))
    return LoopMatrix.from_terms(dict(zip(xi.degrees, c)), max(N, 3))


def translate_to_standard(xi: SingularPotential) -> StandardPotential:
    """Potential of Phi_omega * omega_1."""
    a, b, r = xi.a, xi.b, xi.r
    at, bt = a.tilde(), b.tilde()
    ir_bt = r * 1j + bt
    return StandardPotential({
        -1: ((None, a), (b - bt - r * 2j, None)),
        0: ((ir_bt, None), (None, -ir_bt)),
        1: ((None, bt), (None, None)),
        3: ((None, -at), (None, None)),
    })


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid of z = x + iy; row index runs over y."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nx: int
    ny: int
    basepoint: complex = 0j

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("nx and ny must be at least 2")
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        if not (x0 < x1 and y0 < y1):
            raise ValueError("ranges must be increasing")
        b = complex(self.basepoint)
        if not (x0 <= b.real <= x1 and y0 <= b.imag <= y1):
            raise ValueError("basepoint outside the grid domain")

    @property
    def xs(self) -> np.ndarray:
        return _axis(self.x_range, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return _axis(self.y_range, self.ny)

    @property
    def dx(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.y_range[1] - self.y_range[0]) / (self.ny - 1)

    def points(self) -> np.ndarray:
        """Complex array (ny, nx)."""
        return self.xs[None, :] + 1j * self.ys[:, None]

    @property
    def j_row(self) -> int | None:
        """Index of the row y = 0, if the grid samples it."""
        hits = np.flatnonzero(self.ys == 0.0)
        return int(hits[0]) if hits.size else None


def _axis(rng, n) -> np.ndarray:
    lo, hi = rng
    v = np.linspace(lo, hi, n)
    # snap the sample nearest zero so the real axis is hit exactly
    step = (hi - lo) / (n - 1)
    i = int(np.argmin(np.abs(v)))
    if abs(v[i]) < 1e-9 * step:
        v[i] = 0.0
    return v


@dataclass
class FrameField:
    """Result of integrating a potential to a set of points."""

    coeffs: np.ndarray            # (..., 2N+1, 2, 2)
    det_residual: np.ndarray      # (...)
    dropped_mass: np.ndarray      # (...)
    steps: np.ndarray             # (...) RK4 steps used per point
    ok: np.ndarray = field(default=None)

    def loop(self, index) -> LoopMatrix:
        return LoopMatrix(self.coeffs[index], float(self.dropped_mass[index]))


def integrate_frame(xi, grid, phi0: LoopMatrix | None = None, *, N: int = DEFAULT_N,
                    M: int | None = None, h_step: float | None = None,
                    tol_det: float = TOL_DET, drift_tol: float = 1e-6,
                    max_halvings: int = 6, basepoint: complex = 0j,
                    steps: int | None = None) -> FrameField:
    """Solve Phi^-1 dPhi = xi with Phi(z0) = phi0 by RK4 on straight segments.

    ``grid`` is a GridSpec or an array of complex points; the basepoint is
    the grid's, or ``basepoint`` for bare arrays.  ``steps`` fixes the
    number of RK4 steps for every point instead of deriving it from h_step.  Work happens pointwise on M circle
    samples of lambda, so products never truncate; the coefficients are
    recovered by FFT at the end.
    """
    if isinstance(grid, GridSpec):
        z = grid.points()
        z0 = complex(grid.basepoint)
        if h_step is None:
            h_step = min(grid.dx, grid.dy) / 4
    else:
        z = np.asarray(grid, dtype=complex)
        z0 = complex(basepoint)
        if h_step is None:
            h_step = 1e-2
    if not h_step > 0:
        raise IntegrationError("step size must be positive")
    M = M or 4 * N + 4
    if M < 4 * N + 4:
        raise ValueError("M must be at least 4N + 4")
    radius = getattr(xi, "radius", math.inf)
    if np.isfinite(radius) and (np.any(np.abs(z) >= radius) or abs(z0) >= radius):
        raise DomainError("grid leaves the analyticity disc of the potential")

    lam = np.exp(2j * np.pi * np.arange(M) / M)
    # twisted loops satisfy Phi(-lam) = D Phi(lam) D with D = diag(1, -1),
    # so only the first half of the circle is integrated when M is even
    half = M // 2 if M % 2 == 0 else M
    stepper = _Stepper(xi, lam[:half])

    if phi0 is None:
        phi0_s = None
    else:
        if phi0.det_residual() > tol_det:
            raise ValueError("initial value is not unimodular")
        phi0_s = eval_coeffs(phi0.coeffs, lam[:half])

    flat = z.reshape(-1)
    P = flat.size
    dist = np.abs(flat - z0)
    if steps is not None:
        nsteps = np.full(P, max(1, int(steps)))
    else:
        nsteps = np.maximum(1, np.ceil(dist / h_step - 1e-12).astype(int))
    samples = np.empty((P, M, 2, 2), dtype=complex)
    det_res = np.empty(P)
    used = nsteps.copy()

    todo = np.arange(P)
    steps = nsteps.copy()
    for _ in range(max_halvings + 1):
        psi = stepper.integrate(z0, flat[todo], steps[todo])
        phi = psi if phi0_s is None else mat2_mul(phi0_s[None], psi)
        if half != M:
            phi = np.concatenate([phi, phi * _TWIST_SIGN], axis=1)
        dr = np.max(np.abs(mat2_det(phi) - 1), axis=-1)
        samples[todo] = phi
        det_res[todo] = dr
        used[todo] = steps[todo]
        bad = dr > drift_tol
        if not np.any(bad):
            break
        todo = todo[bad]
        steps[todo] *= 2

    c, dropped_fft = coeffs_from_samples(samples, N)
    c = c.reshape(z.shape + (2 * N + 1, 2, 2))
    return FrameField(c, det_res.reshape(z.shape), dropped_fft.reshape(z.shape),
                      used.reshape(z.shape), ok=(det_res <= drift_tol).reshape(z.shape))


_TWIST_SIGN = np.array([[1, -1], [-1, 1]])


class _Stepper:
    """RK4 for Psi' = Psi xi on a fixed set of lambda samples.

    The four matrix entries are kept as separate contiguous (P, M) arrays.
    """

    def __init__(self, xi, lam: np.ndarray):
        self.xi = xi
        self.pw = lam[None, :] ** np.asarray(xi.degrees)[:, None]  # (nd, M)

    def _xi(self, z: np.ndarray, h: np.ndarray):
        c = self.xi.laurent(z) * h[:, None, None, None]  # (P, nd, 2, 2)
        out = []
        for i in range(2):
            for j in range(2):
                acc = np.zeros((z.size, self.pw.shape[1]), dtype=complex)
                for d in range(self.pw.shape[0]):
                    cd = c[:, d, i, j]
                    if np.any(cd):
                        acc += cd[:, None] * self.pw[d][None, :]
                out.append(acc)
        return out

    @staticmethod
    def _mul(p, x):
        p0, p1, p2, p3 = p
        x0, x1, x2, x3 = x
        return (p0 * x0 + p1 * x2, p0 * x1 + p1 * x3,
                p2 * x0 + p3 * x2, p2 * x1 + p3 * x3)

    def integrate(self, z0: complex, targets: np.ndarray, n) -> np.ndarray:
        """Psi at each target after n (scalar or per-target) RK4 steps from z0."""
        n = np.broadcast_to(np.asarray(n, dtype=int), targets.shape)
        order = np.argsort(-n, kind="stable")
        tg, ns = targets[order], n[order]
        dz = (tg - z0) / ns
        shape = (tg.size, self.pw.shape[1])
        psi = [np.ones(shape, dtype=complex), np.zeros(shape, dtype=complex),
               np.zeros(shape, dtype=complex), np.ones(shape, dtype=complex)]
        # points are sorted by step count, so the active set is a prefix
        counts = [int(np.sum(ns > k)) for k in range(int(ns.max()) if ns.size else 0)]
        xa = None
        for k, m in enumerate(counts):
            d = dz[:m]
            za = z0 + k * d
            xa = self._xi(za, d) if xa is None else [x[:m] for x in xa]
            xm = self._xi(za + 0.5 * d, d)
            xb = self._xi(za + d, d)
            p = [q[:m] for q in psi]
            k1 = self._mul(p, xa)
            k2 = self._mul([u + 0.5 * v for u, v in zip(p, k1)], xm)
            k3 = self._mul([u + 0.5 * v for u, v in zip(p, k2)], xm)
            k4 = self._mul([u + v for u, v in zip(p, k3)], xb)
            for q, a1, a2, a3, a4 in zip(psi, k1, k2, k3, k4):
                q[:m] += (a1 + 2 * a2 + 2 * a3 + a4) / 6
            xa = xb
        out = np.empty(shape + (2, 2), dtype=complex)
        inv = np.empty_like(order)
        inv[order] = np.arange(order.size)
        for q, (i, j) in zip(psi, ((0, 0), (0, 1), (1, 0), (1, 1))):
            out[..., i, j] = q[inv]
        return out


@dataclass
class StandardValidation:
    passed: bool
    min_abs: float


def validate_standard(xi: StandardPotential, grid) -> StandardValidation:
    """Check that the lambda^-1 (1,2) entry never vanishes on the grid."""
    z = grid.points() if isinstance(grid, GridSpec) else np.asarray(grid, dtype=complex)
    f = xi.entry(-1, 0, 1)
    m = 0.0 if f is None else float(np.min(np.abs(f(z))))
    return StandardValidation(m > 0, m)




def polyline_frame(xi, path: Sequence[complex], *, N: int = DEFAULT_N, M: int | None = None,
                   h_step: float = 1e-2) -> LoopMatrix:
    """Integrate from path[0] = 0 along a polyline; used for path-independence checks."""
    M = M or 4 * N + 4
    lam = np.exp(2j * np.pi * np.arange(M) / M)
    stepper = _Stepper(xi, lam)
    phi = np.broadcast_to(np.eye(2, dtype=complex), (1, M, 2, 2)).copy()
    for za, zb in zip(path[:-1], path[1:]):
        n = max(1, int(np.ceil(abs(zb - za) / h_step)))
        phi = mat2_mul(phi, stepper.integrate(complex(za), np.array([zb], dtype=complex), n))
    c, dropped = coeffs_from_samples(phi[0], N)
    return LoopMatrix(c, float(dropped))


__all__ = [
    "AnalyticFunction", "SingularPotential", "StandardPotential", "GridSpec",
    "FrameField", "StandardValidation", "DomainError", "ConditionAError",
    "IntegrationError", "eval_singular_potential", "translate_to_standard",
    "integrate_frame", "validate_standard", "polyline_frame",
]
