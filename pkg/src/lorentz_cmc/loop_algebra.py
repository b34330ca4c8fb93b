"""Truncated twisted Laurent series of 2x2 complex matrices.

A loop is stored densely as an array of shape ``(2N+1, 2, 2)`` where slot
``k + N`` holds the coefficient of ``lambda**k``.  Batched helpers operate
on arrays with arbitrary leading axes, ``(..., 2N+1, 2, 2)``, and are what
the pipeline uses for whole grids at once.  2x2 products are written out
entrywise so results never depend on how a batch is chunked.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_N = 24
TOL_DET = 1e-9

E1 = np.array([[0, 1], [1, 0]], dtype=complex)
E2 = np.array([[0, 1j], [-1j, 0]], dtype=complex)
E3 = np.array([[1j, 0], [0, -1j]], dtype=complex)
J_SIG = np.array([[1, 0], [0, -1]], dtype=complex)


class LoopError(ValueError):
    """Raised for malformed loops or failed preconditions."""


# ---------------------------------------------------------------------------
# entrywise 2x2 kernels on (..., 2, 2) arrays


def mat2_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
    out[..., 0, 0] = a[..., 0, 0] * b[..., 0, 0] + a[..., 0, 1] * b[..., 1, 0]
    out[..., 0, 1] = a[..., 0, 0] * b[..., 0, 1] + a[..., 0, 1] * b[..., 1, 1]
    out[..., 1, 0] = a[..., 1, 0] * b[..., 0, 0] + a[..., 1, 1] * b[..., 1, 0]
    out[..., 1, 1] = a[..., 1, 0] * b[..., 0, 1] + a[..., 1, 1] * b[..., 1, 1]
    return out


def mat2_det(a: np.ndarray) -> np.ndarray:
    return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]


def mat2_adj(a: np.ndarray) -> np.ndarray:
    """Adjugate; equals the inverse when det = 1."""
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1]
    out[..., 1, 1] = a[..., 0, 0]
    out[..., 0, 1] = -a[..., 0, 1]
    out[..., 1, 0] = -a[..., 1, 0]
    return out


def mat2_inv(a: np.ndarray) -> np.ndarray:
    return mat2_adj(a) / mat2_det(a)[..., None, None]


# ---------------------------------------------------------------------------
# coefficient-array kernels


def twist_mask(n_coeffs: int, N: int) -> np.ndarray:
    """Boolean mask (n_coeffs, 2, 2) of entries allowed by the twist."""
    k = np.arange(-N, -N + n_coeffs)
    even = (k % 2 == 0)[:, None, None]
    diag = np.eye(2, dtype=bool)[None]
    return np.where(even, diag, ~diag)


def conv_coeffs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full Cauchy product of two centred coefficient arrays.

    ``a`` has shape (..., 2Na+1, 2, 2) and ``b`` (..., 2Nb+1, 2, 2); the
    result is centred with half-width Na+Nb.
    """
    La, Lb = a.shape[-3], b.shape[-3]
    lead = np.broadcast_shapes(a.shape[:-3], b.shape[:-3])
    out = np.zeros(lead + (La + Lb - 1, 2, 2), dtype=np.result_type(a, b, complex))
    if La <= Lb:
        for i in range(La):
            out[..., i:i + Lb, :, :] += mat2_mul(a[..., i:i + 1, :, :], b)
    else:
        for j in range(Lb):
            out[..., j:j + La, :, :] += mat2_mul(a, b[..., j:j + 1, :, :])
    return out


def recentre(c: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncate or zero-pad a centred coefficient array to half-width N.

    Returns the new array and the Frobenius norm of what was dropped
    (shape of the leading axes).
    """
    L = c.shape[-3]
    half = (L - 1) // 2
    if half == N:
        return c, np.zeros(c.shape[:-3])
    if half < N:
        out = np.zeros(c.shape[:-3] + (2 * N + 1, 2, 2), dtype=c.dtype)
        out[..., N - half:N + half + 1, :, :] = c
        return out, np.zeros(c.shape[:-3])
    lo, hi = half - N, half + N + 1
    dropped = np.sqrt(np.sum(np.abs(c[..., :lo, :, :]) ** 2, axis=(-3, -2, -1))
                      + np.sum(np.abs(c[..., hi:, :, :]) ** 2, axis=(-3, -2, -1)))
    return c[..., lo:hi, :, :], dropped


def power_table(lam: np.ndarray, N: int) -> np.ndarray:
    """lam**k for k = -N..N, shape lam.shape + (2N+1,)."""
    lam = np.asarray(lam, dtype=complex)
    k = np.arange(-N, N + 1)
    return lam[..., None] ** k


def eval_coeffs(c: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Evaluate centred coefficients at points lam.

    ``c`` is (..., 2N+1, 2, 2), ``lam`` is 1-d of length M; returns
    (..., M, 2, 2).
    """
    N = (c.shape[-3] - 1) // 2
    V = power_table(np.atleast_1d(lam), N)  # (M, L)
    return np.einsum("mk,...kij->...mij", V, c)


def coeffs_from_samples(samples: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of sampling on the M-th roots of unity.

    ``samples`` is (..., M, 2, 2) taken at exp(2 pi i j / M).  Returns the
    centred coefficients for degrees -N..N and the Frobenius norm of the
    remaining Fourier modes.
    """
    M = samples.shape[-3]
    if M < 2 * N + 1:
        raise LoopError(f"need at least {2 * N + 1} samples, got {M}")
    ft = np.fft.fft(samples, axis=-3) / M  # bin k holds coefficient of lambda^k
    idx = np.arange(-N, N + 1) % M
    c = ft[..., idx, :, :]
    keep = np.zeros(M, dtype=bool)
    keep[idx] = True
    dropped = np.sqrt(np.sum(np.abs(ft[..., ~keep, :, :]) ** 2, axis=(-3, -2, -1)))
    return c, dropped


def star_coeffs(c: np.ndarray) -> np.ndarray:
    """Coefficients of lambda -> conj(A(lambda))^T on the unit circle."""
    return np.conj(c[..., ::-1, :, :]).swapaxes(-1, -2)


# ---------------------------------------------------------------------------
# public types


@dataclass(frozen=True)
class CircleSampling:
    """M equally spaced points on the unit circle."""

    M: int

    def __post_init__(self):
        if self.M < 4:
            raise LoopError("M must be at least 4")

    @classmethod
    def for_degree(cls, N: int) -> "CircleSampling":
        return cls(4 * N + 4)

    @property
    def points(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.M) / self.M)


@dataclass(frozen=True, eq=False)
class LoopMatrix:
    """Truncated Laurent series sum_k coeffs[k] lambda^k, k = -N..N."""

    coeffs: np.ndarray
    dropped_mass: float = field(default=0.0)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[1:] != (2, 2) or c.shape[0] % 2 != 1:
            raise LoopError(f"coefficient array must be (2N+1, 2, 2), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "dropped_mass", float(self.dropped_mass))

    # constructors -----------------------------------------------------
    @classmethod
    def from_terms(cls, terms: dict[int, np.ndarray], N: int = DEFAULT_N) -> "LoopMatrix":
        c = np.zeros((2 * N + 1, 2, 2), dtype=complex)
        for k, m in terms.items():
            if abs(k) > N:
                raise LoopError(f"degree {k} exceeds truncation {N}")
            c[k + N] += np.asarray(m, dtype=complex)
        return cls(c)

    @classmethod
    def constant(cls, m, N: int = DEFAULT_N) -> "LoopMatrix":
        return cls.from_terms({0: m}, N)

    # basic properties -------------------------------------------------
    @property
    def trunc_degree(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    N = trunc_degree

    def coeff(self, k: int) -> np.ndarray:
        N = self.trunc_degree
        if abs(k) > N:
            return np.zeros((2, 2), dtype=complex)
        return self.coeffs[k + N]

    def resized(self, N: int) -> "LoopMatrix":
        c, dropped = recentre(self.coeffs, N)
        return LoopMatrix(c, self.dropped_mass + float(dropped))

    def twist_defect(self) -> float:
        """Largest entry that the twist says must vanish."""
        mask = twist_mask(self.coeffs.shape[0], self.trunc_degree)
        bad = np.abs(self.coeffs[~mask])
        return float(bad.max()) if bad.size else 0.0

    def is_twisted(self, tol: float = 1e-12) -> bool:
        return self.twist_defect() <= tol

    def det_residual(self, sampling: CircleSampling | None = None) -> float:
        s = sampling or CircleSampling.for_degree(self.trunc_degree)
        vals = eval_coeffs(self.coeffs, s.points)
        return float(np.max(np.abs(mat2_det(vals) - 1)))

    def __call__(self, lam) -> np.ndarray:
        return loop_eval(self, lam)

    # arithmetic -------------------------------------------------------
    def __matmul__(self, other: "LoopMatrix") -> "LoopMatrix":
        return loop_mul(self, other)

    def __add__(self, other: "LoopMatrix") -> "LoopMatrix":
        _check_same_N(self, other)
        return LoopMatrix(self.coeffs + other.coeffs)

    def __sub__(self, other: "LoopMatrix") -> "LoopMatrix":
        _check_same_N(self, other)
        return LoopMatrix(self.coeffs - other.coeffs)

    def __neg__(self) -> "LoopMatrix":
        return LoopMatrix(-self.coeffs)

    def __mul__(self, scalar) -> "LoopMatrix":
        return LoopMatrix(self.coeffs * scalar)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        nz = [k for k in range(-self.trunc_degree, self.trunc_degree + 1)
              if np.any(self.coeff(k) != 0)]
        return f"LoopMatrix(N={self.trunc_degree}, nonzero_degrees={nz})"


def _check_same_N(A: LoopMatrix, B: LoopMatrix):
    if A.trunc_degree != B.trunc_degree:
        raise LoopError(
            f"mismatched truncation degrees {A.trunc_degree} and {B.trunc_degree}")


def identity_loop(N: int = DEFAULT_N) -> LoopMatrix:
    return LoopMatrix.constant(np.eye(2), N)


def zero_loop(N: int = DEFAULT_N) -> LoopMatrix:
    return LoopMatrix(np.zeros((2 * N + 1, 2, 2)))


def loop_mul(A: LoopMatrix, B: LoopMatrix) -> LoopMatrix:
    """Cauchy product truncated back to the common degree."""
    _check_same_N(A, B)
    full = conv_coeffs(A.coeffs, B.coeffs)
    c, dropped = recentre(full, A.trunc_degree)
    return LoopMatrix(c, A.dropped_mass + B.dropped_mass + float(dropped))


def loop_inverse(A: LoopMatrix, tol_det: float = TOL_DET) -> LoopMatrix:
    """Inverse of a unit-determinant loop via the adjugate."""
    res = A.det_residual()
    if res > tol_det:
        raise LoopError(f"det residual {res:.3e} exceeds {tol_det:.1e}")
    return LoopMatrix(mat2_adj(A.coeffs), A.dropped_mass)


def loop_eval(A: LoopMatrix, lam) -> np.ndarray:
    """Sum of coeffs[k] lam**k; returns (2, 2) for scalar lam."""
    lam_arr = np.asarray(lam, dtype=complex)
    vals = eval_coeffs(A.coeffs, lam_arr.reshape(-1))
    return vals.reshape(lam_arr.shape + (2, 2))


def lambda_scaled_derivative(A: LoopMatrix) -> LoopMatrix:
    """lambda * dA/dlambda, i.e. k * coeffs[k]."""
    N = A.trunc_degree
    k = np.arange(-N, N + 1)[:, None, None]
    return LoopMatrix(k * A.coeffs, A.dropped_mass)


def reality_residual_samples(vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distance of sampled matrices (..., M, 2, 2) from the real form.

    An element of the real form reads [[a, b], [eps conj(b), eps conj(a)]]
    with eps (|a|^2 - |b|^2) = 1.  Both signs are tried; returns the smaller
    max-residual per leading index and the corresponding sign.
    """
    a, b = vals[..., 0, 0], vals[..., 0, 1]
    c, d = vals[..., 1, 0], vals[..., 1, 1]
    n2 = np.abs(a) ** 2 - np.abs(b) ** 2
    out = []
    for eps in (1.0, -1.0):
        r = np.maximum.reduce([np.abs(c - eps * np.conj(b)),
                               np.abs(d - eps * np.conj(a)),
                               np.abs(eps * n2 - 1)])
        out.append(np.max(r, axis=-1))
    plus, minus = out
    eps = np.where(plus <= minus, 1.0, -1.0)
    return np.minimum(plus, minus), eps


def reality_residual(A: LoopMatrix, sampling: CircleSampling | None = None) -> tuple[float, int]:
    """(residual, eps) for membership of A in the real loop group."""
    s = sampling or CircleSampling.for_degree(A.trunc_degree)
    res, eps = reality_residual_samples(eval_coeffs(A.coeffs, s.points))
    return float(res), int(eps)


def make_omega(m: int, N: int = DEFAULT_N) -> LoopMatrix:
    """Unipotent loop omega_m."""
    if m < 1:
        raise LoopError("m must be a positive integer")
    if m % 2:
        return LoopMatrix.from_terms({0: np.eye(2), -m: [[0, 0], [1, 0]]}, N)
    return LoopMatrix.from_terms({0: np.eye(2), 1 - m: [[0, 1], [0, 0]]}, N)


# ---------------------------------------------------------------------------
# L3 <-> matrix


def l3_to_matrix(v) -> np.ndarray:
    """v1 e1 + v2 e2 + v3 e3; works on (..., 3) arrays."""
    v = np.asarray(v)
    return (v[..., 0, None, None] * E1 + v[..., 1, None, None] * E2
            + v[..., 2, None, None] * E3)


def matrix_to_l3(X: np.ndarray) -> np.ndarray:
    """Components of a trace-free matrix in the basis e1, e2, e3.

    Returns complex values; the caller decides what to do with any
    imaginary part.
    """
    X = np.asarray(X)
    v1 = 0.5 * (X[..., 0, 1] + X[..., 1, 0])
    v2 = 0.5j * (X[..., 1, 0] - X[..., 0, 1])
    v3 = -0.5j * (X[..., 0, 0] - X[..., 1, 1])
    return np.stack([v1, v2, v3], axis=-1)
