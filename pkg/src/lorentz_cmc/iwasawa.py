"""Iwasawa splitting Phi = F B, cell tags and the explicit switch factorization.

The splitting is computed as a Wiener-Hopf problem.  With J = diag(1, -1)
the loop M = Phi* J Phi equals B* (eps J) B, so it admits a Birkhoff
factorization M = L_- D L_+ with L_+ = B0^-1 B.  Writing P = L_+^-1 (a plus
loop with P(0) = I), the requirement that M P has no positive powers is a
finite block-Toeplitz system in the coefficients of P.  The twist splits it
into two scalar systems of size K.  Singularity of that system is exactly
the failure to lie in the big cell.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .loop_algebra import (DEFAULT_N, LoopMatrix, conv_coeffs, eval_coeffs,
                           make_omega, mat2_adj, mat2_mul, recentre,
                           reality_residual_samples, star_coeffs)

EPS_IWA = 1e-9
DELTA_CELL = 1e-7
COND_MAX = 1e12


class CellTag(enum.IntEnum):
    BIG_CELL_PLUS = 0
    BIG_CELL_MINUS = 1
    P1 = 2
    P2 = 3
    HIGHER = 4
    UNKNOWN = 5

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def is_big_cell(self) -> bool:
        return self in (CellTag.BIG_CELL_PLUS, CellTag.BIG_CELL_MINUS)

    @classmethod
    def from_label(cls, s: str) -> "CellTag":
        return {v: k for k, v in _LABELS.items()}[s]


_LABELS = {
    CellTag.BIG_CELL_PLUS: "BigCellPlus",
    CellTag.BIG_CELL_MINUS: "BigCellMinus",
    CellTag.P1: "P1",
    CellTag.P2: "P2",
    CellTag.HIGHER: "Higher",
    CellTag.UNKNOWN: "Unknown",
}


class IwasawaError(RuntimeError):
    pass


class NotInBigCell(IwasawaError):
    def __init__(self, tag: CellTag, condition: float):
        super().__init__(f"loop is not in the big cell (probe: {tag.label}, cond {condition:.3e})")
        self.tag = tag
        self.condition = condition


class FactorizationBreakdown(IwasawaError):
    def __init__(self, condition: float, residual: float):
        super().__init__(f"factorization residual {residual:.3e} with cond {condition:.3e}")
        self.condition = condition
        self.residual = residual


@dataclass(frozen=True, eq=False)
class PlusFactor:
    """Normalized plus loop B with B(0) = diag(rho, 1/rho)."""

    B: LoopMatrix
    rho: float
    mu: complex
    nu: complex

    @classmethod
    def from_loop(cls, B: LoopMatrix, tol: float = 1e-9) -> "PlusFactor":
        N = B.trunc_degree
        if np.max(np.abs(B.coeffs[:N])) > tol:
            raise ValueError("plus factor has negative powers of lambda")
        b0 = B.coeff(0)
        rho = b0[0, 0].real
        if not (rho > 0 and abs(b0[0, 0] - rho) <= tol and abs(b0[1, 1] - 1 / rho) <= tol
                and abs(b0[0, 1]) <= tol and abs(b0[1, 0]) <= tol):
            raise ValueError("plus factor is not normalized")
        b1 = B.coeff(1)
        return cls(B, float(rho), complex(b1[0, 1]), complex(b1[1, 0]))

    @classmethod
    def identity(cls, N: int = DEFAULT_N) -> "PlusFactor":
        return cls.from_loop(LoopMatrix.constant(np.eye(2), N))


class IwasawaFactors(NamedTuple):
    F: LoopMatrix
    B: PlusFactor
    tag: CellTag


@dataclass
class BatchFactors:
    """Vectorized factorization output; arrays share the leading shape."""

    F: np.ndarray        # (..., 2N+1, 2, 2)
    B: np.ndarray        # (..., 2N+1, 2, 2), only k >= 0 populated
    rho: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    eps: np.ndarray      # +-1, 0 where failed
    residual: np.ndarray
    reality: np.ndarray
    condition: np.ndarray
    ok: np.ndarray


def _twisted_system(Mc: np.ndarray, N2: int, K: int, col: int):
    """Toeplitz matrix and right-hand side for one column of P."""
    j = np.arange(1, K + 1)
    k = np.arange(1, K + 1)
    rows = np.where(j % 2 == 0, col, 1 - col)
    ents = np.where(k % 2 == 0, col, 1 - col)
    deg = (j[:, None] - k[None, :]) + N2
    valid = np.abs(j[:, None] - k[None, :]) <= N2
    T = Mc[..., np.clip(deg, 0, 2 * N2), rows[:, None], ents[None, :]]
    T = np.where(valid, T, 0)
    rhs_deg = j + N2
    rv = rhs_deg <= 2 * N2
    rhs = np.where(rv, Mc[..., np.clip(rhs_deg, 0, 2 * N2), rows, col], 0)
    return T, -rhs, ents


def factor_batch(phi: np.ndarray, *, K: int | None = None, eps_iwa: float = EPS_IWA,
                 M: int | None = None) -> BatchFactors:
    """Iwasawa-split every loop in ``phi`` (shape (..., 2N+1, 2, 2))."""
    lead = phi.shape[:-3]
    N = (phi.shape[-3] - 1) // 2
    ph = phi.reshape((-1,) + phi.shape[-3:])
    P_ = ph.shape[0]
    K = K or 2 * N
    M = M or 4 * N + 4

    Mc = conv_coeffs(star_coeffs(ph), ph * np.array([1, -1])[:, None])  # (P, 4N+1, 2, 2)
    N2 = 2 * N

    Pc = np.zeros((P_, K + 1, 2, 2), dtype=complex)
    Pc[:, 0] = np.eye(2)
    cond = np.ones(P_)
    for col in (0, 1):
        T, rhs, ents = _twisted_system(Mc, N2, K, col)
        sv = np.linalg.svd(T, compute_uv=False)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(sv[:, -1] > 0, sv[:, 0] / sv[:, -1], np.inf)
        c = np.where(np.isfinite(c), c, np.inf)
        cond = np.maximum(cond, c)
        good = c < COND_MAX
        x = np.zeros((P_, K), dtype=complex)
        if np.any(good):
            x[good] = np.linalg.solve(T[good], rhs[good][..., None])[..., 0]
        Pc[:, 1:, :, :][:, np.arange(K), ents, col] = x

    # D = sum_k M_{-k} P_k, should be diag(d1, d2) with d1 d2 = -1
    D = np.zeros((P_, 2, 2), dtype=complex)
    for kk in range(0, min(K, N2) + 1):
        D += mat2_mul(Mc[:, N2 - kk], Pc[:, kk])
    d1 = D[:, 0, 0].real
    with np.errstate(invalid="ignore", divide="ignore"):
        eps = np.sign(d1)
        rho = np.sqrt(np.abs(d1))
        rho_safe = np.where(rho > 0, rho, 1.0)

    # B^-1 = P diag(1/rho, rho),  F = Phi B^-1,  B = diag(rho, 1/rho) adj(P)
    scale_c = np.stack([1 / rho_safe, rho_safe], axis=-1)[:, None, None, :]
    Binv = Pc * scale_c
    Binv_c = np.zeros((P_, 2 * K + 1, 2, 2), dtype=complex)
    Binv_c[:, K:] = Binv
    F_full = conv_coeffs(ph, Binv_c)
    F, _ = recentre(F_full, N)
    scale_r = np.stack([rho_safe, 1 / rho_safe], axis=-1)[:, None, :, None]
    Bplus = mat2_adj(Pc) * scale_r
    Bc = np.zeros((P_, 2 * N + 1, 2, 2), dtype=complex)
    kk = min(K, N)
    Bc[:, N:N + kk + 1] = Bplus[:, :kk + 1]

    lam = np.exp(2j * np.pi * np.arange(M) / M)
    Fs = eval_coeffs(F, lam)
    Bs = eval_coeffs(Bc, lam)
    Ps = eval_coeffs(ph, lam)
    scale = np.maximum(1.0, np.max(np.abs(Fs), axis=(-3, -2, -1)) * np.max(np.abs(Bs), axis=(-3, -2, -1)))
    resid = np.max(np.abs(Ps - mat2_mul(Fs, Bs)), axis=(-3, -2, -1)) / scale
    real_res, real_eps = reality_residual_samples(Fs)
    real_res = real_res / np.maximum(1.0, np.max(np.abs(Fs), axis=(-3, -2, -1)) ** 2)

    finite = np.isfinite(resid) & np.isfinite(real_res) & (rho > 0)
    ok = finite & (cond < COND_MAX) & (resid < eps_iwa) & (real_res < eps_iwa) & (real_eps == eps)
    eps = np.where(ok, eps, 0.0)
    out = BatchFactors(
        F=F.reshape(lead + F.shape[1:]), B=Bc.reshape(lead + Bc.shape[1:]),
        rho=rho.reshape(lead), mu=Bc[:, N + 1, 0, 1].reshape(lead),
        nu=Bc[:, N + 1, 1, 0].reshape(lead), eps=eps.reshape(lead),
        residual=np.where(finite, resid, np.inf).reshape(lead),
        reality=np.where(finite, real_res, np.inf).reshape(lead),
        condition=cond.reshape(lead), ok=ok.reshape(lead))
    return out


def _factor_single(phi: LoopMatrix, eps_iwa: float):
    res = factor_batch(phi.coeffs[None], eps_iwa=eps_iwa)
    if not res.ok[0] and res.condition[0] < COND_MAX:
        # a longer Toeplitz section sometimes rescues a slowly decaying frame
        res2 = factor_batch(phi.coeffs[None], eps_iwa=eps_iwa, K=4 * phi.trunc_degree)
        if res2.ok[0] or res2.residual[0] < res.residual[0]:
            res = res2
    return res


def _probe_tag(phi: LoopMatrix, eps_iwa: float) -> CellTag:
    N = phi.trunc_degree
    for m, tag in ((1, CellTag.P1), (2, CellTag.P2)):
        w_inv = LoopMatrix(mat2_adj(make_omega(m, N).coeffs))
        if _factor_single(phi @ w_inv, eps_iwa).ok[0]:
            return tag
    for m in (3, 4):
        w_inv = LoopMatrix(mat2_adj(make_omega(m, N).coeffs))
        if _factor_single(phi @ w_inv, eps_iwa).ok[0]:
            return CellTag.HIGHER
    return CellTag.UNKNOWN


def iwasawa_factor(phi: LoopMatrix, eps_iwa: float = EPS_IWA) -> IwasawaFactors:
    """Split phi = F B with F in the real form and B normalized positive."""
    if phi.det_residual() > 1e-6:
        raise ValueError("loop is not unimodular")
    res = _factor_single(phi, eps_iwa)
    if not res.ok[0]:
        cond = float(res.condition[0])
        if cond >= COND_MAX or not np.isfinite(res.residual[0]):
            raise NotInBigCell(_probe_tag(phi, eps_iwa), cond)
        tag = _probe_tag(phi, eps_iwa)
        if tag != CellTag.UNKNOWN:
            raise NotInBigCell(tag, cond)
        raise FactorizationBreakdown(cond, float(res.residual[0]))
    F = LoopMatrix(res.F[0])
    B = PlusFactor.from_loop(LoopMatrix(res.B[0]), tol=1e-8)
    tag = CellTag.BIG_CELL_PLUS if res.eps[0] > 0 else CellTag.BIG_CELL_MINUS
    return IwasawaFactors(F, B, tag)


def cell_classify(phi: LoopMatrix, eps_iwa: float = EPS_IWA) -> CellTag:
    """Big cell sign, or the first omega_m probe that lands in the big cell."""
    res = _factor_single(phi, eps_iwa)
    if res.ok[0]:
        return CellTag.BIG_CELL_PLUS if res.eps[0] > 0 else CellTag.BIG_CELL_MINUS
    return _probe_tag(phi, eps_iwa)


def h_probe(B: PlusFactor) -> float:
    """|mu + rho|^2 rho^2 - 1; its sign is the eps of B omega_1."""
    return abs(B.mu + B.rho) ** 2 * B.rho ** 2 - 1


@dataclass(frozen=True, eq=False)
class SwitchResult:
    """B omega_1 = X B'."""

    case: str                 # "K1", "K2" or "OmegaTheta"
    X: LoopMatrix
    Bprime: LoopMatrix
    eps: int
    u: complex | None = None
    v: complex | None = None
    theta: float | None = None


def switch_factor(B: PlusFactor, delta_cell: float = DELTA_CELL) -> SwitchResult:
    """Explicit factorization of B omega_1."""
    N = B.B.trunc_degree
    Np = N + 2  # room for the lambda^-1 and lambda^+1 spill of X^-1 B omega_1
    Bl = B.B.resized(Np)
    w1 = make_omega(1, Np)
    Bw = Bl @ w1
    q = (B.mu + B.rho) * B.rho
    h = abs(q) ** 2 - 1
    if abs(h) <= delta_cell:
        theta = float(-np.angle(q))  # e^{i theta} = 1 / q on |q| = 1
        X = LoopMatrix.from_terms({0: np.eye(2), -1: [[0, 0], [np.exp(1j * theta), 0]]}, Np)
        Xinv = LoopMatrix(mat2_adj(X.coeffs))
        return SwitchResult("OmegaTheta", X, Xinv @ Bw, 0, theta=theta)
    eps = 1 if h > 0 else -1
    v = 1 / np.sqrt(eps * h)
    u = eps * q * v
    X = LoopMatrix.from_terms({0: [[u, 0], [0, eps * np.conj(u)]],
                               1: [[0, v], [0, 0]],
                               -1: [[0, 0], [eps * np.conj(v), 0]]}, Np)
    Xinv = LoopMatrix.from_terms({0: [[eps * np.conj(u), 0], [0, u]],
                                  1: [[0, -v], [0, 0]],
                                  -1: [[0, 0], [-eps * np.conj(v), 0]]}, Np)
    return SwitchResult("K1" if eps > 0 else "K2", X, Xinv @ Bw, eps, u=complex(u), v=complex(v))
