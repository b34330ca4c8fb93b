"""Surface assembly: Sym-Bobenko positions, metric, Hopf differential, normals.

Conventions: an L3 vector is a real array (..., 3) of components in the
basis e1, e2, e3 with Lorentz metric diag(1, 1, -1).  The pipeline works on
the singular frame Phi_omega.  Where Phi_omega lies in the big cell the
position comes from its unitary factor, and the metric and normal come from
closed forms in the plus factor, which stay regular across the singular
curve.  Where it does not, the standard frame Phi_omega * omega_1 is factored
instead.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .iwasawa import (DELTA_CELL, EPS_IWA, CellTag, PlusFactor, cell_classify,
                      factor_batch)
from .loop_algebra import (DEFAULT_N, E3, LoopMatrix, conv_coeffs, eval_coeffs,
                           l3_to_matrix, lambda_scaled_derivative, make_omega,
                           mat2_inv, mat2_mul, matrix_to_l3, recentre)
from .potentials import GridSpec, SingularPotential, integrate_frame

log = logging.getLogger(__name__)

CHUNK = 512
LORENTZ = np.array([1.0, 1.0, -1.0])


# ---------------------------------------------------------------------------
# vector algebra


def minkowski_inner(u, v):
    u, v = np.asarray(u), np.asarray(v)
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] - u[..., 2] * v[..., 2]


def euclidean_cross(u, v) -> np.ndarray:
    return np.cross(u, v)


def lorentz_cross(u, v) -> np.ndarray:
    """w with <w, x>_L = det(u, v, x)."""
    return np.cross(u, v) * LORENTZ


def ad_e3(v) -> np.ndarray:
    """Conjugation by e3 in components: (v1, v2, v3) -> (-v1, -v2, v3)."""
    return np.asarray(v) * np.array([-1.0, -1.0, 1.0])


def rotation_e3(angle: float) -> np.ndarray:
    """Rotation about the e3 axis, an isometry of both metrics."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# ---------------------------------------------------------------------------
# pointwise formulas


def _sym_from_values(F, dF, H):
    Finv = mat2_inv(F)
    X = -(mat2_mul(mat2_mul(F, E3), Finv) + 2j * mat2_mul(dF, Finv)) / (2 * H)
    v = matrix_to_l3(X)
    return v.real, np.max(np.abs(v.imag), axis=-1)


def _check_unit(lam0):
    lam0 = complex(lam0)
    if abs(abs(lam0) - 1) > 1e-12:
        raise ValueError("lambda0 must lie on the unit circle")
    return lam0


def sym_bobenko(F: LoopMatrix, lambda0: complex = 1.0, H: float = 1.0) -> np.ndarray:
    """Sym-Bobenko position of a unitary frame at lambda0."""
    lam0 = _check_unit(lambda0)
    Fv = eval_coeffs(F.coeffs, np.array([lam0]))[0]
    dF = eval_coeffs(lambda_scaled_derivative(F).coeffs, np.array([lam0]))[0]
    v, imag = _sym_from_values(Fv, dF, H)
    if imag > 1e-8 * (1 + np.linalg.norm(v)):
        log.warning("Sym-Bobenko value has imaginary part %.3e; frame is not unitary", imag)
    return v


def metric_g(B: PlusFactor, a_val: complex, H: float, eps: int) -> float:
    """Signed conformal factor eps * chi^2 |a| / H."""
    chi2 = abs(abs(B.mu + B.rho) ** 2 - B.rho ** -2)
    return eps * chi2 * abs(a_val) / H


def hopf_Q(xi: SingularPotential, z: complex, lambda0: complex = 1.0):
    """Coefficient of dz^2 in the Hopf differential."""
    z = np.asarray(z, dtype=complex)
    lam0 = _check_unit(lambda0)
    b_t = np.conj(xi.b(np.conj(z)))
    Q = 2 * xi.a(z) / xi.H * (xi.b(z) - b_t - 2j * xi.r(z))
    return Q / lam0 ** 2


@dataclass(frozen=True)
class NormalProbe:
    Z1: float
    Z2: float
    Y: np.ndarray


def _normal_closed_form(Fv, mu, rho, eps_frame=1.0):
    """Euclidean normal from the frame value and plus-factor data (batched)."""
    q = (mu + rho) * rho
    h = np.abs(q) ** 2 - 1
    s = np.sqrt(h * h + 8 * h + 8)
    Z1, Z2 = 2 / s, h / s
    Y = np.empty(np.shape(q) + (2, 2), dtype=complex)
    Y[..., 0, 0] = 1j * (Z1 + Z2)
    Y[..., 0, 1] = -1j * q * Z1
    Y[..., 1, 0] = 1j * np.conj(q) * Z1
    Y[..., 1, 1] = -1j * (Z1 + Z2)
    W = matrix_to_l3(mat2_mul(mat2_mul(Fv, Y), mat2_inv(Fv))).real
    n = ad_e3(W)
    norm = np.linalg.norm(n, axis=-1)
    n = n / norm[..., None] * np.asarray(eps_frame)[..., None]
    return n, norm, Z1, Z2, Y, h, s


def euclidean_normal(F1, B: PlusFactor, eps_frame: int = 1):
    """Unit Euclidean normal from F_omega at lambda = 1 and its plus factor."""
    Fv = F1.coeffs.sum(axis=0) if isinstance(F1, LoopMatrix) else np.asarray(F1, dtype=complex)
    n, _, Z1, Z2, Y, _, _ = _normal_closed_form(Fv, B.mu, B.rho, eps_frame)
    return n, NormalProbe(float(Z1), float(Z2), matrix_to_l3(Y).real)


def psi_signed(fx, fy, eps) -> float:
    return eps * np.linalg.norm(np.cross(fx, fy), axis=-1)


# ---------------------------------------------------------------------------
# grid assembly


@dataclass(frozen=True)
class SurfaceSample:
    z: complex
    f: np.ndarray
    tag: CellTag
    g: float
    Q: complex
    n_E: np.ndarray
    psi: float
    valid: bool


@dataclass
class SurfaceGrid:
    """Per-sample arrays; (ny, nx) on a grid, any shape for scattered points."""

    grid: GridSpec | None
    H: float
    lambda0: complex
    z: np.ndarray
    f: np.ndarray
    tag: np.ndarray
    g: np.ndarray
    Q: np.ndarray
    n_E: np.ndarray
    psi: np.ndarray
    valid: np.ndarray
    h: np.ndarray
    residual: np.ndarray
    det_residual: np.ndarray
    route: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.z.shape

    def sample(self, i: int, j: int) -> SurfaceSample:
        return SurfaceSample(complex(self.z[i, j]), self.f[i, j], CellTag(int(self.tag[i, j])),
                             float(self.g[i, j]), complex(self.Q[i, j]), self.n_E[i, j],
                             float(self.psi[i, j]), bool(self.valid[i, j]))

    def cell_counts(self) -> dict[str, int]:
        return {t.label: int(np.sum(self.tag == t)) for t in CellTag}

    @property
    def big_cell(self) -> np.ndarray:
        return (self.tag == CellTag.BIG_CELL_PLUS) | (self.tag == CellTag.BIG_CELL_MINUS)


@dataclass
class _Chunk:
    phi: np.ndarray
    det_residual: np.ndarray
    route: np.ndarray
    F: np.ndarray
    rho: np.ndarray
    mu: np.ndarray
    eps: np.ndarray
    residual: np.ndarray


def _process_chunk(xi, pts, z0, phi0, N, M, h_step, steps, eps_iwa) -> _Chunk:
    fr = integrate_frame(xi, pts, phi0, N=N, M=M, h_step=h_step, steps=steps, basepoint=z0)
    phi = fr.coeffs
    bf = factor_batch(phi, eps_iwa=eps_iwa, M=M)
    route = np.where(bf.ok, 0, -1).astype(np.int8)
    F, rho, mu, eps, res = bf.F, bf.rho, bf.mu, bf.eps, bf.residual
    if np.any(~bf.ok):
        bad = np.flatnonzero(~bf.ok)
        w1 = make_omega(1, N).coeffs
        std, _ = recentre(conv_coeffs(phi[bad], w1[None]), N)
        bs = factor_batch(std, eps_iwa=eps_iwa, M=M)
        good = bad[bs.ok]
        route[good] = 1
        F[good], rho[good], mu[good] = bs.F[bs.ok], bs.rho[bs.ok], bs.mu[bs.ok]
        eps[good], res[good] = bs.eps[bs.ok], bs.residual[bs.ok]
    return _Chunk(phi, fr.det_residual, route, F, rho, mu, eps, res)


def band_scale(xi: SingularPotential, z: np.ndarray) -> np.ndarray:
    """|dh/dy| on the real axis below z, used to widen the P1 band."""
    x = np.asarray(z, dtype=complex).real.astype(complex)
    return np.abs(4 * (xi.b(x).imag - xi.r(x).real))


def sample_surfaces(xi: SingularPotential, z, lambda0s=(1.0,), *, grid: GridSpec | None = None,
                    basepoint: complex = 0j, N: int = DEFAULT_N, M: int | None = None,
                    h_step: float | None = None, steps: int | None = None,
                    eps_iwa: float = EPS_IWA, delta_cell: float = DELTA_CELL,
                    phi0: LoopMatrix | None = None, threads: int = 1,
                    rotation: float = 0.0, translation=(0.0, 0.0, 0.0)) -> list[SurfaceGrid]:
    """Surface data at arbitrary points z (any shape), one result per lambda0.

    Each point is reached from the basepoint by its own straight segment.
    ``steps`` fixes the RK4 step count for every point, which keeps the
    integration error a smooth function of z (useful for difference
    quotients); otherwise the count follows from ``h_step``.
    ``rotation`` (about e3) and ``translation`` are applied to positions
    and normals after the Sym-Bobenko step.
    """
    lams = [_check_unit(l) for l in lambda0s]
    M = M or 4 * N + 4
    z = np.asarray(z, dtype=complex)
    if h_step is None:
        h_step = min(grid.dx, grid.dy) / 4 if grid is not None else 1e-2
    flat = z.reshape(-1)
    P = flat.size
    chunks = [slice(i, min(i + CHUNK, P)) for i in range(0, P, CHUNK)]
    z0 = complex(basepoint)

    def work(sl):
        return _process_chunk(xi, flat[sl], z0, phi0, N, M, h_step, steps, eps_iwa)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, chunks))
    else:
        parts = [work(sl) for sl in chunks]

    def cat(name):
        return np.concatenate([getattr(p, name) for p in parts])

    route, F, rho, mu = cat("route"), cat("F"), cat("rho"), cat("mu")
    eps, res, detres = cat("eps"), cat("residual"), cat("det_residual")

    # route 0 locates the singular band through h, route 1 carries its own sign
    h = np.where(route == 0, np.abs(mu + rho) ** 2 * rho ** 2 - 1, np.nan)
    band = (route == 0) & (np.abs(h) <= delta_cell * np.maximum(1.0, band_scale(xi, flat)))
    tag = np.full(P, int(CellTag.UNKNOWN), dtype=np.int8)
    sgn = np.where(route == 0, eps * np.sign(np.nan_to_num(h)), eps)
    tag[(route >= 0) & (sgn > 0)] = CellTag.BIG_CELL_PLUS
    tag[(route >= 0) & (sgn < 0)] = CellTag.BIG_CELL_MINUS
    tag[band] = CellTag.P1
    failed = np.flatnonzero(route < 0)
    if failed.size:
        phis = np.concatenate([p.phi for p in parts])
        w1 = make_omega(1, N)
        for i in failed:
            tag[i] = cell_classify(LoopMatrix(phis[i]) @ w1, eps_iwa)
    valid = route >= 0

    absa = np.abs(xi.a(flat))
    R = rotation_e3(rotation)
    kvec = np.arange(-N, N + 1)[:, None, None]
    out = []
    for lam0 in lams:
        sq = np.sqrt(lam0)
        D0 = np.diag([sq, 1 / sq])
        Fv = eval_coeffs(F, np.array([lam0]))[:, 0]
        dF = eval_coeffs(F * kvec, np.array([lam0]))[:, 0]
        f, imag = _sym_from_values(Fv, dF, xi.H)
        f = f + np.array([0.0, 0.0, 1.0 / (2 * xi.H)])
        f = f @ R.T + np.asarray(translation, dtype=float)

        nE = np.full((P, 3), np.nan)
        g = np.full(P, np.nan)
        psi = np.full(P, np.nan)
        r0 = route == 0
        if np.any(r0):
            n, norm, _, _, _, hh, s = _normal_closed_form(mat2_mul(Fv[r0], D0), mu[r0], rho[r0], eps[r0])
            nE[r0] = n
            g[r0] = eps[r0] * hh * absa[r0] / (xi.H * rho[r0] ** 2)
            psi[r0] = eps[r0] * 4 * hh * absa[r0] ** 2 * s * norm / (xi.H ** 2 * rho[r0] ** 4)
        r1 = route == 1
        if np.any(r1):
            Fr = Fv[r1]
            W = ad_e3(matrix_to_l3(mat2_mul(mat2_mul(Fr, E3), mat2_inv(Fr))).real)
            norm = np.linalg.norm(W, axis=-1)
            nE[r1] = eps[r1][:, None] * W / norm[:, None]
            g[r1] = eps[r1] * rho[r1] ** 2 * absa[r1] / xi.H
            psi[r1] = eps[r1] * 4 * g[r1] ** 2 * norm
        nE = nE @ R.T
        Q = hopf_Q(xi, flat, lam0)
        f[~valid] = np.nan
        out.append(SurfaceGrid(
            grid=grid, H=xi.H, lambda0=lam0, z=z,
            f=f.reshape(z.shape + (3,)), tag=tag.reshape(z.shape),
            g=g.reshape(z.shape), Q=np.where(valid, Q, np.nan).reshape(z.shape),
            n_E=nE.reshape(z.shape + (3,)), psi=psi.reshape(z.shape),
            valid=valid.reshape(z.shape), h=h.reshape(z.shape), residual=res.reshape(z.shape),
            det_residual=detres.reshape(z.shape), route=route.reshape(z.shape),
            diagnostics={"sym_imag_max": float(np.max(imag[valid])) if np.any(valid) else 0.0,
                         "max_iwasawa_residual": float(np.max(res[valid])) if np.any(valid) else None,
                         "max_det_residual": float(np.max(detres))}))
    return out


def sample_surface(xi: SingularPotential, z, lambda0: complex = 1.0, **kw) -> SurfaceGrid:
    return sample_surfaces(xi, z, (lambda0,), **kw)[0]


def build_surfaces(xi: SingularPotential, grid: GridSpec, lambda0s=(1.0,), **kw) -> list[SurfaceGrid]:
    """Assemble the surface on a grid at each lambda0.

    Integration and factorization are shared between the lambda0 values.
    """
    return sample_surfaces(xi, grid.points(), lambda0s, grid=grid,
                           basepoint=grid.basepoint, **kw)


def build_surface(xi: SingularPotential, grid: GridSpec, lambda0: complex = 1.0, **kw) -> SurfaceGrid:
    return build_surfaces(xi, grid, (lambda0,), **kw)[0]


# ---------------------------------------------------------------------------
# independent mean-curvature check


class InsufficientWindow(ValueError):
    pass


@dataclass
class MeanCurvatureStats:
    max_error: float
    mean_error: float
    count: int
    H_est: np.ndarray       # |H| estimate, NaN on the border
    mask: np.ndarray        # samples that entered the statistics


def mean_curvature_oracle(sg: SurfaceGrid, y_min: float = 0.05) -> MeanCurvatureStats:
    """Mean curvature from finite-difference fundamental forms.

    Uses second-order central differences on interior samples whose 3x3
    neighbourhood is valid big cell and has |y| > y_min.
    """
    ok = sg.valid & sg.big_cell & (np.abs(sg.z.imag) > y_min)
    ny, nx = ok.shape
    interior = np.zeros_like(ok)
    core = np.ones((ny - 2, nx - 2), dtype=bool) if ny > 2 and nx > 2 else np.zeros((0, 0), bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            core = core & ok[1 + di:ny - 1 + di, 1 + dj:nx - 1 + dj]
    interior[1:-1, 1:-1] = core
    if not _has_window(ok, 5):
        raise InsufficientWindow("need a 5x5 window of regular big-cell samples")
    f = sg.f
    hx, hy = sg.grid.dx, sg.grid.dy
    fx = (f[1:-1, 2:] - f[1:-1, :-2]) / (2 * hx)
    fy = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2 * hy)
    fxx = (f[1:-1, 2:] - 2 * f[1:-1, 1:-1] + f[1:-1, :-2]) / hx ** 2
    fyy = (f[2:, 1:-1] - 2 * f[1:-1, 1:-1] + f[:-2, 1:-1]) / hy ** 2
    fxy = (f[2:, 2:] - f[2:, :-2] - f[:-2, 2:] + f[:-2, :-2]) / (4 * hx * hy)
    n = lorentz_cross(fx, fy)
    nn = np.sqrt(np.abs(minkowski_inner(n, n)))
    n = n / nn[..., None]
    E, Fm, G = minkowski_inner(fx, fx), minkowski_inner(fx, fy), minkowski_inner(fy, fy)
    L, Mm, Nn = minkowski_inner(fxx, n), minkowski_inner(fxy, n), minkowski_inner(fyy, n)
    Hest = (E * Nn - 2 * Fm * Mm + G * L) / (2 * (E * G - Fm ** 2))
    Hfull = np.full(ok.shape, np.nan)
    Hfull[1:-1, 1:-1] = np.abs(Hest)
    err = np.abs(Hfull[interior] - sg.H)
    return MeanCurvatureStats(float(err.max()), float(err.mean()), int(err.size), Hfull, interior)


def _has_window(mask: np.ndarray, w: int) -> bool:
    ny, nx = mask.shape
    if ny < w or nx < w:
        return False
    c = np.cumsum(np.cumsum(np.pad(mask.astype(int), ((1, 0), (1, 0))), 0), 1)
    s = c[w:, w:] - c[:-w, w:] - c[w:, :-w] + c[:-w, :-w]
    return bool(np.any(s == w * w))
