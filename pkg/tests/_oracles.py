"""Independent reference computations and random generators for the tests.

Nothing here imports the package's numerical kernels; loops are plain
dicts {degree: 2x2 array} multiplied by explicit double loops.
"""
from __future__ import annotations

import numpy as np

from lorentz_cmc.loop_algebra import LoopMatrix

E12 = np.array([[0, 1], [0, 0]], dtype=complex)
E21 = np.array([[0, 0], [1, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def laurent_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for i, x in a.items():
        for j, y in b.items():
            out[i + j] = out.get(i + j, 0) + np.asarray(x) @ np.asarray(y)
    return out


def laurent_eval(a: dict, lam: complex) -> np.ndarray:
    return sum(np.asarray(m) * lam ** k for k, m in a.items())


def to_loop(a: dict, N: int = 24) -> LoopMatrix:
    return LoopMatrix.from_terms(a, N)


def as_dict(A: LoopMatrix, tol: float = 0.0) -> dict:
    N = A.trunc_degree
    return {k - N: A.coeffs[k] for k in range(2 * N + 1) if np.max(np.abs(A.coeffs[k])) > tol}


# ---------------------------------------------------------------------------
# random elements of the groups


def hyperbolic_factor(rng, k: int) -> dict:
    """[[cosh t, e^{ip} sinh t lam^k], [e^{-ip} sinh t lam^-k, cosh t]], k odd; in U_1."""
    t = rng.uniform(-0.8, 0.8)
    p = rng.uniform(0, 2 * np.pi)
    return {0: np.diag([np.cosh(t), np.cosh(t)]).astype(complex),
            k: np.sinh(t) * np.exp(1j * p) * E12,
            -k: np.sinh(t) * np.exp(-1j * p) * E21}


def phase_factor(rng) -> dict:
    p = rng.uniform(0, 2 * np.pi)
    return {0: np.diag([np.exp(1j * p), np.exp(-1j * p)])}


MINUS_SWAP = {1: 1j * E12, -1: 1j * E21}   # lies in the eps = -1 component


def random_unitary(rng, n_factors: int = 3, minus: bool = False) -> dict:
    """Random element of the real form, eps = +1 unless ``minus``."""
    out = phase_factor(rng)
    for _ in range(n_factors):
        out = laurent_mul(out, hyperbolic_factor(rng, int(rng.choice([1, 3]))))
    out = laurent_mul(out, phase_factor(rng))
    if minus:
        out = laurent_mul(out, MINUS_SWAP)
    return out


def unipotent_plus(rng, scale: float = 0.6) -> dict:
    """Plus loop equal to I at lambda = 0, degree <= 5."""
    c = (rng.normal(size=3) + 1j * rng.normal(size=3)) * scale
    d = (rng.normal() + 1j * rng.normal()) * scale
    out = laurent_mul({0: I2, 1: c[0] * E12}, {0: I2, 1: d * E21})
    return laurent_mul(out, {0: I2, 3: c[1] * E12})


def random_plus(rng, rho: float | None = None, mu: complex | None = None) -> dict:
    """Normalized twisted plus loop of degree <= 6.

    Optionally pins rho and the lambda^1 (1,2) coefficient mu.
    """
    rho = rng.uniform(0.5, 2.0) if rho is None else rho
    U = unipotent_plus(rng)
    m0 = U.get(1, np.zeros((2, 2)))[0, 1]
    c = (rng.normal() + 1j * rng.normal()) * 0.5 if mu is None else mu / rho - m0
    B = laurent_mul({0: I2, 1: c * E12}, U)
    return laurent_mul({0: np.diag([rho, 1 / rho]).astype(complex)}, B)


def sym_reference(F: dict, lam0: complex, H: float) -> np.ndarray:
    """-(1/2H) (F e3 F^-1 + 2 i lam dF/dlam F^-1) in L3 components."""
    e3 = np.array([[1j, 0], [0, -1j]])
    Fv = laurent_eval(F, lam0)
    dF = sum(k * np.asarray(m) * lam0 ** k for k, m in F.items())
    X = -(Fv @ e3 @ np.linalg.inv(Fv) + 2j * dF @ np.linalg.inv(Fv)) / (2 * H)
    return l3_components(X)


def l3_components(X: np.ndarray) -> np.ndarray:
    """Components in e1, e2, e3 of [[i v3, v1 + i v2], [v1 - i v2, -i v3]]."""
    v1 = (X[0, 1] + X[1, 0]) / 2
    v2 = (X[0, 1] - X[1, 0]) / 2j
    v3 = X[0, 0] / 1j
    return np.array([v1, v2, v3])


def helix_data():
    from lorentz_cmc.bjorling import BjorlingData
    return BjorlingData([1.0], [1.0], [0.0, 1.0], 1.0)
