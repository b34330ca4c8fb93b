import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import E12, I2, random_plus, random_unitary, to_loop
from lorentz_cmc.iwasawa import (CellTag, NotInBigCell, PlusFactor, cell_classify, h_probe,
                                 iwasawa_factor, switch_factor)
from lorentz_cmc.loop_algebra import LoopMatrix, make_omega, reality_residual


def test_unitary_loop_factors_trivially():
    rng = np.random.default_rng(10)
    for minus in (False, True):
        U = to_loop(random_unitary(rng, minus=minus))
        F, B, tag = iwasawa_factor(U)
        np.testing.assert_allclose(F.coeffs, U.coeffs, atol=1e-10)
        np.testing.assert_allclose(B.B.coeffs, np.eye(2)[None] * (np.arange(-24, 25) == 0)[:, None, None],
                                   atol=1e-10)
        assert tag == (CellTag.BIG_CELL_MINUS if minus else CellTag.BIG_CELL_PLUS)


def test_plus_loop_factors_as_identity_times_itself():
    rng = np.random.default_rng(11)
    B0 = to_loop(random_plus(rng))
    F, B, tag = iwasawa_factor(B0)
    np.testing.assert_allclose(F.coeffs, LoopMatrix.constant(I2).coeffs, atol=1e-10)
    np.testing.assert_allclose(B.B.coeffs, B0.coeffs, atol=1e-10)
    assert tag == CellTag.BIG_CELL_PLUS


def test_gauge_by_constant_diagonal():
    rng = np.random.default_rng(12)
    phi = to_loop(random_unitary(rng)) @ to_loop(random_plus(rng))
    k = LoopMatrix.constant(np.diag([np.exp(0.4j), np.exp(-0.4j)]))
    kinv = LoopMatrix.constant(np.diag([np.exp(-0.4j), np.exp(0.4j)]))
    F, B, _ = iwasawa_factor(phi)
    F2, B2, _ = iwasawa_factor(phi @ k)
    np.testing.assert_allclose(F2.coeffs, (F @ k).coeffs, atol=1e-9)
    np.testing.assert_allclose(B2.B.coeffs, (kinv @ B.B @ k).coeffs, atol=1e-9)


@pytest.mark.parametrize("m,tag", [(1, CellTag.P1), (2, CellTag.P2), (3, CellTag.HIGHER)])
def test_small_cell_representatives(m, tag):
    w = make_omega(m)
    with pytest.raises(NotInBigCell) as ei:
        iwasawa_factor(w)
    assert ei.value.tag == tag
    assert cell_classify(w) == tag


def test_non_unimodular_loop_is_rejected():
    with pytest.raises(ValueError):
        iwasawa_factor(LoopMatrix.constant(2 * I2))


def test_plus_factor_validation():
    with pytest.raises(ValueError):
        PlusFactor.from_loop(make_omega(1))
    with pytest.raises(ValueError):
        PlusFactor.from_loop(LoopMatrix.constant(np.diag([-1.0, -1.0])))
    B = PlusFactor.from_loop(to_loop({0: np.diag([2.0, 0.5]), 1: 3 * E12}))
    assert B.rho == 2.0 and B.mu == 3.0 and B.nu == 0.0


def test_h_probe_values():
    assert h_probe(PlusFactor.identity()) == 0.0
    B = PlusFactor.from_loop(to_loop({0: np.diag([2.0, 0.5])}))
    assert h_probe(B) == pytest.approx(15.0)
    B = PlusFactor.from_loop(to_loop({0: I2, 1: -0.5 * E12}))
    assert h_probe(B) == pytest.approx(-0.75)


def check_switch(B: PlusFactor, case: str):
    sw = switch_factor(B)
    assert sw.case == case
    lhs = sw.X @ sw.Bprime
    rhs = B.B.resized(lhs.trunc_degree) @ make_omega(1, lhs.trunc_degree)
    np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-12)
    N = sw.Bprime.trunc_degree
    assert np.max(np.abs(sw.Bprime.coeffs[:N])) < 1e-12
    if case == "OmegaTheta":
        # X is a rotated omega_1 and lies outside the real form
        np.testing.assert_allclose(sw.X.coeff(-1), [[0, 0], [np.exp(1j * sw.theta), 0]])
        return sw, 0
    res, eps = reality_residual(sw.X)
    assert res < 1e-12
    return sw, eps


def test_switch_cases():
    sw, eps = check_switch(PlusFactor.from_loop(to_loop({0: np.diag([2.0, 0.5])})), "K1")
    assert eps == 1 and sw.eps == 1
    q = 4.0
    assert abs(sw.u) / abs(sw.v) == pytest.approx(q)
    sw, eps = check_switch(PlusFactor.from_loop(to_loop({0: I2, 1: -0.5 * E12})), "K2")
    assert eps == -1 and sw.eps == -1
    assert abs(sw.u) / abs(sw.v) == pytest.approx(0.5)
    sw, _ = check_switch(PlusFactor.identity(), "OmegaTheta")
    assert sw.theta == pytest.approx(0.0)
    # |q| = 1 with q = i gives e^{i theta} = 1/q = -i
    sw, _ = check_switch(PlusFactor.from_loop(to_loop({0: I2, 1: (1j - 1) * E12})), "OmegaTheta")
    assert np.exp(1j * sw.theta) == pytest.approx(-1j)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_generate_then_factor(seed):
    rng = np.random.default_rng(seed)
    F0 = to_loop(random_unitary(rng, minus=bool(seed % 3 == 0)))
    B0 = to_loop(random_plus(rng))
    F, B, tag = iwasawa_factor(F0 @ B0)
    np.testing.assert_allclose(F.coeffs, F0.coeffs, atol=1e-8)
    np.testing.assert_allclose(B.B.coeffs, B0.coeffs, atol=1e-8)
    assert tag.is_big_cell
