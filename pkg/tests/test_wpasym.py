import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypgraft.wpasym import (AliasingError, BlockMatrixSpec, CollarIntegralSpec,
                             VariationProfile, beltrami_pairing, block_asymptotics_check,
                             collar_norm_closed_form, collar_norm_integral, dual_transfer_check,
                             laurent_constant_coefficient, laurent_modes, normal_form_check,
                             perturbed_inverse_check, perturbed_inverse_residual, wp_leading_term,
                             wp_metric)

# collar integrals at |t| = e^-20, c* = e^-1, 30-digit quadrature
COLLAR = {0: 2542.31092160863128, 1: 1.02713265417960247, -1: 2.41771893881082297e17}
T20 = math.exp(-20.0)


@pytest.mark.parametrize("alpha", [0, 1, -1])
def test_collar_integral_values(alpha):
    out = collar_norm_integral(CollarIntegralSpec(T20, alpha=alpha))
    assert out.value == pytest.approx(COLLAR[alpha], rel=1e-11)


def test_collar_closed_form():
    out = collar_norm_integral(CollarIntegralSpec(T20 * 1j))
    assert out.closed_form == pytest.approx(out.value, rel=1e-12)
    assert collar_norm_closed_form(T20) == pytest.approx(COLLAR[0], rel=1e-14)
    assert collar_norm_integral(CollarIntegralSpec(T20, alpha=2)).closed_form is None


@pytest.mark.parametrize("alpha", [1, 2, 3])
def test_collar_integral_reflection(alpha):
    # the substitution v -> L - v maps alpha to -alpha up to |t|^(2 alpha)
    t = math.exp(-12.0)
    plus = collar_norm_integral(CollarIntegralSpec(t, alpha=alpha)).value
    minus = collar_norm_integral(CollarIntegralSpec(t, alpha=-alpha)).value
    assert plus == pytest.approx(t ** (2 * alpha) * minus, rel=1e-10)


def test_collar_growth_is_cubic():
    vals = [collar_norm_closed_form(math.exp(-L)) / L**3 for L in (100.0, 700.0)]
    assert vals[1] == pytest.approx(1 / math.pi, rel=2e-3)
    assert abs(vals[1] - 1 / math.pi) < abs(vals[0] - 1 / math.pi)


def test_collar_spec_validation():
    with pytest.raises(ValueError):
        CollarIntegralSpec(0.5)
    with pytest.raises(ValueError):
        CollarIntegralSpec(0.0)
    with pytest.raises(ValueError):
        CollarIntegralSpec(T20, alpha=0.5)
    with pytest.raises(ValueError):
        CollarIntegralSpec(T20, c_star=1.0)


@pytest.mark.parametrize("t", [0.1, 0.01j, 0.2 * np.exp(-2j), 1e-6 * np.exp(1j * math.pi / 3)])
def test_pairing_with_dz_over_z(t):
    assert beltrami_pairing(t) == pytest.approx(-math.pi / t, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-8, 0.9), st.floats(-math.pi, math.pi), st.floats(0.05, 0.45),
       st.floats(0.55, 0.95))
def test_pairing_times_t_is_constant(r, phase, lo, hi):
    t = r * complex(math.cos(phase), math.sin(phase))
    prof = VariationProfile(lo, hi)
    assert beltrami_pairing(t, prof) * t == pytest.approx(-math.pi, rel=1e-10)


def test_pairing_higher_modes_vanish():
    assert beltrami_pairing(0.01, alpha=1) == 0
    assert beltrami_pairing(0.01, alpha=-3) == 0
    # aliased back onto the constant mode by the angular rule
    assert beltrami_pairing(0.5, alpha=8, n_theta=8) != 0
    with pytest.raises(ValueError):
        beltrami_pairing(1.5)
    with pytest.raises(ValueError):
        VariationProfile(0.6, 0.4)


def _circle(n, offset=0.0):
    return np.exp(1j * (offset + 2 * np.pi * np.arange(n) / n))


def test_laurent_modes_of_monomials():
    z = 0.5 * _circle(64)
    modes = laurent_modes(3 + 2 * z**2 - 1j / z, radius=0.5)
    assert modes[0] == pytest.approx(3)
    assert modes[2] == pytest.approx(2)
    assert modes[-1] == pytest.approx(-1j)
    assert abs(modes[5]) < 1e-12
    assert laurent_constant_coefficient(3 + 2 * z**2) == pytest.approx(3)


def test_laurent_aliasing_guard():
    z = _circle(64)
    with pytest.raises(AliasingError):
        laurent_modes(z**30)
    modes = laurent_modes(z**30, check=False)
    assert modes[30] == pytest.approx(1)
    with pytest.raises(ValueError):
        laurent_modes(np.ones(48))
    with pytest.raises(ValueError):
        laurent_modes(np.ones(16))


cplx = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(cplx, min_size=4, max_size=4), st.lists(cplx, min_size=4, max_size=4), cplx)
def test_laurent_linear(c1, c2, a):
    z = _circle(64)

    def f(c):
        return c[0] + c[1] * z + c[2] / z**2 + c[3] * z**5

    m1, m2 = laurent_modes(f(c1)), laurent_modes(f(c2))
    m = laurent_modes(a * f(c1) + f(c2))
    scale = 1 + abs(a) * sum(map(abs, c1)) + sum(map(abs, c2))
    for k in (0, 1, -2, 5, 3):
        assert abs(m[k] - (a * m1[k] + m2[k])) <= 1e-12 * scale


@settings(max_examples=50, deadline=None)
@given(st.lists(cplx, min_size=3, max_size=3), st.floats(0, 2 * math.pi))
def test_constant_coefficient_rotation_invariant(c, offset):
    def f(z):
        return c[0] + c[1] * z**3 + c[2] / z

    a = laurent_constant_coefficient(f(_circle(64)))
    b = laurent_constant_coefficient(f(_circle(64, offset)))
    assert abs(a - b) <= 1e-12 * (1 + sum(map(abs, c)))


def test_block_trivial_case():
    spec = BlockMatrixSpec([1.0, 2.0], np.zeros((3, 2)), np.array([[2.0]]))
    out = block_asymptotics_check(spec, [10.0, 100.0, 1000.0])
    assert out["det"] is None and out["diag"] is None and out["b_block"] is None
    for r in out["rows"]:
        assert r["det_dev"] < 1e-14 and r["diag_dev"] < 1e-14 and r["b_dev"] == 0


def test_block_rates():
    rng = np.random.default_rng(3)
    n, m = 2, 2
    a = rng.uniform(-1, 1, (n + m, n))
    a[:n, :n] = (a[:n, :n] + a[:n, :n].T) / 2
    B = np.array([[3.0, 0.5], [0.5, 2.0]])
    spec = BlockMatrixSpec([1.0, 1.5], a, B)
    out = block_asymptotics_check(spec, [1e2, 1e3, 1e4, 1e5])
    for key in ("det", "diag", "b_block"):
        assert out[key].slope == pytest.approx(1.0, abs=0.1)
    assert max(r["offdiag_product"] for r in out["rows"]) < 10
    assert max(r["mixed_product"] for r in out["rows"]) < 10


def test_block_spec_validation():
    with pytest.raises(ValueError):
        BlockMatrixSpec([1.0], np.zeros((2, 1)), np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        BlockMatrixSpec([1.0], np.zeros((3, 1)), np.eye(1))
    with pytest.raises(ValueError):
        BlockMatrixSpec([-1.0], np.zeros((2, 1)), np.eye(1))
    with pytest.raises(ValueError):
        BlockMatrixSpec([1.0], np.zeros((2, 1)), np.zeros((1, 1)))


def test_block_matrix_layout():
    a = np.array([[9.0, 0.3], [0.3, 9.0], [0.1, 0.2]])
    M = BlockMatrixSpec([5.0, 6.0], a, np.array([[2.0]])).matrix()
    expected = np.array([[5.0, 0.3, 0.1], [0.3, 6.0, 0.2], [0.1, 0.2, 2.0]])
    assert np.array_equal(M, expected)


def test_perturbed_inverse_exact_cases():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert perturbed_inverse_residual(A, np.zeros((2, 2)), 0.1) == pytest.approx(0, abs=1e-15)
    eps = 0.01
    # (1 + e)^-1 - 1 + e = e^2 / (1 + e)
    r = perturbed_inverse_residual(np.eye(3), np.eye(3), eps)
    assert r == pytest.approx(eps**2 / (1 + eps), rel=1e-10)
    with pytest.raises(ValueError):
        perturbed_inverse_residual(np.ones((2, 2)), np.eye(2), 0.1)


def test_perturbed_inverse_rate():
    rng = np.random.default_rng(11)
    A = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    B = rng.normal(size=(4, 4))
    fit = perturbed_inverse_check(A, B, [1e-1, 1e-2, 1e-3, 1e-4])
    assert fit.slope == pytest.approx(2.0, abs=0.1)


def test_dual_transfer_rate():
    M0 = np.array([[2.0, 0.5 + 0.2j], [0.5 - 0.2j, 1.0]])
    M1 = np.array([[0.3, 0.1j], [-0.1j, 0.2]])
    out = dual_transfer_check(M0, M1, [1e-1, 1e-2, 1e-3])
    assert out["fit"].slope == pytest.approx(2.0, abs=0.1)
    assert out["coefficient_error"][-1] < out["coefficient_error"][0]


def test_wp_leading_term_approaches_model():
    devs = []
    for L in (10.0, 40.0, 160.0):
        t = math.exp(-L)
        g = wp_leading_term(t)
        devs.append(abs(g * t**2 * L**3 / math.pi**3 - 1))
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 0.05


def test_wp_metric_is_hermitian_positive():
    ts = [math.exp(-20.0) * 1j, math.exp(-30.0)]
    coupling = np.array([[0.0, 0.2], [0.2, 0.0], [0.1, 0.3]])
    g = wp_metric(ts, coupling)
    assert np.allclose(g, g.conj().T, rtol=1e-12, atol=0)
    assert np.all(np.linalg.eigvalsh(g) > 0)
    with pytest.raises(ValueError):
        wp_metric([0.0])
    with pytest.raises(ValueError):
        wp_metric([math.exp(-20.0)], np.array([[0.0], [1e6]]))


@pytest.mark.parametrize("L", [10.0, 100.0, 300.0])
def test_normal_form(L):
    out = normal_form_check(math.exp(-L))
    assert out["r"] == pytest.approx(L**-0.5)
    assert out["g_rr_dev"] < 1e-12
    assert out["g_thth_dev"] < 1e-12
    assert out["jacobian_dev"] < 1e-12
