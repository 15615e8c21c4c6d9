import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypgraft.eisenstein import (CuspSide, EisensteinEvaluator, GeodesicSegment, IntegrandKind,
                                 NeedsLargerCutoff, QuadratureError, Role, TruncationContext,
                                 ball_average, eigen_residual, emeld_residual, eval_E2,
                                 eval_E_star, eval_e_hat, eval_Phi4, geodesic_line_integral,
                                 decomposition_fields, length_correction_coefficient, meld_dagger,
                                 theta_average, translate_sum, truncate_sharp, tz_pairing)
from hypgraft.metrics import DomainError, PlumbingConfig
from hypgraft.moebius import FuchsianGroupSpec, MoebiusMap, apply

# level-two series over rows with c <= 6 at 0.3 + 0.7i, each row summed over all
# translates in 30-digit arithmetic
E_LEVEL2_C6 = 0.656631505569761615
PHI_LEVEL2_C6 = 1.04656225270117645 - 0.197002241562166928j
# int b^2 dx dy over [-1/2, 1/2] x [1, 2], b = (1 - 4x^2)^2 (y - 1)^2 (2 - y)^2
BUMP_NORM = 6.44998740236835475e-4


@pytest.fixture(scope="module")
def cyl():
    return EisensteinEvaluator.build(FuchsianGroupSpec.parabolic_cylinder())


@pytest.fixture(scope="module")
def lvl2():
    return EisensteinEvaluator.build(FuchsianGroupSpec.gamma_two(), cutoff=200)


def test_translate_sum_against_direct_sum():
    x, y = 0.37, 0.6
    k = np.arange(-200000, 200001)
    direct = np.sum(1.0 / ((x + k) ** 2 + y**2) ** 2)
    assert translate_sum(x, y) == pytest.approx(direct, rel=1e-12)
    # far up the cusp the sum is pi / (2 y^3)
    assert translate_sum(0.2, 8.0) == pytest.approx(math.pi / (2 * 8.0**3), rel=1e-15)


def test_level_two_values_against_direct_sum():
    G = FuchsianGroupSpec.gamma_two()
    ev = EisensteinEvaluator.build(G, cutoff=6, check=False)
    z = 0.3 + 0.7j
    assert eval_E2(ev, z) == pytest.approx(E_LEVEL2_C6, rel=1e-13)
    assert eval_Phi4(ev, z) == pytest.approx(PHI_LEVEL2_C6, rel=1e-12)


def test_parabolic_cylinder_series(cyl):
    z = np.array([0.1 + 0.5j, -2.0 + 3.0j])
    assert np.allclose(eval_E2(cyl, z), z.imag**2, rtol=0, atol=0)
    assert cyl.cusp_height == 0.0
    assert cyl.tail_constant == 0.0
    assert np.all(eval_e_hat(cyl, z) == 0)
    assert np.all(eval_E_star(cyl, z) == 0)
    assert np.allclose(eval_Phi4(cyl, z), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(0.05, 30))
def test_series_dominates_leading_term(x, y):
    ev = EisensteinEvaluator.build(FuchsianGroupSpec.gamma_two(), cutoff=40, check=False)
    assert eval_E2(ev, complex(x, y)) >= y * y


def test_invariance_under_group(lvl2):
    z = 0.21 + 0.65j
    g = MoebiusMap(1.0, 0.0, 2.0, 1.0)
    bound = lvl2.tail_bound(z) + lvl2.tail_bound(apply(g, z))
    assert abs(eval_E2(lvl2, apply(g, z)) - eval_E2(lvl2, z)) <= bound
    assert eval_E2(lvl2, z + 1) == pytest.approx(eval_E2(lvl2, z), rel=1e-13)


def test_tail_bound_holds_against_larger_cutoff():
    G = FuchsianGroupSpec.gamma_two()
    ev = EisensteinEvaluator.build(G, cutoff=50)
    fine = EisensteinEvaluator.build(G, cutoff=400, check=False)
    z = np.array([0.45 + 0.8j, 1j, 0.2 + 1.5j, 0.05 + 0.3j])
    assert np.all(np.abs(eval_E2(fine, z) - eval_E2(ev, z)) <= ev.tail_bound(z))


def test_needs_larger_cutoff():
    ev = EisensteinEvaluator.build(FuchsianGroupSpec.gamma_two(), cutoff=10, tol=1e-8)
    with pytest.raises(NeedsLargerCutoff):
        eval_E2(ev, 0.3 + 0.7j)
    with pytest.raises(ValueError):
        eval_E2(ev, 0.3 - 0.7j)


def test_eigenfunction(lvl2):
    z = np.array([0.45 + 0.8j, 1j, 1 / 3 + 1j, 0.2 + 1.5j, -0.3 + 2.5j])
    res = eigen_residual(lvl2, z)
    assert np.all(res <= 1e-5 * np.asarray(eval_E2(lvl2, z)))


def test_ball_mean_value(lvl2):
    z0, R = 0.3 + 1.2j, 0.4
    expected = eval_E2(lvl2, z0) * (math.cosh(R) + 1) / 2
    assert ball_average(lvl2, z0, R) == pytest.approx(expected, rel=1e-8)


def test_horocycle_average(lvl2):
    c, _ = lvl2.rows.arrays()
    y = 1.0
    expected = y * y + math.pi / (2 * y) * float(np.sum(1.0 / c.astype(float) ** 4))
    assert theta_average(lvl2, y) == pytest.approx(expected, rel=1e-12)


def test_E_star_decays(lvl2):
    ys = np.array([2.0, 4.0, 8.0])
    vals = np.asarray(eval_E_star(lvl2, 0.25 + 1j * ys))
    assert np.allclose(vals * ys, vals[0] * ys[0], rtol=1e-6)


def test_other_cusp_chart(lvl2):
    G = lvl2.group
    ev0 = lvl2.in_chart(G.cusp("0"))
    assert not ev0.is_defining_chart
    zeta = 0.2 + 3.0j
    # the leading term belongs to the defining cusp; here the series is small
    assert eval_E2(ev0, zeta) < 1.0
    assert eval_e_hat(ev0, zeta) == pytest.approx(eval_E2(ev0, zeta))
    assert eval_E_star(ev0, zeta) == pytest.approx(eval_E2(ev0, zeta))
    assert lvl2.in_chart(lvl2.defining_cusp).is_defining_chart


def _cfg(L=-40.0, lc=-7.0):
    return PlumbingConfig.from_log(L, 0.3, lc)


def test_truncation_on_cylinder(cyl):
    cfg = _cfg(-20.0, -1.0)
    ctx = TruncationContext(cfg)
    y = np.array([0.5, 1.0 / (2 * math.pi), 1.5 / (2 * math.pi)])
    expected = cfg.cutoff.chi(-2 * math.pi * y - cfg.log_c_star) * y**2
    assert np.allclose(truncate_sharp(cyl, ctx, 0.1 + 1j * y), expected, rtol=1e-14)


def test_truncation_role_mismatch(lvl2):
    ctx = TruncationContext(_cfg(), Role.REMAINING)
    with pytest.raises(ValueError):
        truncate_sharp(lvl2, ctx, 2j)
    with pytest.raises(TypeError):
        TruncationContext("not a config")


def test_meld_closed_form_on_cylinder(cyl):
    cfg = _cfg(-20.0, -1.0)
    side = CuspSide(cyl)
    u = np.linspace(-18.9, -0.1, 41)
    z = np.exp(u + 0.4j)
    y = -u / (2 * math.pi)
    expected = cfg.cutoff.chi(u - cfg.log_c_star) * y**2
    assert np.allclose(meld_dagger(side, None, cfg, z), expected, rtol=1e-13, atol=1e-300)
    # the core of the collar carries nothing
    assert meld_dagger(side, None, cfg, math.exp(-10.0)) == 0.0


def test_meld_continuous_across_overlap(lvl2):
    cfg = _cfg()
    side = CuspSide(lvl2)
    r = cfg.c_star
    inside = meld_dagger(side, side, cfg, r * (1 - 1e-10) * np.exp(0.3j))
    outside = meld_dagger(side, side, cfg, r * (1 + 1e-10) * np.exp(0.3j))
    assert inside == pytest.approx(outside, rel=1e-8)
    with pytest.raises(DomainError):
        meld_dagger(side, None, cfg, 1.5)


def test_decomposition_fields_on_cylinder(cyl):
    cfg = _cfg(-20.0, -1.0)
    ctx = TruncationContext(cfg)
    y = np.linspace(0.2, 2.9, 50)
    f = decomposition_fields(cyl, ctx, y)
    assert np.all(f["C"] == 0)
    th = -2 * math.pi**2 * y / cfg.log_abs_t
    expected_A = ((np.sin(th) / th) ** 2 - 1) * 2 * f["esharp"]
    assert np.allclose(f["A"], expected_A, rtol=1e-14)


def test_emeld_on_cylinder_has_no_C_field(cyl):
    cfgs = [PlumbingConfig.from_log(L) for L in (-20.0, -40.0, -80.0, -160.0)]
    fa, fb, fc, rows = emeld_residual(cyl, cfgs, n_band=129, n_bulk=257, xs=(0.0,),
                                      details=True)
    assert fc is None
    assert fa.slope == pytest.approx(2.0, abs=0.2)
    assert len(rows) == 4


def test_vertical_geodesic_integral(cyl):
    seg = GeodesicSegment.vertical_line(0.3, 1.0, 3.0)
    # int y^2 ds with y = e^s
    assert geodesic_line_integral(cyl, seg) == pytest.approx(4.0, rel=1e-12)
    assert seg.length == pytest.approx(math.log(3.0))
    coef = length_correction_coefficient(cyl, None, seg)
    assert coef == pytest.approx(4.0 / 6, rel=1e-12)
    assert length_correction_coefficient(cyl, cyl, seg) == pytest.approx(8.0 / 6, rel=1e-12)
    with pytest.raises(ValueError):
        length_correction_coefficient(cyl, None, seg, collar_height=2.0)


def test_vertical_geodesic_holomorphic_integrand(cyl):
    seg = GeodesicSegment.vertical_line(0.0, 1.0, 2.0)
    # Phi = 1, d zeta = i e^s ds: integrand (i e^s)^2 e^s / e^s = -e^{2s}
    val = geodesic_line_integral(cyl, seg, IntegrandKind.PHI_OVER_DS)
    assert val == pytest.approx(-1.5, abs=1e-12)


def test_closed_geodesic_period_doubling():
    ev = EisensteinEvaluator.build(FuchsianGroupSpec.gamma_two(), cutoff=50)
    m = MoebiusMap(1.0, 2.0, 2.0, 5.0)
    one = geodesic_line_integral(ev, GeodesicSegment.from_hyperbolic(m, 1), tol=1e-9)
    two = geodesic_line_integral(ev, GeodesicSegment.from_hyperbolic(m, 2), tol=1e-9)
    # the truncated series is invariant under m only up to its tail bound
    seg = GeodesicSegment.from_hyperbolic(m, 2)
    s = np.linspace(seg.s0, seg.s1, 513)
    slack = seg.length * float(np.max(ev.tail_bound(seg.point(s))))
    assert abs(two - 2 * one) <= slack
    seg = GeodesicSegment.from_hyperbolic(m)
    assert seg.length == pytest.approx(2 * math.acosh(3.0))
    # the segment has unit speed in the hyperbolic metric
    s = np.linspace(seg.s0, seg.s1, 9)
    assert np.allclose(np.abs(seg.velocity(s)) / seg.point(s).imag, 1.0)


def test_line_integral_reports_failure(cyl):
    seg = GeodesicSegment.vertical_line(0.0, 1.0, 2.0)
    with pytest.raises(QuadratureError):
        geodesic_line_integral(lambda z: np.sign(z.imag - 1.3), seg, tol=1e-15, max_points=64)


def test_segment_validation():
    with pytest.raises(ValueError):
        GeodesicSegment(0.0, 0.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        GeodesicSegment(0.0, 1.0, 1.0, 1.0)


def _bump(z):
    x, y = z.real, z.imag
    return (1 - 4 * x**2) ** 2 * (y - 1) ** 2 * (2 - y) ** 2 + 0j


def test_tz_pairing_bump(cyl):
    val = tz_pairing(cyl, _bump, _bump, (-0.5, 0.5, 1.0, 2.0))
    assert val.real == pytest.approx(BUMP_NORM, rel=1e-12)
    assert abs(val.imag) < 1e-18


def test_tz_pairing_domain():
    with pytest.raises(ValueError):
        tz_pairing(None, _bump, _bump, (0.0, 1.0, -1.0, 1.0))


coef = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


@settings(max_examples=30, deadline=None)
@given(coef, coef, coef, coef)
def test_tz_pairing_conjugate_symmetric(a, b, c, d):
    def mu(z):
        return a + b * z

    def nu(z):
        return c * z**2 + d * np.conj(z)

    dom = (-0.5, 0.5, 1.0, 2.0)
    weight = lambda z: z.imag**2 + 0.3  # noqa: E731
    lhs = tz_pairing(weight, mu, nu, dom)
    rhs = np.conj(tz_pairing(weight, nu, mu, dom))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
