import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypgraft.metrics import (Chart, ConformalMetricField, CutoffProfile, DomainError,
                              PlumbingConfig, core_geodesic_length, fiber_curvature_check,
                              fiber_density, fiber_field, gaussian_curvature, graft_curvature_model,
                              graft_curvature_residual, graft_density, graft_field,
                              graft_log_density, lambda_profile, log_fiber_density,
                              log_theta_ratio, read_field, septic_smoothstep,
                              septic_smoothstep_prime, theta_series_ratio, theta_series_truncated,
                              write_field, zero_fiber_density, zero_fiber_field)

# (0.1 / sin 0.1)^2 and (0.5 csc 0.5)^2 - (1 + 0.5^2/3 + 0.5^4/15), 30-digit arithmetic
RATIO_AT_0_1 = 1.00334001059684466
SERIES_GAP_AT_0_5 = 1.71324835010705e-4


def test_fiber_density_at_core():
    t = math.exp(-10.0)
    z = math.exp(-5.0)  # Theta = pi / 2
    assert fiber_density(z, t) == pytest.approx((math.pi / (z * 10.0)) ** 2, rel=1e-13)


def test_fiber_density_depends_only_on_modulus():
    t = 1e-3 * np.exp(0.7j)
    r = 0.05
    vals = fiber_density(r * np.exp(1j * np.linspace(0, 6, 7)), t)
    assert np.ptp(vals) <= 1e-12 * vals[0]


def test_fiber_density_domain():
    with pytest.raises(DomainError):
        fiber_density(0.5, 0.6)
    with pytest.raises(DomainError):
        fiber_density(1.0, 0.1)
    with pytest.raises(DomainError):
        fiber_density(0.5, 0.0)
    with pytest.raises(DomainError):
        zero_fiber_density(0.0)


def test_zero_fiber_density_value():
    z = 0.25j
    assert zero_fiber_density(z) == pytest.approx(1 / (0.25 * math.log(0.25)) ** 2, rel=1e-14)


def test_theta_ratio_values():
    assert theta_series_ratio(0.1) == pytest.approx(RATIO_AT_0_1, rel=1e-14)
    gap = theta_series_ratio(0.5) - theta_series_truncated(0.5)
    assert gap == pytest.approx(SERIES_GAP_AT_0_5, rel=1e-9)
    with pytest.raises(DomainError):
        theta_series_ratio(0.0)
    with pytest.raises(DomainError):
        theta_series_ratio(math.pi)


def test_log_theta_ratio_continuous_at_switch():
    lo, hi = np.nextafter(0.1, 0), 0.1
    assert abs(log_theta_ratio(lo) - log_theta_ratio(hi)) < 1e-15
    assert log_theta_ratio(1e-8) == pytest.approx(1e-16 / 6, rel=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.floats(1e-6, math.pi - 1e-3))
def test_fiber_ratio_at_least_one(theta):
    assert theta_series_ratio(theta) >= 1.0


def test_smoothstep_endpoints():
    assert septic_smoothstep(0.0) == 0.0
    assert septic_smoothstep(1.0) == 1.0
    assert septic_smoothstep(0.5) == pytest.approx(0.5, abs=1e-15)
    assert septic_smoothstep_prime(0.0) == 0.0
    assert septic_smoothstep_prime(1.0) == 0.0


def test_cutoff_values():
    cut = CutoffProfile(-1.0)
    assert cut.eta(-1.0) == 1.0
    assert cut.eta(-3.0) == 1.0
    assert cut.eta(0.0) == 0.0
    assert cut.eta(2.0) == 0.0
    assert cut.eta(-0.5) == pytest.approx(0.5, abs=1e-15)
    assert cut.eta(-0.3) + cut.eta(-0.7) == pytest.approx(1.0, abs=1e-14)
    assert cut.chi(-0.3) == pytest.approx(1 - cut.eta(-0.3))
    with pytest.raises(ValueError):
        CutoffProfile(0.5)


@settings(max_examples=80, deadline=None)
@given(st.floats(-3, 1), st.floats(0, 2), st.floats(-4, -0.1))
def test_eta_monotone(a, da, a0):
    cut = CutoffProfile(a0)
    assert cut.eta(a + da) <= cut.eta(a) + 1e-15
    assert 0.0 <= cut.eta(a) <= 1.0


def test_cutoff_derivatives_match_differences():
    cut = CutoffProfile(-1.3)
    a = np.linspace(-1.25, -0.05, 13)
    h = 1e-5
    fd1 = (cut.eta(a + h) - cut.eta(a - h)) / (2 * h)
    fd2 = (cut.eta(a + h) - 2 * cut.eta(a) + cut.eta(a - h)) / h**2
    assert np.allclose(cut.eta_prime(a), fd1, atol=1e-8)
    assert np.allclose(cut.eta_second(a), fd2, atol=1e-4)


def test_lambda_profile_integrates_to_zero():
    from scipy.integrate import quad

    cut = CutoffProfile(-1.0)
    val, _ = quad(lambda a: lambda_profile(cut, a), -1.0, 0.0, epsabs=1e-13)
    assert abs(val) < 1e-12
    # outside the band it vanishes
    assert lambda_profile(cut, -1.5) == 0.0
    assert lambda_profile(cut, 0.5) == 0.0


def test_lambda_profile_is_derivative_of_flux():
    cut = CutoffProfile(-1.0)
    shift = -1.0
    a = np.linspace(-1.95, -1.05, 10)
    h = 1e-5

    def flux(x):
        return x**4 * cut.eta_prime(x - shift)

    fd = (flux(a + h) - flux(a - h)) / (2 * h)
    assert np.allclose(lambda_profile(cut, a, shift), fd, atol=1e-6)


def test_plumbing_config_validation():
    cfg = PlumbingConfig.from_log(-20.0, phase=0.4)
    assert cfg.epsilon == pytest.approx(-math.pi / 20)
    assert cfg.phase == pytest.approx(0.4)
    assert cfg.primary_band == (-2.0, -1.0)
    assert cfg.secondary_band == pytest.approx((-19.0, -18.0))
    with pytest.raises(ValueError):
        PlumbingConfig(0.0)
    with pytest.raises(ValueError):
        PlumbingConfig(math.exp(-3.0))  # needs |t| < c_star^4
    with pytest.raises(ValueError):
        PlumbingConfig(0.01, c_star=1.5)
    tiny = PlumbingConfig.from_log(-2000.0)
    assert tiny.log_abs_t == -2000.0


def test_core_geodesic_length():
    # 2 pi^2 / 100
    assert core_geodesic_length(math.exp(-100.0)) == pytest.approx(0.197392088021787172,
                                                                   rel=1e-14)
    assert core_geodesic_length(math.exp(-2 * math.pi**2)) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(DomainError):
        core_geodesic_length(0.0)


def test_core_length_from_line_integral():
    from scipy.integrate import quad

    L = -100.0
    r = math.exp(L / 2)
    val, _ = quad(lambda th: math.sqrt(fiber_density(r * np.exp(1j * th), math.exp(L))) * r,
                  0, 2 * math.pi)
    assert val == pytest.approx(0.197392088021787172, rel=1e-12)


def _cfg():
    return PlumbingConfig.from_log(-20.0, phase=0.3)


def test_graft_density_equals_disc_metric_outside():
    cfg = _cfg()
    z = np.array([0.37, 0.5j, -0.9])
    assert np.allclose(graft_density(None, cfg, z), zero_fiber_density(z), rtol=1e-13)


def test_graft_density_equals_fiber_on_core():
    cfg = _cfg()
    z = math.exp(-10.0) * np.exp(1j * np.array([0.0, 1.0, 2.5]))
    assert np.allclose(graft_density(None, cfg, z), fiber_density(z, cfg.t), rtol=1e-13)


def test_graft_density_geometric_mean_mid_band():
    cfg = _cfg()
    z = math.exp(-1.5)
    lg = graft_density(None, cfg, z)
    mean = math.sqrt(zero_fiber_density(z) * fiber_density(z, cfg.t))
    assert lg == pytest.approx(mean, rel=1e-13)


def test_graft_density_accepts_callable_and_field():
    cfg = _cfg()
    z = np.array([0.3, 0.2j])
    a = graft_density(zero_fiber_density, cfg, z)
    assert np.allclose(a, graft_density(None, cfg, z), rtol=1e-13)
    u = np.linspace(-2.5, -0.2, 2049)
    base = zero_fiber_field(u, 16)
    b = graft_density(base, cfg, z)
    assert np.allclose(b, a, rtol=1e-5)


def test_graft_density_domain():
    cfg = _cfg()
    with pytest.raises(DomainError):
        graft_density(None, cfg, 1.2)
    with pytest.raises(DomainError):
        graft_density(None, cfg, math.exp(-19.5))


@settings(max_examples=80, deadline=None)
@given(st.floats(-18.99, -0.01), st.floats(0, 6.28), st.floats(-40, -10))
def test_graft_density_between_fiber_and_disc(u, th, L):
    cfg = PlumbingConfig.from_log(L)
    u = max(u, L + 1.01)
    z = math.exp(u) * complex(math.cos(th), math.sin(th))
    g = graft_density(None, cfg, z)
    lt = fiber_density(z, math.exp(L))
    w = math.exp(L - u)
    # disc metric from either cusp, pulled back to the z-chart
    l0z = zero_fiber_density(z)
    l0w = zero_fiber_density(w) * math.exp(2 * L - 4 * u)
    assert g <= lt * (1 + 1e-12)
    assert g >= min(l0z, l0w) * (1 - 1e-12)


def test_curvature_of_flat_and_disc_fields():
    u = np.linspace(-3.0, -0.5, 201)
    flat = ConformalMetricField.radial(Chart.Z, u, 16, np.zeros_like(u))
    assert np.max(np.abs(gaussian_curvature(flat))) < 1e-7
    K = gaussian_curvature(zero_fiber_field(u, 16))
    assert K.shape == (199, 16)
    assert np.max(np.abs(K + 1)) < 1e-3


def test_fiber_curvature_refinement():
    out = fiber_curvature_check(-20.0, n_u=257, n_theta=32)
    assert 3.6 <= out["ratio"] <= 4.4
    assert out["errors"][0] > out["errors"][1] > out["errors"][2]


def test_graft_curvature_model_off_band():
    cfg = _cfg()
    # outside the bands the graft is exactly the disc (K = -1) or the fiber (K = -1)
    u = np.array([-0.5, -10.0, -19.5])
    assert np.allclose(graft_curvature_model(cfg, u), -1.0, atol=1e-13)


def test_graft_curvature_model_matches_stencil():
    cfg = _cfg()
    u = np.linspace(-2.2, -0.8, 4097)
    K = gaussian_curvature(graft_field(cfg, u, 4))[:, 0]
    assert np.allclose(K, graft_curvature_model(cfg, u[1:-1]), atol=1e-6)


def test_graft_log_density_symmetric_under_inversion():
    cfg = _cfg()
    L = cfg.log_abs_t
    u = np.linspace(-15, -5, 11)
    # lam(t/z) |t|^2/|z|^4 = lam(z)
    lhs = graft_log_density(cfg, L - u) + 2 * L - 4 * u
    assert np.allclose(lhs, graft_log_density(cfg, u), atol=1e-12)


def test_graft_residual_without_band_term():
    cfgs = [PlumbingConfig.from_log(-L) for L in (20, 40, 80, 160)]
    fit = graft_curvature_residual(cfgs, n_per_band=2049, include_lambda=False)
    assert fit.slope == pytest.approx(2.0, abs=0.1)


def test_graft_residual_rejects_short_ladder():
    cfgs = [PlumbingConfig.from_log(-L) for L in (20, 30, 40, 50)]
    with pytest.raises(ValueError):
        graft_curvature_residual(cfgs)
    with pytest.raises(ValueError):
        graft_curvature_residual(cfgs[:3])


def test_field_validation():
    u = np.linspace(-2, -1, 5)
    with pytest.raises(ValueError):
        ConformalMetricField(Chart.Z, u[::-1], np.arange(4) * math.pi / 2, np.zeros((5, 4)))
    with pytest.raises(ValueError):
        ConformalMetricField(Chart.Z, u, np.array([0.0, 1.0, 2.0]), np.zeros((5, 3)))
    with pytest.raises(ValueError):
        ConformalMetricField(Chart.Z, u, np.arange(4) * math.pi / 2, np.zeros((4, 4)))
    with pytest.raises(DomainError):
        fiber_field(-10.0, np.array([-11.0, -5.0]), 4)


def test_field_file_round_trip(tmp_path):
    cfg = _cfg()
    u = np.linspace(-15, -5, 9)
    f = fiber_field(cfg, u, 8)
    val = np.arange(72, dtype=float).reshape(9, 8) / 7
    path = tmp_path / "f.txt"
    write_field(path, f, val)
    g, v = read_field(path)
    assert g.chart is Chart.Z
    assert np.array_equal(g.u, f.u)
    assert np.array_equal(g.log_density, f.log_density)
    assert np.array_equal(v, val)
    assert g.meta["log_abs_t"] == cfg.log_abs_t
    assert log_fiber_density(u, cfg.log_abs_t) == pytest.approx(g.log_density[:, 3])


def test_write_field_bad_path(tmp_path):
    f = zero_fiber_field(np.linspace(-2, -1, 3), 4)
    with pytest.raises(OSError, match="cannot write"):
        write_field(tmp_path / "missing" / "f.txt", f)
