"""Conformal metrics on annular charts: fiber metrics, cutoff and grafting.

A metric ``ds^2 = lam |dz|^2`` on an annular chart is sampled on a
logarithmic-polar lattice ``(u, theta)`` with ``z = exp(u + i theta)`` and
stored through ``log lam``.  In these coordinates ``ds^2 = exp(mu)(du^2 +
dtheta^2)`` with ``mu = log lam + 2u``, and the Gaussian curvature is
``K = -exp(-mu) (mu_uu + mu_theta_theta) / 2``.

The model metrics are

* plumbing fiber metric on ``|t| < |z| < 1``:
  ``lam_t = (pi / (|z| log|t|))**2 csc(Theta)**2``, ``Theta = pi log|z| / log|t|``
* punctured-disc metric: ``lam_0 = (|z| log|z|)**-2``.

Their ratio is ``lam_t / lam_0 = (Theta csc Theta)**2``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
import numpy as np

from .rates import fit_rate

__all__ = [
    "Chart",
    "CutoffProfile",
    "PlumbingConfig",
    "ConformalMetricField",
    "DomainError",
    "UnderResolvedError",
    "septic_smoothstep",
    "septic_smoothstep_prime",
    "septic_smoothstep_second",
    "fiber_density",
    "log_fiber_density",
    "zero_fiber_density",
    "log_zero_fiber_density",
    "theta_series_ratio",
    "theta_series_truncated",
    "log_theta_ratio",
    "lambda_profile",
    "graft_density",
    "graft_log_ratio",
    "graft_log_density",
    "graft_curvature_model",
    "gaussian_curvature",
    "relative_curvature",
    "graft_curvature_residual",
    "core_geodesic_length",
    "fiber_curvature_check",
    "fiber_field",
    "zero_fiber_field",
    "graft_field",
    "write_field",
    "read_field",
]


class DomainError(ValueError):
    """A point lies outside the chart where a formula is defined."""


class UnderResolvedError(RuntimeError):
    """Grid refinement changed a reported quantity by more than allowed."""


# ---------------------------------------------------------------------------
# cutoff profile


def septic_smoothstep(x):
    """C^3 step ``35x^4 - 84x^5 + 70x^6 - 20x^7``, clamped to [0, 1]."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    # evaluate the upper half through s(x) = 1 - s(1 - x) to stay inside [0, 1]
    y = np.minimum(x, 1.0 - x)
    low = y**4 * (35.0 + y * (-84.0 + y * (70.0 - 20.0 * y)))
    return np.where(x <= 0.5, low, 1.0 - low)


def septic_smoothstep_prime(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xc = np.clip(x, 0.0, 1.0)
    return np.where(inside, 140.0 * xc**3 * (1 - xc) ** 3, 0.0)


def septic_smoothstep_second(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xc = np.clip(x, 0.0, 1.0)
    return np.where(inside, 420.0 * xc**2 * (1 - xc) ** 2 * (1 - 2 * xc), 0.0)


@dataclass(frozen=True)
class CutoffProfile:
    """Smooth cutoff ``eta`` with ``eta = 1`` for ``a <= a0`` and 0 for ``a >= 0``.

    ``eta(a) = 1 - s(1 - a/a0)`` with ``s`` the septic smoothstep, so the
    profile is C^3 and odd about its midpoint ``a0/2``.
    """

    a0: float = -1.0

    def __post_init__(self):
        if not (self.a0 < 0 and math.isfinite(self.a0)):
            raise ValueError("a0 must be a negative finite number")

    def _x(self, a):
        return 1.0 - np.asarray(a, dtype=float) / self.a0

    def eta(self, a):
        return 1.0 - septic_smoothstep(self._x(a))

    def chi(self, a):
        """Complementary cutoff ``1 - eta``."""
        return septic_smoothstep(self._x(a))

    def eta_prime(self, a):
        return septic_smoothstep_prime(self._x(a)) / self.a0

    def eta_second(self, a):
        return -septic_smoothstep_second(self._x(a)) / self.a0**2


def lambda_profile(cutoff: CutoffProfile, a, log_c_star: float = 0.0):
    """Band profile ``d/da (a^4 d eta/da)`` with the cutoff centred at ``log_c_star``.

    Parameters
    ----------
    cutoff : CutoffProfile
    a : array_like
        Log-radius ``log|z|``.
    log_c_star : float, default 0
        Shift of the cutoff; the profile is ``4 a^3 eta'(a - s) + a^4 eta''(a - s)``.
        With the default the band is ``(a0, 0)``.
    """
    a = np.asarray(a, dtype=float)
    b = a - log_c_star
    return 4.0 * a**3 * cutoff.eta_prime(b) + a**4 * cutoff.eta_second(b)


# ---------------------------------------------------------------------------
# plumbing data


class Chart(enum.Enum):
    Z = "z"
    W = "w"


@dataclass(frozen=True)
class PlumbingConfig:
    """Plumbing parameter ``t`` with overlap radius ``c_star`` and cutoff.

    Requires ``|t| < c_star**4`` and ``|t| <= exp(2 a0) c_star**2`` so that the
    two collar bands are disjoint.  ``log_abs_t`` may be given instead of a
    tiny ``t`` that would underflow.
    """

    t: complex
    c_star: float = math.exp(-1.0)
    cutoff: CutoffProfile = field(default_factory=CutoffProfile)
    log_abs_t: float = None  # type: ignore[assignment]

    def __post_init__(self):
        t = complex(self.t)
        object.__setattr__(self, "t", t)
        if self.log_abs_t is None:
            if t == 0 or not np.isfinite(t):
                raise ValueError("t must be a nonzero finite complex number")
            object.__setattr__(self, "log_abs_t", math.log(abs(t)))
        L = float(self.log_abs_t)
        object.__setattr__(self, "log_abs_t", L)
        if not (0 < self.c_star < 1):
            raise ValueError("c_star must lie in (0, 1)")
        if not L < 0:
            raise ValueError("|t| must be smaller than 1")
        lc = math.log(self.c_star)
        if not L < 4 * lc:
            raise ValueError("|t| must be smaller than c_star**4")
        if not L <= 2 * self.cutoff.a0 + 2 * lc + 1e-12:
            raise ValueError("|t| must not exceed exp(2 a0) c_star**2")

    @classmethod
    def from_log(cls, log_abs_t: float, phase: float = 0.0, log_c_star: float = -1.0,
                 a0: float = -1.0) -> "PlumbingConfig":
        """Build from ``log|t|`` and ``arg t`` (robust for very small ``|t|``)."""
        t = complex(math.exp(log_abs_t) * math.cos(phase), math.exp(log_abs_t) * math.sin(phase))
        return cls(t, math.exp(log_c_star), CutoffProfile(a0), float(log_abs_t))

    @property
    def a0(self) -> float:
        return self.cutoff.a0

    @property
    def log_c_star(self) -> float:
        return math.log(self.c_star)

    @property
    def epsilon(self) -> float:
        """``pi / log|t|`` (negative)."""
        return math.pi / self.log_abs_t

    @property
    def phase(self) -> float:
        return math.atan2(self.t.imag, self.t.real)

    @property
    def primary_band(self) -> tuple[float, float]:
        """Band in ``u = log|z|`` where the cutoff varies on the z side."""
        lc = self.log_c_star
        return lc + self.a0, lc

    @property
    def secondary_band(self) -> tuple[float, float]:
        """The w-side band written in ``u = log|z|``."""
        L, lc = self.log_abs_t, self.log_c_star
        return L - lc, L - lc - self.a0


# ---------------------------------------------------------------------------
# fiber metrics

# series of log(x/sin x), 1/x - cot x and csc^2 x - 1/x^2 about 0
_LOG_RATIO_SERIES = (1 / 6, 1 / 180, 1 / 2835, 1 / 37800, 1 / 467775, 691 / 3831077250)
_COT_SERIES = (1 / 3, 1 / 45, 2 / 945, 1 / 4725, 2 / 93555, 1382 / 638512875)
_CSC_SERIES = (1 / 3, 1 / 15, 2 / 189, 1 / 675, 2 / 10395, 1382 / 58046625)
_SERIES_SWITCH = 0.1


def _even_series(coef, x2):
    out = np.zeros_like(x2)
    for c in reversed(coef):
        out = out * x2 + c
    return out


def log_theta_ratio(theta):
    """``log(theta / sin theta)``, accurate for small ``theta``."""
    th = np.asarray(theta, dtype=float)
    small = np.abs(th) < _SERIES_SWITCH
    safe = np.where(small, 1.0, th)
    direct = np.log(safe / np.sin(safe))
    x2 = th * th
    return np.where(small, x2 * _even_series(_LOG_RATIO_SERIES, x2), direct)


def _inv_minus_cot(theta):
    th = np.asarray(theta, dtype=float)
    small = np.abs(th) < _SERIES_SWITCH
    safe = np.where(small, 1.0, th)
    return np.where(small, th * _even_series(_COT_SERIES, th * th), 1 / safe - 1 / np.tan(safe))


def _csc2_minus_inv2(theta):
    th = np.asarray(theta, dtype=float)
    small = np.abs(th) < _SERIES_SWITCH
    safe = np.where(small, 1.0, th)
    return np.where(small, _even_series(_CSC_SERIES, th * th), 1 / np.sin(safe) ** 2 - 1 / safe**2)


def _scalar(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


def log_fiber_density(u, log_abs_t: float):
    """``log lam_t`` at ``u = log|z|`` for ``log|t| < u < 0``."""
    u = np.asarray(u, dtype=float)
    L = float(log_abs_t)
    return 2 * math.log(math.pi / abs(L)) - 2 * u - 2 * np.log(np.sin(math.pi * u / L))


def log_zero_fiber_density(u):
    """``log lam_0`` at ``u = log|z| < 0``."""
    u = np.asarray(u, dtype=float)
    return -2 * u - 2 * np.log(-u)


def fiber_density(z, t):
    """Density of the hyperbolic metric of the annulus ``{|t| < |z| < 1}``.

    Parameters
    ----------
    z : complex or array_like
    t : complex
        Plumbing parameter, ``0 < |t| < 1``.

    Returns
    -------
    float or ndarray
        ``(pi / (|z| log|t|))**2 / sin(Theta)**2`` with ``Theta = pi log|z| / log|t|``.
    """
    at = abs(complex(t))
    if not 0 < at < 1:
        raise DomainError("need 0 < |t| < 1")
    r = np.abs(np.asarray(z, dtype=complex))
    if np.any(r <= at) or np.any(r >= 1):
        raise DomainError("z must satisfy |t| < |z| < 1")
    return _scalar(np.exp(log_fiber_density(np.log(r), math.log(at))))


def zero_fiber_density(z):
    """Density ``(|z| log|z|)**-2`` of the punctured unit disc."""
    r = np.abs(np.asarray(z, dtype=complex))
    if np.any(r <= 0) or np.any(r >= 1):
        raise DomainError("z must satisfy 0 < |z| < 1")
    return _scalar(np.exp(log_zero_fiber_density(np.log(r))))


def theta_series_ratio(theta):
    """Ratio ``lam_t / lam_0 = (theta csc theta)**2`` for ``0 < theta < pi``."""
    th = np.asarray(theta, dtype=float)
    if np.any(th <= 0) or np.any(th >= math.pi):
        raise DomainError("theta must lie in (0, pi)")
    return _scalar(np.exp(2 * log_theta_ratio(th)))


def theta_series_truncated(theta):
    """Fourth-order expansion ``1 + theta^2/3 + theta^4/15`` of the ratio."""
    th = np.asarray(theta, dtype=float)
    return _scalar(1 + th**2 / 3 + th**4 / 15)


# ---------------------------------------------------------------------------
# grafting


def graft_log_ratio(config: PlumbingConfig, u):
    """``log(lam_t / lam_g)`` for the grafted annulus model, along ``u = log|z|``.

    The model plumbs two punctured discs; the graft interpolates the disc
    metric on each side with the fiber metric across the bands.
    """
    u = np.asarray(u, dtype=float)
    L, lc = config.log_abs_t, config.log_c_star
    th_z = math.pi * u / L
    th_w = math.pi * (L - u) / L
    chi1 = config.cutoff.chi(u - lc)
    chi2 = config.cutoff.chi((L - u) - lc)
    return 2 * chi1 * log_theta_ratio(th_z) + 2 * chi2 * log_theta_ratio(th_w)


def graft_log_density(config: PlumbingConfig, u):
    """``log lam_g`` of the annulus model in the z-chart."""
    return log_fiber_density(u, config.log_abs_t) - graft_log_ratio(config, u)


def graft_curvature_model(config: PlumbingConfig, u):
    """Curvature of the grafted annulus model, by the conformal-change formula.

    On the z side ``lam_g = exp(phi) lam_0`` with ``phi = eta g`` and
    ``g = 2 log(Theta / sin Theta)``, so that ``K = -exp(-phi)(1 + a^2 phi''/2)``
    with ``a = log|z|``; the w side is the mirror image.  Derivatives of ``g``
    are evaluated in closed form.
    """
    u = np.asarray(u, dtype=float)
    L = config.log_abs_t
    out = np.empty_like(u)
    zside = u >= L / 2
    for mask, a in ((zside, u), (~zside, L - u)):
        out[mask] = _side_curvature(config, a[mask])
    return _scalar(out)


def _side_curvature(config: PlumbingConfig, a):
    eps = config.epsilon
    th = eps * a
    g = 2 * log_theta_ratio(th)
    g1 = 2 * eps * _inv_minus_cot(th)
    g2 = 2 * eps**2 * _csc2_minus_inv2(th)
    b = a - config.log_c_star
    e, e1, e2 = config.cutoff.eta(b), config.cutoff.eta_prime(b), config.cutoff.eta_second(b)
    phi = e * g
    phi2 = e2 * g + 2 * e1 * g1 + e * g2
    return -np.exp(-phi) * (1 + 0.5 * a**2 * phi2)


def _as_log_density(base, z):
    if base is None:
        return log_zero_fiber_density(np.log(np.abs(z)))
    if isinstance(base, ConformalMetricField):
        return base.log_density_at(z)
    return np.log(np.asarray(base(z), dtype=float))


def graft_density(base, config: PlumbingConfig, z, base_other=None):
    """Grafted density ``lam_base^(1-eta) lam_t^eta`` in the z-chart.

    Parameters
    ----------
    base : ConformalMetricField, callable or None
        Density of the surface metric near the z-cusp, either a sampled field
        or a function ``z -> lam``.  ``None`` means the punctured-disc metric.
    config : PlumbingConfig
    z : complex or array_like
        Points with ``|t|/c_star < |z| < 1``.
    base_other : ConformalMetricField, callable or None
        Density near the w-cusp as a function of ``w = t/z``.

    Returns
    -------
    float or ndarray
    """
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    L, lc = config.log_abs_t, config.log_c_star
    u = np.log(r)
    if np.any(u <= L - lc) or np.any(u >= 0):
        raise DomainError("z must satisfy |t|/c_star < |z| < 1")
    cut = config.cutoff
    eta1 = cut.eta(u - lc)
    eta2 = cut.eta((L - u) - lc)
    lt = log_fiber_density(u, L)
    lb = _as_log_density(base, z)
    w = config.t / z if config.t != 0 else np.exp(L - u) * np.exp(-1j * np.angle(z))
    # pull the w-side density back to the z-chart: |dw/dz|^2 = |t|^2 / |z|^4
    lw = _as_log_density(base_other, w) + 2 * L - 4 * u
    lg = lt + (1 - eta1) * (lb - lt) + (1 - eta2) * (lw - lt)
    return _scalar(np.exp(lg))


# ---------------------------------------------------------------------------
# sampled fields


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    if theta.ndim != 1 or n < 1:
        raise ValueError("theta must be a nonempty 1-d array")
    expected = theta[0] + 2 * math.pi * np.arange(n) / n
    if not np.allclose(theta, expected, rtol=0, atol=1e-9):
        raise ValueError("theta must be uniform with period 2 pi")
    return theta


@dataclass(frozen=True, eq=False)
class ConformalMetricField:
    """Log-density ``log lam`` on a log-polar lattice of an annular chart.

    Attributes
    ----------
    chart : Chart
    u : ndarray, shape (n_u,)
        Strictly increasing ``log r`` samples.
    theta : ndarray, shape (n_theta,)
        Uniform angles covering one period.
    log_density : ndarray, shape (n_u, n_theta)
    meta : dict
        Optional plumbing data (``t``, ``c_star``, ``a0``) carried to files.
    """

    chart: Chart
    u: np.ndarray
    theta: np.ndarray
    log_density: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        chart = Chart(self.chart) if not isinstance(self.chart, Chart) else self.chart
        object.__setattr__(self, "chart", chart)
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 1 or u.size < 1:
            raise ValueError("u must be a nonempty 1-d array")
        if u.size > 1 and not np.all(np.diff(u) > 0):
            raise ValueError("u must be strictly increasing")
        theta = _check_theta(self.theta)
        ld = np.asarray(self.log_density, dtype=float)
        if ld.shape != (u.size, theta.size):
            raise ValueError(f"log_density has shape {ld.shape}, expected {(u.size, theta.size)}")
        if not np.all(np.isfinite(ld)):
            raise ValueError("log_density must be finite")
        for name, v in (("u", u), ("theta", theta), ("log_density", ld)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "meta", dict(self.meta))

    @classmethod
    def radial(cls, chart, u, n_theta: int, log_density_u, meta=None) -> "ConformalMetricField":
        """Field whose log-density depends on ``u`` only."""
        u = np.asarray(u, dtype=float)
        theta = 2 * math.pi * np.arange(n_theta) / n_theta
        ld = np.repeat(np.asarray(log_density_u, dtype=float)[:, None], n_theta, axis=1)
        return cls(chart, u, theta, ld, meta or {})

    @property
    def shape(self) -> tuple[int, int]:
        return self.log_density.shape

    @property
    def density(self) -> np.ndarray:
        return np.exp(self.log_density)

    @property
    def mu(self) -> np.ndarray:
        """Log conformal factor in ``(u, theta)``: ``log lam + 2u``."""
        return self.log_density + 2 * self.u[:, None]

    @property
    def h(self) -> float:
        """Uniform ``u`` spacing (raises if the grid is not uniform)."""
        d = np.diff(self.u)
        if d.size == 0:
            raise ValueError("grid has a single u sample")
        if not np.allclose(d, d[0], rtol=1e-9, atol=0):
            raise ValueError("u grid is not uniform")
        return float((self.u[-1] - self.u[0]) / (self.u.size - 1))

    @property
    def k(self) -> float:
        return 2 * math.pi / self.theta.size

    def points(self) -> np.ndarray:
        """Chart coordinates ``exp(u + i theta)`` of all lattice points."""
        return np.exp(self.u[:, None] + 1j * self.theta[None, :])

    def with_log_density(self, log_density) -> "ConformalMetricField":
        return ConformalMetricField(self.chart, self.u, self.theta, log_density, self.meta)

    def log_density_at(self, z):
        """Linear interpolation of ``log lam`` in ``(u, theta)`` (periodic in theta)."""
        from scipy.interpolate import RegularGridInterpolator

        z = np.asarray(z, dtype=complex)
        u = np.log(np.abs(z))
        th = np.mod(np.angle(z) - self.theta[0], 2 * math.pi) + self.theta[0]
        tt = np.append(self.theta, self.theta[0] + 2 * math.pi)
        vals = np.concatenate([self.log_density, self.log_density[:, :1]], axis=1)
        if self.u.size == 1:
            raise ValueError("cannot interpolate on a single u sample")
        interp = RegularGridInterpolator((self.u, tt), vals, bounds_error=True)
        try:
            out = interp(np.stack([u.ravel(), th.ravel()], axis=-1))
        except ValueError as exc:
            raise DomainError("point outside the sampled annulus") from exc
        return _scalar(out.reshape(u.shape))


def fiber_field(config_or_log_t, u, n_theta: int, chart=Chart.Z) -> ConformalMetricField:
    """Sample the fiber metric on ``u`` (``log|t| < u < 0``)."""
    if isinstance(config_or_log_t, PlumbingConfig):
        L, meta = config_or_log_t.log_abs_t, _meta(config_or_log_t)
    else:
        L, meta = float(config_or_log_t), {"log_abs_t": float(config_or_log_t)}
    u = np.asarray(u, dtype=float)
    if np.any(u <= L) or np.any(u >= 0):
        raise DomainError("u must lie in (log|t|, 0)")
    return ConformalMetricField.radial(chart, u, n_theta, log_fiber_density(u, L), meta)


def zero_fiber_field(u, n_theta: int, chart=Chart.Z) -> ConformalMetricField:
    u = np.asarray(u, dtype=float)
    if np.any(u >= 0):
        raise DomainError("u must be negative")
    return ConformalMetricField.radial(chart, u, n_theta, log_zero_fiber_density(u))


def graft_field(config: PlumbingConfig, u, n_theta: int) -> ConformalMetricField:
    """Sample the grafted annulus model in the z-chart."""
    return ConformalMetricField.radial(Chart.Z, u, n_theta, graft_log_density(config, u),
                                       _meta(config))


def _meta(config: PlumbingConfig) -> dict:
    return {"t_re": config.t.real, "t_im": config.t.imag, "log_abs_t": config.log_abs_t,
            "c_star": config.c_star, "a0": config.a0}


# ---------------------------------------------------------------------------
# curvature


def _laplacian_ut(f, h, k):
    """``f_uu + f_tt`` on interior u rows, periodic in theta (second order)."""
    fuu = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
    mid = f[1:-1]
    ftt = (np.roll(mid, -1, axis=1) - 2 * mid + np.roll(mid, 1, axis=1)) / k**2
    return fuu + ftt


def _check_stencil(field: ConformalMetricField):
    n_u, n_t = field.shape
    if n_u < 3 or n_t < 3:
        raise ValueError("curvature needs at least 3 samples in u and theta")


def gaussian_curvature(field: ConformalMetricField) -> np.ndarray:
    """Gaussian curvature ``-(1/(2 lam)) Laplace(log lam)`` on interior rows.

    Second-order central differences in ``(u, theta)``; the first and last
    ``u`` rows are dropped.

    Returns
    -------
    ndarray, shape (n_u - 2, n_theta)
    """
    _check_stencil(field)
    h, k = field.h, field.k
    mu = field.mu
    return -0.5 * np.exp(-mu[1:-1]) * _laplacian_ut(mu, h, k)


def relative_curvature(reference: ConformalMetricField, log_ratio,
                       reference_curvature=-1.0) -> np.ndarray:
    """Curvature of ``exp(phi) * reference`` given ``phi`` on the reference grid.

    Uses ``K = exp(-phi) (K_ref - exp(-mu_ref) Laplace(phi) / 2)``, which only
    differences the (small) log-ratio ``phi``.

    Returns
    -------
    ndarray, shape (n_u - 2, n_theta)
    """
    _check_stencil(reference)
    phi = np.asarray(log_ratio, dtype=float)
    if phi.ndim == 1:
        phi = np.repeat(phi[:, None], reference.shape[1], axis=1)
    if phi.shape != reference.shape:
        raise ValueError("log_ratio does not conform to the reference grid")
    kref = np.broadcast_to(np.asarray(reference_curvature, dtype=float), reference.shape)[1:-1]
    lap = _laplacian_ut(phi, reference.h, reference.k)
    return np.exp(-phi[1:-1]) * (kref - 0.5 * np.exp(-reference.mu[1:-1]) * lap)


def _band_residual(config: PlumbingConfig, n: int, n_theta: int, include_lambda: bool):
    lo, hi = config.primary_band
    u = np.linspace(lo, hi, n)
    h = u[1] - u[0]
    ug = np.concatenate([[lo - h], u, [hi + h]])
    ref = zero_fiber_field(ug, n_theta)
    L = config.log_abs_t
    # log(lam_g / lam_0) on the z side: eta1 g_z - (1 - eta2) g_w
    cut = config.cutoff
    gz = 2 * log_theta_ratio(math.pi * ug / L)
    gw = 2 * log_theta_ratio(math.pi * (L - ug) / L)
    phi = cut.eta(ug - config.log_c_star) * gz - cut.chi((L - ug) - config.log_c_star) * gw
    K = relative_curvature(ref, phi)[:, 0]
    r = K + 1
    if include_lambda:
        r = r + config.epsilon**2 / 6 * lambda_profile(cut, u, config.log_c_star)
    return float(np.max(np.abs(r)))


def graft_curvature_residual(configs, n_per_band: int = 8193, n_theta: int = 4,
                             include_lambda: bool = True, rtol: float = 0.05,
                             details: bool = False):
    """Rate of the curvature expansion of the grafted metric across the bands.

    For each configuration the residual is the sup over the primary band of
    ``|K_g + 1 + (eps^2/6) Lambda|``.  The secondary band is the mirror image
    of the primary one under ``z -> t/z`` for the annulus model, so it yields
    the same sup.  ``K_g`` is obtained by the conformal-change formula from the
    disc metric, differencing only the small log-ratio.

    Parameters
    ----------
    configs : sequence of PlumbingConfig
        At least 4 values with ``-log|t|`` spanning a factor 8 or more.
    n_per_band : int
        Grid points across the band; the computation is repeated on a grid of
        spacing ``h/2`` and must agree within ``rtol``.
    include_lambda : bool
        Drop the ``eps^2`` term to see the uncorrected rate.

    Returns
    -------
    RateFit
        Residual against ``|eps|``.  With ``details=True`` a list of per-point
        dicts is returned as well.
    """
    configs = list(configs)
    if len(configs) < 4:
        raise ValueError("need at least 4 ladder points")
    span = max(-c.log_abs_t for c in configs) / min(-c.log_abs_t for c in configs)
    if span < 8 - 1e-12:
        raise ValueError("ladder must span a factor of at least 8 in -log|t|")
    rows = []
    for cfg in configs:
        r1 = _band_residual(cfg, n_per_band, n_theta, include_lambda)
        r2 = _band_residual(cfg, 2 * n_per_band - 1, n_theta, include_lambda)
        if abs(r1 - r2) > rtol * abs(r2):
            raise UnderResolvedError(
                f"band residual not resolved at log|t|={cfg.log_abs_t}: {r1:.3e} vs {r2:.3e}")
        rows.append({"log_abs_t": cfg.log_abs_t, "epsilon": abs(cfg.epsilon),
                     "residual": r2, "residual_coarse": r1})
    fit = fit_rate([r["epsilon"] for r in rows], [r["residual"] for r in rows])
    return (fit, rows) if details else fit


def core_geodesic_length(t) -> float:
    """Length ``2 pi^2 / (-log|t|)`` of the core geodesic of the plumbing collar."""
    at = abs(complex(t))
    if not 0 < at < 1:
        raise DomainError("need 0 < |t| < 1")
    return 2 * math.pi**2 / -math.log(at)


def fiber_curvature_check(log_abs_t: float = -20.0, n_u: int = 512, n_theta: int = 64,
                          c_star: float = math.exp(-1.0)) -> dict:
    """Curvature of the sampled fiber metric over the collar, with a refinement study.

    The grid covers ``log|t| - log c* <= u <= log c*`` with ``n_u`` points and
    is refined twice by halving ``h`` (and ``k``).  The stencil is second
    order, so the error ratio between successive grids should be close to 4.

    Returns
    -------
    dict
        ``max_error`` on the requested grid, ``errors`` on the three nested
        grids, ``ratio`` (first over second), ``ratio_fine`` (second over
        third) and ``order = log2(ratio)``.
    """
    L = float(log_abs_t)
    lc = math.log(c_star)
    if not L < 2 * lc < 0:
        raise DomainError("need log|t| < 2 log c* < 0")
    errs = []
    for j in range(3):
        n = (n_u - 1) * 2**j + 1
        u = np.linspace(L - lc, lc, n)
        K = gaussian_curvature(fiber_field(L, u, n_theta * 2**j))
        errs.append(float(np.max(np.abs(K + 1))))
    ratio = errs[0] / errs[1]
    return {"log_abs_t": L, "n_u": n_u, "n_theta": n_theta, "max_error": errs[0],
            "errors": errs, "ratio": ratio, "ratio_fine": errs[1] / errs[2],
            "order": math.log2(ratio)}


# ---------------------------------------------------------------------------
# columnar text format


def write_field(path, field: ConformalMetricField, value=None) -> None:
    """Write a field as columns ``u theta log_density [value]``.

    The header records the chart, plumbing data and grid dimensions.
    """
    n_u, n_t = field.shape
    meta = dict(field.meta)
    cols = ["u", "theta", "log_density"]
    data = [np.repeat(field.u, n_t), np.tile(field.theta, n_u), field.log_density.ravel()]
    if value is not None:
        value = np.asarray(value, dtype=float)
        if value.shape != field.shape:
            raise ValueError("value column does not conform to the grid")
        cols.append("value")
        data.append(value.ravel())
    lines = [
        "# hypgraft field v1",
        f"# chart {field.chart.value}",
        f"# t {meta.get('t_re', float('nan')):.17g} {meta.get('t_im', float('nan')):.17g}",
        f"# log_abs_t {meta.get('log_abs_t', float('nan')):.17g}",
        f"# c_star {meta.get('c_star', float('nan')):.17g}",
        f"# a0 {meta.get('a0', float('nan')):.17g}",
        f"# dims {n_u} {n_t}",
        "# columns " + " ".join(cols),
    ]
    body = np.column_stack(data)
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
            np.savetxt(fh, body, fmt="%.17g")
    except OSError as exc:
        raise OSError(f"cannot write field file {path}: {exc}") from exc


def read_field(path):
    """Read a file written by :func:`write_field`.

    Returns
    -------
    field : ConformalMetricField
    value : ndarray or None
    """
    header = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            parts = line[1:].split()
            if parts:
                header[parts[0]] = parts[1:]
    n_u, n_t = (int(v) for v in header["dims"])
    cols = header["columns"]
    body = np.loadtxt(path, comments="#", ndmin=2)
    if body.shape != (n_u * n_t, len(cols)):
        raise ValueError(f"{path}: body shape {body.shape} does not match header")
    u = body[::n_t, 0]
    theta = body[:n_t, 1]
    ld = body[:, 2].reshape(n_u, n_t)
    meta = {}
    t_re, t_im = (float(v) for v in header["t"])
    for key, val in (("t_re", t_re), ("t_im", t_im),
                     ("log_abs_t", float(header["log_abs_t"][0])),
                     ("c_star", float(header["c_star"][0])), ("a0", float(header["a0"][0]))):
        if not math.isnan(val):
            meta[key] = val
    field_ = ConformalMetricField(Chart(header["chart"][0]), u, theta, ld, meta)
    value = body[:, 3].reshape(n_u, n_t) if len(cols) > 3 else None
    return field_, value
