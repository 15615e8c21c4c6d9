"""Eisenstein series of weight zero at s = 2 and of holomorphic weight four.

For a cusp normalized to infinity the series is the coset sum

    E(zeta) = sum_{A in Gamma_inf \\ Gamma} (Im A zeta)^2
            = y^2 + sum_{(c, d), c > 0} y^2 / |c zeta + d|^4 .

Rows with the same ``c`` and ``d mod c`` differ by an integer translation
and their sum is carried out in closed form:

    sum_k ((x + k)^2 + y^2)^-2 = -(1/(2y)) d/dy [ (pi/y) sinh(2 pi y) / (cosh(2 pi y) - cos(2 pi x)) ]

and likewise ``sum_k (w + k)^-4 = pi^4 (csc^4(pi w) - (2/3) csc^2(pi w))`` for
the holomorphic series.  Only the finitely many classes with ``c <= C`` are
summed; the remainder is bounded by an explicit majorant.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .metrics import PlumbingConfig, UnderResolvedError, DomainError
from .moebius import (BottomRowSet, CuspRecord, FuchsianGroupSpec, GroupKind, MoebiusMap,
                      apply, enumerate_bottom_rows)
from .rates import fit_rate

__all__ = [
    "NeedsLargerCutoff",
    "QuadratureError",
    "Role",
    "IntegrandKind",
    "EisensteinEvaluator",
    "TruncationContext",
    "CuspSide",
    "GeodesicSegment",
    "translate_sum",
    "eval_E2",
    "eval_e_hat",
    "eval_E_star",
    "eval_Phi4",
    "theta_average",
    "ball_average",
    "eigen_residual",
    "truncate_sharp",
    "meld_dagger",
    "decomposition_fields",
    "emeld_residual",
    "geodesic_line_integral",
    "tz_pairing",
    "length_correction_coefficient",
]

_CHUNK = 1 << 21  # points x classes per block
_HIGH = 40.0


class NeedsLargerCutoff(ValueError):
    """The declared tail bound exceeds the requested tolerance."""


class QuadratureError(RuntimeError):
    """A quadrature failed to reach its tolerance."""


class Role(enum.Enum):
    DEFINING = "DefiningCusp"
    REMAINING = "RemainingCusp"


class IntegrandKind(enum.Enum):
    E_DS = "E_ds"
    PHI_OVER_DS = "Phi_over_ds"


def translate_sum(x, y):
    """``sum_k ((x + k)^2 + y^2)^-2`` for ``y > 0`` in closed form."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    q = np.exp(-2 * np.pi * y)
    omq = -np.expm1(-2 * np.pi * y)  # 1 - q
    s2 = np.sin(np.pi * x) ** 2
    den = omq**2 + 4 * q * s2  # 1 - 2q cos(2 pi x) + q^2
    g = omq * (1 + q) / den
    dg_dq = 2 * (omq**2 - 2 * (1 + q * q) * s2) / den**2
    f_y = -np.pi / y**2 * g + np.pi / y * dg_dq * (-2 * np.pi * q)
    return -f_y / (2 * y)


def _csc2(w):
    q = np.exp(2j * np.pi * w)
    return -4 * q / (1 - q) ** 2


@dataclass(frozen=True, eq=False)
class EisensteinEvaluator:
    """Truncated lattice-sum evaluator for the series of one cusp.

    Attributes
    ----------
    group : FuchsianGroupSpec
    defining_cusp : CuspRecord
    rows : BottomRowSet
        Class representatives with ``c <= C``.
    tol : float or None
        If set, evaluations whose tail bound exceeds ``tol`` raise.
    chart : MoebiusMap
        Map from the coordinate in which points are given to the coordinate
        of the defining cusp.  The identity means points are given in the
        defining cusp's own chart.

    Notes
    -----
    The sum is evaluated in the coordinate where the coset rows act by their
    integer matrices and the series is invariant under ``zeta -> zeta + 1``.
    """

    group: FuchsianGroupSpec
    defining_cusp: CuspRecord
    rows: BottomRowSet
    tol: float | None = None
    chart: MoebiusMap = field(default_factory=MoebiusMap.identity)

    def __post_init__(self):
        c, d = self.rows.arrays()
        object.__setattr__(self, "_c", c)
        object.__setattr__(self, "_d", d)
        object.__setattr__(self, "_identity_row", (0, 1) in self.rows)
        object.__setattr__(self, "_zeta4", float(np.sum(1.0 / c[::-1] ** 4)) if c.size else 0.0)

    @classmethod
    def build(cls, group: FuchsianGroupSpec, cusp: CuspRecord | None = None, cutoff: int = 200,
              tol: float | None = None, check: bool = True) -> "EisensteinEvaluator":
        """Enumerate rows and (optionally) check the tail bound against cutoff ``2C``."""
        cusp = group.cusps[0] if cusp is None else cusp
        ev = cls(group, cusp, enumerate_bottom_rows(group, cusp, cutoff), tol)
        if check and group.kind is not GroupKind.PARABOLIC_CYLINDER:
            probes = np.array([1j, 0.3 + 0.8j, 0.5 + 2.0j])
            fine = cls(group, cusp, enumerate_bottom_rows(group, cusp, 2 * cutoff))
            diff = np.abs(_raw_E(fine, probes) - _raw_E(ev, probes))
            if np.any(diff > ev.tail_bound(probes)):
                raise RuntimeError("tail bound violated at probe points")
        return ev

    def in_chart(self, cusp: CuspRecord) -> "EisensteinEvaluator":
        """The same series seen from the unit-width chart of another cusp."""
        if cusp == self.defining_cusp:
            return EisensteinEvaluator(self.group, self.defining_cusp, self.rows, self.tol)
        to_def = self.defining_cusp.normalizer.inverse() @ cusp.chart
        return EisensteinEvaluator(self.group, self.defining_cusp, self.rows, self.tol, to_def)

    @property
    def cutoff(self) -> int:
        return self.rows.cutoff

    @property
    def n_classes(self) -> int:
        return len(self._c)

    @property
    def is_defining_chart(self) -> bool:
        return self.chart == MoebiusMap.identity()

    @property
    def cusp_height(self) -> float:
        """Height above which the cusp region is precisely invariant."""
        return 0.0 if self.group.kind is GroupKind.PARABOLIC_CYLINDER else 1.0

    @property
    def tail_constant(self) -> float:
        """``K`` with tail error ``<= K (y^-2 + pi/(2y)) / C^2`` in the defining chart."""
        if self.group.kind is GroupKind.PARABOLIC_CYLINDER:
            return 0.0
        m = self.cutoff // 2
        return self.cutoff**2 / (32.0 * m * m)

    def tail_bound(self, zeta):
        """Bound on the omitted classes of ``E`` at ``zeta`` (points in this chart)."""
        y = np.imag(self._to_defining(zeta))
        return self.tail_constant / self.cutoff**2 * (1 / y**2 + np.pi / (2 * y))

    def phi_tail_bound(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        zd = self._to_defining(zeta)
        jac = np.abs(self.chart.derivative(zeta)) ** 2
        return self.tail_bound(zeta) / np.imag(zd) ** 2 * jac

    def _to_defining(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        if self.is_defining_chart:
            if np.any(zeta.imag <= 0):
                raise ValueError("points must lie in the upper half-plane")
            return zeta
        return np.asarray(apply(self.chart, zeta))

    def _guard(self, zeta, bound):
        if self.tol is not None and np.any(bound > self.tol):
            raise NeedsLargerCutoff(
                f"tail bound {np.max(bound):.3e} exceeds tolerance {self.tol:.3e}; raise C")


def _raw_E(ev: EisensteinEvaluator, zd, leading=True):
    """Sum in the defining chart (no chart map, no guard)."""
    zd = np.asarray(zd, dtype=complex)
    flat = zd.ravel()
    x, y = flat.real, flat.imag
    out = y**2 if (leading and ev._identity_row) else np.zeros_like(y)
    c, d = ev._c, ev._d
    if c.size:
        # high in the cusp every translate sum equals pi/(2 y^3) to within
        # exp(-2 pi y) < 1e-17 relative, independently of x
        high = 2 * np.pi * y > _HIGH
        out[high] += np.pi / (2 * y[high]) * ev._zeta4
        idx = np.flatnonzero(~high)
        step = max(1, _CHUNK // c.size)
        shift, c4 = d / c, c**4
        for i in range(0, idx.size, step):
            j = idx[i:i + step]
            xs = x[j, None] + shift
            ys = y[j, None]
            out[j] += np.sum(ys**2 / c4 * translate_sum(xs, ys), axis=1)
    return out.reshape(zd.shape)


def _raw_Phi(ev: EisensteinEvaluator, zd):
    zd = np.asarray(zd, dtype=complex)
    flat = zd.ravel()
    out = np.ones(flat.shape, dtype=complex) if ev._identity_row else np.zeros(flat.shape, complex)
    c, d = ev._c, ev._d
    if c.size:
        step = max(1, _CHUNK // c.size)
        shift, c4 = d / c, c**4
        for i in range(0, flat.size, step):
            k2 = _csc2(flat[i:i + step, None] + shift)
            out[i:i + step] += np.pi**4 * np.sum((k2 * k2 - (2 / 3) * k2) / c4, axis=1)
    return out.reshape(zd.shape)


def _ret(v):
    v = np.asarray(v)
    return v[()] if v.ndim == 0 else v


def eval_E2(ev: EisensteinEvaluator, zeta):
    """Value of ``E(zeta; 2)``.

    Parameters
    ----------
    ev : EisensteinEvaluator
    zeta : complex or array_like
        Points in the evaluator's chart.

    Raises
    ------
    NeedsLargerCutoff
        If ``ev.tol`` is set and the tail bound exceeds it.
    """
    zd = ev._to_defining(zeta)
    ev._guard(zeta, ev.tail_bound(zeta))
    return _ret(_raw_E(ev, zd))


def eval_e_hat(ev: EisensteinEvaluator, zeta):
    """Remainder ``E - delta y^2`` after the leading cusp term.

    In the defining chart this is the sum over classes with ``c > 0``; in the
    chart of another cusp there is no leading term and the whole series is
    returned.
    """
    zd = ev._to_defining(zeta)
    ev._guard(zeta, ev.tail_bound(zeta))
    return _ret(_raw_E(ev, zd, leading=not ev.is_defining_chart))


def eval_E_star(ev: EisensteinEvaluator, zeta):
    """``E`` with ``y^2`` removed in the defining cusp region ``Im zeta > height``."""
    zeta = np.asarray(zeta, dtype=complex)
    full = np.asarray(eval_E2(ev, zeta))
    if not ev.is_defining_chart:
        return _ret(full)
    region = zeta.imag > ev.cusp_height
    return _ret(np.where(region, full - zeta.imag**2, full))


def eval_Phi4(ev: EisensteinEvaluator, zeta):
    """Holomorphic weight-four series ``sum (c zeta + d)^-4``.

    In a chart other than the defining one the coefficient of ``(d zeta)^2``
    is pulled back through the chart map.
    """
    zeta = np.asarray(zeta, dtype=complex)
    zd = ev._to_defining(zeta)
    ev._guard(zeta, ev.phi_tail_bound(zeta))
    val = _raw_Phi(ev, zd)
    if not ev.is_defining_chart:
        val = val * ev.chart.derivative(zeta) ** 2
    return _ret(val)


def theta_average(ev: EisensteinEvaluator, y: float, n: int = 64) -> float:
    """Average of ``E`` over the horocycle ``Im zeta = y`` (trapezoid rule)."""
    x = np.arange(n) / n
    return float(np.mean(eval_E2(ev, x + 1j * y)))


def eigen_residual(ev: EisensteinEvaluator, zeta, h: float = 1e-3):
    """``|D E - 2 E|`` with ``D = y^2 (d_xx + d_yy)`` by a five-point stencil of step ``h y``."""
    zeta = np.asarray(zeta, dtype=complex)
    y = zeta.imag
    s = h * y
    f0 = np.asarray(eval_E2(ev, zeta))
    lap = (np.asarray(eval_E2(ev, zeta + s)) + np.asarray(eval_E2(ev, zeta - s))
           + np.asarray(eval_E2(ev, zeta + 1j * s)) + np.asarray(eval_E2(ev, zeta - 1j * s))
           - 4 * f0) / s**2
    return _ret(np.abs(y**2 * lap - 2 * f0))


def ball_average(ev: EisensteinEvaluator, zeta0: complex, radius: float,
                 n_r: int = 24, n_phi: int = 64) -> float:
    """Hyperbolic-area average of ``E`` over the ball of ``radius`` about ``zeta0``.

    For an eigenfunction with eigenvalue 2 this equals
    ``E(zeta0) (cosh R + 1) / 2``.
    """
    zeta0 = complex(zeta0)
    xr, wr = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * radius * (xr + 1)
    wr = 0.5 * radius * wr * np.sinh(r)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    w = np.tanh(r / 2)[:, None] * np.exp(1j * phi)[None, :]
    pts = zeta0.real + zeta0.imag * 1j * (1 + w) / (1 - w)
    circle = np.mean(eval_E2(ev, pts), axis=1)
    return float(np.sum(wr * circle) / (np.cosh(radius) - 1))


# ---------------------------------------------------------------------------
# truncation and melding


@dataclass(frozen=True)
class TruncationContext:
    """Plumbing data and the role the evaluator's cusp plays."""

    config: PlumbingConfig
    role: Role = Role.DEFINING

    def __post_init__(self):
        if not isinstance(self.config, PlumbingConfig):
            raise TypeError("config must be a PlumbingConfig")
        object.__setattr__(self, "role", Role(self.role))


def _chi_args(ctx: TruncationContext, y):
    cfg = ctx.config
    a = -2 * np.pi * y
    first = a - cfg.log_c_star
    second = a + cfg.log_c_star - cfg.log_abs_t + cfg.a0
    return first, second


def _check_ctx(ev: EisensteinEvaluator, ctx: TruncationContext):
    if (ctx.role is Role.DEFINING) != ev.is_defining_chart:
        raise ValueError("truncation role does not match the evaluator's chart")
    band_low = -ctx.config.log_c_star / (2 * np.pi)
    if band_low < ev.cusp_height:
        raise ValueError("collar band reaches below the cusp region; lower c_star")


def truncate_sharp(ev: EisensteinEvaluator, ctx: TruncationContext, zeta):
    """Special truncation ``E#`` in a cusp region.

    Defining cusp:  ``chi(-2 pi y - log c*) y^2 + chi(-2 pi y + log(c*/|t|) + a0) e_hat``.
    Remaining cusp: ``chi(-2 pi y + log(c*/|t|) + a0) E``.
    Below the cusp region ``E`` is returned unmodified.
    """
    _check_ctx(ev, ctx)
    zeta = np.asarray(zeta, dtype=complex)
    y = zeta.imag
    first, second = _chi_args(ctx, y)
    cut = ctx.config.cutoff
    if ctx.role is Role.DEFINING:
        mod = cut.chi(first) * y**2 + cut.chi(second) * eval_e_hat(ev, zeta)
    else:
        mod = cut.chi(second) * eval_E2(ev, zeta)
    region = y > ev.cusp_height
    if np.all(region):
        return _ret(mod)
    return _ret(np.where(region, mod, eval_E2(ev, zeta)))


@dataclass(frozen=True)
class CuspSide:
    """Evaluator and role for one side of a plumbing collar.

    A side given as ``None`` in :func:`meld_dagger` belongs to a component
    without the defining cusp; the series is extended by zero there.
    """

    evaluator: EisensteinEvaluator
    role: Role = Role.DEFINING


def _cusp_coordinate(z):
    """``zeta`` with ``z = exp(2 pi i zeta)``."""
    z = np.asarray(z, dtype=complex)
    return np.angle(z) / (2 * np.pi) - 1j * np.log(np.abs(z)) / (2 * np.pi)


def _side_value(side: CuspSide | None, config: PlumbingConfig, z):
    if side is None:
        return np.zeros(np.shape(z))
    ctx = TruncationContext(config, side.role)
    return np.asarray(truncate_sharp(side.evaluator, ctx, _cusp_coordinate(z)), dtype=float)


def meld_dagger(z_side: CuspSide | None, w_side: CuspSide | None, config: PlumbingConfig, z):
    """Melding ``E-dagger`` at points given in the z cusp coordinate.

    On the identified annulus ``|t|/c* < |z| < c*`` the values of ``E#`` at
    ``z`` and at ``w = t/z`` are added; for ``c* <= |z| < 1`` only the z side
    contributes.
    """
    z = np.asarray(z, dtype=complex)
    u = np.log(np.abs(z))
    L, lc = config.log_abs_t, config.log_c_star
    if np.any(u <= L - lc) or np.any(u >= 0):
        raise DomainError("point lies in no chart of the collar")
    out = _side_value(z_side, config, z)
    inner = u < lc
    if np.any(inner):
        zi = z[inner] if z.ndim else z
        # w = t/z computed through logs so that tiny |t| does not underflow
        w = np.exp(L - np.log(np.abs(zi)) + 1j * (config.phase - np.angle(zi)))
        wv = _side_value(w_side, config, w)
        if z.ndim:
            out = out.copy()
            out[inner] += wv
        else:
            out = out + wv
    return _ret(out)


# ---------------------------------------------------------------------------
# the decomposition (D_t - 2) E# = A + B + C on a cusp chart


def decomposition_fields(ev: EisensteinEvaluator, ctx: TruncationContext, y, x=0.0, dy=1e-5):
    """Fields ``A``, ``B``, ``C`` and ``Lambda/(4 pi^2)`` along ``Im zeta = y``.

    ``A = ((sin Theta/Theta)^2 - 1) 2 E#``, ``B`` collects the derivatives of
    the first cutoff acting on ``y^2`` and ``C`` those of the second cutoff
    acting on ``e_hat`` (or on ``E`` for a remaining cusp).
    """
    _check_ctx(ev, ctx)
    cfg = ctx.config
    cut = cfg.cutoff
    y = np.asarray(y, dtype=float)
    zeta = x + 1j * y
    L = cfg.log_abs_t
    th = -2 * np.pi**2 * y / L
    sc = (np.sin(th) / th) ** 2
    first, second = _chi_args(ctx, y)
    defining = ctx.role is Role.DEFINING
    rem = eval_e_hat(ev, zeta) if defining else eval_E2(ev, zeta)
    h = dy * np.maximum(1.0, y)
    rem_y = ((eval_e_hat if defining else eval_E2)(ev, zeta + 1j * h)
             - (eval_e_hat if defining else eval_E2)(ev, zeta - 1j * h)) / (2 * h)
    n2, n2y, n2yy = (cut.eta(second), -2 * np.pi * cut.eta_prime(second),
                     4 * np.pi**2 * cut.eta_second(second))
    if defining:
        n1, n1y, n1yy = (cut.eta(first), -2 * np.pi * cut.eta_prime(first),
                         4 * np.pi**2 * cut.eta_second(first))
        esharp = (1 - n1) * y**2 + (1 - n2) * rem
        B = -sc * (4 * y**3 * n1y + y**4 * n1yy)
        a = -2 * np.pi * y
        lam = (4 * a**3 * cut.eta_prime(first) + a**4 * cut.eta_second(first)) / (4 * np.pi**2)
    else:
        esharp = (1 - n2) * rem
        B = np.zeros_like(y)
        lam = np.zeros_like(y)
    A = (sc - 1) * 2 * esharp
    C = -sc * (2 * y**2 * rem_y * n2y + y**2 * rem * n2yy)
    return {"A": A, "B": B, "C": C, "lambda": lam, "esharp": esharp}


def _emeld_grid(ev, cfg, n_band, n_bulk, scale=1):
    lo = ev.cusp_height if ev.cusp_height > 0 else -cfg.log_c_star / (2 * np.pi) / 2
    hi = (cfg.log_c_star - cfg.log_abs_t) / (2 * np.pi)
    bands = []
    for u0, u1 in (cfg.primary_band, cfg.secondary_band):
        # u = log|z| = -2 pi y
        bands.append(np.linspace(-u1 / (2 * np.pi), -u0 / (2 * np.pi), scale * (n_band - 1) + 1))
    bulk = np.linspace(lo, hi, scale * (n_bulk - 1) + 1)
    y = np.unique(np.concatenate([bulk] + bands))
    return y[(y >= lo) & (y <= hi)]


def emeld_residual(ev: EisensteinEvaluator, configs, role: Role = Role.DEFINING,
                   n_band: int = 257, n_bulk: int = 1025, xs=(0.0, 0.25, 0.5, 0.75),
                   rtol: float = 0.02, details: bool = False):
    """Rates of the fields of ``(D_t - 2) E#`` across a ladder of ``t``.

    For each configuration the sup-norms of ``A``, ``B + Lambda/(4 pi^2)`` and
    ``C`` are taken over the cusp chart from the cusp height to
    ``|z| = |t|/c*`` and fitted against ``1/(-log|t|)``.  A field that is
    identically zero along the ladder yields ``None`` instead of a fit.

    Returns
    -------
    fit_A, fit_B, fit_C : RateFit or None
        With ``details=True`` the per-point rows follow.
    """
    rows = []
    for cfg in configs:
        ctx = TruncationContext(cfg, role)
        sups = []
        for scale in (1, 2):
            y = _emeld_grid(ev, cfg, n_band, n_bulk, scale)
            sa = sb = sc_ = 0.0
            for x in xs:
                f = decomposition_fields(ev, ctx, y, x)
                sa = max(sa, float(np.max(np.abs(f["A"]))))
                sb = max(sb, float(np.max(np.abs(f["B"] + f["lambda"]))))
                sc_ = max(sc_, float(np.max(np.abs(f["C"]))))
            sups.append((sa, sb, sc_))
        for coarse, fine in zip(*sups):
            if abs(coarse - fine) > rtol * max(abs(fine), 1e-300):
                raise UnderResolvedError(
                    f"chart grid does not resolve the bands at log|t|={cfg.log_abs_t}")
        sa, sb, sc_ = sups[1]
        rows.append({"log_abs_t": cfg.log_abs_t, "x": 1 / -cfg.log_abs_t,
                     "sup_A": sa, "sup_B": sb, "sup_C": sc_})
    fits = []
    for key in ("sup_A", "sup_B", "sup_C"):
        vals = [r[key] for r in rows]
        fits.append(fit_rate([r["x"] for r in rows], vals) if min(vals) > 0 else None)
    return (*fits, rows) if details else tuple(fits)


# ---------------------------------------------------------------------------
# geodesics


@dataclass(frozen=True)
class GeodesicSegment:
    """Unit-speed geodesic ``s -> zeta(s)``, ``s0 <= s <= s1``.

    A semicircle from ``p`` to ``q`` is parameterized by
    ``zeta(s) = (q w + p)/(w + 1)``, ``w = i e^s``, so ``s = 0`` is its top;
    a vertical line ``Re zeta = p`` by ``zeta(s) = p + i e^s``.  ``closed``
    marks a full period of a closed geodesic, where the integrand is periodic.
    """

    p: float
    q: float
    s0: float
    s1: float
    vertical: bool = False
    n_samples: int = 32
    closed: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.s0) and np.isfinite(self.s1) and self.s1 > self.s0):
            raise ValueError("parameter interval must be nondegenerate")
        if not self.vertical and not (np.isfinite(self.p) and np.isfinite(self.q)
                                      and self.p != self.q):
            raise ValueError("endpoints must be distinct and finite")
        if self.n_samples < 2:
            raise ValueError("need at least 2 samples")

    @classmethod
    def from_hyperbolic(cls, m: MoebiusMap, periods: int = 1, n_samples: int = 32):
        """One or more primitive periods along the axis of a hyperbolic map."""
        p, q = m.fixed_points()
        ell = 2 * math.acosh(abs(m.trace) / 2)
        return cls(p, q, -periods * ell / 2, periods * ell / 2, False, n_samples, True)

    @classmethod
    def vertical_line(cls, x0: float, y0: float, y1: float, n_samples: int = 32):
        return cls(x0, math.nan, math.log(y0), math.log(y1), True, n_samples, False)

    @property
    def length(self) -> float:
        return self.s1 - self.s0

    def point(self, s):
        s = np.asarray(s, dtype=float)
        if self.vertical:
            return self.p + 1j * np.exp(s)
        w = 1j * np.exp(s)
        return (self.q * w + self.p) / (w + 1)

    def velocity(self, s):
        s = np.asarray(s, dtype=float)
        if self.vertical:
            return 1j * np.exp(s)
        w = 1j * np.exp(s)
        return (self.q - self.p) * w / (w + 1) ** 2


def _integrand(ev, segment: GeodesicSegment, kind: IntegrandKind):
    def f(s):
        z = segment.point(s)
        if kind is IntegrandKind.E_DS:
            if callable(ev) and not isinstance(ev, EisensteinEvaluator):
                return np.asarray(ev(z), dtype=float)
            return np.asarray(eval_E2(ev, z), dtype=float)
        v = segment.velocity(s)
        phi = ev(z) if callable(ev) and not isinstance(ev, EisensteinEvaluator) else eval_Phi4(ev, z)
        return phi * v**2 * (z.imag / np.abs(v))
    return f


def geodesic_line_integral(ev, segment: GeodesicSegment, kind=IntegrandKind.E_DS,
                           tol: float = 1e-10, max_points: int = 1 << 14):
    """Line integral of ``E ds`` or ``Phi (d zeta)^2 (ds)^-1`` along a geodesic.

    Closed periods use the trapezoid rule (spectrally accurate for periodic
    integrands); open segments use composite Gauss-Legendre panels.  The
    number of nodes doubles until successive values agree within ``tol``
    (relative to ``max(1, |I|)``).

    Returns
    -------
    float for ``E_ds``; complex for ``Phi_over_ds`` (the identity with ``E``
    concerns its real part).
    """
    kind = IntegrandKind(kind)
    f = _integrand(ev, segment, kind)
    prev = None
    if segment.closed:
        n = segment.n_samples
        while n <= max_points:
            s = segment.s0 + segment.length * np.arange(n) / n
            val = np.sum(f(s)) * segment.length / n
            if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
                return float(val) if kind is IntegrandKind.E_DS else complex(val)
            prev, n = val, 2 * n
    else:
        xg, wg = np.polynomial.legendre.leggauss(16)
        panels = max(1, segment.n_samples // 16)
        while panels * 16 <= max_points:
            edges = np.linspace(segment.s0, segment.s1, panels + 1)
            half = np.diff(edges) / 2
            s = (edges[:-1, None] + half[:, None] * (xg[None, :] + 1)).ravel()
            w = (half[:, None] * wg[None, :]).ravel()
            val = np.sum(w * f(s))
            if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
                return float(val) if kind is IntegrandKind.E_DS else complex(val)
            prev, panels = val, 2 * panels
    raise QuadratureError(f"line integral did not reach tolerance {tol:g}")


def length_correction_coefficient(ev1, ev2, segment: GeodesicSegment,
                                  collar_height: float | None = None, tol: float = 1e-10) -> float:
    """Coefficient ``(1/6) int (E_1 + E_2) ds`` of ``l_k^2`` in the length expansion.

    Either evaluator may be ``None`` (series extended by zero).  If
    ``collar_height`` is given the segment must stay strictly below it.
    """
    if collar_height is not None:
        s = np.linspace(segment.s0, segment.s1, 257)
        if np.max(segment.point(s).imag) >= collar_height:
            raise ValueError("segment enters the collar")
    total = 0.0
    for ev in (ev1, ev2):
        if ev is not None:
            total += geodesic_line_integral(ev, segment, IntegrandKind.E_DS, tol)
    return total / 6


def tz_pairing(ev, mu: Callable, nu: Callable, domain, n: int = 48, tol: float = 1e-9) -> complex:
    """``int mu conj(nu) E dA`` over a rectangle of the upper half-plane.

    Parameters
    ----------
    ev : EisensteinEvaluator, callable or None
        The weight ``E``; ``None`` gives the unweighted pairing.
    mu, nu : callable
        Functions of ``zeta`` (arrays in, complex arrays out).
    domain : (x0, x1, y0, y1)
        Rectangle with ``0 < y0 < y1``; ``dA = dx dy / y^2``.
    n : int
        Gauss-Legendre nodes per direction; the rule is repeated with ``2n``
        nodes and the two values must agree within ``tol``.
    """
    x0, x1, y0, y1 = (float(v) for v in domain)
    if not (x1 > x0 and y1 > y0 > 0):
        raise ValueError("domain must be a rectangle in the upper half-plane")

    def rule(m):
        xg, wg = np.polynomial.legendre.leggauss(m)
        xs = 0.5 * (x1 - x0) * (xg + 1) + x0
        ys = 0.5 * (y1 - y0) * (xg + 1) + y0
        Z = xs[:, None] + 1j * ys[None, :]
        W = np.outer(wg * 0.5 * (x1 - x0), wg * 0.5 * (y1 - y0)) / ys[None, :] ** 2
        if ev is None:
            weight = 1.0
        elif isinstance(ev, EisensteinEvaluator):
            weight = eval_E2(ev, Z)
        else:
            weight = ev(Z)
        return complex(np.sum(W * mu(Z) * np.conj(nu(Z)) * weight))

    a, b = rule(n), rule(2 * n)
    if abs(a - b) > tol * max(1.0, abs(b)):
        raise QuadratureError(f"pairing quadrature unresolved: {a} vs {b}")
    return b
