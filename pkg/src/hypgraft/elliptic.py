"""Laplace-Beltrami operator and the (D - 2) problem on annular charts.

``D = lam^-1 Laplace`` for ``ds^2 = lam |dz|^2``; on the log-polar lattice
``D = exp(-mu) (d_uu + d_theta_theta)`` with ``mu = log lam + 2u``.  The
sign convention gives ``D y^2 = 2 y^2`` for the hyperbolic half-plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .eisenstein import CuspSide, EisensteinEvaluator, meld_dagger
from .metrics import (ConformalMetricField, PlumbingConfig, UnderResolvedError,
                      graft_curvature_model, graft_field, graft_log_ratio)
from .moebius import FuchsianGroupSpec
from .rates import RateFit, fit_rate

__all__ = [
    "HelmholtzProblem",
    "ExpansionReport",
    "CorrectionReport",
    "SingularDiscretization",
    "apply_laplace_beltrami",
    "solve_helmholtz",
    "annulus_melding",
    "annulus_expansion_check",
    "correction_solve_check",
    "manufactured_order",
]


class SingularDiscretization(RuntimeError):
    """The discrete (D - 2) operator could not be factorized or solved."""


def apply_laplace_beltrami(metric: ConformalMetricField, u) -> np.ndarray:
    """Second-order discrete ``D u`` on the interior rows of the grid.

    Returns
    -------
    ndarray, shape (n_u - 2, n_theta)
    """
    u = np.asarray(u, dtype=float)
    if u.shape != metric.shape:
        raise ValueError(f"u has shape {u.shape}, expected {metric.shape}")
    if metric.shape[0] < 3:
        raise ValueError("need at least 3 u samples")
    h, k = metric.h, metric.k
    uuu = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
    mid = u[1:-1]
    utt = (np.roll(mid, -1, axis=1) - 2 * mid + np.roll(mid, 1, axis=1)) / k**2
    return np.exp(-metric.mu[1:-1]) * (uuu + utt)


@dataclass(frozen=True, eq=False)
class HelmholtzProblem:
    """``(D - 2) u = f`` with Dirichlet data on the two boundary circles.

    ``source`` lives on the full grid (its boundary rows are ignored);
    ``boundary`` holds the values on the inner (first) and outer (last) rows.
    """

    metric: ConformalMetricField
    source: np.ndarray
    boundary: tuple = (0.0, 0.0)

    def __post_init__(self):
        n_u, n_t = self.metric.shape
        f = np.asarray(self.source, dtype=float)
        if f.ndim == 1:
            f = np.repeat(f[:, None], n_t, axis=1)
        if f.shape != (n_u, n_t):
            raise ValueError("source does not conform to the metric grid")
        inner, outer = (np.broadcast_to(np.asarray(b, dtype=float), (n_t,)).copy()
                        for b in self.boundary)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(inner))
                and np.all(np.isfinite(outer))):
            raise ValueError("source and boundary data must be finite")
        if n_u < 3:
            raise ValueError("need at least 3 u samples")
        object.__setattr__(self, "source", f)
        object.__setattr__(self, "boundary", (inner, outer))


def _assemble(metric: ConformalMetricField):
    """Row-scaled operator ``Laplace - 2 exp(mu)`` on interior unknowns."""
    n_u, n_t = metric.shape
    h, k = metric.h, metric.k
    m = n_u - 2
    emu = np.exp(metric.mu[1:-1]).ravel()
    idx = np.arange(m * n_t).reshape(m, n_t)
    rows, cols, vals = [], [], []
    diag = -2 / h**2 - (2 / k**2 if n_t > 1 else 0.0) - 2 * emu
    rows.append(idx.ravel()), cols.append(idx.ravel()), vals.append(diag)
    # radial neighbours
    rows.append(idx[1:].ravel()), cols.append(idx[:-1].ravel()), vals.append(np.full(idx[1:].size, 1 / h**2))
    rows.append(idx[:-1].ravel()), cols.append(idx[1:].ravel()), vals.append(np.full(idx[1:].size, 1 / h**2))
    if n_t > 1:
        for shift in (1, -1):
            rows.append(idx.ravel())
            cols.append(np.roll(idx, shift, axis=1).ravel())
            vals.append(np.full(idx.size, 1 / k**2))
    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(m * n_t, m * n_t))
    return A, emu


def solve_helmholtz(problem: HelmholtzProblem, rtol: float = 1e-10) -> np.ndarray:
    """Solve the discrete ``(D - 2) u = f`` by sparse LU factorization.

    The relative residual ``|A u - b| / (|A| |u| + |b|)`` must not exceed
    ``rtol``.

    Returns
    -------
    ndarray, shape (n_u, n_theta)
        Solution including the boundary rows.
    """
    metric = problem.metric
    n_u, n_t = metric.shape
    h = metric.h
    A, emu = _assemble(metric)
    inner, outer = problem.boundary
    b = emu * problem.source[1:-1].ravel()
    b = b.reshape(n_u - 2, n_t)
    b[0] -= inner / h**2
    b[-1] -= outer / h**2
    b = b.ravel()
    try:
        lu = spla.splu(A)
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SingularDiscretization(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularDiscretization("non-finite solution")
    r = A @ x - b
    scale = spla.norm(A, np.inf) * np.max(np.abs(x)) + np.max(np.abs(b))
    if scale > 0 and np.max(np.abs(r)) > rtol * scale:
        raise SingularDiscretization("linear solve did not reach the residual tolerance")
    out = np.empty((n_u, n_t))
    out[0], out[-1] = inner, outer
    out[1:-1] = x.reshape(n_u - 2, n_t)
    return out


# ---------------------------------------------------------------------------
# the annulus model: two punctured discs plumbed together


def annulus_melding(config: PlumbingConfig, u, evaluator: EisensteinEvaluator | None = None):
    """``E-dagger_1 + E-dagger_2`` of the annulus model along ``u = log|z|``.

    Each disc carries the series of its own cusp, which is ``y^2`` for the
    integer translations, extended by zero across the collar.  Points with
    ``u < log|t|/2`` are evaluated from the w-chart.
    """
    ev = evaluator or EisensteinEvaluator.build(FuchsianGroupSpec.parabolic_cylinder())
    side = CuspSide(ev)
    u = np.asarray(u, dtype=float)
    L = config.log_abs_t
    out = np.empty_like(u)
    zpart = u >= L / 2
    z = np.exp(u[zpart] + 0j)
    out[zpart] = meld_dagger(side, None, config, z) + meld_dagger(None, side, config, z)
    w = np.exp((L - u[~zpart]) + 1j * config.phase)
    out[~zpart] = meld_dagger(None, side, config, w) + meld_dagger(side, None, config, w)
    return out


@dataclass(frozen=True)
class ExpansionReport:
    """Residuals of the metric expansion along a ladder of ``t``.

    ``log_abs_t`` is sorted by decreasing ``|t|``; ``residuals_refined`` are
    the same residuals on a grid of half the spacing.
    """

    log_abs_t: tuple[float, ...]
    residuals: tuple[float, ...]
    residuals_refined: tuple[float, ...]
    fit: RateFit

    @property
    def max_refinement_change(self) -> float:
        r, f = np.array(self.residuals), np.array(self.residuals_refined)
        return float(np.max(np.abs(r - f) / f))


def _expansion_residual(config: PlumbingConfig, n: int, ev) -> float:
    L = config.log_abs_t
    u = L + (np.arange(n) + 0.5) * (-L) / n
    ratio_m1 = np.expm1(graft_log_ratio(config, u))
    melded = annulus_melding(config, u, ev)
    model = (4 * math.pi**4 / 3) / L**2 * melded
    return float(np.max(np.abs(ratio_m1 - model)))


def annulus_expansion_check(configs, n_u: int = 1 << 14, max_change: float = 0.25,
                            evaluator: EisensteinEvaluator | None = None) -> ExpansionReport:
    """Compare the exact annulus metric with the melded-series expansion.

    For each ``t`` the residual is
    ``sup |lam_t/lam_g - 1 - (4 pi^4/3) (log|t|)^-2 (E-dagger_1 + E-dagger_2)|``
    over a cell-centred grid of the whole annulus ``log|t| < u < 0``; it is
    recomputed with ``2 n_u`` cells and the two must agree within
    ``max_change``.
    """
    configs = sorted(configs, key=lambda c: -c.log_abs_t)
    ev = evaluator or EisensteinEvaluator.build(FuchsianGroupSpec.parabolic_cylinder())
    res, ref = [], []
    for cfg in configs:
        r1 = _expansion_residual(cfg, n_u, ev)
        r2 = _expansion_residual(cfg, 2 * n_u, ev)
        if abs(r1 - r2) > max_change * r2:
            raise UnderResolvedError(f"expansion residual unresolved at log|t|={cfg.log_abs_t}")
        res.append(r1)
        ref.append(r2)
    x = [1 / -c.log_abs_t for c in configs]
    return ExpansionReport(tuple(c.log_abs_t for c in configs), tuple(res), tuple(ref),
                           fit_rate(x, ref))


@dataclass(frozen=True)
class CorrectionReport:
    """Outcome of the curvature-correction solves along a ladder."""

    rows: tuple[dict, ...]
    fit: RateFit

    @property
    def max_principle_ok(self) -> bool:
        return all(r["max_principle_ok"] for r in self.rows)


def _correction_fields(config: PlumbingConfig, n: int, b: float, n_theta: int):
    L = config.log_abs_t
    u = np.linspace(L + b, -b, n)
    metric = graft_field(config, u, n_theta)
    f = 1 + graft_curvature_model(config, u)
    ratio = np.exp(graft_log_ratio(config, u))
    return metric, f, ratio


def _correction_solve(config, n, b, n_theta):
    metric, f, ratio = _correction_fields(config, n, b, n_theta)
    bdry = ((ratio[0] - 1) / 2, (ratio[-1] - 1) / 2)
    sol = solve_helmholtz(HelmholtzProblem(metric, f, bdry))
    return metric, f, ratio, sol, bdry


def correction_solve_check(configs, n_u: int = 1 << 15, n_theta: int = 4, b: float = 0.5,
                           skip_rows: int = 2) -> CorrectionReport:
    """Solve ``(D_g - 2) u = 1 + K_g`` on the grafted annulus model.

    Dirichlet data ``(lam_t/lam_g - 1)/2`` is imposed on the circles
    ``u = log|t| + b`` and ``u = -b``.  The second-order solutions on grids of
    spacing ``h`` and ``h/2`` are combined by Richardson extrapolation, and the
    reconstruction residual ``sup |1 + 2u - lam_t/lam_g|`` is reported together
    with the maximum-principle bound ``sup|u| <= sup|f|/2 + sup|boundary|``.
    ``n_u`` is the number of cells of the coarse grid.
    """
    configs = sorted(configs, key=lambda c: -c.log_abs_t)
    rows = []
    for cfg in configs:
        _, f1, r1, s1, _ = _correction_solve(cfg, n_u + 1, b, n_theta)
        _, f2, r2, s2, bd = _correction_solve(cfg, 2 * n_u + 1, b, n_theta)
        ex = (4 * s2[::2] - s1) / 3
        keep = slice(skip_rows, -skip_rows)
        res = float(np.max(np.abs(1 + 2 * ex[keep] - r1[keep, None])))
        res_h = float(np.max(np.abs(1 + 2 * s1[keep] - r1[keep, None])))
        res_h2 = float(np.max(np.abs(1 + 2 * s2[keep] - r2[keep, None])))
        sup_u = float(np.max(np.abs(s2)))
        bound = float(np.max(np.abs(f2[1:-1]))) / 2 + max(abs(bd[0]), abs(bd[1]))
        rows.append({"log_abs_t": cfg.log_abs_t, "residual": res, "residual_h": res_h,
                     "residual_h2": res_h2, "sup_u": sup_u, "bound": bound,
                     "max_principle_ok": bool(sup_u <= bound * (1 + 1e-12))})
    fit = fit_rate([1 / -r["log_abs_t"] for r in rows], [r["residual"] for r in rows])
    return CorrectionReport(tuple(rows), fit)


def manufactured_order(config: PlumbingConfig, n_u: int = 512, n_theta: int = 16,
                       b: float = 0.5) -> dict:
    """Observed order of the (D - 2) solver on the grafted annulus metric.

    With ``u* = sin(pi s)(1 + cos(theta)/4)``, ``s`` the normalized radial
    coordinate, the source ``(D - 2) u*`` is formed analytically and the
    discrete solution compared with ``u*`` on a grid with ``n_u x n_theta``
    cells and on one refined by two in both directions.
    """
    L = config.log_abs_t
    lo, hi = L + b, -b
    errs = []
    for n, m in ((n_u + 1, n_theta), (2 * n_u + 1, 2 * n_theta)):
        u = np.linspace(lo, hi, n)
        metric = graft_field(config, u, m)
        th = metric.theta[None, :]
        s = (u[:, None] - lo) / (hi - lo)
        w = math.pi / (hi - lo)
        exact = np.sin(math.pi * s) * (1 + np.cos(th) / 4)
        lap = -w**2 * np.sin(math.pi * s) * (1 + np.cos(th) / 4) - np.sin(math.pi * s) * np.cos(th) / 4
        f = np.exp(-metric.mu) * lap - 2 * exact
        sol = solve_helmholtz(HelmholtzProblem(metric, f, (0.0, 0.0)))
        errs.append(float(np.max(np.abs(sol - exact))))
    return {"error_h": errs[0], "error_h2": errs[1], "ratio": errs[0] / errs[1],
            "order": math.log2(errs[0] / errs[1])}
