"""Collar integrals, model Beltrami pairings and the block-matrix asymptotics
behind the Weil-Petersson metric near a degenerate surface.

On the collar ``|t| < |z| < 1`` the model quadratic differentials are
``z^alpha (dz/z)^2``.  The dual pairing of the pinching direction with
``(dz/z)^2`` gives ``-pi/t``, and the norm of ``(dz/z)^2`` grows like
``(-log|t|)^3 / pi``.  Inverting the resulting Gram matrix yields the metric
coefficient ``pi^3 / (|t|^2 (-log|t|)^3)`` to leading order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .metrics import septic_smoothstep, septic_smoothstep_prime
from .rates import RateFit, fit_rate

__all__ = [
    "QuadratureError",
    "AliasingError",
    "CollarIntegralSpec",
    "CollarIntegral",
    "VariationProfile",
    "BlockMatrixSpec",
    "collar_norm_integral",
    "collar_norm_closed_form",
    "beltrami_pairing",
    "laurent_constant_coefficient",
    "laurent_modes",
    "block_asymptotics_check",
    "perturbed_inverse_residual",
    "perturbed_inverse_check",
    "dual_transfer_check",
    "wp_metric",
    "wp_leading_term",
    "normal_form_check",
]


class QuadratureError(RuntimeError):
    """Quadrature did not meet its tolerance."""


class AliasingError(ValueError):
    """Circle samples carry energy in the highest resolved modes."""


# ---------------------------------------------------------------------------
# collar integrals


@dataclass(frozen=True)
class CollarIntegralSpec:
    """Norm integral of ``z^alpha (dz/z)^2`` over ``|t|/c* < |z| < c*``."""

    t: complex
    c_star: float = math.exp(-1.0)
    alpha: int = 0

    def __post_init__(self):
        t = complex(self.t)
        object.__setattr__(self, "t", t)
        if not 0 < self.c_star < 1:
            raise ValueError("c_star must lie in (0, 1)")
        if not 0 < abs(t) < self.c_star**2:
            raise ValueError("need 0 < |t| < c_star**2")
        if int(self.alpha) != self.alpha:
            raise ValueError("alpha must be an integer")
        object.__setattr__(self, "alpha", int(self.alpha))

    @property
    def log_abs_t(self) -> float:
        return math.log(abs(self.t))


@dataclass(frozen=True)
class CollarIntegral:
    value: float
    abserr: float
    closed_form: float | None = None


def collar_norm_closed_form(t, c_star: float = math.exp(-1.0)) -> float:
    """Exact ``alpha = 0`` value ``(2/pi)(-L^3)(1/2 - e + sin(2 pi e)/(2 pi))``, ``e = log c*/L``."""
    L = math.log(abs(complex(t)))
    e = math.log(c_star) / L
    return 2 / math.pi * (-L**3) * (0.5 - e + math.sin(2 * math.pi * e) / (2 * math.pi))


def collar_norm_integral(spec: CollarIntegralSpec, rtol: float = 1e-12) -> CollarIntegral:
    """``(2/pi) int (L sin(pi v/L))^2 e^(2 alpha v) dv`` over ``L - log c* < v < log c*``.

    ``v = log r`` and ``L = log|t|``.  For ``alpha = 0`` the closed form is
    returned alongside.
    """
    L = spec.log_abs_t
    lc = math.log(spec.c_star)
    al = spec.alpha

    def f(v):
        return (L * math.sin(math.pi * v / L)) ** 2 * math.exp(2 * al * v)

    val, err = integrate.quad(f, L - lc, lc, epsabs=0.0, epsrel=rtol, limit=400)
    val, err = 2 / math.pi * val, 2 / math.pi * err
    if not err <= 10 * rtol * abs(val):
        raise QuadratureError(f"collar integral error estimate {err:.3e} too large")
    closed = collar_norm_closed_form(spec.t, spec.c_star) if al == 0 else None
    return CollarIntegral(val, err, closed)


# ---------------------------------------------------------------------------
# model Beltrami pairing


@dataclass(frozen=True)
class VariationProfile:
    """Radial profile ``rho`` rising from 0 to 1 on ``[lo, hi]`` (septic smoothstep)."""

    lo: float = 0.2
    hi: float = 0.8

    def __post_init__(self):
        if not 0 < self.lo < self.hi < 1:
            raise ValueError("need 0 < lo < hi < 1")

    def rho(self, x):
        return septic_smoothstep((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo))

    def rho_prime(self, x):
        w = self.hi - self.lo
        return septic_smoothstep_prime((np.asarray(x, dtype=float) - self.lo) / w) / w


def beltrami_pairing(t, profile: VariationProfile = VariationProfile(), alpha: int = 0,
                     n_theta: int = 64, rtol: float = 1e-12) -> complex:
    """Pair the model pinching Beltrami differential with ``z^alpha (dz/z)^2``.

    With ``beta_dot(r) = rho(log r / log|t|) / (t log|t|)`` the Beltrami
    differential is ``(z / 2 zbar) d/dlog r (beta_dot log r) dzbar/dz``; in
    ``(v = log r, theta)`` the integrand over ``|t| < |z| < 1`` becomes
    ``(1/2) e^(alpha v) e^(i alpha theta) d/dv(beta_dot v) dv dtheta``.  The
    ``v`` integral is done adaptively, the ``theta`` integral by the
    trapezoid rule on ``n_theta`` points (exact for ``|alpha| < n_theta``).
    """
    t = complex(t)
    if not 0 < abs(t) < 1:
        raise ValueError("need 0 < |t| < 1")
    L = math.log(abs(t))
    lo, hi = profile.lo * L, profile.hi * L

    def g(v):
        x = v / L
        return 0.5 * math.exp(alpha * v) * (float(profile.rho(x)) + x * float(profile.rho_prime(x)))

    val, err = integrate.quad(g, L, 0.0, points=sorted([lo, hi]), epsabs=0.0, epsrel=rtol,
                              limit=400)
    if err > 10 * rtol * max(abs(val), 1e-300) and err > 1e-14:
        raise QuadratureError("pairing quadrature did not converge")
    # trapezoid sum of exp(i alpha theta) over n_theta points, exactly
    ang = 2 * np.pi if alpha % n_theta == 0 else 0.0
    return complex(val * ang / (t * L))


# ---------------------------------------------------------------------------
# constant Laurent coefficient


def _check_circle(samples):
    f = np.asarray(samples, dtype=complex).ravel()
    n = f.size
    if n < 32 or n & (n - 1):
        raise ValueError("sample count must be a power of two >= 32")
    return f


def laurent_modes(samples, radius: float = 1.0, check: bool = True) -> dict[int, complex]:
    """Laurent coefficients ``a_k`` (of ``z^k``) from uniform samples on ``|z| = radius``.

    Samples are taken at ``theta_j = theta0 + 2 pi j / N``; a common offset
    ``theta0`` only rotates the nonzero modes.
    """
    f = _check_circle(samples)
    n = f.size
    c = np.fft.fft(f) / n
    k = np.fft.fftfreq(n, 1.0 / n).astype(int)
    if check:
        total = float(np.sum(np.abs(c) ** 2))
        top = float(np.sum(np.abs(c[np.abs(k) >= 3 * n // 8]) ** 2))
        if total > 0 and top > 1e-10 * total:
            raise AliasingError("top-quarter modes carry significant energy; sample finer")
    return {int(kk): complex(cc / radius**kk) for kk, cc in zip(k, c)}


def laurent_constant_coefficient(samples) -> complex:
    """Constant Laurent coefficient: the mean of ``f`` over the sampled circle."""
    f = _check_circle(samples)
    laurent_modes(f)
    return complex(np.mean(f))


# ---------------------------------------------------------------------------
# block matrices


@dataclass(frozen=True, eq=False)
class BlockMatrixSpec:
    """Symmetric matrix with large diagonal entries ``lam`` in its first block.

    ``a`` has shape ``(m + n, n)``: ``a[j, l]`` couples row ``j`` to the
    ``l``-th large entry (diagonal entries ``a[l, l]`` are ignored).  ``B`` is
    the ``m x m`` block that remains bounded.
    """

    lam: np.ndarray
    a: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).ravel()
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        n, m = lam.size, B.shape[0]
        a = np.asarray(self.a, dtype=float)
        if B.shape != (m, m) or not np.allclose(B, B.T):
            raise ValueError("B must be a symmetric square matrix")
        if a.shape != (m + n, n):
            raise ValueError(f"a must have shape {(m + n, n)}")
        if not np.allclose(a[:n, :n], a[:n, :n].T):
            raise ValueError("couplings among the large entries must be symmetric")
        if np.any(lam <= 0):
            raise ValueError("lam must be positive")
        if m and abs(np.linalg.det(B)) < 1e-300:
            raise ValueError("B must be nonsingular")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.lam.size

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def rho(self) -> float:
        return float(np.sum(1.0 / self.lam))

    def matrix(self) -> np.ndarray:
        n, m = self.n, self.m
        M = np.zeros((n + m, n + m))
        M[:, :n] = self.a
        M[:n, :] = M[:, :n].T
        M[n:, n:] = self.B
        M[np.arange(n), np.arange(n)] = self.lam
        return M

    def scaled(self, s: float) -> "BlockMatrixSpec":
        return BlockMatrixSpec(self.lam * s, self.a, self.B)


def _fit_or_none(x, r):
    r = np.asarray(r, dtype=float)
    return fit_rate(x, r) if np.all(r > 0) else None


def block_asymptotics_check(spec: BlockMatrixSpec, scales) -> dict:
    """Determinant and inverse asymptotics as the large entries grow.

    For each scale ``s`` the entries ``lam`` are multiplied by ``s`` and the
    exact determinant and inverse ``alpha`` of the matrix are computed.

    Returns
    -------
    dict
        ``rows`` (per-scale deviations and bounded products) and rate fits
        against ``rho = sum 1/lam`` for the determinant ratio, ``alpha_kk lam_k``
        and the ``B`` block of the inverse (``None`` when a deviation vanishes
        identically).
    """
    rows = []
    n = spec.n
    for s in scales:
        sp_ = spec.scaled(s)
        M = sp_.matrix()
        sign, logdet = np.linalg.slogdet(M)
        lam = sp_.lam
        if sp_.m:
            bsign, blog = np.linalg.slogdet(sp_.B)
        else:
            bsign, blog = 1.0, 0.0
        ratio = sign * bsign * math.exp(logdet - blog - float(np.sum(np.log(lam))))
        alpha = np.linalg.inv(M)
        diag = np.abs(np.diag(alpha)[:n] * lam - 1)
        bdev = (float(np.max(np.abs(alpha[n:, n:] - np.linalg.inv(sp_.B)))) if sp_.m else 0.0)
        off = [abs(alpha[j, l] * lam[j] * lam[l]) for j in range(n) for l in range(n) if j != l]
        mixed = [abs(alpha[j, l] * lam[j]) for j in range(n) for l in range(n, n + sp_.m)]
        rows.append({"scale": float(s), "rho": sp_.rho, "det_dev": abs(ratio - 1),
                     "diag_dev": float(np.max(diag)), "b_dev": bdev,
                     "offdiag_product": max(off, default=0.0),
                     "mixed_product": max(mixed, default=0.0)})
    x = [r["rho"] for r in rows]
    return {"rows": rows,
            "det": _fit_or_none(x, [r["det_dev"] for r in rows]),
            "diag": _fit_or_none(x, [r["diag_dev"] for r in rows]),
            "b_block": _fit_or_none(x, [r["b_dev"] for r in rows])}


def perturbed_inverse_residual(A, B, eps: float) -> float:
    """Spectral norm of ``(A + eps B)^-1 - A^-1 + eps A^-1 B A^-1``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if np.linalg.cond(A) > 1e14:
        raise ValueError("A is singular to working precision")
    Ai = np.linalg.inv(A)
    R = np.linalg.inv(A + eps * B) - Ai + eps * Ai @ B @ Ai
    return float(np.linalg.norm(R, 2))


def perturbed_inverse_check(A, B, eps_ladder) -> RateFit:
    """Rate of the first-order inverse expansion along ``eps_ladder``."""
    eps = [float(e) for e in eps_ladder]
    return fit_rate(eps, [perturbed_inverse_residual(A, B, e) for e in eps])


def dual_transfer_check(M0, M1, eps_ladder) -> dict:
    """Pass from an expansion of a dual pairing matrix to the metric matrix.

    If a Hermitian metric has matrix ``M0 + eps M1`` then the pairing matrix of
    the dual metric is the conjugate inverse, ``conj(M0^-1) - eps
    conj(M0^-1 M1 M0^-1) + O(eps^2)``.  Starting from that dual expansion
    (truncated after first order), the conjugate inverse is compared with
    ``M0 + eps M1``: the first-order term returns with the opposite sign.

    Returns
    -------
    dict with ``fit`` (residual against ``eps``) and ``coefficient_error``,
    the largest deviation of ``(metric(eps) - M0)/eps`` from ``M1``.
    """
    M0 = np.asarray(M0, dtype=complex)
    M1 = np.asarray(M1, dtype=complex)
    M0i = np.linalg.inv(M0)
    D0 = np.conj(M0i)
    D1 = np.conj(M0i @ M1 @ M0i)
    res, coef = [], []
    eps = [float(e) for e in eps_ladder]
    for e in eps:
        metric = np.conj(np.linalg.inv(D0 - e * D1))
        res.append(float(np.linalg.norm(metric - (M0 + e * M1), 2)))
        coef.append(float(np.max(np.abs((metric - M0) / e - M1))))
    return {"fit": fit_rate(eps, res), "coefficient_error": coef}


# ---------------------------------------------------------------------------
# the Weil-Petersson metric of the model


def wp_metric(ts, coupling=None, B=None, c_star: float = math.exp(-1.0)) -> np.ndarray:
    """Metric matrix from the Gram data of the collar differentials.

    The large entries are ``lam_k = <eta*_k, eta*_k>``, the collar norms of
    ``(dz/z)^2``.  With ``eta_k = -(t_k/pi) eta*_k`` the dual Gram matrix is
    rescaled and the metric is its conjugate inverse, so that
    ``g(d/dt_k, d/dt_k) = (pi^2/|t_k|^2) alpha_kk``.

    Parameters
    ----------
    ts : sequence of complex
        Plumbing parameters of the ``n`` collars.
    coupling : array (m + n, n), optional
        Bounded Gram entries between the collar differentials and the rest.
    B : array (m, m), optional
        Gram block of the remaining differentials (identity by default).
    """
    ts = np.asarray(ts, dtype=complex).ravel()
    n = ts.size
    if np.any(np.abs(ts) <= 0) or np.any(np.abs(ts) >= 1):
        raise ValueError("need 0 < |t| < 1")
    B = np.eye(1) if B is None else np.atleast_2d(np.asarray(B, dtype=float))
    m = B.shape[0]
    coupling = np.zeros((m + n, n)) if coupling is None else np.asarray(coupling, dtype=float)
    lam = [collar_norm_integral(CollarIntegralSpec(t, c_star, 0)).value for t in ts]
    spec = BlockMatrixSpec(lam, coupling, B)
    A = spec.matrix()
    scale = np.concatenate([-ts / np.pi, np.ones(m)])
    # gram = S A S*; invert the well-scaled A and undo the diagonal S exactly
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Gram matrix is not positive definite") from exc
    Ai = np.linalg.inv(A)
    Ai = (Ai + Ai.T) / 2
    inv_s = 1 / scale
    return np.conj(np.conj(inv_s)[:, None] * Ai * inv_s[None, :])


def wp_leading_term(t, c_star: float = math.exp(-1.0), coupling=None, B=None) -> float:
    """``g(d/dt, d/dt)`` for a single collar; about ``pi^3/(|t|^2 (-log|t|)^3)``."""
    g = wp_metric([t], coupling, B, c_star)
    return float(g[0, 0].real)


def normal_form_check(t) -> dict:
    """Pull ``pi^3 |t|^-2 (-log|t|)^-3 |dt|^2`` back to ``r = (-log|t|)^(-1/2)``, ``theta = arg t``.

    The Jacobian ``d|t|/dr = 2 r^-3 |t|`` is evaluated both in closed form and
    by a complex-step derivative.  Returns the relative deviations of the
    ``dr^2`` and ``dtheta^2`` coefficients from ``4 pi^3`` and ``pi^3 r^6``.
    """
    at = abs(complex(t))
    if not 0 < at < 1:
        raise ValueError("need 0 < |t| < 1")
    L = -math.log(at)
    r = L ** -0.5
    coef = math.pi**3 / (at**2 * L**3)
    jac = 2 * r**-3 * at
    h = 1e-30 * r
    jac_cs = (np.exp(-(r + 1j * h) ** -2)).imag / h
    g_rr = coef * jac**2
    g_tt = coef * at**2
    return {"r": r, "jacobian": jac, "jacobian_complex_step": float(jac_cs),
            "g_rr_dev": abs(g_rr / (4 * math.pi**3) - 1),
            "g_thth_dev": abs(g_tt / (math.pi**3 * r**6) - 1),
            "jacobian_dev": float(abs(jac_cs / jac - 1))}
