"""Log-log rate fits used for every asymptotic check."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RateFit", "fit_rate"]


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through ``(log x, log residual)``.

    Attributes
    ----------
    samples : tuple of (x, residual)
    slope, intercept : float
        ``log residual ~ slope * log x + intercept``.
    r_squared : float
        Coefficient of determination of the fit, in [0, 1].
    """

    samples: tuple[tuple[float, float], ...]
    slope: float
    intercept: float
    r_squared: float

    @property
    def x(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])

    def predict(self, x):
        return np.exp(self.intercept) * np.asarray(x, dtype=float) ** self.slope

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "samples": [[x, r] for x, r in self.samples],
        }


def fit_rate(samples, residuals=None) -> RateFit:
    """Fit ``residual ~ K x**p`` on a log-log scale.

    Parameters
    ----------
    samples : sequence of (x, residual) pairs, or sequence of x
        If ``residuals`` is given, ``samples`` holds the abscissae only.
    residuals : sequence of float, optional

    Returns
    -------
    RateFit
    """
    if residuals is None:
        pairs = np.asarray(samples, dtype=float)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ValueError("expected a sequence of (x, residual) pairs")
        x, r = pairs[:, 0], pairs[:, 1]
    else:
        x = np.asarray(samples, dtype=float).ravel()
        r = np.asarray(residuals, dtype=float).ravel()
        if x.shape != r.shape:
            raise ValueError("samples and residuals differ in length")
    if x.size < 3:
        raise ValueError("a rate fit needs at least 3 samples")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("abscissae must be positive and finite")
    if np.any(~np.isfinite(r)) or np.any(r <= 0):
        raise ValueError("residuals must be positive and finite")
    lx, lr = np.log(x), np.log(r)
    slope, intercept = np.polyfit(lx, lr, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((lr - fitted) ** 2))
    ss_tot = float(np.sum((lr - lr.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(tuple((float(a), float(b)) for a, b in zip(x, r)),
                   float(slope), float(intercept), float(r2))
