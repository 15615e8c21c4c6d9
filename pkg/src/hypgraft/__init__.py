"""Numerics for degenerating hyperbolic metrics on plumbed surfaces.

Submodules
----------
moebius     Moebius maps, Fuchsian group descriptions, cusp normalization.
metrics     fiber, punctured-disc and grafted conformal metrics; curvature.
eisenstein  Eisenstein series E(.;2) and the weight-four series, truncations.
elliptic    the operator D - 2 on annular grids and the correction equation.
wpasym      collar integrals, Beltrami pairings, Weil-Petersson asymptotics.
harness     configs, experiment registry, reports and the ``hypgraft`` CLI.
"""

__version__ = "0.1.0"

from . import eisenstein, elliptic, metrics, moebius, wpasym  # noqa: E402
from .rates import RateFit, fit_rate  # noqa: E402

__all__ = ["eisenstein", "elliptic", "metrics", "moebius", "wpasym", "RateFit", "fit_rate",
           "__version__"]
