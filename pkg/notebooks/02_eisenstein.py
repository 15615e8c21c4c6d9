# %% [markdown]
# # The weight-two series of the level-two group
#
# ``E(zeta; 2)`` is summed over bottom rows ``(c, d)`` with ``c <= C``; each
# row's translates are summed in closed form.  The omitted rows are bounded
# by an explicit tail estimate.

# %%
import numpy as np

from hypgraft.eisenstein import (EisensteinEvaluator, GeodesicSegment, IntegrandKind,
                                 eigen_residual, eval_E2, eval_E_star, geodesic_line_integral)
from hypgraft.moebius import FuchsianGroupSpec, MoebiusMap

G = FuchsianGroupSpec.gamma_two()
ev = EisensteinEvaluator.build(G, cutoff=200)
fine = EisensteinEvaluator.build(G, cutoff=400, check=False)
z = np.array([0.45 + 0.8j, 1j, 1 / 3 + 1j, 0.2 + 1.5j, -0.3 + 2.5j])
print("E:", eval_E2(ev, z))
print("|DE - 2E|:", eigen_residual(ev, z))
print("cutoff difference / tail bound:", np.abs(eval_E2(fine, z) - eval_E2(ev, z)) / ev.tail_bound(z))

# %% [markdown]
# High in the cusp the series minus ``y^2`` decays like ``1/y``.

# %%
for y in (2.0, 4.0, 8.0, 16.0):
    print(f"y = {y:4.0f}   |E*| y = {abs(eval_E_star(fine, 0.3 + 1j * y)) * y:.6f}")

# %% [markdown]
# Along the closed geodesic of ``[[1, 2], [2, 5]]`` the integral of ``E ds``
# equals three times the real part of the weight-four integral.

# %%
seg = GeodesicSegment.from_hyperbolic(MoebiusMap(1, 2, 2, 5))
ev2 = EisensteinEvaluator.build(G, cutoff=400, check=False)
IE = geodesic_line_integral(ev2, seg, IntegrandKind.E_DS, 1e-5)
IP = geodesic_line_integral(ev2, seg, IntegrandKind.PHI_OVER_DS, 1e-5)
print(f"int E ds = {IE:.8f}, 3 Re int Phi/ds = {3 * IP.real:.8f}, Im = {IP.imag:.2e}")
