# %% [markdown]
# # Collar integrals and the leading metric coefficient
#
# The norm of ``(dz/z)^2`` over the collar grows like ``(-log|t|)^3 / pi``;
# pairing the pinching direction with it gives ``-pi/t``.  Together they fix
# the leading coefficient ``pi^3 / (|t|^2 (-log|t|)^3)``.

# %%
import math

from hypgraft.wpasym import (CollarIntegralSpec, beltrami_pairing, collar_norm_integral,
                             normal_form_check, wp_leading_term)

for L in (20.0, 40.0, 80.0, 160.0):
    r = collar_norm_integral(CollarIntegralSpec(math.exp(-L)))
    print(f"-log|t| = {L:5.0f}   norm = {r.value:.6e}   minus L^3/pi = {r.value - L**3 / math.pi:.4f}")

t = 0.01 * complex(math.cos(1.0), math.sin(1.0))
print("pairing * t =", beltrami_pairing(t) * t)

# %% [markdown]
# The metric coefficient approaches the model value with relative deviation
# of order ``(-log|t|)^-1``; in ``r = (-log|t|)^(-1/2)`` the model metric is
# ``pi^3 (4 dr^2 + r^6 dtheta^2)``.

# %%
for L in (10.0, 20.0, 40.0, 80.0, 160.0):
    t = math.exp(-L)
    g = wp_leading_term(t)
    print(f"-log|t| = {L:5.0f}   ratio = {g * t**2 * L**3 / math.pi**3:.6f}")
print(normal_form_check(math.exp(-40.0)))
