"""Closed-form sphere actions versus direct quadrature.

The curl and double curl of the Helmholtz vector single layer act on the
tangential harmonics of a sphere through products of spherical
Bessel/Hankel functions.  This script checks all eight interior/exterior
cases against the quadrature engine, and verifies the one-sided jump of
the normal derivative of the scalar single layer by extrapolation.
"""

import numpy as np

from mnpspr import (
    ShCoeffs,
    SphereMode,
    exact_sphere_potential,
    mode_tangent_field,
    offboundary_eval,
    sphere_surface,
)
from mnpspr.sphharm import cartesian_to_angles

grid = sphere_surface(1.0, 16)
xhat = np.array([0.6, 0.64, 0.48])

print("== dual-path comparison of the eight closed forms (k = 1) ==")
print(" family  kind        side      n=1..4 worst rel err")
for l in (1, 2):
    for which in ("curlS", "curlcurlS"):
        for side, rfac in (("exterior", 2.0), ("interior", 0.5)):
            worst = 0.0
            for n in range(1, 5):
                mode = SphereMode(l, n, min(1, n), 1.0)
                dens = mode_tangent_field(mode, 12)
                num = offboundary_eval(dens, 1.0, rfac * xhat, which + "_vec", grid)
                ref = exact_sphere_potential(mode, 1.0, rfac * xhat, which)
                worst = max(worst, np.max(np.abs(num - ref)) / np.max(np.abs(ref)))
            print(f"   {l}     {which:<10s}  {side:<8s}  {worst:.2e}")

print("\n== jump of the normal derivative of the scalar single layer ==")
print(" n   exterior extrap   interior extrap   +-1/2 + 1/(2(2n+1))")
ts = np.array([0.1, 0.05, 0.025, 0.0125])
for n in range(0, 4):
    dens = ShCoeffs.unit(n, 0, L=8)
    y = grid.scalar_values_at(dens, *cartesian_to_angles(xhat)[:2])[0].real
    vp, vm = [], []
    for t in ts:
        gp = offboundary_eval(dens, 0.0, (1 + t) * xhat, "gradS", grid, quad="near")
        gm = offboundary_eval(dens, 0.0, (1 - t) * xhat, "gradS", grid, quad="near")
        vp.append(np.dot(gp, xhat).real)
        vm.append(np.dot(gm, xhat).real)
    ext = np.polyval(np.polyfit(ts, vp, 3), 0.0) / y
    inn = np.polyval(np.polyfit(ts, vm, 3), 0.0) / y
    lam = 1.0 / (2 * (2 * n + 1))
    print(f"{n:2d}   {ext:+.8f}      {inn:+.8f}      {0.5+lam:+.8f} / {-0.5+lam:+.8f}")
