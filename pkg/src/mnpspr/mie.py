"""Analytic sphere backend: exact layer-potential actions and multipoles.

On a sphere of radius r the tangential vector harmonics diagonalize every
static boundary operator, and the Helmholtz vector single layer acts on them
through closed products of spherical Bessel/Hankel functions.  These exact
values serve as oracles for the quadrature-based machinery.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .sphharm import cartesian_to_angles, sh_index, ynm_matrix
from .specfun import (
    composite_h1,
    composite_j,
    spherical_h1,
    vector_sph_matrix,
)
from scipy.special import spherical_jn


@dataclass(frozen=True)
class SphereMode:
    """Tangential harmonic mode (family l, degree n, order m) on a sphere."""

    l: int
    n: int
    m: int
    radius: float = 1.0

    def __post_init__(self):
        if self.l not in (1, 2):
            raise ValueError("family index l must be 1 or 2")
        if self.n < 1:
            raise ValueError("degree must be >= 1")
        if abs(self.m) > self.n:
            raise ValueError("|m| must not exceed n")
        if self.radius <= 0:
            raise ValueError("radius must be positive")


def sphere_mnp_eigenvalue(l: int, n: int) -> Fraction:
    """Exact eigenvalue of the magnetic boundary operator on the sphere.

    Family 1 (gradient-type harmonics): -1/(2(2n+1)); family 2 (rotated):
    +1/(2(2n+1)).  Independent of the radius.
    """
    if n < 1:
        raise ValueError("degree must be >= 1")
    if l == 1:
        return Fraction(-1, 2 * (2 * n + 1))
    if l == 2:
        return Fraction(1, 2 * (2 * n + 1))
    raise ValueError("family index l must be 1 or 2")


def _mode_fields(n, m, x):
    """Y, phi_1, phi_2 and the radial direction at a point."""
    theta, phi, r = cartesian_to_angles(np.asarray(x, dtype=float))
    Y = ynm_matrix(theta, phi, n)[0, sh_index(n, m)]
    p1, p2 = vector_sph_matrix(theta, phi, n)
    xhat = np.asarray(x, dtype=float) / r[0]
    return Y, p1[0, sh_index(n, m)], p2[0, sh_index(n, m)], xhat, float(r[0])


def exact_sphere_potential(mode: SphereMode, k: float, x, which: str) -> np.ndarray:
    """Closed-form curl / double-curl of the vector single layer on a sphere.

    The density is the mode's tangential harmonic on the sphere |y| = r;
    x must satisfy |x| != r.  which in {curlS, curlcurlS}.
    """
    if which not in ("curlS", "curlcurlS"):
        raise ValueError(f"unknown kind {which!r}")
    if k <= 0:
        raise ValueError("wavenumber must be positive")
    n, m, r = mode.n, mode.m, mode.radius
    Y, p1, p2, xhat, rp = _mode_fields(n, m, x)
    if np.isclose(rp, r):
        raise ValueError("evaluation point lies on the sphere")
    nn = np.sqrt(n * (n + 1.0))
    outside = rp > r
    if outside:
        h, j = spherical_h1(n, k * rp), spherical_jn(n, k * r)
        H, J = composite_h1(n, k * rp), composite_j(n, k * r)
        if which == "curlS" and mode.l == 1:
            return 1j * k * r * h * J * p2
        if which == "curlS" and mode.l == 2:
            # sign fixed against the trace jump relation: the exterior
            # tangential trace must be (-1/2 + lambda_{2,n}) phi_2
            return (
                1j * k * r**2 / rp * H * j * p1
                + 1j * k * r**2 * nn / rp * h * j * Y * xhat
            )
        if which == "curlcurlS" and mode.l == 1:
            return (
                -1j * k * r / rp * H * J * p1
                - 1j * k * r * nn / rp * h * J * Y * xhat
            )
        return -1j * k**3 * r**2 * h * j * p2
    j_in, h_r = spherical_jn(n, k * rp), spherical_h1(n, k * r)
    J_in, H_r = composite_j(n, k * rp), composite_h1(n, k * r)
    if which == "curlS" and mode.l == 1:
        return 1j * k * r * j_in * H_r * p2
    if which == "curlS" and mode.l == 2:
        return (
            1j * k * r**2 / rp * J_in * h_r * p1
            + 1j * k * r**2 * nn / rp * j_in * h_r * Y * xhat
        )
    if which == "curlcurlS" and mode.l == 1:
        return (
            -1j * k * r / rp * J_in * H_r * p1
            - 1j * k * r * nn / rp * j_in * H_r * Y * xhat
        )
    return -1j * k**3 * r**2 * j_in * h_r * p2


def multipole(kind: str, n: int, m: int, k: float, materials, x):
    """Transverse-electric / transverse-magnetic multipole fields (E, H).

    Exterior kinds are outgoing (Hankel radial factor); interior kinds are
    regular (Bessel).  The ambient parameters eps_e, mu_e and omega of the
    material configuration set the field couplings.
    """
    if kind not in ("TE_ext", "TM_ext", "TE_int", "TM_int"):
        raise ValueError(f"unknown multipole kind {kind!r}")
    x = np.asarray(x, dtype=float)
    if kind.endswith("ext") and np.allclose(x, 0.0):
        raise ValueError("exterior multipole undefined at the origin")
    omega, eps, mu = materials.omega, materials.eps_e, materials.mu_e
    Y, p1, p2, xhat, r = _mode_fields(n, m, x)
    nn = np.sqrt(n * (n + 1.0))
    if kind.endswith("ext"):
        f, F = spherical_h1(n, k * r), composite_h1(n, k * r)
    else:
        f, F = spherical_jn(n, k * r), composite_j(n, k * r)
    e_te = -nn * f * p2
    curl_e_te = (nn / r) * F * p1 + (n * (n + 1.0) / r) * f * Y * xhat
    if kind.startswith("TE"):
        return e_te, -1j / (omega * mu) * curl_e_te
    # TM fields: E = (i/(omega eps)) curl E_TE, H = E_TE
    return 1j / (omega * eps) * curl_e_te, e_te


def mode_tangent_field(mode: SphereMode, grid_L: int):
    """Helmholtz potentials reproducing the mode's tangential harmonic.

    On the sphere of the mode's radius, the surface gradient carries a 1/r,
    so the potential amplitude r/sqrt(n(n+1)) makes the reconstructed field
    equal phi_1 (family 1) or phi_2 (family 2) as functions of direction.
    """
    from .surface import ShCoeffs, TangentField

    amp = mode.radius / np.sqrt(mode.n * (mode.n + 1.0))
    if mode.l == 1:
        X = ShCoeffs.unit(mode.n, mode.m, L=grid_L, amplitude=amp)
        return TangentField.from_potentials(X=X, L=grid_L, flavor="curl")
    V = ShCoeffs.unit(mode.n, mode.m, L=grid_L, amplitude=-amp)
    return TangentField.from_potentials(V=V, L=grid_L, flavor="curl")
