"""Per-target rotated polar quadrature for weakly singular surface integrals.

For each target point on the surface, the integration variable is moved to a
polar coordinate system whose pole sits at the target's parameter direction.
The surface measure contributes sin(theta'), which cancels the 1/|x-y|
singularity of the layer-potential kernels, so a Gauss-Legendre rule in the
colatitude angle times a uniform azimuth rule converges spectrally on
analytic star-shaped surfaces.  The same rule handles the |x-y|^(j-1)
correction kernels (smooth after the sin factor) and, with the pole placed
under an off-surface point, nearly singular evaluations.
"""

from __future__ import annotations

import numpy as np

from .sphharm import (
    cartesian_to_angles,
    polar_patch_rule,
    rotation_to,
    sh_degrees,
    ynm_matrix,
)
from .surface import SurfaceGrid


def default_polar_order(L: int) -> int:
    return max(L + 18, 24)


class PolarPatch:
    """Fixed polar rule plus per-target rotation bookkeeping."""

    def __init__(self, grid: SurfaceGrid, n_polar=None, n_azimuth=None):
        self.grid = grid
        nt = n_polar or default_polar_order(grid.L_quad)
        na = n_azimuth or 2 * nt
        self.n_polar = nt
        th, ph, w = polar_patch_rule(nt, na)
        st = np.sin(th)
        self.base_dirs = np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=-1)
        self.weights = w

    def rotate(self, theta, phi):
        """Surface data at the patch points rotated under (theta, phi).

        Returns dict with the rotated parameter angles, positions, normals,
        jacobian and quadrature weights (parameter measure).
        """
        R = rotation_to(theta, phi)
        dirs = self.base_dirs @ R.T
        th, ph, _ = cartesian_to_angles(dirs)
        frame = self.grid.frame_at(th, ph)
        return {
            "theta": th,
            "phi": ph,
            "position": frame["position"],
            "normal": frame["normal"],
            "jacobian": frame["jacobian"],
            "weights": self.weights,
            "frame": frame,
        }


def laplace_scalar_kernels(x, nu_x, y, nu_y):
    """Static single-layer / adjoint double-layer / double-layer kernels.

    Kernel conventions (G = -1/(4 pi |x-y|)):
      S     : G(x, y)
      Kstar : dG/dnu_x = nu_x . (x - y) / (4 pi |x-y|^3)
      K     : dG/dnu_y = nu_y . (y - x) / (4 pi |x-y|^3)
    """
    rvec = x[None, :] - y
    r = np.linalg.norm(rvec, axis=-1)
    r3 = r**3
    gs = -1.0 / (4.0 * np.pi * r)
    kstar = np.einsum("j,ij->i", nu_x, rvec) / (4.0 * np.pi * r3)
    kk = -np.einsum("ij,ij->i", nu_y, rvec) / (4.0 * np.pi * r3)
    return gs, kstar, kk


def ring_rotated_geometry(grid: SurfaceGrid, patch: PolarPatch, t: int):
    """Rotated-patch geometry for the whole azimuth ring of colatitude t.

    The grid nodes on one ring differ only by a rotation about the z axis,
    under which the harmonic basis picks up the phase exp(i m phi).  The
    basis matrix at the ring's reference patch is therefore shared by all
    n_phi targets of the ring.

    Returns (theta (Q,), phi0 (Q,), frames dict for all (n_phi, Q) points).
    """
    theta_t = grid.thetas[t * grid.n_phi]
    R = rotation_to(theta_t, 0.0)
    dirs = patch.base_dirs @ R.T
    th0, ph0, _ = cartesian_to_angles(dirs)
    nphi = grid.n_phi
    phis = grid.phis[t * nphi : (t + 1) * nphi]
    th_all = np.broadcast_to(th0, (nphi, th0.size)).ravel()
    ph_all = (ph0[None, :] + phis[:, None]).ravel()
    frame = grid.frame_at(th_all, ph_all)
    return th0, ph0, frame


def assemble_scalar_values(grid: SurfaceGrid, L: int, n_polar=None):
    """Values (Op Y_j)(x_i) for Op in {S, Kstar, K} at all grid nodes.

    Returns dict of (n_nodes, (L+1)^2) complex arrays.  The densities are the
    parameter-sphere harmonics; integration is in the surface measure.
    """
    patch = PolarPatch(grid, n_polar)
    nc = (L + 1) ** 2
    q = patch.weights.size
    nphi = grid.n_phi
    _, mslots = sh_degrees(L)
    out = {
        "S": np.zeros((grid.n_nodes, nc), dtype=complex),
        "Kstar": np.zeros((grid.n_nodes, nc), dtype=complex),
        "K": np.zeros((grid.n_nodes, nc), dtype=complex),
    }
    for t in range(grid.n_theta):
        th0, ph0, frame = ring_rotated_geometry(grid, patch, t)
        Yref = ynm_matrix(th0, ph0, L)  # basis at the ring's reference patch
        sl = slice(t * nphi, (t + 1) * nphi)
        ypos = frame["position"].reshape(nphi, q, 3)
        ynu = frame["normal"].reshape(nphi, q, 3)
        wjac = patch.weights[None, :] * frame["jacobian"].reshape(nphi, q)

        rvec = grid.positions[sl][:, None, :] - ypos
        r = np.linalg.norm(rvec, axis=-1)
        inv4pir3 = 1.0 / (4.0 * np.pi * r**3)
        gs = -1.0 / (4.0 * np.pi * r)
        kstar = np.einsum("tj,tqj->tq", grid.normals[sl], rvec) * inv4pir3
        kk = -np.einsum("tqj,tqj->tq", ynu, rvec) * inv4pir3

        kernels = np.stack([gs * wjac, kstar * wjac, kk * wjac], axis=1)
        rows = kernels.reshape(3 * nphi, q).astype(complex) @ Yref
        rows = rows.reshape(nphi, 3, nc)
        phase = np.exp(1j * np.outer(grid.phis[sl], mslots))
        out["S"][sl] = rows[:, 0] * phase
        out["Kstar"][sl] = rows[:, 1] * phase
        out["K"][sl] = rows[:, 2] * phase
    return out


def near_singular_eval(grid: SurfaceGrid, x, integrand, n_polar=320, n_azimuth=None):
    """Quadrature of a surface integrand peaked under an off-surface point.

    The polar patch is centered at the parameter direction of x, where the
    nearly singular kernel concentrates.  `integrand(pointdata)` receives the
    rotated patch data and returns values (Q,) or (Q, k); the surface measure
    (jacobian x weights) is applied here.
    """
    th0, ph0, _ = cartesian_to_angles(np.asarray(x, dtype=float))
    na = n_azimuth or max(2 * grid.L_quad + 16, 48)
    patch = PolarPatch(grid, n_polar, na)
    rot = patch.rotate(float(th0[0]), float(ph0[0]))
    vals = integrand(rot)
    w = rot["weights"] * rot["jacobian"]
    if vals.ndim == 1:
        return np.sum(w * vals)
    return np.tensordot(w, vals, axes=(0, 0))
