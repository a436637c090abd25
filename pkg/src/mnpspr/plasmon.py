"""Weak surface-plasmon modes, their fields, and localization diagnostics.

Each eigenvalue lam of the magnetic boundary operator on the curl subspace
picks a contrast tau = (1 - 2 lam)/(1 + 2 lam) at which the leading-order
scaled transmission system has the eigenfield in its kernel.  The associated
mode fields are built from the Helmholtz vector single layer of the
eigenfield density with the exterior/interior wavenumbers, and their decay
off the surface is summarized by partial sums and a density-of-exceedance
statistic for o(j^{-kappa}) behavior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np

from .mie import SphereMode, exact_sphere_potential, mode_tangent_field
from .potentials import MaterialConfig, helmholtz_point_kernels, offboundary_eval
from .spectral import SpectralSet
from .surface import ShCoeffs, SurfaceGrid, TangentField, tubular_distance
from .sphharm import cartesian_to_angles


class ResonanceExclusionError(ValueError):
    """Requested contrast is excluded (tau = 1 or lam outside (-1/2, 1/2))."""


def resonance_tau(lam):
    """Contrast tau solving (1 - tau) / (2 (1 + tau)) = lam.

    Exact rational in, exact rational out.  lam must lie in (-1/2, 1/2);
    lam = 0 gives tau = 1, which the material presets exclude.
    """
    if isinstance(lam, Rational):
        two = Fraction(2)
        if not (-Fraction(1, 2) < lam < Fraction(1, 2)):
            raise ResonanceExclusionError(f"eigenvalue {lam} outside (-1/2, 1/2)")
        tau = (1 - two * lam) / (1 + two * lam)
    else:
        lam = float(lam)
        if not (-0.5 < lam < 0.5):
            raise ResonanceExclusionError(f"eigenvalue {lam} outside (-1/2, 1/2)")
        tau = (1.0 - 2.0 * lam) / (1.0 + 2.0 * lam)
    if tau == 1:
        raise ResonanceExclusionError(
            "lam = 0 gives tau = 1, excluded by the material assumptions"
        )
    return tau


@dataclass
class PlasmonMode:
    """A weak-resonance mode: eigenvalue, resonant contrast, density."""

    lam: float
    tau: float
    materials: MaterialConfig
    density: TangentField = None
    sphere: SphereMode = None
    index: int = None

    @classmethod
    def from_sphere(cls, l, n, m, radius=1.0, omega=1.0, delta=0.05):
        from .mie import sphere_mnp_eigenvalue

        lam = sphere_mnp_eigenvalue(l, n)
        tau = resonance_tau(lam)
        mats = MaterialConfig.negative_preset(float(tau), omega, delta)
        return cls(
            lam=float(lam),
            tau=float(tau),
            materials=mats,
            sphere=SphereMode(l, n, m, radius),
        )

    @classmethod
    def from_eigenmode(cls, j, curl_set: SpectralSet, omega=1.0, delta=0.05):
        lam = float(curl_set.eigenvalues[j])
        tau = resonance_tau(lam)
        mats = MaterialConfig.negative_preset(tau, omega, delta)
        dens = TangentField.from_potentials(
            V=ShCoeffs(curl_set.L, curl_set.vectors[:, j], True),
            L=curl_set.L,
            flavor="curl",
        )
        return cls(lam=lam, tau=tau, materials=mats, density=dens, index=j)


def _is_inside(x, grid: SurfaceGrid):
    th, ph, r = cartesian_to_angles(np.asarray(x, dtype=float))
    rho, _, _ = grid.radius_at(th, ph)
    return bool(r[0] < rho[0])


def plasmon_field(mode: PlasmonMode, x, grid: SurfaceGrid, materials=None, quad="auto"):
    """Electric and magnetic mode fields at a point off the boundary.

    E = mu curl S[phi] + curlcurl S[phi], H = -(i/omega) curlcurl S[phi]
    - (i k^2/(omega mu)) curl S[phi], with (mu, k) from the exterior or
    interior material depending on the side of the surface.
    """
    mats = materials or mode.materials
    x = np.asarray(x, dtype=float)
    if mode.sphere is not None:
        inside = np.linalg.norm(x) < mode.sphere.radius
    else:
        inside = _is_inside(x, grid)
    if inside:
        mu, k = mats.mu_c, mats.k_c
    else:
        mu, k = mats.mu_e, mats.k_e
    k = complex(k).real if abs(complex(k).imag) < 1e-14 else complex(k)
    if mode.sphere is not None:
        curl = exact_sphere_potential(mode.sphere, k, x, "curlS")
        curlcurl = exact_sphere_potential(mode.sphere, k, x, "curlcurlS")
    else:
        curl = offboundary_eval(mode.density, k, x, "curlS_vec", grid, quad=quad)
        curlcurl = offboundary_eval(mode.density, k, x, "curlcurlS_vec", grid, quad=quad)
    E = mu * curl + curlcurl
    H = -1j / mats.omega * curlcurl - 1j * k**2 / (mats.omega * mu) * curl
    return E, H


@dataclass
class DecayReport:
    """Per-mode field norms over a point cloud and localization summaries."""

    mode_ids: list
    eigenvalues: np.ndarray
    taus: np.ndarray
    distances: np.ndarray
    e_norms: np.ndarray
    h_norms: np.ndarray
    e_point_mags: np.ndarray  # (n_modes, n_points)
    h_point_mags: np.ndarray
    partial_sums: np.ndarray
    plateau: bool
    plateau_fraction: float
    fitted_rate: float
    statistic: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "mode_ids": [str(m) for m in self.mode_ids],
            "eigenvalues": self.eigenvalues.tolist(),
            "taus": self.taus.tolist(),
            "distances": self.distances.tolist(),
            "e_norms": self.e_norms.tolist(),
            "h_norms": self.h_norms.tolist(),
            "partial_sums": self.partial_sums.tolist(),
            "plateau": bool(self.plateau),
            "plateau_fraction": float(self.plateau_fraction),
            "fitted_rate": float(self.fitted_rate),
            "statistic": self.statistic,
        }

    def csv_rows(self):
        rows = []
        for j, mid in enumerate(self.mode_ids):
            for p in range(self.distances.size):
                rows.append(
                    (
                        mid,
                        float(self.eigenvalues[j]),
                        float(self.taus[j]),
                        p,
                        float(self.distances[p]),
                        float(self.e_point_mags[j, p]),
                        float(self.h_point_mags[j, p]),
                    )
                )
        return rows


def _field_batch(modes, points, grid, quad):
    """E, H for every (mode, point); exterior kernels are shared across modes."""
    pts = np.asarray(points, dtype=float)
    inside = np.array([_is_inside(p, grid) for p in pts])
    n_modes, n_pts = len(modes), pts.shape[0]
    E = np.zeros((n_modes, n_pts, 3), dtype=complex)
    H = np.zeros((n_modes, n_pts, 3), dtype=complex)

    general = [(j, m) for j, m in enumerate(modes) if m.sphere is None]
    if general and np.any(~inside):
        # exterior wavenumber is mode-independent: one kernel tensor
        k_e = float(np.real(general[0][1].materials.k_e))
        rvec = pts[~inside][:, None, :] - grid.positions[None, :, :]
        g, gr, he = helmholtz_point_kernels(k_e, rvec, want_hessian=True)
        w = grid.area_weights
        for mj, m in general:
            dens = grid.tangent_values(m.density)
            curl = np.einsum("pnc,n->pc", np.cross(gr, dens), w)
            cc = np.einsum("pncd,nd->pc", he, dens * w[:, None])
            cc += k_e**2 * np.einsum("pn,nc->pc", g * w[None, :], dens)
            mu = m.materials.mu_e
            E[mj, ~inside] = mu * curl + cc
            H[mj, ~inside] = (
                -1j / m.materials.omega * cc
                - 1j * k_e**2 / (m.materials.omega * mu) * curl
            )
    for mj, m in enumerate(modes):
        cols = (
            range(n_pts) if m.sphere is not None else np.nonzero(inside)[0]
        )
        for p in cols:
            E[mj, p], H[mj, p] = plasmon_field(m, pts[p], grid, quad=quad)
    return E, H


def localization_scan(modes, points, eps, grid: SurfaceGrid, quad="auto",
                      plateau_threshold=0.05, kappa=0.5):
    """Field-norm survey of a mode family over a fixed point cloud.

    Modes are ordered by |eigenvalue| descending.  Every point must keep
    distance > eps from the surface.  The report carries per-mode norms,
    the partial sums of squared norms, a plateau flag (last-quartile growth
    below the threshold), a fitted log-decay rate, and the o(j^{-kappa})
    exceedance statistic of the electric norms.
    """
    pts = np.asarray(points, dtype=float)
    dists = np.array([tubular_distance(p, grid) for p in pts])
    if np.any(dists <= eps):
        bad = int(np.argmin(dists))
        raise ValueError(
            f"point {bad} at distance {dists[bad]:.3g} inside the {eps:.3g}-tube"
        )
    modes = sorted(modes, key=lambda m: -abs(m.lam))
    E, H = _field_batch(modes, pts, grid, quad)
    e_mags = np.linalg.norm(E, axis=2)
    h_mags = np.linalg.norm(H, axis=2)
    e_norms = np.sqrt(np.sum(e_mags**2, axis=1))
    h_norms = np.sqrt(np.sum(h_mags**2, axis=1))
    sums = np.cumsum(e_norms**2 + h_norms**2)
    q = max(1, (3 * len(modes)) // 4)
    growth = (sums[-1] - sums[q - 1]) / sums[-1]
    j = np.arange(1, len(modes) + 1)
    fit = np.polyfit(np.log(j), np.log(np.maximum(e_norms, 1e-300)), 1)
    n_grid = [n for n in (len(modes) // 4, len(modes) // 2, len(modes)) if n > 0]
    # the exceedance test is applied to the max-normalized sequence so the
    # sigma grid has a scale-free meaning
    stat = almost_sure_statistic(
        e_norms / np.max(e_norms), kappa, sigma_grid=[0.9, 0.7, 0.5], N_grid=n_grid
    )
    ids = [m.index if m.index is not None else str(m.sphere) for m in modes]
    return DecayReport(
        mode_ids=ids,
        eigenvalues=np.array([m.lam for m in modes]),
        taus=np.array([m.tau for m in modes]),
        distances=dists,
        e_norms=e_norms,
        h_norms=h_norms,
        e_point_mags=e_mags,
        h_point_mags=h_mags,
        partial_sums=sums,
        plateau=bool(growth <= plateau_threshold),
        plateau_fraction=float(growth),
        fitted_rate=float(fit[0]),
        statistic=stat,
    )


def almost_sure_statistic(c, kappa, sigma_grid, N_grid, threshold=0.05):
    """Exceedance-density table for the o(j^{-kappa}) criterion.

    fraction(sigma, N) = #{j <= N : |c_j| > sigma j^{-kappa}} / N.  The
    verdict is positive when, for every sigma, the fraction at the largest
    N is below the threshold and does not grow along N.
    """
    c = np.abs(np.asarray(c, dtype=float))
    if not sigma_grid or not N_grid:
        raise ValueError("sigma and N grids must be nonempty")
    N_grid = sorted(int(N) for N in N_grid)
    if c.size < N_grid[-1]:
        raise ValueError("sequence shorter than the largest N requested")
    j = np.arange(1, c.size + 1)
    table = {}
    verdict = True
    for sigma in sigma_grid:
        exceed = c > sigma * j ** (-kappa)
        fracs = [float(np.count_nonzero(exceed[:N]) / N) for N in N_grid]
        table[float(sigma)] = fracs
        decreasing = all(fracs[i + 1] <= fracs[i] + 1e-12 for i in range(len(fracs) - 1))
        verdict = verdict and fracs[-1] <= threshold and decreasing
    return {
        "kappa": float(kappa),
        "N_grid": N_grid,
        "threshold": float(threshold),
        "fractions": table,
        "verdict": bool(verdict),
    }
