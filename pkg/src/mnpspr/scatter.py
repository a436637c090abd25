"""Scaled transmission system for small particles and resonance sweeps.

The boundary system acts on stacked pairs of tangential fields written in
Helmholtz potentials.  At leading order in the size parameter delta both
diagonal blocks equal  (1-tau)/(2(1+tau)) I - M  with the static magnetic
operator M; the delta- and delta^2-order corrections couple the blocks
through the smooth kernels assembled in the potentials module.

On the potential pair [X; V] the static operator is realized through the
scalar reductions (curl block: K, gradient block: -Lap^{-1} K* Lap); the
cross coupling from gradients into the curl subspace has no scalar
reduction and vanishes on spheres, where all quantitative sweeps run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .potentials import (
    MaterialConfig,
    OperatorMatrix,
    ResonanceError,
    assemble_correction,
    galerkin_laplacian,
    grid_signature,
    helmholtz_point_kernels,
    offboundary_eval,
    scalar_operators,
)
from .sphharm import num_coeffs
from .surface import ShCoeffs, SurfaceGrid, TangentField
from .spectral import trace_norm


@dataclass
class RHSVector:
    """Scaled incident traces: (nu x E / (mu_e - mu_c), i nu x H / (eps_e - eps_c))."""

    first: TangentField
    second: TangentField

    def stacked(self, L):
        d = num_coeffs(L) - 1
        out = np.zeros(4 * d, dtype=complex)
        out[0 * d : 1 * d] = self.first.X.padded(L)[1:]
        out[1 * d : 2 * d] = self.first.V.padded(L)[1:]
        out[2 * d : 3 * d] = self.second.X.padded(L)[1:]
        out[3 * d : 4 * d] = self.second.V.padded(L)[1:]
        return out


@dataclass
class BlockSystem:
    """Dense matrix of the scaled boundary system on stacked potentials."""

    matrix: np.ndarray
    order: int
    delta: float
    tau: float
    omega: float
    L: int
    grid_id: str
    materials: MaterialConfig
    diag_block: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.matrix.shape[0]


def resonance_shift(tau):
    """(1 - tau) / (2 (1 + tau)), the order-zero spectral shift."""
    return (1.0 - tau) / (2.0 * (1.0 + tau))


def static_magnetic_block(grid: SurfaceGrid, L: int):
    """Static magnetic operator on the stacked [X; V] potential pair.

    Curl block: the K coefficient matrix; gradient block: -Lap^{-1} K* Lap
    (from the divergence intertwining).  Block-diagonal: the gradient-to-
    curl coupling is dropped (exact on spheres).
    """
    ops = scalar_operators(grid, L)
    nc = num_coeffs(L)
    d = nc - 1
    D = galerkin_laplacian(grid, L)[1:, 1:]
    Kst = ops["Kstar"].entries[1:, 1:]
    Kc = ops["K"].entries[1:, 1:]
    M = np.zeros((2 * d, 2 * d), dtype=complex)
    M[:d, :d] = -np.linalg.solve(D, Kst @ D)
    M[d:, d:] = Kc
    return M


def assemble_system(grid: SurfaceGrid, materials: MaterialConfig, order: int) -> BlockSystem:
    """Scaled boundary system truncated at the requested correction order."""
    if order not in (0, 1, 2):
        raise ValueError("correction order must be 0, 1 or 2")
    if materials.mu_e == materials.mu_c or materials.eps_e == materials.eps_c:
        raise ValueError("equal interior/exterior parameters make the scaled system singular")
    tau = materials.tau
    if tau == 1.0:
        raise ValueError("tau = 1 makes the scaled system degenerate")
    L = grid.L_quad
    delta = materials.delta
    d = num_coeffs(L) - 1
    M = static_magnetic_block(grid, L)
    diag = resonance_shift(tau) * np.eye(2 * d) - M
    A = np.zeros((4 * d, 4 * d), dtype=complex)
    A[: 2 * d, : 2 * d] = diag
    A[2 * d :, 2 * d :] = diag
    if order >= 1:
        denom = materials.mu_e - materials.mu_c  # equals eps_e - eps_c here
        L1 = assemble_correction("L1", grid, materials, L).entries
        off = (delta / denom) * L1
        if order >= 2:
            L2 = assemble_correction("L2", grid, materials, L).entries
            off = off + (delta**2 / denom) * L2
            M2e = assemble_correction("Mk2", grid, materials, L, "e").entries
            M2c = assemble_correction("Mk2", grid, materials, L, "c").entries
            dia2 = (delta**2 / denom) * (materials.mu_c * M2c - materials.mu_e * M2e)
            A[: 2 * d, : 2 * d] += dia2
            A[2 * d :, 2 * d :] += dia2
        A[: 2 * d, 2 * d :] = off
        A[2 * d :, : 2 * d] = off
    return BlockSystem(
        A, order, delta, tau, materials.omega, L, grid_signature(grid), materials, diag
    )


def dipole_incident_trace(source, p, materials: MaterialConfig, grid: SurfaceGrid) -> RHSVector:
    """Scaled tangential traces of a point-dipole incident field.

    E = -(1/k_e^2) grad div (G(delta k_e; x, s) p) - delta^2 G p,
    H = (i delta/(omega mu_e)) curl (G p); the returned pair carries the
    material denominators of the scaled system.
    """
    s = np.asarray(source, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.linalg.norm(s) <= np.max(grid.rho):
        raise ValueError("dipole source must lie outside the particle")
    delta = materials.delta
    k = delta * complex(materials.k_e).real
    rvec = grid.positions - s[None, :]
    g, grad, hess = helmholtz_point_kernels(k, rvec, want_hessian=True)
    ke2 = complex(materials.k_e) ** 2
    E = -(hess @ p) / ke2 - delta**2 * g[:, None] * p[None, :]
    H = 1j * delta / (materials.omega * materials.mu_e) * np.cross(grad, p[None, :])
    nuE = np.cross(grid.normals, E)
    nuH = np.cross(grid.normals, H)
    first = grid.helmholtz_decompose(nuE / (materials.mu_e - materials.mu_c), flavor="curl")
    second = grid.helmholtz_decompose(1j * nuH / (materials.eps_e - materials.eps_c), flavor="curl")
    return RHSVector(first, second)


def _unstack(vec, L):
    d = num_coeffs(L) - 1
    def lift(a):
        c = np.zeros(num_coeffs(L), dtype=complex)
        c[1:] = a
        return ShCoeffs(L, c, True)
    first = TangentField(lift(vec[:d]), lift(vec[d : 2 * d]), "div")
    second = TangentField(lift(vec[2 * d : 3 * d]), lift(vec[3 * d :]), "div")
    return first, second


def solve_scatter(system: BlockSystem, rhs: RHSVector):
    """Solve the scaled system; returns (psi, omega*phi) densities and cond.

    A singular matrix raises a resonance error carrying the spectral shift.
    """
    b = rhs.stacked(system.L)
    cond = float(np.linalg.cond(system.matrix))
    try:
        sol = np.linalg.solve(system.matrix, b)
    except np.linalg.LinAlgError as exc:
        raise ResonanceError(
            "scaled system singular at an exact resonance",
            eigenvalue=resonance_shift(system.tau),
        ) from exc
    psi, omega_phi = _unstack(sol, system.L)
    return (psi, omega_phi), cond


def pair_norm(a: TangentField, b: TangentField, grid: SurfaceGrid):
    """Stacked curl-trace norm of a field pair."""
    return float(np.hypot(trace_norm(a, grid), trace_norm(b, grid)))


def weak_resonance_indicator(system: BlockSystem, mode, grid: SurfaceGrid):
    """|| A(delta) (phi, omega phi) || for a normalized candidate density.

    mode supplies a curl-flavor density (a plasmon mode object or a
    TangentField); the candidate pair is (phi, omega phi) scaled to unit
    stacked curl-trace norm.
    """
    if grid_signature(grid) != system.grid_id:
        raise ValueError("grid does not match the assembled system")
    density = getattr(mode, "density", mode)
    if density is None and getattr(mode, "sphere", None) is not None:
        from .mie import mode_tangent_field

        density = mode_tangent_field(mode.sphere, system.L)
    v = TangentField.from_potentials(X=density.X, V=density.V, L=system.L, flavor="div")
    scaled = TangentField(
        ShCoeffs(system.L, system.omega * v.X.padded(system.L), True),
        ShCoeffs(system.L, system.omega * v.V.padded(system.L), True),
        "div",
    )
    stacked = np.concatenate(
        [
            v.X.coeffs[1:],
            v.V.coeffs[1:],
            system.omega * v.X.coeffs[1:],
            system.omega * v.V.coeffs[1:],
        ]
    )
    scale = pair_norm(v, scaled, grid)
    out = system.matrix @ (stacked / scale)
    first, second = _unstack(out, system.L)
    return pair_norm(first, second, grid)


def eval_scattered_fields(densities, x, materials: MaterialConfig, grid: SurfaceGrid,
                          incident=None, quad="auto"):
    """Total (E, H) from the solved densities at a point off the boundary.

    densities = (psi, phi) tangential fields (note: solve_scatter returns
    (psi, omega*phi); divide the second by omega before calling, or pass it
    through `densities_from_solution`).  incident, if given, is a callable
    x -> (E_i, H_i) added on the exterior side.
    """
    psi, phi = densities
    x = np.asarray(x, dtype=float)
    from .plasmon import _is_inside

    inside = _is_inside(x, grid)
    if inside:
        mu, k = materials.mu_c, materials.k_c
    else:
        mu, k = materials.mu_e, materials.k_e
    k = complex(k).real if abs(complex(k).imag) < 1e-14 else complex(k)
    delta = materials.delta
    ks = delta * k  # the reference geometry carries the scaled wavenumber
    curl_psi = offboundary_eval(psi, ks, x, "curlS_vec", grid, quad=quad)
    cc_psi = offboundary_eval(psi, ks, x, "curlcurlS_vec", grid, quad=quad)
    curl_phi = offboundary_eval(phi, ks, x, "curlS_vec", grid, quad=quad)
    cc_phi = offboundary_eval(phi, ks, x, "curlcurlS_vec", grid, quad=quad)
    E = mu * curl_psi + cc_phi / delta
    H = (
        -1j / (materials.omega * delta) * cc_psi
        - 1j * k**2 / (materials.omega * mu) * curl_phi
    )
    if incident is not None and not inside:
        Ei, Hi = incident(x)
        E = E + Ei
        H = H + Hi
    return E, H


def densities_from_solution(solution, omega):
    """Convert (psi, omega*phi) from the solver into (psi, phi)."""
    psi, omega_phi = solution
    phi = TangentField(
        ShCoeffs(omega_phi.X.L, omega_phi.X.coeffs / omega, True),
        ShCoeffs(omega_phi.V.L, omega_phi.V.coeffs / omega, True),
        omega_phi.flavor,
    )
    return psi, phi


def resonance_sweep(grid, tau_list, delta_list, omega, order, source, p):
    """Indicator / solve sweep over (tau, delta); rows for the CSV artifact.

    The indicator is evaluated on the lowest rotational mode of the unit
    sphere, the canonical weak-resonance candidate.
    """
    from .plasmon import PlasmonMode

    rows = []
    for tau in tau_list:
        for delta in delta_list:
            mats = MaterialConfig.negative_preset(tau, omega, delta)
            system = assemble_system(grid, mats, order)
            rhs = dipole_incident_trace(source, p, mats, grid)
            sol, cond = solve_scatter(system, rhs)
            sol_norm = pair_norm(sol[0], sol[1], grid)
            mode = PlasmonMode.from_sphere(2, 1, 0, 1.0, omega, delta)
            indicator = weak_resonance_indicator(system, mode, grid)
            rows.append((float(tau), float(delta), indicator, sol_norm, cond))
    return rows
