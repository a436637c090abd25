"""Boundary integral operators on star-shaped surfaces.

Scalar layer: the single-layer operator S, the double-layer operator K and
its adjoint K* are assembled as mass-normalized Galerkin matrices in the
harmonic coefficient basis via rotated polar quadrature.  The magnetic
boundary operator and its adjoint are never discretized by singular vector
quadrature; their actions on the two Helmholtz subspaces reduce to scalar
operators:

    M[vcurl V]  has potential  K[V]        (curl subspace),
    M*[grad X]  has potential  -K[X]       (gradient subspace),
    N[g] = vcurl S[curl_S g],   Q[f] = grad_S S[div_S f].

Off-boundary field evaluation and the smooth small-radius correction
operators are provided for the scattering layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import PolarPatch, assemble_scalar_values, near_singular_eval, ring_rotated_geometry
from .sphharm import num_coeffs, sh_degrees, ynm_matrix
from .surface import ShCoeffs, SurfaceGrid, TangentField, tubular_distance


class KindError(ValueError):
    """Operator kind does not match the requested operation."""


class FlavorError(ValueError):
    """Tangential field lives in the wrong Helmholtz subspace."""


class NearBoundaryError(ValueError):
    """Off-boundary evaluation point violates the quadrature guard."""


class AssemblyAccuracyError(RuntimeError):
    """Assembled matrices fail a structural accuracy requirement."""


class RegularizationError(RuntimeError):
    """An inverse application is too ill-conditioned to trust."""


class ResonanceError(RuntimeError):
    """Linear system is singular at an exact resonance."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


SCALAR_KINDS = ("S", "K", "Kstar", "Sk")
VECTOR_KINDS = ("Mk2", "L1", "L2")


@dataclass
class OperatorMatrix:
    """Dense coefficient-space matrix of a boundary operator.

    entries maps coefficient vectors to coefficient vectors (the Galerkin
    pairing composed with the inverse mass matrix); pairing holds the raw
    L^2-surface Galerkin matrix used for Gram constructions.
    """

    kind: str
    L: int
    entries: np.ndarray
    pairing: np.ndarray
    grid_id: str
    meta: dict = field(default_factory=dict)

    def apply(self, coeffs: ShCoeffs) -> ShCoeffs:
        return ShCoeffs(self.L, self.entries @ coeffs.padded(self.L))

    def to_json_dict(self):
        rows = []
        for r in self.entries:
            flat = np.empty(2 * r.size)
            flat[0::2] = r.real
            flat[1::2] = r.imag
            rows.append([float(v) for v in flat])
        return {"kind": self.kind, "L": self.L, "rows": rows}


@dataclass
class MaterialConfig:
    """Exterior/interior material parameters and the size parameter."""

    eps_c: complex
    mu_c: complex
    omega: float = 1.0
    delta: float = 0.05
    eps_e: complex = 1.0
    mu_e: complex = 1.0

    @classmethod
    def negative_preset(cls, tau, omega=1.0, delta=0.05):
        """eps_e = mu_e = 1, eps_c = mu_c = -tau with tau > 0, tau != 1."""
        if tau <= 0 or tau == 1:
            raise ValueError("preset needs tau > 0 and tau != 1")
        return cls(eps_c=-tau, mu_c=-tau, omega=omega, delta=delta)

    @property
    def tau(self):
        return -complex(self.eps_c).real

    @property
    def k_e(self):
        return self.omega * np.sqrt(complex(self.eps_e * self.mu_e))

    @property
    def k_c(self):
        # for the negative preset eps_c*mu_c = tau^2; take the positive root
        return self.omega * np.sqrt(complex(self.eps_c * self.mu_c))

    def wavenumber(self, which: str):
        return {"e": self.k_e, "c": self.k_c}[which]


# --------------------------------------------------------------------------
# scalar operator assembly (cached per grid)
# --------------------------------------------------------------------------

_scalar_cache = {}


def grid_signature(grid: SurfaceGrid) -> str:
    import hashlib

    h = hashlib.sha1()
    h.update(grid.radius_coeffs.coeffs.tobytes())
    h.update(np.int64(grid.L_quad).tobytes())
    return h.hexdigest()[:16]


def _galerkin_pair(grid: SurfaceGrid, values, L):
    nc = num_coeffs(L)
    return np.conj(grid.Y[:, :nc]).T @ (grid.area_weights[:, None] * values)


def scalar_operators(grid: SurfaceGrid, L: int, n_polar=None):
    """Assemble (and cache) the static scalar operators S, K, K* at degree L."""
    key = (grid_signature(grid), L, n_polar)
    if key not in _scalar_cache:
        if L > grid.L_quad:
            raise ValueError(f"operator degree {L} exceeds grid capacity")
        vals = assemble_scalar_values(grid, L, n_polar)
        nc = num_coeffs(L)
        W = grid.mass_matrix()[:nc, :nc]
        ops = {}
        for kind in ("S", "K", "Kstar"):
            G = _galerkin_pair(grid, vals[kind], L)
            ops[kind] = OperatorMatrix(
                kind, L, np.linalg.solve(W, G), G, grid_signature(grid)
            )
        _check_scalar_invariants(ops)
        _scalar_cache[key] = ops
    return _scalar_cache[key]


def _check_scalar_invariants(ops):
    GS = ops["S"].pairing
    herm = np.linalg.norm(GS - GS.conj().T) / np.linalg.norm(GS)
    if herm > 1e-8:
        raise AssemblyAccuracyError(f"single layer not symmetric: {herm:.2e}")
    mineig = np.linalg.eigvalsh(-0.5 * (GS + GS.conj().T))[0]
    if mineig <= 0:
        raise AssemblyAccuracyError("negative single layer lost definiteness")
    dual = np.linalg.norm(ops["K"].pairing - ops["Kstar"].pairing.conj().T)
    if dual / np.linalg.norm(ops["K"].pairing) > 1e-8:
        raise AssemblyAccuracyError("K / K* discrete duality violated")


def assemble_scalar(kind: str, grid: SurfaceGrid, L: int, k=None, n_polar=None):
    """Galerkin matrix of a scalar layer operator.

    kind in {S, K, Kstar} for the static kernels; 'Sk' gives the Helmholtz
    single layer at wavenumber k.
    """
    if kind not in SCALAR_KINDS:
        raise KindError(f"unknown scalar kind {kind!r}")
    if kind == "Sk":
        if k is None:
            raise ValueError("Sk needs a wavenumber")
        return _assemble_helmholtz_single(grid, L, k, n_polar)
    return scalar_operators(grid, L, n_polar)[kind]


def _assemble_helmholtz_single(grid, L, k, n_polar=None):
    patch = PolarPatch(grid, n_polar)
    nc = num_coeffs(L)
    nphi = grid.n_phi
    _, mslots = sh_degrees(L)
    vals = np.zeros((grid.n_nodes, nc), dtype=complex)
    for t in range(grid.n_theta):
        th0, ph0, frame = ring_rotated_geometry(grid, patch, t)
        Yref = ynm_matrix(th0, ph0, L)
        q = th0.size
        sl = slice(t * nphi, (t + 1) * nphi)
        ypos = frame["position"].reshape(nphi, q, 3)
        wjac = patch.weights[None, :] * frame["jacobian"].reshape(nphi, q)
        r = np.linalg.norm(grid.positions[sl][:, None, :] - ypos, axis=-1)
        ker = -np.exp(1j * k * r) / (4.0 * np.pi * r) * wjac
        rows = ker @ Yref
        vals[sl] = rows * np.exp(1j * np.outer(grid.phis[sl], mslots))
    W = grid.mass_matrix()[:nc, :nc]
    G = _galerkin_pair(grid, vals, L)
    return OperatorMatrix(
        "Sk", L, np.linalg.solve(W, G), G, grid_signature(grid), {"k": complex(k)}
    )


# --------------------------------------------------------------------------
# magnetic operator actions through the scalar reductions
# --------------------------------------------------------------------------


def _drop_mean(c: np.ndarray) -> np.ndarray:
    out = c.copy()
    out[0] = 0.0
    return out


def mnp_curl_apply(V: ShCoeffs, K_mat: OperatorMatrix) -> ShCoeffs:
    """Potential of the magnetic operator on the curl subspace: V -> K[V]."""
    if K_mat.kind != "K":
        raise KindError("curl-subspace action needs the K matrix")
    return ShCoeffs(K_mat.L, _drop_mean(K_mat.entries @ V.padded(K_mat.L)), True)


def mnp_grad_apply(X: ShCoeffs, K_mat: OperatorMatrix) -> ShCoeffs:
    """Potential of the adjoint operator on the gradient subspace: X -> -K[X]."""
    if K_mat.kind != "K":
        raise KindError("gradient-subspace action needs the K matrix")
    return ShCoeffs(K_mat.L, _drop_mean(-(K_mat.entries @ X.padded(K_mat.L))), True)


def galerkin_laplacian(grid: SurfaceGrid, L: int) -> np.ndarray:
    """Coefficient matrix of the surface Laplacian truncated at degree L."""
    nc = num_coeffs(L)
    W = grid.mass_matrix()[:nc, :nc]
    K = grid.stiffness_matrix()[:nc, :nc]
    return -np.linalg.solve(W, K)


def apply_N(g: TangentField, S_mat: OperatorMatrix, grid: SurfaceGrid) -> TangentField:
    """vcurl S[curl_S g]; annihilates gradient fields, output is pure curl."""
    if g.flavor != "curl":
        raise FlavorError("N acts on curl-trace fields")
    D = galerkin_laplacian(grid, S_mat.L)
    pot = -(S_mat.entries @ (D @ g.V.padded(S_mat.L)))
    return TangentField(
        ShCoeffs.zeros(S_mat.L, True), ShCoeffs(S_mat.L, _drop_mean(pot), True), "curl"
    )


def apply_Q(f: TangentField, S_mat: OperatorMatrix, grid: SurfaceGrid) -> TangentField:
    """grad S[div_S f]; annihilates curl fields, output is pure gradient."""
    if f.flavor != "div":
        raise FlavorError("Q acts on div-trace fields")
    D = galerkin_laplacian(grid, S_mat.L)
    pot = S_mat.entries @ (D @ f.X.padded(S_mat.L))
    return TangentField(
        ShCoeffs(S_mat.L, _drop_mean(pot), True), ShCoeffs.zeros(S_mat.L, True), "div"
    )


# --------------------------------------------------------------------------
# off-boundary evaluation
# --------------------------------------------------------------------------


def helmholtz_point_kernels(k, rvec, want_hessian=False):
    """G(k; x, y) = -exp(ik|x-y|)/(4 pi |x-y|) and its x-derivatives.

    rvec = x - y with shape (..., 3).  Returns (G, gradG) or
    (G, gradG, hessG) with gradG shape (..., 3), hessG (..., 3, 3).
    """
    r = np.linalg.norm(rvec, axis=-1)
    eikr = np.exp(1j * k * r)
    g = -eikr / (4.0 * np.pi * r)
    gp = eikr * (1.0 - 1j * k * r) / (4.0 * np.pi * r**2)
    rhat = rvec / r[..., None]
    grad = gp[..., None] * rhat
    if not want_hessian:
        return g, grad
    gpp = eikr * (k**2 * r**2 + 2j * k * r - 2.0) / (4.0 * np.pi * r**3)
    outer = rhat[..., :, None] * rhat[..., None, :]
    eye = np.eye(3)
    hess = (gpp - gp / r)[..., None, None] * outer + (gp / r)[..., None, None] * eye
    return g, grad, hess


def _density_node_values(density, grid):
    if isinstance(density, TangentField):
        return grid.tangent_values(density)
    if isinstance(density, ShCoeffs):
        return grid.synthesis(density)
    return np.asarray(density)


def offboundary_eval(density, k, x, which, grid: SurfaceGrid, quad="auto", n_polar=320):
    """Layer-potential evaluation at points off the boundary.

    which in {S, gradS} (scalar density) or {curlS_vec, curlcurlS_vec}
    (tangential density).  quad='auto' uses the surface grid as quadrature
    and refuses points closer than 3 x the node spacing; quad='near'
    switches to a polar rule concentrated under each evaluation point.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.asarray(x).ndim == 1
    if quad == "auto":
        guard = 3.0 * grid.max_spacing
        for p in pts:
            d = tubular_distance(p, grid)
            if d <= guard:
                raise NearBoundaryError(
                    f"point at distance {d:.3g} inside quadrature guard "
                    f"{guard:.3g}; pass quad='near' for a refined rule"
                )
        out = _offboundary_nodes(density, k, pts, which, grid)
    elif quad == "near":
        out = np.array(
            [_offboundary_near(density, k, p, which, grid, n_polar) for p in pts]
        )
    else:
        raise ValueError(f"unknown quad mode {quad!r}")
    return out[0] if single else out


def _offboundary_kernel_apply(k, rvec, which, dens_vals, weights):
    if which == "S":
        g, _ = helmholtz_point_kernels(k, rvec)
        return np.sum(weights * g * dens_vals, axis=-1)
    if which == "gradS":
        g, grad = helmholtz_point_kernels(k, rvec)
        return np.sum((weights * dens_vals)[..., None] * grad, axis=-2)
    if which == "curlS_vec":
        g, grad = helmholtz_point_kernels(k, rvec)
        return np.sum(weights[..., None] * np.cross(grad, dens_vals), axis=-2)
    if which == "curlcurlS_vec":
        g, grad, hess = helmholtz_point_kernels(k, rvec, want_hessian=True)
        term = np.einsum("...cd,...d->...c", hess, dens_vals)
        term += (k**2 * g)[..., None] * dens_vals
        return np.sum(weights[..., None] * term, axis=-2)
    raise KindError(f"unknown evaluation kind {which!r}")


def _offboundary_nodes(density, k, pts, which, grid):
    dens = _density_node_values(density, grid)
    rvec = pts[:, None, :] - grid.positions[None, :, :]
    return _offboundary_kernel_apply(k, rvec, which, dens, grid.area_weights[None, :])


def _offboundary_near(density, k, p, which, grid, n_polar):
    def integrand(rot):
        if isinstance(density, TangentField):
            dens = grid.tangent_values_at(density, rot["theta"], rot["phi"])
        elif isinstance(density, ShCoeffs):
            dens = grid.scalar_values_at(density, rot["theta"], rot["phi"])
        else:
            raise TypeError("near evaluation needs a coefficient-space density")
        rvec = p[None, :] - rot["position"]
        if which == "S":
            g, _ = helmholtz_point_kernels(k, rvec)
            return g * dens
        if which == "gradS":
            g, grad = helmholtz_point_kernels(k, rvec)
            return dens[:, None] * grad
        if which == "curlS_vec":
            g, grad = helmholtz_point_kernels(k, rvec)
            return np.cross(grad, dens)
        if which == "curlcurlS_vec":
            g, grad, hess = helmholtz_point_kernels(k, rvec, want_hessian=True)
            return np.einsum("qcd,qd->qc", hess, dens) + (k**2 * g)[:, None] * dens
        raise KindError(f"unknown evaluation kind {which!r}")

    return near_singular_eval(grid, p, integrand, n_polar=n_polar)


# --------------------------------------------------------------------------
# smooth correction operators for the scaled scattering system
# --------------------------------------------------------------------------

_vector_cache = {}


def tangent_mass_stack(grid: SurfaceGrid, L: int):
    """Gram of the stacked (grad, curl) potential basis, mean-free slots."""
    nc = num_coeffs(L)
    K = grid.stiffness_matrix()[:nc, :nc]
    d = nc - 1
    W = np.zeros((2 * d, 2 * d), dtype=complex)
    W[:d, :d] = K[1:, 1:]
    W[d:, d:] = K[1:, 1:]
    return W


def _vector_bases_assembled(grid: SurfaceGrid, L: int, n_polar=None):
    """Raw integral tensors for the three correction kernels.

    Returns dict kind -> Vals (n_nodes, 2(nc-1), 3): the kernel integral of
    every stacked basis field (gradient block first, curl block second),
    before the leading nu_x cross product and material constants.
    Kernels are assembled with unit constants:
      Mk2 : (1/(8 pi)) int [uhat (nu_x . phi) - phi (nu_x . uhat)] / 1
      L1  : int (1/2)[I/r + R R^T / r^3] phi
      L2  : int (2/3) phi
    """
    key = (grid_signature(grid), L, n_polar)
    if key in _vector_cache:
        return _vector_cache[key]
    patch = PolarPatch(grid, n_polar or max(L + 12, 22))
    nc = num_coeffs(L)
    d = nc - 1
    nphi = grid.n_phi
    q = patch.weights.size
    _, mslots = sh_degrees(L)
    out = {
        kind: np.zeros((grid.n_nodes, 2 * d, 3), dtype=complex)
        for kind in VECTOR_KINDS
    }
    for t in range(grid.n_theta):
        th0, ph0, frame = ring_rotated_geometry(grid, patch, t)
        Y, Yt, Yp = ynm_matrix(th0, ph0, L, derivatives=True)
        st = np.sin(th0)
        Yth = Yt  # d/dtheta
        Yph = Yp * st[:, None]  # plain d/dphi
        sl = slice(t * nphi, (t + 1) * nphi)
        ypos = frame["position"].reshape(nphi, q, 3)
        ynu = frame["normal"].reshape(nphi, q, 3)
        wjac = patch.weights[None, :] * frame["jacobian"].reshape(nphi, q)
        tth = frame["t_theta"].reshape(nphi, q, 3)
        tph = frame["t_phi"].reshape(nphi, q, 3)
        E = frame["E"].reshape(nphi, q)
        F = frame["F"].reshape(nphi, q)
        G = frame["G"].reshape(nphi, q)
        det = E * G - F**2
        # grad Y_j = (dY_j/dtheta) alpha + (dY_j/dphi) beta at each point
        alpha = (G[..., None] * tth - F[..., None] * tph) / det[..., None]
        beta = (E[..., None] * tph - F[..., None] * tth) / det[..., None]
        # curl basis = -nu x grad: same weights with rotated frame vectors
        alpha_c = -np.cross(ynu, alpha)
        beta_c = -np.cross(ynu, beta)

        rvec = grid.positions[sl][:, None, :] - ypos
        r = np.linalg.norm(rvec, axis=-1)
        uhat = rvec / r[..., None]
        nu_x = grid.normals[sl]
        phase = np.exp(1j * np.outer(grid.phis[sl], mslots))

        # Mk2 includes its nu_x cross product (the triple-product form is
        # automatically tangential); L1/L2 get theirs applied later.
        def mk2_apply(vec):
            nu_dot_phi = np.einsum("tj,tqj->tq", nu_x, vec)
            nu_dot_u = np.einsum("tj,tqj->tq", nu_x, uhat)
            return (
                uhat * nu_dot_phi[..., None] - vec * nu_dot_u[..., None]
            ) / (8.0 * np.pi)

        def l1_apply(vec):
            rr_phi = np.einsum("tqj,tqj->tq", rvec, vec)
            return 0.5 * (vec / r[..., None] + rvec * (rr_phi / r**3)[..., None])

        def l2_apply(vec):
            return (2.0 / 3.0) * vec

        def contract(fn, vec_a, vec_b):
            A = (fn(vec_a) * wjac[..., None]).transpose(0, 2, 1).reshape(nphi * 3, q)
            B = (fn(vec_b) * wjac[..., None]).transpose(0, 2, 1).reshape(nphi * 3, q)
            rows = (A @ Yth + B @ Yph).reshape(nphi, 3, nc) * phase[:, None, :]
            return rows[:, :, 1:].transpose(0, 2, 1)  # (nphi, d, 3)

        for kind, fn in (("Mk2", mk2_apply), ("L1", l1_apply), ("L2", l2_apply)):
            out[kind][sl, :d, :] = contract(fn, alpha, beta)
            out[kind][sl, d:, :] = contract(fn, alpha_c, beta_c)
    _vector_cache[key] = out
    return out


def assemble_correction(
    kind: str, grid: SurfaceGrid, materials: MaterialConfig, L: int, wavenumber="e"
):
    """Correction-operator Galerkin matrix on the stacked potential basis.

    Mk2 carries the factor k^2 of the chosen wavenumber; L1/L2 carry the
    material constants C_j = i^j (k_c^{j+1} - k_e^{j+1}) / (4 pi omega (j-1)!).
    Ordering of the stacked basis: gradient potentials then curl potentials,
    degree >= 1 slots only.
    """
    if kind not in VECTOR_KINDS:
        raise KindError(f"unknown correction kind {kind!r}")
    vals = _vector_bases_assembled(grid, L)[kind]
    k_e, k_c = materials.k_e, materials.k_c
    if kind == "Mk2":
        scale = materials.wavenumber(wavenumber) ** 2
        cross = False  # the triple-product kernel already carries nu_x
    elif kind == "L1":
        # constants from the direct delta-expansion of the kernel
        # difference: i^{j+1} (k_c^{j+1} - k_e^{j+1}) / (4 pi omega (j-1)!),
        # verified against the transmission conditions of the full system
        scale = -(k_c**2 - k_e**2) / (4.0 * np.pi * materials.omega)
        cross = True
    else:
        scale = -1j * (k_c**3 - k_e**3) / (4.0 * np.pi * materials.omega)
        cross = True
    field_vals = scale * vals
    if cross:
        field_vals = np.cross(
            grid.normals[:, None, :], field_vals, axisa=2, axisb=2
        )
    # Galerkin rows against the stacked test basis
    nc = num_coeffs(L)
    d = nc - 1
    gb = grid.grad_basis()[:, 1:nc, :]
    cb = grid.curl_basis()[:, 1:nc, :]
    w = grid.area_weights[:, None, None]
    G = np.zeros((2 * d, 2 * d), dtype=complex)
    G[:d, :] = np.einsum("pic,pjc->ij", np.conj(gb) * w, field_vals)
    G[d:, :] = np.einsum("pic,pjc->ij", np.conj(cb) * w, field_vals)
    W = tangent_mass_stack(grid, L)
    entries = np.linalg.solve(W, G)
    return OperatorMatrix(
        kind,
        L,
        entries,
        G,
        grid_signature(grid),
        {"wavenumber": wavenumber, "scale": complex(scale)},
    )
