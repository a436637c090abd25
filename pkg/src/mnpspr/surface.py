"""Discretized star-shaped surfaces and surface calculus.

A surface is given by a positive radial function rho on the unit sphere,
stored as a truncated harmonic series; the boundary is {rho(yhat) yhat}.
Grids are Gauss-Legendre in cos(theta) times uniform azimuth, sized so that
products of harmonics up to the working degree integrate exactly.

Scalar surface functions are represented by their harmonic coefficients on
the *parameter* sphere; tangential fields by a pair of scalar potentials
(gradient part X, rotated-gradient part V), so that

    field = grad_S X  +  vcurl_S V,      vcurl_S = -normal x grad_S.

All differential operators are evaluated analytically from the first
fundamental form of the parametrization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .sphharm import (
    FOUR_PI,
    cartesian_to_angles,
    gauss_legendre_ring,
    num_coeffs,
    sh_degrees,
    sh_index,
    ynm_matrix,
)


class StarShapeError(ValueError):
    """Radial function is not strictly positive on the grid."""


class ResolutionError(ValueError):
    """Grid cannot resolve the requested harmonic degree."""


@dataclass
class ShCoeffs:
    """Truncated harmonic coefficient vector of a scalar surface function."""

    L: int
    coeffs: np.ndarray
    mean_free: bool = False

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (num_coeffs(self.L),):
            raise ValueError(
                f"expected {num_coeffs(self.L)} coefficients for L={self.L}, "
                f"got {self.coeffs.shape}"
            )
        if self.mean_free:
            self.coeffs = self.coeffs.copy()
            self.coeffs[0] = 0.0

    @classmethod
    def zeros(cls, L, mean_free=False):
        return cls(L, np.zeros(num_coeffs(L), dtype=complex), mean_free)

    @classmethod
    def constant(cls, value, L=0):
        c = np.zeros(num_coeffs(L), dtype=complex)
        c[0] = value * np.sqrt(FOUR_PI)
        return cls(L, c)

    @classmethod
    def unit(cls, n, m, L=None, amplitude=1.0):
        L = n if L is None else L
        c = np.zeros(num_coeffs(L), dtype=complex)
        c[sh_index(n, m)] = amplitude
        return cls(L, c, mean_free=(n > 0))

    def copy(self):
        return ShCoeffs(self.L, self.coeffs.copy(), self.mean_free)

    def padded(self, L):
        """Coefficient vector zero-extended (or validated-truncated) to degree L."""
        if L == self.L:
            return self.coeffs
        out = np.zeros(num_coeffs(L), dtype=complex)
        k = min(num_coeffs(L), num_coeffs(self.L))
        out[:k] = self.coeffs[:k]
        return out

    def project_mean_free(self):
        out = self.copy()
        out.coeffs[0] = 0.0
        out.mean_free = True
        return out


@dataclass
class TangentField:
    """Tangential field stored as Helmholtz potentials (both mean-free)."""

    X: ShCoeffs
    V: ShCoeffs
    flavor: str = "div"  # 'div' or 'curl' trace-space membership tag

    def __post_init__(self):
        if self.flavor not in ("div", "curl"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        self.X = self.X.project_mean_free()
        self.V = self.V.project_mean_free()

    @classmethod
    def from_potentials(cls, X=None, V=None, L=None, flavor="div"):
        if X is None and V is None:
            raise ValueError("need at least one potential")
        L = L if L is not None else max(
            X.L if X is not None else 0, V.L if V is not None else 0
        )
        X = ShCoeffs(L, X.padded(L), True) if X is not None else ShCoeffs.zeros(L, True)
        V = ShCoeffs(L, V.padded(L), True) if V is not None else ShCoeffs.zeros(L, True)
        return cls(X, V, flavor)

    def copy(self):
        return TangentField(self.X.copy(), self.V.copy(), self.flavor)


class SurfaceGrid:
    """Immutable discretized star-shaped surface with quadrature data.

    Attributes (all per node, nodes ordered theta-major):
      positions (N,3), normals (N,3), area_weights (N,), param_weights (N,),
      jacobian (N,), tangent_theta/tangent_phi (N,3), metric E, F, G (N,).
    """

    def __init__(self, radius_coeffs: ShCoeffs, L_quad: int):
        if L_quad < radius_coeffs.L:
            raise ResolutionError(
                f"L_quad={L_quad} below geometry degree {radius_coeffs.L}"
            )
        self.radius_coeffs = radius_coeffs.copy()
        self.L_geo = radius_coeffs.L
        self.L_quad = int(L_quad)
        self.n_theta = 2 * self.L_quad + 2
        self.n_phi = 2 * self.L_quad + 2

        th, glw, ph, phw = gauss_legendre_ring(self.n_theta, self.n_phi)
        th2, ph2 = np.meshgrid(th, ph, indexing="ij")
        self.thetas = th2.ravel()
        self.phis = ph2.ravel()
        self.param_weights = np.repeat(glw, self.n_phi) * phw
        self.n_nodes = self.thetas.size

        frame = self.frame_at(self.thetas, self.phis)
        self.rho = frame["rho"]
        if np.any(self.rho <= 0):
            raise StarShapeError("radial function must be strictly positive")
        self.positions = frame["position"]
        self.normals = frame["normal"]
        self.jacobian = frame["jacobian"]
        self.tangent_theta = frame["t_theta"]
        self.tangent_phi = frame["t_phi"]
        self.metric_E = frame["E"]
        self.metric_F = frame["F"]
        self.metric_G = frame["G"]
        self.area_weights = self.param_weights * self.jacobian
        self.area = float(np.sum(self.area_weights))

        # synthesis matrices on the node set, up to the grid capacity
        self.Y, self.Yt, self.Yp = ynm_matrix(
            self.thetas, self.phis, self.L_quad, derivatives=True
        )
        # meridian node spacing, the resolution scale of near-boundary guards
        self.max_spacing = float(np.max(self.rho) * np.pi / self.n_theta)
        self._grad_basis = None
        self._curl_basis = None
        self._stiffness = None
        self._mass = None

    # -- radial function and frames at arbitrary parameter points ----------

    def radius_at(self, theta, phi):
        """rho and its angular derivatives (rho, drho/dtheta, drho/dphi)."""
        Y, Yt, Yp = ynm_matrix(theta, phi, self.L_geo, derivatives=True)
        c = self.radius_coeffs.coeffs
        st = np.sin(np.atleast_1d(np.asarray(theta, dtype=float)))
        rho = (Y @ c).real
        rho_t = (Yt @ c).real
        rho_p = (Yp @ c).real * st
        return rho, rho_t, rho_p

    def frame_at(self, theta, phi):
        """Surface frame quantities at arbitrary parameter points."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        rho, rho_t, rho_p = self.radius_at(theta, phi)
        st, ct = np.sin(theta), np.cos(theta)
        sp, cp = np.sin(phi), np.cos(phi)
        rhat = np.stack([st * cp, st * sp, ct], axis=-1)
        that = np.stack([ct * cp, ct * sp, -st], axis=-1)
        phat = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)

        position = rho[:, None] * rhat
        t_theta = rho_t[:, None] * rhat + rho[:, None] * that
        t_phi = rho_p[:, None] * rhat + (rho * st)[:, None] * phat
        E = np.einsum("ij,ij->i", t_theta, t_theta)
        F = np.einsum("ij,ij->i", t_theta, t_phi)
        G = np.einsum("ij,ij->i", t_phi, t_phi)
        # |grad_S rho|^2 on the parameter sphere
        st_safe = np.where(st < 1e-14, 1e-14, st)
        grad_rho2 = rho_t**2 + (rho_p / st_safe) ** 2
        jac = rho * np.sqrt(rho**2 + grad_rho2)
        normal = (
            rho[:, None] * rhat
            - rho_t[:, None] * that
            - (rho_p / st_safe)[:, None] * phat
        )
        normal = normal / np.linalg.norm(normal, axis=-1, keepdims=True)
        return {
            "rho": rho,
            "position": position,
            "normal": normal,
            "jacobian": jac,
            "t_theta": t_theta,
            "t_phi": t_phi,
            "E": E,
            "F": F,
            "G": G,
        }

    # -- scalar transforms ---------------------------------------------------

    def synthesis(self, coeffs: ShCoeffs):
        """Node values of a coefficient vector."""
        return self.Y[:, : num_coeffs(coeffs.L)] @ coeffs.coeffs

    def analysis(self, values, L=None):
        """Harmonic coefficients of node values; exact for band-limited input."""
        L = self.L_quad if L is None else L
        if L > self.L_quad:
            raise ResolutionError(f"analysis degree {L} exceeds grid capacity")
        nc = num_coeffs(L)
        c = np.conj(self.Y[:, :nc]).T @ (self.param_weights * np.asarray(values))
        return ShCoeffs(L, c)

    def synthesis_derivs(self, coeffs: ShCoeffs):
        """(du/dtheta, (1/sin) du/dphi) node values of a coefficient vector."""
        nc = num_coeffs(coeffs.L)
        return self.Yt[:, :nc] @ coeffs.coeffs, self.Yp[:, :nc] @ coeffs.coeffs

    def mass_matrix(self):
        """Hermitian Gram of the parameter basis in L^2 of the surface."""
        if self._mass is None:
            self._mass = np.conj(self.Y).T @ (self.area_weights[:, None] * self.Y)
        return self._mass

    # -- surface differential operators ---------------------------------------
    #
    # grad and vec_curl are pointwise-exact from the first fundamental form.
    # div, scal_curl and the Laplacian use the weak (Galerkin) form against
    # gradient / rotated-gradient basis fields: this avoids differentiating
    # pole-singular covariant components and makes the composition identities
    # hold to quadrature accuracy.

    def grad(self, coeffs: ShCoeffs):
        """Surface gradient as 3-vectors per node."""
        ut, up_s = self.synthesis_derivs(coeffs)
        st = np.sin(self.thetas)
        up = up_s * st  # plain du/dphi
        g = self.metric_E * self.metric_G - self.metric_F**2
        a = (self.metric_G * ut - self.metric_F * up) / g
        b = (self.metric_E * up - self.metric_F * ut) / g
        return a[:, None] * self.tangent_theta + b[:, None] * self.tangent_phi

    def vec_curl(self, coeffs: ShCoeffs):
        """Rotated surface gradient  -normal x grad."""
        return -np.cross(self.normals, self.grad(coeffs))

    def grad_basis(self):
        """Node values of grad Y_j for every basis function, (N, NC, 3)."""
        if self._grad_basis is None:
            st = np.sin(self.thetas)
            g = self.metric_E * self.metric_G - self.metric_F**2
            ut = self.Yt
            up = self.Yp * st[:, None]
            a = (self.metric_G[:, None] * ut - self.metric_F[:, None] * up) / g[:, None]
            b = (self.metric_E[:, None] * up - self.metric_F[:, None] * ut) / g[:, None]
            self._grad_basis = (
                a[:, :, None] * self.tangent_theta[:, None, :]
                + b[:, :, None] * self.tangent_phi[:, None, :]
            )
        return self._grad_basis

    def curl_basis(self):
        """Node values of vcurl Y_j = -normal x grad Y_j, (N, NC, 3)."""
        if self._curl_basis is None:
            gb = self.grad_basis()
            self._curl_basis = -np.cross(
                self.normals[:, None, :], gb, axisa=2, axisb=2
            )
        return self._curl_basis

    def stiffness_matrix(self):
        """int grad(conj Y_i) . grad(Y_j) ds; Hermitian, PSD, kernel = constants."""
        if self._stiffness is None:
            gb = self.grad_basis()
            wgb = self.area_weights[:, None, None] * gb
            self._stiffness = np.einsum("pic,pjc->ij", np.conj(wgb), gb)
        return self._stiffness

    def _weak_coeffs(self, pairings):
        return np.linalg.solve(self.mass_matrix(), pairings)

    def div(self, field_nodes):
        """Surface divergence of a tangential node field (values per node)."""
        gb = self.grad_basis()
        pair = -np.einsum(
            "pic,pc->i", np.conj(gb), self.area_weights[:, None] * field_nodes
        )
        return self.Y @ self._weak_coeffs(pair)

    def scal_curl(self, field_nodes):
        """Scalar surface curl  normal . (nabla x field)."""
        cb = self.curl_basis()
        pair = np.einsum(
            "pic,pc->i", np.conj(cb), self.area_weights[:, None] * field_nodes
        )
        return self.Y @ self._weak_coeffs(pair)

    def laplace_beltrami(self, coeffs: ShCoeffs):
        """Laplace-Beltrami node values, as div(grad)."""
        return self.Y @ (self.laplace_matrix() @ coeffs.padded(self.L_quad))

    def laplace_matrix(self):
        """Coefficient-space Laplace-Beltrami matrix, -M^{-1} K_stiff."""
        return -np.linalg.solve(self.mass_matrix(), self.stiffness_matrix())

    def solve_laplace(self, coeffs: ShCoeffs):
        """Mean-free solution of  Delta u = f  on the grid's full degree."""
        rhs = self.mass_matrix() @ coeffs.padded(self.L_quad)
        K = self.stiffness_matrix()
        out = np.zeros(num_coeffs(self.L_quad), dtype=complex)
        out[1:] = np.linalg.solve(-K[1:, 1:], rhs[1:])
        return ShCoeffs(self.L_quad, out, mean_free=True)

    # -- tangential fields ----------------------------------------------------

    def tangent_values(self, f: TangentField):
        """Node 3-vectors of a Helmholtz-potential field."""
        return self.grad(f.X) + self.vec_curl(f.V)

    def scalar_values_at(self, coeffs: ShCoeffs, theta, phi):
        """Values of a coefficient vector at arbitrary parameter points."""
        return ynm_matrix(theta, phi, coeffs.L) @ coeffs.coeffs

    def tangent_values_at(self, f: TangentField, theta, phi):
        """Helmholtz-potential field at arbitrary parameter points."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        L = max(f.X.L, f.V.L)
        _, Yt, Yp = ynm_matrix(theta, phi, L, derivatives=True)
        frame = self.frame_at(theta, phi)
        st = np.sin(theta)
        det = frame["E"] * frame["G"] - frame["F"] ** 2
        alpha = (
            frame["G"][:, None] * frame["t_theta"] - frame["F"][:, None] * frame["t_phi"]
        ) / det[:, None]
        beta = (
            frame["E"][:, None] * frame["t_phi"] - frame["F"][:, None] * frame["t_theta"]
        ) / det[:, None]

        def gradient(c):
            ut = Yt[:, : num_coeffs(c.L)] @ c.coeffs
            up = (Yp[:, : num_coeffs(c.L)] @ c.coeffs) * st
            return ut[:, None] * alpha + up[:, None] * beta

        out = gradient(f.X)
        out += -np.cross(frame["normal"], gradient(f.V))
        return out

    def helmholtz_decompose(self, field_nodes, L=None, flavor="div"):
        """Project a tangential node field onto Helmholtz potentials.

        X solves Delta X = div(field); V solves Delta V = -curl(field),
        both in the weak form.  Exact for fields in the span of the
        degree-L_quad potential basis.
        """
        L = self.L_quad if L is None else L
        w = self.area_weights[:, None] * np.asarray(field_nodes)
        gpair = np.einsum("pic,pc->i", np.conj(self.grad_basis()), w)
        cpair = np.einsum("pic,pc->i", np.conj(self.curl_basis()), w)
        K = self.stiffness_matrix()
        nc_full = num_coeffs(self.L_quad)
        X = np.zeros(nc_full, dtype=complex)
        V = np.zeros(nc_full, dtype=complex)
        X[1:] = np.linalg.solve(K[1:, 1:], gpair[1:])
        V[1:] = np.linalg.solve(K[1:, 1:], cpair[1:])
        nc = num_coeffs(L)
        return TangentField(
            ShCoeffs(L, X[:nc], mean_free=True),
            ShCoeffs(L, V[:nc], mean_free=True),
            flavor,
        )

    # -- export ---------------------------------------------------------------

    def to_csv(self, path):
        """Write the grid as CSV (index, theta, phi, x, y, z, nu, weight)."""
        with open(path, "w", newline="") as fh:
            fh.write("index,theta,phi,x,y,z,nx,ny,nz,w\n")
            for i in range(self.n_nodes):
                p = self.positions[i]
                nv = self.normals[i]
                fh.write(
                    f"{i},{self.thetas[i]:.15e},{self.phis[i]:.15e},"
                    f"{p[0]:.15e},{p[1]:.15e},{p[2]:.15e},"
                    f"{nv[0]:.15e},{nv[1]:.15e},{nv[2]:.15e},"
                    f"{self.area_weights[i]:.15e}\n"
                )


def radius_from_json(spec):
    """Radial ShCoeffs from {"radius": [[n, m, re, im], ...], "L_quad": int}."""
    entries = spec["radius"]
    L = max(int(e[0]) for e in entries)
    c = np.zeros(num_coeffs(L), dtype=complex)
    for n, m, re, im in entries:
        c[sh_index(int(n), int(m))] = re + 1j * im
    return ShCoeffs(L, c)


def surface_spec_to_json(radius_coeffs: ShCoeffs, L_quad: int):
    n, m = sh_degrees(radius_coeffs.L)
    entries = [
        [int(nn), int(mm), float(cc.real), float(cc.imag)]
        for nn, mm, cc in zip(n, m, radius_coeffs.coeffs)
        if cc != 0
    ]
    return {"radius": entries, "L_quad": int(L_quad)}


def build_surface(radius_coeffs: ShCoeffs, L_quad: int) -> SurfaceGrid:
    """Build a surface grid; validates star-shapedness and resolution."""
    return SurfaceGrid(radius_coeffs, L_quad)


def sphere_surface(radius=1.0, L_quad=16) -> SurfaceGrid:
    return build_surface(ShCoeffs.constant(radius), L_quad)


def perturbed_sphere(amplitude=0.05, n=2, m=0, L_quad=12) -> SurfaceGrid:
    """rho = 1 + amplitude * Re Y_n^m, the standard non-sphere test surface."""
    c = np.zeros(num_coeffs(n), dtype=complex)
    c[0] = np.sqrt(FOUR_PI)
    if m == 0:
        c[sh_index(n, 0)] += amplitude
    else:
        c[sh_index(n, m)] += 0.5 * amplitude
        c[sh_index(n, -m)] += 0.5 * amplitude * (-1.0) ** m
    return build_surface(ShCoeffs(n, c), L_quad)


def sh_analysis(node_values, grid: SurfaceGrid, L: int) -> ShCoeffs:
    """Harmonic analysis of node values on the parameter sphere."""
    return grid.analysis(node_values, L)


def sh_synthesis(coeffs: ShCoeffs, grid: SurfaceGrid):
    """Node values of a coefficient vector (inverse of sh_analysis)."""
    return grid.synthesis(coeffs)


def surface_diff(kind, inp, grid: SurfaceGrid):
    """Surface differential operator dispatch.

    kind in {grad, vec_curl, scal_curl, div, laplace_beltrami}; scalar kinds
    take ShCoeffs, field kinds take a TangentField or node 3-vectors.
    """
    if kind in ("grad", "vec_curl", "laplace_beltrami"):
        if not isinstance(inp, ShCoeffs):
            raise TypeError(f"{kind} expects scalar coefficients")
        return getattr(grid, kind)(inp)
    if kind in ("div", "scal_curl"):
        if isinstance(inp, TangentField):
            inp = grid.tangent_values(inp)
        elif isinstance(inp, ShCoeffs):
            raise TypeError(f"{kind} expects a tangential field")
        return getattr(grid, kind)(inp)
    raise ValueError(f"unknown operator kind {kind!r}")


def tubular_distance(x, grid: SurfaceGrid) -> float:
    """Node-sampled distance from a point to the surface."""
    x = np.asarray(x, dtype=float)
    return float(np.min(np.linalg.norm(grid.positions - x[None, :], axis=1)))


def random_band_limited(rng, L, smoothness=2.0, mean_free=True):
    """Random coefficients with (1+n)^{-smoothness} decay; test helper."""
    n, _ = sh_degrees(L)
    scale = (1.0 + n) ** (-smoothness)
    c = scale * (rng.standard_normal(num_coeffs(L)) + 1j * rng.standard_normal(num_coeffs(L)))
    coeffs = ShCoeffs(L, c)
    return coeffs.project_mean_free() if mean_free else coeffs
