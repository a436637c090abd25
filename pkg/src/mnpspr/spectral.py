"""Symmetrized eigensolves and identity verification for boundary operators.

The scalar adjoint double layer K* is self-adjoint in the inner product
-int u S[v]; the magnetic operator restricted to the curl subspace and its
adjoint on the gradient subspace are self-adjoint in the inverse-symmetrizer
products, which in potential form are the quotient forms

    <a, b>  =  -<pot_a, S^{-1} pot_b>      (constants projected out),

while the H^{3/2}-type products weight with the symmetrizers themselves,

    <a, b>  =  -<Lap pot_a, S Lap pot_b>.

All eigensolves are generalized Hermitian solves against the positive
definite Gram (Cholesky-based), so eigenvalues are real by construction and
the departure of the unsymmetrized matrix from Hermitian is reported as a
diagnostic residual.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .potentials import (
    AssemblyAccuracyError,
    FlavorError,
    OperatorMatrix,
    RegularizationError,
    galerkin_laplacian,
)
from .sphharm import num_coeffs, sh_degrees
from .surface import ShCoeffs, SurfaceGrid, TangentField, random_band_limited

log = logging.getLogger(__name__)

HALF_EXCLUSION_TOL = 1e-8


@dataclass
class SpectralSet:
    """Ordered eigenpairs of a symmetrized boundary operator.

    vectors holds one coefficient column per mode: densities theta_j for the
    scalar operator, scalar potentials of the eigenfields otherwise.
    """

    operator: str
    eigenvalues: np.ndarray
    vectors: np.ndarray
    gram: str
    L: int
    grid_id: str
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.eigenvalues.size

    def clusters(self, tol=1e-6):
        """Multiplicity clusters of the (sorted) eigenvalue list."""
        lam = self.eigenvalues
        ids = np.zeros(lam.size, dtype=int)
        for i in range(1, lam.size):
            ids[i] = ids[i - 1] + (abs(lam[i] - lam[i - 1]) > tol)
        return ids

    def to_json_dict(self):
        n, m = sh_degrees(self.L)
        modes = []
        for j in range(len(self)):
            col = self.vectors[:, j]
            modes.append(
                [
                    [int(nn), int(mm), float(c.real), float(c.imag)]
                    for nn, mm, c in zip(n, m, col)
                ]
            )
        return {
            "operator": self.operator,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "gram": self.gram,
            "potentials": modes,
        }

    def eigenvalue_table(self):
        """Rows (j, lambda, multiplicity_cluster) for CSV export."""
        ids = self.clusters()
        counts = np.bincount(ids)
        return [
            (j, float(self.eigenvalues[j]), int(counts[ids[j]]))
            for j in range(len(self))
        ]


def _hermitize(A):
    return 0.5 * (A + A.conj().T)


def np_spectrum(S_mat: OperatorMatrix, Kstar_mat: OperatorMatrix) -> SpectralSet:
    """Symmetrized spectrum of the scalar adjoint double layer.

    Generalized Hermitian eigensolve with Gram -S; eigenvectors are
    orthonormal in that Gram and eigenvalues lie in (-1/2, 1/2].
    """
    B = _hermitize(-S_mat.pairing)
    if np.linalg.eigvalsh(B)[0] <= 0:
        raise AssemblyAccuracyError("negative single layer is not positive definite")
    A = -S_mat.pairing @ Kstar_mat.entries
    sym_res = np.linalg.norm(A - A.conj().T) / np.linalg.norm(A)
    mu, theta = sla.eigh(_hermitize(A), B)
    order = np.argsort(-np.abs(mu))
    mu, theta = mu[order], theta[:, order]
    return SpectralSet(
        "Kstar",
        mu,
        theta,
        "inner_S",
        S_mat.L,
        S_mat.grid_id,
        {"sym_residual": float(sym_res)},
    )


# --------------------------------------------------------------------------
# Gram forms
# --------------------------------------------------------------------------


def _gram_cache(S_mat: OperatorMatrix, grid: SurfaceGrid):
    cache = S_mat.meta.setdefault("gram_cache", {})
    if "Ghat" not in cache:
        nc = num_coeffs(S_mat.L)
        W = grid.mass_matrix()[:nc, :nc]
        GS = _hermitize(S_mat.pairing)
        cond = np.linalg.cond(GS)
        if cond > 1e12:
            raise RegularizationError(
                f"single layer too ill-conditioned for inversion: cond={cond:.2e}"
            )
        GSinv = W @ np.linalg.solve(GS, W)  # pairing matrix of S^{-1}
        e = np.zeros(nc)
        e[0] = 1.0
        ge = GSinv @ e
        P = np.eye(nc) - np.outer(e, ge.conj()) / (e @ GSinv @ e)
        cache["Ghat"] = _hermitize(P.conj().T @ GSinv @ P)
        cache["D"] = galerkin_laplacian(grid, S_mat.L)
        cache["GS"] = GS
    return cache


def quotient_gram_matrix(S_mat: OperatorMatrix, grid: SurfaceGrid):
    """Positive matrix of -<pot, S^{-1} pot> on mean-free coefficients."""
    cache = _gram_cache(S_mat, grid)
    return _hermitize(-cache["Ghat"][1:, 1:])


def symmetrizer_gram_matrix(S_mat: OperatorMatrix, grid: SurfaceGrid):
    """Positive matrix of -<Lap pot, S Lap pot> on mean-free coefficients."""
    cache = _gram_cache(S_mat, grid)
    D, GS = cache["D"], cache["GS"]
    M = -(D.conj().T @ GS @ D)
    return _hermitize(M[1:, 1:])


GRAM_KINDS = ("curl_Ninv", "grad_Qinv", "curl_N", "grad_Q")


def _gram_potential(kind, fld: TangentField):
    if kind.startswith("curl"):
        if fld.flavor != "curl":
            raise FlavorError(f"{kind} expects curl-flavor fields")
        return fld.V
    if fld.flavor != "div":
        raise FlavorError(f"{kind} expects div-flavor fields")
    return fld.X


def gram(kind: str, a: TangentField, b: TangentField, S_mat: OperatorMatrix, grid: SurfaceGrid):
    """Weighted inner products of tangential fields (conjugate-linear in a).

    curl_Ninv / grad_Qinv: the inverse-symmetrizer products in which the
    restricted magnetic operators are self-adjoint (quotient -S^{-1} form);
    curl_N / grad_Q: the symmetrizer-weighted products on the smoother
    subspaces (-Lap S Lap form).  All four are positive definite.
    """
    if kind not in GRAM_KINDS:
        raise ValueError(f"unknown gram kind {kind!r}")
    cache = _gram_cache(S_mat, grid)
    pa = _gram_potential(kind, a).padded(S_mat.L)
    pb = _gram_potential(kind, b).padded(S_mat.L)
    if kind in ("curl_Ninv", "grad_Qinv"):
        return complex(-(pa.conj() @ (cache["Ghat"] @ pb)))
    D, GS = cache["D"], cache["GS"]
    return complex(-((D @ pa).conj() @ (GS @ (D @ pb))))


def gram_norm(kind, a, S_mat, grid):
    return float(np.sqrt(max(gram(kind, a, a, S_mat, grid).real, 0.0)))


# --------------------------------------------------------------------------
# magnetic spectra
# --------------------------------------------------------------------------


def mnp_spectra(np_set: SpectralSet, S_mat: OperatorMatrix, grid: SurfaceGrid):
    """Eigen-sets of the magnetic operator on its two Helmholtz subspaces.

    Curl subspace: eigenvalue mu_j with eigenfield potential S[theta_j]
    (the mode at 1/2 is excluded: its potential is constant and the curl
    vanishes).  Gradient subspace: eigenvalue -mu_j with the same potential.
    Potentials are stored mean-free, normalized in the quotient grams.
    """
    keep = np.abs(np_set.eigenvalues - 0.5) > HALF_EXCLUSION_TOL
    dropped = np.count_nonzero(~keep)
    if dropped != 1:
        log.info("excluded %d eigenvalue(s) at 1/2 from the curl subspace", dropped)
    mu = np_set.eigenvalues[keep]
    theta = np_set.vectors[:, keep]
    pots = S_mat.entries @ theta
    pots[0, :] = 0.0
    G1 = quotient_gram_matrix(S_mat, grid)
    norms = np.sqrt(np.maximum(np.einsum("ij,ij->j", pots[1:].conj(), G1 @ pots[1:]).real, 1e-300))
    pots = pots / norms[None, :]
    curl = SpectralSet(
        "M_curl", mu, pots, "curl_Ninv", S_mat.L, S_mat.grid_id,
        {"excluded_half": int(dropped)},
    )
    order = np.argsort(-np.abs(-mu))
    grad = SpectralSet(
        "Mstar_grad", -mu[order], pots[:, order], "grad_Qinv", S_mat.L,
        S_mat.grid_id, {"excluded_half": int(dropped)},
    )
    return curl, grad


def curl_subspace_operator(ops, grid: SurfaceGrid):
    """Quotient potential map of the magnetic operator on the curl subspace.

    Returns (A, G): the mean-free block of the K coefficient matrix and the
    positive Gram in which it is self-adjoint.
    """
    A = ops["K"].entries[1:, 1:]
    G = quotient_gram_matrix(ops["S"], grid)
    return A, G


def grad_subspace_operator(ops, grid: SurfaceGrid):
    """Quotient potential map of the adjoint operator on gradients: -K."""
    A = -ops["K"].entries[1:, 1:]
    G = quotient_gram_matrix(ops["S"], grid)
    return A, G


def subspace_spectrum(ops, grid: SurfaceGrid, which="M_curl"):
    """Independent symmetrized eigensolve of the restricted magnetic maps."""
    A, G = (
        curl_subspace_operator(ops, grid)
        if which == "M_curl"
        else grad_subspace_operator(ops, grid)
    )
    lam = sla.eigh(_hermitize(G @ A), G, eigvals_only=True)
    return np.sort(lam)[::-1]


def self_adjointness_residual(op: str, grid: SurfaceGrid, ops, gram_weight="natural"):
    """|| G A - A^H G || / || G A || for the restricted magnetic operators."""
    if op == "M_curl":
        A, G = curl_subspace_operator(ops, grid)
    elif op == "Mstar_grad":
        A, G = grad_subspace_operator(ops, grid)
    else:
        raise ValueError(f"unknown operator {op!r}")
    if gram_weight == "identity":
        G = np.eye(A.shape[0])
    GA = G @ A
    return float(np.linalg.norm(GA - GA.conj().T) / np.linalg.norm(GA))


# --------------------------------------------------------------------------
# trace norms and identity residuals
# --------------------------------------------------------------------------


def sobolev_coeff_norm(coeffs: np.ndarray, L: int, s=-0.5):
    n, _ = sh_degrees(L)
    w = (1.0 + n * (n + 1.0)) ** s
    return float(np.sqrt(np.sum(w * np.abs(coeffs) ** 2)))


def trace_norm(fld: TangentField, grid: SurfaceGrid):
    """Discrete div/curl trace norm: field H^{-1/2} plus scalar part H^{-1/2}.

    The vector part is measured component-wise through the parameter basis;
    the scalar part is div f (div flavor) or the scalar curl (curl flavor).
    """
    vals = grid.tangent_values(fld)
    L = grid.L_quad
    comp = sum(
        sobolev_coeff_norm(grid.analysis(vals[:, c], L).coeffs, L) ** 2
        for c in range(3)
    )
    D = galerkin_laplacian(grid, max(fld.X.L, fld.V.L))
    if fld.flavor == "div":
        scal = D @ fld.X.coeffs
    else:
        scal = -(D @ fld.V.coeffs)
    return float(np.sqrt(comp) + sobolev_coeff_norm(scal, max(fld.X.L, fld.V.L)))


def calderon_residual(which: str, test: TangentField, ops, grid: SurfaceGrid):
    """Relative residual of the symmetrizer commutation identities.

    which='curl': (N M* - M N) on a curl-flavor field; which='grad':
    (M* Q - Q M) on a div-flavor field.  Both reduce through the scalar
    layer to (S K* - K S) applied to the Laplacian of the potential, which
    is what the assembled matrices are tested on here.
    """
    S, K, Kstar = ops["S"], ops["K"], ops["Kstar"]
    D = galerkin_laplacian(grid, S.L)
    if which == "curl":
        if test.flavor != "curl":
            raise FlavorError("curl identity needs a curl-flavor test field")
        base = D @ test.V.padded(S.L)
        lhs = -(S.entries @ (Kstar.entries @ base))
        rhs = -(K.entries @ (S.entries @ base))
        mk = lambda c: TangentField.from_potentials(
            V=ShCoeffs(S.L, c, True), L=S.L, flavor="curl"
        )
        ref = test
    elif which == "grad":
        if test.flavor != "div":
            raise FlavorError("gradient identity needs a div-flavor test field")
        base = D @ test.X.padded(S.L)
        lhs = -(K.entries @ (S.entries @ base))
        rhs = -(S.entries @ (Kstar.entries @ base))
        mk = lambda c: TangentField.from_potentials(
            X=ShCoeffs(S.L, c, True), L=S.L, flavor="div"
        )
        ref = test
    else:
        raise ValueError(f"unknown identity {which!r}")
    diff = lhs - rhs
    diff[0] = 0.0
    return trace_norm(mk(diff), grid) / trace_norm(ref, grid)


def scalar_calderon_residual(ops):
    """|| K S - S K* || / || K S || on the assembled coefficient matrices."""
    S, K, Kstar = ops["S"].entries, ops["K"].entries, ops["Kstar"].entries
    KS = K @ S
    return float(np.linalg.norm(KS - S @ Kstar) / np.linalg.norm(KS))


def norm_equivalence_report(grid: SurfaceGrid, ops, sample_count=10, flavor="curl", seed=0):
    """Observed ratios gram-norm / Sobolev trace norm over random fields."""
    if sample_count < 10:
        raise ValueError("need at least 10 samples")
    rng = np.random.default_rng(seed)
    kind = "curl_Ninv" if flavor == "curl" else "grad_Qinv"
    ratios = []
    for _ in range(sample_count):
        pot = random_band_limited(rng, ops["S"].L, smoothness=1.5)
        fld = (
            TangentField.from_potentials(V=pot, L=ops["S"].L, flavor="curl")
            if flavor == "curl"
            else TangentField.from_potentials(X=pot, L=ops["S"].L, flavor="div")
        )
        ratios.append(gram_norm(kind, fld, ops["S"], grid) / trace_norm(fld, grid))
    return {"min_ratio": float(min(ratios)), "max_ratio": float(max(ratios))}


# --------------------------------------------------------------------------
# expansion in eigenfields (completeness helper)
# --------------------------------------------------------------------------


def curl_field_expansion(g: TangentField, curl_set: SpectralSet, ops, grid, J=None):
    """Expand a curl-flavor field over the inverse-symmetrizer eigenfields.

    Uses the biorthogonality of {N^{-1} eigenfield} with the eigenfields
    under the surface pairing; exact at full order on band-limited fields.
    Returns (coefficients, reconstructed potential V at each truncation J).
    """
    S = ops["S"]
    nc = num_coeffs(S.L)
    K_st = grid.stiffness_matrix()[:nc, :nc]
    Wg = g.V.padded(S.L)
    pots = curl_set.vectors
    # pairing int conj(phi_j).g = pot_j^H K_stiff pot_g
    coeffs = pots.conj().T @ (K_st @ Wg)
    # synthesis family: potentials of N^{-1} phi_j, dual to -phi_j
    cache = _gram_cache(S, grid)
    D = cache["D"]
    u = np.linalg.solve(S.pairing, grid.mass_matrix()[:nc, :nc] @ pots)
    U = np.zeros_like(pots)
    U[1:, :] = np.linalg.solve(D[1:, 1:], -u[1:, :])
    J = pots.shape[1] if J is None else J
    recon = U[:, :J] @ (-coeffs[:J])
    return coeffs, recon
