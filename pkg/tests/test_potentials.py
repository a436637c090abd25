import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import eval_legendre

from mnpspr.mie import SphereMode, mode_tangent_field
from mnpspr.potentials import (
    FlavorError,
    KindError,
    MaterialConfig,
    NearBoundaryError,
    apply_N,
    apply_Q,
    assemble_correction,
    assemble_scalar,
    galerkin_laplacian,
    helmholtz_point_kernels,
    mnp_curl_apply,
    mnp_grad_apply,
    offboundary_eval,
    scalar_operators,
    tangent_mass_stack,
)
from mnpspr.sphharm import num_coeffs, polar_patch_rule, sh_index
from mnpspr.specfun import vector_sph_matrix
from mnpspr.surface import ShCoeffs, TangentField, random_band_limited, sphere_surface


def funk_hecke_eigenvalue(kernel_of_t, n):
    """1D oracle: int_{S^2} f(xhat.yhat) Y_n(y) dsigma = 2 pi Y_n(x) int f P_n."""
    val, _ = quad(lambda t: kernel_of_t(t) * eval_legendre(n, t), -1.0, 1.0,
                  limit=200, epsabs=1e-12, epsrel=1e-12)
    return 2.0 * np.pi * val


class TestScalarAssembly:
    def test_single_layer_on_constant(self, sphere10_ops):
        S = sphere10_ops["S"]
        out = S.apply(ShCoeffs.unit(0, 0, L=10))
        assert abs(out.coeffs[0] + 1.0) < 1e-8
        assert np.max(np.abs(out.coeffs[1:])) < 1e-8

    def test_adjoint_double_layer_against_funk_hecke(self, sphere10_ops):
        # independent oracle: the kernel on the unit sphere depends only on
        # xhat.yhat; its action on Y_1^0 follows from a 1D quadrature
        lam = funk_hecke_eigenvalue(lambda t: 1.0 / (8.0 * np.pi * np.sqrt(2.0 - 2.0 * t)), 1)
        out = sphere10_ops["Kstar"].apply(ShCoeffs.unit(1, 0, L=10))
        assert abs(out.coeffs[sh_index(1, 0)] - lam) < 1e-6
        assert abs(lam - 1.0 / 6.0) < 1e-10

    def test_single_layer_against_funk_hecke(self, sphere10_ops):
        lam = funk_hecke_eigenvalue(lambda t: -1.0 / (4.0 * np.pi * np.sqrt(2.0 - 2.0 * t)), 3)
        out = sphere10_ops["S"].apply(ShCoeffs.unit(3, 2, L=10))
        assert abs(out.coeffs[sh_index(3, 2)] - lam) < 1e-8

    def test_sphere_diagonals(self, sphere16_ops):
        n = np.concatenate([np.full(2 * k + 1, k) for k in range(17)])
        S = sphere16_ops["S"].entries
        Ks = sphere16_ops["Kstar"].entries
        assert np.max(np.abs(np.diag(S) + 1.0 / (2 * n + 1))) < 1e-6
        assert np.max(np.abs(np.diag(Ks) - 1.0 / (2 * (2 * n + 1)))) < 1e-6
        offdiag = Ks - np.diag(np.diag(Ks))
        assert np.max(np.abs(offdiag)) < 1e-10

    def test_pairing_invariants(self, pert12_ops):
        GS = pert12_ops["S"].pairing
        assert np.linalg.norm(GS - GS.conj().T) / np.linalg.norm(GS) < 1e-8
        assert np.linalg.eigvalsh(-0.5 * (GS + GS.conj().T))[0] > 0
        GK, GKs = pert12_ops["K"].pairing, pert12_ops["Kstar"].pairing
        assert np.linalg.norm(GK - GKs.conj().T) / np.linalg.norm(GK) < 1e-8

    def test_perturbed_spectrum_structure(self, pert12_ops, pert12):
        from mnpspr.spectral import np_spectrum

        st = np_spectrum(pert12_ops["S"], pert12_ops["Kstar"])
        assert np.all(st.eigenvalues > -0.5)
        assert np.all(st.eigenvalues <= 0.5 + 1e-12)
        assert np.count_nonzero(np.abs(st.eigenvalues - 0.5) < 1e-6) == 1

    def test_kind_validation(self, sphere10):
        with pytest.raises(KindError):
            assemble_scalar("T", sphere10, 8)

    def test_helmholtz_single_layer(self, sphere10):
        # S^k on the unit sphere: eigenvalue -i k j_n(k) h_n(k)
        from mnpspr.specfun import spherical_h1
        from scipy.special import spherical_jn

        k = 1.3
        Sk = assemble_scalar("Sk", sphere10, 8, k=k)
        n = np.concatenate([np.full(2 * j + 1, j) for j in range(9)])
        expect = -1j * k * spherical_jn(n, k) * spherical_h1(n, k)
        assert np.max(np.abs(np.diag(Sk.entries) - expect)) < 1e-8


class TestSubspaceActions:
    def test_curl_action_sphere_eigenvalue(self, sphere10_ops):
        out = mnp_curl_apply(ShCoeffs.unit(3, 1, L=10), sphere10_ops["K"])
        assert abs(out.coeffs[sh_index(3, 1)] - 1.0 / 14.0) < 1e-8

    def test_zero_density(self, sphere10_ops):
        out = mnp_curl_apply(ShCoeffs.zeros(10, True), sphere10_ops["K"])
        assert np.max(np.abs(out.coeffs)) == 0.0

    def test_grad_action_sphere_eigenvalue(self, sphere10_ops):
        out = mnp_grad_apply(ShCoeffs.unit(3, 1, L=10), sphere10_ops["K"])
        assert abs(out.coeffs[sh_index(3, 1)] + 1.0 / 14.0) < 1e-8

    def test_kind_mismatch(self, sphere10_ops):
        with pytest.raises(KindError):
            mnp_curl_apply(ShCoeffs.unit(1, 0), sphere10_ops["Kstar"])

    def test_curl_range_is_divergence_free(self, pert12, pert12_ops, rng):
        # the curl-subspace output has no gradient part by construction of
        # the reduced realization; verify through node fields
        V = random_band_limited(rng, 8)
        out = mnp_curl_apply(V, pert12_ops["K"])
        fld = TangentField.from_potentials(V=out, L=12, flavor="curl")
        div = pert12.div(pert12.tangent_values(fld) )
        # compare against the same field's curl magnitude
        mag = np.max(np.abs(pert12.tangent_values(fld)))
        assert np.max(np.abs(div)) < 1e-6 * max(mag, 1e-30) + 1e-12

    def test_duality_pairing_against_direct_quadrature(self, sphere10, sphere10_ops):
        # <M[vcurl V], vcurl W>_surface equals <K V, -Lap W> on the sphere;
        # check the assembled route against exact eigenvalue arithmetic
        V = ShCoeffs.unit(2, 1, L=10)
        W = ShCoeffs.unit(2, 1, L=10)
        out = mnp_curl_apply(V, sphere10_ops["K"])
        f1 = TangentField.from_potentials(V=out, L=10, flavor="curl")
        f2 = TangentField.from_potentials(V=W, L=10, flavor="curl")
        v1 = sphere10.tangent_values(f1)
        v2 = sphere10.tangent_values(f2)
        pair = np.sum(sphere10.area_weights * np.einsum("ij,ij->i", v1, np.conj(v2)))
        exact = (1.0 / 10.0) * 6.0  # eigenvalue 1/(2*5) times |vcurl Y_2|^2 = n(n+1)
        assert abs(pair - exact) < 1e-6


class TestSymmetrizers:
    def test_N_annihilates_gradients(self, pert12, pert12_ops, rng):
        for _ in range(3):
            g = TangentField.from_potentials(X=random_band_limited(rng, 8), L=12, flavor="curl")
            out = apply_N(g, pert12_ops["S"], pert12)
            assert np.max(np.abs(out.V.coeffs)) <= 1e-8
            assert np.max(np.abs(out.X.coeffs)) == 0.0

    def test_Q_annihilates_curls(self, pert12, pert12_ops, rng):
        for _ in range(3):
            f = TangentField.from_potentials(V=random_band_limited(rng, 8), L=12, flavor="div")
            out = apply_Q(f, pert12_ops["S"], pert12)
            assert np.max(np.abs(out.X.coeffs)) <= 1e-8

    def test_sphere_values(self, sphere10, sphere10_ops):
        for n in (1, 2, 5):
            g = TangentField.from_potentials(V=ShCoeffs.unit(n, 0, L=10), L=10, flavor="curl")
            out = apply_N(g, sphere10_ops["S"], sphere10)
            # vcurl S curl: potential -S[Lap V] = -(n(n+1))/(2n+1) V explains
            # the sign: S has negative eigenvalues
            expect = -n * (n + 1) / (2.0 * n + 1.0)
            assert abs(out.V.coeffs[sh_index(n, 0)] - expect) < 1e-8
            f = TangentField.from_potentials(X=ShCoeffs.unit(n, 0, L=10), L=10, flavor="div")
            outq = apply_Q(f, sphere10_ops["S"], sphere10)
            assert abs(outq.X.coeffs[sh_index(n, 0)] + expect) < 1e-8

    def test_self_adjoint_under_surface_pairing(self, pert12, pert12_ops, rng):
        # bilinear surface pairing, no conjugation
        g1 = TangentField.from_potentials(V=random_band_limited(rng, 7), L=12, flavor="curl")
        g2 = TangentField.from_potentials(V=random_band_limited(rng, 7), L=12, flavor="curl")
        N1 = pert12.tangent_values(apply_N(g1, pert12_ops["S"], pert12))
        N2 = pert12.tangent_values(apply_N(g2, pert12_ops["S"], pert12))
        v1 = pert12.tangent_values(g1)
        v2 = pert12.tangent_values(g2)
        a = np.sum(pert12.area_weights * np.einsum("ij,ij->i", N1, v2))
        b = np.sum(pert12.area_weights * np.einsum("ij,ij->i", v1, N2))
        assert abs(a - b) < 1e-8 * max(abs(a), 1e-30)

    def test_flavor_validation(self, sphere10, sphere10_ops, rng):
        g = TangentField.from_potentials(V=random_band_limited(rng, 4), L=10, flavor="div")
        with pytest.raises(FlavorError):
            apply_N(g, sphere10_ops["S"], sphere10)
        with pytest.raises(FlavorError):
            apply_Q(TangentField.from_potentials(X=random_band_limited(rng, 4), L=10, flavor="curl"),
                    sphere10_ops["S"], sphere10)


class TestOffBoundary:
    def test_zero_density(self, sphere16):
        out = offboundary_eval(
            TangentField.from_potentials(V=ShCoeffs.zeros(8, True), flavor="curl"),
            1.0, np.array([0, 0, 2.0]), "curlS_vec", sphere16)
        assert np.max(np.abs(out)) == 0.0

    def test_static_exterior_monopole(self, sphere16):
        # single layer of the constant harmonic at |x| = 2 and k = 0
        out = offboundary_eval(ShCoeffs.unit(0, 0), 0.0, np.array([0, 0, 2.0]), "S", sphere16)
        assert abs(out + 0.5 / np.sqrt(4 * np.pi)) < 1e-10

    def test_exact_formula_cross_check(self, sphere16):
        from mnpspr.mie import exact_sphere_potential

        # off-axis probe: the rotational harmonic of order m=0 vanishes on
        # the axis itself
        mode = SphereMode(1, 1, 0, 1.0)
        x = 2.0 * np.array([0.6, 0.64, 0.48])
        num = offboundary_eval(mode_tangent_field(mode, 12), 1.0, x, "curlS_vec", sphere16)
        ex = exact_sphere_potential(mode, 1.0, x, "curlS")
        assert np.max(np.abs(num - ex)) < 1e-6 * np.max(np.abs(ex))

    def test_near_guard(self, sphere16):
        dens = ShCoeffs.unit(1, 0, L=8)
        with pytest.raises(NearBoundaryError):
            offboundary_eval(dens, 1.0, np.array([0, 0, 1.05]), "S", sphere16)
        # the refined rule accepts the same point
        v = offboundary_eval(dens, 0.0, np.array([0, 0, 1.05]), "S", sphere16, quad="near")
        expect = -1.0 / 3.0 * 1.05 ** -2 * np.sqrt(3 / (4 * np.pi))
        assert abs(v - expect) < 1e-8

    def test_kernel_derivatives_by_fd(self):
        k = 1.3
        rv = np.array([[0.7, -0.4, 1.1]])
        g, gr, he = helmholtz_point_kernels(k, rv, want_hessian=True)
        h = 1e-6
        for c in range(3):
            e = np.zeros(3); e[c] = h
            gp, grp = helmholtz_point_kernels(k, rv + e)
            gm, grm = helmholtz_point_kernels(k, rv - e)
            assert abs((gp - gm)[0] / (2 * h) - gr[0, c]) < 1e-7
            assert np.max(np.abs((grp - grm)[0] / (2 * h) - he[0, :, c])) < 1e-6

    def test_divergence_commutation_off_boundary(self, pert12, rng):
        # div of the vector single layer equals the single layer of the
        # surface divergence, sampled off the boundary (static kernel)
        f = TangentField.from_potentials(X=random_band_limited(rng, 6),
                                         V=random_band_limited(rng, 6), flavor="div")
        vals = pert12.tangent_values(f)
        x = np.array([0.3, -0.2, 2.2])
        rvec = x[None, :] - pert12.positions
        _, grad = helmholtz_point_kernels(0.0, rvec)
        div_S_vec = np.sum(pert12.area_weights[:, None] * grad * vals)
        divf = pert12.div(vals)
        S_div = np.sum(pert12.area_weights * (-1.0 / (4 * np.pi)) /
                       np.linalg.norm(rvec, axis=1) * divf)
        assert abs(div_S_vec - S_div) < 1e-7 * max(abs(S_div), 1e-30)


class TestJumpRelations:
    @pytest.mark.parametrize("n", [0, 1, 2, 3])
    def test_one_sided_normal_derivatives(self, sphere16, n):
        # Richardson-extrapolated normal derivative of the single layer;
        # four probe offsets reach the 1e-4 regime (three leave a cubic term
        # of a few 1e-3, asserted at its own level below)
        dens = ShCoeffs.unit(n, 0, L=8)
        xhat = np.array([0.6, 0.64, 0.48])
        ts = np.array([0.1, 0.05, 0.025, 0.0125])
        vals_p, vals_m = [], []
        for t in ts:
            gp = offboundary_eval(dens, 0.0, (1 + t) * xhat, "gradS", sphere16, quad="near")
            gm = offboundary_eval(dens, 0.0, (1 - t) * xhat, "gradS", sphere16, quad="near")
            vals_p.append(np.dot(gp, xhat))
            vals_m.append(np.dot(gm, xhat))
        y = sphere16.scalar_values_at(dens, *_angles(xhat))[0]
        lam = 1.0 / (2 * (2 * n + 1))
        ext = np.polyval(np.polyfit(ts, vals_p, 3), 0.0)
        int_ = np.polyval(np.polyfit(ts, vals_m, 3), 0.0)
        assert abs(ext - (0.5 + lam) * y) < 1e-4 * max(abs(y), 1.0)
        assert abs(int_ - (-0.5 + lam) * y) < 1e-4 * max(abs(y), 1.0)
        # three-point variant: achievable accuracy is a few 1e-3
        ext3 = np.polyval(np.polyfit(ts[:3], vals_p[:3], 2), 0.0)
        assert abs(ext3 - (0.5 + lam) * y) < 5e-3 * max(abs(y), 1.0)


def _angles(xhat):
    from mnpspr.sphharm import cartesian_to_angles

    th, ph, _ = cartesian_to_angles(xhat / np.linalg.norm(xhat))
    return th, ph


class TestCorrections:
    def test_material_presets(self):
        m = MaterialConfig.negative_preset(0.5, omega=2.0, delta=0.1)
        assert m.k_e == 2.0 and abs(m.k_c - 1.0) < 1e-14
        with pytest.raises(ValueError):
            MaterialConfig.negative_preset(1.0)
        with pytest.raises(ValueError):
            MaterialConfig.negative_preset(-2.0)

    def test_equal_wavenumbers_kill_couplings(self, sphere10):
        mats = MaterialConfig(eps_c=1.0, mu_c=1.0, omega=1.0, delta=0.05)
        L1 = assemble_correction("L1", sphere10, mats, 6)
        L2 = assemble_correction("L2", sphere10, mats, 6)
        assert np.max(np.abs(L1.entries)) == 0.0
        assert np.max(np.abs(L2.entries)) == 0.0

    def test_mk2_against_independent_quadrature(self, sphere10):
        # oracle: direct fine polar quadrature of the curl-of-(distance *
        # density) kernel on the unit sphere, built without the assembly code
        mats = MaterialConfig.negative_preset(0.5, omega=1.0)
        k = 1.0
        Mk2 = assemble_correction("Mk2", sphere10, mats, 6, "e")
        mode = SphereMode(2, 1, 0, 1.0)
        dens = mode_tangent_field(mode, 6)
        d = num_coeffs(6) - 1
        stacked = np.concatenate([dens.X.coeffs[1:], dens.V.coeffs[1:]])
        out = Mk2.entries @ stacked
        outf = TangentField.from_potentials(
            X=_lift(out[:d], 6), V=_lift(out[d:], 6), flavor="div")
        i_node = 37
        got = sphere10.tangent_values(outf)[i_node]

        th, ph, w = polar_patch_rule(64, 128)
        from mnpspr.sphharm import rotation_to, cartesian_to_angles
        R = rotation_to(sphere10.thetas[i_node], sphere10.phis[i_node])
        st = np.sin(th)
        dirs = np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=-1) @ R.T
        th2, ph2, _ = cartesian_to_angles(dirs)
        p1, p2 = vector_sph_matrix(th2, ph2, 1)
        phi_vals = p2[:, sh_index(1, 0), :]
        x = sphere10.positions[i_node]
        nu = sphere10.normals[i_node]
        rvec = x[None, :] - dirs
        u = rvec / np.linalg.norm(rvec, axis=1)[:, None]
        integrand = (k**2 / (8 * np.pi)) * (
            u * (phi_vals @ nu)[:, None] - phi_vals * (u @ nu)[:, None]
        )
        ref = np.sum(w[:, None] * integrand, axis=0)
        assert np.max(np.abs(got - ref)) < 1e-6 * np.max(np.abs(ref))

    def test_l1_by_parts_matches_divergence_form(self, sphere10):
        # the assembled kernel uses surface integration by parts; compare
        # with the original form carrying the explicit surface divergence
        mats = MaterialConfig.negative_preset(0.5, omega=1.0)
        L1 = assemble_correction("L1", sphere10, mats, 6)
        n = 2
        mode = SphereMode(1, n, 0, 1.0)  # gradient-type density
        dens = mode_tangent_field(mode, 6)
        d = num_coeffs(6) - 1
        stacked = np.concatenate([dens.X.coeffs[1:], dens.V.coeffs[1:]])
        out = L1.entries @ stacked
        outf = TangentField.from_potentials(X=_lift(out[:d], 6), V=_lift(out[d:], 6), flavor="div")
        i_node = 21
        got = sphere10.tangent_values(outf)[i_node]

        th, ph, w = polar_patch_rule(72, 144)
        from mnpspr.sphharm import rotation_to, cartesian_to_angles
        R = rotation_to(sphere10.thetas[i_node], sphere10.phis[i_node])
        st = np.sin(th)
        dirs = np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=-1) @ R.T
        th2, ph2, _ = cartesian_to_angles(dirs)
        p1, _ = vector_sph_matrix(th2, ph2, n)
        phi_vals = p1[:, sh_index(n, 0), :]
        # surface divergence of phi_1 on the unit sphere
        from mnpspr.sphharm import ynm_matrix
        Yv = ynm_matrix(th2, ph2, n)[:, sh_index(n, 0)]
        div_vals = -np.sqrt(n * (n + 1.0)) * Yv
        x = sphere10.positions[i_node]
        nu = sphere10.normals[i_node]
        rvec = x[None, :] - dirs
        r = np.linalg.norm(rvec, axis=1)
        k_e, k_c = mats.k_e, mats.k_c
        C1 = 1j**2 * (k_c**2 - k_e**2) / (4 * np.pi * mats.omega)
        inner = np.sum(
            w[:, None] * (phi_vals / r[:, None]
                          - 0.5 * rvec / r[:, None] * div_vals[:, None]),
            axis=0,
        )
        ref = C1 * np.cross(nu, inner)
        assert np.max(np.abs(got - ref)) < 1e-6 * np.max(np.abs(ref))

    def test_correction_norm_scaling(self, sphere10):
        from mnpspr.scatter import static_magnetic_block

        mats = MaterialConfig.negative_preset(0.5, omega=1.0)
        Mk2 = assemble_correction("Mk2", sphere10, mats, 8, "e").entries
        M = static_magnetic_block(sphere10, 8)
        deltas = np.array([0.1, 0.05, 0.025])
        ratios = [np.linalg.norm(d**2 * Mk2) / np.linalg.norm(M) for d in deltas]
        slope = np.polyfit(np.log(deltas), np.log(ratios), 1)[0]
        assert abs(slope - 2.0) < 0.1

    def test_mass_stack_is_positive(self, sphere10):
        W = tangent_mass_stack(sphere10, 6)
        assert np.linalg.eigvalsh(W)[0] > 0


def _lift(a, L):
    c = np.zeros(num_coeffs(L), dtype=complex)
    c[1:] = a
    return ShCoeffs(L, c, True)


class TestDivergenceIntertwining:
    def test_reduced_block_identity(self, pert12):
        # the gradient-block realization makes div(M f) = -K*(div f)
        # structural; assert it as a refactoring guard
        from mnpspr.scatter import static_magnetic_block

        L = pert12.L_quad
        M = static_magnetic_block(pert12, L)
        D = galerkin_laplacian(pert12, L)[1:, 1:]
        Kst = scalar_operators(pert12, L)["Kstar"].entries[1:, 1:]
        d = D.shape[0]
        lhs = D @ M[:d, :d]
        rhs = -Kst @ D
        assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-7


class TestExports:
    def test_operator_matrix_json(self, sphere10_ops):
        d = sphere10_ops["S"].to_json_dict()
        assert d["kind"] == "S" and d["L"] == 10
        row0 = np.array(d["rows"][0])
        entry00 = row0[0] + 1j * row0[1]
        assert abs(entry00 - sphere10_ops["S"].entries[0, 0]) < 1e-15
        assert len(d["rows"]) == num_coeffs(10)
