"""Complex orthonormal spherical harmonics on the unit sphere.

Conventions: Y_n^m(theta, phi) = Pbar_n^m(cos theta) * exp(i m phi) with the
Condon-Shortley phase folded into Pbar, normalized so that
int_{S^2} Y_n^m conj(Y_{n'}^{m'}) dsigma = delta_{nn'} delta_{mm'}.
Coefficient vectors are stored in (n, m) lexicographic order,
index(n, m) = n^2 + n + m, length (L+1)^2.

All evaluation routines use stable fully-normalized three-term recurrences
(values stay O(1), no factorials), vectorized over point arrays.
"""

from __future__ import annotations

import numpy as np

FOUR_PI = 4.0 * np.pi


def sh_index(n, m):
    """Flat index of the (n, m) coefficient."""
    return n * n + n + m


def num_coeffs(L: int) -> int:
    return (L + 1) * (L + 1)


def sh_degrees(L: int):
    """Arrays (n, m) of length (L+1)^2 giving the degree/order per slot."""
    n = np.concatenate([np.full(2 * k + 1, k, dtype=int) for k in range(L + 1)])
    m = np.concatenate([np.arange(-k, k + 1, dtype=int) for k in range(L + 1)])
    return n, m


def _legendre_blocks(x, s, L):
    """Fully normalized associated Legendre Pbar_n^m(x) for 0 <= m <= n <= L.

    x = cos(theta), s = sin(theta) >= 0, arrays of shape (P,).
    Returns per-m blocks: list over m of arrays (P, L+1-m) for n = m..L.
    Condon-Shortley phase included; values stay O(1) (no factorials).
    """
    P = x.size
    blocks = []
    pmm = np.full(P, 1.0 / np.sqrt(FOUR_PI))
    for m in range(L + 1):
        if m > 0:
            pmm = pmm * (-np.sqrt((2.0 * m + 1.0) / (2.0 * m))) * s
        blk = np.empty((P, L + 1 - m))
        blk[:, 0] = pmm
        if m < L:
            blk[:, 1] = np.sqrt(2.0 * m + 3.0) * x * pmm
        for n in range(m + 2, L + 1):
            a = np.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            b = np.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
            blk[:, n - m] = a * (x * blk[:, n - m - 1] - b * blk[:, n - m - 2])
        blocks.append(blk)
    return blocks


def _column_indices(L, m):
    n = np.arange(m, L + 1)
    return n * n + n + m, n * n + n - m


def ynm_matrix(theta, phi, L, derivatives=False):
    """Matrix of Y_n^m values at the given points.

    Parameters
    ----------
    theta, phi : arrays (P,)
        Colatitude / azimuth of the evaluation points.
    L : int
        Maximum degree.
    derivatives : bool
        If True, also return dY/dtheta and (1/sin theta) dY/dphi matrices
        (the ingredients of the unit-sphere surface gradient).

    Returns
    -------
    Y : (P, (L+1)^2) complex
    optionally (Y, dY_dtheta, dY_dphi_over_sin)
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    x = np.cos(theta)
    s = np.sin(theta)
    blocks = _legendre_blocks(x, s, L)
    nc = num_coeffs(L)
    Y = np.empty((theta.size, nc), dtype=complex)
    eiphi = np.exp(1j * phi)
    eim = np.ones_like(eiphi)
    for m in range(L + 1):
        if m > 0:
            eim = eim * eiphi
        pos, neg = _column_indices(L, m)
        vals = blocks[m] * eim[:, None]
        Y[:, pos] = vals
        if m > 0:
            Y[:, neg] = (-1.0) ** m * np.conj(vals)
    if not derivatives:
        return Y

    # sin(theta) dPbar/dtheta = n x Pbar_n^m - c_nm Pbar_{n-1}^m,
    # c_nm = sqrt((n^2 - m^2)(2n+1)/(2n-1)); safe away from the poles.
    s_safe = np.where(s < 1e-14, 1e-14, s)
    inv_s = (1.0 / s_safe)[:, None]
    Yt = np.empty_like(Y)
    Yp = np.empty_like(Y)
    eim = np.ones_like(eiphi)
    for m in range(L + 1):
        if m > 0:
            eim = eim * eiphi
        pos, neg = _column_indices(L, m)
        n = np.arange(m, L + 1, dtype=float)
        c = np.sqrt(np.maximum(n * n - m * m, 0.0) * (2.0 * n + 1.0) / np.maximum(2.0 * n - 1.0, 1.0))
        lower = np.zeros_like(blocks[m])
        lower[:, 1:] = blocks[m][:, :-1]
        dp = (n[None, :] * x[:, None] * blocks[m] - c[None, :] * lower) * inv_s
        vt = dp * eim[:, None]
        vp = (1j * m) * blocks[m] * eim[:, None] * inv_s
        Yt[:, pos] = vt
        Yp[:, pos] = vp
        if m > 0:
            Yt[:, neg] = (-1.0) ** m * np.conj(vt)
            Yp[:, neg] = (-1.0) ** m * np.conj(vp)
    return Y, Yt, Yp


def ynm(n, m, direction):
    """Single spherical harmonic value at a unit 3-vector direction."""
    if abs(m) > n:
        raise ValueError(f"order |m|={abs(m)} exceeds degree n={n}")
    d = np.asarray(direction, dtype=float)
    r = np.linalg.norm(d)
    if not np.isclose(r, 1.0, atol=1e-8):
        raise ValueError("direction must be a unit vector")
    theta = np.arccos(np.clip(d[2] / r, -1.0, 1.0))
    phi = np.arctan2(d[1], d[0])
    Y = ynm_matrix(np.array([theta]), np.array([phi]), n)
    return complex(Y[0, sh_index(n, m)])


def unit_vectors(theta, phi):
    """Cartesian (rhat, theta-hat, phi-hat) frames; arrays (P, 3)."""
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    rhat = np.stack([st * cp, st * sp, ct], axis=-1)
    that = np.stack([ct * cp, ct * sp, -st], axis=-1)
    phat = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return rhat, that, phat


def cartesian_to_angles(points):
    """(theta, phi, r) for an array of 3-vectors, shape (P, 3)."""
    p = np.atleast_2d(points)
    r = np.linalg.norm(p, axis=-1)
    theta = np.arccos(np.clip(p[:, 2] / np.where(r == 0, 1.0, r), -1.0, 1.0))
    phi = np.arctan2(p[:, 1], p[:, 0])
    return theta, phi, r


def gauss_legendre_ring(n_theta, n_phi):
    """Gauss-Legendre x uniform-azimuth product rule on S^2.

    Nodes are GL in cos(theta); weights integrate dsigma exactly for
    harmonics up to degree 2*n_theta - 1.
    Returns (theta (nt,), gl_weights (nt,), phi (np,), phi_weight scalar).
    """
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x[::-1])
    w = w[::-1]
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    return theta, w, phi, 2.0 * np.pi / n_phi


def polar_patch_rule(n_theta, n_phi):
    """Polar quadrature absorbing the 1/|x-y| surface singularity.

    Gauss-Legendre in the colatitude *angle* on (0, pi) times uniform
    azimuth, with sin(theta') folded into the weights.  Summing
    w * f over the nodes integrates f dsigma spectrally for integrands
    that are smooth functions of (theta', phi') even when f ~ 1/dist,
    because w ~ sin(theta') vanishes linearly at the pole.
    """
    x, w = np.polynomial.legendre.leggauss(n_theta)
    th = 0.5 * np.pi * (x + 1.0)
    wt = 0.5 * np.pi * w * np.sin(th)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    th2, ph2 = np.meshgrid(th, phi, indexing="ij")
    weights = np.repeat(wt, n_phi) * (2.0 * np.pi / n_phi)
    return th2.ravel(), ph2.ravel(), weights


def rotation_to(theta, phi):
    """Rotation matrix mapping the north pole to direction (theta, phi)."""
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    ry = np.array([[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]])
    rz = np.array([[cp, -sp, 0.0], [sp, cp, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry
