"""Vectorised numpy implementations of the hot kernels.

Every function here has a loop-based twin in ``_numba`` with an identical
signature; ``qdd.kernels`` picks one set at import time.
"""

import numpy as np
from scipy.linalg import solve_banded


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve a tridiagonal system.

    ``lower[i]`` multiplies ``x[i-1]`` in row ``i`` (``lower[0]`` is ignored),
    ``upper[i]`` multiplies ``x[i+1]`` (``upper[-1]`` is ignored).
    """
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def tridiag_matvec(lower, diag, upper, x):
    y = diag * x
    y[1:] += lower[1:] * x[:-1]
    y[:-1] += upper[:-1] * x[1:]
    return y


def _half_ratios(y):
    """Neighbour ratios ``e^{(y_{i-1} - y_i)/2}`` and ``e^{(y_{i+1} - y_i)/2}``.

    Working with ratios rather than ``e^{y/2}`` itself avoids underflow
    when ``y`` spans hundreds of units.
    """
    el = np.zeros_like(y)
    er = np.zeros_like(y)
    dy = 0.5 * np.diff(y)
    el[1:] = np.exp(-dy)
    er[:-1] = np.exp(dy)
    return el, er


def bohm_system(y, g, eps2, cl, cr):
    """Residual and tridiagonal Jacobian of the exponential elliptic equation.

    Discrete form: ``-eps2 * (L e^{y/2}) / e^{y/2} + y - g = 0`` where ``L`` is
    the zero-flux Laplacian with neighbour coefficients ``cl`` (left) and
    ``cr`` (right).
    """
    el, er = _half_ratios(y)
    q = cl * (el - 1.0) + cr * (er - 1.0)
    res = -eps2 * q + y - g

    diag = 1.0 + 0.5 * eps2 * (q + cl + cr)
    lower = -0.5 * eps2 * cl * el
    upper = -0.5 * eps2 * cr * er
    return res, lower, diag, upper


def step_system(u, phi, w, c_dop, lam, tau, eps2, sigma,
                cl, cr, face_g, vol, dirichlet):
    """Residual and (4, 4)-banded Jacobian of the coupled implicit step.

    Unknowns are interleaved as ``z[2i] = u_i`` (log density) and
    ``z[2i+1] = phi_i``. Rows ``2i`` hold the scaled continuity equation
    ``lam*(n - w) - tau*div(n grad mu)`` and rows ``2i+1`` the Poisson
    equation (identity rows at Dirichlet nodes).

    Returns ``(res, ab, mu)`` with ``ab`` in LAPACK banded storage.
    """
    N = u.shape[0]
    n = np.exp(u)
    el, er = _half_ratios(u)
    q = cl * (el - 1.0) + cr * (er - 1.0)
    mu = -eps2 * q + u - sigma * phi

    nf = 0.5 * (n[:-1] + n[1:])
    dmu = mu[1:] - mu[:-1]
    flux = face_g * nf * dmu
    div = np.zeros(N)
    div[:-1] += flux
    div[1:] -= flux
    div /= vol

    lap_phi = -(cl + cr) * phi
    lap_phi[1:] += cl[1:] * phi[:-1]
    lap_phi[:-1] += cr[:-1] * phi[1:]

    res = np.empty(2 * N)
    res[0::2] = lam * (n - w) - tau * div
    r2 = -lap_phi - lam * (n - c_dop)
    r2[dirichlet] = phi[dirichlet]
    res[1::2] = r2

    # d mu_i / d u_{i-1}, u_i, u_{i+1}
    m0 = 1.0 + 0.5 * eps2 * (q + cl + cr)
    mm = -0.5 * eps2 * cl * el
    mp = -0.5 * eps2 * cr * er

    # dF[j, s] = d flux_j / d u_{j+s}, s = -1..2 stored at columns 0..3
    g = face_g
    dF = np.zeros((N - 1, 4))
    dF[:, 0] = -g * nf * mm[:-1]
    dF[:, 1] = g * (0.5 * n[:-1] * dmu + nf * (mm[1:] - m0[:-1]))
    dF[:, 2] = g * (0.5 * n[1:] * dmu + nf * (m0[1:] - mp[:-1]))
    dF[:, 3] = g * nf * mp[1:]

    # d div_i / d u_{i+t}, t = -2..2 stored at columns 0..4
    ddiv = np.zeros((N, 5))
    ddiv[:-1, 1:5] += dF
    ddiv[1:, 0:4] -= dF
    ddiv /= vol[:, None]

    ab = np.zeros((9, 2 * N))
    rows_u = 2 * np.arange(N)
    for t in range(-2, 3):
        val = -tau * ddiv[:, t + 2]
        if t == 0:
            val = val + lam * n
        i = np.arange(max(0, -t), min(N, N - t))
        cols = 2 * (i + t)
        ab[4 + rows_u[i] - cols, cols] = val[i]

    # d R1_i / d phi_{i+t} = tau * sigma * (weighted Laplacian)_{i, i+t}
    wl = np.zeros(N)
    wr = np.zeros(N)
    wr[:-1] = g * nf / vol[:-1]
    wl[1:] = g * nf / vol[1:]
    idx = np.arange(N)
    ab[4 + 2 * idx - (2 * idx + 1), 2 * idx + 1] = -tau * sigma * (wl + wr)
    ab[4 + 2 * idx[1:] - (2 * idx[1:] - 1), 2 * idx[1:] - 1] = tau * sigma * wl[1:]
    ab[4 + 2 * idx[:-1] - (2 * idx[:-1] + 3), 2 * idx[:-1] + 3] = tau * sigma * wr[:-1]

    # Poisson rows
    interior = ~dirichlet
    r = 2 * idx + 1
    dphi_d = np.where(interior, cl + cr, 1.0)
    ab[4, r] = dphi_d
    du = np.where(interior, -lam * n, 0.0)
    ab[4 + 1, 2 * idx] = du
    lo = np.where(interior, -cl, 0.0)
    up = np.where(interior, -cr, 0.0)
    ab[4 + 2, r[:-1]] = lo[1:]
    ab[4 - 2, r[1:]] = up[:-1]
    return res, ab, mu


def classical_system(w, dphi_face, sigma, tau, cl, cr, face_g, vol):
    """Tridiagonal system for one semi-implicit classical drift-diffusion step.

    ``(n - w)/tau = L n - sigma * div(w_face * grad phi)`` with the drift
    explicit and upwinded; ``dphi_face`` holds neighbour differences of phi.
    Returns ``(lower, diag, upper, rhs)``.
    """
    N = w.shape[0]
    vel = sigma * dphi_face
    up_w = np.where(vel > 0.0, w[:-1], w[1:])
    flux = face_g * up_w * vel
    div = np.zeros(N)
    div[:-1] += flux
    div[1:] -= flux
    div /= vol
    rhs = w - tau * div
    lower = -tau * cl
    upper = -tau * cr
    diag = 1.0 + tau * (cl + cr)
    return lower, diag, upper, rhs
