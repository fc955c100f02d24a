"""Loop kernels compiled with numba; twins of ``_numpy``."""

import numpy as np
from numba import njit


@njit(cache=True)
def solve_tridiagonal(lower, diag, upper, rhs):
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / m if i < n - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


@njit(cache=True)
def tridiag_matvec(lower, diag, upper, x):
    n = x.shape[0]
    y = np.empty(n)
    for i in range(n):
        s = diag[i] * x[i]
        if i > 0:
            s += lower[i] * x[i - 1]
        if i < n - 1:
            s += upper[i] * x[i + 1]
        y[i] = s
    return y


@njit(cache=True)
def _neumann_lap(cl, cr, v):
    n = v.shape[0]
    out = np.empty(n)
    for i in range(n):
        s = -(cl[i] + cr[i]) * v[i]
        if i > 0:
            s += cl[i] * v[i - 1]
        if i < n - 1:
            s += cr[i] * v[i + 1]
        out[i] = s
    return out


@njit(cache=True)
def bohm_system(y, g, eps2, cl, cr):
    n = y.shape[0]
    res = np.empty(n)
    lower = np.zeros(n)
    diag = np.empty(n)
    upper = np.zeros(n)
    for i in range(n):
        el = np.exp(0.5 * (y[i - 1] - y[i])) if i > 0 else 0.0
        er = np.exp(0.5 * (y[i + 1] - y[i])) if i < n - 1 else 0.0
        q = cl[i] * (el - 1.0) + cr[i] * (er - 1.0)
        res[i] = -eps2 * q + y[i] - g[i]
        diag[i] = 1.0 + 0.5 * eps2 * (q + cl[i] + cr[i])
        lower[i] = -0.5 * eps2 * cl[i] * el
        upper[i] = -0.5 * eps2 * cr[i] * er
    return res, lower, diag, upper


@njit(cache=True)
def step_system(u, phi, w, c_dop, lam, tau, eps2, sigma,
                cl, cr, face_g, vol, dirichlet):
    N = u.shape[0]
    n = np.empty(N)
    for i in range(N):
        n[i] = np.exp(u[i])
    lap_phi = _neumann_lap(cl, cr, phi)

    mu = np.empty(N)
    m0 = np.empty(N)
    mm = np.zeros(N)
    mp = np.zeros(N)
    for i in range(N):
        el = np.exp(0.5 * (u[i - 1] - u[i])) if i > 0 else 0.0
        er = np.exp(0.5 * (u[i + 1] - u[i])) if i < N - 1 else 0.0
        q = cl[i] * (el - 1.0) + cr[i] * (er - 1.0)
        mu[i] = -eps2 * q + u[i] - sigma * phi[i]
        m0[i] = 1.0 + 0.5 * eps2 * (q + cl[i] + cr[i])
        mm[i] = -0.5 * eps2 * cl[i] * el
        mp[i] = -0.5 * eps2 * cr[i] * er

    div = np.zeros(N)
    ddiv = np.zeros((N, 5))
    wl = np.zeros(N)
    wr = np.zeros(N)
    for j in range(N - 1):
        g = face_g[j]
        nf = 0.5 * (n[j] + n[j + 1])
        dmu = mu[j + 1] - mu[j]
        f = g * nf * dmu
        div[j] += f
        div[j + 1] -= f
        d0 = -g * nf * mm[j]
        d1 = g * (0.5 * n[j] * dmu + nf * (mm[j + 1] - m0[j]))
        d2 = g * (0.5 * n[j + 1] * dmu + nf * (m0[j + 1] - mp[j]))
        d3 = g * nf * mp[j + 1]
        # row j gains +dF (columns t = -1..2), row j+1 gains -dF (t = -2..1)
        ddiv[j, 1] += d0
        ddiv[j, 2] += d1
        ddiv[j, 3] += d2
        ddiv[j, 4] += d3
        ddiv[j + 1, 0] -= d0
        ddiv[j + 1, 1] -= d1
        ddiv[j + 1, 2] -= d2
        ddiv[j + 1, 3] -= d3
        wr[j] = g * nf / vol[j]
        wl[j + 1] = g * nf / vol[j + 1]

    res = np.empty(2 * N)
    ab = np.zeros((9, 2 * N))
    for i in range(N):
        div_i = div[i] / vol[i]
        res[2 * i] = lam * (n[i] - w[i]) - tau * div_i
        for t in range(-2, 3):
            k = i + t
            if k < 0 or k >= N:
                continue
            val = -tau * ddiv[i, t + 2] / vol[i]
            if t == 0:
                val += lam * n[i]
            ab[4 - 2 * t, 2 * k] = val
        ab[3, 2 * i + 1] = -tau * sigma * (wl[i] + wr[i])
        if i > 0:
            ab[5, 2 * i - 1] = tau * sigma * wl[i]
        if i < N - 1:
            ab[1, 2 * i + 3] = tau * sigma * wr[i]

        r = 2 * i + 1
        if dirichlet[i]:
            res[r] = phi[i]
            ab[4, r] = 1.0
        else:
            res[r] = -lap_phi[i] - lam * (n[i] - c_dop[i])
            ab[4, r] = cl[i] + cr[i]
            ab[5, 2 * i] = -lam * n[i]
            if i > 0:
                ab[6, r - 2] = -cl[i]
            if i < N - 1:
                ab[2, r + 2] = -cr[i]
    return res, ab, mu


@njit(cache=True)
def classical_system(w, dphi_face, sigma, tau, cl, cr, face_g, vol):
    N = w.shape[0]
    div = np.zeros(N)
    for j in range(N - 1):
        vel = sigma * dphi_face[j]
        up_w = w[j] if vel > 0.0 else w[j + 1]
        f = face_g[j] * up_w * vel
        div[j] += f
        div[j + 1] -= f
    lower = np.empty(N)
    diag = np.empty(N)
    upper = np.empty(N)
    rhs = np.empty(N)
    for i in range(N):
        rhs[i] = w[i] - tau * div[i] / vol[i]
        lower[i] = -tau * cl[i]
        upper[i] = -tau * cr[i]
        diag[i] = 1.0 + tau * (cl[i] + cr[i])
    return lower, diag, upper, rhs
