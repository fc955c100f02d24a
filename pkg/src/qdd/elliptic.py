"""Linear and nonlinear elliptic solves used inside one implicit time step.

* ``solve_poisson_dirichlet``: ``-lap(phi) = s`` with ``phi = 0`` on the boundary.
* ``solve_weighted_neumann``: ``-div(a grad F) = f`` with zero flux and a
  prescribed mean.
* ``solve_exponential_elliptic``: the natural-gradient-growth equation
  ``-(eps^2/2)(lap y + |grad y|^2/2) + y = g`` with zero flux, by Newton.

All three assemble tridiagonal systems on the grid's control volumes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .errors import (CoefficientNotPositive, NewtonDiverged, QDDError,
                     SolvabilityViolation)
from .grid import BC, Grid, ScalarField, _values, integrate, mean

SOLVABILITY_TOL = 1e-9
MAX_STEP = 2.0


@dataclass(frozen=True)
class NewtonConfig:
    max_iter: int = 50
    tol_residual: float = 1e-11
    damping: float = 1.0
    min_step: float = 1.0 / 1024

    def __post_init__(self):
        if not 0 < self.min_step <= self.damping <= 1:
            raise ValueError("need 0 < min_step <= damping <= 1")
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def poisson_matrix(grid: Grid):
    """Tridiagonal ``-lap`` with identity rows at Dirichlet nodes."""
    lower = -grid.cl.copy()
    upper = -grid.cr.copy()
    diag = grid.cl + grid.cr
    fixed = grid.dirichlet
    lower[fixed] = 0.0
    upper[fixed] = 0.0
    diag[fixed] = 1.0
    return lower, diag, upper


def solve_poisson_dirichlet(grid: Grid, source) -> ScalarField:
    """Solve ``-lap(phi) = source`` with homogeneous Dirichlet data.

    The matrix is an M-matrix, so a nonnegative source gives a nonnegative
    potential.
    """
    s = np.array(_values(grid, source), dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("source must be finite")
    lower, diag, upper = poisson_matrix(grid)
    s[grid.dirichlet] = 0.0
    phi = kernels.solve_tridiagonal(lower, diag, upper, s)
    if not np.all(np.isfinite(phi)):
        raise QDDError("Poisson solve produced non-finite values")
    return ScalarField(grid, phi, BC.DIRICHLET)


def weighted_neumann_matrix(grid: Grid, a: np.ndarray):
    """Rows of ``-div(a grad .)`` with arithmetic face averages of ``a``."""
    af = 0.5 * (a[:-1] + a[1:]) * grid.face_g
    lower = np.zeros(grid.N)
    upper = np.zeros(grid.N)
    lower[1:] = -af / grid.quad_weights[1:]
    upper[:-1] = -af / grid.quad_weights[:-1]
    diag = -(lower + upper)
    return lower, diag, upper


def solve_weighted_neumann(grid: Grid, coeff, source, beta: float = 0.0,
                           solvability_tol: float = SOLVABILITY_TOL) -> ScalarField:
    """Solve ``-div(a grad F) = f`` with zero flux and ``mean(F) = beta``.

    Raises
    ------
    CoefficientNotPositive
        If ``min(a) <= 0``.
    SolvabilityViolation
        If ``|int f| > solvability_tol``.
    """
    a = _values(grid, coeff)
    f = np.array(_values(grid, source), dtype=float)
    if not a.min() > 0:
        raise CoefficientNotPositive(f"coefficient minimum {a.min():.3e} is not positive")
    total = integrate(grid, f)
    if abs(total) > solvability_tol:
        raise SolvabilityViolation(
            f"source integrates to {total:.3e}, tolerance {solvability_tol:.1e}")
    # The tridiagonal system is the flux balance q_j - q_{j-1} = -V_j f_j for
    # the face fluxes q_j = g_j a_j (F_{j+1} - F_j) with q_{-1} = 0, so it is
    # solved by summation. Each face flux is accumulated from the side that
    # carries less |V f|; this keeps F' accurate where a is tiny. The
    # compatibility defect (below solvability_tol) lands in the one cell where
    # the two sides meet, instead of being spread over regions where f is
    # far smaller than the defect.
    vf = grid.quad_weights * f
    left = -np.cumsum(vf)[:-1]
    right = np.cumsum(vf[::-1])[::-1][1:]
    absum = np.cumsum(np.abs(vf))
    use_left = absum[:-1] <= absum[-1] - absum[:-1]
    q = np.where(use_left, left, right)
    af = 0.5 * (a[:-1] + a[1:]) * grid.face_g
    F = np.concatenate(([0.0], np.cumsum(q / af)))
    F += beta - mean(grid, F)
    return ScalarField(grid, F, BC.NEUMANN)


def weighted_divergence(grid: Grid, a, u) -> np.ndarray:
    """Nodal values of ``div(a grad u)`` in flux form."""
    lower, diag, upper = weighted_neumann_matrix(grid, _values(grid, a))
    return -kernels.tridiag_matvec(lower, diag, upper, _values(grid, u))


def exponential_residual(grid: Grid, y, g, eps: float) -> np.ndarray:
    """Diagonally scaled residual of the exponential elliptic equation."""
    eps2 = eps * eps
    res, _, _, _ = kernels.bohm_system(np.asarray(y, float), np.asarray(g, float),
                                       eps2, grid.cl, grid.cr)
    return res / (1.0 + eps2 * (grid.cl + grid.cr))


def solve_exponential_elliptic(grid: Grid, rhs, eps: float,
                               cfg: NewtonConfig | None = None, y0=None):
    """Newton solve of ``-(eps^2/2)(lap y + |grad y|^2/2) + y = g``.

    The operator is discretised through the substitution ``rho = e^{y/2}``
    as ``-eps^2 lap_h(rho)/rho + y = g``, which keeps the Jacobian a
    diagonally dominant tridiagonal M-matrix and gives a discrete maximum
    principle ``min g <= y <= max g``.

    Convergence is measured on the residual divided by the operator
    diagonal ``1 + eps^2 * (stencil weight)``; this is the pointwise size of
    the remaining correction and stays above rounding on fine grids.

    Parameters
    ----------
    rhs : ScalarField or array
        Right-hand side ``g``.
    eps : float
        Scaled Planck constant, ``eps > 0``.
    y0 : array, optional
        Initial guess; defaults to ``g``.

    Returns
    -------
    (ScalarField, SolveReport)
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    cfg = cfg or NewtonConfig()
    g = np.ascontiguousarray(_values(grid, rhs), dtype=float)
    y = np.array(g if y0 is None else _values(grid, y0), dtype=float)
    eps2 = eps * eps
    cl, cr = grid.cl, grid.cr
    scale = 1.0 / (1.0 + eps2 * (cl + cr))

    # the solution obeys min g <= y <= max g, so trial points are projected
    # onto that box; if the projected search stalls, an unprojected step
    # capped at MAX_STEP in sup-norm is tried instead
    lo_g, hi_g = float(g.min()), float(g.max())
    res, lower, diag, upper = kernels.bohm_system(y, g, eps2, cl, cr)
    rnorm = float(np.max(np.abs(res * scale)))
    for it in range(1, cfg.max_iter + 1):
        if rnorm <= cfg.tol_residual:
            return ScalarField(grid, y, BC.NEUMANN), SolveReport(it, rnorm, True)
        delta = kernels.solve_tridiagonal(lower, diag, upper, -res)
        dmax = float(np.max(np.abs(delta)))
        trial = None
        for project in (True, False):
            t = cfg.damping if project else min(cfg.damping, MAX_STEP / max(dmax, 1e-300))
            t_min = cfg.min_step * t
            while t >= t_min:
                y_try = y + t * delta
                if project:
                    np.clip(y_try, lo_g, hi_g, out=y_try)
                res_try, lo_t, di_t, up_t = kernels.bohm_system(y_try, g, eps2, cl, cr)
                r_try = float(np.max(np.abs(res_try * scale)))
                if r_try < (1.0 - 1e-4 * t) * rnorm or r_try <= cfg.tol_residual:
                    trial = (y_try, res_try, lo_t, di_t, up_t, r_try)
                    break
                t *= 0.5
            if trial is not None:
                break
        if trial is None:
            raise NewtonDiverged(
                f"line search underflow at iteration {it}, residual {rnorm:.3e}",
                SolveReport(it, rnorm, False))
        y, res, lower, diag, upper, rnorm = trial
    if rnorm <= cfg.tol_residual:
        return ScalarField(grid, y, BC.NEUMANN), SolveReport(cfg.max_iter + 1, rnorm, True)
    raise NewtonDiverged(f"no convergence in {cfg.max_iter} iterations, "
                         f"residual {rnorm:.3e}", SolveReport(cfg.max_iter, rnorm, False))
