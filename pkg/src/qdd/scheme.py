"""Implicit time stepping for the quantum drift-diffusion system.

One step solves the coupled elliptic system

    -div(n grad F)          = (w - n)/tau     zero flux
    -eps^2 lap(rho)/rho + log n = sigma*phi + F   rho = sqrt(n), zero flux
    -lap(phi)               = n - C           phi = 0 on the boundary

with ``n = e^y / ||e^y||_1``. Two solvers reach the same discrete solution:

* ``method="newton"`` (default): Newton on the log density and potential
  with ``F`` eliminated, on a (4, 4)-banded Jacobian.
* ``method="picard"``: successive substitution ``v -> y`` through the three
  elliptic solves, with relaxation.

Either way the result is checked by one application of the substitution
map, whose defect is reported as ``fixed_point_residual``. If the direct
solve fails, the homotopy parameter ``lam`` (scaling the sources of the
continuity and Poisson equations) is walked up a ladder to 1.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from . import kernels
from .diagnostics import entropy, entropy_report
from .elliptic import (NewtonConfig, exponential_residual, solve_exponential_elliptic,
                       solve_poisson_dirichlet, solve_weighted_neumann)
from .errors import NewtonDiverged, PicardDiverged, QDDError, StepFailed
from .grid import BC, DensityState, Grid, ScalarField, integrate, mean

log = logging.getLogger(__name__)

LOG_FLOOR = 1e-12
# the coupled Newton starts closer to the data: its log-density moves by
# only O(1) per iteration through a floored tail
NEWTON_FLOOR = 1e-60


@dataclass(frozen=True)
class ModelParams:
    eps: float
    sigma: float = 0.0
    doping: np.ndarray | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive (eps = 0 is the classical model)")

    def doping_values(self, grid: Grid) -> np.ndarray:
        if self.doping is None:
            return np.zeros(grid.N)
        c = np.asarray(self.doping, dtype=float)
        if c.shape != (grid.N,):
            raise ValueError("doping profile does not match the grid")
        return c


@dataclass(frozen=True)
class StepConfig:
    tau: float
    method: str = "newton"
    picard_max: int = 200
    picard_tol: float = 1e-8
    relaxation: float = 1.0
    continuation: tuple = (0.25, 0.5, 0.75, 1.0)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    coupled_max_iter: int = 40
    coupled_tol: float = 1e-12
    gamma: float | None = None
    entropy_budget: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")
        if self.method not in ("newton", "picard"):
            raise ValueError(f"unknown step method {self.method!r}")

    def with_tau(self, tau: float) -> "StepConfig":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw["tau"] = tau
        return StepConfig(**kw)


@dataclass
class StepReport:
    tau: float
    picard_iterations: int
    newton_totals: int
    fixed_point_residual: float
    mass: float
    entropy: float
    fisher: float
    hessian_l2: float
    min_n: float
    max_n: float
    dissipation_lhs: float
    dissipation_rhs: float
    gauge_shift: float
    continuation_used: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StepResult:
    state: DensityState
    F: ScalarField
    phi: ScalarField
    report: StepReport
    y: np.ndarray


def default_gamma(d: int) -> float:
    from .inequalities import eval_c0_gamma
    return eval_c0_gamma(d, 0.05)[1]


def transformed_density(grid: Grid, v: np.ndarray) -> np.ndarray:
    """``e^v / ||e^v||_1``, shifted for overflow safety."""
    e = np.exp(v - v.max())
    return e / integrate(grid, e)


def initial_iterate(w: np.ndarray, floor: float = LOG_FLOOR) -> np.ndarray:
    return np.log(np.maximum(w, floor * w.max()))


def picard_map(grid: Grid, v: np.ndarray, w: np.ndarray, params: ModelParams,
               tau: float, lam: float = 1.0, newton: NewtonConfig | None = None,
               y0: np.ndarray | None = None):
    """Apply the substitution map ``v -> y`` once.

    Returns ``(y, F, phi, SolveReport)``; ``F`` has zero mean.
    """
    nv = transformed_density(grid, v)
    c = params.doping_values(grid)
    phi = solve_poisson_dirichlet(grid, lam * (nv - c))
    src = lam * (w - nv) / tau
    F = solve_weighted_neumann(grid, nv, src, beta=0.0,
                               solvability_tol=max(1e-9, 1e-13 / tau))
    g = params.sigma * phi.values + F.values
    y, rep = solve_exponential_elliptic(grid, g, params.eps, newton,
                                        y0=v if y0 is None else y0)
    return y.values, F, phi, rep


def _coupled_newton(grid: Grid, w: np.ndarray, params: ModelParams, tau: float,
                    lam: float, u0: np.ndarray, cfg: StepConfig):
    """Newton on ``(log n, phi)``; returns ``(u, mu, iterations)``."""
    eps2 = params.eps**2
    sigma = float(params.sigma)
    c = params.doping_values(grid)
    args = (c, lam, tau, eps2, sigma, grid.cl, grid.cr, grid.face_g,
            grid.quad_weights, grid.dirichlet)
    u = np.array(u0, dtype=float)
    phi = solve_poisson_dirichlet(grid, lam * (np.exp(u) - c)).values.copy()

    res, ab, mu = kernels.step_system(u, phi, w, *args)
    merit = _merit(res, ab)
    for it in range(1, cfg.coupled_max_iter + 1):
        if not np.isfinite(merit):
            break
        dz = solve_banded((4, 4), ab, -res, check_finite=False)
        if not np.all(np.isfinite(dz)):
            break
        size = float(np.max(np.abs(dz)))
        t = 1.0
        # cap the log-density change so exp() stays in range
        if size > 5.0:
            t = 5.0 / size
        while True:
            u_t = u + t * dz[0::2]
            phi_t = phi + t * dz[1::2]
            res_t, ab_t, mu_t = kernels.step_system(u_t, phi_t, w, *args)
            m_t = _merit(res_t, ab)
            if np.isfinite(m_t) and (m_t < (1 - 1e-4 * t) * merit or m_t < 1e-14):
                break
            t *= 0.5
            if t < cfg.newton.min_step:
                raise NewtonDiverged(
                    f"coupled line search failed at iteration {it}, merit {merit:.3e}")
        u, phi, res, ab, mu, merit = u_t, phi_t, res_t, ab_t, mu_t, m_t
        if t == 1.0 and size <= cfg.coupled_tol * max(1.0, float(np.max(np.abs(u)))):
            return u, mu, it
        if merit < 1e-15:
            return u, mu, it
    raise NewtonDiverged(f"coupled Newton did not converge, merit {merit:.3e}")


def _merit(res, ab):
    return float(np.max(np.abs(res / np.abs(ab[4]))))


def _pseudo_transient(grid: Grid, w: np.ndarray, params: ModelParams, tau: float,
                      u0: np.ndarray, cfg: StepConfig, max_iter: int = 400):
    """Pseudo-transient continuation for rough data.

    Solves ``(J + D/dt) dz = -R`` with ``D`` the Jacobian diagonal and grows
    ``dt`` by the ratio of successive residual norms, so the iteration moves
    from damped relaxation to Newton as the residual falls. Handles vacuum
    regions and kinks where the plain line search stalls.
    """
    eps2 = params.eps**2
    c = params.doping_values(grid)
    args = (c, 1.0, tau, eps2, float(params.sigma), grid.cl, grid.cr, grid.face_g,
            grid.quad_weights, grid.dirichlet)
    u = np.array(u0, dtype=float)
    phi = solve_poisson_dirichlet(grid, np.exp(u) - c).values.copy()
    res, ab, mu = kernels.step_system(u, phi, w, *args)
    D = np.abs(ab[4])
    m = float(np.linalg.norm(res / D))
    dt = 1.0
    for it in range(1, max_iter + 1):
        A = ab.copy()
        A[4] += D / dt
        dz = solve_banded((4, 4), A, -res, check_finite=False)
        size = float(np.max(np.abs(dz[0::2])))
        t = min(1.0, 5.0 / size) if size > 0 else 1.0
        u_t = u + t * dz[0::2]
        phi_t = phi + t * dz[1::2]
        res_t, ab_t, mu_t = kernels.step_system(u_t, phi_t, w, *args)
        m_t = float(np.linalg.norm(res_t / D))
        if not np.isfinite(m_t):
            dt *= 0.1
            if dt < 1e-12:
                break
            continue
        u, phi, res, ab, mu = u_t, phi_t, res_t, ab_t, mu_t
        dt = min(dt * m / max(m_t, 1e-300), 1e15)
        m = m_t
        D = np.abs(ab[4])
        step_small = t * size <= cfg.coupled_tol * max(1.0, float(np.max(np.abs(u))))
        if (step_small and dt > 1e4) or _merit(res, ab) < 1e-15:
            return u, mu, it
    raise NewtonDiverged(f"pseudo-transient solve stalled, residual {m:.3e}")


def _solve_newton(grid, w, params, cfg):
    """Newton at lam = 1, then pseudo-transient continuation, then the ladder.

    Returns ``(u, mu, iterations, fallback_used)``.
    """
    u0 = initial_iterate(w, NEWTON_FLOOR)
    try:
        u, mu, its = _coupled_newton(grid, w, params, cfg.tau, 1.0, u0, cfg)
        return u, mu, its, False
    except NewtonDiverged as exc:
        log.info("direct step failed (%s); trying pseudo-transient continuation", exc)
    for floor in (LOG_FLOOR, NEWTON_FLOOR):
        try:
            u, mu, its = _pseudo_transient(grid, w, params, cfg.tau,
                                           initial_iterate(w, floor), cfg)
            return u, mu, its, True
        except NewtonDiverged as exc:
            log.info("pseudo-transient solve failed (%s)", exc)
    u = u0
    total = 0
    ladder = list(cfg.continuation)
    if ladder[-1] != 1.0:
        ladder.append(1.0)
    for lam in ladder:
        u, mu, its = _coupled_newton(grid, w, params, cfg.tau, lam, u, cfg)
        total += its
    return u, mu, total, True


def _picard_loop(grid, w, params, cfg, v, lam):
    omega = cfg.relaxation
    prev = math.inf
    newton_total = 0
    for it in range(1, cfg.picard_max + 1):
        y, F, phi, rep = picard_map(grid, v, w, params, cfg.tau, lam, cfg.newton)
        newton_total += rep.iterations
        r = float(np.max(np.abs(y - v)))
        if r <= cfg.picard_tol:
            return y, F, phi, it, newton_total
        if r > prev:
            omega = max(0.5 * omega, 1.0 / 64)
        prev = r
        v = (1 - omega) * v + omega * y
    raise PicardDiverged(f"no fixed point after {cfg.picard_max} sweeps at lam={lam}, "
                         f"defect {prev:.3e}")


def _solve_picard(grid, w, params, cfg, v0):
    try:
        y, F, phi, its, nt = _picard_loop(grid, w, params, cfg, v0, 1.0)
        return y, its, nt, False
    except (PicardDiverged, NewtonDiverged) as exc:
        log.info("direct Picard failed (%s); walking continuation ladder", exc)
    v = v0
    its_total = nt_total = 0
    ladder = list(cfg.continuation)
    if ladder[-1] != 1.0:
        ladder.append(1.0)
    for lam in ladder:
        try:
            v, F, phi, its, nt = _picard_loop(grid, w, params, cfg, v, lam)
        except NewtonDiverged as exc:
            raise PicardDiverged(f"inner solve failed at lam={lam}: {exc}") from exc
        its_total += its
        nt_total += nt
    return v, its_total, nt_total, True


def step(grid: Grid, w: DensityState, params: ModelParams, cfg: StepConfig) -> StepResult:
    """Advance the density by one implicit step of length ``cfg.tau``.

    Raises
    ------
    PicardDiverged
        When neither the direct solve nor the continuation ladder converges.
    """
    wn = w.n
    if cfg.method == "newton":
        try:
            u, mu, newton_its, used_ladder = _solve_newton(grid, wn, params, cfg)
        except NewtonDiverged as exc:
            raise PicardDiverged(f"step failed after continuation: {exc}") from exc
        v = u - mean(grid, mu)
        picard_its = 0
    else:
        v0 = initial_iterate(wn)
        v, picard_its, newton_its, used_ladder = _solve_picard(grid, wn, params, cfg, v0)

    # one substitution sweep at the solution: the returned F, phi and the
    # fixed-point defect come from the three elliptic solvers
    y, F, phi, rep = picard_map(grid, v, wn, params, cfg.tau, 1.0, cfg.newton)
    g = params.sigma * phi.values + F.values
    defect = max(float(np.max(np.abs(y - v))),
                 float(np.max(np.abs(exponential_residual(grid, v, g, params.eps)))))
    if not defect <= max(cfg.picard_tol, 1e-6):
        raise PicardDiverged(f"fixed-point defect {defect:.3e} after solve")

    n = transformed_density(grid, y)
    if not np.all(np.isfinite(n)):
        raise PicardDiverged("non-finite density")
    state = DensityState.from_density(grid, n, normalize=False)
    ymax = float(y.max())
    gauge = ymax + float(np.log(integrate(grid, np.exp(y - ymax))))

    gamma = cfg.gamma if cfg.gamma is not None else default_gamma(grid.d)
    er = entropy_report(grid, n)
    lhs = (er.entropy - entropy(grid, wn)) / cfg.tau + 2 * gamma * params.eps**2 * er.hessian_l2
    report = StepReport(
        tau=cfg.tau, picard_iterations=picard_its + 1,
        newton_totals=newton_its + rep.iterations, fixed_point_residual=defect,
        mass=er.mass, entropy=er.entropy, fisher=er.fisher,
        hessian_l2=er.hessian_l2, min_n=er.min_n, max_n=er.max_n,
        dissipation_lhs=lhs, dissipation_rhs=cfg.entropy_budget,
        gauge_shift=gauge, continuation_used=used_ladder,
    )
    return StepResult(state=state, F=F, phi=phi, report=report, y=y)


def discrete_entropy_inequality(prev: DensityState, nxt: DensityState, tau: float,
                                params: ModelParams, gamma: float,
                                budget: float = 0.0):
    """Both sides of the per-step entropy bound.

    ``lhs = (E(next) - E(prev))/tau + 2 gamma eps^2 ||D^2 rho_next||^2`` and
    ``rhs = budget``. Returns ``(lhs, rhs, lhs <= rhs)``.
    """
    from .diagnostics import hessian_l2
    grid = prev.grid
    if not nxt.grid.same_as(grid):
        raise QDDError("states live on different grids")
    lhs = ((entropy(grid, nxt.n) - entropy(grid, prev.n)) / tau
           + 2 * gamma * params.eps**2 * hessian_l2(grid, nxt.rho.values))
    return lhs, budget, bool(lhs <= budget)


TIMESERIES_COLUMNS = ("t", "tau_eff", "mass", "entropy", "fisher", "hessian_l2",
                      "min_n", "max_n", "picard_iters")


@dataclass
class Trajectory:
    grid: Grid
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    state_times: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    fields: list = field(default_factory=list)

    @property
    def final_time(self) -> float:
        return self.times[-1] if self.times else 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports])

    def write_timeseries(self, path, extra_rows: Sequence[Sequence] = ()) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(TIMESERIES_COLUMNS)
            for t, r in zip(self.times, self.reports):
                wr.writerow([f"{t:.17g}", f"{r.tau:.17g}", f"{r.mass:.17g}",
                             f"{r.entropy:.17g}", f"{r.fisher:.17g}",
                             f"{r.hessian_l2:.17g}", f"{r.min_n:.17g}",
                             f"{r.max_n:.17g}", r.picard_iterations])
            for row in extra_rows:
                wr.writerow(row)

    def write_snapshots(self, directory) -> list:
        """One ``x,n,F,Phi`` CSV per recorded state; returns the paths."""
        import os
        os.makedirs(directory, exist_ok=True)
        paths = []
        name = self.grid.coord_name
        for k, (t, st) in enumerate(zip(self.state_times, self.states)):
            F, phi = self.fields[k] if k < len(self.fields) else (None, None)
            path = os.path.join(directory, f"snapshot_{k:05d}.csv")
            with open(path, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow([name, "n", "F", "Phi"])
                for i, x in enumerate(self.grid.nodes):
                    fv = F[i] if F is not None else float("nan")
                    pv = phi[i] if phi is not None else float("nan")
                    wr.writerow([f"{x:.17g}", f"{st.n[i]:.17g}", f"{fv:.17g}",
                                 f"{pv:.17g}"])
            paths.append(path)
        return paths


def evolve(grid: Grid, n0: DensityState, params: ModelParams, cfg: StepConfig,
           T: float, snapshot_every: int = 0, max_halvings: int = 10,
           callback=None) -> Trajectory:
    """Run steps until ``T``; a failed step is retried with half the step.

    ``snapshot_every = k > 0`` stores every k-th state (the initial and final
    states are always kept).

    Raises
    ------
    StepFailed
        When a step still fails after ``max_halvings`` halvings.
    """
    if not T > 0:
        raise ValueError("horizon T must be positive")
    traj = Trajectory(grid=grid)
    traj.states.append(n0)
    traj.state_times.append(0.0)
    traj.fields.append((None, None))
    t = 0.0
    w = n0
    k = 0
    tau_nom = cfg.tau
    while t < T * (1 - 1e-12):
        tau = min(tau_nom, T - t)
        for attempt in range(max_halvings + 1):
            try:
                res = step(grid, w, params, cfg.with_tau(tau))
                break
            except (PicardDiverged, NewtonDiverged) as exc:
                if attempt == max_halvings:
                    raise StepFailed(f"step at t={t:.6g} failed after "
                                     f"{max_halvings} halvings: {exc}") from exc
                tau *= 0.5
                log.info("halving step to %.3e at t=%.6g", tau, t)
        t += tau
        k += 1
        w = res.state
        traj.times.append(t)
        traj.reports.append(res.report)
        last = t >= T * (1 - 1e-12)
        if last or (snapshot_every and k % snapshot_every == 0):
            traj.states.append(w)
            traj.state_times.append(t)
            traj.fields.append((res.F.values, res.phi.values))
        if callback is not None:
            callback(t, res)
    return traj


__all__ = [
    "ModelParams", "StepConfig", "StepReport", "StepResult", "Trajectory",
    "step", "evolve", "picard_map", "discrete_entropy_inequality",
    "transformed_density", "initial_iterate", "QDDError", "BC",
]
