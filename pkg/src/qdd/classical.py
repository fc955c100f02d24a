"""Classical (eps = 0) drift-diffusion with self-interaction and a blowup detector.

    n_t = lap(n) - sigma div(n grad phi),   -lap(phi) = n,   phi = 0 on the boundary

Each step solves for the new density with implicit diffusion and an explicit,
upwinded drift. Negative undershoots are clipped and the clipped mass is
reported. A step that clips more than ``clip_tol`` is retried with half the
step size.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .diagnostics import entropy, fisher_information, hessian_l2
from .elliptic import solve_poisson_dirichlet
from .grid import DensityState, Grid, _values, integrate
from .scheme import Trajectory

log = logging.getLogger(__name__)


class Trigger(str, enum.Enum):
    MAX_DENSITY = "MaxDensity"
    STEP_COLLAPSE = "StepCollapse"
    SOLVER_FAILURE = "SolverFailure"


@dataclass(frozen=True)
class DetectorConfig:
    """Blowup thresholds.

    ``max_density_cap=None`` uses ``min(1e6/|Omega|, cell_mass_fraction/V_0)``:
    the nominal cap, or the density at which the innermost cell holds the
    given fraction of the total mass, whichever is lower. On coarse grids the
    nominal cap cannot be reached because the peak is bounded by ``1/V_0``.
    """

    max_density_cap: float | None = None
    cell_mass_fraction: float = 0.25
    max_halvings: int = 10
    clip_tol: float = 1e-6

    def cap(self, grid: Grid) -> float:
        if self.max_density_cap is not None:
            return float(self.max_density_cap)
        nominal = 1e6 / grid.volume
        cell = self.cell_mass_fraction / float(np.min(grid.quad_weights))
        return min(nominal, cell)


@dataclass
class ClassicalReport:
    tau: float
    mass: float
    entropy: float
    fisher: float
    hessian_l2: float
    min_n: float
    max_n: float
    clip_deficit: float
    mass_before_clip: float
    picard_iterations: int = 0


@dataclass
class BlowupReport:
    blew_up: bool
    t_detect: float | None
    trigger: Trigger | None
    max_n_trace: list = field(default_factory=list)
    times: list = field(default_factory=list)
    cap: float = math.inf
    reason: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trigger"] = self.trigger.value if self.trigger is not None else None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class ClassicalStep:
    n: np.ndarray
    phi: np.ndarray
    clip_deficit: float
    mass_before_clip: float


def classical_step(grid: Grid, w, sigma: float, tau: float) -> ClassicalStep:
    """One semi-implicit step; returns the clipped, renormalised density."""
    w = np.asarray(_values(grid, w), dtype=float)
    tau = float(tau)
    phi = solve_poisson_dirichlet(grid, w).values
    lower, diag, upper, rhs = kernels.classical_system(
        w, np.diff(phi), float(sigma), float(tau), grid.cl, grid.cr, grid.face_g,
        grid.quad_weights)
    # solve for the increment n - w; its right-hand side in flux form is
    # exactly zero for a uniform state without drift
    lap = np.zeros_like(w)
    dw = np.diff(w)
    lap[1:] -= grid.cl[1:] * dw
    lap[:-1] += grid.cr[:-1] * dw
    n = w + kernels.solve_tridiagonal(lower, diag, upper, (rhs - w) + tau * lap)
    mass = integrate(grid, n)
    neg = np.minimum(n, 0.0)
    deficit = max(0.0, -integrate(grid, neg))
    if deficit > 0:
        n = np.maximum(n, 0.0)
        n *= mass / integrate(grid, n)
    return ClassicalStep(n=n, phi=phi, clip_deficit=deficit, mass_before_clip=mass)


def _report(grid, n, tau, st: ClassicalStep) -> ClassicalReport:
    return ClassicalReport(
        tau=tau, mass=integrate(grid, n), entropy=entropy(grid, n),
        fisher=fisher_information(grid, np.sqrt(n)), hessian_l2=hessian_l2(grid, np.sqrt(n)),
        min_n=float(n.min()), max_n=float(n.max()), clip_deficit=st.clip_deficit,
        mass_before_clip=st.mass_before_clip)


def evolve_classical(grid: Grid, n0, sigma: float, tau: float, T: float,
                     detector: DetectorConfig | None = None, snapshot_every: int = 0):
    """Run to ``T`` or until the detector fires.

    Returns ``(Trajectory, BlowupReport)``; failures are reported, not raised.
    """
    if not T > 0 or not tau > 0:
        raise ValueError("need T > 0 and tau > 0")
    det = detector or DetectorConfig()
    cap = det.cap(grid)
    if isinstance(n0, DensityState):
        w = n0.n
    else:
        w = np.asarray(_values(grid, n0), dtype=float)
        w = w / integrate(grid, w)
    traj = Trajectory(grid=grid)
    traj.states.append(DensityState.from_density(grid, w, normalize=False))
    traj.state_times.append(0.0)
    traj.fields.append((None, None))
    rep = BlowupReport(blew_up=False, t_detect=None, trigger=None,
                       max_n_trace=[float(w.max())], times=[0.0], cap=cap)
    t = 0.0
    k = 0
    while t < T * (1 - 1e-12):
        h = min(tau, T - t)
        st = None
        for _ in range(det.max_halvings + 1):
            try:
                cand = classical_step(grid, w, sigma, h)
            except Exception as exc:  # noqa: BLE001 - any solver failure ends the run
                rep.blew_up, rep.t_detect = True, t
                rep.trigger, rep.reason = Trigger.SOLVER_FAILURE, str(exc)
                return traj, rep
            ok = np.all(np.isfinite(cand.n)) and cand.clip_deficit <= det.clip_tol
            if ok:
                st = cand
                break
            h *= 0.5
        if st is None:
            rep.blew_up, rep.t_detect = True, t
            rep.trigger = Trigger.STEP_COLLAPSE
            rep.reason = f"step below {tau * 0.5 ** det.max_halvings:.3e} still clips"
            return traj, rep
        t += h
        k += 1
        w = st.n
        traj.times.append(t)
        traj.reports.append(_report(grid, w, h, st))
        rep.max_n_trace.append(float(w.max()))
        rep.times.append(t)
        last = t >= T * (1 - 1e-12)
        if last or (snapshot_every and k % snapshot_every == 0) or w.max() > cap:
            traj.states.append(DensityState.from_density(grid, w, normalize=False))
            traj.state_times.append(t)
            traj.fields.append((np.full(grid.N, np.nan), st.phi))
        if w.max() > cap:
            rep.blew_up, rep.t_detect = True, t
            rep.trigger = Trigger.MAX_DENSITY
            rep.reason = f"max n {w.max():.3e} above cap {cap:.3e}"
            return traj, rep
    return traj, rep


def blowup_rows(rep: BlowupReport):
    """Terminal ``blowup`` row for the time-series CSV."""
    trig = rep.trigger.value if rep.trigger is not None else "none"
    t = "" if rep.t_detect is None else f"{rep.t_detect:.17g}"
    return [["blowup", trig, t, int(rep.blew_up)]]
