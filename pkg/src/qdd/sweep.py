"""Batch runs over parameter grids, and the time-step refinement study.

Every run of a sweep gets its own directory ``<out>/runs/<run_id>/`` holding
``timeseries.csv`` and ``snapshots/``; the records of all runs go to
``<out>/runs.jsonl``, sorted by run id, so reruns rewrite the same bytes
(apart from ``wall_time``).
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classical import DetectorConfig, blowup_rows, evolve_classical
from .config import make_profile
from .errors import ConfigError, QDDError
from .grid import DensityState, Grid, build_grid, integrate
from .scheme import ModelParams, StepConfig, evolve

log = logging.getLogger(__name__)

COMPLETED = "Completed"
BLOWUP = "BlowupDetected"
FAILED = "StepFailed"


@dataclass(frozen=True)
class SweepSpec:
    sigmas: tuple
    epsilons: tuple
    d: int = 2
    geometry: str = "radial"
    N: int = 201
    L: float = 1.0
    tau: float = 1e-4
    T: float = 0.2
    profile: str = "bump-concentrated"
    seed: int = 0
    out: str = "sweep-out"
    workers: int | None = None
    snapshot_every: int = 0

    def __post_init__(self):
        if len(self.sigmas) == 0:
            raise ConfigError("sweep needs at least one sigma")
        if len(self.epsilons) == 0:
            raise ConfigError("sweep needs at least one eps")
        if any(e < 0 for e in self.epsilons):
            raise ConfigError("eps must be nonnegative (0 selects the classical model)")
        if not self.tau > 0 or not self.T > 0:
            raise ConfigError("tau and T must be positive")
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        ids = [run_id(p) for p in self.tuples()]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate parameter tuples in sweep")

    def tuples(self):
        for sigma, eps in itertools.product(self.sigmas, self.epsilons):
            yield {
                "sigma": sigma, "eps": eps, "d": self.d, "geometry": self.geometry,
                "N": self.N, "L": self.L, "tau": self.tau, "T": self.T,
                "profile": self.profile, "seed": self.seed,
            }


def run_id(params: dict) -> str:
    """Readable id plus a short digest of the full parameter tuple."""
    blob = json.dumps(params, sort_keys=True).encode()
    digest = hashlib.sha1(blob).hexdigest()[:8]
    return (f"sig{params['sigma'] / math.pi:+.4g}pi_eps{params['eps']:.4g}_"
            f"{params['geometry']}{params['d']}_{digest}")


@dataclass
class RunRecord:
    run_id: str
    params: dict
    outcome: str
    diagnostics: dict
    wall_time: float = 0.0

    def to_json(self) -> str:
        return json.dumps({"run_id": self.run_id, "params": self.params,
                           "outcome": self.outcome, "diagnostics": self.diagnostics,
                           "wall_time": self.wall_time})

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        d = json.loads(line)
        return cls(d["run_id"], d["params"], d["outcome"], d["diagnostics"], d["wall_time"])


def _terminal(traj, grid: Grid) -> dict:
    if traj.reports:
        r = traj.reports[-1]
        return {"t_final": traj.times[-1], "steps": len(traj.times), "mass": r.mass,
                "entropy": r.entropy, "min_n": r.min_n, "max_n": r.max_n}
    n = traj.states[-1].n
    return {"t_final": 0.0, "steps": 0, "mass": integrate(grid, n),
            "entropy": float("nan"), "min_n": float(n.min()), "max_n": float(n.max())}


def execute_run(params: dict, out_dir: str | None, snapshot_every: int = 0) -> RunRecord:
    """Run one parameter tuple; failures become records, never exceptions."""
    rid = run_id(params)
    t0 = time.perf_counter()
    try:
        grid = build_grid(params["d"], params["geometry"], params["N"], params["L"])
        n0 = make_profile(grid, params["profile"])
        extra = []
        if params["eps"] == 0.0:
            traj, rep = evolve_classical(grid, n0, params["sigma"], params["tau"], params["T"],
                                         DetectorConfig(), snapshot_every=snapshot_every)
            outcome = BLOWUP if rep.blew_up else COMPLETED
            diag = _terminal(traj, grid)
            diag["blowup"] = {"trigger": rep.trigger.value if rep.trigger else None,
                              "t_detect": rep.t_detect, "cap": rep.cap,
                              "peak_max_n": max(rep.max_n_trace)}
            extra = blowup_rows(rep)
        else:
            try:
                traj = evolve(grid, n0, ModelParams(eps=params["eps"], sigma=params["sigma"]),
                              StepConfig(tau=params["tau"]), params["T"],
                              snapshot_every=snapshot_every)
                outcome = COMPLETED
                diag = _terminal(traj, grid)
            except QDDError as exc:
                return RunRecord(rid, params, FAILED, {"reason": str(exc)},
                                 time.perf_counter() - t0)
        if out_dir is not None:
            run_dir = os.path.join(out_dir, "runs", rid)
            os.makedirs(run_dir, exist_ok=True)
            traj.write_timeseries(os.path.join(run_dir, "timeseries.csv"), extra_rows=extra)
            traj.write_snapshots(os.path.join(run_dir, "snapshots"))
    except OSError as exc:
        return RunRecord(rid, params, FAILED, {"reason": f"io: {exc}"}, time.perf_counter() - t0)
    except (QDDError, ValueError) as exc:
        return RunRecord(rid, params, FAILED, {"reason": str(exc)}, time.perf_counter() - t0)
    return RunRecord(rid, params, outcome, diag, time.perf_counter() - t0)


def _execute(args):
    return execute_run(*args)


def run_sweep(spec: SweepSpec, write: bool = True) -> list:
    """Execute every tuple of ``spec``; returns records sorted by run id."""
    tuples = list(spec.tuples())
    out = spec.out if write else None
    if out is not None:
        os.makedirs(out, exist_ok=True)
    jobs = [(p, out, spec.snapshot_every) for p in tuples]
    workers = spec.workers if spec.workers is not None else (os.cpu_count() or 1)
    workers = max(1, min(workers, len(jobs)))
    if workers == 1:
        records = [_execute(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_execute, jobs))
    records.sort(key=lambda r: r.run_id)
    if out is not None:
        with open(os.path.join(out, "runs.jsonl"), "w") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
    return records


def read_records(path) -> list:
    with open(path) as fh:
        return [RunRecord.from_json(line) for line in fh if line.strip()]


@dataclass
class RefinementTable:
    taus: list
    distances: list
    order: float
    monotone: bool
    finals: list = field(default_factory=list, repr=False)
    complete: bool = True
    reason: str = ""

    def to_dict(self) -> dict:
        return {"taus": self.taus, "distances": self.distances, "order": self.order,
                "monotone": self.monotone, "complete": self.complete, "reason": self.reason}


def l2_distance(grid: Grid, a, b) -> float:
    diff = np.asarray(a) - np.asarray(b)
    return math.sqrt(integrate(grid, diff * diff))


def tau_refinement_study(grid: Grid, n0: DensityState, params: ModelParams, tau0: float,
                         levels: int, T: float) -> RefinementTable:
    """Final-time L2 distances between runs with ``tau0 / 2^j``.

    The order is minus the least-squares slope of ``log2`` distance against
    level. A failing level ends the study with a partial table.
    """
    if levels < 3:
        raise ValueError("need at least 3 levels for a refinement fit")
    if not tau0 > 0 or not T > 0:
        raise ValueError("tau0 and T must be positive")
    taus, finals = [], []
    reason = ""
    for j in range(levels):
        tau = tau0 / 2**j
        try:
            traj = evolve(grid, n0, params, StepConfig(tau=tau), T)
        except QDDError as exc:
            reason = f"level {j} (tau={tau:.3e}) failed: {exc}"
            break
        taus.append(tau)
        finals.append(traj.states[-1].n)
    dists = [l2_distance(grid, finals[j], finals[j + 1]) for j in range(len(finals) - 1)]
    if len(dists) >= 2 and all(d > 0 for d in dists):
        slope = np.polyfit(np.arange(len(dists)), np.log2(dists), 1)[0]
        order = float(-slope)
    else:
        order = float("nan")
    monotone = all(dists[j + 1] < dists[j] for j in range(len(dists) - 1))
    return RefinementTable(taus=taus, distances=dists, order=order, monotone=monotone,
                           finals=finals, complete=not reason, reason=reason)
