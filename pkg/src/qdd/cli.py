"""Command-line driver: ``qdd run | sweep | verify | compare | print-config``.

Exit codes: 0 success, 2 runtime failure, 3 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time

from .config import DEFAULTS, RunConfig, dump_config, load_experiments, parse_sigma
from .errors import ConfigError, QDDError, StepFailed

log = logging.getLogger("qdd")

EXIT_OK = 0
EXIT_RUNTIME = 2
EXIT_USAGE = 3

SUITES = ("gamma", "n2", "gns", "dummy", "logsob", "all")
DEFAULT_TRIALS = {"gamma": 200, "n2": 1000, "gns": 200, "dummy": 200, "logsob": 200}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; that code is reserved for runtime failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(nested: bool = False) -> argparse.ArgumentParser:
    # subcommands repeat the flags; SUPPRESS keeps values given before the command
    kw = {"default": argparse.SUPPRESS} if nested else {}
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="TOML config file (defaults: see print-config)", **kw)
    p.add_argument("--out", help="output directory (overrides io.out)", **kw)
    p.add_argument("--seed", type=int, help="master seed (overrides the config)", **kw)
    p.add_argument("--trials", type=int, help="samples per inequality suite", **kw)
    p.add_argument("--quiet", action="store_true", help="only print results and errors", **kw)
    return p


def _sigma_list(text: str):
    try:
        return [parse_sigma(x) for x in text.split(",") if x.strip()]
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _float_list(text: str):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qdd", description="Quantum drift-diffusion solver and inequality lab.",
                parents=[_common()])
    common = _common(nested=True)
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    sub.add_parser("run", parents=[common], help="evolve one configuration")

    sw = sub.add_parser("sweep", parents=[common], help="run a (sigma, eps) grid")
    sw.add_argument("--sigma", type=_sigma_list, default=None,
                    help="comma list, e.g. '4pi,16pi' (default 4pi,16pi)")
    sw.add_argument("--eps", type=_float_list, default=None,
                    help="comma list; 0 selects the classical model (default 0,0.1)")
    sw.add_argument("--d", type=int, default=None, help="dimension (default 2)")
    sw.add_argument("--geometry", choices=("slab", "radial"), default=None)
    sw.add_argument("--N", type=int, default=None, help="nodes (default 201)")
    sw.add_argument("--tau", type=float, default=None, help="time step (default 1e-4)")
    sw.add_argument("--T", type=float, default=None, help="final time (default 0.2)")
    sw.add_argument("--profile", default=None, help="initial profile id")
    sw.add_argument("--workers", type=int, default=None,
                    help="parallel runs (default: available cores)")

    vf = sub.add_parser("verify", parents=[common], help="run an inequality suite")
    vf.add_argument("suite", choices=SUITES)

    cp = sub.add_parser("compare", parents=[common], help="paired classical/quantum runs")
    cp.add_argument("preset", help="experiment id from presets/experiments.toml")

    sub.add_parser("print-config", parents=[common], help="print the effective config")
    return p


# ---------------------------------------------------------------- run

def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict({})
    if args.seed is not None:
        cfg.raw["seed"] = args.seed
    if args.out is not None:
        cfg.raw["io"]["out"] = args.out
    return cfg


def _prepare_out(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write-test")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        raise OSError(f"output directory {path!r} is not writable: {exc}") from exc
    return path


def cmd_run(args) -> int:
    from .scheme import evolve
    cfg = _load_config(args)
    out = _prepare_out(cfg.raw["io"]["out"])
    grid = cfg.grid()
    params = cfg.params(grid)
    scfg = cfg.step_config()
    s = cfg.raw["scheme"]
    t0 = time.perf_counter()
    summary = {"config": cfg.raw, "outcome": "Completed"}
    try:
        traj = evolve(grid, cfg.initial_state(grid), params, scfg, float(s["T"]),
                      snapshot_every=cfg.raw["io"]["snapshot_every"],
                      max_halvings=s["max_halvings"])
    except StepFailed as exc:
        summary.update(outcome="StepFailed", reason=str(exc),
                       wall_time=time.perf_counter() - t0)
        _write_json(os.path.join(out, "summary.json"), summary)
        print(f"qdd: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    traj.write_timeseries(os.path.join(out, "timeseries.csv"))
    traj.write_snapshots(os.path.join(out, "snapshots"))
    last = traj.reports[-1]
    summary.update(t_final=traj.final_time, steps=len(traj.times), mass=last.mass,
                   entropy=last.entropy, min_n=last.min_n, max_n=last.max_n,
                   wall_time=time.perf_counter() - t0)
    _write_json(os.path.join(out, "summary.json"), summary)
    if not args.quiet:
        print(json.dumps({k: v for k, v in summary.items() if k != "config"}))
    return EXIT_OK


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=str)
        fh.write("\n")


# ---------------------------------------------------------------- sweep

SWEEP_KEYS = {"sigma": "sigmas", "eps": "epsilons", "d": "d", "geometry": "geometry",
              "N": "N", "L": "L", "tau": "tau", "T": "T", "profile": "profile",
              "workers": "workers", "snapshot_every": "snapshot_every"}


def _sweep_spec(args):
    from .config import tomllib
    from .sweep import SweepSpec
    kw = {"sigmas": (4 * math.pi, 16 * math.pi), "epsilons": (0.0, 0.1)}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read sweep config {args.config}: {exc}") from exc
        section = data.get("sweep", {k: v for k, v in data.items() if k != "seed"})
        for key, val in section.items():
            if key not in SWEEP_KEYS:
                raise ConfigError(f"unknown sweep key 'sweep.{key}'")
            if key == "sigma":
                val = [parse_sigma(v) for v in (val if isinstance(val, list) else [val])]
            elif key == "eps" and not isinstance(val, list):
                val = [val]
            kw[SWEEP_KEYS[key]] = val
        if "seed" in data:
            kw["seed"] = int(data["seed"])
    for key, dest in SWEEP_KEYS.items():
        val = getattr(args, key, None)
        if val is not None:
            kw[dest] = val
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.out is not None:
        kw["out"] = args.out
    return SweepSpec(**kw)


def cmd_sweep(args) -> int:
    from .sweep import FAILED, run_sweep
    spec = _sweep_spec(args)
    _prepare_out(spec.out)
    records = run_sweep(spec)
    for r in records:
        if not args.quiet:
            print(json.dumps({"run_id": r.run_id, "outcome": r.outcome}))
    return EXIT_RUNTIME if any(r.outcome == FAILED for r in records) else EXIT_OK


# ---------------------------------------------------------------- verify

def _passes(rep) -> bool:
    const = rep.empirical_constant
    finite = const is not None and math.isfinite(const)
    return rep.violations == 0 and finite and rep.extra.get("stable", True)


def _suite_reports(name: str, seed: int, trials: int | None):
    from . import inequalities as iq
    n = trials or DEFAULT_TRIALS[name]
    if name == "gamma":
        for d in (2, 3):
            for delta in (0.01, 0.05):
                rep = iq.gamma_suite(d, delta, trials=n, seed=seed)
                worst, evals = iq.adversarial_gamma_probe(d, delta, seed=seed)
                rep.extra.update(adversarial_min=worst, adversarial_evals=evals)
                rep.violations += int(worst < -iq.GAMMA_TOL)
                yield rep
    elif name == "n2":
        for d in (2, 3):
            yield iq.n2_suite(d, trials=n, holdout=max(1, n // 2), seed=seed)
    elif name == "gns":
        for d in (1, 2, 3):
            for inst in ("sup", "grad4"):
                yield iq.gagliardo_suite(d, inst, trials=n, seed=seed)
    elif name == "dummy":
        for d in (1, 2, 3):
            yield iq.dummy_suite(d, trials=n, seed=seed)
    elif name == "logsob":
        for d in (1, 2, 3):
            yield iq.log_sobolev_suite(d, trials=n, seed=seed)


def cmd_verify(args) -> int:
    names = [s for s in SUITES if s != "all"] if args.suite == "all" else [args.suite]
    seed = args.seed if args.seed is not None else 0
    if args.trials is not None and args.trials < 1:
        raise UsageError("--trials must be positive")
    ok = True
    for name in names:
        for rep in _suite_reports(name, seed, args.trials):
            passed = _passes(rep)
            ok &= passed
            d = rep.to_dict()
            d["passed"] = passed
            print(json.dumps(d), flush=True)
    return EXIT_OK if ok else EXIT_RUNTIME


# ---------------------------------------------------------------- compare

def _as_list(v):
    return list(v) if isinstance(v, list) else [v]


def compare_runs(preset: str, seed: int = 0, out: str | None = None) -> dict:
    """Run the paired experiments of a preset; returns the comparison dict."""
    from .sweep import execute_run
    exps = load_experiments()
    if preset not in exps:
        raise UsageError(f"unknown compare preset {preset!r} "
                         f"(available: {', '.join(sorted(exps))})")
    e = exps[preset]
    sigmas = [s * math.pi for s in _as_list(e["sigma_over_pi"])]
    epss = [float(x) for x in _as_list(e["eps"])]
    count = max(len(sigmas), len(epss))
    sigmas = sigmas * count if len(sigmas) == 1 else sigmas
    epss = epss * count if len(epss) == 1 else epss
    runs = []
    for sigma, eps in zip(sigmas, epss):
        params = {"sigma": sigma, "eps": eps, "d": e["d"], "geometry": e["geometry"],
                  "N": e["N"], "L": e["L"], "tau": e["tau"], "T": e["T"],
                  "profile": e["profile"], "seed": seed}
        log.info("compare %s: sigma=%.4g eps=%g", preset, sigma, eps)
        rec = execute_run(params, out)
        runs.append({"sigma": sigma, "eps": eps, "outcome": rec.outcome,
                     "run_id": rec.run_id, "diagnostics": rec.diagnostics})
    classical = [r["outcome"] for r in runs if r["eps"] == 0.0]
    quantum = [r["outcome"] for r in runs if r["eps"] > 0.0]
    outcomes = [r["outcome"] for r in runs]
    return {
        "preset": preset,
        "classical_outcome": classical[0] if len(classical) == 1 else classical,
        "quantum_outcome": (quantum[0] if len(quantum) == 1 else quantum) or None,
        "expected": e["expected"],
        "matches_expected": outcomes == list(e["expected"]),
        "runs": runs,
    }


def cmd_compare(args) -> int:
    seed = args.seed if args.seed is not None else 0
    out = _prepare_out(args.out) if args.out else None
    if load_experiments().get(args.preset) is None:
        raise UsageError(f"unknown compare preset {args.preset!r}")
    result = compare_runs(args.preset, seed, out)
    if out is not None:
        _write_json(os.path.join(out, "comparison.json"), result)
    print(json.dumps({k: result[k] for k in
                      ("preset", "classical_outcome", "quantum_outcome", "matches_expected")}))
    return EXIT_OK if result["matches_expected"] else EXIT_RUNTIME


# ---------------------------------------------------------------- print-config

def cmd_print_config(args) -> int:
    raw = _load_config(args).raw if (args.config or args.seed is not None or args.out) \
        else DEFAULTS
    sys.stdout.write(dump_config(raw))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify,
            "compare": cmd_compare, "print-config": cmd_print_config}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"qdd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"qdd: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except QDDError as exc:
        print(f"qdd: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
