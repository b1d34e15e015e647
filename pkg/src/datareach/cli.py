"""Command-line front end: reach / control / benchmark / selftest subcommands."""

from __future__ import annotations

import argparse
import math
import os
import sys as _sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import io as dio
from .errors import ConfigError, EmptyIntersection, InconsistentSample, StepTooLarge
from .intervals import Interval, IVector
from .knowledge import build_knowledge
from .reach import ConstantControl, ConstCosControl, PiecewiseConstantControl, datareach, max_step_size
from .systems import (
    ExperimentConfig,
    by_name,
    excite,
    experiment_for,
    run_closed_loop,
    unicycle,
    unicycle_knowledge_settings,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_STEP = 3
EXIT_DATA = 4

_REACH_KEYS = {
    "dt", "steps", "init_len", "seed", "excitation", "side_level", "control",
    "trajectory", "x0", "intersect_domain", "enclosure",
}
_CONTROL_KEYS = {
    "dt", "init_len", "seed", "mode", "eps", "mu0", "max_steps", "stop_level",
    "weights", "excitation", "x0", "refresh_every", "record_reach",
}
_BENCH_KEYS = {"max_steps", "seeds", "systems", "modes"}
_CONTROL_FAMS = {"const_cos", "constant", "piecewise"}


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(cfg) - {"system", "reach", "control", "benchmark", "out"}
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    return cfg


def _check_keys(section: dict, allowed: set, name: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")


def _outdir(args, cfg) -> Path:
    out = Path(args.out or cfg.get("out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _build_control_family(spec: dict, t_ref: float):
    fam = spec.get("family", "const_cos")
    if fam not in _CONTROL_FAMS:
        raise ConfigError(f"unknown control family {fam!r}")
    if fam == "const_cos":
        a1 = spec.get("a1", [0.0, 0.0])
        a2 = spec.get("a2", [0.0, 0.0])
        return ConstCosControl(
            v0=float(spec.get("v0", 1.0)),
            omega=float(spec.get("omega", 6.0)),
            t_ref=float(spec.get("t_ref", t_ref)),
            a1=Interval(*a1),
            a2=Interval(*a2),
        )
    if fam == "constant":
        return ConstantControl(np.asarray(spec["value"], dtype=float))
    values = np.asarray(spec["values"], dtype=float)
    return PiecewiseConstantControl(values, float(spec["dt"]), float(spec.get("t0", 0.0)))


def cmd_reach(args, cfg) -> int:
    section = dict(cfg.get("reach", {}))
    _check_keys(section, _REACH_KEYS, "reach")
    sys_name = cfg.get("system", "unicycle")
    system = by_name(sys_name)

    dt = float(section.get("dt", 0.02))
    steps = int(section.get("steps", 200))
    init_len = int(section.get("init_len", 15))
    seed = args.seed if args.seed is not None else int(section.get("seed", 2))
    sample_dt = 0.1

    limit = max_step_size(system.lip, system.U)
    if not dt < limit:
        print(f"reach: dt={dt:g} exceeds the step bound {limit:.6g}", file=_sys.stderr)
        return EXIT_STEP

    side = system.side
    if "side_level" in section:
        level = section["side_level"]
        if sys_name == "unicycle":
            settings = unicycle_knowledge_settings()
            settings["full"] = system.side
            if level not in settings:
                raise ConfigError(f"side_level must be one of {sorted(settings)}")
            side = settings[level]
        elif level == "lipschitz_only":
            from .knowledge import SideInfoSet

            side = SideInfoSet()
        elif level != "full":
            raise ConfigError("side_level must be 'full' or 'lipschitz_only'")

    if "trajectory" in section:
        samples, n, m = dio.read_trajectory_csv(section["trajectory"])
        if (n, m) != (system.n, system.m):
            raise ConfigError("trajectory dimensions do not match the system")
    else:
        x0 = np.asarray(section.get("x0", [-2.0, -2.5, math.pi / 2]
                                    if sys_name == "unicycle" else system.X.mid),
                        dtype=float)
        samples = excite(system, init_len, seed, dt=sample_dt, x0=x0,
                         mode=section.get("excitation", "mixed"))

    t_ref = samples[-1].t + sample_dt if samples[-1].t is not None else init_len * sample_dt
    default_family = (
        {} if sys_name == "unicycle"
        else {"family": "constant", "value": system.U.mid.tolist()}
    )
    ctrl = _build_control_family(section.get("control", default_family), t_ref)

    kb = build_knowledge(samples, system.lip, side)
    from .systems import advance

    x_start = advance(system, samples[-1].x, samples[-1].u, sample_dt)
    domain = system.X if section.get("intersect_domain", True) else None
    try:
        tube = datareach(kb, x_start, ctrl, dt, steps, t0=t_ref, domain=domain,
                         enclosure_mode=section.get("enclosure", "best"))
    except StepTooLarge as exc:
        print(f"reach: {exc}", file=_sys.stderr)
        return EXIT_STEP
    if tube.failure is not None:
        if "StepTooLarge" in tube.failure:
            print(f"reach: {tube.failure}", file=_sys.stderr)
            return EXIT_STEP
        print(f"reach: {tube.failure}", file=_sys.stderr)
        return EXIT_DATA

    out = _outdir(args, cfg)
    path = out / f"tube_{sys_name}.csv"
    dio.write_tube_csv(path, tube)
    widths = tube.terminal_width()
    print(f"tube written to {path} ({len(tube.steps)} rows)")
    print("terminal widths:", " ".join(f"{w:.6g}" for w in widths))
    return EXIT_OK


def _apply_control_overrides(exp: ExperimentConfig, section, args):
    if "dt" in section:
        exp.dt = float(section["dt"])
    if "init_len" in section:
        exp.init_len = int(section["init_len"])
    if "max_steps" in section:
        exp.max_steps = int(section["max_steps"])
    if "stop_level" in section:
        exp.stop_level = float(section["stop_level"])
    if "eps" in section:
        exp.eps = float(section["eps"])
    if "mu0" in section:
        exp.mu0 = float(section["mu0"])
    if "excitation" in section:
        exp.excitation = section["excitation"]
    if "refresh_every" in section:
        exp.refresh_every = int(section["refresh_every"])
    if "x0" in section:
        exp.x0 = np.asarray(section["x0"], dtype=float)
    if "record_reach" in section:
        exp.record_reach = bool(section["record_reach"])
    if "weights" in section:
        w = section["weights"]
        if w == "random":
            exp.redraw_weights = True
        elif isinstance(w, (list, tuple)) and len(w) == 2:
            exp.weights = (float(w[0]), float(w[1]))
        else:
            raise ConfigError("weights must be 'random' or a [w_plus, w_minus] pair")
    if args.seed is not None:
        exp.seed = args.seed
    elif "seed" in section:
        exp.seed = int(section["seed"])
    if args.mode is not None:
        exp.mode = args.mode
    elif "mode" in section:
        exp.mode = section["mode"]
    return exp


def cmd_control(args, cfg) -> int:
    section = dict(cfg.get("control", {}))
    _check_keys(section, _CONTROL_KEYS, "control")
    sys_name = cfg.get("system", "unicycle")
    system = by_name(sys_name)
    exp = _apply_control_overrides(experiment_for(sys_name), section, args)

    try:
        report = run_closed_loop(system, exp)
    except ValueError as exc:
        print(f"control: {exc}", file=_sys.stderr)
        return EXIT_STEP if "step bound" in str(exc) else EXIT_CONFIG
    except (InconsistentSample, EmptyIntersection) as exc:
        print(f"control: {exc}", file=_sys.stderr)
        return EXIT_DATA
    except StepTooLarge as exc:
        print(f"control: {exc}", file=_sys.stderr)
        return EXIT_STEP

    out = _outdir(args, cfg)
    dio.write_steps_csv(out / f"steps_{sys_name}.csv", report)
    dio.write_run_json(out / f"run_{sys_name}.json", report)
    if exp.record_reach:
        dio.write_predicted_boxes_csv(out / f"reach_{sys_name}.csv", report)
    print(
        f"{sys_name} [{exp.mode}] reached={report.reached} "
        f"steps={report.steps_taken} cum_cost={report.cum_cost:.4g} "
        f"mean_step={report.mean_step_micros:.0f}us"
    )
    return EXIT_OK if report.failure is None else EXIT_DATA


def cmd_benchmark(args, cfg) -> int:
    section = dict(cfg.get("benchmark", {}))
    _check_keys(section, _BENCH_KEYS, "benchmark")
    systems = section.get("systems", ["unicycle", "quadrotor", "aircraft"])
    modes = section.get("modes", ["idealistic", "optimistic"])
    seeds = section.get("seeds", [args.seed if args.seed is not None else 1])
    max_steps = int(section.get("max_steps", 5))

    jobs = []
    for name in systems:
        for mode in modes:
            for seed in seeds:
                exp = experiment_for(name, seed=int(seed), mode=mode)
                exp.max_steps = max_steps
                jobs.append((name, exp))

    def run(job):
        name, exp = job
        report = run_closed_loop(by_name(name), exp)
        bounds = [log.bound for log in report.logs]
        return {
            "system": name,
            "mode": exp.mode,
            "seed": exp.seed,
            "reached": report.reached,
            "steps": report.steps_taken,
            "cum_cost": f"{report.cum_cost:.8g}",
            "mean_micros": f"{report.mean_step_micros:.1f}",
            "max_micros": f"{report.max_step_micros:.1f}",
            "bound_mean": f"{float(np.mean(bounds)):.8g}" if bounds else "",
            "bound_max": f"{float(np.max(bounds)):.8g}" if bounds else "",
        }

    workers = int(os.environ.get("DATAREACH_THREADS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(job) for job in jobs]

    out = _outdir(args, cfg)
    path = out / "benchmark.csv"
    dio.write_benchmark_csv(path, rows)
    for row in rows:
        print(
            f"{row['system']:<10} {row['mode']:<12} seed={row['seed']} "
            f"reached={row['reached']} steps={row['steps']} "
            f"cum_cost={row['cum_cost']} mean={row['mean_micros']}us"
        )
    print(f"benchmark table written to {path}")
    return EXIT_OK


def _selftest_contraction() -> bool:
    from .intervals import IMatrix
    from .knowledge import Sample, contract_fg

    F = IVector.of([Interval(-0.01, 1.0), Interval(-1, 1), Interval(-1, 1)])
    G = IMatrix.of(
        [
            [Interval(-0.05, 0.05), Interval(-0.1, 1.0)],
            [Interval(-1, 1), Interval(-1, 1)],
            [Interval(-1, 1), Interval(-1, 1)],
        ]
    )
    s = Sample([0.0, 0.0, math.pi / 2], [0.0, 1.0, 0.1], [1.0, 0.1])
    CF, CG = contract_fg(s, F, G)
    ok = (
        abs(CF.lo[0] + 0.01) < 1e-12 and abs(CF.hi[0] - 0.06) < 1e-12
        and abs(CG.lo[0, 0] + 0.05) < 1e-12 and abs(CG.hi[0, 0] - 0.02) < 1e-12
        and abs(CG.lo[0, 1] + 0.1) < 1e-12 and abs(CG.hi[0, 1] - 0.6) < 1e-12
    )
    return ok


def _selftest_stepbound() -> bool:
    sysu = unicycle()
    return abs(max_step_size(sysu.lip, sysu.U) - 0.1231) < 1e-3


def _selftest_intervals(ncases: int = 1000) -> bool:
    rng = np.random.default_rng(7)
    for _ in range(ncases):
        a = np.sort(rng.uniform(-5, 5, 2))
        b = np.sort(rng.uniform(-5, 5, 2))
        A, B = Interval(*a), Interval(*b)
        inner_a = Interval(*np.quantile(a, [0.25, 0.75]))
        inner_b = Interval(*np.quantile(b, [0.25, 0.75]))
        for op in (lambda p, q: p + q, lambda p, q: p - q, lambda p, q: p * q):
            big, small = op(A, B), op(inner_a, inner_b)
            if not big.encloses(small, atol=1e-12):
                return False
            xa = rng.uniform(a[0], a[1])
            xb = rng.uniform(b[0], b[1])
            if not op(A, B).contains(op(Interval(xa), Interval(xb)).lo, atol=1e-9):
                return False
    return True


def cmd_selftest(args, cfg) -> int:
    checks = [
        ("contraction golden case", _selftest_contraction),
        ("unicycle step bound 0.123", _selftest_stepbound),
        ("interval soundness suite", _selftest_intervals),
    ]
    status = EXIT_OK
    for name, fn in checks:
        try:
            ok = fn()
        except Exception as exc:  # noqa: BLE001 - selftest reports, never raises
            ok = False
            print(f"[FAIL] {name}: {type(exc).__name__}: {exc}")
        else:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}")
        if not ok:
            status = EXIT_FAIL
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="datareach",
        description="Data-driven reachability and one-step control for unknown "
        "control-affine systems",
    )
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--out", help="output directory (default: ./out)")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument(
        "--mode", choices=["idealistic", "optimistic"], help="relaxation to solve"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("reach", "control", "benchmark", "selftest"):
        sub.add_parser(name)
    args = parser.parse_args(argv)

    handlers = {
        "reach": cmd_reach,
        "control": cmd_control,
        "benchmark": cmd_benchmark,
        "selftest": cmd_selftest,
    }
    try:
        cfg = _load_config(args.config)
        return handlers[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except StepTooLarge as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_STEP
    except (InconsistentSample, EmptyIntersection) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
