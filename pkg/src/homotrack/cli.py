"""Command-line harness.

Exit codes: 0 success, 1 nothing converged / verification failed,
2 bad input (parse errors, dimension mismatches, bad parameters),
3 track budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time

import numpy as np

from . import batchla
from .polysys import ParseError, eval_system, parse_solutions, parse_system, serialize_solutions, serialize_system
from .problems import TrackBudgetExceeded, gen_cyclic, gen_eco
from .problems import vision
from .tracker import TrackerConfig, solve

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load_system(path: str):
    sys_ = parse_system(_read(path))
    if not sys_.name:
        object.__setattr__(sys_, "name", path.rsplit("/", 1)[-1].rsplit(".", 1)[0])
    return sys_


def _config(args) -> TrackerConfig:
    kw = dict(predictor=args.predictor, seed=args.seed)
    if args.dt_init is not None:
        kw["dt_init"] = args.dt_init
    if args.corrector_tol is not None:
        kw["corrector_tol"] = args.corrector_tol
    if args.max_steps is not None:
        kw["max_steps"] = args.max_steps
    try:
        return TrackerConfig(**kw)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _threads(args) -> int:
    return args.threads if args.threads is not None else batchla.default_threads()


def _run(system, args, threads, seed=None):
    start = start_sols = None
    if args.start or args.start_sols:
        if not (args.start and args.start_sols):
            raise InputError("--start and --start-sols go together")
        start = _load_system(args.start)
        start_sols = parse_solutions(_read(args.start_sols))
        if start_sols.shape[1] != start.num_vars:
            raise InputError("start solutions do not match the start system")
        if start.num_vars != system.num_vars:
            raise InputError("start and target systems differ in variable count")
    cfg = _config(args)
    if seed is not None:
        cfg = TrackerConfig(**{**cfg.to_dict(), "seed": seed})
    t0 = time.perf_counter()
    sset, results, ch = solve(system, start, start_sols, config=cfg, threads=threads)
    ms = (time.perf_counter() - t0) * 1e3
    return sset, results, ch, cfg, ms


def make_report(system, sset, results, ch, cfg, ms, threads) -> dict:
    conv = [r for r in results if r.converged]
    steps = np.array([r.steps for r in results])
    iters = np.array([r.corrector_iters_total for r in results])
    return {
        "problemName": system.name,
        "numVars": system.num_vars,
        "numTracks": len(results),
        "numConverged": len(conv),
        "numDistinct": len(sset),
        "numReal": sset.counts.get("real", 0),
        "maxResidual": max((s.residual for s in sset.solutions), default=None),
        "wallClockMs": ms,
        "threads": threads,
        "statusCounts": {k: v for k, v in sset.counts.items() if k not in ("distinct", "real", "failed")},
        "perTrackStats": {
            "stepsMean": float(steps.mean()) if len(steps) else 0.0,
            "stepsMax": int(steps.max()) if len(steps) else 0,
            "correctorItersMean": float(iters.mean()) if len(iters) else 0.0,
            "rejectedSteps": int(sum(r.rejected for r in results)),
        },
        "gamma": [ch.gamma.real, ch.gamma.imag],
        "config": cfg.to_dict(),
    }


def cmd_solve(args) -> int:
    system = _load_system(args.system)
    threads = _threads(args)
    sset, results, ch, cfg, ms = _run(system, args, threads)
    report = make_report(system, sset, results, ch, cfg, ms, threads)
    pts = sset.points if len(sset) else np.zeros((0, system.num_vars), dtype=complex)
    with open(f"{args.out}.solutions.txt", "w") as fh:
        fh.write(serialize_solutions(pts))
    with open(f"{args.out}.report.json", "w") as fh:
        json.dump(report, fh, indent=1)
    print(
        f"{system.name}: {report['numTracks']} tracks, {report['numConverged']} converged, "
        f"{report['numDistinct']} distinct ({report['numReal']} real), "
        f"max residual {report['maxResidual']}, {ms:.0f} ms"
    )
    return EXIT_OK if report["numConverged"] else EXIT_FAIL


def residuals(system, sols) -> np.ndarray:
    return np.array([np.abs(eval_system(system, x)).max() for x in sols])


def _histogram(res) -> list[tuple[str, int]]:
    bins: dict[int, int] = {}
    for r in res:
        k = -300 if r == 0 else int(math.floor(math.log10(r))) if math.isfinite(r) else 300
        bins[k] = bins.get(k, 0) + 1
    rows = []
    for k in sorted(bins):
        label = "0" if k == -300 else "inf/nan" if k == 300 else f"1e{k}"
        rows.append((label, bins[k]))
    return rows


def cmd_verify(args) -> int:
    system = _load_system(args.system)
    sols = parse_solutions(_read(args.solutions))
    if sols.shape[1] != system.num_vars:
        raise InputError(f"solutions have {sols.shape[1]} coordinates, system has {system.num_vars} variables")
    res = residuals(system, sols)
    for i, r in enumerate(res):
        print(f"solution {i}: {r:.3e}")
    print("log10 histogram:")
    for label, n in _histogram(res):
        print(f"  {label:>8} {'#' * min(n, 60)} {n}")
    worst = float(res.max()) if len(res) else math.inf
    print(f"max residual {worst:.3e} (tol {args.tol:g})")
    return EXIT_OK if worst < args.tol else EXIT_FAIL


def cmd_gen(args) -> int:
    kind = args.kind
    out = args.out
    if kind in ("cyclic", "eco"):
        if args.n is None:
            raise InputError(f"{kind} needs a size, e.g. 'gen {kind} 7'")
        try:
            system = gen_cyclic(args.n) if kind == "cyclic" else gen_eco(args.n)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        out = out or f"{kind}{args.n}"
        with open(f"{out}.txt", "w") as fh:
            fh.write(serialize_system(system))
        print(f"wrote {out}.txt")
        return EXIT_OK
    if args.noise < 0:
        raise InputError("noise must be nonnegative")
    try:
        inst, _ = vision.synth_instance(kind, args.seed, noise=args.noise)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    system = vision.build_system(inst)
    out = out or f"{kind}_seed{args.seed}"
    with open(f"{out}.txt", "w") as fh:
        fh.write(serialize_system(system))
    vision.write_instance(f"{out}.instance.json", inst)
    written = [f"{out}.txt", f"{out}.instance.json"]
    gt = inst.gt_vector()
    if gt is not None:
        with open(f"{out}.gt.txt", "w") as fh:
            fh.write(serialize_solutions(gt[None, :]))
        written.append(f"{out}.gt.txt")
    print("wrote " + ", ".join(written))
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def cmd_bench(args) -> int:
    if args.repeats < 1:
        raise InputError("repeats must be at least 1")
    system = _load_system(args.system)
    thread_list = args.threads or [batchla.default_threads()]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh)
    w.writerow(["name", "threads", "repeat", "wallclock_ms", "tracks", "converged"])
    times: dict[int, list[float]] = {t: [] for t in thread_list}
    mismatches = 0
    try:
        for rep in range(args.repeats):
            ref = None
            for th in thread_list:
                sset, results, _, _, ms = _run(system, args, th, seed=args.seed + rep)
                conv = sum(r.converged for r in results)
                w.writerow([system.name, th, rep, f"{ms:.3f}", len(results), conv])
                times[th].append(ms)
                pts = sset.points.tobytes()
                if ref is None:
                    ref = pts
                elif pts != ref:
                    mismatches += 1
    finally:
        if fh is not sys.stdout:
            fh.close()
    for th, ts in times.items():
        print(f"# threads={th}: mean {np.mean(ts):.1f} ms over {len(ts)} repeats", file=sys.stderr)
    if len(thread_list) > 1:
        print(f"# solution sets identical across thread counts: {mismatches == 0}", file=sys.stderr)
    return EXIT_OK


def random_problems(n: int, batch: int, rng) -> list:
    return [
        batchla.LinearProblem(
            rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)),
            rng.normal(size=n) + 1j * rng.normal(size=n),
        )
        for _ in range(batch)
    ]


def cmd_bench_linsolve(args) -> int:
    rng = np.random.default_rng(args.seed)
    w = csv.writer(sys.stdout)
    w.writerow(["n", "batch", "wallclock_ns", "ops"])
    solver = batchla.solve_factor_then_substitute if args.reference else None
    for n in args.sizes:
        if n > batchla.MAX_N:
            raise InputError(f"n={n} exceeds {batchla.MAX_N}")
        probs = random_problems(n, args.batch, rng)
        best, ops = None, 0
        for _ in range(args.repeats):
            t0 = time.perf_counter_ns()
            if solver is None:
                _, ops = batchla.solve_batch(probs, threads=_threads(args), count_ops=True)
            else:
                _, ops = solver(probs, count_ops=True)
            dt = time.perf_counter_ns() - t0
            best = dt if best is None else min(best, dt)
        w.writerow([n, args.batch, best, ops])
    return EXIT_OK


def _tracker_flags(p):
    p.add_argument("--start", help="start system file")
    p.add_argument("--start-sols", help="start solutions file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--predictor", choices=("euler", "rk4"), default="rk4")
    p.add_argument("--dt-init", type=float)
    p.add_argument("--corrector-tol", type=float)
    p.add_argument("--max-steps", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="homotrack", description="Homotopy continuation solver")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="track all paths and write solutions and a JSON report")
    p.add_argument("--system", required=True)
    p.add_argument("--out", default="run")
    p.add_argument("--threads", type=int)
    _tracker_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="residuals of a solution file against a system")
    p.add_argument("--system", required=True)
    p.add_argument("--solutions", required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="write a benchmark or synthetic vision system")
    p.add_argument("kind", choices=("cyclic", "eco") + vision.KINDS)
    p.add_argument("n", nargs="?", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="pixel noise std (vision kinds)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="repeated timed solves, CSV on stdout")
    p.add_argument("--system", required=True)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--threads", type=_int_list, help="comma-separated thread counts")
    p.add_argument("--out", help="CSV path (default stdout)")
    _tracker_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("bench-linsolve", help="time batched linear solves")
    p.add_argument("--sizes", type=_int_list, default=[4, 8, 16, 32])
    p.add_argument("--batch", type=int, default=1000)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--reference", action="store_true", help="time factor + two triangular solves instead")
    p.set_defaults(func=cmd_bench_linsolve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrackBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ParseError, InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
