"""``relaycap`` command-line interface.

Exit codes: 0 success, 2 usage error, 3 infeasible, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import netio, netmodel, powopt, sfm
from .cvx import BarrierConfig
from .errors import ConvergenceError, DomainError, NumericalError

log = logging.getLogger("relaycap")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4

EXPERIMENT_HEADER = ["seed", "n", "status", "iterations", "total_power", "min_cut_value",
                     "kept_relays", "wall_time_ms", "simplified_power"]
DEMO_HEADER = ["rho", "gap"]
CAPACITY_CSV = ["model", "n", "min_cut", "min_cut_value", "achievable_lower", "capacity_gap",
                "iterations", "method", "wall_time_ms"]
OPTIMIZE_CSV = ["mode", "status", "total_power", "min_cut_value", "rate", "objective",
                "iterations", "p_star", "min_cut", "wall_time_ms"]
SUMMARY_METRICS = ("iterations", "total_power", "simplified_power", "kept_relays")


class UsageError(Exception):
    pass


@dataclass
class SolverConfig:
    """Contents of a ``--config`` JSON file; unknown keys are rejected."""

    tol: float | None = None  # outer cutting-plane rate tolerance
    sfm_tol: float = 1e-10
    barrier: BarrierConfig = field(default_factory=BarrierConfig)

    @classmethod
    def load(cls, path) -> "SolverConfig":
        if path is None:
            return cls()
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(doc) - {f.name for f in fields(cls)}
        if unknown:
            raise UsageError(f"unknown config key(s): {sorted(unknown)}")
        barrier = doc.get("barrier", {})
        if not isinstance(barrier, dict):
            raise UsageError("config 'barrier' must be an object")
        try:
            bc = BarrierConfig.from_dict(barrier)
        except (DomainError, TypeError) as exc:
            raise UsageError(str(exc)) from None
        return cls(doc.get("tol"), doc.get("sfm_tol", 1e-10), bc)


# --------------------------------------------------------------------------
# output helpers


def _emit(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        try:
            with open(out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc.strerror}") from None


def _csv_text(header, rows, comments=()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r[k] for k in header])
    for c in comments:
        buf.write(f"# {c}\n")
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


def _positive_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 2 for v in vals):
        raise argparse.ArgumentTypeError("sizes must be integers >= 2")
    return vals


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"expected a finite nonnegative number, got {text!r}")
    return v


def _finite_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def _load(path):
    if path is None:
        raise UsageError("--network is required")
    return netio.load_network(path)


def _tol(args, cfg, default=1e-6):
    if args.tol is not None:
        return args.tol
    return default if cfg.tol is None else cfg.tol


# --------------------------------------------------------------------------
# commands


def cmd_capacity(args) -> int:
    cfg = SolverConfig.load(args.config)
    net = _load(args.network)
    p = None
    if net.model == "gaussian":
        p = 1.0 if args.pmax is None else args.pmax
    elif args.pmax is not None:
        raise UsageError("--pmax only applies to Gaussian networks")
    n_relays = net.n - 2
    if args.brute_force and n_relays > 12:
        raise UsageError(f"--brute-force needs at most 12 relays, network has {n_relays}")
    t = time.perf_counter()
    res = sfm.min_cut(net, p, "wolfe", cfg.sfm_tol)
    report = {
        "model": net.model,
        "n": int(net.n),
        "min_cut": res.cut.nodes(),
        "min_cut_value": res.value if isinstance(res.value, int) else float(res.value),
        "achievable_lower": res.achievable_lower,
        "capacity_gap": res.capacity_gap,
        "iterations": int(res.sfm.iterations),
        "method": "min-norm-point",
    }
    if args.brute_force:
        ref = sfm.min_cut(net, p, "brute")
        if abs(ref.value - res.value) > 1e-6 * max(1.0, abs(ref.value)):
            raise NumericalError(
                f"min-norm-point value {res.value!r} disagrees with enumeration {ref.value!r}"
            )
        report["brute_force_value"] = ref.value if isinstance(ref.value, int) else float(ref.value)
    report["wall_time_ms"] = 1e3 * (time.perf_counter() - t)
    netio.validate(report, "capacity_report")
    if args.format == "csv":
        row = {k: _fmt(report[k]) for k in CAPACITY_CSV}
        row["min_cut"] = " ".join(map(str, report["min_cut"]))
        _emit(_csv_text(CAPACITY_CSV, [row]), args.out)
    else:
        _emit(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = SolverConfig.load(args.config)
    net = _load(args.network)
    if net.model != "gaussian":
        raise UsageError("power optimization needs a Gaussian network")
    pmax = 100.0 if args.pmax is None else args.pmax
    if pmax <= 0:
        raise UsageError("--pmax must be positive")
    tol = _tol(args, cfg)
    t = time.perf_counter()
    if args.mode == "min-power":
        if args.rate is None:
            raise UsageError("--mode min-power requires --rate")
        res = powopt.minimize_power(net, args.rate, pmax, tol, cfg.barrier)
    elif args.mode == "max-rate":
        if args.ptot is None:
            raise UsageError("--mode max-rate requires --ptot")
        res = powopt.maximize_rate(net, args.ptot, pmax, tol, cfg.barrier)
    else:
        if args.mu1 is None or args.mu2 is None:
            raise UsageError("--mode general requires --mu1 and --mu2")
        res = powopt.general_program(net, args.mu1, args.mu2, args.rate or 0.0, args.ptot,
                                     pmax, tol, cfg.barrier)
    doc = {"mode": args.mode, **res.to_dict(), "wall_time_ms": 1e3 * (time.perf_counter() - t)}
    netio.validate(doc, "powopt_result")
    if args.format == "csv":
        row = {k: _fmt(doc[k]) for k in OPTIMIZE_CSV}
        row["p_star"] = " ".join(repr(v) for v in doc["p_star"])
        row["min_cut"] = "" if doc["min_cut"] is None else " ".join(map(str, doc["min_cut"]))
        _emit(_csv_text(OPTIMIZE_CSV, [row]), args.out)
    else:
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    if res.status == "infeasible":
        print(powopt.INFEASIBLE_MESSAGE, file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def instance_seed(seed: int, n: int, k: int) -> int:
    """Seed of the k-th experiment instance of size n."""
    return int(np.random.SeedSequence([seed, n, k]).generate_state(1)[0])


def run_instance(job) -> dict:
    """One experiment row: full power minimization plus simplification."""
    seed, n, style, R0, pmax, P_th, tol, barrier = job
    row = dict.fromkeys(EXPERIMENT_HEADER, "")
    row.update(seed=seed, n=n)
    t = time.perf_counter()
    try:
        net = netmodel.random_gaussian_network(n, seed, style)
        res = powopt.minimize_power(net, R0, pmax, tol, barrier)
        row.update(status=res.status, iterations=res.iterations)
        if res.status == "optimal":
            check = sfm.min_cut(net, res.p_star)
            row.update(total_power=res.total_power, min_cut_value=float(check.value))
            simp = powopt.simplify_network(net, R0, pmax, P_th, tol, barrier, full=res)
            row.update(kept_relays=len(simp.kept), simplified_power=simp.total_power)
    except (NumericalError, ConvergenceError, DomainError, ArithmeticError) as exc:
        row["status"] = f"error:{type(exc).__name__}"
        log.warning("instance seed=%s n=%s failed: %s", seed, n, exc)
    row["wall_time_ms"] = 1e3 * (time.perf_counter() - t)
    return row


def summarize(rows) -> list[dict]:
    """Mean and standard deviation per size of each numeric metric, over optimal rows."""
    out = []
    for n in sorted({r["n"] for r in rows}):
        sel = [r for r in rows if r["n"] == n and r["status"] == "optimal"]
        for m in SUMMARY_METRICS:
            vals = np.array([float(r[m]) for r in sel if r[m] != ""])
            out.append({
                "n": n, "metric": m, "count": len(vals),
                "mean": float(vals.mean()) if len(vals) else math.nan,
                "std": float(vals.std()) if len(vals) else math.nan,
            })
    return out


def worker_count(requested: int | None) -> int:
    cap = os.environ.get("RELAYCAP_THREADS")
    w = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            w = min(w, max(1, int(cap)))
        except ValueError:
            raise UsageError(f"RELAYCAP_THREADS must be an integer, got {cap!r}") from None
    return max(1, w)


def run_experiment(sizes, count, seed, R0=4.0, pmax=100.0, P_th=1.0, style="dense-real",
                   tol=1e-6, barrier=None, workers=1) -> list[dict]:
    jobs = [(instance_seed(seed, n, k), n, style, R0, pmax, P_th, tol, barrier)
            for n in sizes for k in range(count)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_instance, jobs))
    return [run_instance(j) for j in jobs]


def cmd_experiment(args) -> int:
    cfg = SolverConfig.load(args.config)
    if args.count < 0:
        raise UsageError("--count must be nonnegative")
    netmodel._parse_style(args.style)
    R0 = 4.0 if args.rate is None else args.rate
    pmax = 100.0 if args.pmax is None else args.pmax
    P_th = 1.0 if args.pth is None else args.pth
    rows = run_experiment(args.sizes, args.count, args.seed, R0, pmax, P_th, args.style,
                          _tol(args, cfg), cfg.barrier, worker_count(args.workers))
    summary = summarize(rows) if rows else []
    for s in summary:
        log.info("n=%d %s: %.4g +- %.4g (%d runs)", s["n"], s["metric"], s["mean"], s["std"], s["count"])
    if args.format == "json":
        _emit(json.dumps({"rows": rows, "summary": summary}, indent=2) + "\n", args.out)
    else:
        comments = ["summary: n,metric,count,mean,std"] if summary else []
        comments += [f"{s['n']},{s['metric']},{s['count']},{s['mean']!r},{s['std']!r}" for s in summary]
        _emit(_csv_text(EXPERIMENT_HEADER, [{k: _fmt(v) for k, v in r.items()} for r in rows],
                        comments), args.out)
    return EXIT_OK


def rho_grid(step: float) -> np.ndarray:
    if not (0 < step <= 0.5):
        raise UsageError(f"--step must lie in (0, 0.5], got {step}")
    k = int(math.floor(1.0 / step + 1e-9))
    rho = np.arange(k + 1) * step
    if rho[-1] < 1.0 - 1e-12:
        rho = np.append(rho, 1.0)
    return np.minimum(rho, 1.0)


def demo_rows(step: float, gain_sr=1.0, gain_rd=3.0) -> list[dict]:
    return [{"rho": float(r),
             "gap": netmodel.nonsubmodularity_gap(netmodel.CorrelatedDiamond(gain_sr, gain_rd, float(r)))}
            for r in rho_grid(step)]


def cmd_demo(args) -> int:
    rows = demo_rows(args.step, args.gain_sr, args.gain_rd)
    if args.format == "json":
        _emit(json.dumps(rows, indent=2) + "\n", args.out)
    else:
        _emit(_csv_text(DEMO_HEADER, [{k: _fmt(v) for k, v in r.items()} for r in rows]), args.out)
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.model == "gaussian":
        style = args.style
        if args.layers is not None:
            style = f"layered({args.width})"
        net = netmodel.random_gaussian_network(args.n, args.seed, style)
    elif args.model == "adt":
        net = netmodel.random_adt_network(args.n, args.seed, args.prime, args.max_gain, args.density)
    else:
        net = netmodel.random_erasure_network(args.n, args.seed, args.density)
    _emit(netio.dumps_network(net) + "\n", args.out)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relaycap",
                                 description="Relay network cut-set bounds and power optimization.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, fmt="json"):
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=["json", "csv"], default=fmt)
        p.add_argument("--config", help="JSON solver config (keys: tol, sfm_tol, barrier)")
        p.add_argument("--tol", type=_nonneg_float)

    p = sub.add_parser("capacity", help="minimum cut (cut-set bound) of a network")
    p.add_argument("--network", required=True)
    p.add_argument("--pmax", type=_nonneg_float, help="per-node transmit power (Gaussian, default 1)")
    p.add_argument("--brute-force", action="store_true", help="cross-check by enumeration (<= 12 relays)")
    common(p)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("optimize", help="power minimization, rate maximization, or mixed objective")
    p.add_argument("--network", required=True)
    p.add_argument("--mode", choices=["min-power", "max-rate", "general"], default="min-power")
    p.add_argument("--rate", type=_nonneg_float, help="target rate R0 in bits")
    p.add_argument("--pmax", type=_nonneg_float, help="per-node power cap (default 100)")
    p.add_argument("--ptot", type=_nonneg_float, help="total power budget")
    p.add_argument("--mu1", type=_finite_float)
    p.add_argument("--mu2", type=_finite_float)
    common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("experiment", help="random-network power minimization and simplification sweep")
    p.add_argument("--sizes", type=_positive_list, default=[10, 15, 20])
    p.add_argument("--count", type=int, default=300)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rate", type=_nonneg_float, help="target rate R0 (default 4)")
    p.add_argument("--pmax", type=_nonneg_float, help="per-node power cap (default 100)")
    p.add_argument("--pth", type=_nonneg_float, help="simplification threshold (default 1)")
    p.add_argument("--style", default="dense-real")
    p.add_argument("--workers", type=int, help="worker processes (capped by RELAYCAP_THREADS)")
    common(p, "csv")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("demo-nonsubmodular", help="correlated-input diamond gap versus rho")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--gain-sr", type=_finite_float, default=1.0)
    p.add_argument("--gain-rd", type=_finite_float, default=3.0)
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("generate", help="write a random network file")
    p.add_argument("--model", choices=["gaussian", "adt", "erasure"], default="gaussian")
    p.add_argument("--n", type=int, help="node count (or give --layers)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--style", default="dense-real", help="dense-real, dense-complex, layered(w)")
    p.add_argument("--layers", type=int, help="shorthand: n = layers * width, layered style")
    p.add_argument("--width", type=int, default=4)
    p.add_argument("--prime", type=int, default=2)
    p.add_argument("--max-gain", type=int, default=3)
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "generate":
        if args.density is None:
            args.density = 1.0 if args.model == "adt" else 0.5
        if args.layers is not None:
            args.n = args.layers * args.width
        elif args.n is None:
            ap.error("generate needs --n or --layers")
    try:
        return args.func(args)
    except (UsageError, DomainError) as exc:
        print(f"relaycap {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ConvergenceError) as exc:
        print(f"relaycap {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
