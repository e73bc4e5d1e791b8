"""Command-line front end: ``exlasso {gen,solve,bench,market,backtest}``.

Exit codes: 0 success, 1 data or runtime error, 2 usage error,
3 a solver stopped before reaching its tolerance (report still written).
"""
import argparse
import csv
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import FirstOrderConfig, admm_solve, apg_solve
from .etf_backtest import (
    BacktestConfig,
    DataError,
    SolverError,
    ingest_prices,
    run_backtest,
    synthetic_market,
    write_market,
)
from .instance_io import InstanceFormatError, load_instance, save_instance
from .kernels import BACKEND
from .ppdna import PpdnaConfig, ppdna_solve
from .synthdata import SynthConfig, generate

log = logging.getLogger("exlasso")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2, 3


class NonFiniteOutput(ValueError):
    """A report would contain NaN or Inf."""


# ---------------------------------------------------------------- helpers


def _plain(obj):
    """Recursively convert numpy containers and scalars to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _check_finite(obj, where="report"):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise NonFiniteOutput(f"non-finite value in {where}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{where}.{k}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _check_finite(v, f"{where}[{i}]")


def write_json(path, payload):
    payload = _plain(payload)
    _check_finite(payload)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def make_manifest(command, args, seed=None, outputs=()):
    config = {k: v for k, v in sorted(vars(args).items())
              if k not in ("func", "verbose") and not k.startswith("_")}
    return {
        "command": command,
        "config": _plain(config),
        "seed": seed,
        "version": __version__,
        "backend": BACKEND,
        "started": _now(),
        "finished": None,
        "outputs": [str(p) for p in outputs],
    }


def _finish(manifest):
    manifest["finished"] = _now()
    return manifest


def _positive_int(text):
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if val < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {val}")
    return val


def _nonneg_int(text):
    val = int(text)
    if val < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {val}")
    return val


def _positive_float(text):
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not (val > 0 and math.isfinite(val)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return val


def _nonneg_float(text):
    val = float(text)
    if not (val >= 0 and math.isfinite(val)):
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return val


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None
    if not vals or any(not (v > 0 and math.isfinite(v)) for v in vals):
        raise argparse.ArgumentTypeError("expected comma-separated positive numbers")
    return vals


def _lambda_list(text):
    vals = [float(t) for t in text.split(",") if t.strip()]
    if not vals or any(not (v >= 0 and math.isfinite(v)) for v in vals):
        raise argparse.ArgumentTypeError("expected comma-separated nonnegative numbers")
    return vals


def _require_file(parser, path, flag):
    if not Path(path).is_file():
        parser.error(f"{flag}: file not found: {path}")


def run_solver(spec, algo, tol, max_iter=None, time_cap=3600.0, precond=None):
    if algo == "ppdna":
        cfg = PpdnaConfig(tol=tol, max_iter=max_iter or 200, time_cap=time_cap,
                          preconditioner=precond)
        return ppdna_solve(spec, cfg)
    cfg = FirstOrderConfig(tol=tol, max_iter=max_iter or 200000, time_cap=time_cap)
    if algo == "admm":
        return admm_solve(spec, cfg)
    if algo == "apg":
        return apg_solve(spec, cfg)
    raise ValueError(f"unknown algorithm {algo!r}")


# ---------------------------------------------------------------- commands


def cmd_gen(args, parser):
    nnz = args.nnz if args.nnz is not None else min(10, args.p)
    if nnz > args.p:
        parser.error(f"--nnz {nnz} exceeds --p {args.p}")
    try:
        cfg = SynthConfig(args.m, args.s, args.p, nnz_per_group=nnz, seed=args.seed,
                          task=args.task, lam=args.lam)
        spec, x_star = generate(cfg)
    except ValueError as exc:
        parser.error(str(exc))
    out = Path(args.out)
    manifest = make_manifest("gen", args, seed=args.seed, outputs=[out])
    layout = None if args.layout == "auto" else args.layout
    save_instance(out, spec, x_star, cfg.to_dict(), _finish(manifest), layout=layout)
    print(f"wrote {out} (m={cfg.m}, n={cfg.n}, task={cfg.task})")
    return EXIT_OK


def _solve_payload(rep, include_x=False):
    d = rep.to_dict(include_vectors=include_x)
    d["time"] = d.pop("wall_time")
    return d


def cmd_solve(args, parser):
    _require_file(parser, args.instance, "instance")
    spec, _, inst_cfg, _ = load_instance(args.instance)
    if args.lam is not None:
        spec = spec.with_lam(args.lam)
    if args.precond and args.algo != "ppdna":
        parser.error("--precond applies to --algo ppdna only")
    out = Path(args.out)
    manifest = make_manifest("solve", args, seed=inst_cfg.get("seed"), outputs=[out])
    rep = run_solver(spec, args.algo, args.tol, args.max_iter, args.time_cap, args.precond)
    payload = _solve_payload(rep, args.include_x)
    payload["lambda"] = spec.lam
    payload["instance"] = str(args.instance)
    payload["manifest"] = _finish(manifest)
    write_json(out, payload)
    print(f"{args.algo}: status={rep.status} iterations={rep.iterations_label} "
          f"eta_kkt={rep.eta_kkt:.2e} time={rep.wall_time:.2f}s -> {out}")
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


BENCH_FIELDS = ["instance", "m", "n", "lambda", "algo", "status", "iterations",
                "eta_kkt", "objective", "time", "failed"]


def cmd_bench(args, parser):
    for path in args.instances:
        _require_file(parser, path, "instances")
    out = Path(args.out)
    manifest_path = out.with_name(out.name + ".manifest.json")
    manifest = make_manifest("bench", args, outputs=[out, manifest_path])
    rows = []
    for path in sorted(set(args.instances)):
        spec0, _, _, _ = load_instance(path)
        for lam in sorted(set(args.lambdas)):
            spec = spec0.with_lam(lam)
            for algo in sorted(set(args.algos)):
                rep = run_solver(spec, algo, args.tol, args.max_iter, args.time_cap)
                log.info("%s lam=%g %s: %s", path, lam, algo, rep.status)
                rows.append({
                    "instance": str(path), "m": spec.shape[0], "n": spec.shape[1],
                    "lambda": lam, "algo": algo, "status": rep.status,
                    "iterations": rep.iterations_label, "eta_kkt": rep.eta_kkt,
                    "objective": rep.objective, "time": round(rep.wall_time, 4),
                    "failed": int(rep.eta_kkt > args.tol),
                })
    for row in rows:
        _check_finite({k: v for k, v in row.items() if isinstance(v, float)}, "bench row")
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_FIELDS + ["manifest"])
        w.writeheader()
        for row in rows:
            w.writerow({**row, "manifest": manifest_path.name})
    write_json(manifest_path, _finish(manifest))
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK if not any(r["failed"] for r in rows) else EXIT_NOT_CONVERGED


def cmd_market(args, parser):
    prices, smap, index, weights = synthetic_market(
        n_days=args.days, n_sectors=args.sectors, per_sector=args.per_sector,
        active_per_sector=args.active, seed=args.seed)
    paths = write_market(prices, smap, index, args.out_dir)
    wpath = Path(args.out_dir) / "true_weights.csv"
    weights.rename("weight").to_csv(wpath, index_label="ticker")
    manifest = make_manifest("market", args, seed=args.seed, outputs=[*paths, wpath])
    write_json(Path(args.out_dir) / "manifest.json", _finish(manifest))
    print(f"wrote {', '.join(str(p) for p in paths)}")
    return EXIT_OK


def cmd_backtest(args, parser):
    _require_file(parser, args.prices, "--prices")
    _require_file(parser, args.sectors, "--sectors")
    _require_file(parser, args.index, "--index")
    panel = ingest_prices(args.prices, args.sectors, args.index, args.risk_free)
    cfg = BacktestConfig(window=args.window, holding=args.holding, folds=args.folds,
                         lambda_grid=args.lambda_grid, grid_size=args.grid_size,
                         tol=args.tol)
    out_json, out_csv = Path(args.out_json), Path(args.out_csv)
    manifest = make_manifest("backtest", args, outputs=[out_json, out_csv])
    rep = run_backtest(panel, cfg)
    extra = {"dropped_tickers": panel.dropped, "n_assets": len(panel.tickers),
             "n_days": panel.ndays}
    payload = {**rep.to_dict(), **extra, "manifest": _finish(manifest)}
    write_json(out_json, payload)
    daily = rep.daily.assign(manifest=out_json.name)
    if not np.all(np.isfinite(daily[["portfolio", "index"]].to_numpy())):
        raise NonFiniteOutput("non-finite value in daily returns")
    daily.to_csv(out_csv, index=False)
    print(f"{len(rep.windows)} windows, out-of-sample RMSE {rep.out_sample_rmse:.3e} "
          f"-> {out_json}, {out_csv}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="exlasso", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic instance")
    g.add_argument("--m", type=_positive_int, required=True)
    g.add_argument("--s", type=_positive_int, required=True, help="number of groups")
    g.add_argument("--p", type=_positive_int, required=True, help="features per group")
    g.add_argument("--nnz", type=_nonneg_int, default=None,
                   help="nonzeros of x* per group (default min(10, p))")
    g.add_argument("--task", choices=["regression", "classification"], default="regression")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--lambda", dest="lam", type=_nonneg_float, default=0.1)
    g.add_argument("--layout", choices=["auto", "dense", "csr"], default="auto")
    g.add_argument("--out", default="instance.npz")
    g.set_defaults(_parser=g, func=cmd_gen)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("instance")
    s.add_argument("--algo", choices=["ppdna", "admm", "apg"], default="ppdna")
    s.add_argument("--lambda", dest="lam", type=_nonneg_float, default=None,
                   help="override the lambda stored in the instance")
    s.add_argument("--tol", type=_positive_float, default=1e-6)
    s.add_argument("--max-iter", type=_positive_int, default=None,
                   help="default 200 for ppdna, 200000 for admm/apg")
    s.add_argument("--time-cap", type=_positive_float, default=3600.0)
    s.add_argument("--precond", choices=["identity", "ata"], default=None)
    s.add_argument("--include-x", action="store_true", help="store x and u in the report")
    s.add_argument("--out", default="report.json")
    s.set_defaults(_parser=s, func=cmd_solve)

    b = sub.add_parser("bench", help="compare solvers over instances and lambdas")
    b.add_argument("instances", nargs="+")
    b.add_argument("--algos", type=lambda t: t.split(","), default=["admm", "apg", "ppdna"])
    b.add_argument("--lambdas", type=_lambda_list, default=[1e-1, 1e-3])
    b.add_argument("--tol", type=_positive_float, default=1e-6)
    b.add_argument("--max-iter", type=_positive_int, default=None)
    b.add_argument("--time-cap", type=_positive_float, default=3600.0)
    b.add_argument("--out", default="bench.csv")
    b.set_defaults(_parser=b, func=cmd_bench)

    mk = sub.add_parser("market", help="write a synthetic price/sector/index CSV set")
    mk.add_argument("--days", type=_positive_int, default=251, help="price rows")
    mk.add_argument("--sectors", type=_positive_int, default=12)
    mk.add_argument("--per-sector", type=_positive_int, default=6)
    mk.add_argument("--active", type=_positive_int, default=1)
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--out-dir", default="market")
    mk.set_defaults(_parser=mk, func=cmd_market)

    t = sub.add_parser("backtest", help="rolling-window index tracking")
    t.add_argument("--prices", required=True, help="CSV with date,ticker,close")
    t.add_argument("--sectors", required=True, help="CSV with ticker,sector")
    t.add_argument("--index", required=True, help="CSV with date,close")
    t.add_argument("--window", type=_positive_int, default=90)
    t.add_argument("--holding", type=_positive_int, default=10)
    t.add_argument("--folds", type=_positive_int, default=9)
    t.add_argument("--lambda-grid", type=_float_list, default=None,
                   help="absolute lambda values; default is a data-scaled grid")
    t.add_argument("--grid-size", type=_positive_int, default=20)
    t.add_argument("--risk-free", type=float, default=0.0, help="daily rate r_C")
    t.add_argument("--tol", type=_positive_float, default=1e-6)
    t.add_argument("--out-json", default="backtest.json")
    t.add_argument("--out-csv", default="backtest_daily.csv")
    t.set_defaults(_parser=t, func=cmd_backtest)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "bench":
        bad = sorted(set(args.algos) - {"ppdna", "admm", "apg"})
        if bad:
            parser.error(f"unknown algorithm(s) {bad}")
    try:
        return args.func(args, args._parser)
    except (DataError, InstanceFormatError, SolverError, NonFiniteOutput, ValueError,
            OSError, RuntimeError) as exc:
        print(f"exlasso {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
