"""Command-line interface: simulate, fit, se, bench, converge.

Exit codes: 0 success, 1 configuration error (bad flags, files, or
parameters), 2 computation produced no usable result (failed fit or a
batch whose replicates all failed).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .bench import (BenchSpec, ESTIMATORS, emit_plotdata, likelihood_curve,
                    run_bench)
from .discrete import fredholm_convergence, stochastic_convergence
from .errors import DppError, ExistenceViolated
from .families import FAMILIES, KernelModel, discretize
from .geometry import (format_window_spec, parse_window_spec, read_pattern,
                       write_pattern)
from .inference import Undefined, fit_alpha
from .sampling import sample_dpp_window

CLI_OBJECTIVES = ("plain", "torus", "fourier", "edge")
OBJECTIVE_OF = {"plain": "plain", "torus": "torus", "fourier": "fourier",
                "edge": "edge_corrected"}


class CliConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as config errors (exit 1)."""

    def error(self, message):
        raise CliConfigError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="dppmle",
                description="Stationary DPP simulation and approximate "
                            "maximum-likelihood inference.")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate",
                         help="draw seeded replicate patterns")
    sim.add_argument("--family", required=True, choices=sorted(FAMILIES))
    sim.add_argument("--rho", type=float, required=True)
    sim.add_argument("--alpha", type=float, required=True)
    sim.add_argument("--sigma", type=float, default=None)
    sim.add_argument("--window", required=True,
                     help="'rect x0 x1 y0 y1', 'composite + ... - ...', "
                          "or 'rshape'")
    sim.add_argument("--reps", type=int, default=1)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--coverage", type=float, default=0.999)
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit the range parameter to a "
                                     "pattern file")
    fit.add_argument("--pattern", required=True)
    fit.add_argument("--family", required=True, choices=sorted(FAMILIES))
    fit.add_argument("--objective", default="torus", choices=CLI_OBJECTIVES)
    fit.add_argument("--sigma", type=float, default=None)
    fit.add_argument("--level", type=float, default=0.95)
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--trace", default=None,
                     help="write per-evaluation CSV trace here")
    fit.add_argument("--bessel-average", action="store_true",
                     help="report the midpoint of a two-peaked profile "
                          "as the headline estimate")
    fit.set_defaults(func=cmd_fit)

    se = sub.add_parser("se", help="observed-information standard error "
                                   "and confidence interval")
    se.add_argument("--pattern", required=True)
    se.add_argument("--family", required=True, choices=sorted(FAMILIES))
    se.add_argument("--objective", default="torus",
                    choices=("plain", "torus", "edge"))
    se.add_argument("--sigma", type=float, default=None)
    se.add_argument("--level", type=float, default=0.95)
    se.add_argument("--seed", type=int, default=None)
    se.set_defaults(func=cmd_se)

    bench = sub.add_parser("bench", help="replicated estimator benchmark "
                                         "from a config file")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", default=None,
                       help="override the config's output directory")
    bench.add_argument("--full", action="store_true",
                       help="use 500 replicates regardless of the config")
    bench.set_defaults(func=cmd_bench)

    conv = sub.add_parser("converge", help="lattice convergence tables "
                                           "for a discretized kernel")
    conv.add_argument("--family", required=True, choices=sorted(FAMILIES))
    conv.add_argument("--rho", type=float, required=True)
    conv.add_argument("--alpha", type=float, required=True)
    conv.add_argument("--sigma", type=float, default=None)
    conv.add_argument("--eps", type=float, required=True,
                      help="lattice spacing of the discretization")
    conv.add_argument("--sizes", default="8,16,24,32",
                      help="comma-separated box sizes")
    conv.add_argument("--reps", type=int, default=50)
    conv.add_argument("--seed", type=int, default=0)
    conv.add_argument("--out", required=True, help="output CSV path")
    conv.set_defaults(func=cmd_converge)
    return p


def _json_ready(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def cmd_simulate(args) -> int:
    window = parse_window_spec(args.window)
    model = KernelModel(args.family, args.rho, args.alpha, args.sigma)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.reps < 1:
        raise CliConfigError("--reps must be >= 1")
    for rep in range(args.reps):
        rng = np.random.default_rng(np.random.SeedSequence((args.seed,
                                                            rep)))
        pattern = sample_dpp_window(model, window, rng,
                                    coverage=args.coverage)
        write_pattern(pattern, out / f"pattern_{rep:04d}.txt")
    print(f"wrote {args.reps} patterns to {out}")
    return 0


def _load_pattern(path: str):
    try:
        return read_pattern(path)
    except OSError as exc:
        raise CliConfigError(f"cannot read pattern file: {exc}") from exc
    except ValueError as exc:
        raise CliConfigError(f"bad pattern file: {exc}") from exc


def _ci_record(ci):
    if isinstance(ci, Undefined):
        return {"undefined": ci.reason}
    return {"lo": ci[0], "hi": ci[1]}


def cmd_fit(args) -> int:
    pattern = _load_pattern(args.pattern)
    fit = fit_alpha(pattern, args.family,
                    objective=OBJECTIVE_OF[args.objective],
                    sigma=args.sigma, level=args.level, seed=args.seed)
    headline = fit.alpha_hat
    if args.bessel_average and fit.bimodal and fit.alpha_hat_avg is not None:
        headline = fit.alpha_hat_avg
    record = {
        "family": args.family,
        "objective": args.objective,
        "window": format_window_spec(pattern.window),
        "n_points": pattern.n_points,
        "rho_hat": fit.rho_hat,
        "alpha_hat": headline,
        "alpha_global_max": fit.alpha_hat,
        "alpha_hat_avg": fit.alpha_hat_avg,
        "bimodal": fit.bimodal,
        "value": fit.value_at_opt,
        "level": args.level,
        "seed": args.seed,
        "info_matrix": _json_ready(fit.info_matrix),
        "ci_alpha": _ci_record(fit.ci_alpha),
        "local_maxima": [[a, v] for a, v in fit.local_maxima],
    }
    if args.trace:
        _write_trace(args.trace, fit.optimizer_trace)
    print(json.dumps(record, default=_json_ready))
    return 0


def _write_trace(path: str, trace) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(("alpha", "value", "det_sign", "truncation",
                         "stage"))
        for rec in trace:
            writer.writerow([
                "%.17g" % rec["alpha"],
                "" if rec["value"] is None or not np.isfinite(rec["value"])
                else "%.17g" % rec["value"],
                "" if rec.get("det_sign") is None else rec["det_sign"],
                "" if rec.get("truncation") is None else rec["truncation"],
                rec.get("stage", ""),
            ])


def cmd_se(args) -> int:
    pattern = _load_pattern(args.pattern)
    fit = fit_alpha(pattern, args.family,
                    objective=OBJECTIVE_OF[args.objective],
                    sigma=args.sigma, level=args.level, seed=args.seed)
    record = {
        "family": args.family,
        "objective": args.objective,
        "rho_hat": fit.rho_hat,
        "alpha_hat": fit.alpha_hat,
        "level": args.level,
        "info_matrix": _json_ready(fit.info_matrix),
        "ci_alpha": _ci_record(fit.ci_alpha),
    }
    print(json.dumps(record, default=_json_ready))
    return 0


def _parse_true_params(text: str) -> tuple[tuple[float, float], ...]:
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            rho_s, alpha_s = chunk.split(":")
            pairs.append((float(rho_s), float(alpha_s)))
        except ValueError as exc:
            raise CliConfigError(
                f"bad true-parameter pair {chunk!r}; expected rho:alpha"
            ) from exc
    if not pairs:
        raise CliConfigError("config needs at least one rho:alpha pair")
    return tuple(pairs)


def load_bench_config(path: str, out_override: str | None = None,
                      full: bool = False) -> BenchSpec:
    """Read the INI-style bench config.

    [bench]
    family = gauss
    true = 100:0.03, 100:0.05
    windows = rect 0 2 0 2 ; rect 0 3 0 3
    estimators = torus, mce_pcf, mce_ripley
    replicates = 100
    seed = 1
    out = bench_out
    sigma =
    level = 0.95
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise CliConfigError(f"cannot read config file {path!r}")
    if "bench" not in parser:
        raise CliConfigError("config needs a [bench] section")
    section = parser["bench"]
    try:
        family = section["family"].strip()
        true_params = _parse_true_params(section["true"])
        windows = tuple(parse_window_spec(w.strip())
                        for w in section["windows"].split(";") if w.strip())
        estimators = tuple(e.strip()
                           for e in section.get("estimators", "").split(",")
                           if e.strip())
        replicates = section.getint("replicates", fallback=100)
        seed = section.getint("seed", fallback=0)
        out_dir = section.get("out", fallback="bench_out").strip()
        sigma_raw = section.get("sigma", fallback="").strip()
        sigma = float(sigma_raw) if sigma_raw else None
        level = section.getfloat("level", fallback=0.95)
    except (KeyError, ValueError) as exc:
        raise CliConfigError(f"bad bench config: {exc}") from exc
    if full:
        replicates = 500
    if out_override:
        out_dir = out_override
    try:
        return BenchSpec(family=family, true_params=true_params,
                         windows=windows, estimators=estimators,
                         replicates=replicates, seed=seed, out_dir=out_dir,
                         sigma=sigma, level=level)
    except (ValueError, DppError) as exc:
        raise CliConfigError(str(exc)) from exc


def cmd_bench(args) -> int:
    spec = load_bench_config(args.config, out_override=args.out,
                             full=args.full)
    summary = run_bench(spec)
    raw_path = Path(spec.out_dir) / "raw.csv"
    with open(raw_path, newline="", encoding="ascii") as fh:
        rows = [dict(r) for r in csv.DictReader(fh)]
    for row in rows:
        row["alpha_hat"] = row["alpha_hat"] or None
    emit_plotdata(rows, spec.out_dir)
    for entry in summary:
        print("{family} rho={rho_true} alpha={alpha_true} {window} "
              "{estimator}: ok={n_ok} failed={n_failed} bias={bias} "
              "mse_e4={mse_e4} coverage={coverage} "
              "undefined={undefined_rate}".format(
                  **{k: ("" if v is None else v)
                     for k, v in entry.items()}))
    if not summary:
        print("empty estimator list: nothing to run")
        return 0
    if all(entry["n_ok"] == 0 for entry in summary):
        return 2
    return 0


def cmd_converge(args) -> int:
    try:
        sizes = tuple(int(s) for s in args.sizes.split(",") if s.strip())
    except ValueError as exc:
        raise CliConfigError(f"bad --sizes: {exc}") from exc
    if not sizes:
        raise CliConfigError("--sizes needs at least one box size")
    model = KernelModel(args.family, args.rho, args.alpha, args.sigma)
    grid_kernel = discretize(model, args.eps)
    fred_rows = fredholm_convergence(grid_kernel, sizes)
    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 0)))
    sto_rows = stochastic_convergence(grid_kernel, sizes, args.reps, rng)
    columns = ("kind", "size", "rep", "per_site", "limit", "gap",
               "n_points", "delta", "bound", "sandwich_ok")
    with open(args.out, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in fred_rows:
            writer.writerow(["fredholm", row["size"], "",
                             "%.17g" % row["per_site"],
                             "%.17g" % row["limit"],
                             "%.17g" % row["gap"], "", "", "", ""])
        for row in sto_rows:
            writer.writerow(["stochastic", row["size"], row["rep"], "",
                             "", "", row["n_points"],
                             "%.17g" % row["delta"],
                             "%.17g" % row["bound"],
                             int(row["sandwich_ok"])])
    for row in fred_rows:
        print(f"size {row['size']}: fredholm gap {row['gap']:+.3e}")
    for size in sizes:
        deltas = [r["delta"] for r in sto_rows if r["size"] == size]
        share = np.mean([r["sandwich_ok"] for r in sto_rows
                         if r["size"] == size])
        print(f"size {size}: mean delta {np.mean(deltas):.3e} "
              f"sandwich ok {share:.0%}")
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except CliConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, DppError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, DppError) and \
                not isinstance(exc, ExistenceViolated):
            return 2
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
