"""Replicated estimator benchmarks: seeded simulation, parallel fitting,
summary tables, and plot-data emission.

A benchmark cell is one (true parameter pair, window); every estimator in
the BenchSpec sees the same simulated pattern per replicate, so orderings
between estimators are paired comparisons.  Per-replicate failures are
recorded as status rows and never abort the batch.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DppError
from .families import FAMILIES, KernelModel, alpha_max
from .geometry import (CompositeWindow, ObservationWindow, PointPattern,
                       Rect, format_window_spec)
from .inference import (ALPHA_FLOOR_REL, UPPER_MARGIN, ContrastSettings,
                        FitResult, Undefined, _ProfileObjective, fit_alpha,
                        fit_mce)
from .sampling import SpectralSampler

__all__ = [
    "BenchSpec",
    "ESTIMATORS",
    "run_bench",
    "emit_plotdata",
    "likelihood_curve",
    "thread_count",
]

ESTIMATORS = ("plain", "torus", "fourier", "edge", "mce_pcf", "mce_ripley")
OBJECTIVE_OF = {"plain": "plain", "torus": "torus", "fourier": "fourier",
                "edge": "edge_corrected"}

RAW_COLUMNS = ("family", "rho_true", "alpha_true", "window", "estimator",
               "replicate", "status", "n_points", "rho_hat", "alpha_hat",
               "alpha_hat_avg", "bimodal", "value", "ci_lo", "ci_hi",
               "ci_undefined", "covered")
SUMMARY_COLUMNS = ("family", "rho_true", "alpha_true", "window",
                   "estimator", "n_ok", "n_failed", "bias", "mse_e4",
                   "coverage", "undefined_rate")


def thread_count() -> int:
    """Worker count for the replicate pool; env override wins."""
    env = os.environ.get("DPPMLE_THREADS", "").strip()
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("DPPMLE_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class BenchSpec:
    """One benchmark batch: families x true parameters x windows x
    estimators, with a master seed for full determinism."""

    family: str
    true_params: tuple[tuple[float, float], ...]
    windows: tuple[ObservationWindow, ...]
    estimators: tuple[str, ...]
    replicates: int = 100
    seed: int = 0
    out_dir: str = "bench_out"
    sigma: float | None = None
    level: float = 0.95
    sim_coverage: float = 0.999
    mce_settings: ContrastSettings = field(default_factory=ContrastSettings)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.true_params:
            raise ValueError("need at least one true parameter pair")
        if not self.windows:
            raise ValueError("need at least one window")
        for name in self.estimators:
            if name not in ESTIMATORS:
                raise ValueError(f"unknown estimator {name!r}; choose "
                                 f"from {ESTIMATORS}")
        for rho, alpha in self.true_params:
            # existence enforced here so a bad cell fails before any work
            KernelModel(self.family, rho, alpha, self.sigma)


class _CellSampler:
    """Reusable per-cell sampler; composite windows go through their
    bounding rectangle and keep inside points (kernel restriction)."""

    def __init__(self, model: KernelModel, window: ObservationWindow,
                 coverage: float) -> None:
        self.window = window
        rect = window if isinstance(window, Rect) else window.bounding_box
        self.inner = SpectralSampler(model, rect, coverage)

    def draw(self, rng: np.random.Generator) -> PointPattern:
        pat = self.inner.sample(rng)
        if isinstance(self.window, CompositeWindow):
            keep = self.window.contains(pat.points)
            pat = PointPattern(pat.points[keep], self.window)
        return pat


def _fit_seed(master: int, cell: int, rep: int, est_index: int) -> int:
    return hash((master, cell, rep, est_index)) & 0x7FFFFFFF


def _one_replicate(spec: BenchSpec, cell_index: int, rho: float,
                   alpha: float, window: ObservationWindow,
                   sampler: _CellSampler, rep: int) -> list[dict]:
    rows = []
    base = {"family": spec.family, "rho_true": rho, "alpha_true": alpha,
            "window": format_window_spec(window), "replicate": rep}
    rng = np.random.default_rng(
        np.random.SeedSequence((spec.seed, cell_index, rep)))
    try:
        pattern = sampler.draw(rng)
    except DppError as exc:
        for est in spec.estimators:
            rows.append(dict(base, estimator=est,
                             status=f"error:{type(exc).__name__}"))
        return rows
    for k, est in enumerate(spec.estimators):
        row = dict(base, estimator=est, status="ok",
                   n_points=pattern.n_points)
        try:
            fit = _run_estimator(spec, est, pattern,
                                 _fit_seed(spec.seed, cell_index, rep, k))
            row.update(_fit_fields(fit, alpha))
        except DppError as exc:
            row["status"] = f"error:{type(exc).__name__}"
        rows.append(row)
    return rows


def _run_estimator(spec: BenchSpec, est: str, pattern: PointPattern,
                   seed: int) -> FitResult:
    if est in OBJECTIVE_OF:
        return fit_alpha(pattern, spec.family, objective=OBJECTIVE_OF[est],
                         sigma=spec.sigma, level=spec.level, seed=seed)
    statistic = "pcf" if est == "mce_pcf" else "ripley"
    settings = ContrastSettings(
        r_min=spec.mce_settings.r_min, r_max=spec.mce_settings.r_max,
        q=spec.mce_settings.q, statistic=statistic,
        n_grid=spec.mce_settings.n_grid,
        bandwidth=spec.mce_settings.bandwidth)
    return fit_mce(pattern, spec.family, settings=settings, sigma=spec.sigma)


def _fit_fields(fit: FitResult, alpha_true: float) -> dict:
    out = {"rho_hat": fit.rho_hat, "alpha_hat": fit.alpha_hat,
           "alpha_hat_avg": fit.alpha_hat_avg,
           "bimodal": int(fit.bimodal), "value": fit.value_at_opt}
    ci = fit.ci_alpha
    if isinstance(ci, Undefined):
        out.update(ci_lo=None, ci_hi=None, ci_undefined=ci.reason,
                   covered=None)
    else:
        lo, hi = ci
        out.update(ci_lo=lo, ci_hi=hi, ci_undefined=None,
                   covered=int(lo <= alpha_true <= hi))
    return out


def _cell_iter(spec: BenchSpec):
    index = 0
    for rho, alpha in spec.true_params:
        for window in spec.windows:
            yield index, rho, alpha, window
            index += 1


def run_bench(spec: BenchSpec) -> list[dict]:
    """Run the batch, write raw.csv and summary.csv, return the summary.

    Replicates are scheduled on a thread pool (see thread_count); result
    ordering and content are independent of the scheduling, so reruns
    with one master seed are bit-identical.
    """
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = []
    for index, rho, alpha, window in _cell_iter(spec):
        if not spec.estimators:
            continue
        model = KernelModel(spec.family, rho, alpha, spec.sigma)
        sampler = _CellSampler(model, window, spec.sim_coverage)
        for rep in range(spec.replicates):
            tasks.append((index, rho, alpha, window, sampler, rep))
    rows: list[dict] = []
    workers = thread_count()
    if tasks:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_one_replicate, spec, *task)
                       for task in tasks]
            for fut in futures:
                rows.extend(fut.result())
    est_order = {name: i for i, name in enumerate(spec.estimators)}
    rows.sort(key=lambda r: (r["rho_true"], r["alpha_true"], r["window"],
                             est_order[r["estimator"]], r["replicate"]))
    _write_csv(out_dir / "raw.csv", RAW_COLUMNS, rows)
    summary = summarize(rows)
    _write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, summary)
    return summary


def summarize(rows: list[dict]) -> list[dict]:
    """Aggregate raw replicate rows per (true params, window, estimator)."""
    groups: dict[tuple, list[dict]] = {}
    order = []
    for row in rows:
        key = (row["family"], row["rho_true"], row["alpha_true"],
               row["window"], row["estimator"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    summary = []
    for key in order:
        family, rho, alpha, window, est = key
        ok = [r for r in groups[key] if r["status"] == "ok"]
        entry = {"family": family, "rho_true": rho, "alpha_true": alpha,
                 "window": window, "estimator": est, "n_ok": len(ok),
                 "n_failed": len(groups[key]) - len(ok), "bias": None,
                 "mse_e4": None, "coverage": None, "undefined_rate": None}
        if ok:
            err = np.array([r["alpha_hat"] - alpha for r in ok])
            entry["bias"] = float(err.mean())
            entry["mse_e4"] = float(np.mean(err ** 2) * 1e4)
            if est in OBJECTIVE_OF:
                defined = [r for r in ok if r["covered"] is not None]
                entry["undefined_rate"] = 1.0 - len(defined) / len(ok)
                if defined:
                    entry["coverage"] = float(
                        np.mean([r["covered"] for r in defined]))
        summary.append(entry)
    return summary


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.10g}"
    return str(value)


def _write_csv(path: Path, columns, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(c)) for c in columns])


def likelihood_curve(pattern: PointPattern, family: str,
                     objectives=("torus", "fourier"), n_grid: int = 60,
                     sigma: float | None = None, seed: int = 0
                     ) -> list[dict]:
    """Profile objectives on one shared alpha grid (plot-data helper).

    Undefined evaluations (skipped truncations, non-positive
    determinants) appear with value None.
    """
    rho = max(pattern.intensity, 1e-12)
    hi = UPPER_MARGIN * alpha_max(family, rho, sigma, pattern.window.dim)
    grid = np.linspace(ALPHA_FLOOR_REL * hi, hi, n_grid)
    rows = []
    for objective in objectives:
        evaluate = _ProfileObjective(pattern, family, objective, sigma,
                                     np.random.default_rng(seed))
        for a in grid:
            ev = evaluate(float(a))
            value = ev.value if ev.usable else None
            rows.append({"alpha": float(a), "value": value,
                         "objective": objective})
    return rows


def emit_plotdata(rows: list[dict], out_dir, curves: list[dict] | None = None
                  ) -> list[Path]:
    """Long-format boxplot CSV from raw rows, plus optional curve CSV.

    Boxplot rows cover successful replicates of alpha-estimating runs;
    curve rows come from likelihood_curve.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    box = out_dir / "boxplot.csv"
    columns = ("estimator", "window", "alpha_true", "replicate",
               "alpha_hat")
    ok = [r for r in rows
          if r["status"] == "ok" and r.get("alpha_hat") is not None]
    _write_csv(box, columns, ok)
    written.append(box)
    if curves is not None:
        curve_path = out_dir / "curves.csv"
        _write_csv(curve_path, ("alpha", "value", "objective"), curves)
        written.append(curve_path)
    return written
