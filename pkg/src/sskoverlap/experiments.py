"""Seeded sweeps: convergence to the closed form, event probability and resolvent-sum scaling.

Every disorder draw uses the sub-seed SeedSequence([master_seed, N, index]),
so records are reproducible independently of execution order.  Outputs are
sorted before writing, which keeps files byte-identical under a worker pool.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable

import numpy as np
from scipy import stats

from .asymptotics import mgf_theorem
from .contour import ContourSpec, mgf_exact, truncation_check
from .disorder import check_event, event_probability_bound, resolvent_sum, xi_statistic
from .rmt import sample_spectrum_fast
from .saddle import ModelParams, solve_critical

FAILURE_LIMIT = 0.2


class SweepAborted(RuntimeError):
    pass


def sub_seed(master_seed: int, N: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, N, index]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SweepConfig:
    """Sweep settings.

    ``seeds`` is the number of seed indices drawn per N.  With
    ``on_event_target`` set, drawing stops early once that many on-event
    samples have been collected, and ``seeds`` acts as the cap.
    """

    n_grid: tuple[int, ...]
    t_value: float = 0.5
    h_scale: float = 1.0
    xi_grid: tuple[float, ...] = (0.5, 1.0)
    seeds: int = 50
    epsilon: float = 0.25
    master_seed: int = 0
    output_path: str | None = None
    on_event_target: int | None = None
    skip_off_event: bool = True
    check_truncation: bool = True
    workers: int = 1
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be non-empty and strictly ascending")
        if self.seeds < 1:
            raise ValueError("seeds must be at least 1")
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "xi_grid", tuple(float(x) for x in self.xi_grid))

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json_file(cls, path: str) -> "SweepConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_grid"] = list(self.n_grid)
        d["xi_grid"] = list(self.xi_grid)
        return d


@dataclass(frozen=True)
class SweepRecord:
    n: int
    seed_index: int
    seed: int
    xi: float
    on_event: bool
    mgf_exact: float
    mgf_theorem: float
    rel_error: float
    p: float
    p_m: float
    xi_n_stat: float
    tail_bound: float
    log10_tail_bound: float
    tmax_change: float
    tail_dominated: bool
    status: str = "ok"

    def sort_key(self):
        return (self.n, self.seed_index, self.xi)


def _nan_record(N, idx, seed, xi, on_event, xi_stat, status) -> SweepRecord:
    nan = math.nan
    return SweepRecord(N, idx, seed, xi, on_event, nan, nan, nan, nan, nan, xi_stat,
                       nan, nan, nan, False, status)


def _seed_task(args) -> tuple[bool, list[SweepRecord]]:
    cfg, N, idx = args
    seed = sub_seed(cfg.master_seed, N, idx)
    try:
        sample = sample_spectrum_fast(N, seed)
        report = check_event(sample, cfg.epsilon)
        xi_stat = xi_statistic(sample)
    except Exception as exc:  # recorded, not fatal
        return False, [_nan_record(N, idx, seed, xi, False, math.nan, f"error: {exc}")
                       for xi in cfg.xi_grid]
    on = report.member
    if cfg.skip_off_event and not on:
        return on, [_nan_record(N, idx, seed, xi, False, xi_stat, "off-event")
                    for xi in cfg.xi_grid]
    out = []
    n1 = abs(float(sample.projections[0]))
    spec = ContourSpec()
    for xi in cfg.xi_grid:
        params = ModelParams.from_temperature(N, cfg.t_value, cfg.h_scale, xi)
        try:
            points = solve_critical(sample, params)
            exact = mgf_exact(sample, params, spec, points).value
            theory = mgf_theorem(params, n1)
            if cfg.check_truncation:
                tc = truncation_check(sample, params, points, spec)
                log_tb, change, dom = tc.log_bound, tc.change, tc.dominated
            else:
                log_tb, change, dom = math.nan, math.nan, False
            out.append(SweepRecord(
                N, idx, seed, xi, on, exact, theory, abs(exact - theory) / theory,
                points.p, points.p_m, xi_stat, math.exp(log_tb), log_tb / math.log(10.0),
                change, dom))
        except Exception as exc:
            out.append(_nan_record(N, idx, seed, xi, on, xi_stat, f"error: {exc}"))
    return on, out


def _run_tasks(tasks, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(_seed_task, tasks)
    else:
        yield from map(_seed_task, tasks)


def convergence_sweep(cfg: SweepConfig) -> list[SweepRecord]:
    """Exact vs closed-form MGF on every (N, seed, xi); records sorted by (N, seed index, xi)."""
    if not 0.0 < cfg.t_value < 1.0:
        raise ValueError("t_value must lie in (0, 1)")
    records: list[SweepRecord] = []
    for N in cfg.n_grid:
        on_count = 0
        batch = max(1, cfg.workers)
        idx = 0
        while idx < cfg.seeds:
            if cfg.on_event_target is not None and on_count >= cfg.on_event_target:
                break
            hi = min(cfg.seeds, idx + batch)
            for on, recs in _run_tasks([(cfg, N, i) for i in range(idx, hi)], cfg.workers):
                # batches are consumed in index order; stop exactly at the target
                if cfg.on_event_target is not None and on_count >= cfg.on_event_target:
                    break
                on_count += on
                records.extend(recs)
            idx = hi
    records.sort(key=SweepRecord.sort_key)
    n_err = sum(r.status.startswith("error") for r in records)
    if records and n_err / len(records) >= FAILURE_LIMIT:
        raise SweepAborted(f"{n_err} of {len(records)} records failed")
    return records


def summarize_sweep(records: Iterable[SweepRecord], cfg: SweepConfig) -> dict:
    records = list(records)
    rows = []
    for N in cfg.n_grid:
        for xi in cfg.xi_grid:
            sel = [r for r in records if r.n == N and r.xi == xi]
            ok = [r for r in sel if r.on_event and r.status == "ok"]
            rel = [r.rel_error for r in ok]
            ltb = [r.log10_tail_bound for r in ok if not math.isnan(r.log10_tail_bound)]
            rows.append({
                "n": N,
                "xi": xi,
                "n_seeds": len(sel),
                "n_on_event": len(ok),
                "n_errors": sum(r.status.startswith("error") for r in sel),
                "median_rel_error": float(np.median(rel)) if rel else math.nan,
                "median_log10_tail_bound": float(np.median(ltb)) if ltb else math.nan,
                "all_tail_dominated": all(r.tail_dominated for r in ok) if cfg.check_truncation else None,
                "min_p_minus_T": min((r.p - cfg.t_value for r in ok), default=math.nan),
            })
    return {"config": cfg.to_dict(), "rows": rows}


def check_thresholds(summary: dict, thresholds: dict) -> list[str]:
    """Names of violated thresholds.

    Recognised keys: ``max_median_rel_error`` (checked at the largest N),
    ``monotone_median_rel_error``, ``tail_dominated``, ``tail_decreasing``,
    ``p_above_T``, ``max_log10_tail_bound``.
    """
    rows = summary["rows"]
    xis = sorted({r["xi"] for r in rows})
    bad = []
    for xi in xis:
        seq = [r for r in rows if r["xi"] == xi]
        med = [r["median_rel_error"] for r in seq]
        if "max_median_rel_error" in thresholds and not med[-1] <= thresholds["max_median_rel_error"]:
            bad.append(f"max_median_rel_error[xi={xi}]")
        if thresholds.get("monotone_median_rel_error") and any(b > a for a, b in zip(med, med[1:])):
            bad.append(f"monotone_median_rel_error[xi={xi}]")
        if thresholds.get("tail_dominated") and not all(r["all_tail_dominated"] for r in seq):
            bad.append(f"tail_dominated[xi={xi}]")
        tb = [r["median_log10_tail_bound"] for r in seq]
        if thresholds.get("tail_decreasing") and any(b >= a for a, b in zip(tb, tb[1:])):
            bad.append(f"tail_decreasing[xi={xi}]")
        if thresholds.get("p_above_T") and not all(r["min_p_minus_T"] > 0 for r in seq):
            bad.append(f"p_above_T[xi={xi}]")
        if "max_log10_tail_bound" in thresholds and any(
                v > thresholds["max_log10_tail_bound"] for v in tb):
            bad.append(f"max_log10_tail_bound[xi={xi}]")
    return bad


# ---------------------------------------------------------------- event probability


def wilson_interval(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(successes, n).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def event_probability_study(cfg: SweepConfig) -> dict:
    """Membership frequency of E_eps per N with a 95% Wilson interval, against 1 - N^(-eps/10)."""
    rows = []
    for N in cfg.n_grid:
        members = 0
        clause_counts: dict[str, int] = {}
        for i in range(cfg.seeds):
            rep = check_event(sample_spectrum_fast(N, sub_seed(cfg.master_seed, N, i)), cfg.epsilon)
            members += rep.member
            for k, v in rep.clauses.items():
                clause_counts[k] = clause_counts.get(k, 0) + bool(v)
        lo, hi = wilson_interval(members, cfg.seeds)
        freq = members / cfg.seeds
        bound = event_probability_bound(N, cfg.epsilon)
        rows.append({
            "n": N,
            "seeds": cfg.seeds,
            "members": members,
            "frequency": freq,
            "wilson_low": lo,
            "wilson_high": hi,
            "half_width": 0.5 * (hi - lo),
            "bound": bound,
            "passes": freq >= bound - 0.5 * (hi - lo),
            "clause_rates": {k: v / cfg.seeds for k, v in sorted(clause_counts.items())},
        })
    return {"config": cfg.to_dict(), "rows": rows}


# ---------------------------------------------------------------- resolvent-sum scaling


def sum_scaling_study(cfg: SweepConfig) -> dict:
    """Median deviations of the m = 1 sums from 1, their log-log slope in N, and Xi_N trend."""
    rows = []
    for N in cfg.n_grid:
        plain, weighted, xis = [], [], []
        for i in range(cfg.seeds):
            s = sample_spectrum_fast(N, sub_seed(cfg.master_seed, N, i))
            sp = resolvent_sum(s, 1, False)
            plain.append(abs(sp - 1.0))
            weighted.append(abs(resolvent_sum(s, 1, True) - 1.0))
            xis.append(abs(N ** (1.0 / 3.0) * (sp - 1.0)))
        rows.append({
            "n": N,
            "median_abs_dev_plain": float(np.median(plain)),
            "median_abs_dev_weighted": float(np.median(weighted)),
            "median_abs_xi": float(np.median(xis)),
        })
    logn = np.log([r["n"] for r in rows])
    slope = float(np.polyfit(logn, np.log([r["median_abs_dev_plain"] for r in rows]), 1)[0])
    slope_w = float(np.polyfit(logn, np.log([r["median_abs_dev_weighted"] for r in rows]), 1)[0])
    rho = float(stats.spearmanr(logn, [r["median_abs_xi"] for r in rows])[0]) if len(rows) > 2 else math.nan
    return {"config": cfg.to_dict(), "rows": rows, "slope_plain": slope,
            "slope_weighted": slope_w, "spearman_xi": rho}


# ---------------------------------------------------------------- output


def write_records_csv(records: Iterable[SweepRecord], path: str) -> None:
    names = [f.name for f in fields(SweepRecord)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for r in sorted(records, key=SweepRecord.sort_key):
            w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, n) for n in names)])


def write_json(obj: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def run_sweep_to_files(cfg: SweepConfig) -> tuple[dict, list[str]]:
    """Run the convergence sweep, write <output_path>.csv and <output_path>.json, return (summary, violations)."""
    records = convergence_sweep(cfg)
    summary = summarize_sweep(records, cfg)
    violations = check_thresholds(summary, cfg.thresholds)
    summary["violations"] = violations
    if cfg.output_path:
        base = os.fspath(cfg.output_path)
        write_records_csv(records, base + ".csv")
        write_json(summary, base + ".json")
    return summary, violations
