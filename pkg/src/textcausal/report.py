"""Comparison bundle for two cross-fit result directories.

Run ``a`` is the candidate (typically text) and run ``b`` the reference
(typically tabular). The cross lift curve targets units by ``a``'s CATE and
credits them with ``b``'s; gain is the effect reduction, i.e. ``-cate``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .crossfit import CrossfitResult
from .errors import ComparisonError, UndefinedRatioError
from .evaluation import (
    area_ratio,
    cate_quantile_curve,
    compute_metrics,
    distribution_summary,
    gate_rank_table,
    lift_curve,
    pearson,
    spearman,
    _maybe,
)


@dataclass(frozen=True)
class ReportOptions:
    area_baseline: str = "diagonal"
    quantile_points: int = 101
    lift_points: int = 101
    histogram_bins: int = 50

    def validate(self):
        from .errors import ConfigError

        if self.area_baseline not in ("diagonal", "none"):
            raise ConfigError(f"unknown baseline {self.area_baseline!r}", "report.area_baseline")
        for name in ("quantile_points", "lift_points", "histogram_bins"):
            if getattr(self, name) < 2:
                raise ConfigError("must be >= 2", f"report.{name}")


@dataclass
class Comparison:
    summary: dict
    rank_table: object
    quantiles: dict
    lift: dict
    histograms: list = field(default_factory=list)


def align(rows_a, rows_b):
    """Index array putting ``rows_b`` into ``rows_a``'s unit order."""
    ids_a = [str(u) for u in rows_a.unit_id]
    ids_b = [str(u) for u in rows_b.unit_id]
    sa, sb = set(ids_a), set(ids_b)
    if sa != sb or len(ids_a) != len(ids_b):
        diff = sorted(sa ^ sb)
        shown = ", ".join(diff[:5])
        raise ComparisonError(f"runs cover different units ({len(diff)} mismatched): {shown}")
    pos = {u: i for i, u in enumerate(ids_b)}
    return np.array([pos[u] for u in ids_a], dtype=np.int64)


def _est_pair(a, b):
    return {"a": a.to_dict(), "b": b.to_dict(), "ci_overlap": a.overlaps(b)}


def compare(result_a: CrossfitResult, result_b: CrossfitResult,
            options: ReportOptions | None = None) -> Comparison:
    opts = options or ReportOptions()
    opts.validate()
    ra = result_a.score_rows
    rb = result_b.score_rows.take(align(ra, result_b.score_rows))
    ids = np.asarray([str(u) for u in ra.unit_id])

    gain_a = -ra.cate
    gain_b = -rb.cate
    cross = lift_curve(gain_a, gain_b, opts.lift_points, tie_break=ids)
    optimal = lift_curve(gain_b, gain_b, opts.lift_points, tie_break=ids)
    ratios = {}
    for base in ("diagonal", "none"):
        try:
            ratios[base] = area_ratio(cross, optimal, base)
        except UndefinedRatioError:  # reported, not fatal
            ratios[base] = None

    table = gate_rank_table(result_a.gates, result_b.gates)
    summary = {
        "metrics": {"a": compute_metrics(ra).to_dict(), "b": compute_metrics(rb).to_dict()},
        "ate": _est_pair(result_a.ate, result_b.ate),
        "atet": _est_pair(result_a.atet, result_b.atet),
        "gate": {"pearson": table.pearson, "spearman": table.spearman,
                 "n_groups": len(table.rows)},
        "cate": {"pearson": _maybe(pearson, ra.cate, rb.cate),
                 "spearman": _maybe(spearman, ra.cate, rb.cate), "n_units": len(ra)},
        "lift": {"area_cross": cross.area, "area_optimal": optimal.area,
                 "total_gain": optimal.total_gain, "baseline": opts.area_baseline,
                 "area_ratio": ratios[opts.area_baseline], "area_ratio_by_baseline": ratios},
    }
    quantiles = {"a": cate_quantile_curve(ra.cate, opts.quantile_points),
                 "b": cate_quantile_curve(rb.cate, opts.quantile_points)}
    hists = []
    for label, rows in (("a", ra), ("b", rb)):
        for arm, mask, pred in (("treated", rows.t == 1, rows.g1_hat),
                                ("control", rows.t == 0, rows.g0_hat)):
            if mask.any():
                hists.append((label, distribution_summary(pred[mask], rows.y[mask], arm,
                                                          opts.histogram_bins)))
    return Comparison(summary, table, quantiles, {"cross": cross, "optimal": optimal}, hists)


def write_bundle(comp: Comparison, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(comp.summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    _write_csv(out / "rank_table.csv", comp.rank_table.to_csv_rows())

    qa, qb = comp.quantiles["a"], comp.quantiles["b"]
    _write_csv(out / "cate_curve.csv",
               [("quantile", "cate_a", "cate_b")]
               + [(repr(q), repr(va), repr(vb)) for (q, va), (_, vb) in zip(qa, qb)])

    rows = [("curve", "fraction", "cumulative_gain")]
    for name in ("cross", "optimal"):
        rows += [(name, repr(x), repr(y)) for x, y in comp.lift[name].points]
    _write_csv(out / "lift_curve.csv", rows)

    rows = [("run", "arm", "bin_low", "bin_high", "predicted", "actual")]
    for label, h in comp.histograms:
        for i in range(len(h.predicted)):
            rows.append((label, h.arm, repr(float(h.edges[i])), repr(float(h.edges[i + 1])),
                         int(h.predicted[i]), int(h.actual[i])))
    _write_csv(out / "histograms.csv", rows)
    return out


def _write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def compare_dirs(dir_a, dir_b, out_dir, options: ReportOptions | None = None) -> Comparison:
    comp = compare(CrossfitResult.load(dir_a), CrossfitResult.load(dir_b), options)
    write_bundle(comp, out_dir)
    return comp
