"""Command-line entry point: ``textcausal {generate,fit,report compare,inspect scores}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 training or
estimation error, 5 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import EMBEDDING_TOKEN_ENV, load_config, peek_columns, with_overrides
from .crossfit import CrossfitResult, run_crossfit
from .data import load_dataset, write_dataset
from .drcore import ScoreRows
from .errors import ConfigError, DataError, InvariantError, TextCausalError, TrainingError
from .evaluation import cate_quantile_curve
from .report import compare_dirs

EXIT_CONFIG, EXIT_DATA, EXIT_TRAINING, EXIT_INTERNAL = 2, 3, 4, 5


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, InvariantError):
        return EXIT_INTERNAL
    if isinstance(exc, TrainingError):
        return EXIT_TRAINING
    if isinstance(exc, DataError):
        return EXIT_DATA
    return EXIT_INTERNAL


def _fmt_table(estimates) -> str:
    lines = [f"{'estimand':<16}{'point':>12}{'std_err':>12}{'ci_low':>12}{'ci_high':>12}{'n':>8}"]
    for e in estimates:
        lines.append(f"{e.label:<16}{e.point:>12.6f}{e.std_error:>12.6f}"
                     f"{e.ci_low:>12.6f}{e.ci_high:>12.6f}{e.n_effective:>8d}")
    return "\n".join(lines)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- subcommands ---------------------------------------------------------------

def cmd_generate(args) -> int:
    from .synthetic import generate

    cfg = with_overrides(load_config(args.config), seed=args.seed)
    dataset, truth = generate(cfg.synthetic)
    out = Path(args.out)
    (out / "truth").mkdir(parents=True, exist_ok=True)
    write_dataset(dataset, out / "dataset.csv")
    truth.to_csv(out / "truth" / "truth.csv")
    _write_json(out / "generate_config.json", cfg.synthetic.to_dict())
    print(f"wrote {len(dataset)} units to {out / 'dataset.csv'}")
    return 0


def cmd_fit(args) -> int:
    cfg = with_overrides(load_config(args.config), seed=args.seed, outcome=args.outcome_col,
                         treatment=args.treatment_col, group=args.group_col, text=args.text_col,
                         modality=args.modality)
    schema = cfg.data.schema_for(peek_columns(args.data))
    dataset = load_dataset(args.data, schema)
    cf = cfg.effective_crossfit()
    headers = {}
    token = os.environ.get(EMBEDDING_TOKEN_ENV)
    if token and cfg.embedding is not None:
        headers["Authorization"] = f"Bearer {token}"
    result = run_crossfit(dataset, cf, n_jobs=args.threads, keep_models=args.save_models,
                          provider_headers=headers)
    result.manifest["run_config"] = cfg.to_dict()
    result.save(args.out, save_models=args.save_models)
    print(_fmt_table([result.ate, result.atet]))
    skipped = result.manifest["skipped_groups"]
    if skipped:
        print(f"groups below min size (skipped): {', '.join(sorted(skipped))}")
    return 0


def cmd_report_compare(args) -> int:
    cfg = load_config(args.config)
    comp = compare_dirs(args.run_a, args.run_b, args.out, cfg.report)
    s = comp.summary
    print(f"{'':<8}{'a':>26}{'b':>26}  overlap")
    for key in ("ate", "atet"):
        a, b = s[key]["a"], s[key]["b"]
        print(f"{key.upper():<8}{a['point']:>12.6f} ±{a['std_error']:<12.6f}"
              f"{b['point']:>12.6f} ±{b['std_error']:<12.6f}  {s[key]['ci_overlap']}")

    def num(v):
        return "undefined" if v is None else f"{v:.4f}"

    print(f"GATE  pearson {num(s['gate']['pearson'])}  spearman {num(s['gate']['spearman'])}")
    print(f"CATE  pearson {num(s['cate']['pearson'])}  spearman {num(s['cate']['spearman'])}")
    print(f"lift area ratio ({s['lift']['baseline']}) {num(s['lift']['area_ratio'])}")
    return 0


def cmd_inspect_scores(args) -> int:
    path = Path(args.path)
    rows = ScoreRows.from_csv(path / "scores.csv" if path.is_dir() else path)
    n = len(rows)
    print(f"units {n}  treated {int(rows.t.sum())}  folds {len(np.unique(rows.fold))}")
    for name in ("mu_hat", "theta_tilde", "dr_label", "cate"):
        v = getattr(rows, name)
        print(f"{name:<12} min {v.min():.6f}  mean {v.mean():.6f}  max {v.max():.6f}")
    curve = cate_quantile_curve(rows.cate, 5)
    print("cate quantiles " + "  ".join(f"q{q:.2f}={v:.6f}" for q, v in curve))
    if path.is_dir() and (path / "estimates.json").exists():
        print(_fmt_table(CrossfitResult.load(path).estimates))
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="textcausal",
                                description="Doubly robust effect estimation from tabular "
                                            "or text covariates.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset and its ground truth")
    g.add_argument("--config")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="cross-fit nuisances and estimate effects")
    f.add_argument("--config")
    f.add_argument("--data", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--seed", type=int)
    f.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    f.add_argument("--modality", choices=("tabular", "text"))
    f.add_argument("--outcome-col")
    f.add_argument("--treatment-col")
    f.add_argument("--group-col")
    f.add_argument("--text-col")
    f.add_argument("--save-models", action="store_true")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("report", help="compare result directories")
    rsub = r.add_subparsers(dest="report_command", required=True)
    rc = rsub.add_parser("compare", help="compare candidate run A with reference run B")
    rc.add_argument("run_a")
    rc.add_argument("run_b")
    rc.add_argument("--out", required=True)
    rc.add_argument("--config")
    rc.set_defaults(func=cmd_report_compare)

    i = sub.add_parser("inspect", help="summarise artifacts")
    isub = i.add_subparsers(dest="inspect_command", required=True)
    isc = isub.add_parser("scores", help="summarise scores.csv or a result directory")
    isc.add_argument("path")
    isc.set_defaults(func=cmd_inspect_scores)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except TextCausalError as exc:
        code = exit_code_for(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
