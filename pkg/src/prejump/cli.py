"""Command line entry point: ``prejump <stage> [options]``.

Each stage reads and writes files in ``--run-dir``; ``pipeline`` runs them
all. Without ``--config`` the bundled 20-stock planted-pattern universe is
used.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from . import pipeline as pl


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prejump", description="Pre-jump trading-pattern analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    def stage(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="run config JSON (default: bundled planted universe)")
        p.add_argument("--run-dir", type=Path, default=Path("run"), help="directory holding the artifacts")
        p.add_argument("--threads", type=int, default=1, help="maximum worker threads")
        p.add_argument("--seed", type=int, help="override the config seed")
        return p

    p = stage("simulate", "simulate a synthetic bar universe")
    p.add_argument("--n-stocks", type=int)
    p.add_argument("--n-days", type=int)
    p.add_argument("--jump-rate", type=float)

    p = stage("resample", "aggregate quote/trade record files into 5-minute bars")
    p.add_argument("records", nargs="+", type=Path, help="one CSV per instrument; the file stem is the id")

    p = stage("detect-jumps", "flag intraday jumps")
    p.add_argument("--alpha", type=float, help="significance level (default 0.01)")
    p.add_argument("--K", type=int, help="bipower window length (default 240)")

    stage("attributes", "compute and standardize the 40 attribute series")
    stage("samples", "extract pre-jump windows and steady days, build per-stock medians")

    p = stage("mi-report", "class mutual information of every attribute")
    p.add_argument("--windows", type=_int_list, help="window lengths, e.g. 48,36,24,12,6")
    p.add_argument("--ks", type=_int_list, help="neighbour counts, e.g. 1,3,5")
    p.add_argument("--distances", type=_str_list, help="e.g. euclidean,chebychev,dtw")
    p.add_argument("--permutations", type=int, help="zero-baseline permutations")

    p = stage("select", "mRMR indicator selection under every setting")
    p.add_argument("--redundancy-form", choices=("mean", "sum"))

    p = stage("cluster", "cluster stocks on the selected indicators")
    p.add_argument("--cutoff", type=float, help="inconsistency cutoff")

    p = stage("pipeline", "run every stage")
    p.add_argument("--records", nargs="*", type=Path, help="record files to use instead of simulating")
    p.add_argument("--alpha", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--windows", type=_int_list)
    p.add_argument("--cutoff", type=float)
    return parser


def _apply_overrides(cfg: dict, args) -> dict:
    raw = {k: v for k, v in cfg.items()}
    set_ = lambda section, key, value: value is not None and raw[section].__setitem__(key, value)  # noqa: E731
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    set_("simulate", "n_stocks", getattr(args, "n_stocks", None))
    set_("simulate", "n_days", getattr(args, "n_days", None))
    set_("simulate", "jump_rate", getattr(args, "jump_rate", None))
    set_("jump_test", "alpha", getattr(args, "alpha", None))
    set_("jump_test", "K", getattr(args, "K", None))
    set_("mi", "windows", getattr(args, "windows", None))
    set_("mi", "ks", getattr(args, "ks", None))
    set_("mi", "distances", getattr(args, "distances", None))
    set_("mi", "n_permutations", getattr(args, "permutations", None))
    set_("mrmr", "redundancy_form", getattr(args, "redundancy_form", None))
    set_("clustering", "cutoff", getattr(args, "cutoff", None))
    return pl.validate_config(raw)


def _set_threads(n: int) -> None:
    n = max(1, n)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)
    try:
        cfg = _apply_overrides(pl.load_config(args.config), args)
        if args.command == "pipeline":
            started = time.perf_counter()
            run = pl.run_pipeline(cfg, args.run_dir, args.threads, records=args.records or None,
                                  progress=lambda s: print(f"[{time.perf_counter() - started:7.1f}s] {s}",
                                                           file=sys.stderr))
            print(f"pipeline finished in {time.perf_counter() - started:.1f}s; "
                  f"{len(run.written)} artifacts in {run.dir}")
            return 0
        run = pl.Run(cfg, args.run_dir, args.threads)
        stages = {
            "simulate": pl.stage_simulate,
            "resample": lambda r: pl.stage_resample(r, args.records),
            "detect-jumps": pl.stage_detect_jumps,
            "attributes": pl.stage_attributes,
            "samples": pl.stage_samples,
            "mi-report": pl.stage_mi_report,
            "select": pl.stage_select,
            "cluster": pl.stage_cluster,
        }
        stages[args.command](run)
        for name in run.written:
            print(run.path(name))
        return 0
    except pl.ConfigError as exc:
        print(f"prejump: configuration error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"prejump: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
