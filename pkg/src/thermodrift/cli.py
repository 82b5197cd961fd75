"""Command-line entry point: simulate, fit, rank, validate, correct.

Every failure prints one line ``error code=<code> exit=<status> message=...``
to stderr and exits with 2 (input), 3 (degenerate data) or 4 (leakage).
Outputs are staged in temporary files and renamed into place only once all
of them were produced.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import ingest_io, regression, selection, simulator, validation
from .core import SensorConfig, TimeSeries, Unit
from .correction import batch_correct
from .errors import InputError, ThermoDriftError


def _positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermodrift", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, outlier=False):
        p.add_argument("--q0-mm", type=_positive(float), default=None, help="override dataset q0")
        p.add_argument("--stroke-mm", type=_positive(float), default=None)
        p.add_argument("--grid-dt-s", type=_positive(float), default=1.0,
                       help="grid period used when aligning raw channel files")
        if outlier:
            p.add_argument("--outlier-c", type=float, default=regression.DEFAULT_OUTLIER_C,
                           help="outlier threshold in robust sigmas (0 disables)")

    p = sub.add_parser("simulate", help="generate synthetic scenario datasets")
    p.add_argument("--config", required=True, help="simulation config JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--q0-mm", type=_positive(float), default=None)
    p.add_argument("--stroke-mm", type=_positive(float), default=None)
    p.add_argument("--grid-dt-s", type=_positive(float), default=None,
                   help="override the scenarios' sample period")

    p = sub.add_parser("fit", help="fit one sensor configuration")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--sensors", required=True, help="'7' or '7,15'")
    p.add_argument("--out", required=True, help="output directory")
    common(p, outlier=True)

    p = sub.add_parser("rank", help="rank every single sensor and pair")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    common(p, outlier=True)

    p = sub.add_parser("validate", help="cross-validate a model on held-out datasets")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output directory")
    common(p)

    p = sub.add_parser("correct", help="write the thermally corrected setpoint trace")
    p.add_argument("dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--smooth-window", type=int, default=0,
                   help="moving-average window (samples) applied to dT; 0 = off")
    common(p)
    return parser


def _load_all(args) -> list:
    paths = args.datasets if hasattr(args, "datasets") else [args.dataset]
    return [ingest_io.load_dataset(p, args.grid_dt_s, args.q0_mm, args.stroke_mm) for p in paths]


def cmd_simulate(args, out: ingest_io.StagedOutputs):
    try:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: {exc}") from None
    if args.grid_dt_s is not None:
        doc.setdefault("scenario_defaults", {})["sample_dt_s"] = args.grid_dt_s
        for s in doc.get("scenarios", {}).values():
            s.pop("sample_dt_s", None)
    if args.stroke_mm is not None:
        doc.setdefault("scenario_defaults", {})["stroke_mm"] = args.stroke_mm
    if args.q0_mm is not None:
        doc.setdefault("plant", {})["q0_mm"] = args.q0_mm
    config = simulator.config_from_dict(doc)
    datasets = simulator.simulate_config(config, args.seed)
    outdir = Path(args.out)
    for name, ds in datasets.items():
        out.add(outdir / f"{name}.csv", ingest_io.dataset_to_csv(ds))
    out.add(outdir / "truth_model.json", ingest_io.dumps_report(config.plant.true_model))
    return [f"simulated {len(datasets)} scenario(s) into {outdir}"]


def cmd_fit(args, out):
    datasets = _load_all(args)
    config = SensorConfig.parse(args.sensors)
    model, report = regression.fit(datasets, config, args.outlier_c)
    outdir = Path(args.out)
    out.add(outdir / "model.json", ingest_io.dumps_report(model))
    out.add(outdir / "fit_report.json", ingest_io.dumps_report(report))
    return [f"config={config.label} rmse_um={report.rmse!r} linf_um={report.linf!r} "
            f"n_samples={report.n_samples} n_outliers_removed={report.n_outliers_removed}"]


def cmd_rank(args, out):
    datasets = _load_all(args)
    matrices = selection.rank_all(datasets, args.outlier_c, workers=args.workers)
    pareto = selection.pareto_front(matrices)
    outdir = Path(args.out)
    out.add(outdir / "criteria.json", ingest_io.dumps_report(matrices))
    out.add(outdir / "pareto.json", ingest_io.dumps_report(pareto))
    out.add(outdir / "cells.csv", ingest_io.criteria_cells_csv(matrices, pareto))
    lines = [f"fits={matrices.n_fits} dominated={pareto.dominated_count}"]
    lines += [f"pareto config={p.config.label} rmse_um={p.rmse!r} linf_um={p.linf!r}" for p in pareto.front]
    if pareto.best_single is not None:
        b = pareto.best_single
        lines.append(f"best_single config={b.config.label} rmse_um={b.rmse!r} linf_um={b.linf!r}")
    return lines


def cmd_validate(args, out):
    model = ingest_io.read_model(args.model)
    datasets = _load_all(args)
    report = validation.cross_validate(model, datasets)
    outdir = Path(args.out)
    out.add(outdir / "validation_report.json", ingest_io.dumps_report(report))
    out.add(
        outdir / "validation_trace.csv",
        ingest_io.rows_to_csv(validation.TRACE_HEADER, validation.trace_rows(model, datasets)),
    )
    p = report.pooled
    return [f"config={report.config} reduction_max_pct={p.reduction_max_pct!r} "
            f"reduction_mean_pct={p.reduction_mean_pct!r}"]


def cmd_correct(args, out):
    model = ingest_io.read_model(args.model)
    (ds,) = _load_all(args)
    dt = float(ds.time[1] - ds.time[0]) if ds.n_samples > 1 else 1.0
    motion = TimeSeries(0.0, dt, ds.q, ds.valid, Unit.MILLIMETRE)
    corrected = batch_correct(model, motion, ds.delta_T, ds.stroke, args.smooth_window)
    rows = (
        (float(t), float(q), float(c), int(ok))
        for t, q, c, ok in zip(ds.time, ds.q, corrected.values, corrected.valid)
    )
    out.add(Path(args.out), ingest_io.rows_to_csv(
        ("time_s", "q_setpoint_mm", "q_corrected_mm", "corrected"), rows))
    refused = int(np.count_nonzero(~corrected.valid))
    return [f"corrected {ds.n_samples - refused} sample(s); {refused} kept uncorrected (out of stroke)"]


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "rank": cmd_rank,
    "validate": cmd_validate,
    "correct": cmd_correct,
}


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    staged = ingest_io.StagedOutputs()
    try:
        lines = COMMANDS[args.command](args, staged)
        staged.commit()
    except ThermoDriftError as exc:
        print(f"error code={exc.code} exit={exc.exit_status} message={_one_line(exc)}", file=sys.stderr)
        return exc.exit_status
    except OSError as exc:
        print(f"error code=io exit=2 message={_one_line(exc)}", file=sys.stderr)
        return 2
    for line in lines:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
