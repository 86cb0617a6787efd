"""Command-line entry point wiring the pipeline stages into reproducible runs.

Subcommands mirror the pipeline: synth, ingest, build-graph, train, evaluate,
embed, heatwaves, report. Every run writes a manifest (input hashes, config
echo, seed, versions); artifacts are written atomically so failures leave no
partial files. ``GRIDCAST_THREADS`` caps BLAS threads (default 1, which keeps
reruns byte-identical).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path


def _pin_threads() -> None:
    # Must happen before numpy loads its BLAS; main() runs this first.
    count = os.environ.get("GRIDCAST_THREADS", "1")
    try:
        if int(count) < 1:
            raise ValueError
    except ValueError:
        print(f"error: GRIDCAST_THREADS must be a positive integer, got {count!r}",
              file=sys.stderr)
        raise SystemExit(1) from None
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ.setdefault(var, count)


class _Parser(argparse.ArgumentParser):
    """Argument errors are validation errors: exit 1, not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_grid(text: str) -> tuple[int, int]:
    from .errors import ValidationError

    try:
        n_lat, n_lon = (int(p) for p in text.lower().split("x"))
        return n_lat, n_lon
    except ValueError:
        raise ValidationError(f"--grid expects NLATxNLON, got {text!r}") from None


def _resolve_config(path_text: str):
    from .errors import ValidationError
    from .train import load_run_config, preset_path

    path = Path(path_text)
    if not path.is_file():
        if os.sep not in path_text and path_text.replace("_", "").isalnum():
            return load_run_config(preset_path(path_text.removesuffix(".cfg")))
        raise ValidationError(f"config file not found: {path_text}")
    return load_run_config(path)


def _load_any_dataset(path):
    from .dataio import load_dataset, sniff_format
    from .errors import ValidationError

    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"dataset file not found: {path}")
    return load_dataset(path, sniff_format(path))


def _config_echo(config) -> dict:
    echo = asdict(config)
    echo["horizons_hours"] = list(echo["horizons_hours"])
    return echo


def _apply_overrides(config, args):
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "stride", None) is not None:
        config = replace(config, stride_hours=args.stride)
    return config


def _domain_echo(domain) -> dict:
    return {
        "lat_min": domain.lat_min, "lat_max": domain.lat_max,
        "lon_min": domain.lon_min, "lon_max": domain.lon_max,
        "n_lat": domain.n_lat, "n_lon": domain.n_lon,
    }


def _prepare_tabular(data_path, config):
    """Load, graph, fill, split, standardize: the shared front of train/evaluate."""
    from .errors import ValidationError
    from .graph import build_graph, normalize_adjacency
    from .grid import fill_missing, fit_standardizer, split_dataset

    dataset = _load_any_dataset(data_path)
    if dataset.stride_hours != config.stride_hours:
        raise ValidationError(
            f"config expects a {config.stride_hours} h stride but the dataset has "
            f"{dataset.stride_hours} h"
        )
    graph = build_graph(dataset.domain, config.dist_km)
    adj = normalize_adjacency(graph)
    dataset = fill_missing(dataset, graph)
    splits = split_dataset(dataset, config.split_spec())
    scaler = fit_standardizer(dataset, splits)
    features = scaler.apply(dataset.values)
    t2m_index = dataset.t2m_index
    targets = features[:, :, t2m_index]
    return dataset, adj, splits, scaler, features, targets, t2m_index


def _prepare_features(features_path, config):
    """The same front for the reduced-feature pathway (embedding pipeline)."""
    from .embed import load_feature_set
    from .errors import ValidationError
    from .graph import build_graph, normalize_adjacency
    from .grid import fit_standardizer_array, split_series

    path = Path(features_path)
    if not path.is_file():
        raise ValidationError(f"feature file not found: {path}")
    fs = load_feature_set(path)
    if fs.stride_hours != config.stride_hours:
        raise ValidationError(
            f"config expects a {config.stride_hours} h stride but the feature file has "
            f"{fs.stride_hours} h"
        )
    graph = build_graph(fs.domain, config.dist_km)
    adj = normalize_adjacency(graph)
    splits = split_series(fs.timestamps, config.split_spec())
    scaler = fit_standardizer_array(fs.target_t2m_k[:, :, None], splits.train)
    targets = scaler.apply_var(fs.target_t2m_k, 0)
    return fs, adj, splits, scaler, fs.features, targets, 0


def cmd_synth(args) -> int:
    from .artifacts import atomic_path, write_manifest
    from .dataio import save_dataset
    from .graph import EARTH_RADIUS_KM, haversine_km
    from .grid import GridDomain
    from .synth import SynthConfig, generate_synthetic

    import numpy as np

    from .errors import ValidationError

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_lat, n_lon = _parse_grid(args.grid)
    try:
        if args.bbox:
            lat_min, lat_max, lon_min, lon_max = (float(p) for p in args.bbox.split(","))
        else:
            lat_c, lon_c = (float(p) for p in args.center.split(","))
            dlat = np.degrees(args.spacing_km / EARTH_RADIUS_KM)
            km_per_lon_deg = haversine_km(lat_c, 0.0, lat_c, 1.0)
            dlon = args.spacing_km / km_per_lon_deg
            lat_min, lat_max = lat_c - dlat * (n_lat - 1) / 2, lat_c + dlat * (n_lat - 1) / 2
            lon_min, lon_max = lon_c - dlon * (n_lon - 1) / 2, lon_c + dlon * (n_lon - 1) / 2
    except ValueError:
        raise ValidationError("--bbox/--center expect comma-separated numbers") from None
    domain = GridDomain(lat_min, lat_max, lon_min, lon_max, n_lat, n_lon)
    config = SynthConfig(noise_std_k=args.noise_std)
    dataset = generate_synthetic(domain, args.steps, args.stride, args.seed,
                                 start=args.start, config=config)
    name = "synthetic.csv" if args.format == "csv" else "synthetic.gcd"
    with atomic_path(out / name) as tmp:
        save_dataset(dataset, tmp, args.format)
    write_manifest(
        out, "synth", args.argv, inputs={}, outputs=[name],
        config_echo={"domain": _domain_echo(domain), "steps": args.steps,
                     "stride_hours": args.stride, "start": args.start,
                     "format": args.format, "noise_std": args.noise_std},
        seed=args.seed,
    )
    print(f"wrote {out / name}")
    return 0


def cmd_ingest(args) -> int:
    from .artifacts import atomic_path, write_manifest
    from .dataio import save_dataset
    from .graph import build_graph
    from .grid import fill_missing

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _load_any_dataset(args.data)
    n_missing = int(dataset.missing_mask.sum())
    graph = build_graph(dataset.domain, args.dist_km)
    dataset = fill_missing(dataset, graph)
    name = "filled.csv" if args.format == "csv" else "filled.gcd"
    with atomic_path(out / name) as tmp:
        save_dataset(dataset, tmp, args.format)
    write_manifest(
        out, "ingest", args.argv, inputs={"dataset": args.data}, outputs=[name],
        config_echo={"dist_km": args.dist_km, "format": args.format,
                     "filled_cells": n_missing},
        seed=None,
    )
    print(f"wrote {out / name} ({n_missing} cells filled)")
    return 0


def cmd_build_graph(args) -> int:
    from .artifacts import atomic_path, write_manifest
    from .graph import build_graph, save_graph

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _load_any_dataset(args.data)
    graph = build_graph(dataset.domain, args.dist_km)
    isolated = graph.isolated_nodes()
    with atomic_path(out / "graph.edges") as tmp:
        save_graph(graph, tmp)
    write_manifest(
        out, "build-graph", args.argv, inputs={"dataset": args.data},
        outputs=["graph.edges"],
        config_echo={"dist_km": args.dist_km, "edges": graph.edge_count,
                     "isolated_nodes": int(len(isolated))},
        seed=None,
    )
    print(f"wrote {out / 'graph.edges'} ({graph.edge_count} edges, "
          f"{len(isolated)} isolated nodes)")
    return 0


def cmd_train(args) -> int:
    from .artifacts import atomic_path, write_manifest
    from .model import save_checkpoint
    from .grid import make_windows
    from .train import run_training, write_training_log

    from .errors import ValidationError

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _apply_overrides(_resolve_config(args.config), args)
    if bool(args.data) == bool(args.features):
        raise ValidationError("train needs exactly one of --data or --features")
    if args.features:
        _, adj, splits, _, features, targets, _ = _prepare_features(args.features, config)
        data_input = {"features": args.features}
    else:
        _, adj, splits, _, features, targets, _ = _prepare_tabular(args.data, config)
        data_input = {"dataset": args.data}
    train_idx = make_windows(splits.train, config.window_steps, config.horizons_steps)
    val_idx = make_windows(splits.val, config.window_steps, config.horizons_steps)
    params, history = run_training(features, targets, adj, train_idx, val_idx, config)
    model_config = config.model_config(features.shape[-1])
    with atomic_path(out / "checkpoint.gckpt") as tmp:
        save_checkpoint(tmp, model_config, params)
    with atomic_path(out / "training_log.tsv") as tmp:
        write_training_log(tmp, history)
    write_manifest(
        out, "train", args.argv, inputs=data_input,
        outputs=["checkpoint.gckpt", "training_log.tsv"],
        config_echo=_config_echo(config), seed=config.seed,
    )
    print(f"wrote {out / 'checkpoint.gckpt'} "
          f"(best epoch {history.selected_epoch + 1}, "
          f"val MSE {history.val_mse[history.selected_epoch]:.6f})")
    return 0


def cmd_evaluate(args) -> int:
    from .artifacts import atomic_path, sha256_file, write_json, write_manifest
    from .errors import ValidationError
    from .evaluate import (aligned_targets, climatology_baseline, compute_metrics,
                           control_model_eval, persistence_baseline, write_nodemap_csv,
                           write_nodemap_pgm, write_scale_sidecar)
    from .figures import plot_horizon_errors, plot_node_map
    from .grid import Standardizer, make_windows
    from .model import load_checkpoint, predict_batches

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _apply_overrides(_resolve_config(args.config), args)
    if not args.control and not args.checkpoint:
        raise ValidationError("evaluate needs --checkpoint unless --control is set")
    if bool(args.data) == bool(args.features):
        raise ValidationError("evaluate needs exactly one of --data or --features")

    if args.features:
        source, adj, splits, scaler, features, targets, t2m_index = _prepare_features(
            args.features, config)
        domain = source.domain
        timestamps = source.timestamps
        inputs = {"features": args.features}
    else:
        source, adj, splits, scaler, features, targets, t2m_index = _prepare_tabular(
            args.data, config)
        domain = source.domain
        timestamps = source.timestamps
        inputs = {"dataset": args.data}

    test_idx = make_windows(splits.test, config.window_steps, config.horizons_steps)
    model_config = config.model_config(features.shape[-1])
    checkpoint_sha = None
    if args.control:
        report = control_model_eval(features, targets, adj, test_idx, model_config,
                                    scaler, t2m_index, config.horizons_hours,
                                    config.seed, config.batch_size)
    else:
        _, params = load_checkpoint(args.checkpoint, expected_config=model_config)
        checkpoint_sha = sha256_file(args.checkpoint)
        inputs["checkpoint"] = args.checkpoint
        preds, targs = predict_batches(features, targets, test_idx.anchors, adj,
                                       params, model_config, config.batch_size)
        report = compute_metrics(preds, targs, scaler, t2m_index, config.horizons_hours)

    test_targets = aligned_targets(targets, test_idx)
    persist = compute_metrics(persistence_baseline(targets, test_idx), test_targets,
                              scaler, t2m_index, config.horizons_hours)
    climat = compute_metrics(
        climatology_baseline(targets, timestamps, splits.train, test_idx), test_targets,
        scaler, t2m_index, config.horizons_hours)

    payload = {
        "kind": "evaluation_report",
        "std_convention": Standardizer.convention,
        "domain": _domain_echo(domain),
        **report.to_dict(),
        "baselines": {
            "persistence": report_metrics_subset(persist),
            "climatology": report_metrics_subset(climat),
        },
        "config": _config_echo(config),
        "provenance": {
            "input_sha256": {name: sha256_file(path) for name, path in inputs.items()
                             if name != "checkpoint"},
            "checkpoint_sha256": checkpoint_sha,
            "seed": config.seed,
        },
    }
    with atomic_path(out / "report.json") as tmp:
        write_json(tmp, payload)
    with atomic_path(out / "nodemap.csv") as tmp:
        write_nodemap_csv(tmp, domain, report.nodewise_mae_c)
    with atomic_path(out / "nodemap.pgm") as tmp:
        write_nodemap_pgm(tmp, domain, report.nodewise_mae_c)
    with atomic_path(out / "nodemap_scale.txt") as tmp:
        write_scale_sidecar(tmp, report.nodewise_mae_c, domain)
    outputs = ["report.json", "nodemap.csv", "nodemap.pgm", "nodemap_scale.txt"]
    if not args.no_figures:
        with atomic_path(out / "mae_by_horizon.png") as tmp:
            plot_horizon_errors(payload, tmp, baselines=payload["baselines"])
        with atomic_path(out / "nodemap.png") as tmp:
            plot_node_map(report.nodewise_mae_c, domain, tmp)
        outputs += ["mae_by_horizon.png", "nodemap.png"]
    write_manifest(out, "evaluate", args.argv, inputs=inputs, outputs=outputs,
                   config_echo=_config_echo(config), seed=config.seed)
    label = "control" if args.control else "model"
    print(f"wrote {out / 'report.json'} ({label} mean MAE {report.mean_mae_c:.3f} °C)")
    return 0


def report_metrics_subset(report) -> dict:
    d = report.to_dict()
    return {"mae_c": d["mae_c"], "rmse_c": d["rmse_c"], "mean_mae_c": d["mean_mae_c"]}


def cmd_embed(args) -> int:
    from .artifacts import atomic_path, write_manifest
    from .embed import FileEncoder, StubEncoder, build_embedding_dataset, save_feature_set
    from .graph import build_graph
    from .grid import fill_missing, split_dataset

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _apply_overrides(_resolve_config(args.config), args)
    dataset = _load_any_dataset(args.data)
    graph = build_graph(dataset.domain, config.dist_km)
    dataset = fill_missing(dataset, graph)
    splits = split_dataset(dataset, config.split_spec())
    if args.encoder == "stub":
        encoder = StubEncoder(seed=config.seed)
    else:
        encoder = FileEncoder(args.encoder)
    result = build_embedding_dataset(dataset, encoder, args.k, splits)
    with atomic_path(out / "features.gfea") as tmp:
        save_feature_set(tmp, result.feature_set)
    write_manifest(
        out, "embed", args.argv, inputs={"dataset": args.data}, outputs=["features.gfea"],
        config_echo={**_config_echo(config), "k": args.k, "encoder": args.encoder,
                     "pca_fit_rows": result.fit_rows, "total_rows": result.total_rows,
                     "explained_variance_ratio":
                         [float(v) for v in result.pca.explained_variance_ratio]},
        seed=config.seed,
    )
    print(f"wrote {out / 'features.gfea'} "
          f"(PCA fit on {result.fit_rows}/{result.total_rows} rows)")
    return 0


def cmd_heatwaves(args) -> int:
    from .artifacts import atomic_path, write_manifest
    from .errors import ValidationError
    from .heatwave import (HeatwaveDefinition, daily_max_series, detect_heatwaves,
                           write_events_csv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.mode == "absolute" and args.threshold_c is None:
        raise ValidationError("--mode absolute requires --threshold-c")
    if args.mode == "percentile" and args.percentile is None:
        raise ValidationError("--mode percentile requires --percentile")
    definition = HeatwaveDefinition(
        mode=args.mode, min_days=args.min_days,
        threshold_c=args.threshold_c, percentile=args.percentile,
    )
    dataset = _load_any_dataset(args.data)
    daily, dates = daily_max_series(dataset)
    inputs = {"dataset": args.data}
    reference = None
    if args.mode == "percentile":
        if args.reference_data:
            reference, _ = daily_max_series(_load_any_dataset(args.reference_data))
            inputs["reference"] = args.reference_data
        else:
            reference = daily  # the record serves as its own reference period
    events = detect_heatwaves(daily, definition, reference)
    with atomic_path(out / "heatwave_events.csv") as tmp:
        write_events_csv(tmp, events, dates)
    write_manifest(
        out, "heatwaves", args.argv, inputs=inputs, outputs=["heatwave_events.csv"],
        config_echo={"mode": args.mode, "threshold_c": args.threshold_c,
                     "percentile": args.percentile, "min_days": args.min_days,
                     "events": len(events)},
        seed=None,
    )
    print(f"wrote {out / 'heatwave_events.csv'} ({len(events)} events)")
    return 0


def cmd_report(args) -> int:
    import csv
    import json

    import numpy as np

    from .artifacts import atomic_path, write_manifest
    from .errors import DataFormatError, ValidationError
    from .figures import plot_horizon_errors, plot_node_map, plot_training_curve
    from .grid import GridDomain

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = Path(args.report)
    if not report_path.is_file():
        raise ValidationError(f"report file not found: {report_path}")
    with open(report_path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("kind") != "evaluation_report":
        raise DataFormatError(f"{report_path}: not an evaluation report")

    outputs = ["mae_by_horizon.png"]
    inputs = {"report": args.report}
    with atomic_path(out / "mae_by_horizon.png") as tmp:
        plot_horizon_errors(payload, tmp, baselines=payload.get("baselines"))
    if args.nodemap:
        with open(args.nodemap, "r", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        nodewise = np.array([float(r["mae_c"]) for r in rows])
        domain = GridDomain(**payload["domain"])
        with atomic_path(out / "nodemap.png") as tmp:
            plot_node_map(nodewise, domain, tmp)
        outputs.append("nodemap.png")
        inputs["nodemap"] = args.nodemap
    if args.training_log:
        log_rows = np.loadtxt(args.training_log, delimiter="\t", ndmin=2)
        with atomic_path(out / "training_curve.png") as tmp:
            plot_training_curve(list(log_rows[:, 1]), list(log_rows[:, 2]), tmp)
        outputs.append("training_curve.png")
        inputs["training_log"] = args.training_log
    write_manifest(out, "report", args.argv, inputs=inputs, outputs=outputs,
                   config_echo={}, seed=None)
    print(f"wrote {len(outputs)} figures to {out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="gridcast",
                     description="Graph-convolution + GRU temperature forecasting "
                                 "on small gridded domains.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for info, -vv for debug logging")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a deterministic synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--grid", default="12x12", help="NLATxNLON grid shape")
    p.add_argument("--center", default="43.0,-81.2", help="grid center lat,lon")
    p.add_argument("--spacing-km", type=float, default=2.5, help="grid spacing in km")
    p.add_argument("--bbox", default=None,
                   help="explicit lat_min,lat_max,lon_min,lon_max (overrides --center)")
    p.add_argument("--steps", type=int, default=2000, help="number of timesteps")
    p.add_argument("--stride", type=int, choices=(1, 6), default=1, help="hours per step")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", default="2022-01-01T00:00:00", help="first timestamp (ISO)")
    p.add_argument("--noise-std", type=float, default=0.8, help="t2m noise sigma in K")
    p.add_argument("--format", choices=("csv", "binary"), default="binary")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate a dataset and fill missing values")
    p.add_argument("--data", required=True, help="input dataset (csv or binary)")
    p.add_argument("--dist-km", type=float, required=True,
                   help="neighbor threshold used for the fill")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "binary"), default="binary",
                   help="output format")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-graph", help="build and export the spatial graph")
    p.add_argument("--data", required=True, help="dataset that defines the domain")
    p.add_argument("--dist-km", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("train", help="train a model from a run configuration")
    p.add_argument("--data", help="input dataset (csv or binary)")
    p.add_argument("--features", help="reduced-feature file from the embed stage")
    p.add_argument("--config", required=True, help="run config path or preset name")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--stride", type=int, choices=(1, 6), default=None,
                   help="override the config stride")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on the held-out range")
    p.add_argument("--data", help="input dataset (csv or binary)")
    p.add_argument("--features", help="reduced-feature file from the embed stage")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", help="trained checkpoint (omit with --control)")
    p.add_argument("--out", required=True)
    p.add_argument("--control", action="store_true",
                   help="evaluate an untrained random-weight model instead")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--stride", type=int, choices=(1, 6), default=None)
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("embed", help="build reduced embedding features")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=6, help="PCA component count")
    p.add_argument("--encoder", default="stub",
                   help="'stub' or a path to a precomputed embedding file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--stride", type=int, choices=(1, 6), default=None)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("heatwaves", help="detect heatwave events in a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("absolute", "percentile"), required=True)
    p.add_argument("--threshold-c", type=float, default=None)
    p.add_argument("--percentile", type=float, default=None)
    p.add_argument("--min-days", type=int, default=3)
    p.add_argument("--reference-data", default=None,
                   help="dataset supplying the percentile reference period")
    p.set_defaults(func=cmd_heatwaves)

    p = sub.add_parser("report", help="render figures from evaluation artifacts")
    p.add_argument("--report", required=True, help="report.json from evaluate")
    p.add_argument("--nodemap", default=None, help="nodemap.csv from evaluate")
    p.add_argument("--training-log", default=None, help="training_log.tsv from train")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    _pin_threads()
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = list(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    from .errors import GridcastError, ValidationError

    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except GridcastError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
