"""Command-line interface.

Every subcommand accepts --config (TOML experiment file), --seed (overrides
the run seed), and --out (output directory). Exit codes: 0 on success, 1 for
configuration or usage problems, 2 for data problems.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .encoder import EncoderConfig, TripletEncoder
from .errors import ConfigError, DataError
from .pipeline import (
    OVERLAYS,
    ExperimentConfig,
    _emit_run_artifacts,
    _write_matrix,
    encode_all,
    evaluate_clusterings,
    export_scatter,
    load_corpus,
    load_experiment_config,
    load_labels,
    merge_reports,
    prepare_dataset,
    read_encodings,
    reduce_points,
    run_baseline,
    truth_codes,
)
from .preprocess import build_dataset, demographic_width
from .synth import generate_corpus
from .trainer import Trainer, write_history


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit code 2; reserve 2 for data errors."""

    def error(self, message):
        raise ConfigError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="TOML experiment file")
    parser.add_argument("--seed", type=int, default=None, help="override the run seed")
    parser.add_argument("--out", default=None, help="output directory")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="phenotraj",
        description="Vital-sign trajectory encoding and phenotype clustering.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        return p

    add("synth", "generate a synthetic labeled corpus as CSV files")

    p = add("ingest", "parse a corpus and print cohort summary statistics")
    p.add_argument("data_dir", nargs="?", default=None, help="corpus directory")

    add("train", "fit the triplet encoder with masked one-step forecasting")

    p = add("encode", "embed every series with a trained encoder")
    p.add_argument("--params", required=True, help="saved weights file")

    p = add("cluster", "reduce and cluster precomputed encodings")
    p.add_argument("--encodings", required=True, help="encodings CSV")
    p.add_argument("--labels", default=None, help="ground-truth labels CSV")

    add("baseline", "run the summary-descriptor pipeline end to end")

    p = add("report", "combine run directories into one report CSV")
    p.add_argument("run_dirs", nargs="+", help="directories holding report.csv")

    p = add("export-scatter", "write a scatter CSV and SVG from an embedding")
    p.add_argument("--embedding", required=True, help="embedding CSV")
    p.add_argument("--overlay", required=True, choices=OVERLAYS)
    p.add_argument("--assignments", default=None, help="assignments CSV (cluster overlay)")
    p.add_argument("--labels", default=None, help="labels CSV (phenotype overlay)")

    return parser


def _require_out(args) -> Path:
    if args.out is None:
        raise ConfigError(f"{args.command} requires --out")
    return Path(args.out)


def _load_cfg(args) -> ExperimentConfig:
    return load_experiment_config(args.config, seed_override=args.seed)


def _cmd_synth(args) -> None:
    cfg = _load_cfg(args)
    out = _require_out(args)
    corpus = generate_corpus(cfg.synth)
    paths = corpus.write(out)
    rows = sum(len(r) for r in corpus.rows_by_patient.values())
    print(f"patients={len(corpus.rows_by_patient)}  rows={rows}  series={len(corpus.labels)}")
    for name in ("observations", "demographics", "labels"):
        print(f"wrote {paths[name]}")


def _cmd_ingest(args) -> None:
    cfg = _load_cfg(args)
    rows_by_patient, demos, _ = load_corpus(cfg, data_dir=args.data_dir)
    dataset, summary = build_dataset(
        rows_by_patient, demos, m_min=cfg.m_min, seed=cfg.seed
    )
    rows = sum(len(r) for r in rows_by_patient.values())
    print(f"patients={len(rows_by_patient)}  rows={rows}  series={len(dataset.series)}")
    print(str(summary))


def _cmd_train(args) -> None:
    cfg = _load_cfg(args)
    out = _require_out(args)
    out.mkdir(parents=True, exist_ok=True)
    dataset, _, _ = prepare_dataset(cfg)
    enc_cfg = EncoderConfig(
        demo_width=demographic_width(dataset.ward_vocab), **cfg.encoder_overrides
    )
    encoder = TripletEncoder(enc_cfg, seed=cfg.seed)
    result = Trainer(dataset, cfg.training, encoder=encoder).fit()
    params_path = out / "params.bin"
    result.encoder.save(params_path)
    write_history(out / "loss_history.csv", result.history)
    print(f"trained {len(result.history)} epochs  best_epoch={result.best_epoch}  "
          f"best_val_loss={result.best_val_loss:.6f}")
    print(f"wrote {params_path}")


def _cmd_encode(args) -> None:
    cfg = _load_cfg(args)
    out = _require_out(args)
    out.mkdir(parents=True, exist_ok=True)
    dataset, _, _ = prepare_dataset(cfg)
    encoder = TripletEncoder.load(args.params)
    width = demographic_width(dataset.ward_vocab)
    if encoder.config.demo_width != width:
        raise ConfigError(
            f"loaded encoder expects demographic width {encoder.config.demo_width},"
            f" dataset has {width}"
        )
    ids, x = encode_all(dataset, encoder)
    path = out / "encodings.csv"
    _write_matrix(path, "series_id," + ",".join(f"e{i}" for i in range(x.shape[1])), ids, x)
    print(f"encoded {len(ids)} series into {x.shape[1]} dims")
    print(f"wrote {path}")


def _cmd_cluster(args) -> None:
    cfg = _load_cfg(args)
    out = _require_out(args)
    out.mkdir(parents=True, exist_ok=True)
    ids, x = read_encodings(args.encodings)
    reduced = reduce_points(x, cfg.reduction, cfg.tsne)
    truth = None
    if args.labels is not None:
        truth = truth_codes(ids, load_labels(args.labels))
    assignments, row = evaluate_clusterings(reduced, cfg, truth)
    _emit_run_artifacts(out, ids, reduced, assignments, row)
    print(row.csv_line())


def _cmd_baseline(args) -> None:
    cfg = _load_cfg(args)
    out = _require_out(args)
    row, _ = run_baseline(cfg, out)
    print(row.csv_line())


def _cmd_report(args) -> None:
    out = _require_out(args)
    out.mkdir(parents=True, exist_ok=True)
    path = merge_reports(args.run_dirs, out / "report.csv")
    print(f"wrote {path}")


def _overlay_values(args, cfg: ExperimentConfig, ids: list[str]) -> list:
    if args.overlay == "cluster":
        if args.assignments is None:
            raise ConfigError("--overlay cluster requires --assignments")
        by_id: dict[str, int] = {}
        lines = Path(args.assignments).read_text(encoding="utf-8").splitlines() \
            if Path(args.assignments).exists() else None
        if lines is None:
            raise DataError(f"assignments file not found: {args.assignments}")
        if not lines or lines[0] != "series_id,label":
            raise DataError(f"{args.assignments}: expected header 'series_id,label'")
        for i, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(f"{args.assignments}: line {i}: expected 2 fields")
            by_id[parts[0]] = int(parts[1])
        missing = [sid for sid in ids if sid not in by_id]
        if missing:
            raise DataError(f"series {missing[0]} has no cluster assignment")
        return [by_id[sid] for sid in ids]
    if args.overlay == "phenotype":
        if args.labels is not None:
            labels = load_labels(args.labels)
        else:
            _, _, labels = prepare_dataset(cfg)
        if labels is None:
            raise ConfigError("--overlay phenotype requires --labels")
        missing = [sid for sid in ids if sid not in labels]
        if missing:
            raise DataError(f"series {missing[0]} has no phenotype label")
        return [labels[sid] for sid in ids]
    # gender: rebuild the dataset named by the config and join on series_id
    dataset, _, _ = prepare_dataset(cfg)
    by_series = {s.series_id: s.demographics.gender for s in dataset.series}
    missing = [sid for sid in ids if sid not in by_series]
    if missing:
        raise DataError(f"series {missing[0]} not present in the configured corpus")
    return [int(by_series[sid]) for sid in ids]


def _cmd_export_scatter(args) -> None:
    cfg = _load_cfg(args)
    out = _require_out(args)
    ids, emb = read_encodings(args.embedding)
    if emb.shape[1] > 3:
        raise DataError(f"embedding must have 2 or 3 dims, got {emb.shape[1]}")
    values = _overlay_values(args, cfg, ids)
    csv_path, svg_path = export_scatter(ids, emb, args.overlay, values, out)
    print(f"wrote {csv_path}")
    print(f"wrote {svg_path}")


_HANDLERS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "encode": _cmd_encode,
    "cluster": _cmd_cluster,
    "baseline": _cmd_baseline,
    "report": _cmd_report,
    "export-scatter": _cmd_export_scatter,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = _HANDLERS[args.command]
        handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
