"""End-to-end experiment orchestration.

Ties the stages together behind one config type: corpus loading (files or
synthetic), preprocessing, either the descriptor baseline or the trained
encoder, dimensionality reduction, the four clustering methods, and report
plus artifact emission. The CLI in cli.py is a thin shell over this module.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python < 3.11
    import tomli as tomllib

from .autodiff import no_grad
from .cluster import (
    adjusted_rand_index,
    gmm,
    hdbscan,
    kmeans,
    silhouette,
    spectral,
)
from .data import Dataset, FeatureKind, VitalSeries
from .encoder import EncoderConfig, TripletEncoder
from .errors import ConfigError, DataError
from .preprocess import (
    FilterSummary,
    ObservationRow,
    build_dataset,
    demographic_width,
    encode_demographics,
    parse_demographics,
    parse_observations,
)
from .reduce import TsneConfig, pca_fit, pca_transform, tsne
from .synth import GeneratorConfig, generate_corpus
from .trainer import TrainConfig, Trainer, write_history

STAT_ORDER = ("min", "max", "mean")
METHODS = ("kmeans", "sc", "gmm", "hdb")
REPORT_HEADER = (
    "model,set,reduction,clusters,kmeans,sc,gmm,hdb,"
    "ari_kmeans,ari_sc,ari_gmm,ari_hdb"
)

_PIPELINES = ("baseline", "strats")
_REDUCTIONS = ("none", "pca", "tsne")
_SOURCES = ("synthetic", "files")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    pipeline: str = "strats"
    m_min: int = 4
    seed: int = 0
    reduction: str = "pca"
    clusters: int = 3
    min_cluster_size: int = 15
    train: bool = True
    params: Optional[str] = None
    source: str = "synthetic"
    data_dir: Optional[str] = None
    descriptors: tuple[str, ...] = STAT_ORDER
    synth: GeneratorConfig = field(default_factory=GeneratorConfig)
    encoder_overrides: dict = field(default_factory=dict)
    training: TrainConfig = field(default_factory=TrainConfig)
    tsne: TsneConfig = field(default_factory=TsneConfig)

    def __post_init__(self):
        if self.pipeline not in _PIPELINES:
            raise ConfigError(
                f"pipeline must be one of {_PIPELINES}, got {self.pipeline!r}"
            )
        if self.m_min not in (4, 8):
            raise ConfigError(f"m_min must be 4 (set A) or 8 (set B), got {self.m_min}")
        if self.reduction not in _REDUCTIONS:
            raise ConfigError(
                f"reduction must be one of {_REDUCTIONS}, got {self.reduction!r}"
            )
        if self.source not in _SOURCES:
            raise ConfigError(f"source must be one of {_SOURCES}, got {self.source!r}")
        if self.clusters < 1:
            raise ConfigError(f"clusters must be >= 1, got {self.clusters}")
        if self.min_cluster_size < 2:
            raise ConfigError(
                f"min_cluster_size must be >= 2, got {self.min_cluster_size}"
            )
        bad = [s for s in self.descriptors if s not in STAT_ORDER]
        if bad:
            raise ConfigError(f"unknown descriptor statistics: {bad}")
        if self.pipeline == "baseline" and not self.descriptors:
            raise ConfigError("the baseline pipeline requires at least one descriptor")

    @property
    def set_name(self) -> str:
        return "A" if self.m_min == 4 else "B"

    @property
    def model_name(self) -> str:
        if self.pipeline == "baseline":
            return "baseline-" + "-".join(self.descriptors)
        return "strats"


def _build_section(cls, section: dict, name: str):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in [{name}]")
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigError(f"bad [{name}] section: {exc}") from None


def load_experiment_config(
    path: Optional[str | Path] = None, seed_override: Optional[int] = None
) -> ExperimentConfig:
    """Parse a TOML experiment file; None yields the defaults.

    --seed style overrides replace the run seed; section-level seeds (synth,
    train, tsne) default to the run seed unless the section sets its own.
    """
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = tomllib.loads(p.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid TOML: {exc}") from None

    known_sections = {"run", "data", "synth", "baseline", "encoder", "train", "tsne"}
    unknown = sorted(set(raw) - known_sections)
    if unknown:
        raise ConfigError(f"unknown config section [{unknown[0]}]")

    run = dict(raw.get("run", {}))
    run_keys = {
        "pipeline", "m_min", "seed", "reduction", "clusters",
        "min_cluster_size", "train", "params",
    }
    bad = sorted(set(run) - run_keys)
    if bad:
        raise ConfigError(f"unknown key {bad[0]!r} in [run]")
    seed = seed_override if seed_override is not None else int(run.get("seed", 0))

    data = dict(raw.get("data", {}))
    bad = sorted(set(data) - {"source", "dir"})
    if bad:
        raise ConfigError(f"unknown key {bad[0]!r} in [data]")

    baseline_sec = dict(raw.get("baseline", {}))
    bad = sorted(set(baseline_sec) - {"descriptors"})
    if bad:
        raise ConfigError(f"unknown key {bad[0]!r} in [baseline]")
    chosen = baseline_sec.get("descriptors", list(STAT_ORDER))
    if not isinstance(chosen, (list, tuple)):
        raise ConfigError("[baseline] descriptors must be a list of statistics")
    descriptors = tuple(s for s in STAT_ORDER if s in set(chosen))
    extras = sorted(set(chosen) - set(STAT_ORDER))
    if extras:
        raise ConfigError(f"unknown descriptor statistic {extras[0]!r} in [baseline]")

    synth_sec = dict(raw.get("synth", {}))
    synth_sec.setdefault("seed", seed)
    if "mix" in synth_sec and synth_sec["mix"] is not None:
        synth_sec["mix"] = tuple(synth_sec["mix"])
    synth = _build_section(GeneratorConfig, synth_sec, "synth")

    train_sec = dict(raw.get("train", {}))
    train_sec.setdefault("seed", seed)
    training = _build_section(TrainConfig, train_sec, "train")

    tsne_sec = dict(raw.get("tsne", {}))
    tsne_sec.setdefault("seed", seed)
    tsne_cfg = _build_section(TsneConfig, tsne_sec, "tsne")

    encoder_sec = dict(raw.get("encoder", {}))
    encoder_allowed = {f.name for f in dataclasses.fields(EncoderConfig)} - {"demo_width"}
    bad = sorted(set(encoder_sec) - encoder_allowed)
    if bad:
        raise ConfigError(f"unknown key {bad[0]!r} in [encoder]")

    return ExperimentConfig(
        pipeline=str(run.get("pipeline", "strats")),
        m_min=int(run.get("m_min", 4)),
        seed=seed,
        reduction=str(run.get("reduction", "pca")),
        clusters=int(run.get("clusters", 3)),
        min_cluster_size=int(run.get("min_cluster_size", 15)),
        train=bool(run.get("train", True)),
        params=run.get("params"),
        source=str(data.get("source", "synthetic")),
        data_dir=data.get("dir"),
        descriptors=descriptors,
        synth=synth,
        encoder_overrides=encoder_sec,
        training=training,
        tsne=tsne_cfg,
    )


# ---------------------------------------------------------------------------
# corpus loading


def load_labels(path: str | Path) -> dict[str, str]:
    """series_id -> phenotype name from a labels CSV."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"labels file not found: {p}")
    lines = p.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "series_id,phenotype":
        raise DataError(f"{p}: expected header 'series_id,phenotype'")
    out: dict[str, str] = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise DataError(f"{p}: line {i}: expected 2 fields, got {len(parts)}")
        out[parts[0]] = parts[1]
    return out


def load_corpus(
    cfg: ExperimentConfig, data_dir: Optional[str] = None
) -> tuple[dict[str, list[ObservationRow]], dict, Optional[dict[str, str]]]:
    """Observation rows, demographics, and truth labels when they exist.

    An explicit data_dir argument forces file ingestion from that directory;
    otherwise the config decides between synthetic generation and files.
    """
    if data_dir is None and cfg.source == "synthetic":
        corpus = generate_corpus(cfg.synth)
        return corpus.rows_by_patient, corpus.demographics_by_patient, dict(corpus.labels)
    directory = data_dir or cfg.data_dir
    if directory is None:
        raise ConfigError("source = 'files' requires [data] dir or a directory argument")
    d = Path(directory)
    rows = parse_observations(d / "observations.csv")
    demos = parse_demographics(d / "demographics.csv")
    labels_path = d / "labels.csv"
    labels = load_labels(labels_path) if labels_path.exists() else None
    return rows, demos, labels


def prepare_dataset(
    cfg: ExperimentConfig, data_dir: Optional[str] = None
) -> tuple[Dataset, FilterSummary, Optional[dict[str, str]]]:
    rows, demos, labels = load_corpus(cfg, data_dir)
    dataset, summary = build_dataset(rows, demos, m_min=cfg.m_min, seed=cfg.seed)
    return dataset, summary, labels


def truth_codes(ids: Sequence[str], labels: dict[str, str]) -> np.ndarray:
    """Phenotype names joined on series_id, coded as sorted-name indices."""
    code = {name: i for i, name in enumerate(sorted(set(labels.values())))}
    out = np.empty(len(ids), dtype=int)
    for i, sid in enumerate(ids):
        if sid not in labels:
            raise DataError(f"series {sid} has no ground-truth label")
        out[i] = code[labels[sid]]
    return out


# ---------------------------------------------------------------------------
# feature construction


def baseline_descriptors(
    series: VitalSeries, stats: Sequence[str] = STAT_ORDER
) -> np.ndarray:
    """Per-feature summary statistics, feature-major. A feature never observed
    in the series contributes 0 for each statistic (the standardized mean)."""
    if not series.triplets:
        raise DataError(f"series {series.series_id}: no observations")
    bad = [s for s in stats if s not in STAT_ORDER]
    if bad:
        raise ConfigError(f"unknown descriptor statistics: {bad}")
    out = []
    for feature in FeatureKind:
        vals = series.feature_values(feature)
        for stat in stats:
            if len(vals) == 0:
                out.append(0.0)
            elif stat == "min":
                out.append(float(vals.min()))
            elif stat == "max":
                out.append(float(vals.max()))
            else:
                out.append(float(vals.mean()))
    return np.array(out)


def descriptor_matrix(
    dataset: Dataset, stats: Sequence[str] = STAT_ORDER
) -> tuple[list[str], np.ndarray]:
    ordered = sorted(dataset.series, key=lambda s: s.series_id)
    ids = [s.series_id for s in ordered]
    x = np.stack([baseline_descriptors(s, stats) for s in ordered])
    return ids, x


def encode_all(
    dataset: Dataset, encoder: TripletEncoder, chunk_size: int = 64
) -> tuple[list[str], np.ndarray]:
    """Evaluation-mode encodings for every series, ordered by series_id."""
    ordered = sorted(dataset.series, key=lambda s: s.series_id)
    ids = [s.series_id for s in ordered]
    vocab = dataset.ward_vocab
    blocks = []
    with no_grad():
        for start in range(0, len(ordered), chunk_size):
            chunk = ordered[start : start + chunk_size]
            arrays = [s.arrays() for s in chunk]
            width = max(len(f) for f, _, _ in arrays)
            b = len(chunk)
            feat = np.zeros((b, width), dtype=int)
            times = np.zeros((b, width))
            values = np.zeros((b, width))
            pad = np.ones((b, width), dtype=bool)
            for i, (f, t, v) in enumerate(arrays):
                feat[i, : len(f)] = f
                times[i, : len(f)] = t
                values[i, : len(f)] = v
                pad[i, : len(f)] = False
            demo = np.stack([encode_demographics(s.demographics, vocab) for s in chunk])
            enc = encoder.encode_batch(feat, times, values, pad, demo, training=False)
            blocks.append(enc.data)
    return ids, np.vstack(blocks)


def reduce_points(
    points: np.ndarray, reduction: str, tsne_cfg: Optional[TsneConfig] = None
) -> np.ndarray:
    if reduction == "none":
        return points
    if reduction == "pca":
        dims = min(3, min(points.shape))
        model = pca_fit(points, dims)
        return pca_transform(model, points)
    if reduction == "tsne":
        emb, _ = tsne(points, tsne_cfg or TsneConfig())
        return emb
    raise ConfigError(f"unknown reduction {reduction!r}")


# ---------------------------------------------------------------------------
# evaluation and reporting


@dataclass(frozen=True)
class ReportRow:
    model: str
    set_name: str
    reduction: str
    clusters: int
    silhouettes: dict[str, Optional[float]]
    aris: dict[str, Optional[float]]

    def csv_line(self) -> str:
        def cell(v: Optional[float]) -> str:
            return "--" if v is None else f"{v:.3f}"

        cells = [self.model, self.set_name, self.reduction, str(self.clusters)]
        cells += [cell(self.silhouettes[m]) for m in METHODS]
        cells += [cell(self.aris[m]) for m in METHODS]
        return ",".join(cells)


def evaluate_clusterings(
    points: np.ndarray,
    cfg: ExperimentConfig,
    truth: Optional[np.ndarray] = None,
) -> tuple[dict[str, np.ndarray], ReportRow]:
    """All four methods on one point set; silhouette is computed in the same
    space the clustering ran in."""
    assignments = {
        "kmeans": kmeans(points, k=cfg.clusters, seed=cfg.seed).labels,
        "sc": spectral(points, k=cfg.clusters, seed=cfg.seed).labels,
        "gmm": gmm(points, k=cfg.clusters, seed=cfg.seed)[0].labels,
        "hdb": hdbscan(points, min_cluster_size=cfg.min_cluster_size).labels,
    }
    sils = {m: silhouette(points, labs) for m, labs in assignments.items()}
    aris = {
        m: (None if truth is None else adjusted_rand_index(labs, truth))
        for m, labs in assignments.items()
    }
    row = ReportRow(
        model=cfg.model_name,
        set_name=cfg.set_name,
        reduction=cfg.reduction,
        clusters=cfg.clusters,
        silhouettes=sils,
        aris=aris,
    )
    return assignments, row


def write_report(path: str | Path, rows: Sequence[ReportRow]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(REPORT_HEADER + "\n")
        for row in rows:
            fh.write(row.csv_line() + "\n")
    return p


def merge_reports(run_dirs: Sequence[str | Path], out_path: str | Path) -> Path:
    """Concatenate report.csv rows from several run directories."""
    lines: list[str] = []
    for d in run_dirs:
        p = Path(d) / "report.csv"
        if not p.exists():
            raise DataError(f"no report.csv in {d}")
        content = p.read_text(encoding="utf-8").splitlines()
        if not content or content[0] != REPORT_HEADER:
            raise DataError(f"{p}: unexpected report header")
        lines.extend(content[1:])
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(REPORT_HEADER + "\n")
        for line in lines:
            fh.write(line + "\n")
    return out


def _write_assignments(path: Path, ids: Sequence[str], labels: np.ndarray) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("series_id,label\n")
        for sid, lab in zip(ids, labels):
            fh.write(f"{sid},{int(lab)}\n")


def _write_matrix(path: Path, header: str, ids: Sequence[str], x: np.ndarray) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for sid, row in zip(ids, x):
            fh.write(sid + "," + ",".join(repr(float(v)) for v in row) + "\n")


def _write_embedding(path: Path, ids: Sequence[str], emb: np.ndarray) -> None:
    coords = np.zeros((len(emb), 3))
    coords[:, : min(3, emb.shape[1])] = emb[:, :3]
    _write_matrix(path, "series_id,x,y,z", ids, coords)


def read_encodings(path: str | Path) -> tuple[list[str], np.ndarray]:
    p = Path(path)
    if not p.exists():
        raise DataError(f"encodings file not found: {p}")
    lines = p.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("series_id,"):
        raise DataError(f"{p}: expected a 'series_id,...' header")
    width = len(lines[0].split(",")) - 1
    ids, rows = [], []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != width + 1:
            raise DataError(f"{p}: line {i}: expected {width + 1} fields")
        ids.append(parts[0])
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise DataError(f"{p}: line {i}: {exc}") from None
    if not rows:
        raise DataError(f"{p}: no data rows")
    return ids, np.array(rows)


def _emit_run_artifacts(
    out_dir: Path,
    ids: list[str],
    reduced: np.ndarray,
    assignments: dict[str, np.ndarray],
    row: ReportRow,
) -> dict[str, Path]:
    artifacts: dict[str, Path] = {}
    artifacts["report"] = write_report(out_dir / "report.csv", [row])
    for method in METHODS:
        p = out_dir / f"assignments_{method}.csv"
        _write_assignments(p, ids, assignments[method])
        artifacts[f"assignments_{method}"] = p
    emb_path = out_dir / "embedding.csv"
    _write_embedding(emb_path, ids, reduced)
    artifacts["embedding"] = emb_path
    return artifacts


def run_baseline(
    cfg: ExperimentConfig, out_dir: str | Path
) -> tuple[ReportRow, dict[str, Path]]:
    """Descriptor pipeline: ingest, summary statistics, reduce, cluster."""
    if not cfg.descriptors:
        raise ConfigError("the baseline pipeline requires at least one descriptor")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset, _, labels = prepare_dataset(cfg)
    ids, x = descriptor_matrix(dataset, cfg.descriptors)
    reduced = reduce_points(x, cfg.reduction, cfg.tsne)
    truth = truth_codes(ids, labels) if labels else None
    assignments, row = evaluate_clusterings(reduced, cfg, truth)
    row = dataclasses.replace(
        row, model="baseline-" + "-".join(cfg.descriptors)
    )
    artifacts = _emit_run_artifacts(out, ids, reduced, assignments, row)
    return row, artifacts


def run_strats(
    cfg: ExperimentConfig, out_dir: str | Path
) -> tuple[ReportRow, dict[str, Path]]:
    """Encoder pipeline: ingest, train or load, encode, reduce, cluster."""
    if not cfg.train and cfg.params is None:
        raise ConfigError("training is disabled and [run] params gives no weights file")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset, _, labels = prepare_dataset(cfg)
    artifacts: dict[str, Path] = {}

    if cfg.params is not None:
        encoder = TripletEncoder.load(cfg.params)
        width = demographic_width(dataset.ward_vocab)
        if encoder.config.demo_width != width:
            raise ConfigError(
                f"loaded encoder expects demographic width {encoder.config.demo_width},"
                f" dataset has {width}"
            )
    else:
        enc_cfg = EncoderConfig(
            demo_width=demographic_width(dataset.ward_vocab), **cfg.encoder_overrides
        )
        encoder = TripletEncoder(enc_cfg, seed=cfg.seed)
        result = Trainer(dataset, cfg.training, encoder=encoder).fit()
        encoder = result.encoder
        params_path = out / "params.bin"
        encoder.save(params_path)
        artifacts["params"] = params_path
        history_path = out / "loss_history.csv"
        write_history(history_path, result.history)
        artifacts["loss_history"] = history_path

    ids, x = encode_all(dataset, encoder)
    enc_path = out / "encodings.csv"
    _write_matrix(
        enc_path, "series_id," + ",".join(f"e{i}" for i in range(x.shape[1])), ids, x
    )
    artifacts["encodings"] = enc_path

    reduced = reduce_points(x, cfg.reduction, cfg.tsne)
    truth = truth_codes(ids, labels) if labels else None
    assignments, row = evaluate_clusterings(reduced, cfg, truth)
    row = dataclasses.replace(row, model="strats")
    artifacts.update(_emit_run_artifacts(out, ids, reduced, assignments, row))
    return row, artifacts


# ---------------------------------------------------------------------------
# scatter export


OVERLAYS = ("cluster", "gender", "phenotype")
_PALETTE = (
    "#4477aa", "#ee6677", "#228833", "#ccbb44",
    "#66ccee", "#aa3377", "#bbbbbb", "#000000",
)
NOISE_COLOR = "#999999"


def export_scatter(
    ids: Sequence[str],
    embedding: np.ndarray,
    overlay_name: str,
    overlay_values: Sequence,
    out_dir: str | Path,
) -> tuple[Path, Path]:
    """CSV plus a self-contained SVG scatter of the first two dimensions."""
    if overlay_name not in OVERLAYS:
        raise ConfigError(f"overlay must be one of {OVERLAYS}, got {overlay_name!r}")
    emb = np.asarray(embedding, dtype=float)
    if emb.ndim != 2 or emb.shape[1] not in (2, 3):
        raise DataError(f"embedding must have 2 or 3 dims, got shape {emb.shape}")
    if len(ids) != len(emb) or len(overlay_values) != len(emb):
        raise DataError("ids, embedding, and overlay values must align")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    csv_path = out / "scatter.csv"
    with csv_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("series_id,x,y,z,overlay_value\n")
        for sid, row, val in zip(ids, emb, overlay_values):
            z = repr(float(row[2])) if emb.shape[1] == 3 else "0.0"
            fh.write(f"{sid},{repr(float(row[0]))},{repr(float(row[1]))},{z},{val}\n")

    svg_path = out / "scatter.svg"
    svg_path.write_text(_scatter_svg(emb, overlay_name, overlay_values), encoding="utf-8")
    return csv_path, svg_path


def _scatter_svg(emb: np.ndarray, overlay_name: str, overlay_values: Sequence) -> str:
    width, height, margin = 640, 480, 48
    x, y = emb[:, 0], emb[:, 1]
    spanx = max(float(x.max() - x.min()), 1e-12)
    spany = max(float(y.max() - y.min()), 1e-12)

    def sx(v: float) -> float:
        return margin + (v - float(x.min())) / spanx * (width - 2 * margin)

    def sy(v: float) -> float:
        # SVG y grows downward
        return height - margin - (v - float(y.min())) / spany * (height - 2 * margin)

    distinct = sorted(set(overlay_values), key=lambda v: (str(type(v)), v))
    colors: dict = {}
    cycle = 0
    for val in distinct:
        if val == -1 or val == "-1":
            colors[val] = NOISE_COLOR
        else:
            colors[val] = _PALETTE[cycle % len(_PALETTE)]
            cycle += 1

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{margin}" y="24" font-family="sans-serif" font-size="14">'
        f"overlay: {overlay_name}</text>",
    ]
    for row, val in zip(emb, overlay_values):
        parts.append(
            f'<circle cx="{sx(row[0]):.2f}" cy="{sy(row[1]):.2f}" r="3" '
            f'fill="{colors[val]}" fill-opacity="0.75"/>'
        )
    for i, val in enumerate(distinct):
        ly = 40 + 18 * i
        parts.append(
            f'<circle cx="{width - 130}" cy="{ly}" r="5" fill="{colors[val]}"/>'
        )
        parts.append(
            f'<text x="{width - 118}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="12">{val}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
