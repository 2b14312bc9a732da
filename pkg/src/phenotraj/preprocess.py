"""Ingest and preprocessing: CSV parsing, visit splitting, filtering,
normalization, standardization, gender imputation, demographic encoding.

Observation CSV schema (header required)::

    patient_id,timestamp_hours,sbp,dbp,spo2,resp_rate,temp_c,pulse,o2_supplement

An empty cell is an absent measurement; o2_supplement is 0, 1, or empty. An
optional trailing ward_type column annotates the ward at each sampling
instant and is used to detect ward changes within a visit.

Demographics CSV schema::

    patient_id,gender,ward_type

with gender in {M, F, empty}.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import (
    CONTINUOUS_FEATURES,
    Dataset,
    Demographics,
    FeatureKind,
    FeatureStats,
    Triplet,
    VitalSeries,
    WardVocab,
)
from .errors import ConfigError, DataError, ParseError, SchemaError

# Clinically ideal values subtracted from raw continuous vitals before
# standardization.
OPTIMAL_VALUES: dict[FeatureKind, float] = {
    FeatureKind.TEMP: 37.0,
    FeatureKind.SPO2: 96.0,
    FeatureKind.PULSE: 70.0,
    FeatureKind.SBP: 120.0,
    FeatureKind.DBP: 80.0,
    FeatureKind.RESP_RATE: 16.0,
}

VISIT_GAP_HOURS = 48.0
MAX_SERIES_ROWS = 60

OBSERVATION_COLUMNS = ["patient_id", "timestamp_hours"] + [
    f.csv_column for f in FeatureKind
]
DEMOGRAPHICS_COLUMNS = ["patient_id", "gender", "ward_type"]


@dataclass(frozen=True)
class ObservationRow:
    """One parsed CSV row: a sampling instant with up to 7 present values."""

    line_no: int
    t: float
    values: dict[FeatureKind, float]
    ward: Optional[str] = None


def _parse_float(cell: str, line_no: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"line {line_no}: column {column!r} is not a number: {cell!r}")
    if not math.isfinite(value):
        raise ParseError(f"line {line_no}: column {column!r} is not finite: {cell!r}")
    return value


def parse_observations(path: str | Path) -> dict[str, list[ObservationRow]]:
    """Parse an observation CSV into rows grouped by patient id.

    Row order within each group follows the file. Raises SchemaError for a
    bad header and ParseError (naming the line) for malformed rows.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"observation file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header required")
        has_ward = header == OBSERVATION_COLUMNS + ["ward_type"]
        if not has_ward and header != OBSERVATION_COLUMNS:
            unknown = [c for c in header if c not in OBSERVATION_COLUMNS + ["ward_type"]]
            if unknown:
                raise SchemaError(f"{path}: unknown column(s) {unknown}")
            raise SchemaError(
                f"{path}: header must be {','.join(OBSERVATION_COLUMNS)}"
                " with optional trailing ward_type"
            )
        width = len(header)
        groups: dict[str, list[ObservationRow]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(
                    f"line {line_no}: expected {width} cells, got {len(row)}"
                )
            pid = row[0].strip()
            if not pid:
                raise ParseError(f"line {line_no}: empty patient_id")
            t = _parse_float(row[1], line_no, "timestamp_hours")
            values: dict[FeatureKind, float] = {}
            for offset, feature in enumerate(FeatureKind):
                cell = row[2 + offset].strip()
                if not cell:
                    continue
                value = _parse_float(cell, line_no, feature.csv_column)
                if feature is FeatureKind.O2_SUPPLEMENT and value not in (0.0, 1.0):
                    raise ParseError(
                        f"line {line_no}: o2_supplement must be 0 or 1, got {cell!r}"
                    )
                values[feature] = value
            ward = row[width - 1].strip() or None if has_ward else None
            groups.setdefault(pid, []).append(
                ObservationRow(line_no=line_no, t=t, values=values, ward=ward)
            )
    return groups


def parse_demographics(path: str | Path) -> dict[str, Demographics]:
    """Parse the demographics CSV into per-patient records."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"demographics file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header required")
        if header != DEMOGRAPHICS_COLUMNS:
            raise SchemaError(f"{path}: header must be {','.join(DEMOGRAPHICS_COLUMNS)}")
        records: dict[str, Demographics] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"line {line_no}: expected 3 cells, got {len(row)}")
            pid = row[0].strip()
            if not pid:
                raise ParseError(f"line {line_no}: empty patient_id")
            gender_cell = row[1].strip().upper()
            if gender_cell == "M":
                gender: Optional[int] = 1
            elif gender_cell == "F":
                gender = 0
            elif gender_cell == "":
                gender = None
            else:
                raise ParseError(
                    f"line {line_no}: gender must be M, F, or empty, got {row[1]!r}"
                )
            ward = row[2].strip() or None
            records[pid] = Demographics(gender=gender, ward_type=ward)
    return records


def _rows_to_series(
    series_id: str,
    rows: Sequence[ObservationRow],
    demographics: Demographics,
) -> VitalSeries:
    t0 = rows[0].t
    triplets: list[Triplet] = []
    m = 0
    for row in rows:
        if not row.values:
            continue  # an instant with nothing recorded is not an observation
        m += 1
        for feature in FeatureKind:
            if feature in row.values:
                triplets.append(Triplet(row.t - t0, feature, row.values[feature]))
    triplets.sort(key=lambda tr: (tr.t, int(tr.feature)))
    wards = [r.ward for r in rows if r.ward is not None]
    ward_type = wards[0] if wards else demographics.ward_type
    ward_change = 1 if len(set(wards)) > 1 else demographics.ward_change
    demo = replace(demographics, ward_type=ward_type, ward_change=ward_change)
    return VitalSeries(
        series_id=series_id, triplets=tuple(triplets), demographics=demo, m=m
    )


def split_visits(
    rows_by_patient: dict[str, list[ObservationRow]],
    demographics: Optional[dict[str, Demographics]] = None,
    gap_hours: float = VISIT_GAP_HOURS,
) -> list[VitalSeries]:
    """Split each patient's time-sorted rows into visits at gaps > gap_hours.

    Each visit's time axis restarts at zero; series ids are
    "<patient_id>:<visit_index>".
    """
    out: list[VitalSeries] = []
    for pid, rows in rows_by_patient.items():
        if not rows:
            continue
        demo = (demographics or {}).get(pid, Demographics())
        visit: list[ObservationRow] = [rows[0]]
        visit_index = 0
        for prev, cur in zip(rows, rows[1:]):
            if cur.t - prev.t > gap_hours:
                out.append(_rows_to_series(f"{pid}:{visit_index}", visit, demo))
                visit = [cur]
                visit_index += 1
            else:
                visit.append(cur)
        out.append(_rows_to_series(f"{pid}:{visit_index}", visit, demo))
    return out


@dataclass(frozen=True)
class FilterSummary:
    """Cohort summary after filtering: count plus length mean/std."""

    n: int
    length_mean: float
    length_std: float

    def __str__(self) -> str:
        return f"N={self.n}  mu={self.length_mean:.2f}  sigma={self.length_std:.2f}"


def filter_series(
    series: Sequence[VitalSeries],
    m_min: int,
    m_max: int = MAX_SERIES_ROWS,
) -> tuple[list[VitalSeries], FilterSummary]:
    """Keep series whose row count lies in [m_min, m_max]."""
    if m_min < 1:
        raise ConfigError(f"m_min must be >= 1, got {m_min}")
    kept = [s for s in series if m_min <= s.m <= m_max]
    lengths = np.array([s.m for s in kept], dtype=float)
    if len(kept):
        summary = FilterSummary(len(kept), float(lengths.mean()), float(lengths.std()))
    else:
        summary = FilterSummary(0, float("nan"), float("nan"))
    return kept, summary


def normalize_value(value: float, feature: FeatureKind) -> float:
    """Offset a raw continuous value by its clinically ideal value."""
    if not feature.is_continuous:
        raise ConfigError(f"{feature.name} is categorical and is never normalized")
    return value - OPTIMAL_VALUES[feature]


def compute_feature_stats(series: Sequence[VitalSeries]) -> FeatureStats:
    """Population mean/std per continuous feature over the given series."""
    stats = FeatureStats()
    for feature in CONTINUOUS_FEATURES:
        pooled = np.concatenate(
            [s.feature_values(feature) for s in series] or [np.array([])]
        )
        if pooled.size == 0:
            raise DataError(f"no observations of {feature.name} in the training split")
        std = float(pooled.std())
        if std <= 0.0:
            raise DataError(f"feature {feature.name} has zero standard deviation")
        stats.mean[feature] = float(pooled.mean())
        stats.std[feature] = std
    return stats


def standardize(dataset: Dataset) -> Dataset:
    """Replace continuous values by (x - mean) / std using training-split stats.

    Statistics come from the training split only; validation and test series
    reuse them. The supplemental-oxygen flag passes through untouched.
    """
    stats = compute_feature_stats(dataset.train_series)
    series_out = []
    for s in dataset.series:
        triplets = tuple(
            tr
            if not tr.feature.is_continuous
            else Triplet(
                tr.t,
                tr.feature,
                (tr.value - stats.mean[tr.feature]) / stats.std[tr.feature],
            )
            for tr in s.triplets
        )
        series_out.append(s.with_triplets(triplets))
    return Dataset(
        series=series_out,
        feature_stats=stats,
        ward_vocab=dataset.ward_vocab,
        split_tag=dataset.split_tag,
    )


def impute_gender(
    demographics: Sequence[Demographics],
    male_fraction: Optional[float] = None,
    seed: int = 0,
) -> list[Demographics]:
    """Fill missing genders with independent draws, flagging imputed entries.

    male_fraction defaults to the observed male share among non-missing
    entries of the same collection (0.5 when all are missing).
    """
    if male_fraction is None:
        known = [d.gender for d in demographics if d.gender is not None]
        male_fraction = (sum(known) / len(known)) if known else 0.5
    if not 0.0 <= male_fraction <= 1.0:
        raise ConfigError(f"male_fraction must lie in [0, 1], got {male_fraction}")
    rng = np.random.default_rng(seed)
    out = []
    for d in demographics:
        if d.gender is None:
            drawn = 1 if rng.random() < male_fraction else 0
            out.append(replace(d, gender=drawn, imputed_gender=1))
        else:
            out.append(d)
    return out


def encode_demographics(demo: Demographics, vocab: WardVocab) -> np.ndarray:
    """Numeric vector: [gender, imputed_gender, one-hot ward, ward_change]."""
    if demo.gender is None:
        raise DataError("gender missing; run impute_gender before encoding")
    vec = np.zeros(3 + vocab.size, dtype=np.float64)
    vec[0] = demo.gender
    vec[1] = demo.imputed_gender
    vec[2 + vocab.code(demo.ward_type)] = 1.0
    vec[-1] = demo.ward_change
    return vec


def decode_ward(vec: np.ndarray, vocab: WardVocab) -> int:
    """Inverse of the one-hot ward block; returns the ward code."""
    block = vec[2 : 2 + vocab.size]
    return int(np.argmax(block))


def demographic_width(vocab: WardVocab) -> int:
    return 3 + vocab.size


def assign_splits(
    series: Sequence[VitalSeries],
    seed: int,
    val_fraction: float = 0.2,
    test_fraction: float = 0.0,
) -> dict[str, str]:
    """Seeded train/val/test membership per series."""
    if val_fraction < 0 or test_fraction < 0 or val_fraction + test_fraction >= 1:
        raise ConfigError("val_fraction + test_fraction must lie in [0, 1)")
    ids = [s.series_id for s in series]
    order = np.random.default_rng(seed).permutation(len(ids))
    n_val = int(round(len(ids) * val_fraction))
    n_test = int(round(len(ids) * test_fraction))
    tags: dict[str, str] = {}
    for rank, idx in enumerate(order):
        if rank < n_val:
            tags[ids[idx]] = "val"
        elif rank < n_val + n_test:
            tags[ids[idx]] = "test"
        else:
            tags[ids[idx]] = "train"
    return tags


def build_dataset(
    rows_by_patient: dict[str, list[ObservationRow]],
    demographics_by_patient: dict[str, Demographics],
    m_min: int,
    seed: int = 0,
    val_fraction: float = 0.2,
    test_fraction: float = 0.0,
    gap_hours: float = VISIT_GAP_HOURS,
) -> tuple[Dataset, FilterSummary]:
    """Full preprocessing: sort, split visits, filter, impute, normalize,
    standardize. Returns the dataset plus the post-filter cohort summary."""
    sorted_rows = {
        pid: sorted(rows, key=lambda r: r.t) for pid, rows in rows_by_patient.items()
    }
    series = split_visits(sorted_rows, demographics_by_patient, gap_hours)
    series, summary = filter_series(series, m_min)
    if not series:
        raise DataError(f"no series with {m_min} <= m <= {MAX_SERIES_ROWS}")

    tags = assign_splits(series, seed=seed, val_fraction=val_fraction,
                         test_fraction=test_fraction)

    demos = impute_gender([s.demographics for s in series], seed=seed + 1)
    series = [s.with_demographics(d) for s, d in zip(series, demos)]

    train_wards = [
        s.demographics.ward_type
        for s in series
        if tags[s.series_id] == "train" and s.demographics.ward_type is not None
    ]
    vocab = WardVocab(train_wards)

    normalized = []
    for s in series:
        triplets = tuple(
            tr
            if not tr.feature.is_continuous
            else Triplet(tr.t, tr.feature, normalize_value(tr.value, tr.feature))
            for tr in s.triplets
        )
        normalized.append(s.with_triplets(triplets))

    dataset = Dataset(
        series=normalized,
        feature_stats=FeatureStats(),
        ward_vocab=vocab,
        split_tag=tags,
    )
    return standardize(dataset), summary


def load_dataset(
    observations_path: str | Path,
    demographics_path: str | Path,
    m_min: int,
    seed: int = 0,
    val_fraction: float = 0.2,
    test_fraction: float = 0.0,
) -> tuple[Dataset, FilterSummary]:
    """Parse the two CSVs and run build_dataset."""
    rows = parse_observations(observations_path)
    demos = parse_demographics(demographics_path)
    return build_dataset(
        rows, demos, m_min=m_min, seed=seed,
        val_fraction=val_fraction, test_fraction=test_fraction,
    )
