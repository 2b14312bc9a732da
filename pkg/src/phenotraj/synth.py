"""Synthetic vitals corpus with planted phenotype structure.

Each generated series follows one phenotype's per-feature trajectory

    value(t) = ideal + offset + slope * t + amplitude * sin(2 pi t / period) + noise

clipped to physiologic bounds. Ground-truth phenotype labels are emitted
alongside so clustering quality can be scored with ARI.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import CONTINUOUS_FEATURES, Demographics, FeatureKind
from .errors import ConfigError
from .preprocess import OPTIMAL_VALUES, ObservationRow

# Plausible clinical ranges; generated values are clipped to these.
PHYSIO_BOUNDS: dict[FeatureKind, tuple[float, float]] = {
    FeatureKind.SBP: (50.0, 250.0),
    FeatureKind.DBP: (30.0, 150.0),
    FeatureKind.SPO2: (50.0, 100.0),
    FeatureKind.RESP_RATE: (4.0, 60.0),
    FeatureKind.TEMP: (33.0, 43.0),
    FeatureKind.PULSE: (20.0, 220.0),
}

DEFAULT_WARDS = ("medical", "surgical", "icu")

# Inter-sample intervals are clipped below the 48 h visit-split threshold so
# one generated series stays one visit, and above a 36 s floor so timestamps
# rounded to 4 decimals still strictly increase.
_MAX_INTERVAL_HOURS = 47.0
_MIN_INTERVAL_HOURS = 0.01


@dataclass(frozen=True)
class FeatureTrajectory:
    """Trajectory parameters for one vital, in raw clinical units."""

    offset: float = 0.0
    slope: float = 0.0
    amplitude: float = 0.0
    period: float = 24.0
    noise_std: float = 0.0


@dataclass(frozen=True)
class PhenotypeSpec:
    """A named generative patient class."""

    name: str
    trajectories: dict[FeatureKind, FeatureTrajectory] = field(default_factory=dict)
    o2_supplement_prob: float = 0.0
    ward_weights: Optional[dict[str, float]] = None

    def trajectory(self, feature: FeatureKind) -> FeatureTrajectory:
        return self.trajectories.get(feature, FeatureTrajectory())

    def validate(self) -> None:
        for feature, tr in self.trajectories.items():
            if tr.noise_std < 0:
                raise ConfigError(f"{self.name}.{feature.name}: noise_std must be >= 0")
            if tr.period <= 0:
                raise ConfigError(f"{self.name}.{feature.name}: period must be > 0")
        if not 0.0 <= self.o2_supplement_prob <= 1.0:
            raise ConfigError(f"{self.name}: o2_supplement_prob must lie in [0, 1]")

    def value_at(self, feature: FeatureKind, t: float) -> float:
        """Noise-free trajectory value at time t, after clipping."""
        tr = self.trajectory(feature)
        raw = (
            OPTIMAL_VALUES[feature]
            + tr.offset
            + tr.slope * t
            + tr.amplitude * np.sin(2.0 * np.pi * t / tr.period)
        )
        lo, hi = PHYSIO_BOUNDS[feature]
        return float(np.clip(raw, lo, hi))


@dataclass(frozen=True)
class GeneratorConfig:
    n_series: int = 600
    mix: Optional[tuple[float, ...]] = None  # None = equal weights
    mean_interval_hours: float = 6.0
    min_rows: int = 4
    max_rows: int = 40
    missing_prob: float = 0.1
    seed: int = 0
    missing_gender_prob: float = 0.0
    ward_switch_prob: float = 0.0

    def validate(self, n_phenotypes: int) -> None:
        if self.n_series < 1:
            raise ConfigError(f"n_series: must be >= 1, got {self.n_series}")
        if self.min_rows < 1:
            raise ConfigError(f"min_rows: must be >= 1, got {self.min_rows}")
        if self.max_rows < self.min_rows:
            raise ConfigError(
                f"max_rows: must be >= min_rows, got {self.max_rows} < {self.min_rows}"
            )
        if self.mean_interval_hours <= 0:
            raise ConfigError(
                f"mean_interval_hours: must be > 0, got {self.mean_interval_hours}"
            )
        if not 0.0 <= self.missing_prob < 1.0:
            raise ConfigError(f"missing_prob: must lie in [0, 1), got {self.missing_prob}")
        if not 0.0 <= self.missing_gender_prob <= 1.0:
            raise ConfigError("missing_gender_prob: must lie in [0, 1]")
        if not 0.0 <= self.ward_switch_prob <= 1.0:
            raise ConfigError("ward_switch_prob: must lie in [0, 1]")
        if self.mix is not None:
            if len(self.mix) != n_phenotypes:
                raise ConfigError(
                    f"mix: {len(self.mix)} weights for {n_phenotypes} phenotypes"
                )
            if any(w < 0 for w in self.mix):
                raise ConfigError("mix: weights must be non-negative")
            if abs(sum(self.mix) - 1.0) > 1e-12:
                raise ConfigError(f"mix: weights must sum to 1, got {sum(self.mix)}")

    def weights(self, n_phenotypes: int) -> np.ndarray:
        if self.mix is None:
            return np.full(n_phenotypes, 1.0 / n_phenotypes)
        return np.asarray(self.mix, dtype=float)


def default_phenotypes() -> list[PhenotypeSpec]:
    """The three built-in classes: stable, deteriorating, febrile."""
    base_noise = {
        FeatureKind.SBP: 5.0,
        FeatureKind.DBP: 4.0,
        FeatureKind.SPO2: 1.0,
        FeatureKind.RESP_RATE: 1.0,
        FeatureKind.TEMP: 0.2,
        FeatureKind.PULSE: 3.0,
    }

    def plain(**overrides: FeatureTrajectory) -> dict[FeatureKind, FeatureTrajectory]:
        out = {
            f: FeatureTrajectory(noise_std=base_noise[f]) for f in CONTINUOUS_FEATURES
        }
        for name, tr in overrides.items():
            out[FeatureKind[name]] = tr
        return out

    stable = PhenotypeSpec(
        name="stable",
        trajectories=plain(),
        o2_supplement_prob=0.05,
        ward_weights={"medical": 0.6, "surgical": 0.3, "icu": 0.1},
    )
    deteriorating = PhenotypeSpec(
        name="deteriorating",
        trajectories=plain(
            PULSE=FeatureTrajectory(slope=2.0, noise_std=base_noise[FeatureKind.PULSE]),
            RESP_RATE=FeatureTrajectory(
                slope=0.5, noise_std=base_noise[FeatureKind.RESP_RATE]
            ),
            SBP=FeatureTrajectory(slope=-1.5, noise_std=base_noise[FeatureKind.SBP]),
        ),
        o2_supplement_prob=0.6,
        ward_weights={"medical": 0.2, "surgical": 0.3, "icu": 0.5},
    )
    febrile = PhenotypeSpec(
        name="febrile",
        trajectories=plain(
            TEMP=FeatureTrajectory(
                offset=1.8, amplitude=0.6, period=24.0,
                noise_std=base_noise[FeatureKind.TEMP],
            ),
            PULSE=FeatureTrajectory(
                offset=25.0, noise_std=base_noise[FeatureKind.PULSE]
            ),
        ),
        o2_supplement_prob=0.15,
        ward_weights={"medical": 0.7, "surgical": 0.2, "icu": 0.1},
    )
    return [stable, deteriorating, febrile]


@dataclass
class SynthCorpus:
    """Generated corpus in the ingest schema plus ground-truth labels."""

    rows_by_patient: dict[str, list[ObservationRow]]
    demographics_by_patient: dict[str, Demographics]
    labels: dict[str, str]  # series_id -> phenotype name

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        obs_path = out / "observations.csv"
        demo_path = out / "demographics.csv"
        labels_path = out / "labels.csv"

        feature_cols = [f.csv_column for f in FeatureKind]
        with obs_path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("patient_id,timestamp_hours," + ",".join(feature_cols) + ",ward_type\n")
            for pid, rows in self.rows_by_patient.items():
                for row in rows:
                    cells = [pid, f"{row.t:.4f}"]
                    for feature in FeatureKind:
                        if feature in row.values:
                            v = row.values[feature]
                            cells.append(
                                f"{int(v)}" if feature is FeatureKind.O2_SUPPLEMENT
                                else f"{v:.4f}"
                            )
                        else:
                            cells.append("")
                    cells.append(row.ward or "")
                    fh.write(",".join(cells) + "\n")

        with demo_path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("patient_id,gender,ward_type\n")
            for pid, demo in self.demographics_by_patient.items():
                gender = {1: "M", 0: "F", None: ""}[demo.gender]
                fh.write(f"{pid},{gender},{demo.ward_type or ''}\n")

        with labels_path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("series_id,phenotype\n")
            for sid, name in self.labels.items():
                fh.write(f"{sid},{name}\n")

        return {"observations": obs_path, "demographics": demo_path, "labels": labels_path}


def _round4(x: float) -> float:
    return float(f"{x:.4f}")


def generate_corpus(
    config: GeneratorConfig,
    phenotypes: Optional[Sequence[PhenotypeSpec]] = None,
) -> SynthCorpus:
    """Draw a corpus from the phenotype mix. Deterministic under the seed.

    Values are rounded to 4 decimals at generation time so the in-memory
    corpus and its CSV serialization are the same numbers.
    """
    if phenotypes is None:
        phenotypes = default_phenotypes()
    config.validate(len(phenotypes))
    for spec in phenotypes:
        spec.validate()
    weights = config.weights(len(phenotypes))

    rng = np.random.default_rng(config.seed)
    rows_by_patient: dict[str, list[ObservationRow]] = {}
    demographics: dict[str, Demographics] = {}
    labels: dict[str, str] = {}

    for idx in range(config.n_series):
        pid = f"P{idx:05d}"
        spec = phenotypes[rng.choice(len(phenotypes), p=weights)]

        m = int(rng.integers(config.min_rows, config.max_rows + 1))
        intervals = np.clip(
            rng.exponential(config.mean_interval_hours, size=m),
            _MIN_INTERVAL_HOURS,
            _MAX_INTERVAL_HOURS,
        )
        times = np.cumsum(intervals)

        if spec.ward_weights:
            wards = list(spec.ward_weights)
            ward = wards[rng.choice(len(wards), p=np.asarray(list(spec.ward_weights.values())))]
        else:
            ward = DEFAULT_WARDS[rng.choice(len(DEFAULT_WARDS))]
        switch_row = None
        if config.ward_switch_prob > 0 and rng.random() < config.ward_switch_prob and m > 1:
            switch_row = int(rng.integers(1, m))
            pool = [w for w in DEFAULT_WARDS if w != ward] or [ward]
            switched_ward = pool[rng.choice(len(pool))]

        if rng.random() < config.missing_gender_prob:
            gender: Optional[int] = None
        else:
            gender = int(rng.random() < 0.5)
        demographics[pid] = Demographics(gender=gender, ward_type=ward)

        rows: list[ObservationRow] = []
        for i, t in enumerate(times):
            values: dict[FeatureKind, float] = {}
            for feature in CONTINUOUS_FEATURES:
                tr = spec.trajectory(feature)
                noise = rng.normal(0.0, tr.noise_std) if tr.noise_std > 0 else 0.0
                lo, hi = PHYSIO_BOUNDS[feature]
                values[feature] = _round4(
                    float(np.clip(spec.value_at(feature, float(t)) + noise, lo, hi))
                )
            values[FeatureKind.O2_SUPPLEMENT] = float(
                rng.random() < spec.o2_supplement_prob
            )
            drop = rng.random(len(FeatureKind)) < config.missing_prob
            kept = {
                f: v for (f, v), d in zip(values.items(), drop) if not d
            }
            if not kept:  # never emit a fully empty sampling instant
                keep_one = list(values)[rng.choice(len(values))]
                kept = {keep_one: values[keep_one]}
            row_ward = ward
            if switch_row is not None and i >= switch_row:
                row_ward = switched_ward
            rows.append(
                ObservationRow(line_no=0, t=_round4(float(t)), values=kept, ward=row_ward)
            )
        rows_by_patient[pid] = rows
        labels[f"{pid}:0"] = spec.name

    return SynthCorpus(
        rows_by_patient=rows_by_patient,
        demographics_by_patient=demographics,
        labels=labels,
    )
