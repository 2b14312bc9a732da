"""Core data model: vital-sign features, observation triplets, series, datasets.

A series is one hospital visit. Each sampling instant contributes up to seven
(time, feature, value) triplets, one per recorded vital. Values carry raw
clinical units on ingest and standardized units after preprocessing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterable, Optional

import numpy as np


class FeatureKind(IntEnum):
    """The seven recorded vitals. Integer codes index the embedding table."""

    SBP = 0
    DBP = 1
    SPO2 = 2
    RESP_RATE = 3
    TEMP = 4
    PULSE = 5
    O2_SUPPLEMENT = 6

    @property
    def csv_column(self) -> str:
        return _CSV_COLUMNS[self]

    @property
    def is_continuous(self) -> bool:
        return self is not FeatureKind.O2_SUPPLEMENT


_CSV_COLUMNS = {
    FeatureKind.SBP: "sbp",
    FeatureKind.DBP: "dbp",
    FeatureKind.SPO2: "spo2",
    FeatureKind.RESP_RATE: "resp_rate",
    FeatureKind.TEMP: "temp_c",
    FeatureKind.PULSE: "pulse",
    FeatureKind.O2_SUPPLEMENT: "o2_supplement",
}

CONTINUOUS_FEATURES: tuple[FeatureKind, ...] = tuple(
    f for f in FeatureKind if f.is_continuous
)

N_FEATURES = len(FeatureKind)


@dataclass(frozen=True)
class Triplet:
    """One observation: time in hours since visit start, feature, value."""

    t: float
    feature: FeatureKind
    value: float


@dataclass(frozen=True)
class Demographics:
    """Static per-series attributes.

    gender is 1 for male, 0 for female, None when missing on ingest.
    imputed_gender is set exactly when a missing gender was filled in.
    """

    gender: Optional[int] = None
    imputed_gender: int = 0
    ward_type: Optional[str] = None
    ward_change: int = 0


@dataclass(frozen=True)
class VitalSeries:
    """One visit: time-ordered triplets plus demographics.

    m counts sampling instants (rows), each contributing up to 7 triplets.
    """

    series_id: str
    triplets: tuple[Triplet, ...]
    demographics: Demographics
    m: int

    def with_triplets(self, triplets: Iterable[Triplet]) -> "VitalSeries":
        return replace(self, triplets=tuple(triplets))

    def with_demographics(self, demographics: Demographics) -> "VitalSeries":
        return replace(self, demographics=demographics)

    def feature_values(self, feature: FeatureKind) -> np.ndarray:
        return np.array(
            [tr.value for tr in self.triplets if tr.feature is feature], dtype=float
        )

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Triplets as (feature codes, times, values) in stored order."""
        n = len(self.triplets)
        feat = np.empty(n, dtype=np.int64)
        times = np.empty(n, dtype=np.float64)
        values = np.empty(n, dtype=np.float64)
        for i, tr in enumerate(self.triplets):
            feat[i] = int(tr.feature)
            times[i] = tr.t
            values[i] = tr.value
        return feat, times, values


class WardVocab:
    """Ward-type code table learned from the training split.

    Seen wards get codes 0..n-1; everything else (including a missing ward)
    maps to a reserved trailing code. size counts the reserved slot.
    """

    def __init__(self, wards: Iterable[str]):
        seen: dict[str, int] = {}
        for w in wards:
            if w not in seen:
                seen[w] = len(seen)
        self._codes = seen
        self.other_code = len(seen)

    @property
    def size(self) -> int:
        return self.other_code + 1

    def code(self, ward: Optional[str]) -> int:
        if ward is None:
            return self.other_code
        return self._codes.get(ward, self.other_code)

    def known_wards(self) -> list[str]:
        return sorted(self._codes, key=self._codes.get)


@dataclass
class FeatureStats:
    """Per-feature normalization statistics from the training split."""

    mean: dict[FeatureKind, float] = field(default_factory=dict)
    std: dict[FeatureKind, float] = field(default_factory=dict)


@dataclass
class Dataset:
    """A preprocessed corpus: series, training-split statistics, split tags."""

    series: list[VitalSeries]
    feature_stats: FeatureStats
    ward_vocab: WardVocab
    split_tag: dict[str, str]

    def split(self, tag: str) -> list[VitalSeries]:
        return [s for s in self.series if self.split_tag.get(s.series_id) == tag]

    @property
    def train_series(self) -> list[VitalSeries]:
        return self.split("train")

    @property
    def val_series(self) -> list[VitalSeries]:
        return self.split("val")

    @property
    def test_series(self) -> list[VitalSeries]:
        return self.split("test")
