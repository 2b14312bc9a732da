"""Synthetic corpus generator: trajectories, determinism, separability."""

from __future__ import annotations

import math

import numpy as np
import pytest

from phenotraj.data import CONTINUOUS_FEATURES, FeatureKind, N_FEATURES
from phenotraj.errors import ConfigError
from phenotraj.preprocess import OPTIMAL_VALUES
from phenotraj.synth import (
    PHYSIO_BOUNDS,
    FeatureTrajectory,
    GeneratorConfig,
    PhenotypeSpec,
    default_phenotypes,
    generate_corpus,
)

# ---------------------------------------------------------------------------
# Oracles.


def trajectory_value(ideal, offset, slope, amplitude, period, t):
    """The generative formula, evaluated independently."""
    return ideal + offset + slope * t + amplitude * math.sin(2 * math.pi * t / period)


def per_series_mean_vectors(corpus):
    """One 7-vector per series: per-feature mean of observed raw values.

    A feature never observed in a series falls back to the corpus-wide mean
    of that feature, a phenotype-neutral value.
    """
    sums = np.zeros(N_FEATURES)
    counts = np.zeros(N_FEATURES)
    for rows in corpus.rows_by_patient.values():
        for row in rows:
            for f, v in row.values.items():
                sums[int(f)] += v
                counts[int(f)] += 1
    global_mean = sums / np.maximum(counts, 1)

    vectors, names = [], []
    for pid, rows in corpus.rows_by_patient.items():
        s = np.zeros(N_FEATURES)
        c = np.zeros(N_FEATURES)
        for row in rows:
            for f, v in row.values.items():
                s[int(f)] += v
                c[int(f)] += 1
        vec = np.where(c > 0, s / np.maximum(c, 1), global_mean)
        vectors.append(vec)
        names.append(corpus.labels[f"{pid}:0"])
    return np.array(vectors), names


def nearest_centroid_accuracy(vectors, names):
    labels = sorted(set(names))
    centroids = np.array(
        [vectors[[n == lab for n in names]].mean(axis=0) for lab in labels]
    )
    dists = np.linalg.norm(vectors[:, None, :] - centroids[None, :, :], axis=2)
    predicted = [labels[i] for i in dists.argmin(axis=1)]
    return np.mean([p == n for p, n in zip(predicted, names)])


# ---------------------------------------------------------------------------


def flat_phenotype(name="flat", **kwargs) -> PhenotypeSpec:
    return PhenotypeSpec(
        name=name,
        trajectories={f: FeatureTrajectory() for f in CONTINUOUS_FEATURES},
        **kwargs,
    )


class TestGenerateCorpus:
    def test_degenerate_generator_hits_baselines(self):
        config = GeneratorConfig(
            n_series=1, min_rows=5, max_rows=5, missing_prob=0.0, seed=0
        )
        corpus = generate_corpus(config, [flat_phenotype()])
        (rows,) = corpus.rows_by_patient.values()
        assert len(rows) == 5
        for row in rows:
            for f in CONTINUOUS_FEATURES:
                assert row.values[f] == OPTIMAL_VALUES[f]
            assert row.values[FeatureKind.O2_SUPPLEMENT] == 0.0

    def test_same_seed_bit_identical(self, tmp_path):
        config = GeneratorConfig(n_series=25, seed=42)
        a = generate_corpus(config)
        b = generate_corpus(config)
        assert a.rows_by_patient == b.rows_by_patient
        assert a.demographics_by_patient == b.demographics_by_patient
        assert a.labels == b.labels
        pa = a.write(tmp_path / "a")
        pb = b.write(tmp_path / "b")
        for key in pa:
            assert pa[key].read_bytes() == pb[key].read_bytes()

    def test_determinism_across_three_seeds(self):
        for seed in (1, 2, 3):
            config = GeneratorConfig(n_series=10, seed=seed)
            assert generate_corpus(config).rows_by_patient == generate_corpus(
                config
            ).rows_by_patient

    def test_separated_phenotypes_centroid_classifier(self):
        # baselines differ by >= 4 noise-std in at least two features per pair
        noise = {
            FeatureKind.SBP: 5.0, FeatureKind.DBP: 4.0, FeatureKind.SPO2: 1.0,
            FeatureKind.RESP_RATE: 1.0, FeatureKind.TEMP: 0.2, FeatureKind.PULSE: 3.0,
        }

        def spec(name, offsets):
            return PhenotypeSpec(
                name=name,
                trajectories={
                    f: FeatureTrajectory(offset=offsets.get(f, 0.0), noise_std=noise[f])
                    for f in CONTINUOUS_FEATURES
                },
            )

        phenos = [
            spec("a", {}),
            spec("b", {FeatureKind.PULSE: 20.0, FeatureKind.SBP: -25.0}),
            spec("c", {FeatureKind.TEMP: 2.0, FeatureKind.RESP_RATE: 6.0}),
        ]
        corpus = generate_corpus(GeneratorConfig(n_series=600, seed=17), phenos)
        vectors, names = per_series_mean_vectors(corpus)
        assert nearest_centroid_accuracy(vectors, names) >= 0.95

    def test_timestamps_strictly_increase(self):
        corpus = generate_corpus(GeneratorConfig(n_series=50, seed=6))
        for rows in corpus.rows_by_patient.values():
            times = [row.t for row in rows]
            assert all(b > a for a, b in zip(times, times[1:]))

    def test_values_within_physiologic_bounds(self):
        # strong slopes force clipping into play
        ramp = PhenotypeSpec(
            name="ramp",
            trajectories={
                f: FeatureTrajectory(slope=3.0, noise_std=2.0)
                for f in CONTINUOUS_FEATURES
            },
            o2_supplement_prob=0.5,
        )
        corpus = generate_corpus(
            GeneratorConfig(n_series=40, seed=13, max_rows=40), [ramp]
        )
        for rows in corpus.rows_by_patient.values():
            for row in rows:
                for f, v in row.values.items():
                    if f is FeatureKind.O2_SUPPLEMENT:
                        assert v in (0.0, 1.0)
                    else:
                        lo, hi = PHYSIO_BOUNDS[f]
                        assert lo <= v <= hi

    def test_label_count_matches_series_count(self, tmp_path):
        corpus = generate_corpus(GeneratorConfig(n_series=33, seed=2))
        assert len(corpus.labels) == 33
        paths = corpus.write(tmp_path)
        lines = paths["labels"].read_text().strip().splitlines()
        assert len(lines) == 34  # header + one row per series

    def test_row_guard_never_emits_empty_instants(self):
        corpus = generate_corpus(
            GeneratorConfig(n_series=60, seed=3, missing_prob=0.9)
        )
        for rows in corpus.rows_by_patient.values():
            for row in rows:
                assert len(row.values) >= 1

    def test_row_counts_respect_bounds(self):
        config = GeneratorConfig(n_series=80, min_rows=4, max_rows=40, seed=9)
        corpus = generate_corpus(config)
        for rows in corpus.rows_by_patient.values():
            assert 4 <= len(rows) <= 40

    def test_csv_round_trip_preserves_values(self, tmp_path):
        from phenotraj.preprocess import parse_demographics, parse_observations

        corpus = generate_corpus(GeneratorConfig(n_series=12, seed=14))
        paths = corpus.write(tmp_path)
        parsed = parse_observations(paths["observations"])
        assert set(parsed) == set(corpus.rows_by_patient)
        for pid, rows in corpus.rows_by_patient.items():
            got = parsed[pid]
            assert len(got) == len(rows)
            for r_in, r_out in zip(rows, got):
                assert r_out.t == r_in.t
                assert r_out.values == r_in.values
                assert r_out.ward == r_in.ward
        demos = parse_demographics(paths["demographics"])
        for pid, demo in corpus.demographics_by_patient.items():
            assert demos[pid].gender == demo.gender
            assert demos[pid].ward_type == demo.ward_type


class TestConfigValidation:
    def test_bad_mix_sum(self):
        config = GeneratorConfig(n_series=5, mix=(0.5, 0.4))
        with pytest.raises(ConfigError, match="mix"):
            generate_corpus(config, [flat_phenotype("a"), flat_phenotype("b")])

    def test_mix_length_mismatch(self):
        config = GeneratorConfig(n_series=5, mix=(1.0,))
        with pytest.raises(ConfigError, match="mix"):
            generate_corpus(config, [flat_phenotype("a"), flat_phenotype("b")])

    def test_negative_weight(self):
        config = GeneratorConfig(n_series=5, mix=(1.5, -0.5))
        with pytest.raises(ConfigError, match="mix"):
            generate_corpus(config, [flat_phenotype("a"), flat_phenotype("b")])

    def test_zero_series(self):
        with pytest.raises(ConfigError, match="n_series"):
            generate_corpus(GeneratorConfig(n_series=0), [flat_phenotype()])

    def test_min_rows(self):
        with pytest.raises(ConfigError, match="min_rows"):
            generate_corpus(GeneratorConfig(min_rows=0), [flat_phenotype()])

    def test_max_below_min(self):
        with pytest.raises(ConfigError, match="max_rows"):
            generate_corpus(
                GeneratorConfig(min_rows=10, max_rows=5), [flat_phenotype()]
            )

    def test_bad_interval(self):
        with pytest.raises(ConfigError, match="mean_interval_hours"):
            generate_corpus(
                GeneratorConfig(mean_interval_hours=0.0), [flat_phenotype()]
            )

    def test_bad_missing_prob(self):
        with pytest.raises(ConfigError, match="missing_prob"):
            generate_corpus(GeneratorConfig(missing_prob=1.0), [flat_phenotype()])

    def test_negative_noise_rejected(self):
        bad = PhenotypeSpec(
            name="bad",
            trajectories={FeatureKind.PULSE: FeatureTrajectory(noise_std=-1.0)},
        )
        with pytest.raises(ConfigError, match="noise_std"):
            generate_corpus(GeneratorConfig(n_series=1), [bad])


class TestDefaultPhenotypes:
    def test_stable_temperature_constant(self):
        stable = default_phenotypes()[0]
        assert stable.name == "stable"
        for t in (0.0, 5.0, 100.0):
            assert stable.value_at(FeatureKind.TEMP, t) == 37.0

    def test_deteriorating_pulse_trajectory(self):
        det = default_phenotypes()[1]
        assert det.name == "deteriorating"
        tr = det.trajectory(FeatureKind.PULSE)
        expected = trajectory_value(70.0, tr.offset, tr.slope, tr.amplitude, tr.period, 10.0)
        assert expected == 90.0
        assert det.value_at(FeatureKind.PULSE, 10.0) == pytest.approx(90.0)

    def test_febrile_oscillation(self):
        feb = default_phenotypes()[2]
        assert feb.name == "febrile"
        tr = feb.trajectory(FeatureKind.TEMP)
        t = 6.0
        expected = trajectory_value(37.0, tr.offset, tr.slope, tr.amplitude, tr.period, t)
        assert feb.value_at(FeatureKind.TEMP, t) == pytest.approx(expected)
        assert tr.amplitude > 0

    def test_specs_pairwise_distinct_in_two_features(self):
        phenos = default_phenotypes()
        assert len(phenos) == 3
        for i in range(3):
            for j in range(i + 1, 3):
                differing = 0
                for f in CONTINUOUS_FEATURES:
                    a, b = phenos[i].trajectory(f), phenos[j].trajectory(f)
                    if (a.offset, a.slope) != (b.offset, b.slope):
                        differing += 1
                assert differing >= 2, (phenos[i].name, phenos[j].name)
