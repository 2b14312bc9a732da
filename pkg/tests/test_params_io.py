"""Parameter file format: round trips and corruption handling."""

from __future__ import annotations

import numpy as np
import pytest

import phenotraj.autodiff as ad
from phenotraj.errors import DataError
from phenotraj.params_io import MAGIC, load_params, save_params


def sample_params():
    rng = np.random.default_rng(1)
    return {
        "scalar": np.array(3.5),
        "vec": rng.normal(size=7),
        "mat": rng.normal(size=(4, 3)),
        "cube": rng.normal(size=(2, 3, 2)),
    }


def test_round_trip_values_and_meta(tmp_path):
    path = tmp_path / "p.params"
    meta = {"d_var": 40, "wards": ["icu", "medical"]}
    save_params(path, sample_params(), meta)
    loaded, got_meta = load_params(path)
    assert got_meta == meta
    original = sample_params()
    assert set(loaded) == set(original)
    for name in original:
        assert loaded[name].shape == original[name].shape
        assert np.array_equal(loaded[name], original[name])


def test_byte_exact_round_trip(tmp_path):
    a = tmp_path / "a.params"
    b = tmp_path / "b.params"
    save_params(a, sample_params(), {"k": 1})
    loaded, meta = load_params(a)
    save_params(b, loaded, meta)
    assert a.read_bytes() == b.read_bytes()


def test_accepts_tensors(tmp_path):
    path = tmp_path / "t.params"
    save_params(path, {"w": ad.parameter(np.ones((2, 2)))})
    loaded, _ = load_params(path)
    assert np.array_equal(loaded["w"], np.ones((2, 2)))


def test_empty_params(tmp_path):
    path = tmp_path / "e.params"
    save_params(path, {})
    loaded, meta = load_params(path)
    assert loaded == {} and meta == {}


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.params"
    path.write_bytes(b"NOT-PARAMS\nwhatever\n")
    with pytest.raises(DataError, match="magic"):
        load_params(path)


def test_bad_version(tmp_path):
    path = tmp_path / "v.params"
    path.write_bytes(MAGIC + b"version 9\n{}\n")
    with pytest.raises(DataError, match="version"):
        load_params(path)


def test_truncated_file(tmp_path):
    path = tmp_path / "p.params"
    save_params(path, sample_params())
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) - 5])
    with pytest.raises(DataError, match="truncated"):
        load_params(path)


def test_trailing_garbage(tmp_path):
    path = tmp_path / "p.params"
    save_params(path, sample_params())
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(DataError, match="trailing"):
        load_params(path)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_params(tmp_path / "absent.params")
