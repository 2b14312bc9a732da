"""Shared fixtures and CSV-writing helpers."""

from __future__ import annotations

from pathlib import Path

import pytest

OBS_HEADER = "patient_id,timestamp_hours,sbp,dbp,spo2,resp_rate,temp_c,pulse,o2_supplement"
DEMO_HEADER = "patient_id,gender,ward_type"


def write_text(path: Path, *lines: str) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def obs_csv(tmp_path):
    def _write(*data_lines: str, header: str = OBS_HEADER) -> Path:
        return write_text(tmp_path / "observations.csv", header, *data_lines)

    return _write


@pytest.fixture
def demo_csv(tmp_path):
    def _write(*data_lines: str) -> Path:
        return write_text(tmp_path / "demographics.csv", DEMO_HEADER, *data_lines)

    return _write
