"""Shared fixtures: seeded samples, CSV files and settings."""

import numpy as np
import pytest

from app.config import Settings
from app.models.domain import Sample, SnParams
from app.services.skew_normal import sample as draw_sample


@pytest.fixture
def skewed_sample() -> Sample:
    """n=300 draws from SN(0, 1, 2)."""
    return draw_sample(SnParams(0.0, 1.0, 2.0), 300, rng_seed=20240601)


@pytest.fixture
def small_sample() -> Sample:
    return draw_sample(SnParams(1.0, 2.0, 1.5), 120, rng_seed=7)


@pytest.fixture
def settings() -> Settings:
    return Settings()


@pytest.fixture
def csv_path(tmp_path, skewed_sample):
    """Two-column CSV whose second column holds the skewed sample."""
    path = tmp_path / "data.csv"
    lines = ["id,value"]
    lines += [f"{i},{v!r}" for i, v in enumerate(skewed_sample.values.tolist())]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
