from pathlib import Path

import numpy as np
import pytest

from solvgeo.lie import load_algebra

CATALOG = Path(__file__).resolve().parents[1] / "src" / "solvgeo" / "catalog"


def algebra(name):
    return load_algebra(CATALOG / f"{name}.alg")


def random_spd(rng, n, spread=0.5):
    A = rng.normal(scale=spread, size=(n, n)) + np.eye(n)
    return A @ A.T + 0.1 * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=["h3", "n4", "g31iii"])
def nilpotent_name(request):
    return request.param
