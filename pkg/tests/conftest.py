import pathlib
import sys

import numpy as np
import pytest

SRC = pathlib.Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from covarsel import MarketModel, RiskParams, reduce_model, validate_model  # noqa: E402

SCENARIO_DIR = pathlib.Path(__file__).resolve().parents[1] / "scenarios"


def _pair(mu, sigma, a, b, conditioning_asset=1):
    m = validate_model(MarketModel(mu=np.array(mu, dtype=float),
                                   sigma=np.array(sigma, dtype=float),
                                   conditioning_asset=conditioning_asset,
                                   risk=RiskParams(a=a, b=b)))
    return m, reduce_model(m)


@pytest.fixture(scope="session")
def example1():
    return _pair([1, 4, 3],
                 [[1, -4 / 3, 2 / 3], [-4 / 3, 4, -1], [2 / 3, -1, 1]],
                 a=0.8, b=0.7)


@pytest.fixture(scope="session")
def example2():
    return _pair([2, 3, 1],
                 [[1, 0.2, 1], [0.2, 1, 0], [1, 0, 9]],
                 a=1.0, b=2.0)


@pytest.fixture(scope="session")
def example3():
    return _pair([1, 2, 3],
                 [[1, 1, 2], [1, 9, 0], [2, 0, 16]],
                 a=1.0, b=1.0)


def example3_at(a, b):
    return _pair([1, 2, 3], [[1, 1, 2], [1, 9, 0], [2, 0, 16]], a=a, b=b)


@pytest.fixture(scope="session")
def scenario_dir():
    return SCENARIO_DIR
