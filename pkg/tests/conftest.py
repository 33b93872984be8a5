"""Wspólne fixtury: małe scenariusze rozwiązywane raz na sesję."""

import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "src"))
sys.path.insert(0, ROOT)

from slopeflow.core import Grid, ProblemSpec, SourceFunction  # noqa: E402
from slopeflow.steady import solve_steady  # noqa: E402


@pytest.fixture(scope="session")
def small_spec():
    """p = 3, φ = 0.3, f ≡ 0.02: warunek istnienia spełniony z zapasem."""
    return ProblemSpec(p=3.0, H=1.0, phi=0.3, source=SourceFunction.constant(0.02))


@pytest.fixture(scope="session")
def zero_spec():
    return ProblemSpec(p=3.0, H=1.0, phi=0.2, source=SourceFunction.constant(0.0))


@pytest.fixture(scope="session")
def sign_changing_source():
    return SourceFunction.from_json(
        [
            {"interval": [-1.0, -0.5], "coeffs": [0.04]},
            {"interval": [-0.5, 0.0], "coeffs": [-0.01]},
            {"interval": [0.0, 1.0], "coeffs": [0.04]},
        ]
    )


@pytest.fixture(scope="session")
def small_profile(small_spec):
    return solve_steady(small_spec, grid=Grid.uniform(1024))
