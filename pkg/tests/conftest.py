import sys

import numpy as np
import pytest
from hypothesis import settings

from qviscosity.maps import Affine, ContractionToward, constant
from qviscosity.space import RegionSpec, Seminorm, SeminormFamily

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

ROT90 = np.array([[0.0, -1.0], [1.0, 0.0]])


def block_rotation() -> np.ndarray:
    M = np.eye(3)
    M[:2, :2] = ROT90
    return M


class Instance:
    def __init__(self, T, f, beta, Q, C, anchor=None):
        self.T, self.f, self.beta, self.Q, self.C = T, f, beta, Q, C
        self.anchor = anchor


def neg_identity_instance() -> Instance:
    """T = -I on the radius-10 ball in R^2, f = constant (3, 0)."""
    Q = SeminormFamily((Seminorm.euclidean(2),))
    return Instance(Affine(-np.eye(2), modulus=1.0), constant([3.0, 0.0]), 0.0, Q, RegionSpec.ball([0, 0], 10), [3.0, 0.0])


def block_rotation_instance() -> Instance:
    """Quarter turn in (x1, x2) plus identity on x3; f pulls toward (1, 2, 3)."""
    Q = SeminormFamily((Seminorm.euclidean(3),))
    return Instance(
        Affine(block_rotation(), modulus=1.0),
        ContractionToward([1.0, 2.0, 3.0], 0.5),
        0.5,
        Q,
        RegionSpec.ball(np.zeros(3), 10),
        [1.0, 2.0, 3.0],
    )


@pytest.fixture
def neg_identity():
    return neg_identity_instance()


@pytest.fixture
def block_rot():
    return block_rotation_instance()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for line in (results[k] for k in sorted(results)):
        terminalreporter.write_line(line)
