import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from qviscosity.space import (
    ConfigurationError,
    DimensionError,
    RegionSpec,
    Seminorm,
    SeminormFamily,
    family_is_separated,
    region_project,
    seminorm_eval,
    sup_seminorm,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def vec(d):
    return arrays(float, d, elements=finite)


def test_seminorm_eval_examples():
    assert seminorm_eval(Seminorm.euclidean(2), [3, 4]) == 5.0
    assert seminorm_eval(Seminorm([[1, 0]]), [2, 7]) == 2.0
    assert seminorm_eval(Seminorm([[0, 0, 1]]), [5, -3, 0]) == 0.0


def test_seminorm_dimension_mismatch():
    with pytest.raises(DimensionError):
        seminorm_eval(Seminorm.euclidean(2), [1, 2, 3])


def test_separation_examples():
    x1, x2 = Seminorm([[1, 0]], "x1"), Seminorm([[0, 1]], "x2")
    ok, K = family_is_separated(SeminormFamily((x1, x2)))
    assert ok and K.shape == (2, 0)

    ok, K = family_is_separated(SeminormFamily((x1,)))
    assert not ok
    assert K.shape == (2, 1)
    assert np.allclose(np.abs(K[:, 0]), [0, 1])


def test_separation_plane_and_axis_matches_exact_rank():
    plane = Seminorm([[1, 0, 0], [0, 1, 0]], "plane")
    axis = Seminorm([[0, 0, 1]], "axis")
    Q = SeminormFamily((plane, axis))
    exact_rank = sympy.Matrix(Q.stacked_matrix().astype(int).tolist()).rank()
    assert exact_rank == 3
    assert family_is_separated(Q)[0]


def test_sup_seminorm_examples():
    Q = SeminormFamily((Seminorm([[1, 0]], "x1"), Seminorm([[0, 1]], "x2")))
    assert sup_seminorm(Q, [2, -5]) == 5.0
    assert sup_seminorm(Q, [0, 0]) == 0.0
    Q3 = SeminormFamily((Seminorm([[1, 0, 0], [0, 1, 0]], "plane"), Seminorm([[0, 0, 1]], "axis")))
    assert sup_seminorm(Q3, [3, 4, 1]) == 5.0


def test_sup_seminorm_rejects_unseparated():
    with pytest.raises(ConfigurationError):
        sup_seminorm(SeminormFamily((Seminorm([[1, 0]]),)), [1, 1])


def test_region_project_examples():
    assert np.allclose(region_project(RegionSpec.ball([0, 0], 1), [3, 4]), [0.6, 0.8])
    assert np.allclose(region_project(RegionSpec.box([0, 0], 1), [0.5, 2]), [0.5, 1])
    inside = np.array([0.1, -0.3])
    for C in (RegionSpec.ball([0, 0], 1), RegionSpec.box([0, 0], [1, 2])):
        assert np.array_equal(region_project(C, inside), inside)


def test_region_rejects_bad_input():
    with pytest.raises(ValueError):
        RegionSpec.ball([0, 0], -1)
    with pytest.raises(ValueError):
        RegionSpec("simplex", [0, 0], 1)


@given(A=arrays(float, (2, 3), elements=finite), x=vec(3), y=vec(3), lam=finite)
def test_seminorm_axioms(A, x, y, lam):
    q = Seminorm(A)
    qx, qy = q(x), q(y)
    assert q(lam * x) == pytest.approx(abs(lam) * qx, rel=1e-12, abs=1e-12)
    scale = 1.0 + qx + qy
    assert q(x + y) <= qx + qy + 1e-12 * scale


@given(x=vec(3), y=vec(3), kind=st.sampled_from(["ball", "box"]))
def test_projection_nonexpansive_and_idempotent(x, y, kind):
    C = RegionSpec(kind, [1.0, -2.0, 0.5], 3.0 if kind == "ball" else [1.0, 2.0, 3.0])
    px, py = C.project(x), C.project(y)
    assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12 * (1 + np.linalg.norm(x - y))
    assert np.allclose(C.project(px), px, atol=1e-12)
    assert C.contains(px)


def test_separation_agrees_with_brute_force(rng):
    for _ in range(50):
        d = int(rng.integers(1, 5))
        members = tuple(
            Seminorm(rng.standard_normal((int(rng.integers(1, d + 1)), d)) * (rng.uniform() > 0.3), f"q{i}")
            for i in range(int(rng.integers(1, 3)))
        )
        Q = SeminormFamily(members)
        ok, K = family_is_separated(Q)
        if K.shape[1]:
            x = K @ rng.standard_normal(K.shape[1])
            assert all(q(x) < 1e-12 * (1 + np.linalg.norm(x)) for q in Q)
        # vectors orthogonal to the joint kernel are seen by some member
        for _ in range(5):
            v = rng.standard_normal(d)
            v -= K @ (K.T @ v)
            if np.linalg.norm(v) > 1e-6:
                assert Q.max_value(v) > 0
        assert ok == (np.linalg.matrix_rank(Q.stacked_matrix()) == d)


def test_ball_samples_are_inside(rng):
    C = RegionSpec.ball([1, 1], 2)
    assert np.all(C.contains(C.sample(rng, 1000)))
