import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from qviscosity.duality import (
    DualFunctional,
    PreconditionError,
    check_directional_lemma,
    check_subgradient_inequality,
    dual_seminorm,
    duality_map,
)
from qviscosity.properties import random_seminorm
from qviscosity.space import Seminorm

E2 = Seminorm.euclidean(2)
X1 = Seminorm([[1, 0]], "x1")

finite = st.floats(-100, 100, allow_nan=False)


def brute_dual(q, j, n=200_001):
    """sup |<y, j>| over q(y) <= 1 in R^2, by sweeping directions (finite case)."""
    th = np.linspace(0, 2 * np.pi, n)
    Y = np.stack([np.cos(th), np.sin(th)], axis=1)
    qy = q(Y)
    keep = qy > 1e-9
    return float(np.max(np.abs(Y[keep] @ j) / qy[keep]))


def test_dual_seminorm_examples():
    assert dual_seminorm(X1, DualFunctional(np.array([2.0, 0.0]))) == pytest.approx(2.0)
    assert brute_dual(X1, np.array([2.0, 0.0])) == pytest.approx(2.0, rel=1e-9)
    assert dual_seminorm(E2, [3, 4]) == pytest.approx(5.0)
    assert math.isinf(dual_seminorm(X1, [0, 1]))


def test_dual_seminorm_unbounded_direction_grows():
    # y = (0, s) has q(y) = 0 and <y, j> = s, so the sup is unbounded
    j = np.array([0.0, 1.0])
    assert max(abs(np.array([0.0, s]) @ j) for s in (1, 1e3, 1e6)) == 1e6


def test_duality_map_examples():
    j = duality_map(E2, [3, 4])
    assert np.allclose(j.riesz, [3, 4]) and j.pair([3, 4]) == pytest.approx(25)

    j = duality_map(X1, [2, 7])
    assert np.allclose(j.riesz, [2, 0])
    assert j.pair([2, 7]) == pytest.approx(4.0)
    assert dual_seminorm(X1, j) == pytest.approx(2.0)

    j = duality_map(Seminorm([[0, 0, 1]]), [5, -3, 0])
    assert np.array_equal(j.riesz, np.zeros(3))


def test_directional_lemma_examples():
    ts = np.linspace(0.05, 3, 60)
    r = check_directional_lemma(E2, [1, 0], [0, 1], ts)
    assert r.pairing == 0 and r.growth_holds and r.pairing_holds and r.consistent
    assert r.min_growth == pytest.approx(math.sqrt(1 + 0.05**2) - 1)

    r = check_directional_lemma(E2, [1, 0], [1, 0], ts)
    assert r.pairing == 1 and r.growth_holds and r.consistent

    r = check_directional_lemma(E2, [1, 0], [-1, 0], [0.5])
    assert r.pairing == -1 and r.min_growth == pytest.approx(-0.5)
    assert not r.growth_holds and not r.pairing_holds and r.consistent


def test_directional_lemma_requires_nonzero():
    with pytest.raises(PreconditionError):
        check_directional_lemma(X1, [0, 3], [1, 0], [1.0])


def test_subgradient_examples():
    q = Seminorm([[1.0]])
    assert check_subgradient_inequality(E2, [1, 2], [1, 2]) == 0
    assert check_subgradient_inequality(q, [3], [1]) == pytest.approx(4)
    assert check_subgradient_inequality(q, [0], [1]) == pytest.approx(1)


@given(A=arrays(float, (2, 3), elements=finite), x=arrays(float, 3, elements=finite))
def test_defining_identities(A, x):
    q = Seminorm(A)
    qx = q(x)
    j = duality_map(q, x)
    assert abs(j.pair(x) - qx**2) <= 1e-10 * (1 + qx**2)
    assert abs(dual_seminorm(q, j) - qx) <= 1e-8 * (1 + qx)
    assert np.array_equal(duality_map(q, -x).riesz, -j.riesz)


@given(A=arrays(float, (2, 3), elements=finite), x=arrays(float, 3, elements=finite), y=arrays(float, 3, elements=finite))
def test_subgradient_slack_equals_squared_gap(A, x, y):
    q = Seminorm(A)
    slack = check_subgradient_inequality(q, x, y)
    scale = 1 + q(x) ** 2 + q(y) ** 2
    assert slack >= -1e-10 * scale
    assert slack == pytest.approx(q(x - y) ** 2, abs=1e-9 * scale)


def test_duality_map_is_unique(rng):
    """Brute force over j' = J_q x + delta with <x, delta> = 0 (so the pairing
    identity holds): any j' that also meets q*(j') = q(x) must equal J_q x."""
    hits = 0
    for _ in range(200):
        d = int(rng.integers(1, 4))
        q = random_seminorm(rng, d)
        x = rng.standard_normal(d)
        qx = q(x)
        if qx < 1e-3:
            continue
        j = duality_map(q, x).riesz
        V = np.linalg.svd(q.matrix)[2][: np.linalg.matrix_rank(q.matrix)]
        for _ in range(20):
            # alternate between row-space-only perturbations and generic ones
            raw = rng.standard_normal(d)
            delta = V.T @ (V @ raw) if rng.uniform() < 0.5 else raw
            delta -= x * (x @ delta) / (x @ x)
            size = np.linalg.norm(delta)
            if size < 1e-9:
                continue
            delta *= 10.0 ** rng.uniform(-3, 0) / size
            jd = dual_seminorm(q, j + delta)
            if abs(jd - qx) <= 1e-12 * (1 + qx):
                hits += 1
                assert np.linalg.norm(delta) <= 1e-8
    assert hits >= 0


def test_duality_map_weak_continuity(rng):
    for _ in range(50):
        d = int(rng.integers(1, 5))
        q = random_seminorm(rng, d)
        x, h = rng.standard_normal((2, d))
        Jx = duality_map(q, x).riesz
        L = np.linalg.norm(q.matrix.T @ q.matrix, 2)
        for k in range(0, 40, 4):
            xk = x + 2.0**-k * h
            Jk = duality_map(q, xk).riesz
            for i in range(d):
                # <e_i, J x_k> - <e_i, J x> is linear in the perturbation
                assert abs(Jk[i] - Jx[i]) <= L * 2.0**-k * np.linalg.norm(h) + 1e-12
