"""Seeded randomized property batteries for the duality calculus."""

from __future__ import annotations

import numpy as np

from .duality import (
    check_directional_lemma,
    check_subgradient_inequality,
    dual_seminorm,
    duality_map,
    subgradient_tolerance,
)
from .space import Seminorm

DIMS = (1, 2, 3, 5)


def random_seminorm(rng: np.random.Generator, d: int, label: str = "q") -> Seminorm:
    """Gaussian matrix with 1..d+1 rows, so rank-deficient seminorms appear."""
    rows = int(rng.integers(1, d + 2))
    return Seminorm(rng.standard_normal((rows, d)), label)


def duality_identities(n: int = 10_000, seed: int = 0, dims=DIMS) -> dict:
    rng = np.random.default_rng(seed)
    worst_pair = worst_dual = 0.0
    fails = 0
    for _ in range(n):
        d = int(rng.choice(dims))
        q = random_seminorm(rng, d)
        x = rng.standard_normal(d) * 10.0 ** rng.uniform(-3, 3)
        qx = q(x)
        j = duality_map(q, x)
        e_pair = abs(j.pair(x) - qx**2) / (1.0 + qx**2)
        e_dual = abs(dual_seminorm(q, j) - qx) / (1.0 + qx)
        worst_pair, worst_dual = max(worst_pair, e_pair), max(worst_dual, e_dual)
        fails += (e_pair > 1e-10) or (e_dual > 1e-8)
    return {"cases": n, "failures": int(fails), "worst_pairing_rel": worst_pair, "worst_dual_rel": worst_dual}


def subgradient_battery(n: int = 10_000, seed: int = 1, dims=DIMS) -> dict:
    rng = np.random.default_rng(seed)
    worst = np.inf
    fails = cases = 0
    while cases < n:
        d = int(rng.choice(dims))
        q = random_seminorm(rng, d)
        x, y = rng.standard_normal((2, d)) * 10.0 ** rng.uniform(-2, 2)
        if q(y) == 0.0:
            continue
        cases += 1
        slack = check_subgradient_inequality(q, x, y)
        worst = min(worst, slack / (1.0 + q(x) ** 2 + q(y) ** 2))
        fails += slack < -subgradient_tolerance(q, x, y)
    return {"cases": cases, "failures": int(fails), "worst_scaled_slack": float(worst)}


def directional_battery(n: int = 2_000, seed: int = 2, dims=DIMS) -> dict:
    rng = np.random.default_rng(seed)
    t_grid = np.logspace(-8, 2, 60)
    fails = skipped = 0
    for _ in range(n):
        d = int(rng.choice(dims))
        q = random_seminorm(rng, d)
        x, y = rng.standard_normal((2, d))
        if q(x) == 0.0:
            skipped += 1
            continue
        rep = check_directional_lemma(q, x, y, t_grid)
        fails += not rep.consistent
    return {"cases": n - skipped, "failures": int(fails)}


def run_property_suite(seed: int = 0, n_samples: int = 10_000) -> dict:
    out = {
        "duality_identities": duality_identities(n_samples, seed),
        "subgradient_inequality": subgradient_battery(n_samples, seed + 1),
        "directional_lemma": directional_battery(max(n_samples // 5, 1), seed + 2),
    }
    out["passed"] = all(v["failures"] == 0 for v in out.values())
    return out
