"""Sunny Q-nonexpansive retraction onto Fix(T): construction and audits.

``P x`` is estimated as the limit of the anchor scheme
``z_n = x/n + (1 - 1/n) T z_n``, which is the viscosity scheme with the
constant map ``f = x`` (``beta = 0``).  The audits check the variational
inequality ``<x - Px, J_q(y - Px)> <= 0`` on sampled fixed points ``y``,
the sunny property along the ray ``Px + t (x - Px)``, and agreement with a
second construction under a different step-size schedule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .duality import duality_pairing
from .maps import MapSpec, constant, fixed_set_oracle
from .space import RegionSpec, SeminormFamily, as_vector
from .viscosity import (
    DEFAULT_TOL_INNER,
    ImplicitTrajectory,
    Schedule,
    StoppingRule,
    run_implicit_scheme,
)

DEFAULT_LENGTH = 40
VI_TOL = 1e-6
SUNNY_TOL = 1e-6
UNIQUE_TOL = 1e-6


@dataclass
class RetractionEstimate:
    anchor: np.ndarray
    image: np.ndarray
    trajectory: ImplicitTrajectory
    reliable: bool
    vi_max_violation: dict[str, float] | None = None


def anchor_schedule(length: int = DEFAULT_LENGTH) -> Schedule:
    # indices n = 2, 4, 8, ...: a subsequence of the anchor sequence
    return Schedule("anchor", length=length, sampling="geometric")


def estimate_retraction(
    T: MapSpec,
    x,
    Q: SeminormFamily,
    C: RegionSpec,
    schedule_length: int = DEFAULT_LENGTH,
    tol_inner: float = DEFAULT_TOL_INNER,
    stop: StoppingRule = StoppingRule(),
    schedule: Schedule | None = None,
) -> RetractionEstimate:
    x = as_vector(x, Q.dim)
    sched = schedule or anchor_schedule(schedule_length)
    # start from x: each z_n is unique, so the start only affects inner work
    traj = run_implicit_scheme(T, constant(x), 0.0, sched, Q, C, tol_inner, stop, z0=x)
    image = traj.limit_estimate if traj.steps else x
    return RetractionEstimate(x, image, traj, traj.converged)


@dataclass
class VIReport:
    max_pairing: dict[str, float]
    tolerance: float
    n_samples: int

    @property
    def status(self) -> str:
        if self.n_samples == 0:
            return "inconclusive"
        return "pass" if max(self.max_pairing.values()) <= self.tolerance else "fail"


def check_variational_inequality(Px, x, fix_samples, Q: SeminormFamily, tol: float = VI_TOL) -> VIReport:
    """Largest ``<x - Px, J_q(y - Px)>`` over samples ``y`` and seminorms ``q``.

    The pass threshold is ``tol * (1 + max q(x - Px) q(y - Px))``.
    """
    Px, x = as_vector(Px, Q.dim), as_vector(x, Q.dim)
    Y = np.asarray(fix_samples, dtype=float).reshape(-1, Q.dim)
    if len(Y) == 0:
        return VIReport({q.label: float("nan") for q in Q}, tol, 0)
    out, scale = {}, 0.0
    for q in Q:
        W = Y - Px
        out[q.label] = float(np.max(duality_pairing(q, x - Px, W)))
        scale = max(scale, float(q(x - Px)) * float(np.max(q(W))))
    return VIReport(out, tol * (1.0 + scale), len(Y))


def sample_fixed_set(T: MapSpec, C: RegionSpec, n: int = 100, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return fixed_set_oracle(T).sample(rng, n, within=C)


@dataclass
class SunnyReport:
    residuals: dict[float, float]  # t -> sup_q(P x_t - Px)
    filtered: list[float]
    tolerance: float

    @property
    def status(self) -> str:
        if not self.residuals:
            return "inconclusive"
        return "pass" if max(self.residuals.values()) <= self.tolerance else "fail"


def check_sunny(
    T: MapSpec,
    x,
    Px,
    t_grid: Sequence[float],
    Q: SeminormFamily,
    C: RegionSpec,
    schedule_length: int = DEFAULT_LENGTH,
    tol: float = SUNNY_TOL,
) -> SunnyReport:
    """Re-estimate ``P`` at ``Px + t (x - Px)`` for each admissible ``t``."""
    x, Px = as_vector(x, Q.dim), as_vector(Px, Q.dim)
    res, filtered = {}, []
    for t in t_grid:
        xt = Px + float(t) * (x - Px)
        if t < 0 or not C.contains(xt):
            filtered.append(float(t))
            continue
        est = estimate_retraction(T, xt, Q, C, schedule_length)
        res[float(t)] = float(Q.max_value(est.image - Px))
    return SunnyReport(res, filtered, tol * (1.0 + float(Q.max_value(Px))))


@dataclass
class UniquenessReport:
    anchor_image: np.ndarray
    alternate_image: np.ndarray
    difference: float
    status: str


def check_uniqueness(
    T: MapSpec,
    x,
    Q: SeminormFamily,
    C: RegionSpec,
    schedule_length: int = DEFAULT_LENGTH,
    p: float = 0.7,
    tol: float = UNIQUE_TOL,
) -> UniquenessReport:
    """Compare the anchor-scheme image with a power-schedule (``p``) construction."""
    x = as_vector(x, Q.dim)
    a = estimate_retraction(T, x, Q, C, schedule_length)
    # eps decays like 2^(-p k); stretch the length to reach comparable eps
    alt_len = int(np.ceil(schedule_length / p))
    alt_sched = Schedule("power", length=alt_len, p=p, sampling="geometric")
    b = estimate_retraction(T, x, Q, C, schedule=alt_sched)
    diff = float(Q.max_value(a.image - b.image))
    if not (a.reliable and b.reliable):
        status = "inconclusive"
    else:
        status = "pass" if diff <= tol else "fail"
    return UniquenessReport(a.image, b.image, diff, status)
