"""The implicit viscosity scheme ``z_n = eps_n f(z_n) + (1 - eps_n) T(z_n)``.

Each ``z_n`` is the unique fixed point of ``N_n = eps_n f + (1 - eps_n) T``,
a Q-contraction with constant ``beta_n = 1 + eps_n (beta - 1)``; it is found
with the certified Picard solver warm-started at ``z_{n-1}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .contraction import DEFAULT_MAX_ITER, PicardReport, solve_contraction
from .duality import duality_pairing
from .maps import MapSpec, averaged, verify_modulus
from .space import RANK_TOL, ConfigurationError, RegionSpec, SeminormFamily, as_vector

log = logging.getLogger(__name__)

DEFAULT_TOL_INNER = 1e-10


class StepFailure(RuntimeError):
    def __init__(self, msg, z=None, report=None):
        super().__init__(msg)
        self.z = z
        self.report = report


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class Schedule:
    """Step sizes ``eps_n``.

    Kinds: ``harmonic`` (``1/(n+1)``), ``anchor`` (``1/n``, from ``n = 2``),
    ``power`` (``(n+1)^-p``) and ``explicit`` (``values``).  With
    ``sampling="geometric"`` the indices are ``n = 2, 4, 8, ...`` instead of
    consecutive; each ``z_n`` is defined on its own, so this only thins the
    sequence.
    """

    kind: str = "harmonic"
    length: int = 100
    p: float = 1.0
    values: tuple[float, ...] | None = None
    sampling: str = "consecutive"

    def __post_init__(self):
        if self.kind not in ("harmonic", "anchor", "power", "explicit"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.sampling not in ("consecutive", "geometric"):
            raise ValueError(f"unknown sampling {self.sampling!r}")
        if self.kind == "explicit":
            if not self.values:
                raise ValueError("explicit schedule needs values")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            object.__setattr__(self, "length", len(self.values))
        if self.kind == "power" and not 0.0 < self.p <= 1.0:
            raise ValueError("power schedule needs 0 < p <= 1")
        if self.length < 1:
            raise ValueError("schedule length must be >= 1")
        eps = self.eps()
        if np.any(eps <= 0) or np.any(eps >= 1):
            raise ValueError("every eps_n must lie in (0, 1)")
        if np.any(np.diff(eps) > 0):
            raise ValueError("eps_n must be nonincreasing")

    def indices(self) -> np.ndarray:
        if self.kind == "explicit":
            return np.arange(1, self.length + 1)
        if self.sampling == "geometric":
            return 2 ** np.arange(1, self.length + 1, dtype=np.int64)
        start = 2 if self.kind == "anchor" else 1
        return np.arange(start, start + self.length)

    def eps(self) -> np.ndarray:
        if self.kind == "explicit":
            return np.asarray(self.values)
        n = self.indices().astype(float)
        if self.kind == "anchor":
            return 1.0 / n
        if self.kind == "harmonic":
            return 1.0 / (n + 1.0)
        return (n + 1.0) ** (-self.p)


@dataclass(frozen=True)
class StoppingRule:
    residual_tol: float = 1e-8
    stall_tol: float = 1e-12
    stall_steps: int = 5


@dataclass
class StepRecord:
    n: int
    eps: float
    z: np.ndarray
    inner_iterations: int
    beta_n: float
    residual: dict[str, float]  # q(T z_n - z_n)
    inner_bound: dict[str, float]  # certified bound at the inner stopping iterate
    fp_residual: float  # sup_q of z - N z, the fixed-point equation defect

    @property
    def residual_over_eps(self) -> float:
        return max(self.residual.values()) / self.eps


@dataclass
class ImplicitTrajectory:
    steps: list[StepRecord] = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    failed_at: int | None = None

    @property
    def limit_estimate(self) -> np.ndarray | None:
        return self.steps[-1].z if self.steps else None

    def zs(self) -> np.ndarray:
        return np.array([s.z for s in self.steps])


def inner_modulus(beta: float, eps: float) -> float:
    return 1.0 + eps * (beta - 1.0)


def solve_implicit_step(
    T: MapSpec,
    f: MapSpec,
    beta: float,
    eps: float,
    warm_start,
    Q: SeminormFamily,
    tol_inner: float = DEFAULT_TOL_INNER,
    max_iter: int | None = DEFAULT_MAX_ITER,
) -> tuple[np.ndarray, PicardReport]:
    """Fixed point of ``N = eps f + (1 - eps) T`` by certified Picard iteration.

    The Picard tolerance is ``tol_inner / 2`` so that the equation defect
    ``z - N z`` is at most ``tol_inner`` in every seminorm.  Affine ``N`` runs
    without an iteration cap (it is advanced by powering).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not 0.0 <= beta < 1.0:
        raise ConfigurationError(f"contraction modulus must be < 1, got {beta}")
    N = averaged(T, f, eps)
    k = inner_modulus(beta, eps)
    cap = None if N.as_affine() is not None else max_iter
    rep = solve_contraction(N, k, warm_start, Q, tol=tol_inner / 2, max_iter=cap, record=False)
    if not rep.converged:
        raise StepFailure(f"inner solve hit max_iter={max_iter} at eps={eps}", rep.limit, rep)
    return rep.limit, rep


def run_implicit_scheme(
    T: MapSpec,
    f: MapSpec,
    beta: float,
    schedule: Schedule,
    Q: SeminormFamily,
    C: RegionSpec,
    tol_inner: float = DEFAULT_TOL_INNER,
    stop: StoppingRule = StoppingRule(),
    warm_start: bool = True,
    max_iter: int | None = DEFAULT_MAX_ITER,
    z0=None,
) -> ImplicitTrajectory:
    """Solve the implicit scheme along ``schedule`` starting from ``z0``
    (the center of ``C`` by default).

    Stops early once ``q(T z_n - z_n) <= stop.residual_tol`` for every ``q``, or
    when consecutive iterates move less than ``stop.stall_tol`` for
    ``stop.stall_steps`` steps in a row.  With ``warm_start=False`` every step
    starts cold from ``z0``, which makes the steps independent.
    """
    traj = ImplicitTrajectory()
    z_cold = C.center.copy() if z0 is None else as_vector(z0, Q.dim)
    z = z_cold
    stalled = 0
    for n, eps in zip(schedule.indices(), schedule.eps()):
        eps = float(eps)
        start = z if warm_start else z_cold
        try:
            z_new, rep = solve_implicit_step(T, f, beta, eps, start, Q, tol_inner, max_iter)
        except StepFailure as exc:
            traj.failed_at = int(n)
            traj.reason = str(exc)
            log.warning("step %d failed: %s", n, exc)
            return traj
        Tz = T(z_new)
        resid = {q.label: float(q(Tz - z_new)) for q in Q}
        defect = z_new - eps * f(z_new) - (1.0 - eps) * Tz
        traj.steps.append(
            StepRecord(
                n=int(n),
                eps=eps,
                z=z_new,
                inner_iterations=rep.iterate_count,
                beta_n=rep.k,
                residual=resid,
                inner_bound=rep.final_bound,
                fp_residual=float(Q.max_value(defect)),
            )
        )
        move = float(Q.max_value(z_new - z))
        z = z_new
        if max(resid.values()) <= stop.residual_tol:
            traj.converged, traj.reason = True, "residual"
            return traj
        stalled = stalled + 1 if move <= stop.stall_tol else 0
        if stalled >= stop.stall_steps:
            traj.converged, traj.reason = True, "stall"
            return traj
    traj.reason = "schedule exhausted"
    # an exhausted schedule still counts if the residual test passes at the end
    traj.converged = bool(traj.steps) and max(traj.steps[-1].residual.values()) <= stop.residual_tol
    return traj


def oracle_implicit_step_affine(T: MapSpec, f: MapSpec, eps: float) -> np.ndarray:
    """Solve ``(I - eps F - (1 - eps) M) z = eps c + (1 - eps) b`` directly."""
    ta, fa = T.as_affine(), f.as_affine()
    if ta is None or fa is None:
        raise OracleError("oracle needs affine T and f")
    (M, b), (F, c) = ta, fa
    d = M.shape[0]
    S = np.eye(d) - eps * F - (1.0 - eps) * M
    if np.linalg.svd(S, compute_uv=False).min() < 1e-12:
        raise OracleError(f"singular system at eps={eps}")
    return np.linalg.solve(S, eps * c + (1.0 - eps) * b)


def anchor_slack_tolerance(gap_sq: float) -> float:
    return 1e-6 * (1.0 + gap_sq)


def check_step4_bound(z_n, Px, x_anchor, beta: float, Q: SeminormFamily) -> dict[str, float]:
    """``2/(1-beta) <x - Px, J_q(z_n - Px)> - q(z_n - Px)^2`` per seminorm."""
    z_n, Px, x = (as_vector(v, Q.dim) for v in (z_n, Px, x_anchor))
    out = {}
    for q in Q:
        w = z_n - Px
        out[q.label] = 2.0 / (1.0 - beta) * duality_pairing(q, x - Px, w) - float(q(w)) ** 2
    return out


# -- hypothesis audit ----------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class HypothesisAudit:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def flags(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def kernel_meets_differences(q, C: RegionSpec) -> np.ndarray:
    """Basis of ``ker q`` intersected with ``span(C - C)`` (empty when trivial)."""
    S = C.difference_span()
    W = sla.null_space(q.matrix @ S, rcond=RANK_TOL)
    return S @ W


def check_hypotheses(
    T: MapSpec,
    f: MapSpec,
    beta: float,
    Q: SeminormFamily,
    C: RegionSpec,
    n_samples: int = 10_000,
    seed: int = 0,
) -> HypothesisAudit:
    checks = [
        Check(
            "family separated",
            Q.separated,
            "" if Q.separated else f"joint kernel dimension {Q.joint_kernel.shape[1]}",
        )
    ]
    for q in Q:
        K = kernel_meets_differences(q, C)
        detail = "" if K.shape[1] == 0 else f"kernel direction {np.round(K[:, 0], 12).tolist()}"
        checks.append(Check(f"(C-C) meets ker {q.label} only at 0", K.shape[1] == 0, detail))
    T_est = verify_modulus(T, Q, n_samples, seed, region=C, declared=T.modulus if T.modulus is not None else 1.0)
    for lab, est in T_est.items():
        declared = 1.0 if est.declared is None else est.declared
        ok = est.worst <= min(declared, 1.0) + 1e-9
        checks.append(Check(f"T Q-nonexpansive in {lab}", ok, f"modulus {est.worst:.6g}, declared {est.declared}"))
    f_est = verify_modulus(f, Q, n_samples, seed + 1, region=C, declared=beta)
    for lab, est in f_est.items():
        checks.append(
            Check(f"f {beta}-contraction in {lab}", est.status == "ok", f"modulus {est.worst:.6g}")
        )
    rng = np.random.default_rng(seed + 2)
    pts = C.sample(rng, n_samples)
    for name, g in (("T", T), ("f", f)):
        inside = C.contains(g(pts))
        checks.append(Check(f"{name}(C) inside C", bool(np.all(inside)), f"{int((~inside).sum())} escapes"))
    checks.append(Check("C sequentially compact", True, "finite dimension, closed and bounded"))
    checks.append(Check("E complete and J_q single valued", True, "finite dimension, matrix seminorms"))
    return HypothesisAudit(checks)
