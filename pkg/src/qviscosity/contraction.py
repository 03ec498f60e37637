"""Picard iteration for Q-contractions with an a-priori certified error bound.

For a Q-contraction ``T`` with constant ``k`` and any start ``x0`` the Picard
iterates satisfy, for every seminorm ``q`` of the family,

    q(x_n - v) <= k**n / (1 - k) * q(x0 - x1),

where ``v`` is the unique fixed point.  :func:`solve_contraction` stops at the
first ``n`` where the right-hand side is below ``tol`` for every ``q``.  Since
that ``n`` is known once ``x1`` is computed, affine maps can be advanced by
binary powering of their augmented matrix instead of one step at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .maps import MapSpec
from .space import ConfigurationError, SeminormFamily, as_vector

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


def certified_bound(k: float, n: int, q_gap: float) -> float:
    """``(1 - k)^-1 k^n q_gap``."""
    if not 0.0 < k < 1.0:
        raise ValueError(f"contraction constant must lie in (0, 1), got {k}")
    if q_gap == 0.0:
        return 0.0
    return k**n * q_gap / (1.0 - k)


def iterations_needed(k: float, gaps: Sequence[float], tol: float) -> int:
    """Smallest ``n`` with ``certified_bound(k, n, g) <= tol`` for every gap ``g``."""
    g = max(gaps)
    if g == 0.0 or g / (1.0 - k) <= tol:
        return 0
    n = max(0, math.ceil(math.log(tol * (1.0 - k) / g) / math.log(k)))
    # guard against log rounding in either direction
    while n > 0 and certified_bound(k, n - 1, g) <= tol:
        n -= 1
    while certified_bound(k, n, g) > tol:
        n += 1
    return n


@dataclass
class PicardReport:
    converged: bool
    iterate_count: int
    limit: np.ndarray
    k: float
    tol: float
    labels: list[str]
    initial_gaps: dict[str, float]
    # one row per recorded n; columns follow ``labels``
    gap_history: np.ndarray = field(repr=False)
    bound_history: np.ndarray = field(repr=False)
    iterates: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def final_bound(self) -> dict[str, float]:
        n = self.iterate_count
        return {lab: certified_bound(self.k, n, g) for lab, g in self.initial_gaps.items()}

    def rows(self):
        """``(n, gaps..., bounds...)`` tuples for CSV export."""
        for n, (g, b) in enumerate(zip(self.gap_history, self.bound_history)):
            yield (n, *g.tolist(), *b.tolist())


def _power_affine(M: np.ndarray, b: np.ndarray, x0: np.ndarray, n: int) -> np.ndarray:
    d = M.shape[0]
    G = np.zeros((d + 1, d + 1))
    G[:d, :d] = M
    G[:d, d] = b
    G[d, d] = 1.0
    y = np.linalg.matrix_power(G, n) @ np.append(x0, 1.0)
    return y[:d]


def solve_contraction(
    T: MapSpec | Callable,
    k: float,
    x0,
    Q: SeminormFamily,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = DEFAULT_MAX_ITER,
    record: bool = True,
    keep_iterates: bool = False,
) -> PicardReport:
    """Run ``x_{n+1} = T(x_n)`` until the certified bound drops below ``tol``.

    With ``record=False`` only the first gap is measured and, for affine maps,
    the stopping iterate is reached by powering; ``max_iter=None`` lifts the
    iteration cap in that case.  ``k`` is the declared contraction constant and
    is trusted, not re-estimated.
    """
    if not 0.0 < k < 1.0:
        raise ConfigurationError(f"contraction constant must lie in (0, 1), got {k}")
    if not Q.separated:
        raise ConfigurationError("Picard certificate needs a separated seminorm family")
    x = as_vector(x0, Q.dim)
    labels = Q.labels
    x1 = T(x)
    gaps0 = {q.label: float(q(x - x1)) for q in Q}
    n_star = iterations_needed(k, list(gaps0.values()), tol)
    affine = T.as_affine() if isinstance(T, MapSpec) else None

    def bounds_at(n):
        return [certified_bound(k, n, gaps0[lab]) for lab in labels]

    if not record and affine is not None:
        converged = max_iter is None or n_star <= max_iter
        n = n_star if converged else max_iter
        if n == 0:
            limit = x
        elif n == 1:
            limit = x1
        else:
            limit = _power_affine(*affine, x, n)
        return PicardReport(
            converged, n, limit, k, tol, labels, gaps0,
            np.array([list(gaps0.values())]), np.array([bounds_at(0)]),
        )

    cap = n_star if max_iter is None else min(n_star, max_iter)
    gaps, bounds, its = [], [], [x] if keep_iterates else None
    xn, xnext = x, x1
    for n in range(cap + 1):
        if record:
            gaps.append([float(q(xn - xnext)) for q in Q])
            bounds.append(bounds_at(n))
        if n == cap:
            break
        xn, xnext = xnext, T(xnext)
        if keep_iterates:
            its.append(xn)
    if not record:
        gaps, bounds = [list(gaps0.values())], [bounds_at(0)]
    return PicardReport(
        cap == n_star, cap, xn, k, tol, labels, gaps0,
        np.asarray(gaps, dtype=float), np.asarray(bounds, dtype=float), its,
    )


@dataclass
class DescentReport:
    """Checks of the descent-sequence lemma with ``phi_q(x) = q(x - Tx) / (1 - k)``."""

    phi: dict[str, list[float]]
    premise_slack: dict[str, list[float]]  # phi(x_n) - phi(x_{n+1}) - q(x_n - x_{n+1})
    conclusion_slack: dict[str, list[float]]  # phi(x_n) - phi(v) - q(x_n - v)
    premise_ok: bool
    conclusion_ok: bool
    tol: float = 1e-10

    @property
    def ok(self) -> bool:
        return self.premise_ok and self.conclusion_ok


def check_descent_sequence(
    xs: Sequence, T: MapSpec | Callable, k: float, Q: SeminormFamily, limit=None, tol: float = 1e-10
) -> DescentReport:
    """Verify the descent premise between consecutive iterates and, given the
    limit ``v``, the conclusion ``q(x_n - v) <= phi_q(x_n) - phi_q(v)``.

    Violations are reported, never raised.
    """
    xs = [as_vector(x, Q.dim) for x in xs]
    txs = [T(x) for x in xs]
    phi = {q.label: [float(q(x - tx)) / (1.0 - k) for x, tx in zip(xs, txs)] for q in Q}
    prem = {
        q.label: [
            phi[q.label][i] - phi[q.label][i + 1] - float(q(xs[i] - xs[i + 1]))
            for i in range(len(xs) - 1)
        ]
        for q in Q
    }
    concl: dict[str, list[float]] = {q.label: [] for q in Q}
    if limit is not None:
        v = as_vector(limit, Q.dim)
        for q in Q:
            phi_v = float(q(v - T(v))) / (1.0 - k)
            concl[q.label] = [
                phi[q.label][i] - phi_v - float(q(x - v)) for i, x in enumerate(xs)
            ]

    def ok(slacks):
        return all(s >= -tol for vals in slacks.values() for s in vals)

    return DescentReport(phi, prem, concl, ok(prem), ok(concl), tol)
