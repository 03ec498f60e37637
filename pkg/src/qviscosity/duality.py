"""Duality mapping and dual seminorm for matrix seminorms.

For ``q(x) = ||A x||`` the dual seminorm of a functional ``j`` (identified with
its coordinate vector, pairing = dot product) is finite only when ``j`` lies in
the row space of ``A``; writing ``j = A^T u`` with ``u`` in the range of ``A``,
``q*(j) = ||u||``.  The duality mapping is single valued:
``J_q x = A^T A x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .space import Seminorm, as_vector

DUAL_TOL = 1e-10
LEMMA_TOL = 1e-9


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class DualFunctional:
    riesz: np.ndarray
    seminorm_label: str = ""

    def pair(self, x) -> float:
        return float(np.dot(as_vector(x, self.riesz.shape[0]), self.riesz))

    def __neg__(self):
        return DualFunctional(-self.riesz, self.seminorm_label)


def _riesz(j) -> np.ndarray:
    return j.riesz if isinstance(j, DualFunctional) else as_vector(j)


def dual_seminorm(q: Seminorm, j) -> float:
    """``sup{|<y, j>| : q(y) <= 1}``; ``inf`` if ``j`` leaves the row space of ``A``."""
    r = as_vector(_riesz(j), q.dim)
    nrm = np.linalg.norm(r)
    if nrm == 0.0:
        return 0.0
    # min-norm solution of A^T u = j lies in range(A)
    u, *_ = np.linalg.lstsq(q.matrix.T, r, rcond=None)
    resid = np.linalg.norm(r - q.matrix.T @ u)
    if resid > DUAL_TOL * nrm:
        return float("inf")
    return float(np.linalg.norm(u))


def duality_map(q: Seminorm, x) -> DualFunctional:
    x = as_vector(x, q.dim)
    A = q.matrix
    return DualFunctional(A.T @ (A @ x), q.label)


def duality_pairing(q: Seminorm, y, x) -> float:
    """``<y, J_q x>`` computed as ``<A y, A x>``; vectorised over leading axes."""
    A = q.matrix
    val = np.sum((np.asarray(y, float) @ A.T) * (np.asarray(x, float) @ A.T), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


@dataclass
class DirectionalReport:
    """Both sides of the directional growth lemma on a finite grid of ``t``."""

    min_growth: float  # min over admissible t of q(x + t y) - q(x)
    pairing: float  # <y, J_q x>
    growth_holds: bool
    pairing_holds: bool
    pairing_implies_growth: bool
    growth_implies_pairing: bool
    skipped_t: list[float]

    @property
    def consistent(self) -> bool:
        return self.pairing_implies_growth and self.growth_implies_pairing


def check_directional_lemma(
    q: Seminorm, x, y, t_grid: Sequence[float], tol: float = LEMMA_TOL
) -> DirectionalReport:
    x = as_vector(x, q.dim)
    y = as_vector(y, q.dim)
    qx = q(x)
    if qx == 0.0:
        raise PreconditionError("directional lemma requires q(x) != 0")
    ts = [float(t) for t in t_grid]
    if any(t <= 0 for t in ts):
        raise ValueError("t_grid entries must be positive")
    growths, skipped = [], []
    for t in ts:
        v = q(x + t * y)
        if v == 0.0:
            skipped.append(t)
            continue
        growths.append(v - qx)
    min_growth = min(growths) if growths else float("inf")
    pairing = duality_map(q, x).pair(y)
    a = min_growth >= -tol
    b = pairing >= -tol
    return DirectionalReport(
        min_growth=float(min_growth),
        pairing=pairing,
        growth_holds=a,
        pairing_holds=b,
        pairing_implies_growth=(not b) or a,
        growth_implies_pairing=(not a) or b,
        skipped_t=skipped,
    )


def check_subgradient_inequality(q: Seminorm, x, y) -> float:
    """Slack of ``q(x)^2 - q(y)^2 >= 2 <x - y, J_q y>``.

    For matrix seminorms the slack equals ``q(x - y)^2``, but it is computed
    here from its definition.
    """
    x = as_vector(x, q.dim)
    y = as_vector(y, q.dim)
    j = duality_map(q, y)
    return q(x) ** 2 - q(y) ** 2 - 2.0 * j.pair(x - y)


def subgradient_tolerance(q: Seminorm, x, y) -> float:
    return 1e-10 * (1.0 + q(x) ** 2 + q(y) ** 2)
