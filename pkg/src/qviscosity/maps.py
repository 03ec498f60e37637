"""Declarative operators with declared, verifiable Lipschitz moduli.

Every map acts on single vectors and on stacks of vectors (last axis = ``d``).
Moduli are *declared* on the map (``modulus``: one float for every seminorm,
or a ``{label: float}`` mapping) and checked by :func:`verify_modulus`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla

from .space import (
    RANK_TOL,
    DimensionError,
    RegionSpec,
    Seminorm,
    SeminormFamily,
    _check_trailing,
    as_vector,
)

SKIP_TOL = 1e-12
VIOLATION_SLACK = 1e-9
FIXED_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MapSpec:
    modulus: float | Mapping[str, float] | None = field(default=None, kw_only=True)

    dim: int = field(init=False, repr=False)

    def __call__(self, x):
        raise NotImplementedError

    def as_affine(self) -> tuple[np.ndarray, np.ndarray] | None:
        """``(M, b)`` with ``T x = M x + b`` when the map is exactly affine."""
        return None

    def declared_modulus(self, label: str) -> float | None:
        m = self.modulus
        if m is None:
            return None
        if isinstance(m, Mapping):
            return None if label not in m else float(m[label])
        return float(m)


@dataclass(frozen=True, eq=False)
class Affine(MapSpec):
    matrix: np.ndarray
    offset: np.ndarray | None = None

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if M.shape[0] != M.shape[1]:
            raise DimensionError(f"affine matrix must be square, got {M.shape}")
        b = np.zeros(M.shape[0]) if self.offset is None else as_vector(self.offset, M.shape[0])
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "offset", b)
        object.__setattr__(self, "dim", M.shape[0])

    def __call__(self, x):
        x = _check_trailing(x, self.dim)
        return x @ self.matrix.T + self.offset

    def as_affine(self):
        return self.matrix, self.offset


@dataclass(frozen=True, eq=False)
class Projection(MapSpec):
    region: RegionSpec

    def __post_init__(self):
        object.__setattr__(self, "dim", self.region.dim)

    def __call__(self, x):
        return self.region.project(x)


@dataclass(frozen=True, eq=False)
class ContractionToward(MapSpec):
    """``x -> beta x + (1 - beta) c``; with ``beta = 0`` the constant map ``c``."""

    center: np.ndarray
    beta: float

    def __post_init__(self):
        c = as_vector(self.center)
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"contraction_toward needs beta in [0, 1), got {self.beta}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "dim", c.shape[0])
        if self.modulus is None:
            object.__setattr__(self, "modulus", float(self.beta))

    def __call__(self, x):
        x = _check_trailing(x, self.dim)
        return self.beta * x + (1.0 - self.beta) * self.center

    def as_affine(self):
        d = self.dim
        return self.beta * np.eye(d), (1.0 - self.beta) * self.center


def constant(c, **kw) -> ContractionToward:
    return ContractionToward(c, 0.0, **kw)


@dataclass(frozen=True, eq=False)
class Compose(MapSpec):
    """Apply ``maps[0]`` first, then ``maps[1]``, and so on."""

    maps: tuple[MapSpec, ...]

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise ValueError("compose needs at least one map")
        _same_dim(maps)
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "dim", maps[0].dim)

    def __call__(self, x):
        for m in self.maps:
            x = m(x)
        return x

    def as_affine(self):
        parts = [m.as_affine() for m in self.maps]
        if any(p is None for p in parts):
            return None
        M, b = np.eye(self.dim), np.zeros(self.dim)
        for Mi, bi in parts:
            M, b = Mi @ M, Mi @ b + bi
        return M, b


@dataclass(frozen=True, eq=False)
class ConvexCombo(MapSpec):
    weights: tuple[float, ...]
    maps: tuple[MapSpec, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        maps = tuple(self.maps)
        if len(w) != len(maps) or not maps:
            raise ValueError("convex_combo needs one weight per map")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("convex_combo weights must be nonnegative and sum to 1")
        _same_dim(maps)
        object.__setattr__(self, "weights", tuple(float(v) for v in w))
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "dim", maps[0].dim)

    def __call__(self, x):
        return sum(w * m(x) for w, m in zip(self.weights, self.maps))

    def as_affine(self):
        parts = [m.as_affine() for m in self.maps]
        if any(p is None for p in parts):
            return None
        M = sum(w * p[0] for w, p in zip(self.weights, parts))
        b = sum(w * p[1] for w, p in zip(self.weights, parts))
        return M, b


def _same_dim(maps):
    dims = {m.dim for m in maps}
    if len(dims) != 1:
        raise DimensionError(f"component maps disagree on dimension: {sorted(dims)}")


def apply_map(T: MapSpec, x) -> np.ndarray:
    return T(as_vector(x, T.dim))


def averaged(T: MapSpec, f: MapSpec, eps: float) -> MapSpec:
    """``eps f + (1 - eps) T``, kept affine when both parts are."""
    return ConvexCombo((eps, 1.0 - eps), (f, T))


# -- modulus verification ----------------------------------------------------


@dataclass
class ModulusEstimate:
    label: str
    estimate: float | None  # None when every pair was skipped
    exact: float | None
    declared: float | None
    pairs_used: int

    @property
    def status(self) -> str:
        if self.estimate is None and self.exact is None:
            return "inconclusive"
        if self.declared is not None and self.worst > self.declared + VIOLATION_SLACK:
            return "violated"
        return "ok"

    @property
    def worst(self) -> float:
        vals = [v for v in (self.estimate, self.exact) if v is not None]
        return max(vals) if vals else float("nan")


def exact_affine_modulus(M: np.ndarray, q: Seminorm) -> float:
    """``sup q(M h) / q(h)`` over ``h`` with ``q(h) > 0``; ``inf`` if unbounded.

    The ratio is bounded only if ``M`` maps ``ker A`` into ``ker A``.  Then the
    supremum is the spectral norm of ``A M V (A V)^+`` where ``V`` spans the
    row space of ``A``.
    """
    A = q.matrix
    AM = A @ M
    scale = max(np.linalg.norm(AM, 2), 1.0)
    K = sla.null_space(A, rcond=RANK_TOL)
    if K.shape[1] and np.linalg.norm(AM @ K, 2) > 1e-10 * scale:
        return float("inf")
    V = sla.orth(A.T, rcond=RANK_TOL)
    if V.shape[1] == 0:
        return 0.0
    B = AM @ V
    return float(np.linalg.norm(B @ np.linalg.pinv(A @ V), 2))


def verify_modulus(
    T: MapSpec,
    Q: SeminormFamily,
    n_samples: int = 10_000,
    seed: int = 0,
    region: RegionSpec | None = None,
    declared: float | Mapping[str, float] | None = None,
) -> dict[str, ModulusEstimate]:
    """Estimate ``max q(Tx - Ty) / q(x - y)`` per seminorm over sampled pairs.

    Pairs are drawn uniformly from ``region`` (standard normal if omitted).
    ``declared`` overrides the moduli declared on ``T``.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    rng = np.random.default_rng(seed)
    d = T.dim
    if region is not None:
        X, Y = region.sample(rng, n_samples), region.sample(rng, n_samples)
    else:
        X, Y = rng.standard_normal((n_samples, d)), rng.standard_normal((n_samples, d))
    TX, TY = T(X), T(Y)
    aff = T.as_affine()
    probe = MapSpec(modulus=declared) if declared is not None else T
    out = {}
    for q in Q:
        den = q(X - Y)
        keep = den >= SKIP_TOL
        est = float(np.max(q(TX - TY)[keep] / den[keep])) if np.any(keep) else None
        exact = exact_affine_modulus(aff[0], q) if aff is not None else None
        out[q.label] = ModulusEstimate(q.label, est, exact, probe.declared_modulus(q.label), int(keep.sum()))
    return out


# -- fixed sets --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FixedSetDescription:
    """``kind`` is one of explicit_point, affine_subspace, region, empty, unknown."""

    kind: str
    point: np.ndarray | None = None
    basis: np.ndarray | None = None  # orthonormal columns
    region: RegionSpec | None = None

    def sample(self, rng: np.random.Generator, n: int, within: RegionSpec | None = None) -> np.ndarray:
        """Up to ``n`` points of the fixed set, restricted to ``within`` if given.

        Affine subspaces are sampled by rejection from a bounding box of the
        slice; an empty array means no point was found.
        """
        if self.kind == "explicit_point":
            pts = np.repeat(self.point[None, :], n, axis=0)
        elif self.kind == "region":
            pts = self.region.sample(rng, n)
        elif self.kind == "affine_subspace":
            pts = self._sample_subspace(rng, n, within)
        else:
            d = self._dim() or (within.center.shape[0] if within is not None else 0)
            return np.empty((0, d))
        if within is not None:
            pts = pts[within.contains(pts)]
        return pts

    def _dim(self):
        for v in (self.point, self.region.center if self.region else None):
            if v is not None:
                return v.shape[0]
        return 0

    def _sample_subspace(self, rng, n, within):
        B, p = self.basis, self.point
        if within is None:
            return p + rng.standard_normal((n, B.shape[1])) @ B.T
        mid = B.T @ (within.center - p)
        R = within.bounding_radius()
        got, tries = [], 0
        while sum(len(g) for g in got) < n and tries < 200:
            t = mid + rng.uniform(-R, R, size=(4 * n, B.shape[1]))
            pts = p + t @ B.T
            got.append(pts[within.contains(pts)])
            tries += 1
        pts = np.concatenate(got) if got else np.empty((0, p.shape[0]))
        return pts[:n]


def _affine_fixed_set(M, b) -> FixedSetDescription:
    d = M.shape[0]
    L = np.eye(d) - M
    N = sla.null_space(L, rcond=RANK_TOL)
    z, *_ = np.linalg.lstsq(L, b, rcond=None)
    if np.linalg.norm(L @ z - b) > FIXED_TOL * (1.0 + np.linalg.norm(b)):
        return FixedSetDescription("empty")
    if N.shape[1] == 0:
        return FixedSetDescription("explicit_point", point=z)
    # basepoint orthogonal to the direction space
    z = z - N @ (N.T @ z)
    return FixedSetDescription("affine_subspace", point=z, basis=N)


def fixed_set_oracle(T: MapSpec) -> FixedSetDescription:
    if isinstance(T, ContractionToward):
        return FixedSetDescription("explicit_point", point=T.center.copy())
    if isinstance(T, Projection):
        return FixedSetDescription("region", region=T.region)
    aff = T.as_affine()
    if aff is not None:
        return _affine_fixed_set(*aff)
    if isinstance(T, (Compose, ConvexCombo)):
        parts = [fixed_set_oracle(m) for m in T.maps]
        if all(p.kind == "region" for p in parts) and all(
            _same_region(p.region, parts[0].region) for p in parts
        ):
            return parts[0]
        if all(p.kind == "explicit_point" for p in parts) and all(
            np.allclose(p.point, parts[0].point, rtol=0, atol=FIXED_TOL) for p in parts
        ):
            return parts[0]
    return FixedSetDescription("unknown")


def _same_region(a: RegionSpec, b: RegionSpec) -> bool:
    return a.kind == b.kind and np.array_equal(a.center, b.center) and np.array_equal(a.size, b.size)


def fixed_point_residual(T: MapSpec, Q: SeminormFamily, z) -> float:
    z = as_vector(z, T.dim)
    return Q.max_value(T(z) - z)
