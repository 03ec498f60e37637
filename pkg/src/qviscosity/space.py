"""Finite-dimensional locally convex spaces: vectors, matrix seminorms, regions.

A seminorm is stored as a matrix ``A`` with ``d`` columns and evaluated as
``q(x) = ||A x||_2``.  A :class:`SeminormFamily` is an ordered, finite list of
such seminorms; it is *separated* when the stacked matrix has a trivial
nullspace, in which case the pointwise maximum over members is a norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

MEMBERSHIP_TOL = 1e-10
RANK_TOL = 1e-10


class DimensionError(ValueError):
    """Raised when a vector or matrix does not match the ambient dimension."""


class ConfigurationError(ValueError):
    """Raised when an object is used outside the hypotheses it requires."""


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite 1-d float array, optionally checking its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"expected length {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def _check_trailing(x: np.ndarray, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != dim:
        raise DimensionError(f"expected trailing dimension {dim}, got {x.shape[-1]}")
    return x


@dataclass(frozen=True, eq=False)
class Seminorm:
    """The seminorm ``x -> ||A x||_2``.

    ``__call__`` accepts a single vector or a stack of vectors (last axis of
    length ``dim``) and returns one value per vector.
    """

    matrix: np.ndarray
    label: str = "q"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if A.ndim != 2 or A.shape[1] == 0:
            raise DimensionError(f"seminorm {self.label!r}: matrix must be 2-d with >= 1 column")
        if not np.all(np.isfinite(A)):
            raise ValueError(f"seminorm {self.label!r}: matrix has non-finite entries")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @classmethod
    def euclidean(cls, dim: int, label: str = "euclid") -> "Seminorm":
        return cls(np.eye(dim), label)

    @classmethod
    def coordinates(cls, dim: int, idx: Sequence[int], label: str | None = None) -> "Seminorm":
        """Euclidean norm of the selected coordinates (``|x_i|`` for one index)."""
        A = np.eye(dim)[list(idx)]
        return cls(A, label or "x" + "".join(str(i + 1) for i in idx))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __call__(self, x) -> np.ndarray | float:
        x = _check_trailing(x, self.dim)
        val = np.linalg.norm(x @ self.matrix.T, axis=-1)
        return float(val) if np.ndim(val) == 0 else val

    def kernel_basis(self) -> np.ndarray:
        """Orthonormal basis (as columns) of ``{x : q(x) = 0}``."""
        return sla.null_space(self.matrix, rcond=RANK_TOL)

    def __repr__(self):
        return f"Seminorm(label={self.label!r}, shape={self.matrix.shape})"


def seminorm_eval(q: Seminorm, x) -> float:
    """Evaluate ``q`` at a single vector."""
    return float(q(as_vector(x, q.dim)))


@dataclass(frozen=True, eq=False)
class SeminormFamily:
    members: tuple[Seminorm, ...]
    separated: bool = field(init=False)
    joint_kernel: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ConfigurationError("a seminorm family needs at least one member")
        dims = {q.dim for q in members}
        if len(dims) != 1:
            raise DimensionError(f"seminorms disagree on dimension: {sorted(dims)}")
        labels = [q.label for q in members]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"duplicate seminorm labels: {labels}")
        object.__setattr__(self, "members", members)
        K = sla.null_space(self.stacked_matrix(), rcond=RANK_TOL)
        object.__setattr__(self, "joint_kernel", K)
        object.__setattr__(self, "separated", K.shape[1] == 0)

    @property
    def dim(self) -> int:
        return self.members[0].dim

    @property
    def labels(self) -> list[str]:
        return [q.label for q in self.members]

    def stacked_matrix(self) -> np.ndarray:
        return np.vstack([q.matrix for q in self.members])

    def evaluate(self, x) -> dict[str, float]:
        """Per-member values at a single vector, keyed by label."""
        x = as_vector(x, self.dim)
        return {q.label: float(q(x)) for q in self.members}

    def max_value(self, x) -> np.ndarray | float:
        # no separation check; callers that need a norm use sup_seminorm
        vals = np.stack([np.asarray(q(x)) for q in self.members])
        out = vals.max(axis=0)
        return float(out) if np.ndim(out) == 0 else out

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)


def family_is_separated(Q: SeminormFamily) -> tuple[bool, np.ndarray]:
    """Return ``(separated, kernel_basis)``.

    ``kernel_basis`` has one column per direction in the joint kernel
    ``{x : q(x) = 0 for all q}``; it is empty (``d x 0``) when separated.
    """
    return Q.separated, Q.joint_kernel


def sup_seminorm(Q: SeminormFamily, x) -> float:
    """``max_q q(x)``; a norm on the space because ``Q`` must be separated."""
    if not Q.separated:
        raise ConfigurationError(
            "sup_seminorm requires a separated family; joint kernel has dimension "
            f"{Q.joint_kernel.shape[1]}"
        )
    return Q.max_value(x)


@dataclass(frozen=True, eq=False)
class RegionSpec:
    """A closed, bounded, convex region: a Euclidean ball or an axis-aligned box.

    For a ball ``size`` is the radius (scalar); for a box it is the vector of
    half-widths (a scalar is broadcast).
    """

    kind: str
    center: np.ndarray
    size: np.ndarray | float

    def __post_init__(self):
        c = as_vector(self.center)
        object.__setattr__(self, "center", c)
        if self.kind == "ball":
            r = float(self.size)
            if not (np.isfinite(r) and r > 0):
                raise ValueError("ball radius must be positive")
            object.__setattr__(self, "size", r)
        elif self.kind == "box":
            h = np.broadcast_to(np.asarray(self.size, dtype=float), c.shape).copy()
            if not np.all(np.isfinite(h) & (h > 0)):
                raise ValueError("box half-widths must be positive")
            object.__setattr__(self, "size", h)
        else:
            raise ValueError(f"unknown region kind {self.kind!r} (expected 'ball' or 'box')")

    @classmethod
    def ball(cls, center, radius: float) -> "RegionSpec":
        return cls("ball", center, radius)

    @classmethod
    def box(cls, center, halfwidths) -> "RegionSpec":
        return cls("box", center, halfwidths)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> np.ndarray | bool:
        x = _check_trailing(x, self.dim)
        if self.kind == "ball":
            inside = np.linalg.norm(x - self.center, axis=-1) <= self.size + tol
        else:
            inside = np.all(np.abs(x - self.center) <= self.size + tol, axis=-1)
        return bool(inside) if np.ndim(inside) == 0 else inside

    def project(self, x) -> np.ndarray:
        """Euclidean metric projection; works on stacks of vectors."""
        x = _check_trailing(x, self.dim)
        if self.kind == "box":
            return np.clip(x, self.center - self.size, self.center + self.size)
        diff = x - self.center
        nrm = np.linalg.norm(diff, axis=-1, keepdims=True)
        scale = np.where(nrm > self.size, self.size / np.where(nrm > 0, nrm, 1.0), 1.0)
        return self.center + diff * scale

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` points drawn uniformly from the region, shape ``(n, d)``."""
        d = self.dim
        if self.kind == "box":
            return self.center + rng.uniform(-1.0, 1.0, size=(n, d)) * self.size
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.size * rng.uniform(size=(n, 1)) ** (1.0 / d)
        return self.center + g * r

    def difference_span(self) -> np.ndarray:
        """Orthonormal basis of ``span(C - C)``; the full space for these regions."""
        return np.eye(self.dim)

    def bounding_radius(self) -> float:
        if self.kind == "ball":
            return self.size
        return float(np.linalg.norm(self.size))


def region_project(C: RegionSpec, x) -> np.ndarray:
    return C.project(as_vector(x, C.dim))
