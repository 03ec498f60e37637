"""Experiment configuration: YAML file -> validated :class:`ExperimentConfig`.

Matrices are row-major nested lists; the string ``identity`` stands for the
``d x d`` identity.  Validation collects every problem before failing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .maps import Affine, Compose, ContractionToward, ConvexCombo, MapSpec, Projection
from .space import RegionSpec, Seminorm, SeminormFamily
from .viscosity import Schedule, StoppingRule

SCHEMA_VERSION = 1
MODES = ("viscosity", "picard", "retraction_audit", "property_suite", "oracle_check")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


@dataclass
class Tolerances:
    tol_inner: float = 1e-10
    residual_tol: float = 1e-8
    tau_vi: float = 1e-6


@dataclass
class ExperimentConfig:
    mode: str
    dimension: int
    family: SeminormFamily
    region: RegionSpec
    T: MapSpec | None = None
    f: MapSpec | None = None
    beta: float = 0.0
    schedule: Schedule = field(default_factory=Schedule)
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 0
    output: Path | None = None
    picard: dict[str, Any] = field(default_factory=dict)
    retraction: dict[str, Any] = field(default_factory=dict)
    suite: dict[str, Any] = field(default_factory=dict)
    compare: dict[str, Any] = field(default_factory=dict)
    source: Path | None = None

    @property
    def stop(self) -> StoppingRule:
        return StoppingRule(residual_tol=self.tolerances.residual_tol)


class _Builder:
    def __init__(self, d: int | None):
        self.d = d
        self.errors: list[str] = []

    def err(self, where: str, msg: str):
        self.errors.append(f"{where}: {msg}")

    def matrix(self, raw, where: str, square: bool = False):
        if isinstance(raw, str):
            if raw == "identity" and self.d:
                return np.eye(self.d)
            self.err(where, f"unknown matrix shorthand {raw!r}")
            return None
        try:
            A = np.array(raw, dtype=float)
        except (TypeError, ValueError):
            self.err(where, "matrix must be a list of numeric rows")
            return None
        A = np.atleast_2d(A)
        if A.ndim != 2 or not np.all(np.isfinite(A)):
            self.err(where, "matrix must be a finite 2-d list of rows")
            return None
        if self.d is not None and A.shape[1] != self.d:
            self.err(where, f"dimension mismatch: matrix has {A.shape[1]} columns, dimension is {self.d}")
            return None
        if square and A.shape[0] != A.shape[1]:
            self.err(where, f"matrix must be square, got {A.shape[0]}x{A.shape[1]}")
            return None
        return A

    def vector(self, raw, where: str):
        try:
            v = np.array(raw, dtype=float).reshape(-1)
        except (TypeError, ValueError):
            self.err(where, "expected a numeric list")
            return None
        if not np.all(np.isfinite(v)):
            self.err(where, "vector has non-finite entries")
            return None
        if self.d is not None and v.shape[0] != self.d:
            self.err(where, f"dimension mismatch: length {v.shape[0]}, dimension is {self.d}")
            return None
        return v

    def region(self, raw, where: str):
        if not isinstance(raw, dict):
            self.err(where, "expected a mapping with kind/center/radius or halfwidths")
            return None
        kind = raw.get("kind")
        c = self.vector(raw.get("center", [0.0] * (self.d or 0)), f"{where}.center")
        size = raw.get("radius") if kind == "ball" else raw.get("halfwidths")
        if kind not in ("ball", "box"):
            self.err(where, f"kind must be 'ball' or 'box', got {kind!r}")
            return None
        if size is None:
            self.err(where, "missing " + ("radius" if kind == "ball" else "halfwidths"))
            return None
        if c is None:
            return None
        try:
            return RegionSpec(kind, c, size)
        except ValueError as exc:
            self.err(where, str(exc))
            return None

    def modulus(self, raw, where: str, labels: list[str]):
        if raw is None:
            return None
        if isinstance(raw, dict):
            unknown = set(raw) - set(labels)
            if unknown:
                self.err(where, f"unknown seminorm labels {sorted(unknown)}")
            vals = {k: float(v) for k, v in raw.items()}
        else:
            vals = {"*": float(raw)}
        for v in vals.values():
            if not 0.0 <= v <= 1.0:
                self.err(where, f"declared modulus must lie in [0, 1], got {v}")
        return vals if isinstance(raw, dict) else float(raw)

    def map(self, raw, where: str, labels: list[str]) -> MapSpec | None:
        if not isinstance(raw, dict) or "kind" not in raw:
            self.err(where, "expected a mapping with a 'kind'")
            return None
        kind = raw["kind"]
        mod = self.modulus(raw.get("modulus"), f"{where}.modulus", labels)
        try:
            if kind == "affine":
                M = self.matrix(raw.get("matrix"), f"{where}.matrix", square=True)
                b = self.vector(raw.get("offset", [0.0] * (self.d or 0)), f"{where}.offset")
                return None if M is None or b is None else Affine(M, b, modulus=mod)
            if kind == "projection":
                C = self.region(raw.get("region"), f"{where}.region")
                return None if C is None else Projection(C, modulus=mod)
            if kind == "contraction_toward":
                c = self.vector(raw.get("center"), f"{where}.center")
                beta = float(raw.get("beta", 0.0))
                if not 0.0 <= beta < 1.0:
                    self.err(where, f"contraction modulus must be < 1 (beta = {beta})")
                    return None
                return None if c is None else ContractionToward(c, beta, modulus=mod)
            if kind in ("compose", "convex_combo"):
                subs = [self.map(m, f"{where}.maps[{i}]", labels) for i, m in enumerate(raw.get("maps", []))]
                if not subs:
                    self.err(where, f"{kind} needs a non-empty 'maps' list")
                    return None
                if any(s is None for s in subs):
                    return None
                if kind == "compose":
                    return Compose(tuple(subs), modulus=mod)
                return ConvexCombo(tuple(raw.get("weights", [])), tuple(subs), modulus=mod)
        except (ValueError, TypeError) as exc:
            self.err(where, str(exc))
            return None
        self.err(where, f"unknown map kind {kind!r}")
        return None


def parse_config(data: dict, source: Path | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError(["top level must be a mapping"])
    b = _Builder(None)
    if data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        b.err("schema_version", f"unsupported version {data.get('schema_version')!r}")
    mode = data.get("mode")
    if mode not in MODES:
        b.err("mode", f"must be one of {', '.join(MODES)}; got {mode!r}")
    d = data.get("dimension")
    if not isinstance(d, int) or d < 1:
        b.err("dimension", "must be a positive integer")
        raise ConfigError(b.errors)
    b.d = d

    seminorms = []
    raw_q = data.get("seminorms") or []
    if not raw_q:
        b.err("seminorms", "at least one seminorm is required")
    for i, rq in enumerate(raw_q):
        label = str(rq.get("label", f"q{i}")) if isinstance(rq, dict) else f"q{i}"
        A = b.matrix(rq.get("matrix") if isinstance(rq, dict) else None, f"seminorms[{i}] ({label})")
        if A is not None:
            seminorms.append(Seminorm(A, label))
    labels = [q.label for q in seminorms]
    if len(set(labels)) != len(labels):
        b.err("seminorms", f"duplicate labels {labels}")

    region = b.region(data.get("region", {"kind": "ball", "center": [0.0] * d, "radius": 1.0}), "region")

    T = f = None
    if mode in ("viscosity", "picard", "retraction_audit", "oracle_check"):
        if "T" not in data:
            b.err("T", "required for mode " + str(mode))
        else:
            T = b.map(data["T"], "T", labels)
    if mode in ("viscosity", "oracle_check"):
        if "f" not in data:
            b.err("f", "required for mode " + str(mode))
        else:
            f = b.map(data["f"], "f", labels)
    beta = data.get("beta")
    if beta is None and f is not None:
        m = f.modulus
        beta = max(m.values()) if isinstance(m, dict) else m
    if f is not None:
        if beta is None:
            b.err("beta", "f needs a declared contraction modulus")
        elif not 0.0 <= float(beta) < 1.0:
            b.err("beta", f"contraction modulus must be < 1, got {beta}")

    sched = Schedule()
    if "schedule" in data:
        rs = dict(data["schedule"])
        if "values" in rs:
            rs["values"] = tuple(rs["values"])
        try:
            sched = Schedule(**rs)
        except (TypeError, ValueError) as exc:
            b.err("schedule", str(exc))

    tol = Tolerances()
    for k, v in (data.get("tolerances") or {}).items():
        if not hasattr(tol, k):
            b.err(f"tolerances.{k}", "unknown tolerance")
        elif not (isinstance(v, (int, float)) and v > 0):
            b.err(f"tolerances.{k}", "must be a positive number")
        else:
            setattr(tol, k, float(v))

    picard = dict(data.get("picard") or {})
    if mode == "picard":
        k = picard.get("k", T.declared_modulus("*") if T is not None and not isinstance(T.modulus, dict) else None)
        if k is None or not 0.0 < float(k) < 1.0:
            b.err("picard.k", f"contraction modulus must be < 1 and > 0, got {k}")
        picard["k"] = k
        x0 = b.vector(picard.get("x0", [0.0] * d), "picard.x0")
        picard["x0"] = x0

    retr = dict(data.get("retraction") or {})
    if mode == "retraction_audit":
        retr["anchor"] = b.vector(retr.get("anchor", region.center if region else [0.0] * d), "retraction.anchor")

    family = None
    if seminorms and len(set(labels)) == len(labels):
        family = SeminormFamily(tuple(seminorms))

    if b.errors:
        raise ConfigError(b.errors)
    return ExperimentConfig(
        mode=mode,
        dimension=d,
        family=family,
        region=region,
        T=T,
        f=f,
        beta=float(beta) if beta is not None else 0.0,
        schedule=sched,
        tolerances=tol,
        seed=int(data.get("seed", 0)),
        output=Path(data["output"]) if data.get("output") else None,
        picard=picard,
        retraction=retr,
        suite=dict(data.get("suite") or {}),
        compare=dict(data.get("compare") or {}),
        source=source,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read ({exc.strerror})"]) from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        raise ConfigError([f"{where}: parse error: {getattr(exc, 'problem', exc)}"]) from exc
    return parse_config(data, source=path)
