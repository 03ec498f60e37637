"""Batch experiment runner.

    qviscosity run <config> [--out DIR]
    qviscosity suite <dir>
    qviscosity compare <config> [--out DIR]

Exit status: 0 converged with every hypothesis audited, 2 converged with
flags, 1 failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .contraction import check_descent_sequence, solve_contraction
from .maps import constant, fixed_point_residual, fixed_set_oracle, verify_modulus
from .properties import run_property_suite
from .retraction import (
    check_sunny,
    check_uniqueness,
    check_variational_inequality,
    estimate_retraction,
    sample_fixed_set,
)
from .viscosity import (
    Check,
    HypothesisAudit,
    ImplicitTrajectory,
    OracleError,
    check_hypotheses,
    check_step4_bound,
    oracle_implicit_step_affine,
    run_implicit_scheme,
    anchor_slack_tolerance,
)

log = logging.getLogger("qviscosity")

OK, FAILURE, FLAGGED = 0, 1, 2


def fmt(v) -> str:
    return format(float(v), ".17g")


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_csv(path: Path, header: list[str], rows, title: str):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {title} generated {_timestamp()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([c if isinstance(c, (int, str)) else fmt(c) for c in r])


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=False) + "\n")


def trajectory_rows(cfg: ExperimentConfig, traj: ImplicitTrajectory, extra=None):
    labels = cfg.family.labels
    header = ["n", "eps", "inner_iters", "beta_n"] + [f"residual_{l}" for l in labels]
    header += ["fp_residual", "residual_over_eps"] + [f"z{i}" for i in range(cfg.dimension)]
    if extra:
        header += list(extra)
    rows = []
    for i, s in enumerate(traj.steps):
        row = [s.n, s.eps, s.inner_iterations, s.beta_n] + [s.residual[l] for l in labels]
        row += [s.fp_residual, s.residual_over_eps] + s.z.tolist()
        if extra:
            row += [col[i] for col in extra.values()]
        rows.append(row)
    return header, rows


def _audit_status(audit: HypothesisAudit, converged: bool) -> int:
    if not converged:
        return FLAGGED
    return OK if audit.passed else FLAGGED


def _run_viscosity(cfg: ExperimentConfig, out: Path, oracle: bool = False) -> int:
    Q, C, T, f = cfg.family, cfg.region, cfg.T, cfg.f
    audit = check_hypotheses(T, f, cfg.beta, Q, C, seed=cfg.seed)
    write_json(out / "audit.json", audit.as_dict())
    if not Q.separated:
        log.error("seminorm family is not separated; the scheme is undefined")
        write_json(out / "summary.json", {"mode": cfg.mode, "status": "failure", "reason": "family not separated"})
        return FAILURE
    traj = run_implicit_scheme(T, f, cfg.beta, cfg.schedule, Q, C, cfg.tolerances.tol_inner, cfg.stop)
    extra = None
    oracle_info = {}
    if oracle:
        try:
            dev = [
                float(Q.max_value(s.z - oracle_implicit_step_affine(T, f, s.eps))) for s in traj.steps
            ]
        except OracleError as exc:
            write_json(out / "summary.json", {"mode": cfg.mode, "status": "failure", "reason": str(exc)})
            return FAILURE
        extra = {"oracle_deviation": dev}
        lim = 10 * cfg.tolerances.tol_inner
        oracle_info = {"max_deviation": max(dev, default=0.0), "limit": lim, "passed": max(dev, default=0.0) <= lim}
    header, rows = trajectory_rows(cfg, traj, extra)
    write_csv(out / "trajectory.csv", header, rows, f"qviscosity {cfg.mode}")

    summary = {
        "mode": cfg.mode,
        "generated": _timestamp(),
        "converged": traj.converged,
        "reason": traj.reason,
        "steps": len(traj.steps),
        "audit_passed": audit.passed,
        "flags": [c.name for c in audit.flags],
    }
    if traj.failed_at is not None or not traj.steps:
        summary["status"] = "failure"
        write_json(out / "summary.json", summary)
        return FAILURE
    z = traj.limit_estimate
    summary["limit_estimate"] = z
    summary["limit_fixed_residual"] = fixed_point_residual(T, Q, z)
    # the anchor is not an input: x = f(P x) and P x is the limit
    x_anchor = f(z)
    summary["anchor"] = x_anchor
    slacks = {lab: [] for lab in Q.labels}
    anchor_slack_ok = True
    for s in traj.steps:
        sl = check_step4_bound(s.z, z, x_anchor, cfg.beta, Q)
        for q in Q:
            slacks[q.label].append(sl[q.label])
            anchor_slack_ok &= sl[q.label] >= -anchor_slack_tolerance(float(q(s.z - z)) ** 2)
    summary["anchor_slack_min"] = {lab: min(v) for lab, v in slacks.items()}
    summary["anchor_slack_ok"] = bool(anchor_slack_ok)
    if audit.passed:
        est = estimate_retraction(T, x_anchor, Q, C)
        summary["anchor_check"] = {
            "P_of_anchor": est.image,
            "distance_to_limit": float(Q.max_value(est.image - z)),
            "reliable": est.reliable,
        }
    fs = fixed_set_oracle(T)
    summary["fixed_set_kind"] = fs.kind
    if oracle:
        summary["oracle"] = oracle_info
    if oracle:
        # the oracle checks each step; reaching residual_tol is not required
        status = FAILURE if not oracle_info["passed"] else (OK if audit.passed else FLAGGED)
    else:
        status = _audit_status(audit, traj.converged)
    summary["status"] = {OK: "ok", FLAGGED: "flagged", FAILURE: "failure"}[status]
    write_json(out / "summary.json", summary)
    return status


def _run_picard(cfg: ExperimentConfig, out: Path) -> int:
    Q, T = cfg.family, cfg.T
    k = float(cfg.picard["k"])
    audit = [Check("family separated", Q.separated)]
    est = verify_modulus(T, Q, seed=cfg.seed, region=cfg.region, declared=k)
    audit += [Check(f"T {k}-contraction in {lab}", e.status == "ok", f"modulus {e.worst:.6g}") for lab, e in est.items()]
    audit = HypothesisAudit(audit)
    write_json(out / "audit.json", audit.as_dict())
    if not Q.separated:
        return FAILURE
    tol = float(cfg.picard.get("tol", 1e-10))
    rep = solve_contraction(
        T, k, cfg.picard["x0"], Q, tol=tol, max_iter=int(cfg.picard.get("max_iter", 100_000)), keep_iterates=True
    )
    labels = Q.labels
    header = ["n"] + [f"gap_{l}" for l in labels] + [f"bound_{l}" for l in labels]
    write_csv(out / "trajectory.csv", header, rep.rows(), "qviscosity picard")
    descent = check_descent_sequence(rep.iterates, T, k, Q, limit=rep.limit)
    summary = {
        "mode": "picard",
        "generated": _timestamp(),
        "converged": rep.converged,
        "iterate_count": rep.iterate_count,
        "limit": rep.limit,
        "k": k,
        "final_bound": rep.final_bound,
        "descent_lemma_ok": descent.ok,
        "audit_passed": audit.passed,
    }
    if not rep.converged:
        summary["status"] = "failure"
        write_json(out / "summary.json", summary)
        return FAILURE
    status = OK if audit.passed and descent.ok else FLAGGED
    summary["status"] = "ok" if status == OK else "flagged"
    write_json(out / "summary.json", summary)
    return status


def _run_retraction(cfg: ExperimentConfig, out: Path) -> int:
    Q, C, T = cfg.family, cfg.region, cfg.T
    r = cfg.retraction
    x = r["anchor"]
    length = int(r.get("schedule_length", 40))
    audit = check_hypotheses(T, constant(x), 0.0, Q, C, seed=cfg.seed)
    write_json(out / "audit.json", audit.as_dict())
    if not Q.separated:
        return FAILURE
    est = estimate_retraction(T, x, Q, C, length, cfg.tolerances.tol_inner, cfg.stop)
    header, rows = trajectory_rows(cfg, est.trajectory)
    write_csv(out / "trajectory.csv", header, rows, "qviscosity retraction_audit")
    samples = sample_fixed_set(T, C, int(r.get("fix_samples", 100)), cfg.seed)
    vi = check_variational_inequality(est.image, x, samples, Q, cfg.tolerances.tau_vi)
    est.vi_max_violation = vi.max_pairing
    sunny = check_sunny(T, x, est.image, r.get("t_grid", [0.0, 0.5, 1.0, 2.0]), Q, C, length)
    uniq = check_uniqueness(T, x, Q, C, length)
    statuses = [vi.status, sunny.status, uniq.status]
    summary = {
        "mode": "retraction_audit",
        "generated": _timestamp(),
        "anchor": x,
        "image": est.image,
        "reliable": est.reliable,
        "audit_passed": audit.passed,
        "flags": [c.name for c in audit.flags],
        "variational_inequality": {"status": vi.status, "max_pairing": vi.max_pairing, "tolerance": vi.tolerance, "samples": vi.n_samples},
        "sunny": {"status": sunny.status, "residuals": sunny.residuals, "filtered_t": sunny.filtered},
        "uniqueness": {"status": uniq.status, "difference": uniq.difference, "alternate_image": uniq.alternate_image},
    }
    if not est.reliable:
        status = FAILURE
    elif not audit.passed:
        status = FLAGGED
    elif "fail" in statuses:
        status = FAILURE
    elif "inconclusive" in statuses:
        status = FLAGGED
    else:
        status = OK
    summary["status"] = {OK: "ok", FLAGGED: "flagged", FAILURE: "failure"}[status]
    write_json(out / "summary.json", summary)
    return status


def _run_suite(cfg: ExperimentConfig, out: Path) -> int:
    res = run_property_suite(cfg.seed, int(cfg.suite.get("n_samples", 10_000)))
    rows = [(name, v["cases"], v["failures"]) for name, v in res.items() if isinstance(v, dict)]
    write_csv(out / "properties.csv", ["battery", "cases", "failures"], rows, "qviscosity property_suite")
    write_json(out / "summary.json", {"mode": "property_suite", "generated": _timestamp(), **res})
    return OK if res["passed"] else FAILURE


def run_experiment(cfg: ExperimentConfig, out: Path | None = None) -> int:
    out = Path(out or cfg.output or "out")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create output directory %s: %s", out, exc.strerror)
        return FAILURE
    runners = {
        "viscosity": _run_viscosity,
        "oracle_check": lambda c, o: _run_viscosity(c, o, oracle=True),
        "picard": _run_picard,
        "retraction_audit": _run_retraction,
        "property_suite": _run_suite,
    }
    try:
        status = runners[cfg.mode](cfg, out)
    except OSError as exc:
        log.error("I/O failure writing to %s: %s", getattr(exc, "filename", out), exc.strerror)
        return FAILURE
    log.info("%s: status %d, artifacts in %s", cfg.source or cfg.mode, status, out)
    return status


def compare_schemes(cfg: ExperimentConfig, lam: float | None = None, x0=None):
    """Implicit-scheme residuals next to Krasnoselskii-Mann residuals, per ``n``.

    Mann: ``x_{n+1} = (1 - lam) x_n + lam T x_n`` started from ``f`` at the
    center of ``C`` unless ``x0`` is given.  Returns ``(header, rows)``.
    """
    Q, T, f = cfg.family, cfg.T, cfg.f
    lam = float(lam if lam is not None else cfg.compare.get("lambda", 0.5))
    traj = run_implicit_scheme(T, f, cfg.beta, cfg.schedule, Q, cfg.region, cfg.tolerances.tol_inner, cfg.stop)
    if x0 is None:
        x0 = cfg.compare.get("x0")
    x = np.asarray(x0, float) if x0 is not None else f(cfg.region.center)
    rows = []
    for s in traj.steps:
        mann_res = float(Q.max_value(T(x) - x))
        rows.append((s.n, s.eps, max(s.residual.values()), mann_res))
        x = (1.0 - lam) * x + lam * T(x)
    return ["n", "eps", "implicit_residual", "mann_residual"], rows


def _apply_seed(cfg: ExperimentConfig, seed):
    return cfg if seed is None else dataclasses.replace(cfg, seed=seed)


def _suite_worker(args):
    path, out, seed = args
    logging.basicConfig(level=logging.WARNING)
    try:
        cfg = _apply_seed(load_config(path), seed)
    except ConfigError as exc:
        return str(path), FAILURE, str(exc)
    return str(path), run_experiment(cfg, out), ""


def main(argv=None) -> int:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--quiet", action="store_true", help="only report errors")
    p = argparse.ArgumentParser(prog="qviscosity", description=__doc__.split("\n")[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("run", parents=[common], help="run one experiment config")
    pr.add_argument("config")
    pr.add_argument("--out", default=None)
    ps = sub.add_parser("suite", parents=[common], help="run every *.yaml config in a directory")
    ps.add_argument("directory")
    ps.add_argument("--out", default=None, help="root for per-config output directories")
    ps.add_argument("--workers", type=int, default=None)
    pc = sub.add_parser("compare", parents=[common], help="implicit scheme vs Krasnoselskii-Mann")
    pc.add_argument("config")
    pc.add_argument("--out", default=None)
    pc.add_argument("--lam", type=float, default=None)
    args = p.parse_args(argv)

    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO, format="%(levelname)s %(message)s"
    )

    if args.command == "suite":
        d = Path(args.directory)
        configs = sorted(d.glob("*.yaml")) + sorted(d.glob("*.yml"))
        if not configs:
            log.error("no configs in %s", d)
            return FAILURE
        root = Path(args.out) if args.out else d / "out"
        jobs = [(c, root / c.stem, args.seed) for c in configs]
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            results = list(ex.map(_suite_worker, jobs))
        worst = OK
        for path, status, err in results:
            if not args.quiet:
                print(f"{status}  {path}" + (f"  {err}" if err else ""))
            worst = max(worst, status, key=lambda s: {OK: 0, FLAGGED: 1, FAILURE: 2}[s])
        return worst

    try:
        cfg = _apply_seed(load_config(args.config), args.seed)
    except ConfigError as exc:
        log.error("%s", exc)
        return FAILURE

    if args.command == "run":
        return run_experiment(cfg, args.out)

    if cfg.T is None or cfg.f is None:
        log.error("compare needs a config with both T and f")
        return FAILURE
    header, rows = compare_schemes(cfg, args.lam)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(args.out) / "compare.csv", header, rows, "qviscosity compare")
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([c if isinstance(c, int) else fmt(c) for c in r])
    return OK


if __name__ == "__main__":
    sys.exit(main())
