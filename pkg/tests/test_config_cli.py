import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest
import yaml

from qviscosity.cli import FAILURE, FLAGGED, OK, compare_schemes, main, run_experiment
from qviscosity.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def base(**over):
    cfg = {
        "schema_version": 1,
        "mode": "viscosity",
        "dimension": 2,
        "seminorms": [{"label": "euclid", "matrix": "identity"}],
        "region": {"kind": "ball", "center": [0, 0], "radius": 10},
        "T": {"kind": "affine", "matrix": [[-1, 0], [0, -1]], "modulus": 1.0},
        "f": {"kind": "contraction_toward", "center": [3, 0], "beta": 0.0},
        "schedule": {"kind": "harmonic", "length": 30},
    }
    cfg.update(over)
    return cfg


def write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data) if isinstance(data, dict) else data)
    return p


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# ")
    return list(csv.reader(lines[1:]))


# -- config ----------------------------------------------------------------------


def test_minimal_picard_config():
    cfg = load_config(CONFIGS / "picard_scalar.yaml")
    assert cfg.mode == "picard" and cfg.dimension == 1
    assert cfg.picard["k"] == 0.5
    assert np.allclose(cfg.T(np.array([0.0])), [1.0])


def test_beta_one_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config(base(f={"kind": "contraction_toward", "center": [3, 0], "beta": 1.0}))
    assert any("contraction modulus must be < 1" in e for e in exc.value.errors)


def test_dimension_mismatch_names_seminorm():
    data = base(dimension=3, seminorms=[{"label": "wide", "matrix": [[1, 0], [0, 1]]}])
    data["region"] = {"kind": "ball", "center": [0, 0, 0], "radius": 1}
    data["T"] = {"kind": "affine", "matrix": "identity"}
    data["f"] = {"kind": "contraction_toward", "center": [0, 0, 0], "beta": 0.5}
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    assert any("wide" in e and "column" in e for e in exc.value.errors), exc.value.errors


def test_all_errors_enumerated():
    data = base(schedule={"kind": "harmonic", "length": 0})
    data["T"] = {"kind": "affine", "matrix": [[1, 2, 3]]}
    data["f"] = {"kind": "contraction_toward", "center": [3, 0], "beta": 1.5}
    data["tolerances"] = {"tol_inner": -1}
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    fields = {e.split(":")[0].split(".")[0] for e in exc.value.errors}
    assert fields == {"T", "f", "schedule", "tolerances"}, exc.value.errors


def test_parse_error_has_line_context(tmp_path):
    p = write(tmp_path, "mode: picard\ndimension: 1\nseminorms: [\n  {label: a, matrix: [[1]]\n")
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    msg = exc.value.errors[0]
    assert "parse error" in msg and f"{p}:" in msg
    line = int(msg.split(":")[1])
    assert line >= 3


def test_missing_file_reported(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(tmp_path / "nope.yaml")
    assert "nope.yaml" in exc.value.errors[0]


def test_schema_version_checked():
    with pytest.raises(ConfigError):
        parse_config(base(schema_version=7))


# -- run_experiment ---------------------------------------------------------------


def test_neg_identity_trajectory_matches_closed_form(tmp_path):
    cfg = parse_config(base())
    assert run_experiment(cfg, tmp_path) in (OK, FLAGGED)
    rows = read_csv(tmp_path / "trajectory.csv")
    header, body = rows[0], rows[1:]
    i_eps, i_z0 = header.index("eps"), header.index("z0")
    assert len(body) == 30
    for r in body:
        eps = float(r[i_eps])
        assert abs(float(r[i_z0]) - 3 * eps / (2 - eps)) <= 1e-10
    assert json.loads((tmp_path / "audit.json").read_text())["passed"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert "limit_estimate" in summary


def test_oracle_check_mode(tmp_path):
    cfg = load_config(CONFIGS / "oracle_block_rotation.yaml")
    assert run_experiment(cfg, tmp_path) == OK
    rows = read_csv(tmp_path / "trajectory.csv")
    j = rows[0].index("oracle_deviation")
    assert max(float(r[j]) for r in rows[1:]) <= 10 * cfg.tolerances.tol_inner


def test_property_suite_mode(tmp_path):
    cfg = parse_config({"mode": "property_suite", "dimension": 1, "seminorms": [{"matrix": [[1]]}],
                        "suite": {"n_samples": 500}})
    assert run_experiment(cfg, tmp_path) == OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] and summary["duality_identities"]["cases"] == 500
    assert len(read_csv(tmp_path / "properties.csv")) == 4


def test_picard_mode(tmp_path):
    assert run_experiment(load_config(CONFIGS / "picard_scalar.yaml"), tmp_path) == OK
    rows = read_csv(tmp_path / "trajectory.csv")
    assert rows[0] == ["n", "gap_abs", "bound_abs"]
    for r in rows[1:]:
        n = int(r[0])
        assert float(r[2]) == pytest.approx(2 * 0.5**n, abs=1e-15)


def test_retraction_mode(tmp_path):
    assert run_experiment(load_config(CONFIGS / "retraction_neg_identity.yaml"), tmp_path) == OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert np.allclose(summary["image"], 0, atol=1e-8)


@pytest.mark.parametrize("name", ["split_kernel_flagged", "rotation_coordinates_flagged"])
def test_flagged_instances_exit_2(tmp_path, name):
    assert main(["run", str(CONFIGS / f"{name}.yaml"), "--out", str(tmp_path), "--quiet"]) == FLAGGED


def test_unseparated_family_fails(tmp_path):
    data = base(seminorms=[{"label": "x1", "matrix": [[1, 0]]}])
    assert run_experiment(parse_config(data), tmp_path) == FAILURE


def test_bad_config_exit_1(tmp_path):
    p = write(tmp_path, base(f={"kind": "contraction_toward", "center": [3, 0], "beta": 1.0}))
    assert main(["run", str(p), "--out", str(tmp_path / "o"), "--quiet"]) == FAILURE


def test_determinism(tmp_path):
    cfg = CONFIGS / "block_rotation.yaml"
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(a), "--seed", "3", "--quiet"]) == main(
        ["run", str(cfg), "--out", str(b), "--seed", "3", "--quiet"]
    )
    ta, tb = (p / "trajectory.csv" for p in (a, b))
    assert ta.read_text().splitlines()[1:] == tb.read_text().splitlines()[1:]


def test_suite_runs_directory(tmp_path):
    d = tmp_path / "cfgs"
    d.mkdir()
    for name in ("picard_scalar", "neg_identity"):
        shutil.copy(CONFIGS / f"{name}.yaml", d)
    assert main(["suite", str(d), "--out", str(tmp_path / "out"), "--workers", "2", "--quiet"]) == OK
    assert (tmp_path / "out" / "picard_scalar" / "trajectory.csv").exists()
    shutil.copy(CONFIGS / "split_kernel_flagged.yaml", d)
    assert main(["suite", str(d), "--out", str(tmp_path / "out2"), "--quiet"]) == FLAGGED


# -- compare ------------------------------------------------------------------------


def test_compare_neg_identity_mann_one_step():
    header, rows = compare_schemes(parse_config(base()), lam=0.5, x0=[3.0, 0.0])
    i = header.index("mann_residual")
    assert rows[0][i] == pytest.approx(6.0)
    assert all(r[i] == 0 for r in rows[1:])


def test_compare_identity_constant():
    data = base(T={"kind": "affine", "matrix": "identity", "modulus": 1.0},
                f={"kind": "contraction_toward", "center": [1, 1], "beta": 0.5})
    header, rows = compare_schemes(parse_config(data), lam=0.5)
    assert all(r[2] <= 1e-9 and r[3] == 0 for r in rows)


def test_compare_rotation_rate():
    data = base(T={"kind": "affine", "matrix": [[0, -1], [1, 0]], "modulus": 1.0},
                f={"kind": "contraction_toward", "center": [0, 0], "beta": 0.5},
                schedule={"kind": "harmonic", "length": 20})
    header, rows = compare_schemes(parse_config(data), lam=0.5, x0=[1.0, 0.0])
    rate = np.linalg.norm(0.5 * np.eye(2) + 0.5 * np.array([[0, -1], [1, 0]]), 2)
    assert rate == pytest.approx(np.sqrt(0.5))
    mann = [r[3] for r in rows]
    for a, b in zip(mann, mann[1:]):
        assert b == pytest.approx(rate * a, rel=1e-9)


def test_compare_cli_writes_csv(tmp_path):
    assert main(["compare", str(CONFIGS / "neg_identity.yaml"), "--out", str(tmp_path), "--quiet"]) == OK
    rows = read_csv(tmp_path / "compare.csv")
    assert rows[0] == ["n", "eps", "implicit_residual", "mann_residual"]
