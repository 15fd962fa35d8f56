import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from fitzflow.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, main
from fitzflow.config import ConfigError, load_config, n_values, parse_config, resolve, seq_value
from fitzflow.io import config_hash, format_value, read_csv, write_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, doc, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return str(p)


# --- io ---------------------------------------------------------------------


@given(x=st.one_of(st.floats(allow_nan=False), st.integers(-10**6, 10**6)))
def test_format_value_roundtrip(x):
    text = format_value(x)
    back = float(text.replace("+inf", "inf"))
    assert back == x


def test_format_specials():
    assert [format_value(v) for v in (math.inf, -math.inf, math.nan, True, False)] == ["+inf", "-inf", "nan", "1", "0"]


def test_csv_roundtrip_and_provenance(tmp_path):
    p = tmp_path / "a" / "t.csv"
    write_csv(p, ["x", "y"], [[1.5, math.inf], [2, "lbl"]], {"config_hash": "abc", "seed": 3})
    meta, header, rows = read_csv(p)
    assert meta == {"config_hash": "abc", "seed": "3"} and header == ["x", "y"]
    assert rows[0] == [1.5, math.inf] and rows[1] == [2.0, "lbl"]
    assert not [f for f in os.listdir(p.parent) if f.startswith(".tmp-")]


def test_config_hash_is_order_independent():
    assert config_hash({"a": 1, "b": [1.0, 2]}) == config_hash({"b": [1.0, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


# --- config -----------------------------------------------------------------


@given(a=st.floats(-5, 5), b=st.floats(-5, 5), p=st.floats(0.5, 3), n=st.integers(1, 1000))
def test_seq_value(a, b, p, n):
    assert seq_value({"const": a, "coef": b, "power": p}, n) == pytest.approx(a + b * n ** (-p))
    assert seq_value({"const": a, "coef": b, "power": p}, math.inf) == a


def test_resolve_nested():
    desc = {"tag": "Scaled", "c": {"seq": {"const": 1, "coef": 2}}, "op": {"tag": "Identity"}, "v": [{"seq": {"const": 3}}]}
    assert resolve(desc, 4) == {"tag": "Scaled", "c": 1.5, "op": {"tag": "Identity"}, "v": [3.0]}


def test_n_values_forms():
    assert n_values([4, 1, 2, 2]) == [1, 2, 4]
    assert n_values({"start": 2, "stop": 6, "step": 2}) == [2, 4, 6]
    assert n_values({"powers_of_two": [1, 3]}) == [2, 4, 8]
    with pytest.raises(ConfigError):
        n_values([0, 1])
    with pytest.raises(ConfigError):
        n_values("many")


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"command": "nope"}, "command"),
        ({"command": "solve", "kind": "MM", "operator": {"tag": "Identity"}, "grid": {"N": 0}, "u0": [1]}, "grid"),
        ({"command": "solve", "kind": "MM", "operator": {"tag": "Identity"}, "grid": {"N": 8}}, "u0"),
        ({"command": "solve", "kind": "MM", "operator": {"tag": "Identity"}, "grid": {"N": 8}, "u0": [1], "optimizer": {"x": 1}}, "optimizer.x"),
        ({"command": "stability", "kind": "MM", "operator": {"tag": "Identity"}, "grid": {"N": 8}, "u0": [1], "n_list": [1, 2]}, "operator"),
        ({"command": "fitz", "operator": {"tag": "Identity"}, "box": {"lo": 1, "hi": 0}}, "box"),
        ({"command": "conjugate", "function": "Quadratic"}, "function"),
    ],
)
def test_config_errors_name_the_field(doc, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert field in str(exc.value)


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    assert load_config(path).command in path.read_text()


# --- command line -------------------------------------------------------------


def run_cli(cmd, cfg, out, *extra):
    return main([cmd, "--config", cfg, "--out", str(out), "--quiet", *extra])


def test_conjugate_outputs_deterministic(tmp_path):
    cfg = str(CONFIGS / "conjugate.yaml")
    assert run_cli("conjugate", cfg, tmp_path / "a") == EXIT_OK
    assert run_cli("conjugate", cfg, tmp_path / "b") == EXIT_OK
    for name in ("function.csv", "conjugate.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    meta, header, rows = read_csv(tmp_path / "a" / "conjugate.csv")
    assert set(meta) == {"config_hash", "seed"}
    Y = np.array([r[0] for r in rows if r[header.index("interior")] == 1])
    vals = np.array([r[1] for r in rows if r[header.index("interior")] == 1])
    assert np.max(np.abs(vals - Y**2 / 4)) <= 0.01
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["status"] == "ok" and "conjugate.csv" in manifest["outputs"]


def test_seed_override_changes_provenance(tmp_path):
    cfg = str(CONFIGS / "conjugate.yaml")
    run_cli("conjugate", cfg, tmp_path / "a")
    run_cli("conjugate", cfg, tmp_path / "b", "--seed", "7")
    ma, mb = read_csv(tmp_path / "a" / "summary.csv")[0], read_csv(tmp_path / "b" / "summary.csv")[0]
    assert mb["seed"] == "7" and ma["config_hash"] != mb["config_hash"]


def test_fitz_reports_non_representation(tmp_path):
    assert run_cli("fitz", str(CONFIGS / "fitz.yaml"), tmp_path) == EXIT_OK
    report = dict((r[0], r[1]) for r in read_csv(tmp_path / "report.csv")[2])
    assert report["domination_ok"] == 1 and report["represents"] == 0


def test_solve_writes_all_tables(tmp_path):
    doc = {"command": "solve", "kind": "MM", "operator": {"tag": "Identity"}, "grid": {"T": 1, "N": 32}, "u0": [1.0]}
    assert run_cli("solve", write(tmp_path, doc), tmp_path / "o") == EXIT_OK
    assert {"reference.csv", "null_min.csv", "gaps.csv", "summary.csv"} <= set(os.listdir(tmp_path / "o"))


def test_solve_nonconvergence_exit_code(tmp_path):
    doc = {
        "command": "solve",
        "kind": "MM",
        "operator": {"tag": "Identity"},
        "grid": {"T": 1, "N": 32},
        "u0": [1.0],
        "optimizer": {"max_iter": 2, "tol_abs": 1e-15},
    }
    assert run_cli("solve", write(tmp_path, doc), tmp_path / "o") == EXIT_NUMERIC
    # partial outputs and the manifest are still written
    assert (tmp_path / "o" / "reference.csv").exists()
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["status"].startswith("non-convergence")


def test_gamma_static_cli(tmp_path):
    doc = yaml.safe_load((CONFIGS / "gamma_static.yaml").read_text())
    doc["n_list"] = {"start": 1, "stop": 16}
    doc["box"] = {"lo": [-1, -1], "hi": [1, 1]}
    doc["density"] = 5
    assert run_cli("gamma", write(tmp_path, doc), tmp_path / "o") == EXIT_OK
    verdict = dict((r[0], r[1]) for r in read_csv(tmp_path / "o" / "verdict.csv")[2])
    assert verdict["liminf_ok"] == 1 and verdict["recovery_ok"] == 1


def test_gamma_evolutionary_cli(tmp_path):
    doc = {
        "command": "gamma",
        "mode": "evolutionary",
        "integrand": {"type": "scaled"},
        "n_list": {"start": 1, "stop": 16},
        "grid": {"T": 1, "N": 16},
    }
    assert run_cli("gamma", write(tmp_path, doc), tmp_path / "o") == EXIT_OK
    assert len(read_csv(tmp_path / "o" / "weights.csv")[2]) == 18


def test_stability_cli(tmp_path):
    doc = {
        "command": "stability",
        "kind": "MM",
        "operator": {"tag": "ScalarMultiple", "c": {"seq": {"const": 1.0, "coef": 1.0}}},
        "grid": {"T": 1, "N": 16},
        "u0": [1.0],
        "n_list": {"powers_of_two": [1, 6]},
        "null_min": False,
    }
    assert run_cli("stability", write(tmp_path, doc), tmp_path / "o") == EXIT_OK
    lines = (tmp_path / "o" / "distance.dat").read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and len(lines) == 7
    summary = dict((r[0], r[1]) for r in read_csv(tmp_path / "o" / "summary.csv")[2])
    assert 0.9 <= summary["rate"] <= 1.1


def test_bad_config_exit_code(tmp_path):
    assert run_cli("conjugate", write(tmp_path, {"command": "conjugate", "function": {"tag": "Quadratic"}}), tmp_path / "o") == EXIT_CONFIG
    assert run_cli("solve", str(CONFIGS / "conjugate.yaml"), tmp_path / "o") == EXIT_CONFIG
    assert run_cli("conjugate", str(tmp_path / "missing.yaml"), tmp_path / "o") == EXIT_CONFIG
    (tmp_path / "broken.yaml").write_text("command: [unclosed")
    assert run_cli("conjugate", str(tmp_path / "broken.yaml"), tmp_path / "o") == EXIT_CONFIG


def test_unwritable_output_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run_cli("conjugate", str(CONFIGS / "conjugate.yaml"), blocker / "sub") == EXIT_IO


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FITZFLOW_OUT", str(tmp_path / "env"))
    assert main(["conjugate", "--config", str(CONFIGS / "conjugate.yaml"), "--quiet"]) == EXIT_OK
    assert (tmp_path / "env" / "conjugate.csv").exists()


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "fitzflow", "conjugate", "--config", str(CONFIGS / "conjugate.yaml"), "--out", str(tmp_path), "--quiet"],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0, r.stderr


def test_conjugate_half_norm_is_self_conjugate(tmp_path):
    doc = {"command": "conjugate", "function": {"tag": "HalfNormSq"}, "lattice": {"lo": -2, "hi": 2, "n": 41}}
    assert run_cli("conjugate", write(tmp_path, doc), tmp_path / "o") == EXIT_OK
    _, header, rows = read_csv(tmp_path / "o" / "conjugate.csv")
    y, exact = header.index("y1"), header.index("analytic")
    assert all(r[exact] == pytest.approx(0.5 * r[y] ** 2, abs=1e-12) for r in rows)


@pytest.mark.parametrize("rep, dominates, represents", [({"tag": "FitzIdentity"}, 1, 1), ({"tag": "Fb", "b": 0.25}, 0, 0)])
def test_fitz_domination_verdicts(tmp_path, rep, dominates, represents):
    doc = {"command": "fitz", "operator": {"tag": "Identity"}, "representative": rep, "box": {"lo": -2, "hi": 2}, "density": 21}
    assert run_cli("fitz", write(tmp_path, doc), tmp_path / "o") == EXIT_OK
    report = dict((r[0], r[1]) for r in read_csv(tmp_path / "o" / "report.csv")[2])
    assert report["domination_ok"] == dominates and report["represents"] == represents
