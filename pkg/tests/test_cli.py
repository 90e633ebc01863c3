import json
import os
from pathlib import Path
import subprocess
import sys

import pytest

from admlab.cli import compare_runs, main, render_csv

SMALL_LATTICE = {"ps": [1.0, 2.0], "exps": [-0.5, 0.0, 0.2], "taus": [1.0]}


def write_config(path: Path, scenarios) -> Path:
    path.write_text(json.dumps({"scenarios": scenarios}, indent=2))
    return path


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture
def lattice_cfg(tmp_path):
    return write_config(tmp_path / "c.json", [
        {"name": "lat", "kind": "kernel-lattice", "params": SMALL_LATTICE},
        {"name": "cex", "kind": "counterexample"},
    ])


def test_run_writes_csv_and_manifest(tmp_path, lattice_cfg):
    out = tmp_path / "out"
    assert run(["run", lattice_cfg, "--out-dir", out]) == 0
    m = json.loads((out / "lat.manifest.json").read_text())
    assert m["kind"] == "kernel-lattice" and m["csv"] == "lat.csv" and m["failures"] == []
    text = (out / "lat.csv").read_text()
    assert "\r" not in text and text.splitlines()[0].split(",") == m["columns"]
    for col, tag in m["provenance"].items():
        assert tag in {"closed-form", "quadrature", "trial-max"}


def test_identical_runs_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "c.json", [
        {"name": "lp", "kind": "lpstar", "seed": 3, "params": {"n_random": 4, "n_modes": 256}},
        {"name": "lat", "kind": "kernel-lattice", "params": SMALL_LATTICE},
    ])
    assert run(["run", cfg, "--out-dir", tmp_path / "a"]) == 0
    assert run(["run", cfg, "--out-dir", tmp_path / "b", "--parallel", "2"]) == 0
    for name in ("lp.csv", "lat.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert run(["compare", tmp_path / "a" / "lp.manifest.json", tmp_path / "b" / "lp.manifest.json"]) == 0


def test_failing_check_exits_one(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", [
        {"name": "lat", "kind": "kernel-lattice", "params": dict(SMALL_LATTICE, levels=2, rel_tol=1e-15)},
    ])
    assert run(["run", cfg, "--out-dir", tmp_path / "o"]) == 1
    assert "FAIL lat" in capsys.readouterr().err


def test_empty_config_writes_nothing(tmp_path):
    cfg = write_config(tmp_path / "c.json", [])
    assert run(["run", cfg, "--out-dir", tmp_path / "o"]) == 0
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("scenarios, needle", [
    ([{"name": "a", "kind": "nope"}], "kind"),
    ([{"name": "a", "kind": "lpstar"}], "seed"),
    ([{"name": "a", "kind": "wc-scan", "params": {"bogus": 1}}], "bogus"),
    ([{"name": "a", "kind": "wc-scan"}, {"name": "a", "kind": "wb-scan"}], "duplicate"),
    ([{"name": "a b", "kind": "wc-scan"}], "name"),
    ([{"name": "a", "kind": "wc-scan", "seed": -1}], "seed"),
])
def test_invalid_config_exits_two_with_line(tmp_path, capsys, scenarios, needle):
    cfg = write_config(tmp_path / "c.json", scenarios)
    assert run(["run", cfg, "--out-dir", tmp_path / "o"]) == 2
    err = capsys.readouterr().err
    assert needle in err
    line = int(err.split(str(cfg) + ":")[1].split(":")[0])
    text = cfg.read_text().splitlines()
    assert '"name"' in text[line - 1] or '"scenarios"' in text[line - 1]


def test_malformed_json_reports_line(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"scenarios": [\n  {"name": "a",\n   "kind": }\n]}')
    assert run(["run", cfg]) == 2
    assert f"{cfg}:3:" in capsys.readouterr().err


def test_out_dir_from_environment(tmp_path, lattice_cfg, monkeypatch):
    monkeypatch.setenv("ADMLAB_OUT_DIR", str(tmp_path / "env"))
    assert run(["run", lattice_cfg]) == 0
    assert (tmp_path / "env" / "lat.csv").exists()


def test_seed_override_and_trial_max_cells(tmp_path):
    cfg = write_config(tmp_path / "c.json", [
        {"name": "ce", "kind": "conv-equivalence", "seed": 0,
         "params": {"alphas": [0.25], "n_random": 2, "horizon": 4.0}},
    ])
    assert run(["run", cfg, "--out-dir", tmp_path / "a"]) == 0
    assert run(["run", cfg, "--out-dir", tmp_path / "b", "--seed", "5"]) == 0
    ma = json.loads((tmp_path / "a" / "ce.manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "ce.manifest.json").read_text())
    assert (ma["seed"], mb["seed"]) == (0, 5)
    diffs = compare_runs(tmp_path / "a" / "ce.manifest.json", tmp_path / "b" / "ce.manifest.json")
    assert diffs and all(d["allowed"] for d in diffs)
    assert {ma["provenance"][d["column"]] for d in diffs} == {"trial-max"}
    assert run(["compare", tmp_path / "a" / "ce.manifest.json", tmp_path / "b" / "ce.manifest.json"]) == 0


def test_compare_kind_mismatch_and_bad_manifest(tmp_path, lattice_cfg, capsys):
    out = tmp_path / "o"
    assert run(["run", lattice_cfg, "--out-dir", out]) == 0
    assert run(["compare", out / "lat.manifest.json", out / "cex.manifest.json"]) == 2
    m = json.loads((out / "lat.manifest.json").read_text())
    m["provenance"][m["columns"][-1]] = "guess"
    (out / "bad.manifest.json").write_text(json.dumps(m))
    assert run(["compare", out / "lat.manifest.json", out / "bad.manifest.json"]) == 2
    del m["provenance"][m["columns"][-1]]
    for c in list(m["provenance"]):
        del m["provenance"][c]
    (out / "bad.manifest.json").write_text(json.dumps(m))
    assert run(["compare", out / "lat.manifest.json", out / "bad.manifest.json"]) == 2


def test_compare_detects_changed_value(tmp_path, lattice_cfg, capsys):
    out = tmp_path / "o"
    run(["run", lattice_cfg, "--out-dir", out])
    rows = (out / "cex.csv").read_text().splitlines()
    head, first = rows[0].split(","), rows[1].split(",")
    j = next(i for i, v in enumerate(first) if v.replace(".", "", 1).replace("e-", "").isdigit() and float(v) != 0)
    first[j] = repr(float(first[j]) * 1.01)
    (out / "cex2.csv").write_text("\n".join([rows[0], ",".join(first)] + rows[2:]) + "\n")
    m = json.loads((out / "cex.manifest.json").read_text())
    m["csv"] = "cex2.csv"
    (out / "cex2.manifest.json").write_text(json.dumps(m))
    assert run(["compare", out / "cex.manifest.json", out / "cex2.manifest.json"]) == 1
    assert f"column={head[j]}" in capsys.readouterr().out


def test_refined_quadrature_agrees(tmp_path):
    cfg = write_config(tmp_path / "c.json", [{"name": "lat", "kind": "kernel-lattice", "params": SMALL_LATTICE}])
    fine = write_config(tmp_path / "f.json", [
        {"name": "lat", "kind": "kernel-lattice", "params": dict(SMALL_LATTICE, levels=80)}])
    run(["run", cfg, "--out-dir", tmp_path / "a"])
    run(["run", fine, "--out-dir", tmp_path / "b"])
    diffs = compare_runs(tmp_path / "a" / "lat.manifest.json", tmp_path / "b" / "lat.manifest.json")
    # only the rounding-level error column may move
    assert {d["column"] for d in diffs} <= {"rel_err"}
    import csv
    a = list(csv.DictReader(open(tmp_path / "a" / "lat.csv")))
    b = list(csv.DictReader(open(tmp_path / "b" / "lat.csv")))
    for x, y in zip(a, b):
        u, v = float(x["norm_brute"]), float(y["norm_brute"])
        assert abs(u - v) <= 1e-8 * abs(v)


def test_list_kinds(capsys):
    assert run(["list-kinds"]) == 0
    out = capsys.readouterr().out
    for k in ("wc-scan", "wb-scan", "lpstar", "kernel-lattice", "conv-equivalence", "counterexample",
              "picard", "besov-region"):
        assert k in out


def test_render_csv_cells():
    import numpy as np
    text = render_csv(["a", "b", "c", "d"], [[np.float64(0.1), True, float("inf"), "x"]])
    assert text == "a,b,c,d\n0.1,1,inf,x\n"


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "admlab.cli", "list-kinds"], capture_output=True, text=True,
                       env=dict(os.environ))
    assert r.returncode == 0 and "picard" in r.stdout
