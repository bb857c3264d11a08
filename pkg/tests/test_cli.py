import csv
import json
import math
import os
import subprocess
import sys

import pytest

from bvortex.cli import main


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_renorm_eval_disk(tmp_path):
    out = tmp_path / "w.csv"
    assert main(["renorm", "eval", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["method", "W", "error"]
    assert rows[1][0] == "closed_form"
    assert float(rows[1][1]) == pytest.approx(-4.35517, abs=5e-6)
    man = json.loads((tmp_path / "w.csv.manifest.json").read_text())
    assert man["experiment"] == "renorm" and man["outputs"] == [str(out)]
    assert {"numpy", "scipy", "python", "bvortex"} <= set(man["versions"])
    assert man["wall_time_s"] >= 0 and man["seed"] == 0


def test_renorm_eval_all_methods_general_domain(tmp_path):
    dom = _write(tmp_path / "d.json", {"coeffs": [[1, 0], [0, 0], [0.2, 0]]})
    out = tmp_path / "w.csv"
    assert main(["renorm", "eval", "--domain", dom, "--method", "all", "--out", str(out)]) == 0
    vals = {r[0]: float(r[1]) for r in _rows(out)[1:]}
    assert vals["closed_form"] == pytest.approx(vals["neumann_repr"], abs=1e-6)
    assert vals["closed_form"] == pytest.approx(vals["truncated_oracle"], abs=1e-3)


def test_regime_table(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["regime-table", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0][:4] == ["h", "eta", "eps", "lambda_h"]
    assert len(rows) == 6
    r3 = rows[2]
    assert float(r3[0]) == 1e-3 and float(r3[2]) == pytest.approx(0.38048, abs=5e-6)
    assert all(abs(float(r[6])) <= 1e-18 for r in rows[1:])


def test_same_seed_is_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"m{k}.csv"
        assert main(["minimize", "--schedule", "0.2,0.15,0.1", "--mesh", "0.1,0.025",
                     "--perturb", "0.1", "--seed", "7", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    rows = _rows(tmp_path / "m0.csv")
    assert rows[0] == ["eps", "E", "dirichlet", "boundary", "atom_s", "atom_weight"]
    assert len(rows) == 4
    man = json.loads((tmp_path / "m0.csv.manifest.json").read_text())
    assert {"slope", "intercept", "N_est"} <= set(man["summary"])


def test_run_dispatch_from_json(tmp_path):
    out = tmp_path / "w.csv"
    cfg = _write(tmp_path / "e.json", {"experiment": "renorm", "out": str(out)})
    assert main(["run", cfg]) == 0
    assert float(_rows(out)[1][1]) == pytest.approx(-2 * math.pi * math.log(2), abs=1e-12)


def test_run_rejects_bad_configs(tmp_path, capsys):
    bad = [{"experiment": "nope"},
           {"experiment": "renorm", "domain": str(tmp_path / "missing.json")},
           {"experiment": "minimize", "schedule": [0.1, 0.2]}]
    for k, obj in enumerate(bad):
        assert main(["run", _write(tmp_path / f"b{k}.json", obj)]) == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "config"
    assert main(["run", str(tmp_path / "absent.json")]) == 2


def test_module_errors_are_categorized(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"thetas": [0.0], "degrees": [2]})
    assert main(["renorm", "eval", "--config", cfg]) == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "unsupported-multiplicity"
    dom = _write(tmp_path / "d.json", {"coeffs": [[1, 0], [0.9, 0]]})
    assert main(["renorm", "eval", "--domain", dom]) == 2
    assert json.loads(capsys.readouterr().err.strip())["error"] == "domain"


def test_canonical_samples_tangent(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["canonical", "--samples", "64", "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 65


def test_kernels_check(tmp_path):
    out = tmp_path / "k.csv"
    assert main(["kernels", "check", "--h", "1e-2", "--out", str(out)]) == 0
    rows = _rows(out)
    kh = [r for r in rows[1:] if r[1] == "k_h"]
    assert kh and max(float(r[5]) for r in kh) < 1e-6


def test_strayfield_compare_with_field_file(tmp_path):
    import numpy as np
    from bvortex.geometry import ConformalDomain, build_mesh
    from bvortex.fields import VectorField
    from bvortex.io import write_field
    mesh = build_mesh(ConformalDomain.disk(), 0.2, 0.06)
    f = VectorField(mesh, np.tile([1.0, 0.0], (mesh.n_vertices, 1)))
    fp = tmp_path / "f.csv"
    write_field(f, fp)
    out = tmp_path / "s.csv"
    assert main(["strayfield", "compare", "--field", str(fp), "--mesh", "0.2,0.06",
                 "--h", "1e-2", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0][:4] == ["h", "eta", "eps", "lambda_h"]
    assert float(rows[1][7]) > 0  # C2 of a constant in-plane field


def test_console_script_and_thread_override(tmp_path):
    out = tmp_path / "r.csv"
    env = dict(os.environ, BVORTEX_THREADS="1")
    res = subprocess.run([sys.executable, "-m", "bvortex.cli", "regime-table", "--h", "1e-3",
                          "--out", str(out)], env=env, capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    man = json.loads((tmp_path / "r.csv.manifest.json").read_text())
    assert man["threads"] == "1"
    res = subprocess.run([sys.executable, "-m", "bvortex.cli", "regime-table", "--h", "0.9"],
                         capture_output=True, text=True)
    assert res.returncode == 2
    assert json.loads(res.stderr)["error"] == "regime"
