import json
import math
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from avgtransfer.cli import main
from avgtransfer.config import RunConfig, load_config, parse_kv
from avgtransfer.errors import DomainError
from avgtransfer.hamiltonian import eval_L


def run(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_eval_full(capsys):
    rc, out, _ = run(capsys, "eval", "--mode", "full", "--psi", "0", "--phi", "0")
    d = json.loads(out)
    assert rc == 0 and d["schema"] == 1
    assert d["L"] == pytest.approx(1.0, abs=1e-12) and d["c"] == pytest.approx(1.0, abs=1e-12)
    assert abs(d["a"]) < 1e-12 and abs(d["b"]) < 1e-12


def test_eval_tangential_and_bitwise(capsys):
    _, out, _ = run(capsys, "eval", "--mode", "tangential", "--psi", "0", "--phi", "0")
    assert json.loads(out)["M"] == pytest.approx(1.0, abs=1e-12)
    _, out, _ = run(capsys, "eval", "--mode", "full", "--psi", "1.0", "--phi", "0.7")
    assert json.loads(out)["L"] == eval_L((1.0, 0.7)).value


def test_usage_errors(capsys):
    assert run(capsys, "eval", "--psi", "0", "--phi", "2.0")[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--psi", "0"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["nope"])
    assert exc.value.code == 2


def test_transfer_case_c(capsys, tmp_path):
    csv = tmp_path / "t.csv"
    rc, out, _ = run(capsys, "transfer", "--n0", "1", "--n1", repr(math.exp(-3)), "--e0", "0",
                     "--e1", "0", "--csv", str(csv), "--out", str(tmp_path))
    d = json.loads(out)
    assert rc == 0 and d["schema"] == 1 and d["time"]["case"] == "C"
    assert d["time"]["tau_f"] == pytest.approx(1.0)
    assert csv.read_text().splitlines()[0] == "tau,psi,phi,n,rho,t_phys"


def test_transfer_malformed_json(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{n0: 1")
    assert run(capsys, "transfer", str(bad), "--out", str(tmp_path))[0] == 2
    bad.write_text(json.dumps({"n0": 1, "n1": 2, "e0": 0}))
    assert run(capsys, "transfer", str(bad), "--out", str(tmp_path))[0] == 2


def test_transfer_compare_energy(capsys, tmp_path):
    prob = tmp_path / "p.json"
    prob.write_text(json.dumps({"schema": 1, "n0": 1, "n1": 1.5, "e0": -0.9, "e1": 0.9}))
    rc, out, _ = run(capsys, "transfer", str(prob), "--compare-energy", "--out", str(tmp_path))
    d = json.loads(out)
    assert rc == 0
    assert d["energy"]["status"] == "unreachable"
    assert d["time"]["status"] == "solved"
    assert max(d["time"]["endpoint_residuals"].values()) < 1e-6


def test_trajectory_csv_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        run(capsys, "transfer", "--n0", "1", "--n1", "2", "--e0", "-0.3", "--e1", "0.4",
            "--csv", str(p), "--out", str(tmp_path))
    assert a.read_bytes() == b.read_bytes()


def test_manifolds_and_zb_outputs(capsys, tmp_path):
    rc, _, _ = run(capsys, "manifolds", "--mode", "tangential", "--out", str(tmp_path))
    assert rc == 0
    svgs = list(tmp_path.glob("*.svg"))
    assert svgs
    for s in svgs:
        assert ET.parse(s).getroot().tag.endswith("svg")
    rc, out, _ = run(capsys, "zb", "--mode", "full", "--phi", "0.8", "--out", str(tmp_path))
    assert rc == 0 and json.loads(out)["schema"] == 1


def test_energy_portrait_and_check(capsys, tmp_path):
    rc, _, _ = run(capsys, "portrait", "--energy", "--out", str(tmp_path))
    assert rc == 0 and (tmp_path / "portrait_energy.svg").exists()
    rc, out, _ = run(capsys, "energy", "--check", "--out", str(tmp_path))
    assert rc == 0 and json.loads(out)["schema"] == 1


def test_validate_quick_and_mutation(capsys):
    rc, out, _ = run(capsys, "validate", "--quick")
    assert rc == 0 and json.loads(out)["passed"] is True
    rc, out, _ = run(capsys, "validate", "--quick", "--mode", "full", "--mutate-sign-a")
    d = json.loads(out)
    assert rc == 1
    assert any(c["item"] == 4 and not c["passed"] for c in d["checks"])


def test_config_file_and_precedence(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\n[run]\nquad-tol = 1e-9\nmode = 'tangential'\nfan = 8\n")
    cfg = load_config(f, {"fan": "4", "seed": None})
    assert cfg.quad_tol == 1e-9 and cfg.mode == "tangential" and cfg.fan == 4
    assert parse_kv("a = 1  # x\n\nb=\"two\"") == {"a": "1", "b": "two"}
    with pytest.raises(DomainError):
        load_config(None, {"bogus": "1"})
    with pytest.raises(DomainError):
        load_config(None, {"fan": "many"})
    with pytest.raises(DomainError):
        RunConfig(quad_tol=0.0)
    assert RunConfig().quick().grid_psi == 30


def test_config_bad_key_exit_code(capsys, tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("colour = blue\n")
    assert run(capsys, "eval", "--psi", "0", "--phi", "0", "--config", str(f))[0] == 2


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "avgtransfer.cli", "eval", "--psi", "0",
                        "--phi", "0"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["L"] == pytest.approx(1.0)
