from __future__ import annotations

import csv
import json

import pytest

from holee_lattice.cli import main
from holee_lattice.config import COMMANDS


@pytest.fixture
def run(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)

    def go(*args):
        return main(list(args))

    return go


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_reference_verify(run, tmp_path, capsys):
    assert run("verify", "--reference", "--out", "o") == 0
    rows = read_csv(tmp_path / "o" / "verify.csv")
    assert {r["check"] for r in rows} == {"no_arbitrage", "telescoping", "portfolio_identity", "hedge_ratio", "recombination"}
    assert all(float(r["residual"]) < 1e-10 and r["status"] == "pass" for r in rows)
    assert "recombination" in capsys.readouterr().out


def test_reference_asymptotics(run, tmp_path):
    assert run("asymptotics", "--reference", "--out", "o") == 0
    summary = json.loads((tmp_path / "o" / "verdicts.json").read_text())
    kinds = {k: v["kind"] for k, v in summary["verdicts"].items()}
    assert kinds == {
        "r_classical_down": "DivergesToInfinity",
        "r_classical_up": "DivergesNegative",
        "r_extended_down": "Bounded",
        "r_extended_up": "Bounded",
    }
    assert summary["contract_holds"] is True
    table = read_csv(tmp_path / "o" / "drawback.csv")
    assert len(table) == 500 and list(table[0]) == ["step", "r_classical_down", "r_classical_up", "r_extended_down", "r_extended_up"]
    assert len(read_csv(tmp_path / "o" / "series.csv")) == 2000


def test_reference_price(run, tmp_path):
    assert run("price", "--reference", "--out", "o", "--format", "json") == 0
    report = json.loads((tmp_path / "o" / "price.json").read_text())
    assert abs(report["mc_estimate"] - report["lattice_price"]) < 3 * report["mc_standard_error"]
    assert report["claim"].startswith("zcb_call")


def test_reference_simulate(run, tmp_path):
    assert run("simulate", "--reference", "--out", "o") == 0
    rows = read_csv(tmp_path / "o" / "simulate.csv")
    assert len(rows) == 10
    assert 4.95 <= float(rows[-1]["mean_ups"]) <= 5.05


def test_lattice_and_shortrate_dumps(run, tmp_path):
    assert run("lattice", "--reference", "--out", "o") == 0
    assert run("shortrates", "--reference", "--out", "o") == 0
    lat = read_csv(tmp_path / "o" / "lattice.csv")
    assert list(lat[0]) == ["step", "ups", "maturity", "price"]
    assert len(lat) == sum((m + 1) * (20 - m + 1) for m in range(11))
    sr = read_csv(tmp_path / "o" / "shortrates.csv")
    assert list(sr[0]) == ["step", "ups", "rate_per_period", "rate_annualized"]
    assert len(sr) == 66


@pytest.mark.parametrize("fmt", ["csv", "json"])
@pytest.mark.parametrize("command", COMMANDS)
def test_reruns_are_byte_identical(run, tmp_path, command, fmt):
    assert run(command, "--reference", "--out", "a", "--format", fmt) == 0
    assert run(command, "--reference", "--out", "b", "--format", fmt) == 0
    a = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert a == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_flag_overrides(run, tmp_path):
    run("price", "--reference", "--out", "a", "--format", "json")
    run("price", "--reference", "--out", "b", "--format", "json", "--seed", "7")
    a = json.loads((tmp_path / "a" / "price.json").read_text())
    b = json.loads((tmp_path / "b" / "price.json").read_text())
    assert b["seed"] == 7 and a["mc_estimate"] != b["mc_estimate"]
    assert a["lattice_price"] == b["lattice_price"]


def test_bad_seed_rejected(run):
    with pytest.raises(SystemExit) as info:
        run("price", "--reference", "--seed", str(2**64))
    assert info.value.code == 2


def test_config_error_is_structured(run, tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({
        "grid": {"dt": 1, "n_steps": 5},
        "model": {"mode": "classical", "q": 0, "delta": 0.99, "p": 0.5},
        "curve": {"flat_yield": 0.05},
    }))
    assert run("verify", "--config", "c.json") == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and "(0,1)" in err["message"]


def test_missing_block_and_output(run, tmp_path, capsys):
    doc = {
        "grid": {"dt": 1, "n_steps": 5},
        "model": {"mode": "classical", "q": 0.5, "delta": 0.99, "p": 0.5},
        "curve": {"flat_yield": 0.05},
    }
    (tmp_path / "c.json").write_text(json.dumps(doc))
    assert run("verify", "--config", "c.json") == 2
    assert "output directory" in json.loads(capsys.readouterr().err)["message"]
    assert run("price", "--config", "c.json", "--out", "o", "--format", "csv") == 2
    assert "claim" in json.loads(capsys.readouterr().err)["message"]
    assert run("verify", "--config", "c.json", "--out", "o", "--format", "csv") == 0


def test_non_recombining_verify_fails(run, tmp_path, capsys):
    doc = {
        "grid": {"dt": 1, "n_steps": 6},
        "model": {
            "mode": "extended",
            "eta": {"family": "uniform"},
            "scale": {"family": "constant", "c": 0.4},
            "q": 0.5,
            "p": 0.5,
            "convention": "time_to_maturity",
        },
        "curve": {"flat_yield": 0.05},
        "lattice": {"depth": 4},
        "verify": {"recombination_depth": 4},
        "output": {"dir": "o", "format": "csv"},
    }
    (tmp_path / "c.json").write_text(json.dumps(doc))
    assert run("verify", "--config", "c.json") == 1
    capsys.readouterr()
    assert run("lattice", "--config", "c.json") == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "NonRecombiningError" and err["step"] == 2


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    res = subprocess.run(
        [sys.executable, "-m", "holee_lattice", "verify", "--reference", "--out", str(tmp_path / "o")],
        capture_output=True, text=True, cwd=tmp_path,
    )
    assert res.returncode == 0, res.stderr
