import json
import math

import numpy as np
import pytest

from milne.cli import parse_c_policy, run

CONFIGS = __import__("pathlib").Path(__file__).resolve().parent.parent / "configs"
HARMONIC = str(CONFIGS / "harmonic.json")


def _rows(text):
    blocks = text.strip("\n").split("\n\n")
    header = blocks[0].splitlines()[0].split(",")
    data = [np.array([[float(v) for v in line.split(",")] for line in b.splitlines() if line and line[0] not in "xE"]) for b in blocks]
    return header, data


def test_eigen_json(tmp_path):
    out = tmp_path / "e.json"
    assert run(["eigen", "--config", HARMONIC, "--nmax", "5", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert [d["n"] for d in doc["eigenvalues"]] == list(range(6))
    np.testing.assert_allclose([d["E"] for d in doc["eigenvalues"]], np.arange(6) + 0.5, atol=1e-7)


def test_outputs_are_bit_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["ampphase", "--config", HARMONIC, "--energy", "4.9", "--c-policy", "co"]
    assert run(args + ["--out", str(a)]) == 0
    assert run(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_ampphase_columns(tmp_path):
    out = tmp_path / "a.csv"
    assert run(["ampphase", "--config", HARMONIC, "--energy", "4.9", "--c-policy", "fixed:0.3", "--out", str(out)]) == 0
    header, (data,) = _rows(out.read_text())
    assert header == ["x", "u1", "u2", "alpha", "phi", "dphi"]
    assert np.all(data[:, 3] > 0)
    assert np.all(np.diff(data[:, 4]) >= 0)
    # 15 significant digits
    first = out.read_text().splitlines()[1].split(",")[0]
    assert len(first.replace("-", "").replace(".", "").lstrip("0")) <= 15


def test_scan_phase(tmp_path, monkeypatch):
    monkeypatch.setenv("MILNE_THREADS", "2")
    out = tmp_path / "s.csv"
    assert run(["scan-phase", "--config", HARMONIC, "--nmin", "0.5", "--nmax", "3.5", "--steps", "4", "--out", str(out)]) == 0
    header, (data,) = _rows(out.read_text())
    assert header == ["E", "nE", "phi_total_over_pi", "c_used"]
    np.testing.assert_allclose(data[:, 1], [0.5, 1.5, 2.5, 3.5], atol=1e-12)
    np.testing.assert_allclose(data[:, 2], data[:, 1] + 1.0, atol=1e-6)


def test_action_json(capsys):
    assert run(["action", "--config", HARMONIC, "--energy", "4.9"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert {"E", "J_classical", "J_quantal_co", "period"} <= set(doc)
    assert doc["J_classical"] == pytest.approx(2 * math.pi * 4.9)
    assert doc["period"] == pytest.approx(2 * math.pi)


def test_fig1_markers(capsys):
    assert run(["fig1", "--config", HARMONIC]) == 0
    header, blocks = _rows(capsys.readouterr().out)
    assert header == ["x", "Q_co", "alpha_co", "alpha_minus_co"]
    assert len(blocks) == 3
    curve, z1, z2 = blocks
    assert len(z1) == 5 and len(z2) == 5
    # at zeros of u1 both branches share alpha
    np.testing.assert_allclose(z1[:, 2], z1[:, 3], rtol=1e-9)


def test_fig2(capsys):
    assert run(["fig2", "--config", HARMONIC]) == 0
    header, (data,) = _rows(capsys.readouterr().out)
    assert header == ["x", "p_classical", "hbar_dphi_co", "hbar_dphi_generic"]
    mid = np.abs(data[:, 0]) < 2.5
    dev_co = np.max(np.abs(data[mid, 2] - data[mid, 1]) / data[mid, 1])
    dev_gen = np.max(np.abs(data[mid, 3] - data[mid, 1]) / data[mid, 1])
    assert dev_co < 0.05 < dev_gen


@pytest.mark.parametrize("order,ncols", [(0, 6), (2, 10)])
def test_expand(capsys, order, ncols):
    assert run(["expand", "--config", HARMONIC, "--order", str(order), "--hbar-eff", "0.5"]) == 0
    header, (data,) = _rows(capsys.readouterr().out)
    assert len(header) == ncols and data.shape[1] == ncols
    assert np.all(np.isfinite(data))


def test_check_subset(capsys):
    assert run(["check", "--criteria", "1,6"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 2


def test_missing_config_exit_1(tmp_path, capsys):
    out = tmp_path / "never.json"
    assert run(["eigen", "--config", str(tmp_path / "nope.json"), "--out", str(out)]) == 1
    assert not out.exists()
    assert "not found" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["eigen"],
        ["eigen", "--config", HARMONIC, "--nmax", "-1"],
        ["ampphase", "--config", HARMONIC, "--energy", "nan"],
        ["ampphase", "--config", HARMONIC, "--energy", "4.9", "--c-policy", "sometimes"],
        ["check", "--criteria", "1,99"],
    ],
)
def test_usage_errors_exit_1(argv):
    assert run(argv) == 1


def test_numerical_failure_exit_2(tmp_path, capsys):
    out = tmp_path / "a.csv"
    assert run(["ampphase", "--config", HARMONIC, "--energy", "4.5", "--out", str(out)]) == 2
    assert "EigenvalueDegenerate" in capsys.readouterr().err
    assert not out.exists()


def test_energy_out_of_range_exit_2(capsys):
    assert run(["action", "--config", HARMONIC, "--energy", "-1"]) == 2
    assert "EnergyOutOfRange" in capsys.readouterr().err


def test_table_config(capsys):
    assert run(["eigen", "--config", str(CONFIGS / "anharmonic_table.json"), "--nmax", "2"]) == 0
    E = [d["E"] for d in json.loads(capsys.readouterr().out)["eigenvalues"]]
    assert E[0] > 0.5 and np.all(np.diff(E) > 1.0)


def test_parse_c_policy():
    assert parse_c_policy("fixed:-0.5") == "fixed:-0.5"
    for bad in ("fixed:", "fixed:inf", "co2"):
        with pytest.raises(Exception):
            parse_c_policy(bad)
