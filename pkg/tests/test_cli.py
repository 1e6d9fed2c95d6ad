import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given

from conftest import G_TWOLEVEL, random_herm, random_state, seeds
from occur.cli import main
from occur.errors import ValidationError
from occur.linalg import PAULI_X, PAULI_Z
from occur.scenario import (
    bundled_path,
    bundled_scenarios,
    encode_matrix,
    load_scenario,
    parse_scenario,
    save_scenario,
    scenario_to_dict,
)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def small_doc(**over):
    doc = {
        "name": "small",
        "system": {"dimS": 2, "H_S": encode_matrix(0.5 * PAULI_Z), "couplings": [encode_matrix(G_TWOLEVEL)]},
        "bath": {"temperature": 0.0, "eta": 0.05, "omega_c": 10.0},
        "generator": {"variant": "secular_weak"},
        "observables": [{"name": "G", "G": encode_matrix(G_TWOLEVEL)}],
        "initial_state": {"rho_S0": [[1, 0], [0, 0]]},
        "integrator": {"dt": 0.01, "t_final": 1.0, "store_every": 3},
    }
    doc.update(over)
    return doc


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


class TestRun:
    def test_twolevel_secular(self, tmp_path):
        out = tmp_path / "traj.csv"
        assert main(["run", "twolevel_secular", "--out", str(out)]) == 0
        header, data = read_csv(out)
        assert header == ["t", "G_exp", "G_current", "G_diss_rhs"]
        assert len(data) == math.floor(250 / 0.01) + 1
        delta = data[-1, 1] - data[0, 1]
        assert abs(delta - (G_TWOLEVEL[1, 1] - G_TWOLEVEL[0, 0]).real) < 1e-4
        assert abs(np.trapezoid(data[:, 2], data[:, 0])) < 1e-6

    def test_row_count_and_precision(self, tmp_path):
        out = tmp_path / "o.csv"
        assert main(["run", write(tmp_path, small_doc()), "--out", str(out)]) == 0
        header, data = read_csv(out)
        assert len(data) == math.floor(1.0 / (0.01 * 3)) + 1
        # 17 significant digits round-trip the doubles exactly
        first = out.read_text().splitlines()[2].split(",")
        assert float(first[0]) == 0.03

    def test_zero_coupling(self, tmp_path):
        doc = small_doc()
        doc["system"]["couplings"] = [[[0, 0], [0, 0]]]
        out = tmp_path / "z.csv"
        assert main(["run", write(tmp_path, doc), "--out", str(out)]) == 0
        header, data = read_csv(out)
        assert np.all(data[:, header.index("G_diss_rhs")] == 0.0)

    def test_exact_columns(self, tmp_path):
        out = tmp_path / "e.csv"
        assert main(["run", "qubit_qubit_exact", "--out", str(out)]) == 0
        header, data = read_csv(out)
        assert header[:5] == ["t", "sx_exp", "sx_current", "sx_diss_rhs", "sx_diss_lhs"]
        assert len(header) == 1 + 4 * 4

    def test_malformed_hamiltonian(self, tmp_path, capsys):
        doc = small_doc()
        doc["system"]["H_S"] = [[1, 2], [0, 1]]
        assert main(["run", write(tmp_path, doc), "--out", str(tmp_path / "x.csv")]) == 2
        assert "system.H_S" in capsys.readouterr().err
        assert not (tmp_path / "x.csv").exists()

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x.csv")]) == 2

    def test_numeric_failure(self, tmp_path, capsys):
        doc = small_doc(generator={"variant": "singular_coupling", "rates": {"gamma": 50.0}})
        doc["integrator"] = {"dt": 0.2, "t_final": 400.0, "store_every": 1}
        assert main(["run", write(tmp_path, doc), "--out", str(tmp_path / "x.csv")]) == 3
        assert "time step" in capsys.readouterr().err


class TestAudit:
    @pytest.mark.parametrize(
        "name,code,verdict",
        [("twolevel_secular", 1, "violated"), ("twolevel_redfield", 0, "conserved"), ("twolevel_singular", 0, "conserved")],
    )
    def test_bundled(self, tmp_path, name, code, verdict):
        out = tmp_path / "r.json"
        assert main(["audit", name, "--out", str(out)]) == code
        doc = json.loads(out.read_text())
        (rep,) = doc["reports"]
        assert rep["verdict"] == verdict
        if name == "twolevel_secular":
            assert abs(rep["integral_gap"] - 0.6) < 1e-4
        if name == "twolevel_redfield":
            assert rep["max_abs_rhs"] < 1e-8

    def test_series_flag(self, tmp_path):
        out = tmp_path / "r.json"
        assert main(["audit", "twolevel_singular", "--out", str(out), "--series"]) == 0
        rep = json.loads(out.read_text())["reports"][0]
        assert len(rep["series"]["t"]) == len(rep["series"]["rhs"])


class TestSweep:
    def test_rows(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["sweep", "qubit_qubit_sweep", "--param", "coupling", "--values", "0.2,0.1,0.05", "--out", str(out)]) == 0
        header, data = read_csv(out)
        assert header == ["g", "max_residual"]
        assert list(data[:, 0]) == [0.2, 0.1, 0.05]
        assert np.all(np.diff(data[:, 1]) <= 0)

    def test_single_value(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["sweep", "qubit_qubit_sweep", "--values", "0.1", "--out", str(out)]) == 0
        assert len(read_csv(out)[1]) == 1

    @pytest.mark.parametrize("values", ["", " , ", "a,b"])
    def test_bad_values(self, tmp_path, values):
        assert main(["sweep", "qubit_qubit_sweep", "--values", values, "--out", str(tmp_path / "s.csv")]) == 2

    def test_unknown_param(self, tmp_path):
        assert main(["sweep", "qubit_qubit_sweep", "--param", "eta", "--values", "0.1", "--out", str(tmp_path / "s.csv")]) == 2

    def test_requires_environment(self, tmp_path):
        assert main(["sweep", "twolevel_redfield", "--values", "0.1", "--out", str(tmp_path / "s.csv")]) == 2


class TestUsage:
    def test_no_command(self):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 2

    def test_missing_out(self):
        with pytest.raises(SystemExit) as info:
            main(["run", "twolevel_secular"])
        assert info.value.code == 2

    def test_list(self, capsys):
        assert main(["list"]) == 0
        names = capsys.readouterr().out.split()
        for n in ("twolevel_secular.json", "twolevel_redfield.json", "twolevel_singular.json",
                  "driven_secular.json", "driven_nonsecular.json"):
            assert n in names

    def test_module_entry_point(self, tmp_path):
        out = tmp_path / "r.json"
        proc = subprocess.run(
            [sys.executable, "-m", "occur.cli", "audit", "twolevel_secular", "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1
        assert json.loads(out.read_text())["reports"][0]["verdict"] == "violated"


class TestScenarioFormat:
    @pytest.mark.parametrize("name", bundled_scenarios())
    def test_bundled_round_trip(self, tmp_path, name):
        sc = load_scenario(bundled_path(name))
        save_scenario(sc, tmp_path / "n.json")
        again = load_scenario(tmp_path / "n.json")
        assert scenario_to_dict(again) == scenario_to_dict(sc)
        assert np.array_equal(again.system.h_s, sc.system.h_s)
        assert np.array_equal(again.initial_reduced(), sc.initial_reduced())

    @given(seeds)
    def test_random_round_trip(self, seed):
        doc = small_doc()
        doc["system"]["H_S"] = encode_matrix(random_herm(2, seed))
        doc["system"]["couplings"] = [encode_matrix(random_herm(2, seed + 1))]
        doc["initial_state"] = {"rho_S0": encode_matrix(random_state(2, seed + 2))}
        doc["generator"] = {"variant": "redfield_nonsecular"}
        sc = parse_scenario(doc)
        again = parse_scenario(json.loads(json.dumps(scenario_to_dict(sc))))
        assert scenario_to_dict(again) == scenario_to_dict(sc)

    @pytest.mark.parametrize(
        "mutate,path",
        [
            (lambda d: d["system"].update(dimS=3), "system.H_S"),
            (lambda d: d["system"].pop("H_S"), "system.H_S"),
            (lambda d: d["initial_state"].update(rho_S0=[[2, 0], [0, -1]]), "initial_state.rho_S0"),
            (lambda d: d["bath"].update(eta=-1), "bath.eta"),
            (lambda d: d["generator"].update(variant="magic"), "generator.variant"),
            (lambda d: d["integrator"].update(store_every=0), "integrator.store_every"),
            (lambda d: d["observables"][0].update(G=[[0, 1], [0, 0]]), "observables[0].G"),
            (lambda d: d["system"]["couplings"].append([[0, [0, 1]], [[0, 1], 0]]), "system.couplings[1]"),
        ],
    )
    def test_field_paths(self, mutate, path):
        doc = small_doc()
        mutate(doc)
        with pytest.raises(ValidationError) as info:
            parse_scenario(doc)
        assert path in str(info.value)

    def test_complex_pairs(self):
        doc = small_doc()
        doc["observables"] = [{"name": "sy", "G": [[0, [0, -1]], [[0, 1], 0]]}]
        sc = parse_scenario(doc)
        assert sc.observables[0].g[0, 1] == -1j
