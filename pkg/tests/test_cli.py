import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from cavityent.cli import EXIT_BUDGET, EXIT_INVALID, CSV_HEADER, dumps, main


def table(text):
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = v
    return out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestSteady:
    def test_table_and_json(self, tmp_path, capsys):
        path = tmp_path / "s.json"
        assert main(["steady", "--scenario", "closed_n2", "--pi", "0.447", "--k", "1",
                     "--json", str(path)]) == 0
        t = table(capsys.readouterr().out)
        # direct evaluation of the n_max = 2 steady-state polynomials at Gamma = K = 1
        pg = 5 * 3 * 2 / (5 * 3 * 2 + 2 * 0.447 * 2 * 5 + 4 * 0.447 ** 2 * 2 + 0.447 ** 2 * 5)
        assert float(t["P_g"]) == pytest.approx(pg, rel=1e-11)
        assert t["concurrence"] == "0"
        rec = json.loads(path.read_text())
        assert rec["split"]["p_g"] == pytest.approx(pg, rel=1e-11)

    def test_table_reference_ground_population(self, capsys):
        # reference point: P_g = 0.97337 at Pi = 0.447, K = 1
        main(["steady", "--scenario", "closed_n2", "--pi", "0.447", "--k", "1"])
        t = table(capsys.readouterr().out)
        assert float(t["P_g"]) == pytest.approx(0.97337, abs=1e-5)

    def test_open_atoms(self, capsys):
        assert main(["steady", "--scenario", "open_pi_pulse", "--gamma21", "1", "--gamma23", "1",
                     "--pi", "1", "--k", "1"]) == 0
        t = table(capsys.readouterr().out)
        assert float(t["bell_fraction"]) == pytest.approx(0.5, abs=1e-10)
        assert t["script_c"] == "n/a"

    def test_negative_rate(self, tmp_path, capsys):
        path = tmp_path / "never.json"
        assert main(["steady", "--pi", "-1", "--json", str(path)]) == EXIT_INVALID
        assert "rates must be non-negative" in capsys.readouterr().err
        assert not path.exists()

    def test_json_round_trip_is_byte_identical(self, tmp_path):
        path = tmp_path / "s.json"
        main(["steady", "--scenario", "closed_asym_start", "--pi", "0.3", "--k", "2.5",
              "--json", str(path)])
        text = path.read_text()
        assert dumps(json.loads(text)) == text

    def test_units_of_gamma(self, capsys):
        main(["steady", "--gamma", "1", "--pi", "0.5", "--k", "2"])
        a = table(capsys.readouterr().out)
        main(["steady", "--gamma", "4", "--pi", "2", "--k", "8", "--units-of-gamma"])
        b = table(capsys.readouterr().out)
        main(["steady", "--gamma", "4", "--pi", "2", "--k", "8"])
        c = table(capsys.readouterr().out)
        for key in ("P_g", "P_s1", "P_s2", "P_oprime2", "script_c", "concurrence"):
            assert float(a[key]) == pytest.approx(float(b[key]), abs=1e-11)
            assert float(a[key]) == pytest.approx(float(c[key]), abs=1e-11)
        assert b["gamma"] == "1" and c["gamma"] == "4"


class TestConfig:
    def test_flags_override_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"scenario": "closed_n1", "pi": 3.0, "k": 1.0}))
        assert main(["steady", "--config", str(cfg), "--pi", "1"]) == 0
        t = table(capsys.readouterr().out)
        assert t["scenario"] == "closed_n1" and float(t["pi"]) == 1.0
        assert float(t["concurrence"]) == pytest.approx(1 / (2 * 2.5), abs=1e-12)

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"pump": 1.0}))
        assert main(["steady", "--config", str(cfg)]) == EXIT_INVALID
        assert "unknown config keys" in capsys.readouterr().err

    def test_leak_multiplier_from_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"leak_mult": {"2": 100}, "pi": 5, "k": 3}))
        assert main(["steady", "--config", str(cfg)]) == 0
        assert float(table(capsys.readouterr().out)["concurrence"]) > 0

    def test_bad_flag_value(self):
        with pytest.raises(SystemExit) as info:
            main(["steady", "--leak-mult", "two"])
        assert info.value.code == 2


class TestSweep:
    def test_two_by_two(self, tmp_path):
        path = tmp_path / "g.csv"
        assert main(["sweep", "--scenario", "closed_n1", "--resolution", "2",
                     "--csv", str(path)]) == 0
        rows = read_csv(path)
        assert tuple(rows[0]) == CSV_HEADER and len(rows) == 5

    def test_closed_n1_rows_follow_formula(self, tmp_path):
        path = tmp_path / "g.csv"
        main(["sweep", "--scenario", "closed_n1", "--resolution", "7", "--csv", str(path)])
        rows = read_csv(path)[1:]
        ks = [float(r[1]) for r in rows]
        assert ks == sorted(ks)  # K-major
        for r in rows:
            pi, k, c = float(r[0]), float(r[1]), float(r[7])
            assert c == pytest.approx(pi / (2 * (1 + k / 2 + pi)), abs=1e-10)

    def test_closed_n2_never_entangles(self, tmp_path):
        path = tmp_path / "g.csv"
        svg = tmp_path / "g.svg"
        main(["sweep", "--resolution", "10", "--csv", str(path), "--svg", str(svg)])
        script_c = np.array([float(r[6]) for r in read_csv(path)[1:]])
        assert script_c.max() < 0
        assert svg.read_text().startswith("<svg") and svg.read_text().count("<rect") == 100

    def test_open_sweep_has_bell_column(self, tmp_path):
        path = tmp_path / "g.csv"
        main(["sweep", "--scenario", "open_pi_pulse", "--resolution", "2", "--csv", str(path)])
        rows = read_csv(path)
        assert rows[0][-1] == "bell_fraction" and all(r[-1] == "0.5" for r in rows[1:])

    def test_unwritable_path(self, tmp_path):
        path = tmp_path / "missing" / "g.csv"
        assert main(["sweep", "--resolution", "2", "--csv", str(path)]) != 0
        assert not path.parent.exists()

    def test_needs_output(self):
        assert main(["sweep", "--resolution", "2"]) == EXIT_INVALID


class TestMaximize:
    def test_default(self, capsys):
        assert main(["maximize"]) == 0
        t = table(capsys.readouterr().out)
        assert float(t["p_s1"]) == pytest.approx(0.366, abs=0.002)
        assert float(t["concurrence"]) == 0

    def test_nonlinear_leak(self, capsys):
        assert main(["maximize", "--leak-mult", "2:100", "--starts", "2"]) == 0
        assert float(table(capsys.readouterr().out)["concurrence"]) > 0

    def test_seed_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["maximize", "--seed", "7", "--json", str(a)])
        main(["maximize", "--seed", "7", "--json", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_budget(self, capsys):
        assert main(["maximize", "--max-iter", "2", "--starts", "2"]) == EXIT_BUDGET
        captured = capsys.readouterr()
        assert "best so far" in captured.err and "p_s1" in captured.out


class TestEvolve:
    def test_csv(self, tmp_path):
        path = tmp_path / "e.csv"
        assert main(["evolve", "--scenario", "closed_n2", "--pi", "1", "--t-max", "5",
                     "--steps", "6", "--csv", str(path)]) == 0
        rows = read_csv(path)
        assert rows[0][:3] == ["t", "g", "o1"] and len(rows) == 7
        assert float(rows[1][1]) == 1.0
        for r in rows[1:]:
            assert sum(map(float, r[1:])) == pytest.approx(1.0, abs=1e-10)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cavityent", "steady", "--scenario", "closed_n1"],
                         capture_output=True, text=True, check=True)
    assert "concurrence" in res.stdout
