import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from switchsynth import cli
from switchsynth.graph import SwitchingSignal
from switchsynth.io import (
    format_signal,
    load_system,
    parse_signal,
    read_signal,
    save_system,
    synthesis_report,
    system_from_dict,
    verify_report,
    write_signal,
)
from switchsynth.synthesis import UndecidedError, synthesize

from conftest import data_path

FIVE = str(data_path("five_modes.json"))
TWO = str(data_path("two_modes_override.json"))


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_json(path, data):
    path.write_text(json.dumps(data))
    return path


class TestSystemFile:
    def test_round_trip(self, tmp_path, rng):
        data = {
            "subsystems": [
                {"id": "a", "A": rng.normal(size=(3, 3)).tolist()},
                {"id": 7, "A": rng.normal(size=(3, 3)).tolist()},
            ],
            "edges": [["a", 7], [7, "a"], [7, 7]],
            "q_matrices": [{"id": "a", "Q": np.diag([1.0, 2.0, 3.0]).tolist()}],
            "epsilon": 0.002,
        }
        s = system_from_dict(data)
        path = tmp_path / "sys.json"
        save_system(s, path)
        back = load_system(path)
        assert back.graph.vertices == s.graph.vertices == ("a", 7)
        assert back.graph.edges == s.graph.edges
        for k in s.subsystems:
            np.testing.assert_array_equal(back.subsystems[k].A, s.subsystems[k].A)
        np.testing.assert_array_equal(back.q_matrices["a"], s.q_matrices["a"])
        assert back.epsilon == 0.002

    def test_override_round_trip(self, tmp_path, two_modes):
        path = tmp_path / "two.json"
        save_system(two_modes, path)
        back = load_system(path)
        assert back.gains.log_mu == two_modes.gains.log_mu
        assert back.gains.log_lambda == two_modes.gains.log_lambda
        assert not back.subsystems

    def test_override_self_loop_defaults_to_zero(self):
        s = system_from_dict(
            {
                "modes": [1],
                "edges": [[1, 1]],
                "gains_override": {"log_mu": [], "log_lambda": [{"id": 1, "value": -0.1}]},
            }
        )
        assert s.gains.log_mu[(1, 1)] == 0.0

    @pytest.mark.parametrize(
        "data",
        [
            {"subsystems": [{"id": 1, "A": [[1]]}, {"id": 1, "A": [[2]]}], "edges": []},
            {"subsystems": [{"id": 1, "A": [[1]]}, {"id": 2, "A": [[1, 0], [0, 1]]}], "edges": []},
            {"subsystems": [{"id": 1, "A": [[1]]}], "edges": [[1, 2]]},
            {"subsystems": [{"id": 1, "A": [[1, 2]]}], "edges": []},
            {"modes": [1, 2], "edges": [[1, 2]], "gains_override": {"log_mu": [], "log_lambda": []}},
        ],
    )
    def test_invalid(self, data):
        with pytest.raises(ValueError):
            system_from_dict(data)


class TestSignalFile:
    @pytest.mark.parametrize(
        "signal",
        [
            SwitchingSignal(period=(3, 1, 2, 1, 3, 2)),
            SwitchingSignal(prelude=(5, 5), period=(1, 2)),
            SwitchingSignal(prelude=(1, 2, 2, 1)),
            SwitchingSignal(period=("idle", "boost")),
        ],
    )
    def test_round_trip(self, tmp_path, signal):
        path = tmp_path / "sig.txt"
        write_signal(signal, path)
        assert read_signal(path) == signal

    def test_header(self):
        text = format_signal(SwitchingSignal(period=(1, 2, 1, 3, 2, 3)))
        assert text.splitlines()[0] == "# period: 6"
        assert len(text.splitlines()) == 7

    def test_comments_and_blank_lines(self):
        sig = parse_signal("# period: 2\n# made by hand\n\n1\n2\n")
        assert sig.period == (1, 2)

    @pytest.mark.parametrize("text", ["# period: 3\n1\n2\n", "# prefix: 1\n1\n2\n", "# period: 0\n"])
    def test_count_mismatch(self, text):
        with pytest.raises(ValueError):
            parse_signal(text)


class TestReport:
    def test_self_contained(self, five_modes):
        report = synthesis_report(five_modes, synthesize(five_modes), "feasible", 1e-3)
        report = json.loads(json.dumps(report))
        check = verify_report(report)
        assert check["consistent"]
        assert check["ratio"] == pytest.approx(report["ratio"]["ratio"])

    def test_tampering_detected(self, five_modes):
        report = json.loads(json.dumps(synthesis_report(five_modes, synthesize(five_modes))))
        for g in report["gains"]:
            if g["edge"] == [2, 1]:
                g["log_mu"] += 0.5
        assert not verify_report(report)["consistent"]

    def test_bad_certificate_detected(self, five_modes):
        report = json.loads(json.dumps(synthesis_report(five_modes, synthesize(five_modes))))
        report["certificates"][3]["lambda"] = 1.01
        assert not verify_report(report)["consistent"]


class TestCertifyCommand:
    def test_five_modes(self, tmp_path, capsys):
        rep = tmp_path / "cert.json"
        code, out, _ = run(["certify", FIVE, "--seed", 1, "--report", rep], capsys)
        assert code == 0
        assert "0.826873" in out and "5.13065" in out
        data = json.loads(rep.read_text())
        mu = {tuple(g["edge"]): g["mu"] for g in data["gains"]}
        assert mu[(3, 1)] == pytest.approx(5.7761, abs=5e-3)
        assert mu[(3, 3)] == 1.0
        assert all(c["sampled_ok"] for c in data["certificates"])

    def test_single_mode_table(self, tmp_path, capsys):
        path = write_json(tmp_path / "one.json", {"subsystems": [{"id": 1, "A": [[0.5]]}], "edges": [[1, 1]]})
        code, out, _ = run(["certify", path], capsys)
        assert code == 0
        assert len(out.split("\n\n")[0].splitlines()) == 2

    def test_jordan_block_unstable(self, tmp_path, capsys):
        path = write_json(tmp_path / "j.json", {"subsystems": [{"id": 1, "A": [[1, 1], [0, 1]]}], "edges": []})
        rep = tmp_path / "r.json"
        code, _, _ = run(["certify", path, "--report", rep], capsys)
        c = json.loads(rep.read_text())["certificates"][0]
        norm = np.linalg.norm([[1, 1], [0, 1]], 2)
        assert code == 0
        assert c["class"] == "U"
        assert c["lambda"] == pytest.approx(1 + 2 * norm)

    def test_q_override(self, tmp_path, capsys):
        rep = tmp_path / "r.json"
        code, _, _ = run(["certify", FIVE, "--q-matrix", "1=[[2,0],[0,2]]", "--report", rep], capsys)
        assert code == 0
        P1 = np.array(json.loads(rep.read_text())["certificates"][0]["P"])
        np.testing.assert_allclose(P1, 2 * np.array([[4.75446, -0.58036], [-0.58036, 5.44643]]), atol=1e-4)

    @pytest.mark.parametrize("flag", ["9=[[1,0],[0,1]]", "1=[[1,0]", "1"])
    def test_bad_q(self, capsys, flag):
        code, _, err = run(["certify", FIVE, "--q-matrix", flag], capsys)
        assert code == 2 and "error" in err

    def test_missing_file(self, capsys):
        code, _, err = run(["certify", "/nonexistent.json"], capsys)
        assert code == 2

    def test_singular_matrix(self, tmp_path, capsys):
        path = write_json(tmp_path / "s.json", {"subsystems": [{"id": 1, "A": [[1, 1], [1, 1]]}], "edges": []})
        code, _, err = run(["certify", path], capsys)
        assert code == 2 and "rank" in err


class TestSynthesizeCommand:
    def test_five_modes(self, tmp_path, capsys):
        sig, rep = tmp_path / "s.txt", tmp_path / "r.json"
        code, out, _ = run(["synthesize", FIVE, "--signal-out", sig, "--report", rep], capsys)
        assert code == 0
        signal = read_signal(sig)
        assert sig.read_text().startswith("# period: 6\n")
        body = signal.period
        rotations = {body[i:] + body[:i] for i in range(6)}
        assert (3, 1, 2, 1, 3, 2) in rotations
        data = json.loads(rep.read_text())
        assert data["verification"]["consistent"]
        assert {tuple(e) for e in data["lp"]["support"]} == {(1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2)}

    def test_signal_to_stdout(self, capsys):
        code, out, _ = run(["synthesize", FIVE], capsys)
        assert code == 0 and "# period: 6" in out

    def test_two_modes_infeasible(self, tmp_path, capsys):
        rep = tmp_path / "r.json"
        code, _, err = run(["synthesize", TWO, "--report", rep], capsys)
        assert code == 3 and "infeasible" in err
        assert json.loads(rep.read_text())["lp"]["status"] == "infeasible"

    def test_stable_self_loop(self, tmp_path, capsys):
        path = write_json(
            tmp_path / "loop.json",
            {"subsystems": [{"id": 1, "A": [[0.5, 0], [0, 0.5]]}, {"id": 2, "A": [[2, 0], [0, 1]]}],
             "edges": [[1, 1], [1, 2], [2, 1]]},
        )
        sig = tmp_path / "s.txt"
        code, _, _ = run(["synthesize", path, "--signal-out", sig], capsys)
        assert code == 0
        assert read_signal(sig).period == (1,)

    def test_undecided_exit(self, monkeypatch, capsys):
        def boom(*a, **k):
            raise UndecidedError("budget exhausted")

        monkeypatch.setattr(cli, "synthesize", boom)
        code, _, err = run(["synthesize", FIVE], capsys)
        assert code == 4 and "undecided" in err


class TestCheckCommand:
    def test_five_mode_signal(self, tmp_path, capsys):
        sig = tmp_path / "s.txt"
        write_signal(SwitchingSignal(period=(3, 1, 2, 1, 3, 2)), sig)
        code, out, _ = run(["check", FIVE, sig, "--horizon", 600], capsys)
        assert code == 0
        rows = [l.split() for l in out.split("\n\n")[0].splitlines()[1:]]
        assert len(rows) == 100
        assert all(float(r[-1]) == pytest.approx(0.99, abs=0.01) for r in rows)
        assert "stabilizing:           True" in out

    def test_constant_unstable(self, tmp_path, capsys):
        sig = tmp_path / "s.txt"
        write_signal(SwitchingSignal.constant(4), sig)
        code, out, _ = run(["check", FIVE, sig, "--horizon", 10], capsys)
        assert code == 0
        assert "tends to 0" in out and "period ratio:          inf" in out

    def test_alternating(self, tmp_path, capsys):
        sig = tmp_path / "s.txt"
        write_signal(SwitchingSignal(period=(1, 2)), sig)
        code, out, _ = run(["check", TWO, sig, "--horizon", 100], capsys)
        assert code == 0 and "period ratio:          9.5" in out

    def test_inadmissible(self, tmp_path, capsys):
        sig = tmp_path / "s.txt"
        sig.write_text("# prefix: 4\n1\n2\n2\n1\n")
        code, _, err = run(["check", TWO, sig], capsys)
        assert code == 2 and "t=1" in err

    def test_periodic_needs_horizon(self, tmp_path, capsys):
        sig = tmp_path / "s.txt"
        write_signal(SwitchingSignal(period=(1, 2)), sig)
        code, _, err = run(["check", TWO, sig], capsys)
        assert code == 2 and "horizon" in err


class TestSimulateCommand:
    def read_csv(self, path):
        with open(path) as fh:
            return list(csv.DictReader(fh))

    def test_header_and_decay(self, tmp_path, capsys):
        sig, out = tmp_path / "s.txt", tmp_path / "t.csv"
        write_signal(SwitchingSignal(period=(1, 2, 1, 3, 2, 3)), sig)
        code, _, _ = run(["simulate", FIVE, sig, "--x0=-1000,1000", "--horizon", 120, "--output", out], capsys)
        assert code == 0
        assert out.read_text().splitlines()[0] == "t,mode,x_1,x_2,norm,lyap,envelope"
        rows = self.read_csv(out)
        assert len(rows) == 121
        norms = [float(r["norm"]) for r in rows]
        assert norms[-1] < 1e-3
        assert all(float(r["norm"]) <= float(r["envelope"]) * (1 + 1e-9) for r in rows)

    def test_zero_state(self, tmp_path, capsys):
        sig = tmp_path / "s.txt"
        write_signal(SwitchingSignal(period=(1, 2)), sig)
        code, out, _ = run(["simulate", FIVE, sig, "--x0", "0,0", "--horizon", 5], capsys)
        rows = list(csv.DictReader(out.splitlines()))
        assert code == 0
        assert all(float(r["x_1"]) == float(r["x_2"]) == 0.0 for r in rows)

    def test_unstable_growth(self, tmp_path, capsys):
        sig = tmp_path / "s.txt"
        write_signal(SwitchingSignal.constant(4), sig)
        code, out, _ = run(["simulate", FIVE, sig, "--x0", "1,0", "--horizon", 8], capsys)
        rows = list(csv.DictReader(out.splitlines()))
        norms = np.array([float(r["norm"]) for r in rows])
        rho = np.max(np.abs(np.linalg.eigvals([[1.2, 0.7], [1.6, 0.1]])))
        assert code == 0
        assert np.all(norms[1:] / norms[:-1] <= np.sqrt(5.1306) + 1e-9)
        assert (norms[-1] / norms[-2]) == pytest.approx(rho, rel=1e-2)

    def test_dimension_mismatch(self, tmp_path, capsys):
        sig = tmp_path / "s.txt"
        write_signal(SwitchingSignal(period=(1, 2)), sig)
        code, _, err = run(["simulate", FIVE, sig, "--x0", "1,2,3", "--horizon", 5], capsys)
        assert code == 2 and "dimension" in err

    def test_needs_matrices(self, tmp_path, capsys):
        sig = tmp_path / "s.txt"
        write_signal(SwitchingSignal(period=(1, 2)), sig)
        code, _, err = run(["simulate", TWO, sig, "--horizon", 5], capsys)
        assert code == 2


class TestOracleCommand:
    def test_five_modes(self, capsys):
        code, out, _ = run(["oracle", FIVE, "--max-len", 6], capsys)
        assert code == 0
        assert "1,2,1,3,2,3,1" in out

    def test_two_modes(self, capsys):
        code, out, _ = run(["oracle", TWO], capsys)
        assert code == 3
        assert "9.5" in out


def test_console_script():
    res = subprocess.run(
        [sys.executable, "-m", "switchsynth.cli", "synthesize", TWO],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 3
