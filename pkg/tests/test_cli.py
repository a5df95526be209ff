import json
import os

import numpy as np
import pytest

from qtrack import cli, serialize
from qtrack.channels import random_channel, random_state
from qtrack.distances import WeightedSequence


@pytest.fixture
def workdir(tmp_path):
    a = {"bloch": [0.3, 0.2, 0.1]}
    b = {"bloch": [0.0, 0.0, 0.9]}
    t1 = {"bloch": [1.0, 0.0, 0.0]}
    t2 = {"bloch": [0.0, 0.0, 1.0]}
    paths = {}
    for name, payload in (("a", a), ("b", b), ("t1", t1), ("t2", t2)):
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(payload))
        paths[name] = str(p)
    problem = {
        "source": [{"pi": 0.5, **a}, {"pi": 0.5, **b}],
        "target": [{"pi": 0.5, **t1}, {"pi": 0.5, **t2}],
    }
    p = tmp_path / "problem.json"
    p.write_text(json.dumps(problem))
    paths["problem"] = str(p)
    paths["dir"] = tmp_path
    return paths


def test_matrix_roundtrip_bit_for_bit():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    text = json.dumps(serialize.matrix_to_json(m))
    back = serialize.matrix_from_json(json.loads(text))
    assert np.array_equal(back, m)


def test_state_channel_sequence_roundtrips():
    rng = np.random.default_rng(1)
    state = random_state(3, rng)
    back = serialize.state_from_json(json.loads(json.dumps(serialize.state_to_json(state))))
    assert np.array_equal(back.mat, state.mat)
    chan = random_channel(2, rng)
    back_c = serialize.channel_from_json(
        json.loads(json.dumps(serialize.channel_to_json(chan)))
    )
    assert np.array_equal(back_c.mat, chan.mat)
    seq = WeightedSequence([(0.25, random_state(2, rng)), (0.75, random_state(2, rng))])
    back_s = serialize.sequence_from_json(
        json.loads(json.dumps(serialize.sequence_to_json(seq)))
    )
    assert np.array_equal(back_s.priorities, seq.priorities)
    for x, y in zip(back_s.states, seq.states):
        assert np.array_equal(x.mat, y.mat)


def test_kraus_channel_input():
    payload = {
        "d": 2,
        "kraus": [
            serialize.matrix_to_json(np.sqrt(0.7) * np.eye(2)),
            serialize.matrix_to_json(np.sqrt(0.3) * np.diag([1.0, -1.0])),
        ],
    }
    choi = serialize.channel_from_json(payload)
    from qtrack.channels import check_cptp

    assert check_cptp(choi)["cp"]


def test_malformed_payloads_raise_format_error():
    with pytest.raises(serialize.FormatError):
        serialize.matrix_from_json({"rows": 2, "cols": 2, "re": [1.0], "im": [0.0]})
    with pytest.raises(serialize.FormatError):
        serialize.state_from_json({"what": 1})
    with pytest.raises(serialize.FormatError):
        serialize.state_from_json({"bloch": [2.0, 0.0, 0.0]})


def test_cli_distances(workdir, capsys):
    code = cli.main(["distances", "--measure", "F", "--a", workdir["a"], "--b", workdir["b"]])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert 0.0 <= out["value"] <= 1.0


def test_cli_analytic_trivial_fidelity_one(workdir, tmp_path, capsys):
    code = cli.main(
        [
            "analytic",
            "--src", workdir["t1"], workdir["t2"],
            "--tgt", workdir["t1"], workdir["t2"],
            "--pi", "0.5", "0.5",
        ]
    )
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["fidelity"] - 1.0) < 1e-9


def test_cli_solve_and_bloch_output(workdir, capsys):
    code = cli.main(
        ["solve", "--problem", workdir["problem"], "--objective", "FHSavg1", "--feasible", "cptp"]
    )
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["cptp"]["cp"] and out["cptp"]["tp"]
    assert len(out["output_bloch"]) == 2
    # the numeric route must agree with the closed-form route
    code = cli.main(
        [
            "analytic",
            "--src", workdir["a"], workdir["b"],
            "--tgt", workdir["t1"], workdir["t2"],
        ]
    )
    analytic_out = json.loads(capsys.readouterr().out)
    assert abs(out["value"] - analytic_out["fidelity"]) <= 1e-6


def test_cli_stabilize_value(capsys):
    code = cli.main(["stabilize", "--p", "0.115", "--theta", "0.715"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["f_dif"] - 0.026) < 1e-3


def test_cli_stabilize_grid_csv(tmp_path):
    out = tmp_path / "grid.csv"
    code = cli.main(["stabilize", "--grid", "5", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "p,theta,ddr1,ddr2,sdr,dn,qc"
    assert len(lines) == 26


def test_cli_seed_reproducibility(tmp_path):
    out1, out2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    assert cli.main(["scatter-bounds", "--d", "3", "--n", "20", "--seed", "9", "--out", str(out1)]) == 0
    assert cli.main(["scatter-bounds", "--d", "3", "--n", "20", "--seed", "9", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_cli_exit_code_invalid(workdir, capsys):
    code = cli.main(["distances", "--measure", "F", "--a", "/nonexistent.json", "--b", workdir["b"]])
    assert code == 2
    bad = workdir["dir"] / "bad.json"
    bad.write_text("{ not json")
    code = cli.main(["distances", "--measure", "F", "--a", str(bad), "--b", workdir["b"]])
    assert code == 2
    err = capsys.readouterr().err
    assert "line" in err


def test_cli_exit_code_solver_failure(workdir, monkeypatch):
    from qtrack import tracking as trk
    from qtrack.sdp import SolverError

    def boom(*args, **kwargs):
        raise SolverError("synthetic breakdown")

    monkeypatch.setattr(trk, "solve_tracking", boom)
    code = cli.main(
        ["solve", "--problem", workdir["problem"], "--objective", "FHSavg1"]
    )
    assert code == 3


def test_cli_channel_inspection(tmp_path, capsys):
    rng = np.random.default_rng(2)
    chan = random_channel(2, rng)
    path = tmp_path / "chan.json"
    path.write_text(json.dumps(serialize.channel_to_json(chan)))
    code = cli.main(["channel", "--in", str(path)])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["cptp"]["cp"] and out["cptp"]["tp"]
    assert "canonical" in out


def test_cli_au_check(workdir, capsys):
    code = cli.main(
        ["au-check", "--src", workdir["t1"], workdir["t2"], "--tgt", workdir["t1"], workdir["t2"]]
    )
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["feasible"]


def test_cli_multistep_chain(workdir, tmp_path, capsys):
    task = {
        "source": [
            {"pi": 0.5, "bloch": [np.cos(np.pi / 4), 0.0, np.sin(np.pi / 4)]},
            {"pi": 0.5, "bloch": [np.cos(np.pi / 4), 0.0, -np.sin(np.pi / 4)]},
        ],
    }
    task["target"] = task["source"]
    tpath = tmp_path / "task.json"
    tpath.write_text(json.dumps(task))
    npath = tmp_path / "noise.json"
    npath.write_text(json.dumps([{"lam": [0.7, 0.46, 0.322], "t": [0, 0, 0.6341009383371073]}]))
    code = cli.main(
        ["multistep", "--steps", "2", "--noise", str(npath), "--task", str(tpath), "--seed", "0"]
    )
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["fidelity"] > out["single_step_fidelity"]


def test_cli_bench(capsys):
    code = cli.main(["bench", "--d", "8", "--repeats", "2", "--seed", "3"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("measure,mean_seconds")


def test_emit_plotdata_formatting():
    rows = [{"p": 0.1, "theta": 0.2, "ddr1": 1, "ddr2": 1, "sdr": 1, "dn": 1, "qc": 1}]
    text = cli.emit_plotdata(rows, "stabilize_grid")
    assert "1.0000000000e-01" in text
