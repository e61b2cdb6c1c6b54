import csv
import io
import json

import pytest

from conftest import BENCH
from sketchsynth.cli import EXIT_INPUT, EXIT_SAT, EXIT_UNSAT, main

REX = str(BENCH / "rex" / "rex.sk")
SAFE = str(BENCH / "rex" / "safe.props")
TIGHT = str(BENCH / "rex" / "tight.props")


def test_feasible_sat(capsys):
    assert main(["feasible", "-s", REX, "-p", SAFE, "-b", "3"]) == EXIT_SAT
    out = capsys.readouterr().out
    assert out.startswith("SAT\n")
    assert "witness: X=2, Y=YA=1, Z=1" in out
    assert "P<=0.4 [ F (s = 3) ] : 0" in out


def test_feasible_unsat(capsys):
    assert main(["feasible", "-s", REX, "-p", TIGHT, "-b", "0"]) == EXIT_UNSAT
    assert capsys.readouterr().out == "UNSAT\n"


def test_missing_file(capsys):
    assert main(["feasible", "-s", "nope.sk", "-p", SAFE]) == EXIT_INPUT
    assert "cannot read nope.sk" in capsys.readouterr().err


def test_syntax_error_is_an_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.sk"
    bad.write_text("module m\n  s : [0..1] init 0;\n  s = 0 -> ;\nendmodule\n")
    assert main(["feasible", "-s", str(bad), "-p", SAFE]) == EXIT_INPUT
    assert f"{bad}:3:" in capsys.readouterr().err


def test_unknown_flag():
    assert main(["feasible", "--frobnicate"]) == EXIT_INPUT


def test_optimal_value(capsys):
    assert main(["optimal", "-s", REX, "--goal", "(s=3)", "--eps", "0.05", "-b", "3"]) == EXIT_SAT
    assert "value: 1\n" in capsys.readouterr().out


def test_optimal_min(capsys):
    assert main(["optimal", "-s", REX, "--goal", "s=3", "--mode", "min", "-b", "3"]) == EXIT_SAT
    assert "value: 0\n" in capsys.readouterr().out


def test_optimal_bad_eps(capsys):
    assert main(["optimal", "-s", REX, "--goal", "s=3", "--eps", "1.0"]) == EXIT_INPUT
    assert "--eps" in capsys.readouterr().err


def test_optimal_bad_goal(capsys):
    assert main(["optimal", "-s", REX, "--goal", "s+"]) == EXIT_INPUT


def test_enumerate_csv(capsys):
    assert main(["enumerate", "-s", REX, "-p", SAFE, "-b", "3"]) == EXIT_SAT
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["realization", "cost", "P<=0.4 [ F (s = 3) ]", "P<=0 [ F oob ]", "feasible"]
    assert len(rows) == 7
    assert rows[1][:2] == ["X=XA=1, Y=3, Z=1", "3"]


def test_enumerate_limit(capsys):
    main(["enumerate", "-s", REX, "-p", SAFE, "--limit", "2"])
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4
    assert lines[-1] == "# truncated after 2 of 6 rows"


def test_enumerate_unsatisfiable_constraints(tmp_path, capsys):
    sk = tmp_path / "none.sk"
    sk.write_text("hole A either { a0 is 0, a1 is 1 }\nconstraint a0 & a1;\n"
                  "module m\n  s : [0..1] init 0;\n  s = 0 -> s'=A;\n  s = 1 -> true;\nendmodule\n")
    assert main(["enumerate", "-s", str(sk)]) == EXIT_UNSAT
    captured = capsys.readouterr()
    assert captured.out.splitlines() == ["realization,cost,P<=0 [ F oob ],feasible"]
    assert "UNSAT" in captured.err


def test_stats_file(tmp_path):
    stats = tmp_path / "stats.json"
    main(["feasible", "-s", REX, "-p", TIGHT, "-b", "0", "--stats", str(stats)])
    data = json.loads(stats.read_text())
    assert data["result"] == "UNSAT"
    assert data["witness"] is None
    assert sum(data["pruned_per_iteration"]) == 4


def test_stats_stable_across_runs(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"s{i}.json"
        main(["feasible", "-s", REX, "-p", SAFE, "-b", "3", "--stats", str(path)])
        data = json.loads(path.read_text())
        data.pop("wall_ms")
        outs.append(data)
    assert outs[0] == outs[1]


def test_dump_ce(capsys):
    main(["feasible", "-s", REX, "-p", SAFE, "-b", "3", "--dump-ce"])
    err = capsys.readouterr().err
    assert "// counterexample for property 0: commands [0, 2]" in err
    assert "endmodule" in err


def test_compare_dpm_at_seventy_percent(tmp_path, capsys):
    dpm = str(BENCH / "dpm" / "dpm.sk")
    props = tmp_path / "dpm.props"
    props.write_text((BENCH / "dpm" / "dpm.props").read_text()
                     + "P>=0.623466 [F t=8 & fail=0]\n")
    assert main(["compare", "-s", dpm, "-p", str(props)]) == EXIT_SAT
    report = json.loads(capsys.readouterr().out)
    assert report["cegis"]["result"] == report["baseline"]["result"] == "SAT"
    assert report["cegis"]["iterations"] < report["baseline"]["iterations"]
    hist = {int(k): v for k, v in report["conflict_size_histogram"].items()}
    assert sum(hist.values()) == len(report["cegis"]["conflict_sizes"])
    # the arrival hole sits in every level command, so a counterexample that
    # needs all levels blocks a single realization; most conflicts are smaller
    smaller = sum(v for k, v in hist.items() if k < report["holes"])
    assert smaller > hist.get(report["holes"], 0)
    assert set(report["hole_frequency"]) == {"K0", "K1", "K2", "K3", "A"}
    assert report["hole_frequency"]["K3"] < report["hole_frequency"]["A"]


def test_compare_single_realization(tmp_path, capsys):
    sk = tmp_path / "one.sk"
    sk.write_text("hole A either { 1 }\nmodule m\n  s : [0..1] init 0;\n  s = 0 -> s'=A;\n"
                  "  s = 1 -> true;\nendmodule\n")
    assert main(["compare", "-s", str(sk)]) == EXIT_SAT
    report = json.loads(capsys.readouterr().out)
    assert report["cegis"]["iterations"] == report["baseline"]["iterations"] == 1


@pytest.mark.parametrize("command", ["feasible", "optimal", "enumerate", "compare"])
def test_help(command, capsys):
    assert main([command, "--help"]) == EXIT_SAT
    assert "--sketch" in capsys.readouterr().out
