import json
import subprocess
import sys

import numpy as np
import pytest

from selbias.cli import build_parser, main, run_config
from selbias.io import CSV_HEADER, RunConfig, parse_csv_records

SMALL = {
    "premium": ["--k", "3", "--replicas", "2000"],
    "profile": ["--k", "3", "--n", "8", "--paths", "2000", "--nested", "100", "--alpha", "0.1,0.5"],
    "concentration": ["--k", "3", "--n", "100", "--paths", "500", "--alpha", "0.25,1"],
    "bounds": ["--n-grid", "10,20", "--k-grid", "2,5", "--paths", "500", "--crude-replicas", "500"],
    "stopping": ["--dist", "rademacher", "--cap", "10", "--paths", "1000", "--inner", "100"],
    "curse": ["--k", "3", "--n", "10", "--paths", "1000", "--means", "0,-0.5,0.25"],
    "gtable": ["--k-max", "4"],
}


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("command", sorted(SMALL))
def test_every_subcommand_emits_the_fixed_schema(command, capsys):
    code, out, _ = run([command] + SMALL[command], capsys)
    assert code == 0
    rows = parse_csv_records(out)
    assert rows and all(r["series"] for r in rows)
    assert out.splitlines()[0] == ",".join(CSV_HEADER)


def test_audit_subcommand(tmp_path, capsys):
    p = tmp_path / "scores.csv"
    p.write_text("a,b,c\n1,2,0\n0,1,1\n2,0,1\n1,1,1\n")
    code, out, _ = run(["audit", "--input", str(p), "--replicas", "2000"], capsys)
    assert code == 0
    rows = {(r["series"], r["i_or_alpha"]): r for r in parse_csv_records(out)}
    assert rows[("model_mean", "1")]["value"] == "1"
    assert rows[("winner", "")]["value"] == "1"
    assert float(rows[("debiased_mean", "")]["value"]) <= float(rows[("winner_mean", "")]["value"])


def test_profile_rows_and_not_reached(capsys):
    code, out, _ = run(["profile", "--k", "10", "--n", "12", "--paths", "4000"], capsys)
    rows = parse_csv_records(out)
    psi = [r for r in rows if r["series"] == "psi"]
    assert [int(r["i_or_alpha"]) for r in psi] == list(range(1, 13))
    decay = [r for r in rows if r["series"] == "decay_time"]
    assert decay[0]["value"] == "nan"


def test_bounds_series(capsys):
    _, out, _ = run(["bounds"] + SMALL["bounds"], capsys)
    assert {r["series"] for r in parse_csv_records(out)} == {"empirical", "envelope", "crude"}


def test_stopping_includes_exact_oracle(capsys):
    _, out, _ = run(["stopping"] + SMALL["stopping"], capsys)
    series = {r["series"] for r in parse_csv_records(out)}
    assert {"lhs", "rhs", "gap", "exact_lhs", "exact_rhs"} <= series


def test_same_seed_same_bytes_across_workers(tmp_path):
    outs = []
    for w in ("1", "8", "1"):
        p = tmp_path / f"o{len(outs)}.csv"
        assert main(["profile", "--dist", "uniform_centered", "--k", "4", "--n", "30", "--paths", "5000",
                     "--nested", "100", "--workers", w, "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_json_output_and_metadata(tmp_path):
    p = tmp_path / "o.json"
    assert main(["premium", "--dist", "student_t5", "--k", "2", "--rho", "0.3", "--replicas", "1000",
                 "--seed", "17", "--format", "json", "--out", str(p)]) == 0
    doc = json.loads(p.read_text())
    md = doc["metadata"]
    assert md["root_seed"] == 17 and md["backend"] in ("numba", "numpy")
    assert {"selbias", "numpy", "scipy", "python"} <= set(md["versions"])
    assert md["wall_time_s"] >= 0
    assert any("unit variance" in n for n in md["notes"])
    assert any("not itself a member" in n for n in md["notes"])
    assert RunConfig.from_dict(md["config"]).seed == 17
    assert doc["records"][0]["series"] == "premium"


def test_cov_file(tmp_path, capsys):
    c = tmp_path / "cov.csv"
    np.savetxt(c, [[1.0, 0.5], [0.5, 2.0]], delimiter=",")
    code, out, _ = run(["premium", "--cov", str(c), "--replicas", "5000"], capsys)
    rows = parse_csv_records(out)
    assert code == 0 and rows[1]["series"] == "premium_exact"


def test_run_config_round_trip_from_cli():
    args = build_parser().parse_args(["bounds", "--n-grid", "10,20", "--families", "rademacher"])
    cfg = run_config(args)
    assert RunConfig.from_json(cfg.to_json()) == cfg
    assert cfg.option("n_grid") == (10, 20)


@pytest.mark.parametrize("argv, code", [
    (["premium", "--k", "0"], 2),
    (["premium", "--dist", "cauchy"], 2),
    (["premium", "--sigma", "a,b"], 2),
    (["curse", "--k", "2", "--means", "0,1,2", "--paths", "10", "--n", "3"], 2),
    (["stopping", "--inner", "10", "--paths", "10"], 2),
    (["audit", "--input", "/nonexistent/file.csv"], 2),
    (["gtable", "--k-max", "0"], 2),
    (["premium", "--workers", "0"], 2),
    (["gtable", "--out", "/nonexistent/dir/x.csv"], 1),
])
def test_exit_codes(argv, code, capsys):
    try:
        got = main(argv)
    except SystemExit as exc:  # argparse usage errors
        got = exc.code
    assert got == code
    assert capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "selbias", "gtable", "--k-max", "2"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.splitlines()[2] == "g,gaussian,2,,,0.564189584,0"
