import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvnonmarkov.cli import COEFF_HEADER, ROW_HEADER, main
from cvnonmarkov.exceptions import ValidationError
from cvnonmarkov.gaussian import make_mts, make_sts, random_state
from cvnonmarkov.io import (
    format_covariance,
    parse_covariance_csv,
    parse_covariance_json,
    read_covariance,
    write_covariance,
)

TMSV_GIP = np.sinh(1.0) ** 2 / 4


# -- covariance files ---------------------------------------------------------

@given(seed=st.integers(0, 2**31), nbar=st.floats(0.1, 5.0), fmt=st.sampled_from(["json", "csv"]))
def test_round_trip_is_exact(seed, nbar, fmt):
    sigma = random_state(nbar, seed)
    text = format_covariance(sigma, fmt)
    back = parse_covariance_json(text) if fmt == "json" else parse_covariance_csv(text)
    assert np.array_equal(back, sigma)


def test_csv_layouts_and_comments():
    sigma = make_sts(1.0, 0.5)
    rows = "\n".join(",".join(repr(float(v)) for v in row) for row in sigma)
    assert np.array_equal(parse_covariance_csv("# TMSV\n" + rows + "\n"), sigma)


def test_csv_diagnostics_name_line_and_field():
    text = "1,0,0,0\n0,1,0,x\n0,0,1,0\n0,0,0,1\n"
    with pytest.raises(ValidationError, match=r":2: field 4"):
        parse_covariance_csv(text)
    with pytest.raises(ValidationError, match="expected 16 values"):
        parse_covariance_csv("1,0,0")


def test_json_diagnostics():
    with pytest.raises(ValidationError, match="invalid JSON"):
        parse_covariance_json("{")
    with pytest.raises(ValidationError, match="'sigma'"):
        parse_covariance_json('{"s": 1}')
    with pytest.raises(ValidationError, match=r"sigma\[1\] must have 4 entries"):
        parse_covariance_json(json.dumps({"sigma": [[1, 0, 0, 0], [0, 1], [0, 0, 1, 0], [0, 0, 0, 1]]}))
    with pytest.raises(ValidationError, match="not a number"):
        parse_covariance_json(json.dumps({"sigma": [[1, 0, 0, "a"]] + [[0, 0, 0, 1]] * 3}))


def test_asymmetric_file_is_rejected(tmp_path):
    s = np.eye(4)
    s[0, 2] = 0.3
    path = tmp_path / "bad.csv"
    path.write_text(",".join(str(v) for v in s.ravel()))
    with pytest.raises(ValidationError):
        read_covariance(path)


def test_write_then_read(tmp_path):
    sigma = make_mts(1.2, 0.3)
    for name in ("s.json", "s.csv"):
        write_covariance(tmp_path / name, sigma)
        assert np.array_equal(read_covariance(tmp_path / name), sigma)


# -- command line ---------------------------------------------------------------

def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gip_command(tmp_path, capsys):
    write_covariance(tmp_path / "vac.json", np.eye(4))
    assert run(["gip", str(tmp_path / "vac.json")], capsys)[:2] == (0, "0\n")
    write_covariance(tmp_path / "tmsv.csv", make_sts(1.0, 0.5))
    code, out, _ = run(["gip", str(tmp_path / "tmsv.csv")], capsys)
    assert code == 0 and float(out) == pytest.approx(TMSV_GIP, abs=1e-8)


def test_gip_command_rejects_unphysical(tmp_path, capsys):
    (tmp_path / "half.csv").write_text(",".join(str(v) for v in (0.5 * np.eye(4)).ravel()))
    code, out, err = run(["gip", str(tmp_path / "half.csv")], capsys)
    assert code == 2 and out == "" and "uncertainty" in err
    code, _, err = run(["gip", str(tmp_path / "missing.csv")], capsys)
    assert code == 2 and "cannot read" in err


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["nope"])
    assert info.value.code == 2


def test_damping_sweep_output(capsys):
    code, out, _ = run(["damping-sweep", "--alpha", "0.1,0.5", "--nbar", "1", "--probe", "sts,mts"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# config ")
    assert lines[1] == ROW_HEADER
    rows = [ln.split(",") for ln in lines[2:]]
    assert len(rows) == 4
    assert [r[5] for r in rows] == ["sts", "mts", "sts", "mts"]
    assert all(r[2] == r[3] == r[4] == "" for r in rows)
    assert all(float(r[6]) > 0 and float(r[7]) > 0 for r in rows)


def test_config_echo_reruns_identically(tmp_path, capsys):
    out_path = tmp_path / "a.csv"
    assert main(["damping-sweep", "--alpha", "0:0.4:3", "--nbar", "0.5", "--random", "2",
                 "--seed", "7", "--out", str(out_path)]) == 0
    first = out_path.read_text()
    assert len(first.splitlines()) == 2 + 3 * 1 * 3
    rerun = tmp_path / "b.csv"
    assert main(["damping-sweep", "--config", str(out_path), "--out", str(rerun)]) == 0
    again = rerun.read_text()
    assert again.splitlines()[1:] == first.splitlines()[1:]
    echo = [json.loads(t.splitlines()[0][len("# config "):]) for t in (first, again)]
    assert {k: v for k, v in echo[0].items() if k != "out"} == {k: v for k, v in echo[1].items() if k != "out"}


def test_random_probes_are_byte_identical_across_jobs(tmp_path):
    outs = []
    for jobs in ("1", "3"):
        path = tmp_path / f"r{jobs}.csv"
        main(["damping-sweep", "--alpha", "0.1,0.2,0.3", "--random", "3", "--seed", "5",
              "--jobs", jobs, "--out", str(path)])
        outs.append(path.read_text().splitlines()[1:])
    assert outs[0] == outs[1]


def test_toml_config(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('alpha = [0.2]\nnbar = [1.0]\nprobe = ["mts"]\n')
    code, out, _ = run(["damping-sweep", "--config", str(cfg)], capsys)
    assert code == 0 and out.splitlines()[2].split(",")[5] == "mts"


def test_bad_flag_values_exit_2(capsys):
    assert run(["damping-sweep", "--alpha=-1"], capsys)[0] == 2
    assert run(["qbm-sweep", "--temp", "-1"], capsys)[0] == 2


def test_coeffs_command(capsys):
    code, out, _ = run(["coeffs", "--temp", "0", "--w0", "4", "--tmax", "1", "--dt", "0.5"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[1] == COEFF_HEADER
    first = [float(v) for v in lines[2].split(",")]
    assert first == [0.0, 0.0, 0.0, 0.0, 0.0]
    assert len(lines) == 2 + 3


def test_qbm_sweep_fills_bath_columns(capsys):
    code, out, _ = run(["qbm-sweep", "--alpha", "0.5", "--temp", "1", "--w0", "4", "--tmax", "10"], capsys)
    assert code == 0
    rows = [ln.split(",") for ln in out.splitlines()[2:]]
    assert [r[5] for r in rows] == ["sts", "mts"]
    assert rows[0][2:5] == ["1", "4", "1"]


def test_file_probe(tmp_path, capsys):
    write_covariance(tmp_path / "p.json", make_mts(1.0, 0.5))
    code, out, _ = run(["witness", "--model", "damping", "--probe", f"file:{tmp_path / 'p.json'}"], capsys)
    assert code == 0
    assert out.splitlines()[2].split(",")[5] == f"file:{tmp_path / 'p.json'}"


def test_measure_command(capsys):
    code, out, _ = run(["measure", "--model", "damping", "--alpha", "0.2", "--nbar", "0.5", "--n-random", "5"], capsys)
    assert code == 0
    row = out.splitlines()[2].split(",")
    assert row[5].split("[")[0] in {"sts", "mts", "random", "general"}
    assert float(row[6]) > 0


def test_module_entry_point(tmp_path):
    write_covariance(tmp_path / "vac.json", np.eye(4))
    res = subprocess.run([sys.executable, "-m", "cvnonmarkov", "gip", str(tmp_path / "vac.json")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout == "0\n"
