import csv
import io
import json
import math

import pytest

from flatweights import GridSpec, Weight
from flatweights import io as gio
from flatweights.cli import SWEEP_COLUMNS, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_constants_two_cell_example(capsys):
    code, out, _ = run(
        capsys, "constants", "--weight", "step:ratio=2,split=0.5", "--L", "1", "--n", "1",
        "--family", "dyadic", "--p", "2",
    )
    assert code == 0
    d = json.loads(out)
    assert d["v"] == 1 and d["family"] == "dyadic"
    assert d["a_p"][0]["value"] == pytest.approx(1.125, rel=1e-14)
    assert d["fujii_wilson"]["value"] == pytest.approx(7 / 6, rel=1e-14)
    assert d["fujii_wilson"]["witness"] == {"anchor": [0], "side": 2}


def test_constants_constant_weight(capsys):
    code, out, _ = run(capsys, "constants", "--weight", "flat:delta=0", "--n", "2", "--L", "3")
    d = json.loads(out)
    assert code == 0
    for key in ("a_1", "fujii_wilson", "hruscev", "log_ainfty"):
        assert d[key]["value"] == 1.0
    assert d["bmo_log"]["value"] == 0.0 and d["doubling"]["value"] == 4.0


def test_constants_aligned_dominates_dyadic(capsys):
    spec = ["--weight", "random:seed=3,range=2", "--L", "4", "--p", "1.5,3"]
    _, dy, _ = run(capsys, "constants", *spec, "--family", "dyadic")
    _, al, _ = run(capsys, "constants", *spec, "--family", "aligned")
    dy, al = json.loads(dy), json.loads(al)
    for key in ("a_1", "fujii_wilson", "hruscev", "log_ainfty", "bmo_log", "bmo_w_log"):
        assert al[key]["value"] >= dy[key]["value"] * (1 - 1e-12)
    for a, b in zip(al["a_p"], dy["a_p"]):
        assert a["value"] >= b["value"] * (1 - 1e-12)


def test_constants_csv_and_file_output(capsys, tmp_path):
    out = tmp_path / "c.csv"
    code, text, _ = run(
        capsys, "constants", "--weight", "step:ratio=2", "--L", "1", "--csv", "--out", str(out)
    )
    assert code == 0 and text == ""
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    byname = {(r["constant"], r["p"]): r for r in rows}
    assert float(byname[("a_p", "2.0")]["value"]) == 1.125
    assert byname[("jn_r_star", "")]["side"] == "2"


def test_constants_from_weight_file(capsys, tmp_path):
    path = tmp_path / "w.json"
    gio.write(Weight(GridSpec(1, 1), [2.0, 1.0]), path)
    code, out, _ = run(capsys, "constants", "--weight-file", str(path))
    assert code == 0 and json.loads(out)["a_1"]["value"] == 1.5


def test_verify_flat_example_passes(capsys):
    code, out, _ = run(capsys, "verify", "--weight", "flat:delta=0.05,shape=sin", "--checks", "embed_jn,bmo_chain")
    assert code == 0
    d = json.loads(out)
    assert d["pass"] is True
    assert [r["id"] for r in d["results"]] == ["embed_jn"] + ["bmo_chain"] * 3
    for r in d["results"]:
        assert set(r) == {"id", "lhs", "rhs", "ratio", "pass", "tol", "witness", "params"}


def test_verify_constant_weight_all_checks(capsys):
    code, out, _ = run(capsys, "verify", "--weight", "flat:delta=0", "--n", "2", "--L", "2")
    assert code == 0
    assert all(r["pass"] for r in json.loads(out)["results"])


def test_verify_failure_exits_one(capsys):
    code, out, _ = run(
        capsys, "verify", "--weight", "random:range=4,seed=1", "--L", "5",
        "--checks", "embed_thm11", "--tau", "0.01", "--tau-prime", "0.01",
    )
    assert code == 1
    assert json.loads(out)["pass"] is False


def test_verify_csv(capsys):
    code, out, _ = run(capsys, "verify", "--weight", "step:ratio=2", "--L", "1", "--checks", "rhi,subset", "--csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["id"] for r in rows] == ["rhi", "subset"]
    assert json.loads(rows[0]["params"])["family"] == "dyadic"


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "--weight", "flat:delta=0.1", "--checks", "nosuch"],
        ["verify", "--checks", "rhi"],
        ["constants", "--weight", "flat:delta=2"],
        ["constants", "--weight", "flat:delta=0.1", "--family", "hexagonal"],
        ["constants", "--weight-file", "/nonexistent/w.csv"],
        ["sweep", "--weight", "random:seed=1"],
        ["sweep", "--weight", "flat:delta=0.1", "--json"],
        ["sweep", "--weight", "flat:delta=0.1", "--deltas", "0:1:0"],
        ["sweep", "--weight", "flat:delta=0.1", "--deltas", "0.5,1.5"],
        ["sweep", "--weight", "flat:delta=0.1", "--jobs", "0"],
    ],
)
def test_input_errors_exit_two(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "error" in err


def test_argparse_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["constants", "--n", "3"])
    assert exc.value.code == 2
    capsys.readouterr()


def sweep(capsys, *extra):
    code, out, _ = run(capsys, "sweep", "--weight", "flat:shape=sin", "--L", "5", *extra)
    return code, out


def test_sweep_columns_and_monotone_fw(capsys):
    code, out = sweep(capsys, "--deltas", "0.01:0.2:10", "--checks", "embed_jn,bmo_chain")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == SWEEP_COLUMNS + ["pass_embed_jn", "pass_bmo_chain"]
    fw = [float(r["fw_minus_1"]) for r in rows]
    assert all(a < b for a, b in zip(fw, fw[1:]))
    assert all(r["pass_embed_jn"] == "1" for r in rows)
    assert rows[0]["p_star_w"] == "" and rows[0]["implied_c_ps"] == ""


def test_sweep_delta_zero_matches_constant_weight(capsys):
    code, out = sweep(capsys, "--deltas", "0", "--n", "2", "--L", "3")
    (row,) = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert float(row["fw_minus_1"]) == 0.0 and float(row["hruscev_minus_1"]) == 0.0
    assert float(row["bmo"]) == 0.0 and float(row["bmo_w"]) == 0.0
    assert row["jn_r_star"] == "inf" and float(row["embed_p"]) == 1.0
    assert float(row["doubling"]) == 4.0 and float(row["p_star_w"]) == 2.0
    assert float(row["implied_kappa"]) == pytest.approx(math.log(4) / 8, rel=1e-15)


def test_sweep_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--deltas", "0.02:0.2:4", "--checks", "rhi,left_open"]
    sweep(capsys, *args, "--out", str(a))
    sweep(capsys, *args, "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
