import csv
import json
import subprocess
import sys

import pytest

from xsblab.cli import PRESETS, list_presets, main


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _yaml(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_quotient_run(tmp_path):
    out = tmp_path / "q.csv"
    rc = main(["run", "quotient", "--case", "thm41", "--s", "-0.3", "--bprime", "-0.46", "--b", "0.55",
               "--seed", "7", "--budget", "8", "--output", str(out)])
    assert rc == 0
    rows = _rows(out)
    assert len(rows) == 1
    r = rows[0]
    assert r["case_id"] == "thm41" and r["seed"] == "7" and r["admissible"] == "true"
    assert r["grid"].startswith("torus_1d/")
    assert float(r["max_quotient"]) > 0 and r["refinement_ratio"]
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["seed"] == 7 and side["geometry"] == [r["grid"]]
    assert side["config"]["params"]["case"] == "thm41"
    assert "version" in side


def test_counterexample_run(tmp_path):
    out = tmp_path / "c.csv"
    rc = main(["counterexample", "--family", "ex53", "--s", "-0.25", "--n", "4,8,16", "--output", str(out)])
    assert rc == 0
    rows = _rows(out)
    summary = rows[-1]
    assert summary["n"] == "summary"
    assert float(summary["predicted_slope"]) == pytest.approx(0.5)
    assert all(r["geometry"] and r["seed"] == "0" for r in rows)


def test_config_file_and_flag_override(tmp_path):
    cfg = _yaml(tmp_path, """
kind: norm
seed: 3
output: {out}
geometry:
  domain_kind: torus_2d
  modes_per_axis: 6
params:
  s: 0.5
  b: -0.6
  count: 2
""".format(out=tmp_path / "n.csv"))
    assert main(["norm", "--config", cfg, "--b", "0.6"]) == 0
    rows = _rows(tmp_path / "n.csv")
    assert len(rows) == 2
    assert rows[0]["b"] == "0.59999999999999998"
    assert rows[0]["seed"] == "3"
    assert float(rows[0]["xsb_norm"]) == pytest.approx(float(rows[0]["conjugate_dual_norm"]), rel=1e-12)


def test_missing_geometry_exits_2_without_output(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["solve", "--nonlinearity", "ubar^3", "--s", "-0.3", "--output", str(out)]) == 2
    assert not out.exists() and not out.with_suffix(".json").exists()
    assert "geometry" in capsys.readouterr().err


@pytest.mark.parametrize("text,needle", [
    ("kind: norm\ncolour: red\n", "colour"),
    ("kind: norm\ngeometry: {domain_kind: torus_1d, modes_per_axis: 8, size: 3}\n", "size"),
    ("kind: norm\ngeometry: {domain_kind: torus_1d, modes_per_axis: 8}\nparams: {flavour: 1}\n", "flavour"),
    ("kind: quotient\nparams: {s: 0}\n", "params.case"),
    ("kind: solve\ngeometry: {domain_kind: torus_1d, modes_per_axis: 8}\nparams: {s: 0, nonlinearity: u^9}\n",
     "nonlinearity"),
    ("kind: norm\n: [\n", "YAML"),
    ("- 1\n- 2\n", "mapping"),
])
def test_config_errors_name_the_key(tmp_path, capsys, text, needle):
    kind = "solve" if "solve" in text else "quotient" if "quotient" in text else "norm"
    cfg = _yaml(tmp_path, text)
    assert main([kind, "--config", cfg, "--output", str(tmp_path / "x.csv")]) == 2
    assert needle in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_kind_mismatch(tmp_path):
    cfg = _yaml(tmp_path, "kind: norm\n")
    assert main(["quotient", "--config", cfg, "--case", "thm41", "--s", "0"]) == 2


def test_bad_values_exit_2(tmp_path):
    assert main(["quotient", "--case", "thm41", "--s", "abc", "--output", str(tmp_path / "a.csv")]) == 2
    assert main(["quotient", "--case", "nosuch", "--s", "0", "--output", str(tmp_path / "a.csv")]) == 2
    assert main(["counterexample", "--family", "ex51", "--s", "-0.2", "--n", "2,4,7",
                 "--output", str(tmp_path / "a.csv")]) == 2
    assert main(["bogus"]) == 2
    assert main(["preset", "nosuch"]) == 2


def test_geometry_errors_exit_3(tmp_path, capsys):
    assert main(["norm", "--domain", "torus_1d", "--modes", "8", "--xi-spacing", "0.5",
                 "--output", str(tmp_path / "g.csv")]) == 3
    assert "geometry error" in capsys.readouterr().err
    assert main(["quotient", "--case", "thm41", "--s", "-0.3", "--domain", "line_1d", "--modes", "16",
                 "--xi-spacing", "0.25", "--output", str(tmp_path / "g.csv")]) == 3
    assert main(["norm", "--domain", "torus_1d", "--modes", "7", "--output", str(tmp_path / "g.csv")]) == 3


def test_nonconverged_solve_exits_0(tmp_path):
    out = tmp_path / "d.csv"
    rc = main(["solve", "--nonlinearity", "ubar^3", "--s", "0", "--amplitude", "50", "--T", "2", "--steps", "32",
               "--domain", "torus_1d", "--modes", "16", "--output", str(out)])
    assert rc == 0
    assert _rows(out)[0]["converged"] == "false"


def test_bilinear_check(tmp_path):
    out = tmp_path / "b.csv"
    rc = main(["bilinear-check", "--domain", "torus_1d", "--modes", "8", "--tau-spacing", "4", "--count", "2",
              "--output", str(out)])
    assert rc == 0
    rows = _rows(out)
    assert {r["check"] for r in rows} == {"oracle", "adjoint", "conjugation"}
    assert max(float(r["max_abs_error"]) for r in rows) < 1e-10


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    text = capsys.readouterr().out
    assert text == list_presets()
    ids = [line.split("\t")[0] for line in text.splitlines()]
    assert ids == sorted(ids) == sorted(PRESETS)
    lines = dict(line.split("\t", 1) for line in text.splitlines())
    assert "-1/3" in lines["ex42"]
    for pid in ("problem-sec3", "open-l4l3-torus3", "open-thm2-scaling", "thm1", "ex53", "lemma24"):
        assert pid in lines


def test_preset_run(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["preset", "ex52", "--output", str(out)]) == 0
    rows = _rows(out)
    assert {r["family_id"] for r in rows} == {"ex52", "ex52tri"}
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["config"]["preset"] == "ex52" and len(side["config"]["runs"]) == 2


def test_reruns_are_byte_identical(tmp_path):
    out = tmp_path / "r.csv"
    snaps = []
    for _ in range(2):
        assert main(["quotient", "--case", "lemma31", "--s", "0.3", "--budget", "4", "--seed", "11",
                     "--output", str(out)]) == 0
        snaps.append((out.read_bytes(), out.with_suffix(".json").read_bytes()))
    assert snaps[0] == snaps[1]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "xsblab", "list-presets"], capture_output=True, text=True)
    assert res.returncode == 0 and "thm41" in res.stdout
