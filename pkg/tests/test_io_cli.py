import json

import pytest

from roughwave import io
from roughwave.cli import main


def _config(tmp_path, **medium):
    cfg = {
        "profile": {"kind": "gaussian_bump", "h": 0.2, "sigma": 1.0},
        "medium": {"k_plus": 3.0, "k_minus": 1.0, "mu": 2.0, **medium},
        "incidence": {"type": "plane_wave", "direction": [0.0, -1.0]},
        "mesh": {"N": 120, "A": 8.0, "A_core": 2.0},
        "outputs": {"dir": str(tmp_path / "out"),
                    "grid": {"x1": [-1.0, 1.0], "x2": [-1.0, 1.0], "n1": 3, "n2": 4}},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_solve_writes_three_files(tmp_path, capsys):
    assert main(["solve", str(_config(tmp_path))]) == 0
    out = tmp_path / "out"
    assert sorted(p.name for p in out.iterdir()) == ["densities.csv", "diagnostics.json", "field.csv"]
    lines = (out / "densities.csv").read_text().split("\n")
    assert lines[0].startswith("# roughwave ") and "config_sha256=" in lines[0]
    assert lines[1] == ",".join(io.DENSITY_HEADER)
    assert len(lines) == 2 + 120 + 1 and lines[-1] == ""
    field = (out / "field.csv").read_text().split("\n")
    assert field[1] == ",".join(io.FIELD_HEADER) and len(field) == 2 + 12 + 1
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["residual"] <= 1e-10 and diag["admissible"] and diag["meta"]["tool"] == "roughwave"
    assert "condition estimate" in capsys.readouterr().out


def test_solve_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert main(["solve", str(_config(a))]) == 0
    assert main(["solve", str(_config(b))]) == 0
    # the configs differ only in their output directory, which is part of the hash
    for name in ("densities.csv", "field.csv"):
        ta = (a / "out" / name).read_text().split("\n", 1)[1]
        tb = (b / "out" / name).read_text().split("\n", 1)[1]
        assert ta == tb
    assert main(["solve", str(_config(a))]) == 0
    first = (a / "out" / "densities.csv").read_bytes()
    assert main(["solve", str(_config(a))]) == 0
    assert (a / "out" / "densities.csv").read_bytes() == first


def test_inadmissible_exits_3(tmp_path, capsys):
    path = _config(tmp_path, k_plus=2.0, k_minus=2.0, mu=1.0)
    assert main(["solve", str(path)]) == 3
    assert "k_plus^2" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_force_solves_anyway(tmp_path, capsys):
    path = _config(tmp_path, k_plus=1.0, k_minus=1.0, mu=2.0)
    code = main(["solve", str(path), "--force"])
    assert code in (0, 4)
    captured = capsys.readouterr()
    assert "warning: inadmissible" in captured.err
    if code == 0:
        assert "condition estimate" in captured.out


@pytest.mark.parametrize("mutate", [
    lambda c: c.pop("profile"),
    lambda c: c["medium"].update(k_plus=-1.0),
    lambda c: c["mesh"].update(A_core=9.0),
    lambda c: c["mesh"].update(rule="gauss_panels"),
    lambda c: c["incidence"].update(type="laser"),
    lambda c: c["solver"].update(method="qr") if "solver" in c else c.update(solver={"method": "qr"}),
])
def test_bad_config_exits_2(tmp_path, mutate):
    path = _config(tmp_path)
    cfg = json.loads(path.read_text())
    mutate(cfg)
    path.write_text(json.dumps(cfg))
    assert main(["solve", str(path)]) == 2


def test_unreadable_config_and_bad_arguments(tmp_path):
    assert main(["solve", str(tmp_path / "missing.json")]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["probe", "point", str(_config(tmp_path))]) == 2  # no probe block


def test_verify_greens_writes_evidence(tmp_path):
    code = main(["verify", "greens", "--out", str(tmp_path)])
    payload = json.loads((tmp_path / "greens.json").read_text())
    assert code == (0 if payload["pass"] else 1)
    assert code == 0
    assert any(p.name.startswith("greens_") and p.suffix == ".csv" for p in tmp_path.iterdir())


def test_config_hash_is_canonical():
    assert io.config_hash({"b": 1, "a": [1.0, 2]}) == io.config_hash({"a": [1.0, 2], "b": 1})
    assert io.config_hash({"a": 1}) != io.config_hash({"a": 2})


def test_json_writer_nulls_nonfinite(tmp_path):
    io.write_json(tmp_path / "x.json", {"v": float("nan"), "w": [1.5, float("inf")]}, "h")
    d = json.loads((tmp_path / "x.json").read_text())
    assert d["v"] is None and d["w"] == [1.5, None] and d["meta"]["config_sha256"] == "h"
