import json

import numpy as np
import pytest

from bcdres import make_graphene, save_model
from bcdres.cli import RunConfig, build_defect, build_model, main, resolve_config
from bcdres.io import read_csv


def run_cli(args, tmp_path, name="out"):
    out = tmp_path / name
    code = main(list(args) + ["--out", str(out)])
    return code, out


def floats(rows, col):
    return np.array([float(r[col]) for r in rows])


def test_config_round_trip(tmp_path):
    cfg = resolve_config(["refine", "--model", "graphene(1)", "--defect", "adatom:eps=0.4,ed=2",
                          "--seed-z", "2-0.1i", "1.9-0.05j", "--window", "1", "3", "-0.2", "0",
                          "--nk", "35"], environ={})
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert cfg.seed_z == [2 - 0.1j, 1.9 - 0.05j]


def test_precedence_flags_over_env_over_file(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"nk": 11, "alpha": 0.2, "delta_e": 0.7}))
    cfg = resolve_config(["dos", "--config", str(conf), "--nk", "13"],
                         environ={"BCDRES_NK": "12", "BCDRES_ALPHA": "0.25"})
    assert cfg.nk == 13 and cfg.alpha == 0.25 and cfg.delta_e == 0.7


def test_config_errors_exit_2(tmp_path, capsys):
    assert run_cli(["bands", "--model", "nosuchmodel"], tmp_path)[0] == 2
    assert "ConfigError" in capsys.readouterr().err
    assert run_cli(["dos", "--nk", "1"], tmp_path)[0] == 2
    assert run_cli(["scan", "--model", "graphene(1)", "--defect", "bonds:eps=0.2"], tmp_path)[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli(["bands", "--config", str(bad)], tmp_path)[0] == 2
    assert run_cli(["refine", "--model", "diatomic(1,0)"], tmp_path)[0] == 2     # no defect
    assert run_cli(["bands", "--window", "1", "0", "0", "1"], tmp_path)[0] == 2


def test_numerical_failure_exits_3(tmp_path, capsys):
    code, _ = run_cli(["free1d", "--box-length", "4", "--step", "0.1", "--seed-z", "0",
                       "--resolution", "2", "2"], tmp_path)
    assert code == 0     # per-seed failure is recorded, the run still succeeds
    code, _ = run_cli(["refine", "--model", "diatomic(1,0)", "--defect", "bonds:eps=0.2",
                       "--seed-z", "1.75-0.01j", "--nk", "40", "--energy", "1.8"], tmp_path)
    assert code in (0, 3)
    code, _ = run_cli(["refine", "--model", "graphene(1)", "--defect", "adatom:eps=0.4,ed=2",
                       "--seed-z", "5+3j", "--nk", "9"], tmp_path)
    assert code == 3
    err = capsys.readouterr().err
    assert "DivergedOutsideWindow" in err or "NoConvergence" in err


def test_bands_graphene_gamma(tmp_path):
    code, out = run_cli(["bands", "--model", "graphene(1)", "--resolution", "31", "2"], tmp_path)
    assert code == 0
    comment, header, rows = read_csv(out / "bands.csv")
    assert header == ["s", "k1", "k2", "band0", "band1"]
    assert np.isclose(float(rows[0][3]), -3) and np.isclose(float(rows[0][4]), 3)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["model"] == "graphene(1)"


def test_bands_flat(tmp_path):
    code, out = run_cli(["bands", "--model", "flatband(0.4)", "--resolution", "11", "2"], tmp_path)
    _, _, rows = read_csv(out / "bands.csv")
    assert np.allclose(floats(rows, 2), 0.4)


def test_greenmap_flatband(tmp_path):
    code, out = run_cli(["greenmap", "--model", "flatband(0.2)", "--nk", "5",
                         "--window", "-1", "1", "0.1", "0.5", "--resolution", "5", "3"], tmp_path)
    assert code == 0
    comment, header, rows = read_csv(out / "greenmap.csv")
    assert comment.startswith("# model=flatband") and "E-mode=undeformed" in comment
    assert header == ["re_z", "im_z", "re_value", "im_value"]
    z = floats(rows, 0) + 1j * floats(rows, 1)
    v = floats(rows, 2) + 1j * floats(rows, 3)
    assert np.allclose(v, 1 / (z - 0.2), atol=1e-12)


def test_greenmap_modes_agree_far_from_axis(tmp_path):
    common = ["--model", "diatomic(1,0)", "--nk", "50", "--window", "0", "2", "2", "2",
              "--resolution", "5", "1"]
    _, a = run_cli(["greenmap"] + common, tmp_path, "a")
    _, b = run_cli(["greenmap", "--adaptive"] + common, tmp_path, "b")
    va, vb = (floats(read_csv(p / "greenmap.csv")[2], 2) for p in (a, b))
    assert np.allclose(va, vb, atol=1e-8)


def test_greenmap_masks(tmp_path):
    code, out = run_cli(["greenmap", "--model", "chain1band", "--nk", "4",
                         "--window", str(2 * np.cos(np.pi / 4)), "3", "0", "0", "--resolution", "2", "1"],
                        tmp_path)
    _, _, rows = read_csv(out / "greenmap.csv")
    assert rows[0][2] == "nan" and rows[0][3] == "nan"


def test_dos_and_determinism(tmp_path):
    args = ["dos", "--model", "graphene(1)", "--nk", "9", "--alpha", "0.3", "--delta-e", "0.4",
            "--window", "1.5", "2.5", "0", "0", "--resolution", "3", "1"]
    _, a = run_cli(args, tmp_path, "a")
    _, b = run_cli(args, tmp_path, "b")
    assert (a / "dos.csv").read_bytes() == (b / "dos.csv").read_bytes()
    _, header, rows = read_csv(a / "dos.csv")
    assert header == ["E", "value", "method"]
    assert {r[2] for r in rows} == {"bcd", "smearing"}
    bcd_at_2 = [float(r[1]) for r in rows if r[2] == "bcd" and float(r[0]) == 2.0][0]
    assert abs(bcd_at_2 - 0.33963) / 0.33963 < 0.02


def test_scan_and_refine_diatomic(tmp_path):
    common = ["--model", "diatomic(1,0)", "--defect", "bonds:eps=0.2", "--nk", "100",
              "--window", "2.1", "2.3", "-0.03", "0.01", "--resolution", "21", "9"]
    code, out = run_cli(["scan"] + common, tmp_path, "s")
    assert code == 0
    _, header, rows = read_csv(out / "scan.csv")
    assert header == ["re_z", "im_z", "log10_sigma_min"]
    info = json.loads((out / "manifest.json").read_text())["info"]
    assert abs(complex(*info["minima"][0]) - (2.2022 - 0.0063j)) < 0.01
    code, out = run_cli(["refine"] + common, tmp_path, "r")
    recs = json.loads((out / "resonances.json").read_text())
    z0 = complex(*recs[0]["z0"])
    assert abs(z0 - (2.2022149190 - 0.0063122249j)) < 1e-7
    assert np.allclose(recs[0]["residue_condition"], [-1, 0], atol=1e-8)
    _, header, rows = read_csv(out / "state_0.csv")
    assert header == ["x", "y", "re_psi", "im_psi", "abs_psi", "arg_psi"]


def test_refine_graphene_matches_reference(tmp_path):
    code, out = run_cli(["refine", "--model", "graphene(1)", "--defect", "adatom:eps=0.4,ed=2,attach=0",
                         "--alpha", "0.4", "--delta-e", "0.5", "--nk", "35", "--seed-z", "2-0.1j",
                         "--state-radius", "3"], tmp_path)
    assert code == 0
    z0 = complex(*json.loads((out / "resonances.json").read_text())[0]["z0"])
    assert abs(z0 - (2.062 - 0.0858j)) < 1e-3
    _, _, rows = read_csv(out / "state_0.csv")
    assert len(rows) == 2 * 49 + 1
    xy = {(round(float(r[0]), 9), round(float(r[1]), 9)) for r in rows}
    assert (0.0, 0.0) in xy and (round(-1 / np.sqrt(3), 9), 0.0) in xy


def test_validate_command(tmp_path, capsys):
    code, out = run_cli(["validate", "--model", "diatomic(1,0)", "--energy", "2", "--alpha", "0.3",
                         "--delta-e", "0.5", "--nk", "50", "--rmax", "4"], tmp_path)
    assert code == 0
    report = json.loads((out / "validation.json").read_text())
    assert [r["name"] for r in report["rules"]][-1] == "lattice_range"
    assert "smoothness" in capsys.readouterr().out
    _, header, rows = read_csv(out / "field.csv")
    assert header == ["k1", "h1", "re_det", "im_det"] and len(rows) == 50
    assert run_cli(["validate", "--model", "diatomic(1,0)"], tmp_path)[0] == 2


def test_free1d_command(tmp_path):
    code, out = run_cli(["free1d", "--box-length", "20", "--step", "0.05", "--seed-z", "0.68-0.13j",
                         "--resolution", "3", "3"], tmp_path)
    assert code == 0
    rec = json.loads((out / "free_resonances.json").read_text())[0]
    z0 = complex(*rec["z0"])
    assert abs(z0 - (0.68 - 0.13j)) < 0.01
    assert abs(complex(*rec["nearest_scaled_eigenvalue"]) - z0) < 2e-3
    _, header, rows = read_csv(out / "free_state_0.csv")
    assert header[:2] == ["x", "V"] and len(rows) == 401


def test_model_and_defect_files(tmp_path):
    path = tmp_path / "g.json"
    save_model(make_graphene(), path)
    assert build_model(str(path)).M == 2
    dpath = tmp_path / "d.json"
    dpath.write_text(json.dumps({"extra_sites": [{"energy": 2.0, "couplings": [
        {"R": [0, 0], "i": 0, "value": 0.4}]}]}))
    d = build_defect(str(dpath), make_graphene())
    assert d.extra_sites[0].couplings == {((0, 0), 0): 0.4}
    assert build_defect("none", make_graphene()) is None


def test_dos_masks_grid_eigenvalues(tmp_path):
    # E = -3 is the band bottom at Gamma, which lies on the odd grid
    with pytest.warns(UserWarning, match="van Hove"):
        code, out = run_cli(["dos", "--model", "graphene(1)", "--nk", "9", "--window", "-3", "-2.5", "0", "0",
                             "--resolution", "2", "1"], tmp_path)
    assert code == 0
    _, _, rows = read_csv(out / "dos.csv")
    bcd = {float(r[0]): r[1] for r in rows if r[2] == "bcd"}
    assert bcd[-3.0] == "nan" and bcd[-2.5] != "nan"
    assert json.loads((out / "manifest.json").read_text())["info"]["masked_energies"] == [-3.0]


def test_refine_flags_spurious_zeros(tmp_path):
    code, out = run_cli(["refine", "--model", "diatomic(1,0)", "--defect", "bonds:eps=0.2", "--nk", "100",
                         "--window", "-2", "3", "-0.1", "0.02", "--resolution", "101", "13"], tmp_path)
    assert code == 0
    text = (out / "resonances.json").read_text()
    assert "Infinity" not in text and "NaN" not in text
    stable = json.loads((out / "manifest.json").read_text())["info"]["stable_z0"]
    z = np.sort_complex(np.array([complex(*v) for v in stable]))
    expected = np.sort_complex(np.array([-1.2022149190 - 0.0063122249j, -0.3018622781 - 0.0218837684j,
                                         1.3018622781 - 0.0218837684j, 2.2022149190 - 0.0063122249j]))
    assert len(z) == 4 and np.allclose(z, expected, atol=1e-8)
    zs = [complex(*r["z0"]) for r in json.loads(text) if "z0" in r]
    assert min(abs(a - b) for i, a in enumerate(zs) for b in zs[i + 1:]) > 1e-8     # no duplicates


def test_free1d_box_stability(tmp_path):
    code, out = run_cli(["free1d", "--box-length", "10", "--step", "0.1",
                         "--seed-z", "0.68-0.13j", "0.79-1.79j", "--resolution", "2", "2"], tmp_path)
    recs = json.loads((out / "free_resonances.json").read_text())
    assert recs[0]["stable"] and recs[0]["box_shift"] < 1e-3
    # a deep spurious pole does not survive doubling the box
    assert not recs[1]["stable"]
