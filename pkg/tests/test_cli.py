import json

import numpy as np
import pytest

from ekgdipole.cli import main
from ekgdipole.data import Mask, read_record
from ekgdipole.geometry import LEADS

QUICK_FIT = {"fit": {"n_restarts": 1, "max_outer_iterations": 1, "lbfgs_max_iters": 20,
                     "joint_lm_iters": 5, "block_iters": 5, "screen_grid": 2, "d_min": 0.02}}


def write_json(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


@pytest.fixture
def suite(tmp_path):
    spec = write_json(tmp_path / "spec.json",
                      {"kind": "DipoleLoop", "T": 250, "count": 2, "seed": 5, "beats": 2})
    out = tmp_path / "raw"
    assert main(["synth", "--spec", spec, "--out", str(out)]) == 0
    return tmp_path, out


def test_synth_outputs_and_determinism(suite, tmp_path):
    _, out = suite
    names = sorted(p.name for p in out.iterdir())
    assert names == ["dipoleloop_000.csv", "dipoleloop_000.groundtruth.json",
                     "dipoleloop_001.csv", "dipoleloop_001.groundtruth.json"]
    again = tmp_path / "again"
    assert main(["synth", "--spec", str(tmp_path / "spec.json"), "--out", str(again)]) == 0
    for name in names:
        assert (out / name).read_bytes() == (again / name).read_bytes()
    truth = json.loads((out / "dipoleloop_001.groundtruth.json").read_text())
    assert truth["spec"]["seed"] == 6
    assert np.array(truth["truth"]["positions"]).shape == (9, 3)


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["synth", "--out", str(tmp_path)])
    assert info.value.code == 2
    assert "usage" in capsys.readouterr().err
    bad = write_json(tmp_path / "bad.json", {"fit": {"no_such_key": 1}})
    rec = tmp_path / "r.csv"
    rec.write_text("time_s," + ",".join(LEADS) + "\n", encoding="utf-8")
    assert main(["mask", "--in", str(rec), "--scheme", "ptb", "--config", bad,
                 "--out", str(tmp_path / "m.csv")]) == 2
    assert main(["synth", "--spec", write_json(tmp_path / "s.json", {"kind": "Nope"}),
                 "--out", str(tmp_path)]) == 2


def test_data_error_exit_code(tmp_path):
    rec = tmp_path / "r.csv"
    rec.write_text("time_s,I\n0,1\n", encoding="utf-8")
    assert main(["mask", "--in", str(rec), "--scheme", "ptb", "--out", str(tmp_path / "m.csv")]) == 3


def test_mask_commands(suite):
    tmp, raw = suite
    src = raw / "dipoleloop_000.csv"
    out = tmp / "m.csv"
    assert main(["mask", "--in", str(src), "--scheme", "ptb", "--out", str(out)]) == 0
    rec = read_record(out)
    np.testing.assert_array_equal(rec.held_out.sum(axis=0), 25)
    np.testing.assert_allclose(rec.samples, read_record(src).samples)
    assert main(["mask", "--in", str(src), "--scheme", "ptb", "--seed", "9",
                 "--out", str(tmp / "m9.csv")]) == 0
    assert not np.array_equal(read_record(tmp / "m9.csv").mask, rec.mask)


def test_mask_ed_layout(tmp_path):
    spec = write_json(tmp_path / "spec.json", {"kind": "DipoleLoop", "count": 1})
    assert main(["synth", "--spec", spec, "--out", str(tmp_path / "raw")]) == 0
    out = tmp_path / "ed.csv"
    assert main(["mask", "--in", str(tmp_path / "raw" / "dipoleloop_000.csv"), "--scheme", "ed",
                 "--out", str(out)]) == 0
    rec = read_record(out)
    for lead in ("II", "V1", "V5"):
        assert not np.any(rec.mask[:, LEADS.index(lead)] == Mask.MISSING)
    assert np.all(rec.mask[1000:, LEADS.index("I")] == Mask.MISSING)


def masked_suite(tmp, raw):
    masked = tmp / "masked"
    masked.mkdir()
    for src in sorted(raw.glob("*.csv")):
        assert main(["mask", "--in", str(src), "--scheme", "ptb", "--out",
                     str(masked / src.name)]) == 0
    return masked


def test_fit_and_eval(suite):
    tmp, raw = suite
    masked = masked_suite(tmp, raw)
    cfg = write_json(tmp / "cfg.json", QUICK_FIT)
    one = tmp / "one"
    assert main(["fit", "--in", str(masked / "dipoleloop_000.csv"), "--model", "dipole",
                 "--config", cfg, "--out", str(one)]) == 0
    assert sorted(p.name for p in one.iterdir()) == ["dipoleloop_000.dipole.imputed.csv",
                                                     "dipoleloop_000.dipole.json"]
    diag = json.loads((one / "dipoleloop_000.dipole.json").read_text())
    assert {"log_joint", "converged", "grad_inf_norm", "layout"} <= set(diag)

    fits = tmp / "fits"
    for model in ("dipole", "ppca3"):
        assert main(["fit", "--in", str(masked), "--model", model, "--config", cfg,
                     "--out", str(fits)]) == 0
    imputed = read_record(fits / "dipoleloop_001.ppca3.imputed.csv")
    assert np.all(imputed.mask == Mask.OBSERVED)

    ev = tmp / "eval"
    assert main(["eval", "--truth", str(masked), "--imputed", str(fits), "--bootstrap", "50",
                 "--seed", "1", "--out", str(ev)]) == 0
    names = {p.name for p in ev.iterdir()}
    assert {"report.csv", "summary.csv", "pairwise.csv", "comparison.txt", "median_rmse.svg",
            "dipoleloop_000.dipole.svg", "dipoleloop_001.ppca3.svg"} <= names
    summary = (ev / "summary.csv").read_text().splitlines()
    assert summary[0] == "model,median_rmse_mv,ci_lo_2.5,ci_hi_97.5"
    assert [row.split(",")[0] for row in summary[1:]] == ["dipole", "ppca3"]
    report = (ev / "report.csv").read_text().splitlines()
    assert report[0] == "record_id,model,lead,rmse_mv"
    assert sum(",ALL," in r for r in report) == 4

    again = tmp / "eval2"
    assert main(["eval", "--truth", str(masked), "--imputed", str(fits), "--bootstrap", "50",
                 "--seed", "1", "--out", str(again)]) == 0
    for name in names:
        assert (ev / name).read_bytes() == (again / name).read_bytes()


def test_eval_single_model_single_record(suite):
    tmp, raw = suite
    masked = masked_suite(tmp, raw)
    (masked / "dipoleloop_001.csv").unlink()
    for side in masked.glob("dipoleloop_001.csv.*"):
        side.unlink()
    fits = tmp / "fits"
    assert main(["fit", "--in", str(masked), "--model", "ppca3", "--out", str(fits)]) == 0
    out = tmp / "ev"
    assert main(["eval", "--truth", str(masked), "--imputed", str(fits), "--bootstrap", "1",
                 "--out", str(out), "--no-plots"]) == 0
    assert len((out / "summary.csv").read_text().splitlines()) == 2
    assert not list(out.glob("*.svg"))


def test_fit_jobs_identical(suite):
    tmp, raw = suite
    masked = masked_suite(tmp, raw)
    cfg = write_json(tmp / "cfg.json", QUICK_FIT)
    for jobs in ("1", "2"):
        assert main(["fit", "--in", str(masked), "--model", "dipole", "--config", cfg,
                     "--out", str(tmp / f"j{jobs}"), "--jobs", jobs]) == 0
    for p in sorted((tmp / "j1").iterdir()):
        assert p.read_bytes() == (tmp / "j2" / p.name).read_bytes()


def test_ppca_on_noiseless_rank3(tmp_path):
    spec = write_json(tmp_path / "spec.json",
                      {"kind": "LowRank", "T": 300, "K": 3, "noise_sigma": 0.0})
    assert main(["synth", "--spec", spec, "--out", str(tmp_path / "raw")]) == 0
    assert main(["fit", "--in", str(tmp_path / "raw"), "--model", "ppca3",
                 "--out", str(tmp_path / "fit")]) == 0
    diag = json.loads((tmp_path / "fit" / "lowrank_000.ppca3.json").read_text())
    assert diag["noise_variance"] < 1e-8


def test_fit_skips_bad_records(suite, capsys):
    tmp, raw = suite
    (raw / "broken.csv").write_text("time_s,I\n0,1\n", encoding="utf-8")
    assert main(["fit", "--in", str(raw), "--model", "ppca3", "--out", str(tmp / "f")]) == 0
    assert (tmp / "f" / "dipoleloop_000.ppca3.imputed.csv").exists()
    only_bad = tmp / "bad"
    only_bad.mkdir()
    (only_bad / "broken.csv").write_text("time_s,I\n0,1\n", encoding="utf-8")
    assert main(["fit", "--in", str(only_bad), "--model", "ppca3", "--out", str(tmp / "g")]) == 3
