import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from twctv.cli import main
from twctv.experiments import moving_block_video
from twctv.io import read_tensor, write_image, write_tensor

FAST = ["--quiet", "--max-iters", "400", "--p", "0.7", "--gamma", "12"]


@pytest.fixture
def synth(tmp_path):
    path = tmp_path / "m.tlt"
    assert main(["synth", "--shape", "12,12,4", "--rank", "1", "--out", str(path), "--seed", "3", "--quiet"]) == 0
    return path


def test_synth_writes_tensor(synth):
    X = read_tensor(synth)
    assert X.shape == (12, 12, 4) and np.any(X)


def test_complete_with_manifest_and_history(tmp_path, synth):
    out, hist, man = tmp_path / "x.tlt", tmp_path / "h.csv", tmp_path / "run.json"
    code = main(
        ["complete", "--in", str(synth), "--sampling-rate", "0.6", "--out", str(out), "--history", str(hist),
         "--manifest", str(man), *FAST]
    )
    assert code == 0
    manifest = json.loads(man.read_text())
    assert manifest["converged"] and manifest["config"]["axes"] == [0, 1]
    assert manifest["metrics"]["relative_error"] < 1e-3
    assert manifest["residual_fro"] < 1e-6
    assert str(synth) in manifest["inputs"]
    rows = list(csv.DictReader(open(hist)))
    assert len(rows) == manifest["iterations"]
    assert list(rows[0]) == ["t", "dx_inf", "de_inf", "feas_inf", "mu", "seconds", "rel_dx", "rel_de"]
    X = read_tensor(out)

    # replay reproduces the estimate bit for bit
    assert main(["replay", str(man)]) == 0
    np.testing.assert_array_equal(read_tensor(out), X)


def test_rpca_with_outliers(tmp_path):
    # robust recovery needs a somewhat larger tensor than the fixture
    synth = tmp_path / "big.tlt"
    assert main(["synth", "--shape", "20,20,5", "--rank", "1", "--out", str(synth), "--seed", "3", "--quiet"]) == 0
    out, sparse, man = tmp_path / "x.tlt", tmp_path / "e.tlt", tmp_path / "run.json"
    code = main(
        ["rpca", "--in", str(synth), "--noise-level", "0.05", "--noise", "outliers", "--out", str(out),
         "--sparse-out", str(sparse), "--manifest", str(man), "--deterministic", *FAST]
    )
    assert code == 0
    manifest = json.loads(man.read_text())
    assert manifest["deterministic"] and manifest["metrics"]["relative_error"] < 1e-4
    assert read_tensor(sparse).shape == (20, 20, 5)


def test_rlrtc_with_mask_file(tmp_path, synth):
    mask = (np.random.default_rng(0).random((12, 12, 4)) < 0.7).astype(float)
    write_tensor(tmp_path / "mask.tlt", mask)
    man = tmp_path / "run.json"
    code = main(
        ["rlrtc", "--in", str(synth), "--mask", str(tmp_path / "mask.tlt"), "--ref", str(synth),
         "--manifest", str(man), *FAST]
    )
    assert code in (0, 5)
    assert json.loads(man.read_text())["config"]["mode"] == "rlrtc"


def test_image_completion_png(tmp_path):
    yy, xx = np.mgrid[0:24, 0:24] / 23
    img = np.stack([xx, yy, 0.5 * (xx + yy)], axis=2)
    write_image(tmp_path / "in.png", img)
    man = tmp_path / "run.json"
    code = main(
        ["complete", "--in", str(tmp_path / "in.png"), "--sampling-rate", "0.5", "--out", str(tmp_path / "out.png"),
         "--manifest", str(man), "--quiet", "--max-iters", "100"]
    )
    assert code in (0, 5)
    manifest = json.loads(man.read_text())
    # colour image: smoothness on the two spatial modes only
    assert manifest["config"]["axes"] == [0, 1]
    assert manifest["metrics"]["psnr"] > manifest["observed_psnr"]
    assert (tmp_path / "out.png").exists()


def test_not_converged_exit_code(tmp_path, synth):
    out = tmp_path / "x.tlt"
    code = main(["complete", "--in", str(synth), "--sampling-rate", "0.5", "--out", str(out), "--quiet", "--max-iters", "3"])
    assert code == 5
    assert out.exists()


def test_metrics_command(tmp_path, synth, capsys):
    out = tmp_path / "m.json"
    assert main(["metrics", "--ref", str(synth), "--est", str(synth), "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["psnr"] == "inf" and data["relative_error"] == 0.0
    assert '"psnr"' in capsys.readouterr().out


def test_foreground_command_sparse_input(tmp_path):
    video, truth = moving_block_video(32, 32, 5, block=10, seed=0)
    write_tensor(tmp_path / "e.tlt", np.where(truth, 1.0, 0.0))
    write_tensor(tmp_path / "t.tlt", truth.astype(float))
    man = tmp_path / "run.json"
    code = main(
        ["foreground", "--in", str(tmp_path / "e.tlt"), "--sparse", "--truth", str(tmp_path / "t.tlt"),
         "--out", str(tmp_path / "masks.tlt"), "--manifest", str(man), "--quiet"]
    )
    assert code == 0
    assert json.loads(man.read_text())["metrics"]["f_measure"] > 0.9
    assert read_tensor(tmp_path / "masks.tlt").shape == (32, 32, 5)


def test_phase_and_psens_commands(tmp_path):
    # tiny runs only check the plumbing; the trials flag keeps them short
    out = tmp_path / "abl.csv"
    code = main(
        ["psens", "--ablation", "--shape", "10,10,3", "--rank", "1", "--sampling-rate", "0.5", "--trials", "1",
         "--out", str(out), "--quiet", "--max-iters", "20"]
    )
    assert code == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 1 and "weighted_residual" in rows[0]


@pytest.mark.parametrize(
    "argv",
    [
        ["complete", "--in", "x.tlt"],  # no mask nor rate
        ["complete", "--in", "x.tlt", "--sampling-rate", "0.5", "--gamma", "14"],
        ["complete", "--in", "x.tlt", "--sampling-rate", "0.5", "--p", "1.5"],
        ["synth", "--shape", "3,3", "--rank", "1", "--out", "y.tlt"],
        ["nonsense"],
    ],
)
def test_bad_arguments_exit_2(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    write_tensor(tmp_path / "x.tlt", np.ones((3, 3, 2)))
    assert main(argv) == 2


def test_missing_file_exit_3(tmp_path):
    assert main(["complete", "--in", str(tmp_path / "nope.tlt"), "--sampling-rate", "0.5", "--quiet"]) == 3
    (tmp_path / "bad.tlt").write_bytes(b"junk")
    assert main(["metrics", "--ref", str(tmp_path / "bad.tlt"), "--est", str(tmp_path / "bad.tlt")]) == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "twctv", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "twctv" in proc.stdout
