import json

import numpy as np
import pytest

from motionedit.cli import format_joint_animation, main, parse_joint_animation
from motionedit.dataset import load_triplets
from motionedit.storage import load_motion

TINY = ["--set", "steps=5", "--set", "epochs=1", "--set", "denoiser.d_model=16", "--set", "denoiser.layers=1",
        "--set", "denoiser.heads=2", "--set", "denoiser.ff_dim=32", "--set", "embedder.epochs=1",
        "--set", "embedder.d_model=16", "--set", "embedder.ff_dim=32", "--set", "eval.gallery_size=4"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert main(["gen-synth", "--n", "40", "--out", str(data), "--seed", "2"] + TINY) == 0
    assert main(["train", "tmed", "--data", str(data), "--out", str(root / "tmed.pt")] + TINY) == 0
    assert main(["train", "mdm", "--data", str(data), "--out", str(root / "mdm.pt")] + TINY) == 0
    assert main(["train", "embedder", "--data", str(data), "--out", str(root / "emb.pt")] + TINY) == 0
    return root


def test_gen_synth_writes_store(workspace):
    triplets = load_triplets(workspace / "data")
    assert len(triplets) == 40
    assert {t.split for t in triplets} == {"train", "val", "test"}
    manifest = json.loads((workspace / "data" / "manifest.json").read_text())
    assert manifest["seed"] == 2


def test_sample_writes_motion_and_sidecar(workspace):
    src = next(iter(sorted((workspace / "data" / "motions").glob("*_source.mfxa"))))
    out = workspace / "edit.mfxa"
    assert main(["sample", "--checkpoint", str(workspace / "tmed.pt"), "--source", str(src),
                 "--text", "walk faster", "--length", "24", "--out", str(out), "--seed", "9"] + TINY) == 0
    assert load_motion(out, 20.0).num_frames == 24
    side = json.loads((workspace / "edit.mfxa.json").read_text())
    assert side["seed"] == 9 and side["kind"] == "tmed"


def test_sample_baseline_holds_source_dims(workspace):
    src = next(iter(sorted((workspace / "data" / "motions").glob("*_source.mfxa"))))
    out = workspace / "bp.mfxa"
    assert main(["sample", "--checkpoint", str(workspace / "mdm.pt"), "--source", str(src), "--baseline",
                 "mdm_bp", "--text", "raise your left arm higher", "--out", str(out)] + TINY) == 0
    src_m, out_m = load_motion(src, 20.0), load_motion(out, 20.0)
    assert out_m.num_frames == src_m.num_frames
    # legs are held, so the right knee keeps its source rotation
    assert np.allclose(out_m.body_pose[:, 4], src_m.body_pose[:, 4], atol=1e-5)


def test_eval_writes_report(workspace, capsys):
    out = workspace / "report.json"
    assert main(["eval", "--checkpoint", str(workspace / "tmed.pt"), "--embedder", str(workspace / "emb.pt"),
                 "--data", str(workspace / "data"), "--out", str(out)] + TINY) == 0
    report = json.loads(out.read_text())
    assert report["gallery_size"] == 4 and "R@1" in report["target"]
    assert "R@1" in capsys.readouterr().out


def test_export_round_trip(workspace, tmp_path):
    src = next(iter(sorted((workspace / "data" / "motions").glob("*_target.mfxa"))))
    out = tmp_path / "anim.txt"
    assert main(["export", "--motion", str(src), "--out", str(out)]) == 0
    fps, pos = parse_joint_animation(out.read_text())
    m = load_motion(src, 20.0)
    assert fps == m.fps
    assert np.allclose(pos, m.joints(), atol=1e-6)


def test_mine_exports_pool(workspace, tmp_path):
    assert main(["mine", "--embedder", str(workspace / "emb.pt"), "--n-motions", "3", "--duration", "6",
                 "--out", str(tmp_path / "pool")] + TINY) == 0
    manifest = json.loads((tmp_path / "pool" / "manifest.json").read_text())
    assert manifest["records"] and all(r["similarity"] < 0.99 for r in manifest["records"])


def test_config_verb_prints_yaml(capsys):
    assert main(["config", "--config", "toy", "--set", "guidance.text=3"]) == 0
    assert "text: 3" in capsys.readouterr().out


def test_errors_exit_with_code_two(tmp_path, capsys):
    assert main(["export", "--motion", str(tmp_path / "missing.mfxa"), "--out", str(tmp_path / "x")]) == 2
    assert "error" in capsys.readouterr().err


def test_joint_format_rejects_foreign_files():
    with pytest.raises(ValueError):
        parse_joint_animation("hello\n")


def test_joint_format_header(rng):
    from conftest import random_motion
    text = format_joint_animation(random_motion(rng, 5))
    lines = text.splitlines()
    assert lines[0].startswith("# motionedit joint animation") and lines[2] == "frames 5"
    assert len(lines[5].split()) == 66
