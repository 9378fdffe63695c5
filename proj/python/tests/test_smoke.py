import json
import os
import subprocess

import numpy as np
import pytest

import macekit


def test_mace_closed_form_1d():
    rng = np.random.default_rng(3)
    a = rng.normal(0.0, 1.0, size=(50_000, 1))
    b = rng.normal(3.0, 2.0, size=(50_000, 1))
    assert macekit.mace_between(a, b).value == pytest.approx(10.0, rel=0.05)


def test_matrix_sqrt_reconstructs():
    rng = np.random.default_rng(5)
    g = rng.normal(size=(6, 6))
    s = g @ g.T
    r = macekit.matrix_sqrt_psd(s)
    assert np.allclose(r @ r, s, atol=1e-9)


def test_embedding_round_trip(tmp_path):
    x = np.arange(12, dtype=np.float64).reshape(4, 3) / 8.0
    path = str(tmp_path / "set.mace")
    macekit.write_embeddings(path, x, [("v0", 0), ("v0", 1), ("v1", 0), ("v1", 5)])
    y, keys = macekit.read_embeddings(path)
    assert np.array_equal(x, y)
    assert keys[3] == ("v1", 5)


def test_bad_file_raises(tmp_path):
    path = tmp_path / "bad.mace"
    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(macekit.MacekitError, match="BadMagic"):
        macekit.read_embeddings(str(path))


def test_median_filter_and_tests():
    assert macekit.median_filter([0, 1, 1, 1, 0, 0, 0], window=3, votes=2) == [0, 1, 1, 1, 0, 0, 0]
    r = macekit.non_inferiority([0.0] * 10 + [0.001] * 10, margin=0.015)
    assert r.decision == "Reject"
    lo, hi = macekit.percentile_ci(list(range(1, 1001)), 0.95)
    assert (lo, hi) == pytest.approx((25.975, 975.025))


def test_tpr_interpolation():
    tpr, clamped = macekit.tpr_at_fapm([(0.0, 0.5), (1.0, 0.9)], 0.5)
    assert tpr == pytest.approx(0.7)
    assert not clamped


def test_projection_shapes():
    rng = np.random.default_rng(1)
    x = np.vstack([rng.normal(0, 1, (30, 5)), rng.normal(6, 1, (30, 5))])
    assert macekit.pca_2d(x).shape == (60, 2)
    # Sixty points need a gentler step than the default.
    y, kl0, kl1 = macekit.tsne_2d(x, perplexity=10, iterations=300, learning_rate=10.0)
    assert y.shape == (60, 2) and kl1 < kl0


@pytest.mark.skipif("MACEKIT_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_synth_and_eval(tmp_path):
    cli = os.environ["MACEKIT_CLI"]
    scenario = tmp_path / "scenario.json"
    scenario.write_text(json.dumps({"seed": 4, "detection": {"n_videos": 6}}))
    out = tmp_path / "out"
    subprocess.run([cli, "synth", "--scenario", str(scenario), "--out", str(out)], check=True)
    res = subprocess.run(
        [cli, "eval", "--data", str(out / "bundle"), "--out", str(out / "eval"), "--resamples", "50"],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0, res.stderr
    report = json.loads((out / "eval" / "eval.json").read_text())
    assert report["tool"] == "macekit"
    bad = subprocess.run([cli, "validate", "--data", str(tmp_path / "missing")], capture_output=True)
    assert bad.returncode == 3
