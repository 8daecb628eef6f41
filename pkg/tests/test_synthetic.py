"""Synthetic two-domain streams and the CSV dataset format."""

import numpy as np
import pytest

from coolgp.synthetic import (
    SyntheticSpec,
    generate,
    random_projection,
    read_dataset,
    write_dataset,
)


def small_spec(seed=0, **kw):
    defaults = dict(d=2, n_blocks=5, block_size=8, n_test=20, seed=seed)
    defaults.update(kw)
    return SyntheticSpec(**defaults)


def test_random_projection_orthogonal_rows():
    W = random_projection(3, scale=1.5, seed=1)
    np.testing.assert_allclose(W @ W.T, 1.5**2 * np.eye(3), atol=1e-10)


def test_generate_shapes():
    s1, s2, tests = generate(small_spec())
    assert len(s1) == 5 and len(s2) == 5
    for X, y in s1 + s2:
        assert X.shape == (8, 2) and y.shape == (8,)
    assert len(tests) == 2
    # n_test is the pooled budget, split evenly across the two domains
    for Xt, ft in tests:
        assert Xt.shape == (10, 2) and ft.shape == (10,)


def test_generate_deterministic():
    a1, a2, at = generate(small_spec(seed=3))
    b1, b2, bt = generate(small_spec(seed=3))
    np.testing.assert_array_equal(a1[0][0], b1[0][0])
    np.testing.assert_array_equal(a2[-1][1], b2[-1][1])
    np.testing.assert_array_equal(at[0][1], bt[0][1])


def test_generate_seeds_differ():
    a1, _, _ = generate(small_spec(seed=3))
    b1, _, _ = generate(small_spec(seed=4))
    assert not np.array_equal(a1[0][1], b1[0][1])


def test_targets_are_noiseless_smooth_latents():
    """Test targets carry no observation noise: tiny input perturbations
    move them far less than the noise scale would."""
    spec = small_spec(sigma_n=0.5)
    _, _, (t1, _) = generate(spec)
    Xt, ft = t1
    # correlated latent: nearby test points should have similar targets
    d = np.linalg.norm(Xt[None, :, :] - Xt[:, None, :], axis=-1)
    i, j = np.unravel_index(np.argmin(d + np.eye(len(Xt)) * 1e9), d.shape)
    if d[i, j] < 0.1:
        assert abs(ft[i] - ft[j]) < 3 * 0.5


def test_dataset_roundtrip(tmp_path):
    s1, _, _ = generate(small_spec())
    path = tmp_path / "stream.csv"
    write_dataset(s1, path)
    header = path.read_text().splitlines()[0]
    assert header == "block_id,x1,x2,y"
    back = read_dataset(path)
    assert len(back) == len(s1)
    for (X0, y0), (X1, y1) in zip(s1, back):
        np.testing.assert_allclose(X0, X1, rtol=1e-15)
        np.testing.assert_allclose(y0, y1, rtol=1e-15)


def test_read_dataset_reports_bad_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("block_id,x1,x2,y\n0,0.1,0.2,0.3\n0,not-a-number,0.2,0.3\n")
    with pytest.raises(ValueError, match="bad.csv:3"):
        read_dataset(path)


def test_read_dataset_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("foo,bar\n")
    with pytest.raises(ValueError):
        read_dataset(path)


def test_spec_validation():
    with pytest.raises(ValueError):
        small_spec(block_size=0)
    with pytest.raises(ValueError):
        small_spec(sigma_n=-0.1)
