import math

import numpy as np
import pytest

from dithercomp.linalg import (
    MATMUL_CSV_HEADER,
    MATMUL_MODES,
    MATMUL_VARIANTS,
    QuantMatmulConfig,
    frobenius_error,
    matmul_exact,
    matmul_quantized,
    run_matmul_experiment,
    write_matmul_csv,
)
from dithercomp.rounding import quantize_det
from dithercomp.rng import substream


def test_matmul_exact_oracles():
    assert np.allclose(matmul_exact(np.eye(2), np.array([[1.0, 2], [3, 4]])),
                       [[1, 2], [3, 4]])
    j2 = np.ones((2, 2))
    assert np.allclose(matmul_exact(0.2 * j2, 0.5 * j2), 0.2 * np.array([[1.0, 1], [1, 1]]))
    assert matmul_exact(np.array([[0.3]]), np.array([[0.5]]))[0, 0] == pytest.approx(0.15)
    with pytest.raises(ValueError):
        matmul_exact(np.zeros((2, 3)), np.zeros((2, 3)))


def test_frobenius_error_oracles():
    z = np.zeros((2, 2))
    assert frobenius_error(z, z) == 0.0
    assert frobenius_error(np.ones((2, 2)), z) == 2.0
    a, b = substream(40, 0).random((2, 3, 3))
    assert frobenius_error(a, b) == pytest.approx(np.linalg.norm((a - b).ravel()))
    with pytest.raises(ValueError):
        frobenius_error(np.zeros((2, 2)), np.zeros((3, 3)))


def test_config_validation():
    with pytest.raises(ValueError):
        QuantMatmulConfig(k=0)
    with pytest.raises(ValueError):
        QuantMatmulConfig(k=2, mode="fuzzy")
    with pytest.raises(ValueError):
        QuantMatmulConfig(k=2, variant="always")
    with pytest.raises(ValueError):
        QuantMatmulConfig(k=2, scale=(1.0, 0.0))


def test_scale_range_enforced():
    cfg = QuantMatmulConfig(k=2, mode="deterministic", scale=(0.0, 1.0))
    with pytest.raises(ValueError):
        matmul_quantized(np.full((2, 2), 1.5), np.full((2, 2), 0.5), cfg)


def test_grid_values_reproduced_exactly():
    g = substream(40, 1)
    k = 3
    a = g.integers(0, 8, (4, 6)) / 7.0
    b = g.integers(0, 8, (6, 5)) / 7.0
    for mode in MATMUL_MODES:
        for variant in MATMUL_VARIANTS:
            cfg = QuantMatmulConfig(k=k, mode=mode, variant=variant)
            got = matmul_quantized(a, b, cfg, rng=substream(40, 2))
            assert np.allclose(got, a @ b, atol=1e-9), (mode, variant)


def test_gamma_identity_on_alpha_beta_j():
    n = 16
    j = np.ones((n, n))
    for k in (1, 3, 8):
        grid = 2**k - 1
        gamma = math.floor(grid * 0.3 + 0.5) * math.floor(grid * 0.45 + 0.5) / grid**2
        cfg = QuantMatmulConfig(k=k, mode="deterministic", variant="per-partial")
        got = matmul_quantized(0.3 * j, 0.45 * j, cfg)
        assert np.allclose(got, gamma * (j @ j))
    # k=1: 0.3 rounds to the zero matrix, e_f collapses to ||AB||_F
    cfg = QuantMatmulConfig(k=1, mode="deterministic", variant="per-partial")
    got = matmul_quantized(0.3 * j, 0.3 * j, cfg)
    assert np.all(got == 0.0)
    assert frobenius_error(got, 0.09 * (j @ j)) == pytest.approx(
        np.linalg.norm(0.09 * n * j)
    )


def test_rounding_op_counters():
    a = substream(41, 0).random((7, 5))
    b = substream(41, 1).random((5, 3))
    expected = {"per-partial": 2 * 7 * 5 * 3, "input-once": 7 * 5 * 4, "separate": 10 * 5}
    for mode in MATMUL_MODES:
        for variant, ops in expected.items():
            _, info = matmul_quantized(
                a, b, QuantMatmulConfig(k=4, mode=mode, variant=variant),
                rng=substream(41, 2), return_info=True,
            )
            assert info["rounding_ops"] == ops


def test_cycle_lengths_follow_shape():
    a, b = np.zeros((3, 5)), np.zeros((5, 7))
    _, info = matmul_quantized(
        a, b, QuantMatmulConfig(k=2, mode="dither"), rng=substream(41, 3),
        return_info=True,
    )
    assert info["n_left"] == 7 and info["n_right"] == 3


def test_separate_deterministic_equals_quantize_then_multiply():
    g = substream(42, 0)
    a, b = g.random((6, 4)), g.random((4, 5))
    k = 3
    grid = 2**k - 1
    cfg = QuantMatmulConfig(k=k, mode="deterministic", variant="separate")
    got = matmul_quantized(a, b, cfg)
    ra = quantize_det(a * grid, k) / grid
    rb = quantize_det(b * grid, k) / grid
    assert np.allclose(got, ra.astype(float) @ rb.astype(float))


def test_nonzero_lo_affine_correction():
    """Signed scale: grid values of a (-1,1)-scaled exact-grid matrix
    must reproduce the true product bit-for-bit."""
    k = 4
    grid = 2**k - 1
    g = substream(42, 1)
    a = g.integers(0, grid + 1, (5, 6)) / grid * 2.0 - 1.0
    b = g.integers(0, grid + 1, (6, 4)) / grid * 2.0 - 1.0
    for mode in MATMUL_MODES:
        cfg = QuantMatmulConfig(k=k, mode=mode, variant="per-partial", scale=(-1.0, 1.0))
        got = matmul_quantized(a, b, cfg, rng=substream(42, 2))
        assert np.allclose(got, a @ b, atol=1e-9), mode


def test_unbiased_small_instance():
    g = substream(43, 0)
    a, b = g.random((8, 8)), g.random((8, 8))
    c = a @ b
    for mode in ("stochastic", "dither"):
        cfg = QuantMatmulConfig(k=2, mode=mode, variant="per-partial")
        reps = 250
        vals = np.array([
            matmul_quantized(a, b, cfg, rng=substream(43, 1, rep)) for rep in range(reps)
        ])
        mean = vals.mean(axis=0)
        sem = vals.std(axis=0, ddof=1) / np.sqrt(reps)
        z = np.abs(mean - c) / np.maximum(sem, 1e-12)
        assert (z > 3).mean() < 0.03, mode


def test_chunking_boundary_consistent():
    """Results must not depend on where the row chunk splits."""
    import dithercomp.linalg as linalg

    g = substream(44, 0)
    a, b = g.random((9, 11)), g.random((11, 6))
    cfg = QuantMatmulConfig(k=3, mode="dither", variant="per-partial")
    full = matmul_quantized(a, b, cfg, rng=substream(44, 1))
    old = linalg._CHUNK_CELLS
    try:
        linalg._CHUNK_CELLS = 11 * 6 * 2  # force 2-row chunks
        small = matmul_quantized(a, b, cfg, rng=substream(44, 1))
    finally:
        linalg._CHUNK_CELLS = old
    # same seed, different chunking: draw order changes, so compare law
    # not draws; deterministic mode must match exactly
    cfg_det = QuantMatmulConfig(k=3, mode="deterministic", variant="per-partial")
    try:
        linalg._CHUNK_CELLS = 11 * 6 * 2
        det_small = matmul_quantized(a, b, cfg_det)
    finally:
        linalg._CHUNK_CELLS = old
    assert np.allclose(det_small, matmul_quantized(a, b, cfg_det))
    assert full.shape == small.shape


def test_dither_n1_matches_stochastic_law():
    """1x1-output shapes force single-slot cycles on both operands."""
    a = np.array([[0.3, 0.6, 0.1]])
    b = np.array([[0.7], [0.2], [0.9]])
    reps = 4000
    outs = {}
    for mode in ("dither", "stochastic"):
        cfg = QuantMatmulConfig(k=1, mode=mode, variant="per-partial")
        outs[mode] = np.array([
            float(matmul_quantized(a, b, cfg, rng=substream(45, rep))[0, 0])
        for rep in range(reps)])
    assert abs(outs["dither"].mean() - outs["stochastic"].mean()) < 0.05
    assert abs(outs["dither"].var() - outs["stochastic"].var()) < 0.06


def test_experiment_records_and_csv(tmp_path):
    recs = run_matmul_experiment(
        k_list=[1, 2], modes=("deterministic", "dither"), variant="separate",
        shape=(6, 6, 6), pairs=4, seed=2, entry_range=(0.0, 0.5),
    )
    assert len(recs) == 4
    assert {r.mode for r in recs} == {"deterministic", "dither"}
    assert all(r.rounding_ops == (6 + 6) * 6 for r in recs)
    path = tmp_path / "mm.csv"
    write_matmul_csv(recs, path)
    lines = path.read_text().splitlines()
    assert lines[0] == MATMUL_CSV_HEADER
    assert len(lines) == 5
    recs2 = run_matmul_experiment(
        k_list=[1, 2], modes=("deterministic", "dither"), variant="separate",
        shape=(6, 6, 6), pairs=4, seed=2, entry_range=(0.0, 0.5),
    )
    assert recs == recs2
