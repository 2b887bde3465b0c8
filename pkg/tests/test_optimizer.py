import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fer_er.gaussian import block_diagonalize, canonical_block, project_out_pure
from fer_er.geometry import build_geometry, window_indices
from fer_er.lattice import ModelSpec
from fer_er.optimizer import (
    Isometry,
    OptimizerOptions,
    coarse_grain_window,
    disentangled_central,
    mask,
    optimal_isometry_given_disentanglers,
    optimize_layer,
    purity_cost,
    removed_mode_correlation,
)
from fer_er.rg import initial_state

from conftest import random_gaussian, random_so

seeds = st.integers(0, 2**31 - 1)


def ising_window(M=256, P=2, lam=1.0, gamma=1.0):
    st_ = initial_state(ModelSpec(1, M, P, gamma, lam, zero_mode="antiperiodic"), "ti")
    win = window_indices(st_.geometry(), 0)
    return st_.gather(win.sites), win


def test_mask_pattern():
    y = mask(3, 2)
    assert np.count_nonzero(y) == 4
    assert np.array_equal(y[:4, :4], canonical_block([1, 1]))


def test_purity_cost_examples():
    assert purity_cost(canonical_block(np.ones(3))) == pytest.approx(3.0)
    assert purity_cost(np.zeros((4, 4))) == 0.0
    v = np.array([0.3, 0.8, 0.55])
    assert purity_cost(canonical_block(v)) == pytest.approx(v.sum(), abs=1e-12)
    with pytest.raises(ValueError):
        purity_cost(np.zeros((4, 4)), mask(3, 3))


def test_isometry_keeps_most_mixed():
    g = canonical_block([0.2, 0.9, 1.0, 1.0])
    iso = optimal_isometry_given_disentanglers(g, 2)
    R = iso.R
    assert abs(np.linalg.det(R) - 1) < 1e-10
    assert np.abs(R @ R.T - np.eye(8)).max() < 1e-12
    kept = iso.W_kept.T @ g @ iso.W_kept
    rem = iso.W_removed.T @ g @ iso.W_removed
    assert sorted(block_diagonalize(kept).v) == pytest.approx([0.2, 0.9])
    assert purity_cost(rem) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        optimal_isometry_given_disentanglers(g, 5)


@given(seeds, st.integers(2, 5), st.data())
def test_isometry_optimality_audit(seed, L, data):
    keep = data.draw(st.integers(1, L - 1))
    rng = np.random.default_rng(seed)
    g, _, _ = random_gaussian(L, rng)
    iso = optimal_isometry_given_disentanglers(g, keep)
    best = purity_cost(iso.W_removed.T @ g @ iso.W_removed)
    for _ in range(200):
        alt = Isometry(random_so(2 * L, rng), keep)
        assert purity_cost(alt.W_removed.T @ g @ alt.W_removed) <= best + 1e-12


def test_product_window_converges_at_once():
    _, win = ising_window(64, 2)
    x = canonical_block(np.ones(len(win.indices) // 2))
    U, iso, tr = optimize_layer(x, win, 2)
    assert tr.iterations <= 1
    assert np.abs(U.matrix - np.eye(len(U.matrix))).max() < 1e-12
    assert tr.max_mixedness < 1e-12


def test_critical_window_and_no_disentangler_baseline():
    x, win = ising_window()
    U, iso, tr = optimize_layer(x, win, 2)
    assert tr.max_mixedness <= 5e-4
    _, _, tr0 = optimize_layer(x, win, 2, OptimizerOptions(use_disentanglers=False))
    assert tr0.max_mixedness >= 10 * tr.max_mixedness
    # orthogonality and determinant of the disentangler
    Um = U.matrix
    assert np.abs(Um @ Um.T - np.eye(len(Um))).max() < 1e-10
    assert abs(np.linalg.det(Um) - 1) < 1e-10
    assert abs(np.linalg.det(iso.R) - 1) < 1e-10
    # removed-mode spectrum agrees with project_out_pure on the disentangled block
    gc = disentangled_central(x, win, U)
    sp = block_diagonalize(gc)
    _, eps = project_out_pure(gc, sp, 2)
    rem = removed_mode_correlation(x, win, U, iso)
    v_rem = block_diagonalize(rem).v
    assert np.allclose(np.sort(1 - v_rem), np.sort(eps), atol=1e-10)


def test_identity_layer_leaves_entangled_modes():
    x, win = ising_window()
    m = len(win.slots[0])
    iso = optimal_isometry_given_disentanglers(disentangled_central(x, win, np.eye(m)), 2)
    rem = removed_mode_correlation(x, win, np.eye(m), iso)
    assert block_diagonalize(rem).v.min() < 0.999


def test_coarse_grain_identity_and_spectrum():
    x, win = ising_window(64, 2)
    m = len(win.slots[0])
    L = len(win.central) // 2
    central = x[np.ix_(win.central, win.central)]
    Y = mask(L, L)
    # W = R Y with antisymmetric Y: R = I rotates every mode by J ...
    out = coarse_grain_window(x, win, np.eye(m), Isometry(np.eye(2 * L), L))
    assert np.abs(out - Y.T @ central @ Y).max() < 1e-14
    # ... and R = Y^T makes W the identity
    out = coarse_grain_window(x, win, np.eye(m), Isometry(Y.T, L))
    assert np.abs(out - central).max() < 1e-14
    rng = np.random.default_rng(2)
    U, R = random_so(m, rng), random_so(2 * L, rng)
    out = coarse_grain_window(x, win, U, Isometry(R, L))
    assert np.allclose(block_diagonalize(out).v, block_diagonalize(disentangled_central(x, win, U)).v, atol=1e-10)
    assert removed_mode_correlation(x, win, U, Isometry(R, L)).size == 0


@given(seeds)
def test_cost_sequence_non_decreasing(seed):
    rng = np.random.default_rng(seed)
    geom = build_geometry(1, 8, 1)
    win = window_indices(geom, 0)
    n = len(win.indices) // 2
    g, _, _ = random_gaussian(n, rng, pure=bool(seed % 2))
    _, _, tr = optimize_layer(g, win, 1, OptimizerOptions(max_iters=60))
    assert np.all(np.diff(tr.costs) >= -1e-12)


def test_givens_scheme_is_monotone_and_close():
    x, win = ising_window(64, 2)
    _, _, tp = optimize_layer(x, win, 2, OptimizerOptions(max_iters=40))
    _, _, tg = optimize_layer(x, win, 2, OptimizerOptions(update="givens", max_iters=5, givens_grid=64))
    assert np.all(np.diff(tg.costs) >= -1e-12)
    assert tg.costs[-1] > tg.costs[0]


def test_option_validation():
    with pytest.raises(ValueError):
        OptimizerOptions(update="newton")
    with pytest.raises(ValueError):
        OptimizerOptions(kept_weight=1.0)
    with pytest.raises(ValueError):
        OptimizerOptions(det_policy="any")
    x, win = ising_window(64, 2)
    with pytest.raises(ValueError):
        optimize_layer(x, win, 0)
    with pytest.raises(ValueError):
        optimize_layer(x[:4, :4], win, 1)


def test_kept_weight_zero_is_pure_removed_purity():
    x, win = ising_window(64, 2)
    _, _, tr = optimize_layer(x, win, 2, OptimizerOptions(kept_weight=0.0, max_iters=50))
    assert tr.costs == pytest.approx(tr.removed_purity, abs=0)
