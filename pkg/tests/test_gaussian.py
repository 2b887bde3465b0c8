import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fer_er.gaussian import (
    J2,
    MajoranaCorrelation,
    NotConverged,
    block_diagonalize,
    block_entropy,
    canonical_block,
    entropy_of,
    extract_submatrix,
    many_body_oracle,
    product_eigenvalues,
    project_out_pure,
)
from fer_er.lattice import ModelSpec, ground_state_correlation
from fer_er.oracle import wick_density_matrix

from conftest import random_gaussian, random_so

seeds = st.integers(0, 2**31 - 1)


def test_correlation_rejects_bad_input():
    with pytest.raises(ValueError):
        MajoranaCorrelation(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        MajoranaCorrelation(np.ones((2, 2)))
    with pytest.raises(ValueError):
        MajoranaCorrelation.from_array(2.0 * J2)
    assert MajoranaCorrelation(J2).mode_count == 1


def test_extract_submatrix():
    rng = np.random.default_rng(0)
    g, _, _ = random_gaussian(4, rng)
    assert np.array_equal(extract_submatrix(g, range(4)), g)
    sub = extract_submatrix(g, [2, 0])
    assert np.array_equal(sub[:2, :2], g[4:6, 4:6])
    assert np.array_equal(sub[2:, :2], g[0:2, 4:6])
    with pytest.raises(ValueError):
        extract_submatrix(g, [1, 1])
    with pytest.raises(IndexError):
        extract_submatrix(g, [4])


def test_single_mode_of_product_state():
    g = canonical_block(np.ones(3), [1, -1, 1])
    assert np.array_equal(extract_submatrix(g, [1]), -J2)


def test_zero_matrix_is_canonical():
    sp = block_diagonalize(np.zeros((6, 6)))
    assert np.array_equal(sp.v, np.zeros(3))
    assert np.allclose(sp.V, np.eye(6))


def test_sorting_contract():
    g = canonical_block([0.3, 0.9])
    sp = block_diagonalize(g)
    assert np.allclose(sp.v, [0.9, 0.3], atol=1e-14)
    assert abs(np.linalg.det(sp.V) - 1) < 1e-12
    assert np.allclose(sp.V @ g @ sp.V.T, canonical_block([0.9, 0.3]), atol=1e-14)


def test_equal_values_keep_mode_order():
    # ties are broken by original mode index: the frame stays the identity
    sp = block_diagonalize(canonical_block([0.5, 0.5, 0.5]))
    assert np.allclose(sp.V, np.eye(6))


def test_not_converged_is_raised():
    rng = np.random.default_rng(3)
    g, _, _ = random_gaussian(6, rng)
    with pytest.raises(NotConverged):
        block_diagonalize(g, max_sweeps=1)


@given(seeds, st.integers(1, 6))
def test_round_trip_and_invariants(seed, L):
    rng = np.random.default_rng(seed)
    g, v, _ = random_gaussian(L, rng)
    sp = block_diagonalize(g)
    assert np.allclose(sp.v, np.sort(v)[::-1], atol=1e-10)
    assert np.abs(sp.V @ sp.V.T - np.eye(2 * L)).max() < 1e-10
    assert abs(np.linalg.det(sp.V) - 1) < 1e-10
    assert np.abs(sp.V @ g @ sp.V.T - sp.canonical()).max() < 1e-10
    assert np.abs(sp.V.T @ sp.canonical() @ sp.V - g).max() < 1e-10


@given(seeds, st.integers(1, 6))
def test_entropy_is_rotation_invariant(seed, L):
    rng = np.random.default_rng(seed)
    g, _, _ = random_gaussian(L, rng)
    Q = random_so(2 * L, rng)
    s1 = block_entropy(block_diagonalize(g))
    s2 = block_entropy(block_diagonalize(Q @ g @ Q.T))
    assert abs(s1 - s2) < 1e-9
    assert abs(s1 - entropy_of(g)) < 1e-9


def test_entropy_values():
    assert block_entropy(np.ones(4)) == 0.0
    assert block_entropy(np.zeros(1)) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        block_entropy(np.array([1.5]))


def test_critical_entropy_slope():
    # S_L ~ (c/3) log2 L with c = 1/2 on an infinite chain, here M = 1024
    from fer_er.lattice import entropy_fit_slope

    g = ground_state_correlation(ModelSpec(1, 1024, 1, 1.0, 1.0, zero_mode="antiperiodic"))
    Ls = [2, 4, 8, 16]
    S = [entropy_of(extract_submatrix(g, range(L))) for L in Ls]
    slope = entropy_fit_slope(Ls, S)
    assert abs(slope - 1 / 6) < 0.15 / 6


def test_project_out_pure():
    rng = np.random.default_rng(7)
    g, _, _ = random_gaussian(3, rng)
    sp = block_diagonalize(g)
    kept, eps = project_out_pure(g, sp, 3)
    assert len(eps) == 0
    assert np.allclose(block_diagonalize(kept).v, sp.v, atol=1e-12)
    gp, _, _ = random_gaussian(3, rng, pure=True)
    kept, eps = project_out_pure(gp, block_diagonalize(gp), 1)
    assert np.all(np.abs(eps) < 1e-12)
    with pytest.raises(ValueError):
        project_out_pure(g, sp, 0)


def test_project_out_keeps_most_mixed():
    g = canonical_block([0.2, 0.9, 1.0, 1.0])
    kept, eps = project_out_pure(g, block_diagonalize(g), 2)
    assert np.allclose(sorted(block_diagonalize(kept).v), [0.2, 0.9])
    assert np.allclose(eps, 0.0)


@pytest.mark.parametrize("v, expected", [
    ((1.0, 1.0), (1.0, 0.0, 0.0, 0.0)),
    ((0.0,), (0.5, 0.5)),
    ((0.6,), (0.8, 0.2)),
])
def test_oracle_examples(v, expected):
    assert np.allclose(product_eigenvalues(v), expected, atol=1e-15)
    assert np.allclose(many_body_oracle(canonical_block(v)), expected, atol=1e-12)


@given(seeds, st.integers(1, 6))
def test_wick_density_matrix(seed, L):
    rng = np.random.default_rng(seed)
    g, v, _ = random_gaussian(L, rng)
    rho = wick_density_matrix(g)
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.abs(rho - rho.conj().T).max() < 1e-12
    many_body_oracle(g)


def test_oracle_size_limit():
    with pytest.raises(ValueError):
        many_body_oracle(np.zeros((18, 18)))


def test_critical_pair_spectrum_against_oracle():
    g = ground_state_correlation(ModelSpec(1, 256, 1, 1.0, 1.0))
    block = extract_submatrix(g, [10, 11])
    ev = many_body_oracle(block, tol=1e-10)
    assert ev.sum() == pytest.approx(1.0, abs=1e-12)
