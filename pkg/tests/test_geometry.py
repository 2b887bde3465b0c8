import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fer_er.geometry import build_geometry, check_partition, rotate_quarter, window_indices


def test_counts_1d():
    g = build_geometry(1, 8, 2)
    assert len(g.blocks) == 4 and len(g.disentanglers) == 4
    assert g.blocks[0] == [(0,), (1,)]
    assert g.disentanglers[0] == [(-1,), (0,)]


def test_counts_2d():
    g = build_geometry(2, 4, 4)
    assert len(g.blocks) == 4 and len(g.disentanglers) == 4
    assert g.blocks[0] == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_rejects_bad_sides():
    with pytest.raises(ValueError):
        build_geometry(1, 7, 1)
    with pytest.raises(ValueError):
        build_geometry(1, 2, 1)
    with pytest.raises(ValueError):
        build_geometry(3, 8, 1)


@given(st.sampled_from([1, 2]), st.sampled_from([4, 6, 8, 16]))
def test_partition_and_disjoint_disentanglers(dim, n):
    g = build_geometry(dim, n, 1)
    assert check_partition(g)


@pytest.mark.parametrize("n", [4, 8, 16])
def test_placements_invariant_under_quarter_turn(n):
    g = build_geometry(2, n, 1)
    placements = {frozenset(tuple(x % n for x in s) for s in p) for p in g.disentanglers}
    rotated = {frozenset(rotate_quarter(tuple(x % n for x in s), n) for s in p) for p in g.disentanglers}
    assert placements == rotated


def test_window_sizes():
    w = window_indices(build_geometry(1, 16, 2), 0)
    assert len(w.indices) == 24
    assert w.roles == ["central"] * 2 + ["partner"] * 2 + ["padding"] * 2
    assert [s[0] for s in w.sites] == [0, 1, -1, 2, -2, 3]
    w2 = window_indices(build_geometry(2, 8, 4), 0)
    assert len(w2.indices) // 2 == 144
    assert w2.roles.count("central") == 4 and w2.roles.count("partner") == 12
    assert len(w2.active) == 16 * 8
    assert all(len(s) == 32 for s in w2.slots)


def test_adjacent_windows_overlap_in_two_blocks():
    g = build_geometry(1, 16, 1)
    a = set(window_indices(g, 2).indices.tolist())
    b = set(window_indices(g, 3).indices.tolist())
    assert len(a & b) == 2 * 2 * 2


def test_window_extract_applies_boundary_signs():
    g = build_geometry(1, 8, 1, twist=(-1,))
    w = window_indices(g, 0)
    # site -1 and -2 wrap across the antiperiodic seam
    assert list(w.signs[:4]) == [1, 1, 1, 1]
    assert w.signs[4] == -1 and w.signs[8] == -1
    gamma = np.arange(256, dtype=float).reshape(16, 16)
    gamma = gamma - gamma.T
    ex = w.extract(gamma)
    assert ex[0, 4] == -gamma[0, 14]


def test_window_index_errors():
    g = build_geometry(1, 8, 1)
    with pytest.raises(IndexError):
        window_indices(g, 4)
    with pytest.raises(ValueError):
        # two sites per axis cannot host two distinct partners
        from fer_er.geometry import BlockGeometry
        small = BlockGeometry(1, 2, 1, (1,), [[(0,), (1,)]], [[(-1,), (0,)]])
        window_indices(small, 0)


def test_dump_is_json():
    g = build_geometry(2, 4, 1)
    d = json.loads(g.dump())
    assert d["window_extent_blocks"] == 3
    assert len(d["window"]["slots"]) == 4


def test_level_self_similarity():
    a = build_geometry(2, 16, 4)
    b = build_geometry(2, 8, 4)
    wa, wb = window_indices(a, 0), window_indices(b, 0)
    assert wa.sites == wb.sites and wa.roles == wb.roles
