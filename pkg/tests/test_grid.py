import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilejoin.datasets import Dataset
from tilejoin.errors import ValidationError
from tilejoin.grid import build_index, candidates_for_cell, cell_of, neighbor_cells
from tilejoin.oracle import brute_force_join

rng = np.random.default_rng(99)


def test_two_cells_floor_arithmetic():
    index = build_index(Dataset([[0.05, 0.05], [0.15, 0.05]]), 0.1, 2)
    assert set(index.cells) == {(0, 0), (1, 0)}
    assert index.cells[(0, 0)].tolist() == [0]
    assert index.cells[(1, 0)].tolist() == [1]


def test_identical_points_share_one_cell():
    index = build_index(Dataset(np.tile([0.4, 0.4, 0.4], (20, 1))), 0.25, 2)
    assert index.n_cells == 1
    assert index.cells[(1, 1)].tolist() == list(range(20))


def test_negative_coordinates_use_floor_division():
    index = build_index(Dataset([[-0.05], [-0.15], [0.05]]), 0.1, 1)
    assert set(index.cells) == {(-1,), (-2,), (0,)}


def test_edge_point_belongs_to_the_higher_cell():
    index = build_index(Dataset([[1.0], [0.99]]), 0.5, 1)
    assert index.cells[(2,)].tolist() == [0]
    assert index.cells[(1,)].tolist() == [1]


def test_cell_assignment_matches_scalar_floor_oracle():
    data = Dataset(rng.normal(size=(1000, 4)))
    epsilon = 0.3
    index = build_index(data, epsilon, 4)
    for pid in range(1000):
        coord = tuple(math.floor(v / epsilon) for v in data.logical[pid])
        assert pid in index.cells[coord]
        assert cell_of(data.logical[pid], epsilon, 4) == coord


def test_partition_and_point_order():
    data = Dataset(rng.random((300, 3)))
    index = build_index(data, 0.2, 3)
    counts = sum(len(ids) for ids in index.cells.values())
    assert counts == 300
    all_ids = np.concatenate([index.cells[c] for c in index.ordered_cells])
    assert np.array_equal(np.sort(all_ids), np.arange(300))
    assert np.array_equal(index.point_order, all_ids)
    assert index.ordered_cells == sorted(index.ordered_cells)


def test_determinism():
    data = Dataset(rng.random((200, 5)))
    a = build_index(data, 0.17, 4)
    b = build_index(data, 0.17, 4)
    assert a.ordered_cells == b.ordered_cells
    assert np.array_equal(a.point_order, b.point_order)
    for c in a.cells:
        assert np.array_equal(a.cells[c], b.cells[c])


def test_neighbor_cells_1d_adjacency():
    pts = Dataset([[0.45], [0.55], [0.75]])  # cells (4), (5), (7) at eps 0.1
    index = build_index(pts, 0.1, 1)
    assert neighbor_cells(index, (5,)) == [(4,), (5,)]


def test_neighbor_cells_full_neighborhood():
    pts = [[0.25 * (i + 0.5), 0.25 * (j + 0.5)] for i in range(3) for j in range(3)]
    index = build_index(Dataset(pts), 0.25, 2)
    assert len(neighbor_cells(index, (1, 1))) == 9


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_neighbor_cells_matches_chebyshev_filter(seed):
    r = np.random.default_rng(seed)
    data = Dataset(r.random((60, 3)))
    index = build_index(data, 0.2, 3)
    for cell in index.ordered_cells[:5]:
        got = neighbor_cells(index, cell)
        expect = sorted(
            c for c in index.cells if max(abs(a - b) for a, b in zip(c, cell)) <= 1
        )
        assert got == expect


def test_candidates_isolated_cell():
    index = build_index(Dataset([[0.5, 0.5]]), 0.1, 2)
    assert candidates_for_cell(index, (5, 5)).tolist() == [0]


def test_candidates_adjacent_cells_union():
    index = build_index(Dataset([[0.05], [0.06], [0.15]]), 0.1, 1)
    assert candidates_for_cell(index, (0,)).tolist() == [0, 1, 2]
    assert candidates_for_cell(index, (1,)).tolist() == [0, 1, 2]


def test_candidates_empty_cell_rejected():
    index = build_index(Dataset([[0.5]]), 0.1, 1)
    with pytest.raises(ValidationError):
        candidates_for_cell(index, (9,))


def test_candidate_duplicates_impossible():
    data = Dataset(rng.random((400, 2)))
    index = build_index(data, 0.15, 2)
    for cell in index.ordered_cells:
        cands = candidates_for_cell(index, cell)
        assert len(np.unique(cands)) == len(cands)


def test_completeness_against_brute_force_oracle():
    for d, k_idx in [(2, 2), (4, 3), (6, 4)]:
        data = Dataset(rng.random((300, d)))
        epsilon = 0.35
        index = build_index(data, epsilon, k_idx)
        truth = brute_force_join(data, epsilon)
        cand_cache = {c: set(candidates_for_cell(index, c).tolist()) for c in index.cells}
        for i, j in truth.pairs:
            cell = cell_of(data.logical[i], epsilon, k_idx)
            assert int(j) in cand_cache[cell]


def test_k_idx_monotonicity():
    data = Dataset(rng.random((250, 5)))
    epsilon = 0.3
    per_point = []
    for k in range(1, 6):
        index = build_index(data, epsilon, k)
        sets = {}
        for cell in index.ordered_cells:
            members = index.cells[cell]
            cands = set(candidates_for_cell(index, cell).tolist())
            for pid in members:
                sets[int(pid)] = cands
        per_point.append(sets)
    for k in range(1, 5):
        for pid in range(250):
            assert per_point[k][pid] <= per_point[k - 1][pid]


def test_build_validation_errors():
    data = Dataset(rng.random((10, 3)))
    with pytest.raises(ValidationError):
        build_index(data, 0.0, 2)
    with pytest.raises(ValidationError):
        build_index(data, -1.0, 2)
    with pytest.raises(ValidationError):
        build_index(data, 0.1, 0)
    with pytest.raises(ValidationError):
        build_index(data, 0.1, 4)


def test_neighbor_cells_wrong_arity():
    index = build_index(Dataset(rng.random((10, 3))), 0.2, 3)
    with pytest.raises(ValidationError):
        neighbor_cells(index, (0, 0))
