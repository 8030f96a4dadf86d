import math
from fractions import Fraction

import numpy as np
import pytest

from tilejoin.errors import ValidationError
from tilejoin.kernels import (
    PRUNED,
    cancellation_floor,
    distance_tile_v1,
    distance_tile_v2,
    leading_identity,
    precompute_chunk_norms,
    scalar_distance_sq,
)

rng = np.random.default_rng(42)


def chunk_norms_oracle(points):
    """Scalar accumulation, ascending within each 4-wide chunk."""
    points = np.atleast_2d(points)
    n, d = points.shape
    n_chunks = -(-d // 4)
    out = np.zeros((n, n_chunks))
    for p in range(n):
        for j in range(n_chunks):
            acc = 0.0
            for i in range(4 * j, min(4 * j + 4, d)):
                acc += points[p, i] * points[p, i]
            out[p, j] = acc
    return out


def tile_oracle_sq(queries, candidates):
    """Direct squared distances for every (query, candidate) slot."""
    out = np.zeros((len(queries), len(candidates)))
    for i, q in enumerate(queries):
        for j, c in enumerate(candidates):
            out[i, j] = scalar_distance_sq(q, c)
    return out


def norms_for(points):
    return precompute_chunk_norms(np.atleast_2d(points)).values


# ---------------------------------------------------------------- chunk norms


def test_chunk_norms_zero_point():
    assert np.array_equal(norms_for([[0.0, 0.0, 0.0, 0.0]]), [[0.0]])


def test_chunk_norms_hand_sum():
    got = norms_for([[1.0, 2.0, 3.0, 4.0, 5.0]])
    assert np.array_equal(got, [[30.0, 25.0]])


def test_chunk_norms_random_vs_scalar_loop():
    pts = rng.normal(size=(10, 7))
    assert np.array_equal(norms_for(pts), chunk_norms_oracle(pts))


def test_chunk_norms_entry_count_and_sign():
    for n, d in [(1, 1), (5, 4), (9, 13), (3, 90)]:
        norms = precompute_chunk_norms(rng.normal(size=(n, d)))
        assert norms.entry_count == n * math.ceil(d / 4)
        assert (norms.values >= 0).all()


def test_chunk_norms_sum_to_squared_norm():
    pts = rng.normal(size=(20, 11))
    norms = norms_for(pts)
    for p in range(20):
        expect = float(np.dot(pts[p], pts[p]))
        assert abs(norms[p].sum() - expect) <= 4 * 11 * np.finfo(float).eps * max(expect, 1.0)


def test_chunk_norms_reject_non_finite():
    pts = rng.normal(size=(4, 5))
    pts[2, 3] = math.inf
    with pytest.raises(ValidationError, match="point 2.*dimension 3"):
        precompute_chunk_norms(pts)


# ------------------------------------------------------------------------ v1


def test_v1_self_distance_is_zero():
    q = rng.random(8)
    diag = distance_tile_v1(q, q[None, :], leading_identity())
    assert diag.shape == (1,)
    assert diag[0] == 0.0


def test_v1_three_four_five():
    diag = distance_tile_v1([0.0, 0.0, 0.0, 0.0], [[3.0, 4.0, 0.0, 0.0]], leading_identity())
    assert diag[0] == 25.0


def test_v1_random_d12_vs_scalar_oracle():
    q = rng.random(12)
    cands = rng.random((8, 12))
    diag = distance_tile_v1(q, cands, leading_identity())
    for j in range(8):
        ref = scalar_distance_sq(q, cands[j])
        assert abs(diag[j] - ref) <= 1e-9 * max(1.0, ref)


def test_v1_dimension_mismatch():
    with pytest.raises(ValidationError):
        distance_tile_v1(rng.random(4), rng.random((2, 5)), leading_identity())


def test_v1_too_many_candidates():
    with pytest.raises(ValidationError):
        distance_tile_v1(rng.random(4), rng.random((9, 4)), leading_identity())


# ------------------------------------------------------------------------ v2


def v2_full(queries, candidates, **kw):
    return distance_tile_v2(queries, candidates, norms_for(queries), norms_for(candidates), **kw)


def test_v2_coincident_points():
    pts = np.tile(rng.random(6), (8, 1))
    tile = v2_full(pts, pts)
    floor = cancellation_floor(float(np.dot(pts[0], pts[0])), float(np.dot(pts[0], pts[0])))
    assert tile.valid.shape == (8, 8)
    assert (tile.valid <= floor).all()
    assert (tile.valid >= 0.0).all()  # clamped


def test_v2_orthonormal_basis():
    basis = np.eye(8)
    tile = v2_full(basis, basis)
    assert np.array_equal(tile.valid, 2.0 * (1.0 - np.eye(8)))


def test_v2_random_d19_vs_scalar_oracle():
    q = rng.random((8, 19))
    c = rng.random((8, 19))
    tile = v2_full(q, c)
    ref = tile_oracle_sq(q, c)
    qn, cn = norms_for(q), norms_for(c)
    for i in range(8):
        for j in range(8):
            bound = cancellation_floor(qn[i].sum(), cn[j].sum())
            assert abs(tile.sq_dists[i, j] - ref[i, j]) <= bound


def test_v2_padding_dimensions_contribute_exactly_zero():
    q = rng.random((8, 5))
    c = rng.random((8, 5))
    widened_q = np.hstack([q, np.zeros((8, 7))])
    widened_c = np.hstack([c, np.zeros((8, 7))])
    assert np.array_equal(v2_full(q, c).sq_dists, v2_full(widened_q, widened_c).sq_dists)


def test_v2_partial_tile_validity():
    q = rng.random((3, 6))
    c = rng.random((5, 6))
    tile = v2_full(q, c)
    assert tile.valid_queries == 3 and tile.valid_candidates == 5
    assert np.allclose(tile.valid, tile_oracle_sq(q, c), rtol=1e-9, atol=1e-12)


def test_v2_short_circuit_skips_chunks_without_changing_the_decision():
    # all pairs farther than epsilon: the first chunk already exceeds eps_sq
    q = np.zeros((8, 8))
    c = np.full((8, 8), 10.0)
    eps_sq = 1.0
    full = v2_full(q, c, epsilon_sq=eps_sq, short_circuit=False)
    cut = v2_full(q, c, epsilon_sq=eps_sq, short_circuit=True)
    assert not full.pruned and full.chunks_executed == 2
    assert cut.pruned and cut.chunks_executed == 1
    # identical pruning decision for the join predicate
    assert not (full.valid <= eps_sq).any()
    assert not (cut.valid[: cut.valid_queries, : cut.valid_candidates] <= eps_sq).any()


def test_v2_short_circuit_negative_zero_epsilon():
    q = rng.random((4, 8)) + 2.0
    c = -(rng.random((4, 8)) + 2.0)
    cut = v2_full(q, c, epsilon_sq=-0.0, short_circuit=True)
    assert cut.pruned and cut.chunks_executed == 1


def test_v2_never_prunes_reachable_pairs():
    # one pair inside epsilon keeps every chunk alive
    q = rng.random((8, 8))
    c = np.vstack([q[0], rng.random((7, 8)) + 5.0])
    tile = v2_full(q, c, epsilon_sq=0.25, short_circuit=True)
    assert not tile.pruned and tile.chunks_executed == 2


def test_v2_epsilon_sq_validation():
    q = rng.random((2, 4))
    with pytest.raises(ValidationError):
        v2_full(q, q, epsilon_sq=-1.0)


def test_v2_norm_slice_mismatch():
    q = rng.random((4, 8))
    with pytest.raises(ValidationError):
        distance_tile_v2(q, q, norms_for(q)[:3], norms_for(q))
    with pytest.raises(ValidationError):
        distance_tile_v2(q, q, norms_for(q)[:, :1], norms_for(q))


def test_v2_chunk_norm_consistency():
    data = rng.random((16, 10))
    all_norms = precompute_chunk_norms(data).values
    q, c = data[:8], data[8:]
    with_precomputed = distance_tile_v2(q, c, all_norms[:8], all_norms[8:])
    with_recomputed = distance_tile_v2(q, c, norms_for(q), norms_for(c))
    assert np.array_equal(with_precomputed.sq_dists, with_recomputed.sq_dists)


def test_v1_v2_agreement_on_matching_slots():
    for d in (3, 8, 12):
        q = rng.random((8, d))
        c = rng.random((8, d))
        tile = v2_full(q, c)
        for qi in range(8):
            diag = distance_tile_v1(q[qi], c, leading_identity())
            for j in range(8):
                truth = scalar_distance_sq(q[qi], c[j])
                tol = 1e-12 if truth == 0.0 else 1e-9 * max(1.0, truth)
                assert abs(diag[j] - tile.sq_dists[qi, j]) <= 2 * tol


# -------------------------------------------------------------------- scalar


def test_scalar_self_distance():
    p = rng.random(6)
    assert scalar_distance_sq(p, p) == 0.0


def test_scalar_three_four_five():
    assert scalar_distance_sq([0.0, 0.0], [3.0, 4.0]) == 25.0


def test_scalar_vs_exact_rational_oracle():
    for _ in range(50):
        d = int(rng.integers(1, 20))
        a = rng.normal(size=d)
        b = rng.normal(size=d)
        exact = Fraction(0)
        for x, y in zip(a, b):
            diff = Fraction(float(x)) - Fraction(float(y))
            exact += diff * diff
        got = scalar_distance_sq(a, b)
        assert abs(got - float(exact)) <= 1e-12 * max(float(exact), 1e-300)


def test_scalar_short_circuit_returns_marker():
    assert scalar_distance_sq([0.0, 0.0], [5.0, 0.0], epsilon_sq=1.0, short_circuit=True) is PRUNED
    assert scalar_distance_sq([0.0, 0.0], [0.5, 0.0], epsilon_sq=1.0, short_circuit=True) == 0.25


def test_scalar_dimension_mismatch():
    with pytest.raises(ValidationError):
        scalar_distance_sq([1.0, 2.0], [1.0])
