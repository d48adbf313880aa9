import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparset1.function import GridFunction, average, haar_difference
from sparset1.grid import Cube, GridError, GridGeometry
from sparset1.sparse import (Box, BoxSums, SparseCollection, SparseEntry, SparsityError, approximation_check,
                             buv_eval, lambda_eval, pointwise_lambda, random_sparse_collection, shifted_grid_family,
                             sparse_dominate_buv, square_function, universal_sparse, verify_sparsity)


def _haar(g):
    half = g.n // 2
    return GridFunction(g, np.where(np.arange(g.n) < half, 1.0, -1.0))


def _collection(g, cubes, c=0.5):
    return SparseCollection(g, [SparseEntry(Box.of(g, Q)) for Q in cubes], c)


def _positive(g, rng):
    return GridFunction(g, rng.exponential(size=g.shape))


# -------------------------------------------------------------- Lambda

def test_lambda_examples():
    g = GridGeometry(1, -4, 0)
    S = _collection(g, [Cube(0, (0,))])
    one = GridFunction.constant(g, 1)
    assert lambda_eval(S, one, one) == 1.0
    assert lambda_eval(S, GridFunction.indicator(g, [0], [0.5]), one) == 0.5
    assert lambda_eval(_collection(g, []), one, one) == 0.0


def test_lambda_matches_cube_average_oracle_and_pointwise_form():
    g = GridGeometry(2, -4, 0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        S = random_sparse_collection(g, rng)
        f, h = _positive(g, rng), _positive(g, rng)
        cubes = [Cube(g.scale_min + int(np.log2(e.box.size)), tuple(x // e.box.size for x in e.box.lo))
                 for e in S.entries]
        oracle = sum(average(f, Q) * average(h, Q) * Q.measure for Q in cubes)
        value = lambda_eval(S, f, h)
        assert value == pytest.approx(oracle, rel=1e-12)
        assert pointwise_lambda(S, f, h) == pytest.approx(value, rel=1e-10)


def test_lambda_monotone_under_enlarging():
    g = GridGeometry(1, -5, 0)
    rng = np.random.default_rng(1)
    f, h = _positive(g, rng), _positive(g, rng)
    cubes = list(g.all_cubes())
    rng.shuffle(cubes)
    prev = 0.0
    for m in range(1, 20):
        cur = lambda_eval(_collection(g, cubes[:m]), f, h)
        assert cur >= prev
        prev = cur


def test_box_sums_match_slicing():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(16, 16))
    bs = BoxSums(a)
    for _ in range(50):
        lo = rng.integers(-8, 16, size=2)
        w = int(rng.integers(1, 20))
        lo_c = np.clip(lo, 0, 16)
        hi_c = np.clip(lo + w, 0, 16)
        expected = a[lo_c[0]:hi_c[0], lo_c[1]:hi_c[1]].sum()
        assert bs.query(lo[None, :], np.array([w]))[0] == pytest.approx(expected, abs=1e-12)


# ------------------------------------------------------------ sparsity

def test_sparsity_examples():
    g = GridGeometry(1, -4, 0)
    disjoint = _collection(g, [Cube(-2, (i,)) for i in range(4)])
    cert = verify_sparsity(disjoint)
    assert cert.max_overlap == 1.0 and cert.min_carve_ratio == 1.0 and cert.passes
    for k in range(1, 5):
        chain = _collection(g, [Cube(-j, (0,)) for j in range(k)])
        cert = verify_sparsity(chain)
        assert cert.max_overlap == k
        assert cert.passes == (k <= 2)
    outside = SparseCollection(g, [SparseEntry(Box((0,), 4), [Box((4,), 2)])], 0.5)
    with pytest.raises(SparsityError):
        verify_sparsity(outside)


def test_overlap_counts_against_direct_cell_count():
    g = GridGeometry(2, -4, 0)
    rng = np.random.default_rng(3)
    for _ in range(10):
        S = random_sparse_collection(g, rng)
        cover = np.zeros(g.shape)
        for e in S.entries:
            sl = tuple(slice(a, a + e.box.size) for a in e.box.lo)
            cover[sl] += 1
            for r in e.removed:
                cover[tuple(slice(a, a + r.size) for a in r.lo)] -= 1
        cert = verify_sparsity(S)
        assert cert.max_overlap == cover.max()
        assert cert.passes


def test_collection_json_round_trip():
    g = GridGeometry(2, -4, 0)
    S = random_sparse_collection(g, np.random.default_rng(4))
    back = SparseCollection.from_json(S.to_json())
    assert back.to_json() == S.to_json()
    f = _positive(g, np.random.default_rng(5))
    assert pointwise_lambda(back, f, f, use_carve=True) == pytest.approx(pointwise_lambda(S, f, f, use_carve=True))


# ---------------------------------------------------- complexity forms

def _buv_oracle(f, h, u, v):
    # sum over window cubes P of <|D_{i_P - u} f|>_{3P} <|D_{i_P - v} h|>_{3P} |P|
    g = f.geometry

    def level_diff(func, k):
        out = np.zeros(g.shape)
        if k >= g.levels:
            return out
        for Q in g.cubes(g.scale_max - k):
            out += haar_difference(func, Q).function.values
        return out

    def triple(vals, P):
        lo = np.array(P.index) * (g.n >> g.level_of(P.scale)) - (g.n >> g.level_of(P.scale))
        w = g.n >> g.level_of(P.scale)
        total = 0.0
        for idx in np.ndindex(*(3 * w,) * g.d):
            cell = lo + np.array(idx)
            if np.all(cell >= 0) and np.all(cell < g.n):
                total += abs(vals[tuple(cell)])
        return total / (3 * w) ** g.d

    total = 0.0
    for P in g.all_cubes():
        k = g.level_of(P.scale)
        total += triple(level_diff(f, k + u), P) * triple(level_diff(h, k + v), P) * P.measure
    return total


def test_buv_examples():
    g = GridGeometry(1, -4, 0)
    H = _haar(g)
    assert buv_eval(H, H, 0, 0) == pytest.approx(1 / 9, rel=1e-14)
    assert buv_eval(GridFunction.constant(g, 2), H, 1, 0) == 0.0
    with pytest.raises(GridError):
        buv_eval(H, H, 5, 0)


def test_buv_matches_loop_oracle_and_is_symmetric():
    rng = np.random.default_rng(6)
    for d, L in ((1, 4), (2, 2)):
        g = GridGeometry(d, -L, 0)
        f, h = GridFunction(g, rng.normal(size=g.shape)), GridFunction(g, rng.normal(size=g.shape))
        for u, v in itertools.product(range(3), repeat=2):
            value = buv_eval(f, h, u, v)
            assert value == pytest.approx(_buv_oracle(f, h, u, v), rel=1e-12, abs=1e-15)
            assert value == pytest.approx(buv_eval(h, f, v, u), rel=1e-14)


def test_square_function_examples():
    g = GridGeometry(1, -4, 0)
    assert np.allclose(square_function(_haar(g), 0).values, 1 / 3, atol=1e-15)
    assert not np.any(square_function(GridFunction.constant(g, 5), 2).values)


def test_square_function_integral_is_buv_diagonal():
    g = GridGeometry(1, -6, 0)
    f = GridFunction(g, np.random.default_rng(7).normal(size=g.shape))
    for u in range(4):
        S = square_function(f, u)
        assert S.norm(2) ** 2 == pytest.approx(buv_eval(f, f, u, u), rel=1e-12)


def test_square_function_l2_uniform_in_u():
    g = GridGeometry(1, -10, 0)
    rng = np.random.default_rng(8)
    ratios = []
    for u in range(7):
        vals = []
        for _ in range(5):
            f = GridFunction(g, rng.uniform(-1, 1, g.shape))
            vals.append(square_function(f, u).norm(2) / f.norm(2))
        ratios.append(np.mean(vals))
    assert max(ratios) / min(ratios) < 2


def test_buv_domination_examples():
    g = GridGeometry(1, -4, 0)
    H = _haar(g)
    dom = sparse_dominate_buv(H, H, 0, 0)
    assert [e.box for e in dom.collection.entries] == [Box((0,), 16)]
    assert lambda_eval(dom.collection, H.abs(), H.abs()) == 1.0
    lhs, rhs = dom.check(H, H)
    assert lhs == pytest.approx(1 / 9) and lhs <= rhs * (1 + 1e-12)
    flat = sparse_dominate_buv(GridFunction.constant(g, 1), H, 1, 2)
    lhs, rhs = flat.check(GridFunction.constant(g, 1), H)
    assert lhs == 0.0 and rhs >= 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(0, 2), st.integers(0, 2), st.integers(1, 2))
def test_buv_domination_property(seed, u, v, d):
    g = GridGeometry(d, -(7 if d == 1 else 4), 0)
    rng = np.random.default_rng(seed)
    inner = np.zeros(g.shape, dtype=bool)
    inner[(slice(g.n // 4, 3 * g.n // 4),) * d] = True
    f = GridFunction(g, rng.uniform(-1, 1, g.shape) * inner)
    h = GridFunction(g, rng.uniform(-1, 1, g.shape) * inner)
    dom = sparse_dominate_buv(f, h, u, v)
    lhs, rhs = dom.check(f, h)
    assert lhs <= rhs * (1 + 1e-12)
    cert = verify_sparsity(dom.collection, 0.5)
    assert cert.passes and cert.min_carve_ratio >= 0.75


# ----------------------------------------------------- universal sparse

def test_shifted_grid_family_sizes():
    assert len(shifted_grid_family(GridGeometry(1, -4, 0))) == 3
    assert len(shifted_grid_family(GridGeometry(2, -4, 0))) == 9


def test_shifted_grids_are_nested():
    g = GridGeometry(1, -6, 0)
    for grid in shifted_grid_family(g):
        for s in range(g.scale_min, g.scale_max + 3):
            child = grid.cube_box(s, (5,))
            parent_lo = grid.offset(s + 1)[0]
            n = 2 * child.size
            j = (child.lo[0] - parent_lo) // n
            assert grid.cube_box(s + 1, (j,)).contains(child)


def test_approximation_property_exhaustive():
    res = approximation_check(GridGeometry(1, -5, 0))
    assert res["weak_ok"] == res["cubes"] == 528
    res2 = approximation_check(GridGeometry(2, -3, 0))
    assert res2["weak_ok"] == res2["cubes"]


def test_universal_examples():
    g = GridGeometry(1, -5, 0)
    empty = universal_sparse(GridFunction.zeros(g), GridFunction.zeros(g))
    assert len(empty.collection) == 0
    one = GridFunction.constant(g, 1)
    res = universal_sparse(one, one, shifted_grid_family(g)[:1])
    assert [e.box for e in res.collection.entries] == [Box((0,), 32)]
    with pytest.raises(ValueError):
        universal_sparse(-one, one)


def test_universal_level_bounds_and_sparsity():
    rng = np.random.default_rng(9)
    for d, L in ((1, 6), (2, 4)):
        g = GridGeometry(d, -L, 0)
        for _ in range(5):
            f = GridFunction(g, rng.exponential(size=g.shape) ** 3)
            h = GridFunction(g, rng.exponential(size=g.shape) ** 3)
            res = universal_sparse(f, h)
            assert res.level_bound_violations() == 0
            cert = verify_sparsity(res.collection)
            assert cert.passes, cert


def test_universal_dominates_random_collections():
    rng = np.random.default_rng(10)
    for d in (1, 2):
        g = GridGeometry(d, -(6 if d == 1 else 4), 0)
        f, h = _positive(g, rng), _positive(g, rng)
        lam0 = lambda_eval(universal_sparse(f, h).collection, f, h)
        for _ in range(10):
            S = random_sparse_collection(g, rng)
            assert lambda_eval(S, f, h) <= 16 ** d * 4 * lam0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_random_collections_are_sparse(seed):
    g = GridGeometry(1, -6, 0)
    S = random_sparse_collection(g, np.random.default_rng(seed), c=0.5)
    assert verify_sparsity(S).passes
