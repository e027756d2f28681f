"""Dynamic programming tables against exhaustive enumeration."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lastpassage.lpp import (
    NoPathError,
    RangeTooLarge,
    WeightWindow,
    WindowTooLarge,
    brute_force_max_weight,
    brute_force_tables,
    max_length_table,
    max_plus_weight_table,
    max_weight,
    max_weight_table,
    max_weight_to_table,
    path_weight,
    reconstruct_max_path,
    sample_window,
    superadditive_gap,
    w0n_batch,
)
from lastpassage.weights import NEG_INF, WeightModel, to_extended

ARITH = WeightModel.arithmetic({-1: 0.2, 1: 0.35, 2: 0.25}, 0.2)
UNIF = WeightModel.uniform(-0.5, 1.5, 0.1)


def as_float(x):
    return -math.inf if x is NEG_INF else float(x)


@st.composite
def windows(draw, max_span=10):
    span = draw(st.integers(1, max_span))
    lo = draw(st.integers(-5, 5))
    model = draw(st.sampled_from([ARITH, UNIF]))
    seed = draw(st.integers(0, 2**32 - 1))
    return sample_window(model, lo, lo + span, np.random.default_rng(seed))


class TestWindow:
    def test_smallest_window(self):
        w = sample_window(ARITH, 0, 1, np.random.default_rng(0))
        assert [(j, k) for j, k, _ in w.edges()] == [(0, 1)]

    def test_edge_count(self):
        w = sample_window(ARITH, 0, 3, np.random.default_rng(0))
        assert len(list(w.edges())) == 6

    def test_same_seed_same_window(self):
        a = sample_window(UNIF, 0, 30, np.random.default_rng(5))
        b = sample_window(UNIF, 0, 30, np.random.default_rng(5))
        assert np.array_equal(a.v, b.v)

    def test_column_order_of_draws(self):
        # edge (j, k) takes draw t(t-1)/2 + (j - lo) with t = k - lo
        u = np.random.default_rng(9).random(10)
        vals = UNIF.from_uniform(u)
        w = sample_window(UNIF, 2, 6, np.random.default_rng(9))
        for j, k, x in w.edges():
            t = k - 2
            assert as_float(x) == vals[t * (t - 1) // 2 + (j - 2)]

    def test_too_large(self):
        with pytest.raises(WindowTooLarge):
            sample_window(ARITH, 0, 100, np.random.default_rng(0), max_vertices=50)

    def test_backward_edges_rejected(self):
        w = sample_window(ARITH, 0, 3, np.random.default_rng(0))
        with pytest.raises(ValueError):
            w.weight(2, 1)
        with pytest.raises(ValueError):
            w.weight(1, 1)

    def test_csv_roundtrip(self):
        w = sample_window(ARITH, -2, 6, np.random.default_rng(4))
        back = WeightWindow.from_csv(w.to_csv())
        assert (back.lo, back.hi) == (w.lo, w.hi)
        assert np.array_equal(back.v, w.v)

    def test_read_only(self):
        w = sample_window(ARITH, 0, 3, np.random.default_rng(0))
        with pytest.raises(ValueError):
            w.v[0, 1] = 5.0


class TestMaxWeight:
    def test_origin_is_zero(self):
        w = sample_window(ARITH, 0, 5, np.random.default_rng(1))
        assert max_weight_table(w, 0)[0] == 0
        assert max_weight(w, 3, 3) == 0

    def test_single_edge(self):
        w = WeightWindow.from_edges(0, 1, {(0, 1): 5})
        assert max_weight(w, 0, 1) == 5

    def test_only_two_edge_path(self):
        w = WeightWindow.from_edges(0, 2, {(0, 1): 1, (1, 2): 1})
        assert max_weight(w, 0, 2) == 2

    def test_no_path(self):
        w = WeightWindow.from_edges(0, 3, {})
        assert max_weight(w, 0, 3) is NEG_INF
        assert np.all(max_weight_table(w, 0)[1:] == -np.inf)
        with pytest.raises(NoPathError):
            reconstruct_max_path(w, 0, 3)

    def test_all_nonpositive_kills_plus(self):
        w = WeightWindow.from_edges(0, 6, {}, default=-1.0)
        assert np.all(max_plus_weight_table(w, 0)[1:] == -np.inf)

    def test_constant_two(self):
        w = WeightWindow.from_edges(0, 8, {}, default=2)
        k = np.arange(9)
        assert np.array_equal(max_weight_table(w, 0), 2.0 * k)
        assert np.array_equal(max_plus_weight_table(w, 0), 2.0 * k)

    def test_chain_length(self):
        w = WeightWindow.from_edges(0, 7, {(i, i + 1): -3 for i in range(7)})
        assert np.array_equal(max_length_table(w, 0), np.arange(8))

    def test_length_all_neg_inf(self):
        w = WeightWindow.from_edges(0, 4, {})
        L = max_length_table(w, 0)
        assert L[0] == 0 and np.all(L[1:] == -1)

    def test_backward_table_matches_forward(self):
        w = sample_window(UNIF, 0, 20, np.random.default_rng(2))
        back = max_weight_to_table(w, 20)
        for d in range(21):
            assert back[d] == pytest.approx(max_weight_table(w, 20 - d)[d], rel=1e-12)

    def test_batch_matches_window(self):
        from lastpassage.seeding import replica_rng

        got = w0n_batch(ARITH, 30, [replica_rng(3, "measure", r) for r in range(5)])
        for r in range(5):
            win = sample_window(ARITH, 0, 30, replica_rng(3, "measure", r))
            assert np.array_equal(got[r], max_weight_table(win, 0))


class TestOracle:
    def test_span_cap(self):
        w = sample_window(ARITH, 0, 30, np.random.default_rng(0))
        with pytest.raises(RangeTooLarge):
            brute_force_max_weight(w, 0, 30)

    def test_trivial_pair(self):
        w = sample_window(ARITH, 0, 3, np.random.default_rng(0))
        weight, paths, L = brute_force_max_weight(w, 1, 1)
        assert weight == 0 and paths[0].vertices == (1,) and L == 0

    def test_adjacent_pair(self):
        w = sample_window(UNIF, 0, 3, np.random.default_rng(0))
        weight, _, _ = brute_force_max_weight(w, 1, 2)
        assert weight == w.weight(1, 2)

    @settings(max_examples=200)
    @given(windows(max_span=12))
    def test_tables_equal_enumeration(self, w):
        for origin in range(w.lo, w.hi):
            bw, bwp, bL = brute_force_tables(w, origin)
            dw = max_weight_table(w, origin)
            dwp = max_plus_weight_table(w, origin)
            dL = max_length_table(w, origin)
            assert [as_float(x) for x in bw] == dw.tolist()
            assert [as_float(x) for x in bwp] == dwp.tolist()
            assert [-1 if x is NEG_INF else x for x in bL] == dL.tolist()

    @settings(max_examples=60)
    @given(windows(max_span=8))
    def test_pairwise_enumeration(self, w):
        for j in range(w.lo, w.hi):
            for k in range(j + 1, w.hi + 1):
                weight, _, L = brute_force_max_weight(w, j, k)
                wp, _, _ = brute_force_max_weight(w, j, k, mode="positive_only")
                assert max_weight(w, j, k) == weight
                assert as_float(wp) == max_plus_weight_table(w, j)[k - j]
                assert (-1 if L is NEG_INF else L) == max_length_table(w, j)[k - j]

    @settings(max_examples=60)
    @given(windows(max_span=8))
    def test_reconstructed_path_is_an_argmax(self, w):
        for k in range(w.lo + 1, w.hi + 1):
            weight, paths, _ = brute_force_max_weight(w, w.lo, k)
            if weight is NEG_INF:
                continue
            p = reconstruct_max_path(w, w.lo, k)
            assert p.vertices in {q.vertices for q in paths}
            assert path_weight(w, p.vertices) == p.weight == max_weight(w, w.lo, k)

    def test_smallest_predecessor_on_ties(self):
        w = WeightWindow.from_edges(0, 2, {(0, 1): 1, (1, 2): 1, (0, 2): 2})
        assert reconstruct_max_path(w, 0, 2).vertices == (0, 2)
        _, paths, _ = brute_force_max_weight(w, 0, 2)
        assert len(paths) == 2


class TestInvariants:
    @settings(max_examples=50)
    @given(windows(max_span=25))
    def test_superadditivity(self, w):
        assert superadditive_gap(w) >= -1e-12

    @settings(max_examples=50)
    @given(windows(max_span=25))
    def test_domination(self, w):
        for origin in (w.lo, (w.lo + w.hi) // 2):
            assert np.all(max_weight_table(w, origin) >= max_plus_weight_table(w, origin))

    @settings(max_examples=50)
    @given(windows(max_span=25))
    def test_path_weight_consistency(self, w):
        table = max_weight_table(w, w.lo)
        for k in range(w.lo + 1, w.hi + 1):
            if table[k - w.lo] > -np.inf:
                p = reconstruct_max_path(w, w.lo, k)
                assert to_extended(table[k - w.lo]) == pytest.approx(path_weight(w, p.vertices))
