import math

import numpy as np
import pytest

from hierq.hierarchy import BinaryHierarchy, HierarchyError, pair, random_hierarchy, triplet
from hierq.oracles import (
    CallbackAdversary,
    FixedWrong,
    NoiseModel,
    PivotDirection,
    QueryLog,
    UniformWrong,
    counting_wrapper,
    derive_rng,
    exact_oracle,
    noisy_oracle,
    pivot_query,
)

CAT4 = ((("a", "b"), "c"), "d")


class TestExactOracle:
    def test_deterministic_answer(self):
        h = BinaryHierarchy.from_nested(CAT4)
        o = exact_oracle(h)
        for _ in range(5):
            assert o.answer(triplet("a", "b", "c")) == pair("a", "b")

    def test_counts(self):
        o = exact_oracle(BinaryHierarchy.from_nested(CAT4))
        for _ in range(5):
            o.answer(triplet("a", "b", "c"))
        assert o.queries_used() == 5

    def test_stateless_across_order(self):
        h = random_hierarchy(9, np.random.default_rng(1))
        els = h.elements()
        ts = [triplet(*els[i : i + 3]) for i in range(6)]
        o1, o2 = exact_oracle(h), exact_oracle(h)
        a1 = [o1.answer(t) for t in ts]
        a2 = [o2.answer(t) for t in reversed(ts)]
        assert a1 == list(reversed(a2))

    def test_matches_direct_triplet_answer(self):
        r = np.random.default_rng(7)
        import itertools

        for _ in range(15):
            h = random_hierarchy(int(r.integers(3, 20)), r)
            o = exact_oracle(h)
            for t in itertools.islice(itertools.combinations(h.elements(), 3), 40):
                assert o.answer(frozenset(t)) == h.triplet_answer(t)


class TestNoisyOracle:
    def test_p_one_equals_exact(self):
        h = random_hierarchy(10, np.random.default_rng(2))
        els = h.elements()
        o_exact = exact_oracle(h)
        o_noisy = noisy_oracle(h, NoiseModel(1.0), np.random.default_rng(3))
        import itertools

        for t in itertools.combinations(els, 3):
            assert o_noisy.answer(frozenset(t)) == o_exact.answer(frozenset(t))

    def test_empirical_rate(self):
        h = BinaryHierarchy.from_nested(CAT4)
        o = noisy_oracle(h, NoiseModel(0.8, UniformWrong()), np.random.default_rng(42))
        t = triplet("a", "b", "c")
        truth = pair("a", "b")
        n = 100_000
        hits = sum(o.answer(t) == truth for _ in range(n))
        assert abs(hits / n - 0.8) <= 0.01
        assert o.queries_used() == n

    def test_fixed_wrong_always_same_pair(self):
        h = BinaryHierarchy.from_nested(CAT4)
        rule = lambda t, true_pair, wrongs: pair("b", "c")
        o = noisy_oracle(h, NoiseModel(0.8, FixedWrong(rule)), np.random.default_rng(0))
        t = triplet("a", "b", "c")
        wrong_seen = {o.answer(t) for _ in range(3000)} - {pair("a", "b")}
        assert wrong_seen == {pair("b", "c")}

    def test_answer_repeated_matches_distribution(self):
        h = BinaryHierarchy.from_nested(CAT4)
        o = noisy_oracle(h, NoiseModel(0.8, UniformWrong()), np.random.default_rng(9))
        t = triplet("a", "b", "c")
        total = {pair("a", "b"): 0, pair("a", "c"): 0, pair("b", "c"): 0}
        reps, k = 4000, 13
        for _ in range(reps):
            for q, c in o.answer_repeated(t, k).items():
                total[q] += c
        n = reps * k
        assert o.queries_used() == n
        sd = math.sqrt(0.8 * 0.2 / n)
        assert abs(total[pair("a", "b")] / n - 0.8) <= 4 * sd
        assert abs(total[pair("a", "c")] / n - 0.1) <= 4 * math.sqrt(0.1 * 0.9 / n)

    def test_callback_adversary_loops(self):
        h = BinaryHierarchy.from_nested(CAT4)
        calls = []

        def cb(t, true_pair, wrongs):
            calls.append(1)
            return wrongs[1]

        o = noisy_oracle(h, NoiseModel(0.6, CallbackAdversary(cb)), np.random.default_rng(1))
        counts = o.answer_repeated(triplet("a", "b", "c"), 51)
        assert sum(counts.values()) == 51 and len(calls) > 0

    def test_p_out_of_range(self):
        with pytest.raises(HierarchyError):
            NoiseModel(0.5)
        with pytest.raises(HierarchyError):
            NoiseModel(1.2)

    def test_rerandomized_not_sticky(self):
        h = BinaryHierarchy.from_nested(CAT4)
        o = noisy_oracle(h, NoiseModel(0.6, UniformWrong()), np.random.default_rng(5))
        t = triplet("a", "b", "c")
        assert len({o.answer(t) for _ in range(200)}) > 1


class TestPivotQuery:
    def test_left_when_sibling_inside_left_subtree(self):
        truth = BinaryHierarchy.from_nested(((("a", "x"), "b"), ("c", "d")))
        h = BinaryHierarchy.from_nested((("a", "b"), ("c", "d")))
        o = exact_oracle(truth)
        v = h.parent(h.leaf_index("a"))  # pivot above {a,b}
        assert pivot_query(o, h, v, "x") == PivotDirection.LEFT

    def test_outside_when_beyond_pivot_subtree(self):
        truth = BinaryHierarchy.from_nested(((("a", "b"), "c"), ("d", "x")))
        h = BinaryHierarchy.from_nested(((("a", "b"), "c"), "d"))
        o = exact_oracle(truth)
        v = h.parent(h.leaf_index("a"))
        assert pivot_query(o, h, v, "x") == PivotDirection.OUTSIDE

    def test_noisy_p1_equals_exact(self):
        truth = BinaryHierarchy.from_nested(((("a", "x"), "b"), ("c", "d")))
        h = BinaryHierarchy.from_nested((("a", "b"), ("c", "d")))
        for v in h.internal_nodes():
            d_exact = pivot_query(exact_oracle(truth), h, v, "x")
            d_noisy = pivot_query(
                noisy_oracle(truth, NoiseModel(1.0), np.random.default_rng(0)), h, v, "x"
            )
            assert d_exact == d_noisy

    def test_representative_choice_is_immaterial(self):
        r = np.random.default_rng(33)
        truth = random_hierarchy(10, r)
        els = truth.elements()
        from hierq.hierarchy import induced_tree

        h = induced_tree(truth, els[:-1])
        x = els[-1]
        o = exact_oracle(truth)
        idx_leaves = lambda v: sorted(h.node_cluster(v))
        for v in h.internal_nodes():
            dirs = set()
            for rl in idx_leaves(h.left(v)):
                for rr in idx_leaves(h.right(v)):
                    dirs.add(pivot_query(o, h, v, x, reps=(rl, rr)))
            assert len(dirs) == 1

    def test_leaf_pivot_rejected(self):
        h = BinaryHierarchy.from_nested(CAT4)
        with pytest.raises(HierarchyError):
            pivot_query(exact_oracle(h), h, h.leaf_index("a"), "x")


class TestCountingWrapper:
    def test_attribution(self):
        h = BinaryHierarchy.from_nested(CAT4)
        log = QueryLog()
        o = counting_wrapper(exact_oracle(h), log, "phase1")
        for _ in range(3):
            o.answer(triplet("a", "b", "c"))
        assert log.phase("phase1") == 3 and log.total == 3 and o.queries_used() == 3

    def test_phases_sum(self):
        h = BinaryHierarchy.from_nested(CAT4)
        base = exact_oracle(h)
        log = QueryLog()
        o1 = counting_wrapper(base, log, "a")
        o2 = counting_wrapper(base, log, "b")
        o1.answer(triplet("a", "b", "c"))
        o2.answer(triplet("a", "b", "d"))
        o2.answer(triplet("a", "c", "d"))
        assert log.phase("a") == 1 and log.phase("b") == 2
        assert log.total == 3 == base.queries_used()

    def test_nested_wrappers_delegate(self):
        h = BinaryHierarchy.from_nested(CAT4)
        base = exact_oracle(h)
        log = QueryLog()
        inner = counting_wrapper(base, log, "inner")
        outer = counting_wrapper(inner, log, "outer")
        outer.answer_repeated(triplet("a", "b", "c"), 4)
        assert base.queries_used() == 4
        assert log.phase("inner") == 4 and log.phase("outer") == 4
        assert log.total == sum(log.counts.values())

    def test_zero_calls(self):
        log = QueryLog()
        counting_wrapper(exact_oracle(BinaryHierarchy.from_nested(CAT4)), log, "idle")
        assert log.total == 0 and log.phase("idle") == 0

    def test_csv(self):
        log = QueryLog()
        log.add("walk", 7)
        log.add("mw", 5)
        assert log.to_csv() == "phase,queries\nmw,5\nwalk,7\n"


def test_derive_rng_streams_are_independent_and_stable():
    a1 = derive_rng(99, 4, 0).integers(0, 1 << 30, size=5)
    a2 = derive_rng(99, 4, 0).integers(0, 1 << 30, size=5)
    b = derive_rng(99, 4, 1).integers(0, 1 << 30, size=5)
    assert list(a1) == list(a2)
    assert list(a1) != list(b)
