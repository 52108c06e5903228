import json
import math

import numpy as np
import pytest

from hierq.harness import noisy_vertex_oracle, random_diameter_tree
from hierq.hierarchy import (
    BinaryHierarchy,
    HierarchyError,
    TreeIndex,
    contracted_tree,
    induced_tree,
    random_hierarchy,
    true_sibling_node,
    triplet,
)
from hierq.noiseless import find_sibling
from hierq.noisy import (
    MWConfig,
    MWReduce,
    RobustConfig,
    RobustSiblingSearch,
    VertexProbe,
    _MWCore,
    _WalkCore,
    choose_kp,
    mw_reduce,
    noisy_insertion_clustering,
    repetitions_for,
    robust_find_sibling,
    simulate_vertex_query,
    tree_walk,
    true_vertex_response,
    walk_iterations,
    walk_trace_csv,
)
from hierq.noisy import CONSTANTS
from hierq.oracles import NoiseModel, UniformWrong, FixedWrong, drive_plan, exact_oracle, noisy_oracle


def rng(seed=0):
    return np.random.default_rng(seed)


def heldout(n, seed, shape=random_hierarchy):
    r = rng(seed)
    truth = shape(n + 1, r) if shape is random_hierarchy else shape(n + 1)
    els = truth.elements()
    x = els[-1]
    h = induced_tree(truth, els[:-1])
    return truth, h, x, true_sibling_node(h, truth, x), r


class TestChooseKp:
    def test_frozen_values(self):
        assert choose_kp(0.9) == 11
        assert choose_kp(0.8) == 13

    def test_smallest_odd_satisfying_bound(self):
        for p in (0.55, 0.6, 0.7, 0.75, 0.8, 0.9, 0.95):
            k = choose_kp(p)
            assert k % 2 == 1
            assert 1 - math.exp(-k * (2 * p - 1) ** 2 / 2) >= math.sqrt(p)
            if k > 2:
                assert 1 - math.exp(-(k - 2) * (2 * p - 1) ** 2 / 2) < math.sqrt(p)

    def test_monotone_non_increasing(self):
        grid = [0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]
        ks = [choose_kp(p) for p in grid]
        assert all(a >= b for a, b in zip(ks, ks[1:]))

    def test_rejects_out_of_range(self):
        for p in (0.5, 0.3, 1.0, 1.5):
            with pytest.raises(HierarchyError):
                choose_kp(p)

    def test_p_one_shortcut(self):
        assert repetitions_for(1.0) == 1


class TestSimulateVertexQuery:
    def test_exact_oracle_matches_direct_vertex_oracle(self):
        for seed in range(10):
            truth, h, x, target, _ = heldout(6, seed)
            o = exact_oracle(truth)
            idx = TreeIndex(h)
            for v in h.nodes():
                got = simulate_vertex_query(h, v, x, o, 1)
                assert got == true_vertex_response(h, v, target, idx)

    def test_query_costs(self):
        truth, h, x, target, _ = heldout(8, 3)
        o = exact_oracle(truth)
        k_p = 13
        for v in h.nodes():
            before = o.queries_used()
            simulate_vertex_query(h, v, x, o, k_p)
            cost = o.queries_used() - before
            if v == h.root or h.is_leaf(v):
                assert cost == 1
            else:
                assert cost in (k_p, 2 * k_p)

    def test_noisy_correctness_rate(self):
        # target-at-v case needs both majority votes: the weakest spot
        truth, h, x, target, _ = heldout(16, 11)
        if h.is_leaf(target) or target == h.root:
            truth, h, x, target, _ = heldout(16, 13)
        assert h.is_internal(target) and target != h.root
        o = noisy_oracle(truth, NoiseModel(0.8, UniformWrong()), rng(99))
        k_p = choose_kp(0.8)
        trials = 20_000
        hits = sum(simulate_vertex_query(h, target, x, o, k_p) == target for _ in range(trials))
        assert hits / trials >= 0.8

    def test_inconclusive_votes_fall_back_to_parent(self):
        truth, h, x, target, _ = heldout(8, 5)
        v = next(u for u in h.internal_nodes() if u != h.root)
        probe = VertexProbe(h, v, x, 3)
        t, k = probe.pending_block()
        assert k == 3
        a, b, c = sorted(t)
        probe.feed_counts({frozenset((a, b)): 1, frozenset((a, c)): 1, frozenset((b, c)): 1})
        assert probe.finished and probe.result() == h.parent(v)


class TestMWReduce:
    def test_p1_concentrates_all_weight_on_target(self):
        truth, h, x, target, _ = heldout(32, 7)
        o = exact_oracle(truth)
        cfg = MWConfig(1.0, 0.05)
        core = _MWCore(h, cfg)
        while not core.finished:
            v = core.next_vertex()
            core.update(v, simulate_vertex_query(h, v, x, o, 1))
        w = core.w
        assert w[target] > 0
        assert all(w[i] == 0 for i in range(len(w)) if i != target)
        assert target in core.candidates()

    def test_consistency_masks_match_component_membership(self):
        truth, h, x, target, _ = heldout(12, 19)
        cfg = MWConfig(0.8, 0.1)
        core = _MWCore(h, cfg)
        idx = TreeIndex(h)
        for v in h.nodes():
            responses = [v]
            if v != h.root:
                responses.append(h.parent(v))
            responses.extend(h.children(v))
            for r in responses:
                mask = core.consistent_mask(v, r)
                for u in h.nodes():
                    if r == v:
                        want = u == v
                    elif r == h.parent(v):
                        want = not idx.in_subtree(u, v)
                    else:
                        want = idx.in_subtree(u, r)
                    assert bool(mask[u]) == want

    def test_returned_size_is_exactly_m(self):
        truth, h, x, target, r = heldout(64, 23)
        o = noisy_oracle(truth, NoiseModel(0.8, UniformWrong()), r)
        cfg = MWConfig(0.8, 0.05)
        k_p = choose_kp(0.8)
        cand = mw_reduce(h, lambda v: simulate_vertex_query(h, v, x, o, k_p), cfg)
        assert len(cand) == min(cfg.keep(h.n_nodes), h.n_nodes)

    def test_weights_stay_positive_below_one(self):
        truth, h, x, target, r = heldout(16, 29)
        o = noisy_oracle(truth, NoiseModel(0.8, UniformWrong()), r)
        cfg = MWConfig(0.8, 0.1)
        core = _MWCore(h, cfg)
        k_p = choose_kp(0.8)
        while not core.finished:
            v = core.next_vertex()
            core.update(v, simulate_vertex_query(h, v, x, o, k_p))
            assert np.all(core.w > 0)
            assert np.isfinite(core.w.sum())

    def test_containment_rate(self):
        trials, hits = 60, 0
        cfg = MWConfig(0.8, 0.05)
        k_p = choose_kp(0.8)
        for seed in range(trials):
            truth, h, x, target, r = heldout(64, 1000 + seed)
            o = noisy_oracle(truth, NoiseModel(0.8, UniformWrong()), r)
            cand = mw_reduce(h, lambda v: simulate_vertex_query(h, v, x, o, k_p), cfg)
            hits += target in cand
        sigma = math.sqrt(0.95 * 0.05 / trials)
        assert hits / trials >= 0.95 - 3 * sigma


class TestTreeWalk:
    def test_iteration_counts_frozen(self):
        assert walk_iterations(10, 0.75, 0.01) == 148
        assert walk_iterations(30, 0.75, 0.01) == 148
        assert walk_iterations(60, 0.75, 0.01) == 244
        assert walk_iterations(100, 0.75, 0.01) == 404

    def test_truthful_responses_reach_target_and_potential_decreases(self):
        for seed in range(8):
            r = rng(seed)
            tree = random_diameter_tree(12, r)
            target = tree.nodes[int(r.integers(0, len(tree.nodes)))]
            vq = noisy_vertex_oracle(tree, target, 1.0, r)
            trace = []
            got = tree_walk(tree, vq, 0.75, 0.01, instrument_target=target, trace=trace)
            assert got == target
            phis = [tree.distance(target, tree.nodes[0])] + [s.potential for s in trace]
            assert all(b == a - 1 for a, b in zip(phis, phis[1:]))

    def test_potential_bookkeeping_under_noise(self):
        r = rng(1234)
        tree = random_diameter_tree(20, r)
        target = tree.nodes[7]
        vq = noisy_vertex_oracle(tree, target, 0.75, r)
        trace = []
        got = tree_walk(tree, vq, 0.75, 0.05, instrument_target=target, trace=trace)
        phis = [tree.distance(target, tree.nodes[0])] + [s.potential for s in trace]
        for (prev, cur), step in zip(zip(phis, phis[1:]), trace):
            if step.correct:
                assert cur == prev - 1
            else:
                assert cur <= prev + 1
        if phis[-1] < 0:
            assert got == target

    def test_at_most_one_positive_counter(self):
        r = rng(5)
        tree = random_diameter_tree(15, r)
        target = tree.nodes[3]
        vq = noisy_vertex_oracle(tree, target, 0.7, r)
        core = _WalkCore(tree, 0.7, 0.05)
        while not core.finished:
            core.step(vq(core.q))
            assert sum(1 for c in core.counters.values() if c > 0) <= 1
            assert all(c >= 0 for c in core.counters.values())

    def test_success_rate_sampled(self):
        trials, hits = 300, 0
        r = rng(31415)
        for _ in range(trials):
            tree = random_diameter_tree(30, r)
            target = tree.nodes[int(r.integers(0, len(tree.nodes)))]
            vq = noisy_vertex_oracle(tree, target, 0.75, r)
            hits += tree_walk(tree, vq, 0.75, 0.01) == target
        sigma = math.sqrt(0.99 * 0.01 / trials)
        assert hits / trials >= 0.99 - 3 * sigma

    def test_trace_csv(self):
        r = rng(2)
        tree = random_diameter_tree(5, r)
        target = tree.nodes[2]
        trace = []
        tree_walk(tree, noisy_vertex_oracle(tree, target, 1.0, r), 0.75, 0.5, instrument_target=target, trace=trace)
        text = walk_trace_csv(trace)
        assert text.startswith("iteration,vertex,response,counter,potential,correct")
        assert len(text.strip().splitlines()) == len(trace) + 1


class TestRobustFindSibling:
    def test_p1_matches_noiseless_search(self):
        for seed in range(12):
            n = 8 * (seed % 4 + 1)
            truth, h, x, target, _ = heldout(n, 100 + seed)
            o1 = exact_oracle(truth)
            noiseless_v = find_sibling(h, x, o1)
            o2 = exact_oracle(truth)
            robust_v = robust_find_sibling(h, x, o2, 1.0, 0.1)
            assert robust_v == noiseless_v == target

    def test_noisy_success_and_query_cap(self):
        kappa = CONSTANTS["kappa_sibling"]
        trials, hits = 40, 0
        for seed in range(trials):
            n = 64
            truth, h, x, target, r = heldout(n, 500 + seed)
            o = noisy_oracle(truth, NoiseModel(0.8, UniformWrong()), r)
            stats = {}
            got = robust_find_sibling(h, x, o, 0.8, 0.05 / n, stats=stats)
            hits += got == target
            budget = math.log2(h.n_nodes) + math.log(n / 0.05)
            assert o.queries_used() <= kappa * budget
            assert stats["ordinal_mw"] + stats["ordinal_walk"] == o.queries_used()
        sigma = math.sqrt(0.95 * 0.05 / trials)
        assert hits / trials >= 0.95 - 3 * sigma

    def test_state_round_trip_reproduces_run(self):
        truth, h, x, target, r = heldout(24, 77)
        o = noisy_oracle(truth, NoiseModel(0.8, FixedWrong()), r)
        plan = RobustSiblingSearch(h, x, 0.8, 0.01)
        fed = []
        while not plan.finished:
            t, k = plan.pending_block()
            counts = o.answer_repeated(t, k) if k > 1 else {o.answer(t): 1}
            fed.append((t, k, counts))
            plan.feed_counts(counts)
        direct = plan.result()

        replay = RobustSiblingSearch(h, x, 0.8, 0.01)
        for t, k, counts in fed:
            assert replay.pending_block() == (t, k)
            state = json.loads(json.dumps(replay.to_state()))
            replay = RobustSiblingSearch(h, x, 0.8, 0.01, state=state)
            replay.feed_counts(counts)
        assert replay.result() == direct


class TestNoisyInsertionClustering:
    def test_p1_exact_recovery(self):
        for n in (8, 32, 128):
            r = rng(n)
            truth = random_hierarchy(n, r)
            o = exact_oracle(truth)
            out = noisy_insertion_clustering(truth.elements(), o, 1.0, 0.1)
            assert out.equivalent(truth)

    def test_noisy_recovery_sampled(self):
        hits = 0
        trials = 12
        for seed in range(trials):
            r = rng(9000 + seed)
            truth = random_hierarchy(24, r)
            o = noisy_oracle(truth, NoiseModel(0.8, UniformWrong()), r)
            out = noisy_insertion_clustering(truth.elements(), o, 0.8, 0.1)
            hits += out.equivalent(truth)
        assert hits >= trials - 2

    def test_total_query_cap(self):
        kappa = CONSTANTS["kappa_insertion"]
        n = 32
        for seed in range(5):
            r = rng(40 + seed)
            truth = random_hierarchy(n, r)
            o = noisy_oracle(truth, NoiseModel(0.8, UniformWrong()), r)
            noisy_insertion_clustering(truth.elements(), o, 0.8, 0.1)
            assert o.queries_used() <= kappa * n * (math.log2(n) + math.log(n / 0.1))


class TestContractedWalkPlumbing:
    def test_projection_of_correct_responses_never_falls_back(self):
        for seed in range(10):
            truth, h, x, target, r = heldout(40, 600 + seed)
            cfg = MWConfig(0.8, 0.1)
            o = exact_oracle(truth)
            cand = mw_reduce(h, lambda v: simulate_vertex_query(h, v, x, o, 1), MWConfig(1.0, 0.1))
            if target not in cand:
                cand = sorted(set(cand) | {target})
            ct = contracted_tree(h, cand)
            idx = TreeIndex(h)
            for v in ct.nodes:
                want = true_vertex_response(h, v, target, idx)
                mapped = ct.project(v, want)
                assert mapped is not None
                if v != target:
                    dv = ct.distances_from(target)
                    assert dv[mapped] == dv[v] - 1
