"""Exact-oracle reconstruction.

Two algorithms, both query-optimal up to constants:

* quick clustering: randomized two-pivot partitioning until no part holds
  more than 15/16 of the elements, recursion, then a linear-cost merge.
* insertion clustering: insert one element at a time, locating its sibling
  with a separator-guided candidate search that halves the candidate set
  per query (at most log2(nodes) queries per insertion).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hierarchy import BinaryHierarchy, HierarchyError, TreeIndex, triplet
from .oracles import PivotDirection, drive_plan, pivot_direction_of, pivot_query

BALANCE_FRACTION = 15 / 16


@dataclass
class Partition:
    """One two-pivot split of an element set."""

    a: list
    b: list
    c: list
    pivots: tuple
    rounds_used: int = 1

    def max_part(self):
        return max(len(self.a), len(self.b), len(self.c))


@dataclass
class QuickStats:
    """Optional instrumentation for quick_clustering."""

    rounds_per_invocation: list = field(default_factory=list)
    queries_per_invocation: list = field(default_factory=list)
    sizes: list = field(default_factory=list)

    @property
    def total_rounds(self):
        return sum(self.rounds_per_invocation)

    @property
    def mean_rounds(self):
        rs = self.rounds_per_invocation
        return sum(rs) / len(rs) if rs else 0.0


def _one_partition_round(els, oracle, rng, pivots=None):
    if pivots is None:
        i, j = rng.choice(len(els), size=2, replace=False)
        x_a, x_b = els[int(i)], els[int(j)]
    else:
        x_a, x_b = pivots
    a, b, c = [x_a], [x_b], []
    pivot_pair = frozenset((x_a, x_b))
    for x in els:
        if x == x_a or x == x_b:
            continue
        ans = oracle.answer(triplet(x_a, x_b, x))
        if ans == pivot_pair:
            c.append(x)
        elif x_a in ans:
            a.append(x)
        else:
            b.append(x)
    return Partition(a, b, c, (x_a, x_b))


def partition_round(els, oracle, rng, pivots=None):
    """One partition round: pivots (x_a, x_b), one query per other element.

    `a` collects elements closer to x_a than to x_b, `b` the reverse, and
    `c` those farther from both pivots than the pivots are from each other.
    """
    els = list(els)
    if len(els) < 3:
        raise HierarchyError("partition_round needs at least 3 elements")
    return _one_partition_round(els, oracle, rng, pivots=pivots)


def merge(t_a, t_b, t_c, oracle):
    """Join t_a and t_b under a new vertex and insert it into t_c.

    Walks t_c from the root, following pivot queries for a representative
    of t_a, and splices the joined tree in as sibling of the stop vertex.
    With empty t_c the joined tree is returned directly.
    """
    joined = BinaryHierarchy.join(t_a, t_b)
    if t_c is None or t_c.n_nodes == 0:
        return joined
    x = t_a.rep(t_a.root)
    v = t_c.root
    while t_c.is_internal(v):
        d = pivot_query(oracle, t_c, v, x)
        if d == PivotDirection.OUTSIDE:
            break
        v = t_c.left(v) if d == PivotDirection.LEFT else t_c.right(v)
    t_c.graft_sibling(v, joined)
    return t_c


def quick_clustering(els, oracle, rng, stats=None):
    """Reconstruct the hierarchy over `els` with an exact oracle.

    Expected O(n log n) ordinal queries; the partition loop repeats until
    every part has at most 15/16 of the elements.
    """
    els = list(els)
    if len(els) != len(set(els)):
        raise HierarchyError("duplicate element labels")
    if len(els) == 0:
        raise HierarchyError("quick_clustering needs at least 1 element")
    if len(els) == 1:
        return BinaryHierarchy.single(els[0])
    if len(els) == 2:
        return BinaryHierarchy.pair_of(els[0], els[1])

    rounds = 0
    while True:
        rounds += 1
        part = _one_partition_round(els, oracle, rng)
        if part.max_part() <= BALANCE_FRACTION * len(els):
            break
    part.rounds_used = rounds

    t_a = quick_clustering(part.a, oracle, rng, stats)
    t_b = quick_clustering(part.b, oracle, rng, stats)
    t_c = quick_clustering(part.c, oracle, rng, stats) if part.c else None
    before_merge = oracle.queries_used()
    out = merge(t_a, t_b, t_c, oracle)
    if stats is not None:
        stats.rounds_per_invocation.append(rounds)
        merge_queries = oracle.queries_used() - before_merge
        stats.queries_per_invocation.append(rounds * (len(els) - 2) + merge_queries)
        stats.sizes.append(len(els))
    return out


class SiblingSearch:
    """Separator-guided search for the insertion point of a new element.

    Emits query blocks of size 1; feeding the answer shrinks the candidate
    set S to the response-consistent part.  The candidate set is kept as a
    tin-sorted array so every shrink is a slice.
    """

    def __init__(self, h, x, state=None):
        if h.has_element(x):
            raise HierarchyError(f"{x!r} is already in the hierarchy")
        self.h = h
        self.x = x
        self.idx = TreeIndex(h)
        if state is None:
            s_nodes = np.arange(h.n_nodes, dtype=np.int64)
        else:
            s_nodes = np.array(sorted(state), dtype=np.int64)
        order = np.argsort(self.idx.tin[s_nodes], kind="stable")
        self._s_tins = self.idx.tin[s_nodes][order]
        self._pivot = None
        self._block = None
        self._result = None
        self._prepare()

    # -- introspection (tests, logging) --

    @property
    def candidates(self):
        node_at_tin = self.idx.order
        return {int(node_at_tin[t]) for t in self._s_tins}

    @property
    def finished(self):
        return self._result is not None

    def result(self):
        if self._result is None:
            raise HierarchyError("search is not finished")
        return self._result

    def _prepare(self):
        if self._s_tins.size == 0:
            raise HierarchyError("candidate set became empty; oracle contradicts the tree")
        if self._s_tins.size == 1:
            self._result = int(self.idx.order[int(self._s_tins[0])])
            self._pivot = None
            self._block = None
            return
        v = self.idx.separator(self._s_tins)
        rep_l = self.h.rep(self.h.left(v))
        rep_r = self.h.rep(self.h.right(v))
        self._pivot = (v, rep_l, rep_r)
        self._block = (triplet(rep_l, rep_r, self.x), 1)

    def pending_block(self):
        return self._block

    def feed_counts(self, counts):
        if self._block is None:
            raise HierarchyError("no pending query")
        if len(counts) != 1:
            raise HierarchyError("sibling search blocks take exactly one answer")
        ans = next(iter(counts))
        v, rep_l, rep_r = self._pivot
        d = pivot_direction_of(ans, rep_l, rep_r, self.x)
        tin, tout = self.idx.tin, self.idx.tout
        s = self._s_tins
        if d == PivotDirection.LEFT:
            u = self.h.left(v)
            lo, hi = np.searchsorted(s, tin[u]), np.searchsorted(s, tout[u])
            self._s_tins = s[lo:hi]
        elif d == PivotDirection.RIGHT:
            u = self.h.right(v)
            lo, hi = np.searchsorted(s, tin[u]), np.searchsorted(s, tout[u])
            self._s_tins = s[lo:hi]
        else:
            # the pivot itself stays a candidate: only its strict descendants go
            lo, hi = np.searchsorted(s, tin[v] + 1), np.searchsorted(s, tout[v])
            self._s_tins = np.concatenate((s[:lo], s[hi:]))
        self._prepare()

    def to_state(self):
        return {"s": sorted(int(self.idx.order[int(t)]) for t in self._s_tins)}

    @classmethod
    def from_state(cls, h, x, state):
        return cls(h, x, state=state["s"])


def separator(h, candidates):
    """Internal node minimizing the largest candidate part; ties to lowest id."""
    cand = sorted(set(candidates))
    if len(cand) < 2:
        raise HierarchyError("separator needs at least 2 candidates")
    idx = TreeIndex(h)
    s_tins = np.sort(idx.tin[np.array(cand, dtype=np.int64)])
    return idx.separator(s_tins)


def find_sibling(h, x, oracle):
    """Locate the node whose new parent will also take the leaf x."""
    return drive_plan(SiblingSearch(h, x), oracle)


def insertion_clustering(els, oracle, per_insertion=None):
    """Insert elements one at a time; at most n*log2(n) queries total."""
    els = list(els)
    if len(els) != len(set(els)):
        raise HierarchyError("duplicate element labels")
    if len(els) == 0:
        raise HierarchyError("insertion_clustering needs at least 1 element")
    if len(els) == 1:
        return BinaryHierarchy.single(els[0])
    h = BinaryHierarchy.pair_of(els[0], els[1])
    for x in els[2:]:
        before = oracle.queries_used()
        v = find_sibling(h, x, oracle)
        if per_insertion is not None:
            per_insertion.append(oracle.queries_used() - before)
        h.insert_leaf_sibling(v, x)
    return h
