"""Noise-tolerant sibling search and insertion clustering.

Pipeline per insertion, with error budget delta split in half:

1. Vertex queries are simulated from ordinal queries: k_p repetitions per
   pivot and strict-majority voting make each simulated response correct
   with probability at least p.
2. A multiplicative-weights pass over all nodes shrinks the candidate set
   for the sibling down to O(log n + log(1/delta)) nodes.
3. The candidates' path-contracted Steiner tree (diameter O(|S|)) is then
   searched by a counter walk that tolerates adversarially wrong steps.

All stages are expressed as resumable "query block" plans so the same code
serves both in-process oracles and suspended interactive sessions.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .hierarchy import (
    BinaryHierarchy,
    ContractedTree,
    HierarchyError,
    TreeIndex,
    contracted_tree,
    triplet,
)
from .oracles import PivotDirection, drive_plan, pivot_direction_of


def _load_constants():
    override = os.environ.get("HIERQ_CONSTANTS")
    if override:
        with open(override, "r", encoding="utf-8") as fh:
            return json.load(fh)
    with resources.files(__package__).joinpath("calibrated_constants.json").open("r") as fh:
        return json.load(fh)


try:
    CONSTANTS = _load_constants()
except FileNotFoundError:  # pre-calibration fallback
    CONSTANTS = {"c_rounds": 8.0, "c_keep": 4.0, "kappa_sibling": 0.0, "kappa_insertion": 0.0}


def choose_kp(p):
    """Smallest odd k with 1 - exp(-k(2p-1)^2 / 2) >= sqrt(p)."""
    if not (0.5 < p < 1.0):
        raise HierarchyError(f"choose_kp needs p in (0.5, 1), got {p}")
    k = 1
    while 1.0 - math.exp(-k * (2 * p - 1) ** 2 / 2) < math.sqrt(p):
        k += 2
    return k


def repetitions_for(p):
    """k_p for the simulation; p = 1 needs no majority vote."""
    return 1 if p == 1.0 else choose_kp(p)


def mw_lambda(p):
    """Diagnostic rate constant recorded alongside calibrations (base-2 logs)."""
    return (1 + p * math.log2(p) + (1 - p) * math.log2(1 - p)) / (2 * math.log2(p / (1 - p)))


@dataclass
class MWConfig:
    """Multiplicative-weights parameters.

    Rounds and kept-set size both scale with log2(nodes) + ln(1/delta);
    c_rounds and c_keep come from the calibration experiment.
    """

    p: float
    delta: float
    c_rounds: float = field(default_factory=lambda: CONSTANTS["c_rounds"])
    c_keep: float = field(default_factory=lambda: CONSTANTS["c_keep"])

    def __post_init__(self):
        if not (0.5 < self.p <= 1.0):
            raise HierarchyError(f"p must be in (0.5, 1], got {self.p}")
        if not (0.0 < self.delta < 1.0):
            raise HierarchyError(f"delta must be in (0, 1), got {self.delta}")
        if self.c_rounds <= 0 or self.c_keep <= 0:
            raise HierarchyError("c_rounds and c_keep must be positive")

    @property
    def lambda_diag(self):
        return mw_lambda(self.p) if self.p < 1.0 else float("inf")

    def budget(self, n):
        return math.log2(n) + math.log(1.0 / self.delta)

    def rounds(self, n):
        return math.ceil(self.c_rounds * self.budget(n))

    def keep(self, n):
        return math.ceil(self.c_keep * self.budget(n))


@dataclass
class RobustConfig:
    """Everything the noisy sibling search needs besides the tree."""

    p: float
    delta: float
    k_p: int = None
    mw: MWConfig = None

    def __post_init__(self):
        if self.k_p is None:
            self.k_p = repetitions_for(self.p)
        if self.k_p % 2 == 0:
            raise HierarchyError("k_p must be odd")
        if self.mw is None:
            self.mw = MWConfig(self.p, self.delta / 2)


# -- vertex query simulation ----------------------------------------------


class VertexProbe:
    """Simulated vertex query at node v, as a plan emitting triplet blocks.

    Result is a node id: v itself proposes v as the target, any other value
    is the h-neighbor of v to walk toward.  Root and leaf probes cost one
    ordinal query; internal probes cost k_p, plus k_p more at the parent
    when the first majority points outside v's subtree.  Inconclusive
    majorities fall back deterministically to the parent direction.
    """

    def __init__(self, h, v, x, k_p, state=None):
        self.h = h
        self.v = v
        self.x = x
        self.k_p = k_p
        self._result = None
        self._stage = state["stage"] if state else 1
        self._prepare()

    def _pivot_block(self, pivot, k):
        rep_l = self.h.rep(self.h.left(pivot))
        rep_r = self.h.rep(self.h.right(pivot))
        return (pivot, rep_l, rep_r, triplet(rep_l, rep_r, self.x), k)

    def _prepare(self):
        h, v = self.h, self.v
        if h.n_nodes == 1:
            self._result = v
            self._block = None
            return
        if v == h.root:
            self._block = self._pivot_block(v, 1)
        elif h.is_leaf(v):
            self._block = self._pivot_block(h.parent(v), 1)
        else:
            pivot = v if self._stage == 1 else h.parent(v)
            self._block = self._pivot_block(pivot, self.k_p)

    @property
    def finished(self):
        return self._result is not None

    def result(self):
        if self._result is None:
            raise HierarchyError("probe is not finished")
        return self._result

    def pending_block(self):
        return None if self._block is None else (self._block[3], self._block[4])

    def _majority_direction(self, counts, rep_l, rep_r, k):
        votes = {PivotDirection.LEFT: 0, PivotDirection.RIGHT: 0, PivotDirection.OUTSIDE: 0}
        total = 0
        for ans, c in counts.items():
            votes[pivot_direction_of(ans, rep_l, rep_r, self.x)] += c
            total += c
        if total != k:
            raise HierarchyError(f"expected {k} answers, got {total}")
        for d, c in votes.items():
            if 2 * c > k:
                return d
        return None

    def feed_counts(self, counts):
        if self._block is None:
            raise HierarchyError("no pending query")
        pivot, rep_l, rep_r, _t, k = self._block
        d = self._majority_direction(counts, rep_l, rep_r, k)
        h, v = self.h, self.v

        if v == h.root:
            if d == PivotDirection.LEFT:
                self._result = h.left(v)
            elif d == PivotDirection.RIGHT:
                self._result = h.right(v)
            else:
                self._result = v  # outside both subtrees: the root is the sibling
        elif h.is_leaf(v):
            toward_v = PivotDirection.LEFT if h.left(pivot) == v else PivotDirection.RIGHT
            self._result = v if d == toward_v else h.parent(v)
        elif self._stage == 1:
            if d == PivotDirection.LEFT:
                self._result = h.left(v)
            elif d == PivotDirection.RIGHT:
                self._result = h.right(v)
            elif d == PivotDirection.OUTSIDE:
                self._stage = 2
                self._prepare()
                return
            else:
                self._result = h.parent(v)  # inconclusive
        else:
            toward_v = PivotDirection.LEFT if h.left(pivot) == v else PivotDirection.RIGHT
            if d == toward_v:
                self._result = v
            else:
                # other subtree, outside, or inconclusive: all walk upward
                self._result = h.parent(v)
        self._block = None

    def to_state(self):
        return {"vertex": int(self.v), "stage": int(self._stage)}

    @classmethod
    def from_state(cls, h, x, k_p, state):
        return cls(h, int(state["vertex"]), x, k_p, state=state)


def simulate_vertex_query(h, v, x, oracle, k_p):
    """Answer the vertex query at v from (possibly noisy) ordinal queries."""
    return drive_plan(VertexProbe(h, v, x, k_p), oracle)


def true_vertex_response(h, v, target, idx=None):
    """What a truthful vertex oracle would say at v for a known target node."""
    if v == target:
        return v
    idx = idx or TreeIndex(h)
    if idx.in_subtree(target, v):
        left = h.left(v)
        return left if idx.in_subtree(target, left) else h.right(v)
    return h.parent(v)


# -- multiplicative weights candidate reduction ----------------------------


class _MWCore:
    """Weight bookkeeping for the candidate-reduction rounds."""

    def __init__(self, h, cfg, state=None):
        self.h = h
        self.cfg = cfg
        self.idx = TreeIndex(h)
        n = h.n_nodes
        self.total_rounds = cfg.rounds(n)
        self.keep = min(cfg.keep(n), n)
        if state is None:
            self.w = np.ones(n, dtype=np.float64) / n
            self.round = 0
        else:
            self.w = np.array(state["weights"], dtype=np.float64)
            self.round = int(state["round"])

    @property
    def finished(self):
        return self.round >= self.total_rounds

    def next_vertex(self):
        return self.idx.weighted_separator(self.w)

    def consistent_mask(self, v, response):
        """Nodes still compatible with the response to the vertex query at v."""
        if response == v:
            mask = np.zeros(self.h.n_nodes, dtype=bool)
            mask[v] = True
            return mask
        if response == self.h.parent(v):
            return ~self.idx.subtree_mask(v)
        if response in (self.h.left(v), self.h.right(v)):
            return self.idx.subtree_mask(response)
        raise HierarchyError("vertex response must be the node or one of its neighbors")

    def update(self, v, response):
        p = self.cfg.p
        mask = self.consistent_mask(v, response)
        self.w[mask] *= p
        self.w[~mask] *= 1.0 - p
        total = float(self.w.sum())
        if total > 0:
            self.w /= total
        self.round += 1

    def candidates(self):
        order = np.lexsort((np.arange(self.w.size), -self.w))
        return sorted(int(i) for i in order[: self.keep])

    def to_state(self):
        return {"round": self.round, "weights": [float(x) for x in self.w]}


def mw_reduce(h, vq, cfg):
    """Run the weight-update rounds; return the kept high-weight node ids.

    `vq(node) -> node` must answer vertex queries correctly with probability
    at least cfg.p, independently across calls.
    """
    core = _MWCore(h, cfg)
    while not core.finished:
        v = core.next_vertex()
        core.update(v, vq(v))
    return core.candidates()


class MWReduce:
    """mw_reduce as a resumable plan over simulated vertex queries."""

    def __init__(self, h, x, cfg, k_p, state=None):
        self.h = h
        self.x = x
        self.k_p = k_p
        self.core = _MWCore(h, cfg, state=state)
        if state and state.get("probe") is not None:
            self.probe = VertexProbe.from_state(h, x, k_p, state["probe"])
        else:
            self.probe = None if self.core.finished else VertexProbe(h, self.core.next_vertex(), x, k_p)

    @property
    def finished(self):
        return self.core.finished

    def result(self):
        return self.core.candidates()

    def pending_block(self):
        return None if self.probe is None else self.probe.pending_block()

    def feed_counts(self, counts):
        self.probe.feed_counts(counts)
        if self.probe.finished:
            self.core.update(self.probe.v, self.probe.result())
            self.probe = None if self.core.finished else VertexProbe(self.h, self.core.next_vertex(), self.x, self.k_p)

    def to_state(self):
        st = self.core.to_state()
        st["probe"] = self.probe.to_state() if self.probe else None
        return st


# -- counter walk -----------------------------------------------------------


def walk_iterations(diameter, p, delta):
    """Exact iteration count: ceil(max(2(D+1)/(2p-1), 8 ln(1/delta)/(2p-1)^2))."""
    s = 2 * p - 1
    return math.ceil(max(2 * (diameter + 1) / s, 8 * math.log(1.0 / delta) / (s * s)))


@dataclass
class WalkStep:
    """One instrumented walk iteration (counter and potential of the target)."""

    iteration: int
    vertex: int
    response: int
    counter: int
    potential: float
    correct: bool


class _WalkCore:
    """The counter walk itself; responses arrive from outside."""

    def __init__(self, tree, p, delta, state=None):
        self.tree = tree
        self.iterations = walk_iterations(tree.diameter(), p, delta)
        if state is None:
            self.q = tree.nodes[0]
            self.counters = {}
            self.i = 0
        else:
            self.q = int(state["q"])
            self.counters = {int(k): int(v) for k, v in state["counters"].items()}
            self.i = int(state["i"])

    @property
    def finished(self):
        return self.i >= self.iterations or len(self.tree.nodes) == 1

    def step(self, response):
        q = self.q
        if response == q:
            self.counters[q] = self.counters.get(q, 0) + 1
        elif self.counters.get(q, 0) > 0:
            self.counters[q] -= 1
        else:
            if response not in self.tree.adj[q]:
                raise HierarchyError("walk response must be the vertex or a neighbor")
            self.q = response
        self.i += 1

    def to_state(self):
        return {"q": self.q, "i": self.i, "counters": {str(k): v for k, v in self.counters.items()}}


def tree_walk(tree, vq, p, delta, instrument_target=None, trace=None):
    """Locate a target node by noisy vertex queries on an undirected tree.

    Runs the exact iteration count from the diameter and error budget and
    returns the final position.  When `instrument_target` is given (and
    `trace` is a list), per-step counters, correctness, and the target's
    potential are recorded for diagnostics.
    """
    core = _WalkCore(tree, p, delta)
    dist = tree.distances_from(instrument_target) if instrument_target is not None else None
    while not core.finished:
        q = core.q
        r = vq(q)
        core.step(r)
        if dist is not None and trace is not None:
            truth = instrument_target if q == instrument_target else None
            if truth is None:
                # correct response points one step along the q -> target path
                truth = next(w for w in tree.adj[q] if dist[w] == dist[q] - 1)
            phi = dist[core.q] - core.counters.get(instrument_target, 0) + sum(
                c for v, c in core.counters.items() if v != instrument_target
            )
            trace.append(WalkStep(core.i, q, r, core.counters.get(q, 0), float(phi), r == truth))
    return core.q


def walk_trace_csv(steps):
    lines = ["iteration,vertex,response,counter,potential,correct"]
    for s in steps:
        lines.append(f"{s.iteration},{s.vertex},{s.response},{s.counter},{s.potential},{int(s.correct)}")
    return "\n".join(lines) + "\n"


class TreeWalkPlan:
    """Counter walk over the contracted candidate tree, as a query plan.

    Each iteration runs one simulated vertex query against the full tree
    and projects the response onto the contracted edges; responses that
    point off the contracted tree (only possible when wrong) fall back to
    the smallest contracted neighbor.
    """

    def __init__(self, h, x, candidates, p, delta, k_p, state=None):
        self.h = h
        self.x = x
        self.k_p = k_p
        self.candidates = sorted(int(c) for c in candidates)
        self.ctree = contracted_tree(h, self.candidates)
        self.core = _WalkCore(self.ctree, p, delta, state=state.get("walk") if state else None)
        if state and state.get("probe") is not None:
            self.probe = VertexProbe.from_state(h, x, k_p, state["probe"])
        else:
            self.probe = None if self.core.finished else VertexProbe(h, self.core.q, x, k_p)

    @property
    def finished(self):
        return self.core.finished

    def result(self):
        return self.core.q

    def pending_block(self):
        return None if self.probe is None else self.probe.pending_block()

    def _project(self, v, response):
        mapped = self.ctree.project(v, response)
        if mapped is not None:
            return mapped
        nbrs = self.ctree.adj[v]
        return nbrs[0] if nbrs else v

    def feed_counts(self, counts):
        self.probe.feed_counts(counts)
        if self.probe.finished:
            self.core.step(self._project(self.probe.v, self.probe.result()))
            self.probe = None if self.core.finished else VertexProbe(self.h, self.core.q, self.x, self.k_p)

    def to_state(self):
        return {
            "walk": self.core.to_state(),
            "probe": self.probe.to_state() if self.probe else None,
            "candidates": self.candidates,
        }


# -- composition -------------------------------------------------------------


class RobustSiblingSearch:
    """Noisy sibling search: weight reduction, then the contracted walk."""

    def __init__(self, h, x, p, delta, cfg=None, state=None):
        self.h = h
        self.x = x
        self.cfg = cfg or RobustConfig(p, delta)
        if state is None:
            self.phase = "mw"
            self.mw = MWReduce(h, x, self.cfg.mw, self.cfg.k_p)
            self.walk = None
        elif state["phase"] == "mw":
            self.phase = "mw"
            self.mw = MWReduce(h, x, self.cfg.mw, self.cfg.k_p, state=state["mw"])
            self.walk = None
        else:
            self.phase = "walk"
            self.mw = None
            self.walk = TreeWalkPlan(
                h, x, state["walk"]["candidates"], self.cfg.p, self.cfg.delta / 2, self.cfg.k_p, state=state["walk"]
            )
        self._advance()

    def _advance(self):
        if self.phase == "mw" and self.mw.finished:
            self.walk = TreeWalkPlan(self.h, self.x, self.mw.result(), self.cfg.p, self.cfg.delta / 2, self.cfg.k_p)
            self.mw = None
            self.phase = "walk"

    @property
    def finished(self):
        return self.phase == "walk" and self.walk.finished

    def result(self):
        return self.walk.result()

    def pending_block(self):
        return self.mw.pending_block() if self.phase == "mw" else self.walk.pending_block()

    def feed_counts(self, counts):
        if self.phase == "mw":
            self.mw.feed_counts(counts)
            self._advance()
        else:
            self.walk.feed_counts(counts)

    def to_state(self):
        if self.phase == "mw":
            return {"phase": "mw", "mw": self.mw.to_state()}
        return {"phase": "walk", "walk": self.walk.to_state()}


def robust_find_sibling(h, x, oracle, p, delta, cfg=None, stats=None):
    """Find x's sibling despite noise; wrong with probability at most delta.

    Ordinal cost is O(log n + log(1/delta)) for fixed p; `stats`, when given,
    receives the ordinal and vertex query counts of the two phases.
    """
    cfg = cfg or RobustConfig(p, delta)
    before = oracle.queries_used()
    mw_plan = MWReduce(h, x, cfg.mw, cfg.k_p)
    candidates = drive_plan(mw_plan, oracle)
    after_mw = oracle.queries_used()
    walk_plan = TreeWalkPlan(h, x, candidates, cfg.p, cfg.delta / 2, cfg.k_p)
    node = drive_plan(walk_plan, oracle)
    if stats is not None:
        stats["ordinal_mw"] = after_mw - before
        stats["ordinal_walk"] = oracle.queries_used() - after_mw
        stats["vertex_mw"] = mw_plan.core.round
        stats["vertex_walk"] = walk_plan.core.i
        stats["n_candidates"] = len(candidates)
    return node


def noisy_insertion_clustering(els, oracle, p, delta, per_insertion=None):
    """Insertion clustering with the robust sibling search per element.

    Each insertion runs with budget delta/n, so the whole tree is correct
    with probability at least 1 - delta.
    """
    els = list(els)
    if len(els) != len(set(els)):
        raise HierarchyError("duplicate element labels")
    if len(els) == 0:
        raise HierarchyError("noisy_insertion_clustering needs at least 1 element")
    if len(els) == 1:
        return BinaryHierarchy.single(els[0])
    n = len(els)
    h = BinaryHierarchy.pair_of(els[0], els[1])
    for x in els[2:]:
        before = oracle.queries_used()
        v = robust_find_sibling(h, x, oracle, p, delta / n)
        if per_insertion is not None:
            per_insertion.append(oracle.queries_used() - before)
        h.insert_leaf_sibling(v, x)
    return h
