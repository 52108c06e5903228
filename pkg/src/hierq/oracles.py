"""Answer sources for ordinal (triplet) queries.

All oracles share one behavioral surface: `answer(t)` returns the pair of a
triplet judged closest, and `queries_used()` counts answers given.  The
noisy oracle re-randomizes every call, so repeating a query can change the
response; `answer_repeated` batches k independent draws of one triplet into
a single RNG draw for speed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .hierarchy import HierarchyError, LcaIndex, triplet, triplet_pairs


def derive_rng(master_seed, *stream):
    """Independent, reproducible generator for (master seed, stream indices)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(s) for s in stream)))


class PivotDirection(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    OUTSIDE = "outside"


@dataclass
class QueryLog:
    """Per-phase query accounting; total is always the sum over phases."""

    counts: dict = field(default_factory=dict)

    def add(self, phase, k=1):
        self.counts[phase] = self.counts.get(phase, 0) + k

    def phase(self, phase):
        return self.counts.get(phase, 0)

    @property
    def total(self):
        return sum(self.counts.values())

    def to_csv(self):
        lines = ["phase,queries"]
        for phase in sorted(self.counts):
            lines.append(f"{phase},{self.counts[phase]}")
        return "\n".join(lines) + "\n"


class OrdinalOracle:
    """Base class: counts queries, delegates the actual answer to `_answer`."""

    def __init__(self):
        self._count = 0

    def queries_used(self):
        return self._count

    def answer(self, t):
        if len(t) != 3:
            raise HierarchyError("ordinal queries take exactly 3 distinct elements")
        self._count += 1
        return self._answer(frozenset(t))

    def answer_repeated(self, t, k):
        """Counts of the answers to k independent repetitions of one query."""
        counts = {}
        for _ in range(k):
            a = self.answer(t)
            counts[a] = counts.get(a, 0) + 1
        return counts

    def _answer(self, t):
        raise NotImplementedError


class ExactOracle(OrdinalOracle):
    """Deterministic ground-truth responses for a fixed hierarchy."""

    def __init__(self, h):
        super().__init__()
        self.hierarchy = h
        self._lca = LcaIndex(h)

    @property
    def elements(self):
        return self.hierarchy.elements()

    def true_answer(self, t):
        """The correct pair, without counting a query."""
        return self._lca.answer(t)

    def _answer(self, t):
        return self._lca.answer(t)


class UniformWrong:
    """Adversary: uniform choice between the two incorrect pairs."""

    def pick(self, t, true_pair, wrong_pairs, rng):
        return wrong_pairs[int(rng.integers(0, 2))]

    def wrong_counts(self, k_wrong, t, true_pair, wrong_pairs, rng):
        a = int(rng.binomial(k_wrong, 0.5))
        return {wrong_pairs[0]: a, wrong_pairs[1]: k_wrong - a}


class FixedWrong:
    """Adversary: a fixed rule picks which incorrect pair to return.

    The default rule always returns the lexicographically smallest wrong
    pair, so every error on a given triplet is the same pair.
    """

    def __init__(self, rule=None):
        self.rule = rule or (lambda t, true_pair, wrong_pairs: wrong_pairs[0])

    def pick(self, t, true_pair, wrong_pairs, rng):
        chosen = frozenset(self.rule(t, true_pair, wrong_pairs))
        if chosen not in wrong_pairs:
            raise HierarchyError("FixedWrong rule must return one of the two wrong pairs")
        return chosen

    def wrong_counts(self, k_wrong, t, true_pair, wrong_pairs, rng):
        return {self.pick(t, true_pair, wrong_pairs, rng): k_wrong}


class CallbackAdversary:
    """Adversary driven by an arbitrary callable (may keep its own state)."""

    def __init__(self, fn):
        self.fn = fn

    def pick(self, t, true_pair, wrong_pairs, rng):
        chosen = frozenset(self.fn(t, true_pair, wrong_pairs))
        if chosen not in wrong_pairs:
            raise HierarchyError("adversary callback must return one of the two wrong pairs")
        return chosen

    wrong_counts = None  # forces the one-at-a-time path


ADVERSARIES = {"uniform": UniformWrong, "fixed": FixedWrong}


@dataclass
class NoiseModel:
    """Independent noise: correct with probability p, else adversarial."""

    p: float
    adversary: object = field(default_factory=UniformWrong)

    def __post_init__(self):
        if not (0.5 < self.p <= 1.0):
            raise HierarchyError(f"noise level p must be in (0.5, 1], got {self.p}")


class NoisyOracle(OrdinalOracle):
    """Each response is independently correct with probability p.

    Incorrect responses are chosen by the noise model's adversary among the
    two wrong pairs.  Identical queries are re-randomized on every call.
    """

    def __init__(self, h, model, rng):
        super().__init__()
        self.hierarchy = h
        self.model = model
        self.rng = rng
        self._lca = LcaIndex(h)

    def true_answer(self, t):
        return self._lca.answer(t)

    def _wrongs(self, t, true_pair):
        return [q for q in triplet_pairs(t) if q != true_pair]

    def _answer(self, t):
        true_pair = self._lca.answer(t)
        if self.rng.random() < self.model.p:
            return true_pair
        return self.model.adversary.pick(t, true_pair, self._wrongs(t, true_pair), self.rng)

    def answer_repeated(self, t, k):
        t = frozenset(t)
        if len(t) != 3:
            raise HierarchyError("ordinal queries take exactly 3 distinct elements")
        adv = self.model.adversary
        if getattr(adv, "wrong_counts", None) is None:
            return super().answer_repeated(t, k)
        self._count += k
        true_pair = self._lca.answer(t)
        n_true = int(self.rng.binomial(k, self.model.p))
        counts = {true_pair: n_true} if n_true else {}
        if k - n_true:
            for q, c in adv.wrong_counts(k - n_true, t, true_pair, self._wrongs(t, true_pair), self.rng).items():
                if c:
                    counts[q] = counts.get(q, 0) + c
        return counts


class CountingOracle(OrdinalOracle):
    """Delegating wrapper that attributes every answered query to a phase."""

    def __init__(self, inner, log, phase):
        super().__init__()
        self.inner = inner
        self.log = log
        self.phase = phase

    def _answer(self, t):
        self.log.add(self.phase, 1)
        return self.inner.answer(t)

    def answer_repeated(self, t, k):
        counts = self.inner.answer_repeated(t, k)
        self._count += k
        self.log.add(self.phase, k)
        return counts

    def true_answer(self, t):
        return self.inner.true_answer(t)


def exact_oracle(h):
    return ExactOracle(h)

def noisy_oracle(h, model, rng):
    return NoisyOracle(h, model, rng)

def counting_wrapper(oracle, log, phase):
    return CountingOracle(oracle, log, phase)


def pivot_direction_of(answer_pair, rep_left, rep_right, x):
    """Interpret a triplet answer as a direction relative to the pivot."""
    if answer_pair == frozenset((rep_left, x)):
        return PivotDirection.LEFT
    if answer_pair == frozenset((rep_right, x)):
        return PivotDirection.RIGHT
    if answer_pair == frozenset((rep_left, rep_right)):
        return PivotDirection.OUTSIDE
    raise HierarchyError(f"answer {sorted(answer_pair)} is not a pair of the pivot triplet")


def pivot_query(oracle, h, v, x, reps=None):
    """One ordinal query for x with pivot v; Left / Right / Outside.

    Representatives default to the cached minimum-label leaves of v's two
    subtrees; any valid choice gives the same direction under an exact
    oracle.  `x` must not be a leaf of h.
    """
    if h.is_leaf(v):
        raise HierarchyError("pivot queries need an internal pivot vertex")
    if h.has_element(x):
        raise HierarchyError(f"{x!r} is already placed in the hierarchy")
    if reps is None:
        rep_l, rep_r = h.rep(h.left(v)), h.rep(h.right(v))
    else:
        rep_l, rep_r = reps
    ans = oracle.answer(triplet(rep_l, rep_r, x))
    return pivot_direction_of(ans, rep_l, rep_r, x)


def drive_plan(plan, oracle):
    """Run a block-emitting query plan to completion against an oracle."""
    while not plan.finished:
        t, k = plan.pending_block()
        if k == 1:
            counts = {oracle.answer(t): 1}
        else:
            counts = oracle.answer_repeated(t, k)
        plan.feed_counts(counts)
    return plan.result()


def wilson_interval(successes, trials, z=1.96):
    """95% confidence interval for a success rate (harness summaries)."""
    if trials == 0:
        return (0.0, 1.0)
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))
