"""Exhaustive small-n machinery: enumeration and triplet-table reconstruction.

There are (2n-3)!! leaf-labeled binary topologies on n leaves; for n <= 8
they can be enumerated outright, which gives an independent oracle for
cross-validating the query-efficient algorithms.
"""

from __future__ import annotations

import itertools
import math

from .hierarchy import BinaryHierarchy, HierarchyError, element_labels, triplet

MAX_ENUM = 8
MAX_TABLE = 7


class InconsistentResponses(HierarchyError):
    """No topology matches the response table (a broken or noisy oracle)."""


def count_topologies(n):
    """(2n-3)!! distinct leaf-labeled rooted binary topologies."""
    if n < 2:
        raise HierarchyError("need n >= 2")
    out = 1
    for k in range(3, 2 * n - 2, 2):
        out *= k
    return out


def _attachments(tree, leaf):
    """All trees formed by subdividing one edge of `tree` (root edge included)."""
    yield (tree, leaf)
    if isinstance(tree, tuple):
        l, r = tree
        for l2 in _attachments(l, leaf):
            yield (l2, r)
        for r2 in _attachments(r, leaf):
            yield (l, r2)


def enumerate_hierarchies(n, labels=None):
    """Yield every topology on n labeled leaves exactly once (2 <= n <= 8)."""
    if not (2 <= n <= MAX_ENUM):
        raise HierarchyError(f"enumeration is guarded to 2 <= n <= {MAX_ENUM}")
    labels = list(labels) if labels is not None else element_labels(n)
    if len(labels) != n:
        raise HierarchyError("label count does not match n")

    shapes = [(labels[0], labels[1])]
    for k in range(2, n):
        shapes = [t2 for t in shapes for t2 in _attachments(t, labels[k])]
    for shape in shapes:
        yield BinaryHierarchy.from_nested(shape)


def full_answer_table(h):
    """Ground-truth answers for every triplet of h's elements."""
    els = h.elements()
    return {triplet(a, b, c): h.triplet_answer((a, b, c)) for a, b, c in itertools.combinations(els, 3)}


def consistent_with(table, n):
    """All topologies agreeing with a complete triplet-answer table."""
    labels = sorted(set(itertools.chain.from_iterable(table)))
    if len(labels) != n:
        raise HierarchyError(f"table mentions {len(labels)} elements, expected {n}")
    if n > MAX_TABLE:
        raise HierarchyError(f"consistency scan is guarded to n <= {MAX_TABLE}")
    if len(table) != math.comb(n, 3):
        raise HierarchyError("response table must cover all C(n,3) triplets")
    out = []
    for h in enumerate_hierarchies(n, labels=labels):
        if all(h.triplet_answer(t) == ans for t, ans in table.items()):
            out.append(h)
    return out


def reconstruct_exhaustive(oracle, elements):
    """Query every triplet and return the unique consistent topology.

    Costs exactly C(n, 3) ordinal queries.  Raises InconsistentResponses if
    the answers match no topology (possible only for a faulty oracle).
    """
    els = sorted(elements)
    n = len(els)
    if not (2 <= n <= MAX_TABLE):
        raise HierarchyError(f"exhaustive reconstruction is guarded to 2 <= n <= {MAX_TABLE}")
    if n == 2:
        return BinaryHierarchy.pair_of(els[0], els[1])
    table = {}
    for a, b, c in itertools.combinations(els, 3):
        t = triplet(a, b, c)
        table[t] = oracle.answer(t)
    matches = consistent_with(table, n)
    if not matches:
        raise InconsistentResponses("responses match no binary hierarchy")
    if len(matches) > 1:
        raise InconsistentResponses("responses match multiple hierarchies")
    return matches[0]
