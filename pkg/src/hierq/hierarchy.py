"""Rooted binary hierarchies over labeled elements.

A hierarchy is stored as an index-stable node table: nodes are appended and
never removed, so a node id stays valid across leaf insertions.  That lets
search state (candidate sets, logs, suspended sessions) refer to nodes by id
while the tree grows.

The module also provides the conversions the rest of the package is built on:
laminar set families, canonical forms, Newick, induced trees over leaf
subsets, and path-contracted Steiner trees over arbitrary node subsets.
"""

from __future__ import annotations

import itertools
import re
from collections import deque

import numpy as np

LABEL_RE = re.compile(r"[A-Za-z0-9_.\-]+\Z")


class HierarchyError(ValueError):
    """Raised for structurally invalid hierarchies or invalid arguments."""


def pair(a, b):
    """Unordered pair of two distinct element labels."""
    p = frozenset((a, b))
    if len(p) != 2:
        raise HierarchyError(f"pair needs two distinct labels, got {a!r}, {b!r}")
    return p


def triplet(a, b, c):
    """Unordered triplet of three distinct element labels."""
    t = frozenset((a, b, c))
    if len(t) != 3:
        raise HierarchyError(f"triplet needs three distinct labels, got {a!r}, {b!r}, {c!r}")
    return t


def triplet_pairs(t):
    """The three unordered pairs contained in a triplet, sorted for determinism."""
    a, b, c = sorted(t)
    return [frozenset((a, b)), frozenset((a, c)), frozenset((b, c))]


def _check_label(label):
    if not isinstance(label, str) or not LABEL_RE.match(label):
        raise HierarchyError(f"invalid element label {label!r} (allowed: [A-Za-z0-9_.-]+)")
    return label


def element_labels(n):
    """Default instance labels x1..xn, zero padded so they sort by index."""
    width = len(str(n))
    return [f"x{str(i).zfill(width)}" for i in range(1, n + 1)]


class BinaryHierarchy:
    """A rooted tree whose leaves carry element labels.

    Every internal node has exactly two children.  With n >= 2 leaves the
    tree has exactly 2n-1 nodes.  A single-leaf tree (the root is the leaf)
    is allowed as the recursion/base case.
    """

    __slots__ = ("_parent", "_left", "_right", "_label", "_rep", "_root", "_leaf_of")

    def __init__(self):
        self._parent = []
        self._left = []
        self._right = []
        self._label = []
        self._rep = []  # smallest leaf label in the subtree, cached
        self._root = -1
        self._leaf_of = {}

    # -- construction -------------------------------------------------

    def _new_node(self, label=None):
        self._parent.append(-1)
        self._left.append(-1)
        self._right.append(-1)
        self._label.append(label)
        self._rep.append(label)
        return len(self._parent) - 1

    def _new_leaf(self, label):
        _check_label(label)
        if label in self._leaf_of:
            raise HierarchyError(f"duplicate leaf label {label!r}")
        i = self._new_node(label)
        self._leaf_of[label] = i
        return i

    @classmethod
    def single(cls, label):
        h = cls()
        h._root = h._new_leaf(label)
        return h

    @classmethod
    def pair_of(cls, a, b):
        h = cls()
        la = h._new_leaf(a)
        lb = h._new_leaf(b)
        r = h._new_node()
        h._left[r], h._right[r] = la, lb
        h._parent[la] = h._parent[lb] = r
        h._rep[r] = min(a, b)
        h._root = r
        return h

    @classmethod
    def from_nested(cls, spec):
        """Build from nested 2-tuples of labels, e.g. (("a", "b"), "c")."""
        h = cls()
        # iterative: resolve children before parents
        done = {}
        stack = [(spec, False)]
        while stack:
            node, expanded = stack.pop()
            if isinstance(node, str):
                done[id(node)] = h._new_leaf(node)
                continue
            if not (isinstance(node, tuple) and len(node) == 2):
                raise HierarchyError(f"nested spec nodes must be labels or 2-tuples, got {node!r}")
            if expanded:
                li, ri = done[id(node[0])], done[id(node[1])]
                i = h._new_node()
                h._left[i], h._right[i] = li, ri
                h._parent[li] = h._parent[ri] = i
                h._rep[i] = min(h._rep[li], h._rep[ri])
                done[id(node)] = i
            else:
                stack.append((node, True))
                stack.append((node[1], False))
                stack.append((node[0], False))
        h._root = done[id(spec)]
        return h

    def copy(self):
        h = BinaryHierarchy()
        h._parent = list(self._parent)
        h._left = list(self._left)
        h._right = list(self._right)
        h._label = list(self._label)
        h._rep = list(self._rep)
        h._root = self._root
        h._leaf_of = dict(self._leaf_of)
        return h

    # -- basic accessors -----------------------------------------------

    @property
    def root(self):
        return self._root

    @property
    def n_nodes(self):
        return len(self._parent)

    @property
    def n_leaves(self):
        return len(self._leaf_of)

    def is_leaf(self, i):
        return self._label[i] is not None

    def is_internal(self, i):
        return self._label[i] is None

    def parent(self, i):
        p = self._parent[i]
        return None if p < 0 else p

    def left(self, i):
        return self._left[i]

    def right(self, i):
        return self._right[i]

    def children(self, i):
        if self.is_leaf(i):
            return ()
        return (self._left[i], self._right[i])

    def label(self, i):
        return self._label[i]

    def rep(self, i):
        """Smallest leaf label under node i (the cached pivot representative)."""
        return self._rep[i]

    def leaf_index(self, label):
        try:
            return self._leaf_of[label]
        except KeyError:
            raise HierarchyError(f"unknown element {label!r}") from None

    def has_element(self, label):
        return label in self._leaf_of

    def elements(self):
        return sorted(self._leaf_of)

    def nodes(self):
        return range(self.n_nodes)

    def internal_nodes(self):
        return [i for i in range(self.n_nodes) if self.is_internal(i)]

    def postorder(self):
        """Node ids, children before parents."""
        out = []
        stack = [self._root]
        while stack:
            v = stack.pop()
            out.append(v)
            if self.is_internal(v):
                stack.append(self._left[v])
                stack.append(self._right[v])
        out.reverse()
        return out

    def depths(self):
        d = [0] * self.n_nodes
        stack = [self._root]
        while stack:
            v = stack.pop()
            for c in self.children(v):
                d[c] = d[v] + 1
                stack.append(c)
        return d

    def node_cluster(self, i):
        """The set of leaf labels under node i."""
        out = set()
        stack = [i]
        while stack:
            v = stack.pop()
            if self.is_leaf(v):
                out.add(self._label[v])
            else:
                stack.append(self._left[v])
                stack.append(self._right[v])
        return frozenset(out)

    def node_with_cluster(self, cluster):
        """The node whose leaf set equals `cluster`, or None."""
        cluster = frozenset(cluster)
        clusters = self._clusters_by_node()
        for i, c in enumerate(clusters):
            if c == cluster:
                return i
        return None

    def lca(self, i, j):
        d = self.depths()
        while d[i] > d[j]:
            i = self._parent[i]
        while d[j] > d[i]:
            j = self._parent[j]
        while i != j:
            i = self._parent[i]
            j = self._parent[j]
        return i

    def validate(self):
        """Check structural invariants; raises HierarchyError on violation."""
        n = self.n_nodes
        if not (0 <= self._root < n):
            raise HierarchyError("missing root")
        seen = set()
        stack = [self._root]
        while stack:
            v = stack.pop()
            if v in seen:
                raise HierarchyError("cycle or shared node")
            seen.add(v)
            kids = self.children(v)
            if kids:
                if len(kids) != 2 or -1 in kids:
                    raise HierarchyError(f"internal node {v} lacks two children")
                for c in kids:
                    if self._parent[c] != v:
                        raise HierarchyError("parent pointer mismatch")
                    stack.append(c)
        if len(seen) != n:
            raise HierarchyError("unreachable nodes in table")
        leaves = [v for v in seen if self.is_leaf(v)]
        if {self._label[v] for v in leaves} != set(self._leaf_of):
            raise HierarchyError("leaf label map out of sync")
        if self.n_leaves >= 2 and n != 2 * self.n_leaves - 1:
            raise HierarchyError("node count is not 2n-1")
        return True

    # -- mutation ------------------------------------------------------

    def _replace_child(self, parent_i, old, new):
        if self._left[parent_i] == old:
            self._left[parent_i] = new
        elif self._right[parent_i] == old:
            self._right[parent_i] = new
        else:
            raise HierarchyError("child link mismatch")

    def _refresh_reps_upward(self, i):
        while i >= 0:
            if self.is_internal(i):
                r = min(self._rep[self._left[i]], self._rep[self._right[i]])
                if r == self._rep[i]:
                    break
                self._rep[i] = r
            i = self._parent[i]

    def _splice_sibling(self, at, new_child):
        """Put a fresh internal node where `at` was; children (at, new_child)."""
        old_parent = self._parent[at]
        joint = self._new_node()
        self._left[joint], self._right[joint] = at, new_child
        self._parent[at] = joint
        self._parent[new_child] = joint
        self._rep[joint] = min(self._rep[at], self._rep[new_child])
        if old_parent < 0:
            self._root = joint
        else:
            self._replace_child(old_parent, at, joint)
            self._parent[joint] = old_parent
            self._refresh_reps_upward(old_parent)
        return joint

    def insert_leaf_sibling(self, at, label):
        """Insert a new leaf as the sibling of node `at`; returns the leaf id."""
        leaf = self._new_leaf(label)
        self._splice_sibling(at, leaf)
        return leaf

    def graft_sibling(self, at, sub):
        """Copy the hierarchy `sub` in as the sibling of node `at`.

        Returns the id of the copied subtree's root.
        """
        mapping = {}
        for v in sub.postorder():
            if sub.is_leaf(v):
                mapping[v] = self._new_leaf(sub.label(v))
            else:
                i = self._new_node()
                li, ri = mapping[sub.left(v)], mapping[sub.right(v)]
                self._left[i], self._right[i] = li, ri
                self._parent[li] = self._parent[ri] = i
                self._rep[i] = min(self._rep[li], self._rep[ri])
                mapping[v] = i
        sub_root = mapping[sub.root]
        self._splice_sibling(at, sub_root)
        return sub_root

    @staticmethod
    def join(a, b):
        """New hierarchy whose root has copies of `a` and `b` as children."""
        h = a.copy()
        h.graft_sibling(h.root, b)
        return h

    # -- equivalence, canonical form, laminar family -------------------

    def _clusters_by_node(self):
        clusters = [None] * self.n_nodes
        for v in self.postorder():
            if self.is_leaf(v):
                clusters[v] = frozenset((self._label[v],))
            else:
                clusters[v] = clusters[self._left[v]] | clusters[self._right[v]]
        return clusters

    def to_laminar(self):
        """The cluster family: every node's leaf set (includes X and singletons)."""
        return set(self._clusters_by_node())

    def canonical_form(self):
        """Deterministic text form: children sorted lexicographically at each node."""
        forms = [None] * self.n_nodes
        for v in self.postorder():
            if self.is_leaf(v):
                forms[v] = self._label[v]
            else:
                a, b = sorted((forms[self._left[v]], forms[self._right[v]]))
                forms[v] = f"({a},{b})"
        return forms[self._root]

    def equivalent(self, other):
        """True iff the two hierarchies have identical cluster families."""
        if set(self._leaf_of) != set(other._leaf_of):
            raise HierarchyError("hierarchies are over different element sets")
        return self.to_laminar() == other.to_laminar()

    def triplet_answer(self, t):
        """The unique pair in `t` whose lowest common ancestor is strictly deepest."""
        a, b, c = sorted(t)
        for x in (a, b, c):
            if x not in self._leaf_of:
                raise HierarchyError(f"unknown element {x!r}")
        d = self.depths()
        ia, ib, ic = self._leaf_of[a], self._leaf_of[b], self._leaf_of[c]
        dab = d[self.lca(ia, ib)]
        dac = d[self.lca(ia, ic)]
        dbc = d[self.lca(ib, ic)]
        if dab > dac and dab > dbc:
            return frozenset((a, b))
        if dac > dab and dac > dbc:
            return frozenset((a, c))
        if dbc > dab and dbc > dac:
            return frozenset((b, c))
        raise HierarchyError("no strictly deepest pair; tree is not binary")

    # -- serialization --------------------------------------------------

    def to_newick(self):
        parts = [None] * self.n_nodes
        for v in self.postorder():
            if self.is_leaf(v):
                parts[v] = self._label[v]
            else:
                parts[v] = f"({parts[self._left[v]]},{parts[self._right[v]]})"
        return parts[self._root] + ";"

    @classmethod
    def from_newick(cls, text):
        s = text.strip()
        if not s.endswith(";"):
            raise HierarchyError("newick string must end with ';'")
        s = s[:-1]
        pos = 0

        def parse():
            nonlocal pos
            if pos < len(s) and s[pos] == "(":
                pos += 1
                left = parse()
                if pos >= len(s) or s[pos] != ",":
                    raise HierarchyError(f"expected ',' at position {pos}")
                pos += 1
                right = parse()
                if pos >= len(s) or s[pos] != ")":
                    raise HierarchyError(f"expected ')' at position {pos}")
                pos += 1
                return (left, right)
            m = re.match(r"[A-Za-z0-9_.\-]+", s[pos:])
            if not m:
                raise HierarchyError(f"expected a label at position {pos}")
            pos += m.end()
            return m.group(0)

        spec = parse()
        if pos != len(s):
            raise HierarchyError(f"trailing characters after position {pos}")
        if isinstance(spec, str):
            return cls.single(spec)
        return cls.from_nested(spec)

    def to_json_dict(self):
        """Nested `{"id", "label", "children"}` export for UIs."""
        built = [None] * self.n_nodes
        for v in self.postorder():
            kids = [built[c] for c in self.children(v)]
            built[v] = {"id": v, "label": self._label[v], "children": kids}
        return built[self._root]

    def to_table(self):
        """Flat, versioned node-table snapshot (for session persistence)."""
        return {
            "version": 1,
            "root": self._root,
            "parent": list(self._parent),
            "left": list(self._left),
            "right": list(self._right),
            "label": list(self._label),
        }

    @classmethod
    def from_table(cls, table):
        if table.get("version") != 1:
            raise HierarchyError(f"unsupported tree table version {table.get('version')!r}")
        h = cls()
        h._parent = [int(x) for x in table["parent"]]
        h._left = [int(x) for x in table["left"]]
        h._right = [int(x) for x in table["right"]]
        h._label = list(table["label"])
        h._root = int(table["root"])
        h._leaf_of = {lab: i for i, lab in enumerate(h._label) if lab is not None}
        h._rep = [None] * h.n_nodes
        for v in h.postorder():
            h._rep[v] = h._label[v] if h._label[v] is not None else min(h._rep[h._left[v]], h._rep[h._right[v]])
        h.validate()
        return h

    def __repr__(self):
        return f"BinaryHierarchy({self.canonical_form()})"


# -- laminar family conversions ----------------------------------------


def from_laminar(family):
    """Rebuild the hierarchy from a laminar cluster family.

    The family must contain the full element set, all singletons, no empty
    set, and every cluster of size >= 2 must split into exactly two member
    clusters.
    """
    clusters = {frozenset(c) for c in family}
    if frozenset() in clusters:
        raise HierarchyError("laminar family must not contain the empty set")
    universe = frozenset(itertools.chain.from_iterable(clusters))
    if universe not in clusters:
        raise HierarchyError("laminar family must contain the full element set")
    for x in universe:
        if frozenset((x,)) not in clusters:
            raise HierarchyError(f"laminar family is missing singleton {{{x!r}}}")
    ordered = sorted(clusters, key=len)
    for a, b in itertools.combinations(ordered, 2):
        if a & b and not (a <= b or b <= a):
            raise HierarchyError("family is not laminar")

    by_size = sorted(clusters, key=lambda c: (len(c), sorted(c)))

    def split(c):
        if len(c) == 1:
            return next(iter(c))
        # largest proper member subset, then check its complement is a member
        for a in reversed(by_size):
            if len(a) < len(c) and a < c:
                rest = c - a
                if rest not in clusters:
                    raise HierarchyError(f"cluster {sorted(c)} has no binary split in the family")
                return (split(a), split(rest))
        raise HierarchyError(f"cluster {sorted(c)} has no proper member subset")

    spec = split(universe)
    if isinstance(spec, str):
        return BinaryHierarchy.single(spec)
    return BinaryHierarchy.from_nested(spec)


def induced_tree(h, subset):
    """The hierarchy induced on a leaf subset of size >= 2.

    Equivalent to deleting the other leaves, pruning childless internal
    nodes and contracting single-child nodes (including a single-child
    root).
    """
    subset = set(subset)
    if len(subset) < 2:
        raise HierarchyError("induced tree needs at least 2 elements")
    for x in subset:
        h.leaf_index(x)
    reduced = [None] * h.n_nodes
    for v in h.postorder():
        if h.is_leaf(v):
            reduced[v] = h.label(v) if h.label(v) in subset else None
        else:
            l, r = reduced[h.left(v)], reduced[h.right(v)]
            reduced[v] = (l, r) if l is not None and r is not None else (l if l is not None else r)
    return BinaryHierarchy.from_nested(reduced[h.root])


# -- instance generators ------------------------------------------------


def random_hierarchy(n, rng, labels=None):
    """Uniformly random leaf-labeled topology on n >= 2 leaves.

    Sequential attachment: leaf k+1 subdivides a uniformly random edge of
    the current k-leaf tree, counting the edge above the root.  This yields
    the exact uniform distribution over all (2n-3)!! topologies.
    """
    if n < 2:
        raise HierarchyError("random_hierarchy needs n >= 2")
    labels = list(labels) if labels is not None else element_labels(n)
    if len(labels) != n:
        raise HierarchyError("label count does not match n")
    h = BinaryHierarchy.pair_of(labels[0], labels[1])
    for k in range(2, n):
        at = int(rng.integers(0, h.n_nodes))
        h.insert_leaf_sibling(at, labels[k])
    return h


def caterpillar(labels):
    """Maximally unbalanced tree: ((((x1,x2),x3),x4)...)."""
    labels = list(labels)
    if len(labels) < 2:
        raise HierarchyError("caterpillar needs >= 2 labels")
    h = BinaryHierarchy.pair_of(labels[0], labels[1])
    for lab in labels[2:]:
        h.insert_leaf_sibling(h.root, lab)
    return h


def balanced_hierarchy(labels):
    """As balanced as the label count allows (full tree for powers of two)."""
    labels = list(labels)
    if not labels:
        raise HierarchyError("balanced_hierarchy needs >= 1 label")

    def build(ls):
        if len(ls) == 1:
            return ls[0]
        mid = len(ls) // 2
        return (build(ls[:mid]), build(ls[mid:]))

    spec = build(labels)
    if isinstance(spec, str):
        return BinaryHierarchy.single(spec)
    return BinaryHierarchy.from_nested(spec)


def sibling_cluster(truth, present, x):
    """Ground-truth insertion point: the cluster of x's sibling.

    `present` is the leaf set of the partial tree; the result is the leaf
    set (within `present`) of the node that becomes x's sibling when x is
    added, read directly off the truth's induced tree.
    """
    sub = induced_tree(truth, set(present) | {x})
    xi = sub.leaf_index(x)
    par = sub.parent(xi)
    if par is None:
        raise HierarchyError("element is the entire tree")
    sib = sub.left(par) if sub.right(par) == xi else sub.right(par)
    return sub.node_cluster(sib)


def true_sibling_node(h, truth, x):
    """Node id in `h` where truth says the new element x attaches."""
    cluster = sibling_cluster(truth, set(h.elements()), x)
    node = h.node_with_cluster(cluster)
    if node is None:
        raise HierarchyError("partial tree disagrees with the ground truth")
    return node


# -- numpy-backed structure indexes --------------------------------------


class TreeIndex:
    """DFS-interval arrays for O(1) subtree tests and vectorized separators.

    Built for a fixed snapshot of the tree; rebuild after mutations.
    The subtree of v is exactly { u : tin[v] <= tin[u] < tout[v] }.
    """

    def __init__(self, h):
        n = h.n_nodes
        self.h = h
        tin = np.zeros(n, dtype=np.int64)
        tout = np.zeros(n, dtype=np.int64)
        order = np.zeros(n, dtype=np.int64)
        t = 0
        stack = [(h.root, False)]
        while stack:
            v, closing = stack.pop()
            if closing:
                tout[v] = t
                continue
            tin[v] = t
            order[t] = v
            t += 1
            stack.append((v, True))
            for c in h.children(v):
                stack.append((c, False))
        self.tin = tin
        self.tout = tout
        self.order = order
        self.left = np.array([h.left(v) for v in range(n)], dtype=np.int64)
        self.right = np.array([h.right(v) for v in range(n)], dtype=np.int64)
        internal = np.array([v for v in range(n) if h.is_internal(v)], dtype=np.int64)
        self.internal = internal
        if internal.size:
            self.int_l_tin = tin[self.left[internal]]
            self.int_l_tout = tout[self.left[internal]]
            self.int_r_tin = tin[self.right[internal]]
            self.int_r_tout = tout[self.right[internal]]

    def in_subtree(self, u, v):
        """Is u inside the subtree rooted at v (inclusive)?"""
        return self.tin[v] <= self.tin[u] < self.tout[v]

    def separator(self, s_tins):
        """Internal node minimizing max(|S in left|, |S in right|, |S elsewhere|).

        `s_tins` is the sorted array of tin values of the candidate set S.
        The "elsewhere" part counts the pivot itself, matching the search
        loop's update rule.  Ties break to the smallest node id.
        """
        k = s_tins.size
        cl = np.searchsorted(s_tins, self.int_l_tout) - np.searchsorted(s_tins, self.int_l_tin)
        cr = np.searchsorted(s_tins, self.int_r_tout) - np.searchsorted(s_tins, self.int_r_tin)
        score = np.maximum(np.maximum(cl, cr), k - cl - cr)
        return int(self.internal[int(np.argmin(score))])

    def weighted_separator(self, weights):
        """Node minimizing the max component weight of the tree minus that node.

        Considers every node (a leaf can be the right query once it holds
        most of the weight); the queried node's own weight belongs to no
        component.  Ties break to the smallest node id.
        """
        w_tin = np.asarray(weights, dtype=np.float64)[self.order]
        csum = np.concatenate(([0.0], np.cumsum(w_tin)))
        total = csum[-1]
        sub = csum[self.tout] - csum[self.tin]  # subtree weight incl. the node
        n = self.tin.size
        wl = np.zeros(n)
        wr = np.zeros(n)
        has = self.left >= 0
        wl[has] = sub[self.left[has]]
        wr[has] = sub[self.right[has]]
        score = np.maximum(np.maximum(wl, wr), total - sub)
        return int(np.argmin(score))

    def subtree_mask(self, v):
        """Boolean mask (by node id) of the subtree rooted at v."""
        return (self.tin >= self.tin[v]) & (self.tin < self.tout[v])


class LcaIndex:
    """O(1) lowest-common-ancestor depths via an Euler tour and sparse table."""

    def __init__(self, h):
        self.h = h
        n = h.n_nodes
        depth = h.depths()
        tour = []
        first = [0] * n
        seen = [False] * n
        stack = [(h.root, 0)]
        while stack:
            v, ci = stack.pop()
            tour.append(v)
            if not seen[v]:
                seen[v] = True
                first[v] = len(tour) - 1
            kids = h.children(v)
            if ci < len(kids):
                stack.append((v, ci + 1))
                stack.append((kids[ci], 0))
        self.first = first
        d = np.array([depth[v] for v in tour], dtype=np.int64)
        levels = [d]
        span = 1
        while 2 * span <= d.size:
            prev = levels[-1]
            levels.append(np.minimum(prev[: prev.size - span], prev[span:]))
            span *= 2
        self.levels = levels
        self.leaf_of = dict(h._leaf_of)

    def lca_depth(self, u, v):
        lo, hi = self.first[u], self.first[v]
        if lo > hi:
            lo, hi = hi, lo
        k = (hi - lo + 1).bit_length() - 1
        lev = self.levels[k]
        return int(min(lev[lo], lev[hi - (1 << k) + 1]))

    def answer(self, t):
        """Ground-truth triplet answer by comparing the three LCA depths."""
        a, b, c = sorted(t)
        ia, ib, ic = self.leaf_of[a], self.leaf_of[b], self.leaf_of[c]
        dab = self.lca_depth(ia, ib)
        dac = self.lca_depth(ia, ic)
        dbc = self.lca_depth(ib, ic)
        if dab > dac and dab > dbc:
            return frozenset((a, b))
        if dac > dbc:
            return frozenset((a, c))
        return frozenset((b, c))


# -- undirected auxiliary trees ------------------------------------------


class UndirectedTree:
    """A small undirected tree over integer node ids (adjacency lists)."""

    def __init__(self, nodes, edges):
        self.nodes = sorted(nodes)
        self.adj = {v: [] for v in self.nodes}
        for u, v in edges:
            self.adj[u].append(v)
            self.adj[v].append(u)
        for v in self.adj:
            self.adj[v].sort()

    def neighbors(self, v):
        return self.adj[v]

    def distances_from(self, src):
        dist = {src: 0}
        dq = deque([src])
        while dq:
            u = dq.popleft()
            for w in self.adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    dq.append(w)
        return dist

    def distance(self, u, v):
        return self.distances_from(u)[v]

    def diameter(self):
        if len(self.nodes) <= 1:
            return 0
        d0 = self.distances_from(self.nodes[0])
        far = max(d0, key=lambda v: (d0[v], v))
        d1 = self.distances_from(far)
        return max(d1.values())


class ContractedTree(UndirectedTree):
    """Path contraction of the minimal subtree of `h` spanning given vertices.

    Nodes are real h-node ids: the requested vertices plus every Steiner
    vertex with two Steiner children.  Each edge stands for a vertex
    disjoint h-path; `first_step` records the first h-neighbor along it, so
    full-tree query responses can be projected back onto contracted edges.
    """

    def __init__(self, h, nodes, edges, first_step):
        super().__init__(nodes, edges)
        self.h = h
        self.first_step = first_step

    def project(self, v, response):
        """Map a full-tree vertex response at v onto this tree.

        `response` is v itself (target here) or an h-neighbor of v.  Returns
        the contracted neighbor whose h-path leaves v in that direction, or
        None if no contracted edge does (possible only for noisy responses
        or targets outside the contracted tree).
        """
        if response == v:
            return v
        for w in self.adj[v]:
            if self.first_step[(v, w)] == response:
                return w
        return None


def contracted_tree(h, vertices):
    """Contract h onto a vertex subset; see ContractedTree."""
    vs = sorted(set(vertices))
    if not vs:
        raise HierarchyError("contracted_tree needs a non-empty vertex set")
    for v in vs:
        if not (0 <= v < h.n_nodes):
            raise HierarchyError(f"unknown node id {v}")
    if len(vs) == 1:
        return ContractedTree(h, vs, [], {})

    # count, per ancestor, how many requested vertices sit at or below it
    cnt = {}
    for v in vs:
        u = v
        while u is not None:
            cnt[u] = cnt.get(u, 0) + 1
            u = h.parent(u)
    top = vs[0]
    while cnt[top] < len(vs):
        top = h.parent(top)

    idx = TreeIndex(h)
    steiner = {u for u in cnt if idx.in_subtree(u, top)}
    vset = set(vs)

    def steiner_child_count(u):
        return sum(1 for c in h.children(u) if c in steiner)

    kept = {u for u in steiner if u in vset or steiner_child_count(u) >= 2}

    edges = []
    first_step = {}
    for u in sorted(kept):
        if u == top:
            continue
        below = u
        anc = h.parent(u)
        while anc not in kept:
            below = anc
            anc = h.parent(anc)
        edges.append((u, anc))
        first_step[(u, anc)] = h.parent(u)
        first_step[(anc, u)] = below

    return ContractedTree(h, sorted(kept), edges, first_step)
