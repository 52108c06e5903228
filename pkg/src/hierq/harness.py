"""Experiment runner: query-count curves, success rates, and calibration.

Every experiment is deterministic given its seed: trial i at size n draws
from the stream (seed, n, i).  Records are sorted before writing so the CSV
is byte-identical across re-runs.  Wall time is kept in memory for the
summary but never written to the CSV.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import noisy
from .hierarchy import (
    BinaryHierarchy,
    HierarchyError,
    UndirectedTree,
    balanced_hierarchy,
    caterpillar,
    element_labels,
    induced_tree,
    random_hierarchy,
    true_sibling_node,
)
from .noiseless import QuickStats, insertion_clustering, quick_clustering
from .noisy import (
    MWConfig,
    RobustConfig,
    mw_lambda,
    mw_reduce,
    repetitions_for,
    robust_find_sibling,
    noisy_insertion_clustering,
    simulate_vertex_query,
    tree_walk,
)
from .oracles import (
    ADVERSARIES,
    NoiseModel,
    derive_rng,
    exact_oracle,
    noisy_oracle,
    wilson_interval,
)

CSV_SCHEMA_VERSION = 1
CSV_HEADER = "schema,experiment,n,trial,success,ordinal_queries,vertex_queries,rounds,metric"


@dataclass
class ExperimentConfig:
    experiment: str
    n_values: list
    trials: int = 10
    p: float = None
    delta: float = None
    adversary: str = "uniform"
    seed: int = 0
    tree_shape: str = "random"
    output_path: str = None
    k: int = None  # non-adaptive experiment: queries per trial

    def __post_init__(self):
        if self.trials < 1:
            raise HierarchyError("trials must be >= 1")
        if self.p is not None and not (0.5 < self.p <= 1.0):
            raise HierarchyError(f"p must be in (0.5, 1], got {self.p}")
        if self.adversary not in ADVERSARIES:
            raise HierarchyError(f"unknown adversary {self.adversary!r} (choose from {sorted(ADVERSARIES)})")
        if self.tree_shape not in TREE_SHAPES:
            raise HierarchyError(f"unknown tree shape {self.tree_shape!r}")


@dataclass
class TrialRecord:
    experiment: str
    n: int
    trial_index: int
    success: bool = None
    ordinal_queries: int = 0
    vertex_queries: int = None
    rounds: int = None
    metric: float = None
    wall_time: float = 0.0

    def csv_row(self):
        def opt(v):
            return "" if v is None else str(v)

        succ = "" if self.success is None else str(int(self.success))
        metric = "" if self.metric is None else repr(float(self.metric))
        return (
            f"{CSV_SCHEMA_VERSION},{self.experiment},{self.n},{self.trial_index},"
            f"{succ},{self.ordinal_queries},{opt(self.vertex_queries)},{opt(self.rounds)},{metric}"
        )


TREE_SHAPES = {
    "random": lambda n, rng: random_hierarchy(n, rng),
    "caterpillar": lambda n, rng: caterpillar(element_labels(n)),
    "balanced": lambda n, rng: balanced_hierarchy(element_labels(n)),
}


def _make_truth(cfg, n, rng):
    return TREE_SHAPES[cfg.tree_shape](n, rng)


def _make_noisy(cfg, truth, rng):
    model = NoiseModel(cfg.p, ADVERSARIES[cfg.adversary]())
    return noisy_oracle(truth, model, rng)


# -- experiments -------------------------------------------------------------


def _run_insertion_noiseless(cfg, n, trial, rng):
    truth = _make_truth(cfg, n, rng)
    oracle = exact_oracle(truth)
    out = insertion_clustering(truth.elements(), oracle)
    return TrialRecord(cfg.experiment, n, trial, out.equivalent(truth), oracle.queries_used())


def _run_quick_noiseless(cfg, n, trial, rng):
    truth = _make_truth(cfg, n, rng)
    oracle = exact_oracle(truth)
    stats = QuickStats()
    out = quick_clustering(truth.elements(), oracle, rng, stats=stats)
    return TrialRecord(
        cfg.experiment, n, trial, out.equivalent(truth), oracle.queries_used(),
        rounds=stats.total_rounds, metric=len(stats.rounds_per_invocation),
    )


def _run_findsibling_caterpillar(cfg, n, trial, rng):
    labels = element_labels(n)
    truth = caterpillar(labels)
    oracle = exact_oracle(truth)
    per = []
    out = insertion_clustering(labels, oracle, per_insertion=per)
    within = all(q <= math.floor(math.log2(2 * i - 3)) for i, q in zip(range(3, n + 1), per))
    return TrialRecord(
        cfg.experiment, n, trial, out.equivalent(truth) and within, oracle.queries_used(),
        metric=max(per) if per else 0,
    )


def random_diameter_tree(diameter, rng, extra=None):
    """Random tree with the exact given diameter.

    A path realizes the diameter; extra leaves hang off interior path
    positions, which cannot create a longer path.
    """
    if diameter < 1:
        raise HierarchyError("diameter must be >= 1")
    nodes = list(range(diameter + 1))
    edges = [(i, i + 1) for i in range(diameter)]
    extra = extra if extra is not None else diameter + 1
    if diameter >= 2:
        for _ in range(extra):
            anchor = int(rng.integers(1, diameter))
            new = len(nodes)
            nodes.append(new)
            edges.append((anchor, new))
    return UndirectedTree(nodes, edges)


def noisy_vertex_oracle(tree, target, p, rng, adversary="uniform"):
    """Synthetic vertex-query oracle: correct w.p. p, else adversarial.

    The response space at q is q itself plus its neighbors; wrong answers
    come uniformly from the incorrect responses, or always the smallest one
    for the "fixed" adversary.
    """
    dist = tree.distances_from(target)

    def vq(q):
        if q == target:
            correct = q
        else:
            correct = next(w for w in tree.adj[q] if dist[w] == dist[q] - 1)
        if rng.random() < p:
            return correct
        wrong = [w for w in [q] + list(tree.adj[q]) if w != correct]
        if adversary == "fixed":
            return wrong[0]
        return wrong[int(rng.integers(0, len(wrong)))]

    return vq


def _run_treewalk(cfg, n, trial, rng):
    # n plays the role of the diameter D here
    tree = random_diameter_tree(n, rng)
    target = tree.nodes[int(rng.integers(0, len(tree.nodes)))]
    vq = noisy_vertex_oracle(tree, target, cfg.p, rng, adversary=cfg.adversary)
    found = tree_walk(tree, vq, cfg.p, cfg.delta)
    return TrialRecord(
        cfg.experiment, n, trial, found == target, 0,
        vertex_queries=noisy.walk_iterations(tree.diameter(), cfg.p, cfg.delta),
    )


def _heldout_instance(cfg, n, rng):
    truth = _make_truth(cfg, n + 1, rng)
    els = truth.elements()
    x = els[-1]
    h = induced_tree(truth, els[:-1])
    return truth, h, x, true_sibling_node(h, truth, x)


def _run_mw_containment(cfg, n, trial, rng):
    truth, h, x, target = _heldout_instance(cfg, n, rng)
    oracle = _make_noisy(cfg, truth, rng)
    k_p = repetitions_for(cfg.p)
    mw_cfg = MWConfig(cfg.p, cfg.delta)
    cand = mw_reduce(h, lambda v: simulate_vertex_query(h, v, x, oracle, k_p), mw_cfg)
    return TrialRecord(
        cfg.experiment, n, trial, target in cand, oracle.queries_used(),
        vertex_queries=mw_cfg.rounds(h.n_nodes), metric=len(cand),
    )


def _run_robust_sibling(cfg, n, trial, rng):
    # delta is the whole-tree budget; each call gets delta/n as in Thm 4 usage
    truth, h, x, target = _heldout_instance(cfg, n, rng)
    oracle = _make_noisy(cfg, truth, rng) if cfg.p < 1 else exact_oracle(truth)
    stats = {}
    found = robust_find_sibling(h, x, oracle, cfg.p, cfg.delta / n, stats=stats)
    return TrialRecord(
        cfg.experiment, n, trial, found == target, oracle.queries_used(),
        vertex_queries=stats["vertex_mw"] + stats["vertex_walk"], metric=stats["n_candidates"],
    )


def _run_noisy_insertion(cfg, n, trial, rng):
    truth = _make_truth(cfg, n, rng)
    oracle = _make_noisy(cfg, truth, rng) if cfg.p < 1 else exact_oracle(truth)
    per = []
    out = noisy_insertion_clustering(truth.elements(), oracle, cfg.p, cfg.delta, per_insertion=per)
    return TrialRecord(
        cfg.experiment, n, trial, out.equivalent(truth), oracle.queries_used(),
        metric=(sum(per) / len(per)) if per else 0.0,
    )


def learned_four_clusters(n, k, rng):
    """One non-adaptive trial: how many size-4 clusters do k uniform triplets pin down?

    The truth is a full binary tree over a uniformly permuted label order;
    its n/4 disjoint size-4 clusters are "learned" only if some sampled
    triplet falls entirely inside one.
    """
    labels = element_labels(n)
    perm = [labels[i] for i in rng.permutation(n)]
    truth = balanced_hierarchy(perm)
    four_clusters = [c for c in truth.to_laminar() if len(c) == 4]
    group_of = {}
    for gi, c in enumerate(sorted(four_clusters, key=sorted)):
        for lab in c:
            group_of[lab] = gi
    learned = set()
    for _ in range(k):
        t = rng.choice(n, size=3, replace=False)
        g0, g1, g2 = (group_of[labels[int(i)]] for i in t)
        if g0 == g1 == g2:
            learned.add(g0)
    return len(learned)


def nonadaptive_experiment(n, k, trials, rng):
    """Mean number of learned size-4 clusters over the given trials."""
    if n < 8 or (n & (n - 1)) != 0:
        raise HierarchyError("n must be a power of two, >= 8")
    if k < 0:
        raise HierarchyError("k must be >= 0")
    counts = [learned_four_clusters(n, k, rng) for _ in range(trials)]
    return sum(counts) / trials, counts


def _run_nonadaptive(cfg, n, trial, rng):
    k = cfg.k if cfg.k is not None else 100
    learned = learned_four_clusters(n, k, rng)
    return TrialRecord(cfg.experiment, n, trial, None, k, metric=learned)


EXPERIMENTS = {
    "insertion-noiseless": _run_insertion_noiseless,
    "quick-noiseless": _run_quick_noiseless,
    "findsibling-caterpillar": _run_findsibling_caterpillar,
    "treewalk": _run_treewalk,
    "mw-containment": _run_mw_containment,
    "robust-sibling": _run_robust_sibling,
    "noisy-insertion": _run_noisy_insertion,
    "nonadaptive-lb": _run_nonadaptive,
}

_NEEDS_NOISE_PARAMS = {"treewalk", "mw-containment", "robust-sibling", "noisy-insertion"}


def run(config):
    """Run one experiment over its size grid; returns (records, summary)."""
    if config.experiment not in EXPERIMENTS:
        raise HierarchyError(f"unknown experiment {config.experiment!r} (choose from {sorted(EXPERIMENTS)})")
    if config.experiment in _NEEDS_NOISE_PARAMS:
        if config.p is None or config.delta is None:
            raise HierarchyError(f"experiment {config.experiment!r} needs --p and --delta")
    fn = EXPERIMENTS[config.experiment]
    records = []
    for n in config.n_values:
        for trial in range(config.trials):
            rng = derive_rng(config.seed, n, trial)
            t0 = time.perf_counter()
            rec = fn(config, int(n), trial, rng)
            rec.wall_time = time.perf_counter() - t0
            records.append(rec)
    records.sort(key=lambda r: (r.n, r.trial_index))
    summary = summarize(records)
    if config.output_path:
        write_csv(records, config.output_path)
    return records, summary


def summarize(records):
    by_n = {}
    for r in records:
        by_n.setdefault(r.n, []).append(r)
    out = {}
    for n, rs in sorted(by_n.items()):
        judged = [r for r in rs if r.success is not None]
        succ = sum(1 for r in judged if r.success)
        row = {
            "trials": len(rs),
            "successes": succ if judged else None,
            "success_rate": (succ / len(judged)) if judged else None,
            "ci95": wilson_interval(succ, len(judged)) if judged else None,
            "mean_ordinal": float(np.mean([r.ordinal_queries for r in rs])),
            "max_ordinal": int(max(r.ordinal_queries for r in rs)),
            "wall_time": float(sum(r.wall_time for r in rs)),
        }
        if any(r.vertex_queries is not None for r in rs):
            row["mean_vertex"] = float(np.mean([r.vertex_queries for r in rs if r.vertex_queries is not None]))
        if any(r.metric is not None for r in rs):
            row["mean_metric"] = float(np.mean([r.metric for r in rs if r.metric is not None]))
        out[n] = row
    return out


def format_summary(experiment, summary):
    lines = [f"experiment: {experiment}"]
    for n, row in summary.items():
        bits = [f"n={n}", f"trials={row['trials']}"]
        if row["success_rate"] is not None:
            lo, hi = row["ci95"]
            bits.append(f"success={row['successes']}/{row['trials']} ({row['success_rate']:.3f}, 95% CI [{lo:.3f}, {hi:.3f}])")
        bits.append(f"ordinal mean={row['mean_ordinal']:.1f} max={row['max_ordinal']}")
        if "mean_vertex" in row:
            bits.append(f"vertex mean={row['mean_vertex']:.1f}")
        if "mean_metric" in row:
            bits.append(f"metric mean={row['mean_metric']:.3f}")
        bits.append(f"time={row['wall_time']:.2f}s")
        lines.append("  " + "  ".join(bits))
    return "\n".join(lines)


def write_csv(records, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(r.csv_row() + "\n")


def records_csv(records):
    return CSV_HEADER + "\n" + "".join(r.csv_row() + "\n" for r in records)


# -- regression helper --------------------------------------------------------


def linear_fit(xs, ys):
    """Least-squares line fit; returns (slope, intercept, r_squared)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 2:
        return 0.0, float(y[0]) if y.size else 0.0, 1.0
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


# -- calibration ---------------------------------------------------------------


CANDIDATE_C_ROUNDS = [1.0, 2.0, 3.0, 4.0, 6.0, 8.0]
CANDIDATE_C_KEEP = [1.0, 1.5, 2.0, 3.0, 4.0]


def calibrate(p_grid, n_grid, trials, seed=0, delta=0.05, containment_target=0.98):
    """Pick the smallest tested MW constants that hit the containment target.

    For each p the candidate ladder is scanned in increasing cost order; a
    margin above the target guards the acceptance thresholds.  The chosen
    constants are then used to measure the sibling-search and end-to-end
    query constants (kappas).  Returns a report dict; write it with
    `hier calibrate --write-constants`.
    """
    if not p_grid or not n_grid:
        raise HierarchyError("calibration grids must be non-empty")
    report = {"delta": delta, "containment_target": containment_target, "per_p": {}}
    n_max = max(n_grid)

    for p in p_grid:
        chosen = None
        ladder = [(cr, ck) for cr in CANDIDATE_C_ROUNDS for ck in CANDIDATE_C_KEEP]
        ladder.sort(key=lambda t: (t[0] * t[1], t[0]))
        scanned = []
        for cr, ck in ladder:
            cfg = ExperimentConfig(
                "mw-containment", [n_max], trials=trials, p=p, delta=delta, seed=seed,
            )
            mw = MWConfig(p, delta, c_rounds=cr, c_keep=ck)
            hits = 0
            for trial in range(trials):
                rng = derive_rng(seed, int(n_max), trial)
                truth, h, x, target = _heldout_instance(cfg, int(n_max), rng)
                oracle = _make_noisy(cfg, truth, rng) if p < 1 else exact_oracle(truth)
                k_p = repetitions_for(p)
                cand = mw_reduce(h, lambda v: simulate_vertex_query(h, v, x, oracle, k_p), mw)
                hits += target in cand
            rate = hits / trials
            scanned.append({"c_rounds": cr, "c_keep": ck, "containment": rate})
            if rate >= containment_target and chosen is None:
                chosen = (cr, ck)
        if chosen is None:
            report["per_p"][repr(p)] = {"status": "no tested constant sufficed", "scanned": scanned}
            continue

        cr, ck = chosen
        ratios_sib = []
        ratios_ins = []
        per_insertion_means = []
        for n in n_grid:
            for trial in range(max(3, trials // 4)):
                rng = derive_rng(seed + 1, int(n), trial)
                cfg = ExperimentConfig("robust-sibling", [n], trials=1, p=p, delta=delta, seed=seed + 1)
                truth, h, x, target = _heldout_instance(cfg, int(n), rng)
                oracle = _make_noisy(cfg, truth, rng) if p < 1 else exact_oracle(truth)
                d_call = delta / n
                rc = RobustConfig(p, d_call, mw=MWConfig(p, d_call / 2, c_rounds=cr, c_keep=ck))
                robust_find_sibling(h, x, oracle, p, d_call, cfg=rc)
                budget = math.log2(h.n_nodes) + math.log(1 / d_call)
                ratios_sib.append(oracle.queries_used() / budget)

            per_ins = []
            for trial in range(max(2, trials // 10)):
                rng = derive_rng(seed + 2, int(n), trial)
                cfg = ExperimentConfig("noisy-insertion", [n], trials=1, p=p, delta=0.1, seed=seed + 2)
                truth = _make_truth(cfg, int(n), rng)
                oracle = _make_noisy(cfg, truth, rng) if p < 1 else exact_oracle(truth)
                per = []
                noisy_insertion_clustering(truth.elements(), oracle, p, 0.1, per_insertion=per)
                per_ins.append(sum(per) / len(per))
                cap = n * (math.log2(n) + math.log(n / 0.1))
                ratios_ins.append(oracle.queries_used() / cap)
            per_insertion_means.append((math.log2(n), float(np.mean(per_ins))))

        # the slope of per-insertion cost vs log2(n) in the end-to-end schedule
        slope, _, r2 = linear_fit([a for a, _ in per_insertion_means], [b for _, b in per_insertion_means])

        report["per_p"][repr(p)] = {
            "status": "ok",
            "c_rounds": cr,
            "c_keep": ck,
            "lambda": mw_lambda(p) if p < 1 else None,
            # caps carry a 1.25x margin over the observed maxima
            "kappa_sibling": 1.25 * max(ratios_sib),
            "kappa_sibling_slope": slope,
            "kappa_slope_r2": r2,
            "kappa_insertion": 1.25 * max(ratios_ins),
            "scanned": scanned,
        }
    return report


def constants_from_report(report, p):
    row = report["per_p"][repr(p)]
    if row.get("status") != "ok":
        raise HierarchyError("calibration failed for the requested p; keeping prior defaults")
    return {
        "c_rounds": row["c_rounds"],
        "c_keep": row["c_keep"],
        "kappa_sibling": row["kappa_sibling"],
        "kappa_sibling_slope": row["kappa_sibling_slope"],
        "kappa_insertion": row["kappa_insertion"],
        "calibration": f"hier calibrate at p={p}, delta={report['delta']}",
    }
