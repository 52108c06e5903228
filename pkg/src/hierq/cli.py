"""`hier` command line: experiments, calibration, reconstruction, service."""

from __future__ import annotations

import json
import sys

import click

from . import harness
from .hierarchy import BinaryHierarchy, HierarchyError
from .noiseless import insertion_clustering, quick_clustering
from .noisy import noisy_insertion_clustering
from .oracles import ADVERSARIES, NoiseModel, derive_rng, exact_oracle, noisy_oracle


def _merge_config(config_path, flags):
    """JSON config supplies defaults; explicitly passed flags win."""
    merged = {}
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            merged.update(json.load(fh))
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


def _parse_int_list(value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v.strip()]


@click.group()
def main():
    """Hierarchy reconstruction from ordinal (triplet) queries."""


@main.command("run")
@click.option("--experiment", type=str, help=f"one of {sorted(harness.EXPERIMENTS)}")
@click.option("--n", "n_values", type=str, help="comma-separated sizes (diameters for treewalk)")
@click.option("--trials", type=int)
@click.option("--p", type=float)
@click.option("--delta", type=float)
@click.option("--adversary", type=click.Choice(sorted(ADVERSARIES)))
@click.option("--seed", type=int)
@click.option("--shape", "tree_shape", type=click.Choice(sorted(harness.TREE_SHAPES)))
@click.option("--k", type=int, help="queries per trial (nonadaptive-lb)")
@click.option("--out", "output_path", type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), help="JSON config; flags win")
def run_cmd(config_path, **flags):
    """Run one experiment and print its summary (CSV written with --out)."""
    flags["n_values"] = _parse_int_list(flags.get("n_values"))
    merged = _merge_config(config_path, flags)
    merged.setdefault("trials", 10)
    merged.setdefault("seed", 0)
    merged.setdefault("adversary", "uniform")
    merged.setdefault("tree_shape", "random")
    if "n_values" in merged:
        merged["n_values"] = _parse_int_list(merged["n_values"])
    try:
        config = harness.ExperimentConfig(**merged)
        records, summary = harness.run(config)
    except (HierarchyError, TypeError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(harness.format_summary(config.experiment, summary))
    if config.output_path:
        click.echo(f"wrote {len(records)} records to {config.output_path}")


@main.command("calibrate")
@click.option("--p", "p_grid", type=str, default="0.8", help="comma-separated p values")
@click.option("--n", "n_grid", type=str, default="32,64,128", help="comma-separated sizes")
@click.option("--trials", type=int, default=60)
@click.option("--delta", type=float, default=0.05)
@click.option("--seed", type=int, default=0)
@click.option("--report", "report_path", type=click.Path(), help="write the full report JSON here")
@click.option("--write-constants", type=click.Path(), help="write a constants file for the first p")
def calibrate_cmd(p_grid, n_grid, trials, delta, seed, report_path, write_constants):
    """Search the constant ladder for the noisy pipeline and report kappas."""
    ps = [float(v) for v in p_grid.split(",") if v.strip()]
    ns = _parse_int_list(n_grid)
    report = harness.calibrate(ps, ns, trials, seed=seed, delta=delta)
    click.echo(json.dumps(report, indent=2))
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
    if write_constants:
        constants = harness.constants_from_report(report, ps[0])
        with open(write_constants, "w", encoding="utf-8") as fh:
            json.dump(constants, fh, indent=2)
        click.echo(f"wrote constants for p={ps[0]} to {write_constants}")


@main.command("reconstruct")
@click.option("--newick", "newick_path", type=click.Path(exists=True), required=True, help="ground-truth tree")
@click.option("--algorithm", type=click.Choice(["quick", "insertion", "noisy"]), default="insertion")
@click.option("--p", type=float, default=None, help="noise level (noisy algorithm)")
@click.option("--delta", type=float, default=0.1)
@click.option("--adversary", type=click.Choice(sorted(ADVERSARIES)), default="uniform")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), help="write the reconstructed newick here")
def reconstruct_cmd(newick_path, algorithm, p, delta, adversary, seed, out_path):
    """Read a truth tree, simulate an oracle against it, and reconstruct."""
    with open(newick_path, "r", encoding="utf-8") as fh:
        truth = BinaryHierarchy.from_newick(fh.read())
    rng = derive_rng(seed, 0)
    if algorithm == "noisy":
        if p is None:
            raise click.ClickException("--p is required for the noisy algorithm")
        oracle = noisy_oracle(truth, NoiseModel(p, ADVERSARIES[adversary]()), rng) if p < 1 else exact_oracle(truth)
        out = noisy_insertion_clustering(truth.elements(), oracle, p, delta)
    elif algorithm == "quick":
        oracle = exact_oracle(truth)
        out = quick_clustering(truth.elements(), oracle, rng)
    else:
        oracle = exact_oracle(truth)
        out = insertion_clustering(truth.elements(), oracle)
    newick = out.to_newick()
    click.echo(f"queries: {oracle.queries_used()}")
    click.echo(f"equivalent to truth: {out.equivalent(truth)}")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(newick + "\n")
    else:
        click.echo(newick)


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.option("--store", "store_path", type=click.Path(), default=None, help="session persistence directory")
@click.option("--ui", "ui_path", type=click.Path(exists=True), default=None, help="static UI directory to mount at /")
def serve_cmd(host, port, store_path, ui_path):
    """Start the interactive oracle session service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(store_path=store_path, ui_path=ui_path), host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
