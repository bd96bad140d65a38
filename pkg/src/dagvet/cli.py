"""Command-line surface: discovery runs, perturbation study, reporting.

Configuration precedence for shared settings (endpoint, model, temperature,
sample budget): command-line flag > config file (INI sections of key=value
pairs, via --config) > environment variable (DAGVET_*) > built-in default.
Every subcommand is deterministic given its seed arguments; the llm proposer
is the exception and is labeled as such in output.
"""

from __future__ import annotations

import configparser
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np
from scipy import stats

from .engine import (
    PipelineResult,
    RunConfig,
    run_pipeline,
    write_run_summary,
    write_trajectory_csv,
)
from .graph import CausalGraph, apply_edit, structure_metrics, to_dot
from .llm import EndpointConfig
from .networks import (
    BUNDLED_NETWORKS,
    load_bif,
    bundled_network_path,
    network_skeleton,
    read_edge_list,
)
from .proposers import ProposerContext, RandomProposer
from .sampling import build_mixed_dataset, sample_interventional, sample_observational, save_dataset_csv
from .scoring import BicScorer

ENV_PREFIX = "DAGVET"


class Settings:
    """flag > config file > environment > default."""

    def __init__(self, config_path: str | None):
        self._parser = configparser.ConfigParser()
        if config_path:
            self._parser.read(config_path)

    def get(self, section: str, key: str, flag_value, default, cast=str):
        if flag_value is not None:
            return flag_value
        if self._parser.has_option(section, key):
            return cast(self._parser.get(section, key))
        env_name = f"{ENV_PREFIX}_{key.upper().replace('-', '_')}"
        if env_name in os.environ:
            return cast(os.environ[env_name])
        return default


def _load_truth(dataset: str) -> CausalGraph:
    return network_skeleton(_load_net(dataset))


def _load_net(dataset: str):
    if dataset.lower() in BUNDLED_NETWORKS:
        return load_bif(bundled_network_path(dataset.lower()))
    return load_bif(dataset)


def _endpoint_from(settings: Settings, url, model, temperature, out_dir: Path | None):
    url = settings.get("endpoint", "url", url, None)
    if not url:
        return None
    model = settings.get("endpoint", "model", model, "default-model")
    temperature = settings.get("endpoint", "temperature", temperature, 0.6, float)
    transcript = None
    if out_dir is not None:
        transcript = str(out_dir / "transcript.jsonl")
    return EndpointConfig(
        base_url=url, model=model, temperature=temperature, transcript_path=transcript
    )


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="INI config file with [endpoint]/[discover]/[perturb] sections.",
)
@click.pass_context
def main(ctx, config_path):
    """Causal structure discovery with a statistical edit verifier."""
    ctx.obj = Settings(config_path)


# ---------------------------------------------------------------------------
# discover
# ---------------------------------------------------------------------------

_METRIC_COLUMNS = (
    "run",
    "seed",
    "init",
    "stop_reason",
    "precision",
    "recall",
    "f1",
    "shd",
    "bic",
    "proposals",
    "accepted",
)


def _discover_one(args) -> dict:
    dataset, baseline, config = args
    result = run_pipeline(dataset, baseline, config)
    return _discover_row(result)


def _discover_row(result: PipelineResult) -> dict:
    m = result.metrics
    return {
        "seed": result.config.seed,
        "init": result.init_label,
        "stop_reason": result.run.stop_reason.value,
        "precision": m.precision,
        "recall": m.recall,
        "f1": m.f1,
        "shd": m.shd,
        "bic": result.run.bic_result.bic,
        "proposals": result.run.n_proposals,
        "accepted": result.run.counts["ACCEPTED"],
        "_result": result,
    }


@main.command()
@click.option("--dataset", required=True, help="Bundled network name or BIF file path.")
@click.option("--baseline", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Edge-list file from an external discovery tool.")
@click.option("--proposer", type=click.Choice(["greedy", "random", "llm"]), default="greedy")
@click.option("--reps", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--samples", type=int, default=None, help="Mixed dataset size [default: 5000].")
@click.option("--endpoint-url", default=None)
@click.option("--model", default=None)
@click.option("--temperature", type=float, default=None)
@click.option("--context-file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Optional domain-context text injected into prompts.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.pass_obj
def discover(settings, dataset, baseline, proposer, reps, seed, samples,
             endpoint_url, model, temperature, context_file, out_dir, jobs):
    """Run the discovery pipeline REPS times and report metric aggregates."""
    if reps < 1:
        raise click.BadParameter("--reps must be >= 1")
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    samples = settings.get("discover", "samples", samples, 5000, int)
    endpoint = _endpoint_from(settings, endpoint_url, model, temperature, out)
    if proposer == "llm" and endpoint is None:
        raise click.UsageError("--proposer llm requires --endpoint-url (or config/env)")
    domain_context = ""
    if context_file:
        domain_context = Path(context_file).read_text(encoding="utf-8")
    if proposer == "llm":
        click.echo("note: the llm proposer is NOT deterministic across runs")

    configs = [
        RunConfig(
            seed=seed + rep,
            proposer=proposer,
            endpoint=endpoint,
            total_samples=samples,
            domain=Path(dataset).stem if not dataset.lower() in BUNDLED_NETWORKS else dataset.lower(),
            domain_context=domain_context,
        )
        for rep in range(reps)
    ]
    rows: list[dict] = []
    jobs = max(1, jobs)
    if jobs > 1 and proposer != "llm":
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = list(pool.map(_discover_one, [(dataset, baseline, c) for c in configs]))
        for rep, row in enumerate(futures):
            row["run"] = rep
            rows.append(row)
    else:
        for rep, config in enumerate(configs):
            try:
                row = _discover_one((dataset, baseline, config))
            except Exception as exc:  # one failed repetition must not abort the batch
                click.echo(f"run {rep} (seed {config.seed}) failed: {exc}", err=True)
                continue
            row["run"] = rep
            rows.append(row)
    if not rows:
        raise click.ClickException("every repetition failed")

    for row in rows:
        result: PipelineResult = row.pop("_result")
        if out:
            tag = f"run{row['run']:02d}_seed{row['seed']}"
            write_trajectory_csv(result.run, out / f"trajectory_{tag}.csv")
            write_run_summary(result.run, out / f"summary_{tag}.json", result.metrics)

    lines = [",".join(_METRIC_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_cell(row[c]) for c in _METRIC_COLUMNS))
    numeric = ("precision", "recall", "f1", "shd", "bic", "proposals", "accepted")
    means = {c: float(np.mean([row[c] for row in rows])) for c in numeric}
    stds = {c: float(np.std([row[c] for row in rows])) for c in numeric}
    agg_mean = {"run": "mean", "seed": "", "init": "", "stop_reason": "", **means}
    agg_std = {"run": "std", "seed": "", "init": "", "stop_reason": "", **stds}
    for agg in (agg_mean, agg_std):
        lines.append(",".join(_format_cell(agg[c]) for c in _METRIC_COLUMNS))
    table = "\n".join(lines) + "\n"
    click.echo(table, nl=False)
    if out:
        (out / "metrics.csv").write_text(table, encoding="utf-8")
        click.echo(f"wrote {out / 'metrics.csv'}")


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


# ---------------------------------------------------------------------------
# perturb
# ---------------------------------------------------------------------------


def _walk_seed(seed: int, walk: int) -> int:
    return int(np.random.SeedSequence([seed, walk]).generate_state(1)[0])


def _walk_rows(
    truth: CausalGraph, scorer: BicScorer, seed: int, walk: int, steps: int
) -> list[tuple[int, int, int, float]]:
    """One cumulative random walk from the truth; one (shd, bic) row per step."""
    proposer = RandomProposer(_walk_seed(seed, walk))
    graph = truth
    rows = []
    for step in range(1, steps + 1):
        proposal = proposer.propose(
            ProposerContext(graph=graph, iteration=step, current_bic=0.0)
        )
        graph = apply_edit(graph, proposal.op)
        rows.append((walk, step, structure_metrics(graph, truth).shd, scorer.bic(graph).bic))
    return rows


def _perturb_walk(args) -> list[tuple[int, int, int, float]]:
    dataset, samples, seed, walk, steps = args
    net = _load_net(dataset)
    truth = network_skeleton(net)
    scorer = BicScorer(build_mixed_dataset(net, total=samples, seed=seed))
    return _walk_rows(truth, scorer, seed, walk, steps)


@main.command()
@click.option("--dataset", required=True)
@click.option("--walks", type=int, default=5, show_default=True)
@click.option("--steps", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--samples", type=int, default=None, help="Mixed dataset size [default: 5000].")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.pass_obj
def perturb(settings, dataset, walks, steps, seed, samples, out_path, jobs):
    """Random-walk perturbation study: correlation between SHD and BIC.

    Starting at the ground-truth graph, each walk applies STEPS cumulative
    random structurally valid edits; each step's SHD (vs truth) and BIC (on
    a fresh mixed dataset) make one data point.
    """
    samples = settings.get("perturb", "samples", samples, 5000, int)
    args = [(dataset, samples, seed, walk, steps) for walk in range(walks)]
    if max(1, jobs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            walk_rows = list(pool.map(_perturb_walk, args))
    else:
        # Serial walks share one scorer, so family scores are cached across walks.
        net = _load_net(dataset)
        truth = network_skeleton(net)
        scorer = BicScorer(build_mixed_dataset(net, total=samples, seed=seed))
        walk_rows = [_walk_rows(truth, scorer, seed, walk, steps) for walk in range(walks)]

    rows = [r for rows_ in walk_rows for r in rows_]
    shd = np.array([r[2] for r in rows], dtype=float)
    bic = np.array([r[3] for r in rows], dtype=float)
    pearson = float(stats.pearsonr(shd, bic)[0])
    spearman = float(stats.spearmanr(shd, bic)[0])

    lines = [f"# dataset={dataset} samples={samples} seed={seed} walks={walks} steps={steps}"]
    lines.append("walk,step,shd,bic")
    for walk, step, s, b in rows:
        lines.append(f"{walk},{step},{s},{b:.6f}")
    lines.append(f"# pearson={pearson:.6f} spearman={spearman:.6f}")
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_path} ({len(rows)} rows)")
    else:
        click.echo(text, nl=False)
    click.echo(f"pearson={pearson:.4f} spearman={spearman:.4f} n={len(rows)}")


# ---------------------------------------------------------------------------
# outcomes
# ---------------------------------------------------------------------------


@main.command()
@click.argument("summaries", nargs=-1, required=True, type=click.Path(dir_okay=False))
def outcomes(summaries):
    """Aggregate run summaries into the proposal-outcome taxonomy.

    Malformed proposals are folded into the structure-invalid bucket: both
    classes are rejected before any score is computed.
    """
    success = invalid = bad_score = 0
    used = 0
    for path in summaries:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                counts = json.load(fh)["counts"]
            success += counts.get("ACCEPTED", 0)
            invalid += counts.get("REJECTED_STRUCTURAL", 0) + counts.get(
                "REJECTED_MALFORMED", 0
            )
            bad_score += counts.get("REJECTED_STATISTICAL", 0)
            used += 1
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            click.echo(f"skipping unreadable summary {path}: {exc}", err=True)
    total = success + invalid + bad_score
    if total == 0:
        raise click.ClickException("no proposals found in the given summaries")

    def pct(x: int) -> float:
        return 100.0 * x / total

    click.echo(f"runs aggregated: {used}, proposals: {total}")
    click.echo(f"Success:                      {success:6d}  ({pct(success):5.1f}%)")
    click.echo(f"Rejected (structure invalid): {invalid:6d}  ({pct(invalid):5.1f}%)")
    click.echo(f"Rejected (bad BIC score):     {bad_score:6d}  ({pct(bad_score):5.1f}%)")
    click.echo(
        "note: for comparison, ~61.3% structure-invalid has been reported for a "
        "14B-parameter proposer on this taxonomy; not asserted here."
    )


# ---------------------------------------------------------------------------
# sample / score / graphviz
# ---------------------------------------------------------------------------


@main.command()
@click.option("--dataset", required=True)
@click.option("--kind", type=click.Choice(["mixed", "observational", "interventional"]),
              default="mixed", show_default=True)
@click.option("--target", default=None, help="Intervention target (interventional kind).")
@click.option("--total", type=int, default=5000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--mode", type=click.Choice(["per_sample", "per_environment"]),
              default="per_sample", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def sample(dataset, kind, target, total, seed, mode, out_path):
    """Generate a dataset and write it as CSV (+ .mask.csv / .env.csv)."""
    net = _load_net(dataset)
    if kind == "mixed":
        ds = build_mixed_dataset(net, total=total, seed=seed, mode=mode)
    elif kind == "observational":
        ds = sample_observational(net, total, seed)
    else:
        if target is None:
            raise click.UsageError("--target is required for interventional sampling")
        ds = sample_interventional(net, target, total, seed, mode=mode)
    paths = save_dataset_csv(ds, out_path)
    click.echo(f"wrote {', '.join(paths)} ({ds.n} rows x {ds.d} columns)")


@main.command()
@click.option("--dataset", required=True)
@click.option("--graph", "graph_spec", default="truth", show_default=True,
              help="'truth', 'empty', or an edge-list file path.")
@click.option("--samples", type=int, default=5000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def score(dataset, graph_spec, samples, seed):
    """Score a graph against a mixed dataset sampled from the network."""
    net = _load_net(dataset)
    truth = network_skeleton(net)
    if graph_spec == "truth":
        graph = truth
    elif graph_spec == "empty":
        graph = CausalGraph(truth.variables)
    else:
        with open(graph_spec, "r", encoding="utf-8") as fh:
            graph = read_edge_list(fh.read())
        if graph.variables != truth.variables:
            raise click.ClickException("edge list and network disagree on variables")
    scorer = BicScorer(build_mixed_dataset(net, total=samples, seed=seed))
    result = scorer.bic(graph)
    click.echo(f"loglik: {result.loglik:.6f}")
    click.echo(f"k_eff:  {result.k_eff}")
    click.echo(f"N:      {result.n}")
    click.echo(f"bic:    {result.bic:.6f}")


@main.command()
@click.option("--dataset", default=None, help="Network whose true skeleton is drawn.")
@click.option("--edge-list", "edge_list_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Draw this edge-list file instead.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def graphviz(dataset, edge_list_path, out_path):
    """Emit DOT text for a graph (stdout by default)."""
    if (dataset is None) == (edge_list_path is None):
        raise click.UsageError("give exactly one of --dataset or --edge-list")
    if dataset is not None:
        graph = _load_truth(dataset)
    else:
        with open(edge_list_path, "r", encoding="utf-8") as fh:
            graph = read_edge_list(fh.read())
    text = to_dot(graph)
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main(sys.argv[1:])
