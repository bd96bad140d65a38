"""Search orchestration: hybrid initialization, the verify-and-refine loop,
error memory, patience-based early stopping, and best-graph tracking.

Each round runs the two-step verification: a structural validity check
(invalid edits are rejected outright and never spend patience), then a
statistical improvement check accepting the edit only when it lowers the
BIC by more than epsilon. Statistical rejections increment the patience
counter; an acceptance resets it and clears the error memory so stale
constraints are not carried past a structure change. The run stops at the
iteration horizon or after ``patience`` consecutive statistical rejections,
and returns the lowest-BIC graph encountered, the initial graph included.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .graph import (
    CausalGraph,
    EditKind,
    StructureMetrics,
    apply_edit,
    check_structural,
    structure_metrics,
)
from .llm import (
    ChatClient,
    EndpointConfig,
    EndpointError,
    LlmProposer,
    MalformedResponseError,
    llm_init,
)
from .networks import (
    BUNDLED_NETWORKS,
    DiscreteNetwork,
    bundled_network_path,
    load_bif,
    network_skeleton,
    read_edge_list,
)
from .proposers import (
    GreedyProposer,
    Proposal,
    Proposer,
    ProposerContext,
    ProposerExhausted,
    RandomProposer,
    RejectionKind,
    RejectionRecord,
)
from .sampling import build_mixed_dataset
from .scoring import BicResult, BicScorer

logger = logging.getLogger("dagvet.engine")

PROPOSER_NAMES = ("greedy", "random", "llm")
MEMORY_MODES = ("clear_on_accept", "cumulative")


class Outcome(str, Enum):
    ACCEPTED = "ACCEPTED"
    REJECTED_STRUCTURAL = "REJECTED_STRUCTURAL"
    REJECTED_STATISTICAL = "REJECTED_STATISTICAL"
    REJECTED_MALFORMED = "REJECTED_MALFORMED"


class StopReason(str, Enum):
    HORIZON = "HORIZON"
    PATIENCE = "PATIENCE"
    PROPOSER_EXHAUSTED = "PROPOSER_EXHAUSTED"


@dataclass(frozen=True)
class RunConfig:
    """Loop parameters; ``max_iterations=None`` resolves to the variable count."""

    max_iterations: int | None = None
    patience: int = 5
    epsilon: float = 1e-9
    seed: int = 0
    proposer: str = "greedy"
    endpoint: EndpointConfig | None = None
    memory_mode: str = "clear_on_accept"
    total_samples: int = 5000
    intervention_mode: str = "per_sample"
    penalty_mode: str = "total"
    domain: str = ""
    domain_context: str = ""

    def __post_init__(self) -> None:
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.memory_mode not in MEMORY_MODES:
            raise ValueError(f"memory_mode must be one of {MEMORY_MODES}")


@dataclass(frozen=True)
class TrajectoryEntry:
    iteration: int
    proposal: Proposal | None
    outcome: Outcome
    delta_bic: float | None
    bic_after: float
    shd_after: int | None = None


@dataclass(frozen=True)
class RunResult:
    """Outcome of one refine run; ``graph`` is the lowest-BIC state visited."""

    graph: CausalGraph
    bic_result: BicResult
    init_bic: BicResult
    trajectory: tuple[TrajectoryEntry, ...]
    stop_reason: StopReason

    @property
    def counts(self) -> dict[str, int]:
        out = {outcome.value: 0 for outcome in Outcome}
        for entry in self.trajectory:
            out[entry.outcome.value] += 1
        return out

    @property
    def n_proposals(self) -> int:
        return len(self.trajectory)


class RunAborted(RuntimeError):
    """A run-fatal proposer error; carries the trajectory recorded so far."""

    def __init__(self, message: str, trajectory: tuple[TrajectoryEntry, ...]):
        self.trajectory = trajectory
        super().__init__(message)


def hybrid_init(
    candidates: list[tuple[str, CausalGraph]], scorer: BicScorer
) -> tuple[CausalGraph, BicResult, str]:
    """Pick the candidate with the lowest BIC; exact ties keep the earliest.

    By convention, data-driven candidates are listed before LLM candidates,
    so a tie resolves toward the data-driven side.
    """
    if not candidates:
        raise ValueError("need at least one initialization candidate")
    best: tuple[CausalGraph, BicResult, str] | None = None
    for label, graph in candidates:
        result = scorer.bic(graph)
        if best is None or result.bic < best[1].bic:
            best = (graph, result, label)
    assert best is not None
    return best


def _update_dossier(
    dossier: list[tuple[str, str]], proposal: Proposal
) -> None:
    op = proposal.op
    pair = (op.parent, op.child)
    if op.kind is EditKind.ADD:
        if pair not in dossier:
            dossier.append(pair)
    elif op.kind is EditKind.DELETE:
        if pair in dossier:
            dossier.remove(pair)
    else:
        if pair in dossier:
            dossier.remove(pair)
        dossier.append((op.child, op.parent))


def refine(
    init: CausalGraph,
    scorer: BicScorer,
    proposer: Proposer,
    config: RunConfig = RunConfig(),
    truth: CausalGraph | None = None,
) -> RunResult:
    """Run the verify-and-refine loop from ``init``.

    Per iteration: obtain one proposal; structurally invalid or malformed
    proposals are logged to memory without touching the patience counter;
    valid proposals are accepted iff delta BIC > epsilon, which resets the
    counter and clears the memory. SHD against ``truth`` is tracked per
    iteration when a truth graph is supplied.
    """
    horizon = config.max_iterations if config.max_iterations is not None else init.d
    init_bic = scorer.bic(init)
    current, current_bic = init, init_bic
    best, best_bic = init, init_bic
    memory: list[RejectionRecord] = []
    dossier: list[tuple[str, str]] = []
    trajectory: list[TrajectoryEntry] = []
    previous_reasoning = ""
    consecutive_statistical = 0
    stop = StopReason.HORIZON

    def shd_now() -> int | None:
        return structure_metrics(current, truth).shd if truth is not None else None

    for t in range(1, horizon + 1):
        ctx = ProposerContext(
            graph=current,
            iteration=t,
            current_bic=current_bic.bic,
            memory=tuple(memory),
            confirmed_edges=tuple(dossier),
            domain=config.domain,
            domain_context=config.domain_context,
            previous_reasoning=previous_reasoning,
        )
        try:
            proposal = proposer.propose(ctx)
        except ProposerExhausted:
            stop = StopReason.PROPOSER_EXHAUSTED
            break
        except EndpointError as exc:
            raise RunAborted(str(exc), tuple(trajectory)) from exc
        except MalformedResponseError as exc:
            memory.append(RejectionRecord(RejectionKind.MALFORMED, detail=str(exc)))
            trajectory.append(
                TrajectoryEntry(
                    t, None, Outcome.REJECTED_MALFORMED, None, current_bic.bic, shd_now()
                )
            )
            continue

        previous_reasoning = proposal.reasoning
        verdict = check_structural(current, proposal.op)
        if not verdict.valid:
            memory.append(
                RejectionRecord(
                    RejectionKind.STRUCTURAL, op=proposal.op, verdict_reason=verdict.reason
                )
            )
            trajectory.append(
                TrajectoryEntry(
                    t, proposal, Outcome.REJECTED_STRUCTURAL, None, current_bic.bic, shd_now()
                )
            )
            continue

        delta = scorer.delta_bic(current, proposal.op)
        if delta > config.epsilon:
            current = apply_edit(current, proposal.op)
            current_bic = scorer.bic(current)
            consecutive_statistical = 0
            if config.memory_mode == "clear_on_accept":
                memory.clear()
            _update_dossier(dossier, proposal)
            if current_bic.bic < best_bic.bic:
                best, best_bic = current, current_bic
            trajectory.append(
                TrajectoryEntry(t, proposal, Outcome.ACCEPTED, delta, current_bic.bic, shd_now())
            )
        else:
            memory.append(
                RejectionRecord(RejectionKind.STATISTICAL, op=proposal.op, delta_bic=delta)
            )
            consecutive_statistical += 1
            trajectory.append(
                TrajectoryEntry(
                    t, proposal, Outcome.REJECTED_STATISTICAL, delta, current_bic.bic, shd_now()
                )
            )
            if consecutive_statistical >= config.patience:
                stop = StopReason.PATIENCE
                break

    return RunResult(
        graph=best,
        bic_result=best_bic,
        init_bic=init_bic,
        trajectory=tuple(trajectory),
        stop_reason=stop,
    )


def greedy_warm_start(
    scorer: BicScorer, start: CausalGraph, max_accepts: int = 10, epsilon: float = 1e-9
) -> CausalGraph:
    """Up to ``max_accepts`` greedy improvements from ``start`` (no memory)."""
    proposer = GreedyProposer(scorer)
    current = start
    current_bic = scorer.bic(current).bic
    for t in range(1, max_accepts + 1):
        try:
            proposal = proposer.propose(
                ProposerContext(graph=current, iteration=t, current_bic=current_bic)
            )
        except ProposerExhausted:
            break
        delta = scorer.delta_bic(current, proposal.op)
        if delta <= epsilon:
            break
        current = apply_edit(current, proposal.op)
        current_bic -= delta
    return current


@dataclass(frozen=True)
class PipelineResult:
    run: RunResult
    metrics: StructureMetrics
    init_label: str
    init_metrics: StructureMetrics
    truth: CausalGraph
    config: RunConfig


def _load_network(network: str | Path | DiscreteNetwork) -> DiscreteNetwork:
    if isinstance(network, DiscreteNetwork):
        return network
    text = str(network)
    if text.lower() in BUNDLED_NETWORKS:
        return load_bif(bundled_network_path(text.lower()))
    return load_bif(network)


def build_proposer(
    config: RunConfig, scorer: BicScorer, client: ChatClient | None = None
) -> Proposer:
    if config.proposer == "greedy":
        return GreedyProposer(scorer)
    if config.proposer == "random":
        return RandomProposer(config.seed)
    if config.proposer == "llm":
        if client is None:
            raise ValueError("the llm proposer requires an endpoint configuration")
        return LlmProposer(client)
    raise ValueError(f"unknown proposer {config.proposer!r}; choose from {PROPOSER_NAMES}")


def run_pipeline(
    network: str | Path | DiscreteNetwork,
    baseline: str | Path | None = None,
    config: RunConfig = RunConfig(),
) -> PipelineResult:
    """End-to-end discovery: sample a mixed dataset from the ground-truth
    network, pick the best-scoring initial graph among the available
    candidates, refine it, and evaluate against the true skeleton.

    ``network`` may be a bundled name, a BIF path, or a parsed network;
    ``baseline`` is an optional edge-list file from an external discovery
    tool. Without a baseline or an endpoint, the candidate set is a greedy
    warm start plus the edgeless graph, so initialization stays meaningful
    offline. All randomness derives from ``config.seed``.
    """
    net = _load_network(network)
    truth = network_skeleton(net)
    data = build_mixed_dataset(
        net, total=config.total_samples, seed=config.seed, mode=config.intervention_mode
    )
    scorer = BicScorer(data, penalty_mode=config.penalty_mode)
    empty = CausalGraph(truth.variables)

    client: ChatClient | None = None
    candidates: list[tuple[str, CausalGraph]] = []
    if baseline is not None:
        with open(baseline, "r", encoding="utf-8") as fh:
            stat = read_edge_list(fh.read())
        if stat.variables != truth.variables:
            raise ValueError(
                "baseline edge list and network disagree on the variable table"
            )
        candidates.append(("stat", stat))
    if config.endpoint is not None:
        client = ChatClient(config.endpoint)
        candidates.append(
            (
                "llm",
                llm_init(
                    client,
                    truth.variables,
                    domain=config.domain,
                    domain_context=config.domain_context,
                ),
            )
        )
    if not candidates:
        candidates.append(("warmstart", greedy_warm_start(scorer, empty)))
    candidates.append(("empty", empty))

    init, _, label = hybrid_init(candidates, scorer)
    proposer = build_proposer(config, scorer, client)
    run = refine(init, scorer, proposer, config, truth=truth)
    return PipelineResult(
        run=run,
        metrics=structure_metrics(run.graph, truth),
        init_label=label,
        init_metrics=structure_metrics(init, truth),
        truth=truth,
        config=config,
    )


# ---------------------------------------------------------------------------
# Run artifacts
# ---------------------------------------------------------------------------

TRAJECTORY_COLUMNS = (
    "iteration",
    "op_kind",
    "parent",
    "child",
    "outcome",
    "delta_bic",
    "bic_after",
    "shd_after",
)


def write_trajectory_csv(result: RunResult, path: str | Path) -> None:
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for e in result.trajectory:
        op = e.proposal.op if e.proposal is not None else None
        lines.append(
            ",".join(
                [
                    str(e.iteration),
                    op.kind.value if op else "",
                    op.parent if op else "",
                    op.child if op else "",
                    e.outcome.value,
                    f"{e.delta_bic:.6f}" if e.delta_bic is not None else "",
                    f"{e.bic_after:.6f}",
                    str(e.shd_after) if e.shd_after is not None else "",
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_summary(result: RunResult, metrics: StructureMetrics | None = None) -> dict:
    summary = {
        "stop_reason": result.stop_reason.value,
        "n_proposals": result.n_proposals,
        "counts": result.counts,
        "init_bic": result.init_bic.bic,
        "final_bic": result.bic_result.bic,
        "final_loglik": result.bic_result.loglik,
        "final_k_eff": result.bic_result.k_eff,
        "n": result.bic_result.n,
        "edges": [f"{p}\t{c}" for p, c in result.graph.edge_names()],
    }
    if metrics is not None:
        summary["metrics"] = metrics.as_dict()
    return summary


def write_run_summary(
    result: RunResult, path: str | Path, metrics: StructureMetrics | None = None
) -> None:
    Path(path).write_text(
        json.dumps(run_summary(result, metrics), indent=2) + "\n", encoding="utf-8"
    )
