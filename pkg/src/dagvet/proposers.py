"""Hypothesis generators: one atomic graph edit per round, behind one interface.

Every proposer receives the full round context (current graph, score, error
memory, confirmed edges) and returns exactly one :class:`Proposal`. Compliant
proposers never re-propose an operation listed in the memory; the engine
re-rejects them if they do.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Protocol

import numpy as np

from .graph import CausalGraph, EditKind, EditOp, VerdictReason, check_structural
from .scoring import BicScorer


class ProposerExhausted(RuntimeError):
    """No structurally valid edit remains outside the error memory."""


class ProposalSource(str, Enum):
    LLM = "LLM"
    GREEDY = "GREEDY"
    RANDOM = "RANDOM"


@dataclass(frozen=True)
class Proposal:
    op: EditOp
    source: ProposalSource
    reasoning: str = ""


class RejectionKind(str, Enum):
    STRUCTURAL = "STRUCTURAL"
    STATISTICAL = "STATISTICAL"
    MALFORMED = "MALFORMED"


@dataclass(frozen=True)
class RejectionRecord:
    """One rejected proposal and why; fed back to proposers as a constraint."""

    kind: RejectionKind
    op: EditOp | None = None
    verdict_reason: VerdictReason | None = None
    delta_bic: float | None = None
    detail: str = ""

    def describe(self) -> str:
        if self.kind is RejectionKind.STRUCTURAL:
            return f"{self.op}: structurally invalid ({self.verdict_reason.value})"
        if self.kind is RejectionKind.STATISTICAL:
            return f"{self.op}: no score improvement (delta {self.delta_bic:.4f})"
        return f"malformed proposal: {self.detail}"


@dataclass(frozen=True)
class ProposerContext:
    """Everything a proposer may look at when choosing the next edit."""

    graph: CausalGraph
    iteration: int
    current_bic: float
    memory: tuple[RejectionRecord, ...] = ()
    confirmed_edges: tuple[tuple[str, str], ...] = ()
    domain: str = ""
    domain_context: str = ""
    descriptions: Mapping[str, str] = field(default_factory=dict)
    previous_reasoning: str = ""

    def excluded_ops(self) -> frozenset[EditOp]:
        return frozenset(r.op for r in self.memory if r.op is not None)


class Proposer(Protocol):
    def propose(self, ctx: ProposerContext) -> Proposal: ...


def enumerate_valid_edits(
    graph: CausalGraph, excluded: frozenset[EditOp] = frozenset()
) -> list[EditOp]:
    """All structurally valid edits not in ``excluded``, in canonical order.

    Order is (ADD < DELETE < REVERSE, parent index, child index), which is
    also the tie-break order used by the greedy proposer.
    """
    names = graph.variables
    out: list[EditOp] = []
    for kind in (EditKind.ADD, EditKind.DELETE, EditKind.REVERSE):
        if kind is EditKind.ADD:
            pairs = [
                (p, c)
                for p in range(graph.d)
                for c in range(graph.d)
                if p != c and (p, c) not in graph.edges
            ]
        else:
            pairs = sorted(graph.edges)
        for p, c in pairs:
            op = EditOp(kind, names[p], names[c])
            if op in excluded:
                continue
            if check_structural(graph, op).valid:
                out.append(op)
    return out


class GreedyProposer:
    """Deterministic oracle: exhaustively scores every valid edit and returns
    the one with the largest BIC improvement.

    When nothing improves it still returns the least-bad candidate: the
    engine's statistical rejection then drives early stopping, keeping all
    termination logic in one place.
    """

    def __init__(self, scorer: BicScorer):
        self.scorer = scorer

    def propose(self, ctx: ProposerContext) -> Proposal:
        candidates = enumerate_valid_edits(ctx.graph, ctx.excluded_ops())
        if not candidates:
            raise ProposerExhausted("every structurally valid edit is in memory")
        best_op: EditOp | None = None
        best_delta = -np.inf
        for op in candidates:  # canonical order; strict > keeps the first of a tie
            delta = self.scorer.delta_bic(ctx.graph, op)
            if delta > best_delta:
                best_op, best_delta = op, delta
        assert best_op is not None
        return Proposal(
            best_op,
            ProposalSource.GREEDY,
            reasoning=f"best of {len(candidates)} candidates, delta_bic={best_delta:.6f}",
        )


class RandomProposer:
    """Uniform over the structurally valid edits outside the memory.

    Deterministic given (seed, context): the draw for iteration t uses a
    stream derived from (seed, t), so identical contexts reproduce exactly.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)

    def propose(self, ctx: ProposerContext) -> Proposal:
        candidates = enumerate_valid_edits(ctx.graph, ctx.excluded_ops())
        if not candidates:
            raise ProposerExhausted("every structurally valid edit is in memory")
        rng = np.random.default_rng([self.seed, ctx.iteration])
        op = candidates[int(rng.integers(0, len(candidates)))]
        return Proposal(op, ProposalSource.RANDOM)
