"""Intervention-aware BIC scoring of candidate graphs against a dataset.

The data-fidelity term is the exact maximized multinomial log-likelihood of
each family (child given its parents), computed only over rows whose child
cell was not intervened: forcing a variable severs it from its parents, so
those rows say nothing about the natural mechanism. The complexity penalty
counts the degrees of freedom of the corresponding discrete network,
(r_child - 1) * prod(r_parent) per family. Lower BIC is better.

The score decomposes over families, so edit deltas rescore only the families
whose parent sets changed; scores are memoized per (child, parent set).
Scoring is pure given (graph, dataset): concurrent reads of a shared scorer
are safe, cache inserts are idempotent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import CausalGraph, EditKind, EditOp, EditRejected, check_structural, detect_cycle
from .sampling import Dataset

PENALTY_MODES = ("total", "per_family")


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class FamilyScore:
    """Masked MLE log-likelihood and parameter count of one family."""

    child: int
    parents: tuple[int, ...]
    loglik: float
    k: int


@dataclass(frozen=True)
class BicResult:
    loglik: float
    k_eff: int
    n: int
    bic: float


def k_eff(graph: CausalGraph, cardinalities: tuple[int, ...] | list[int]) -> int:
    """Effective parameter count: sum over i of (r_i - 1) * prod_{j in PA_i} r_j."""
    cards = [int(c) for c in cardinalities]
    if len(cards) != graph.d:
        raise ScoringError("cardinalities must cover every variable")
    if any(c < 2 for c in cards):
        raise ScoringError("every cardinality must be >= 2")
    total = 0
    parent_map = graph.parent_map()
    for child in range(graph.d):
        k = cards[child] - 1
        for p in parent_map[child]:
            k *= cards[p]
        total += k
    return total


class BicScorer:
    """Scores graphs over one dataset, caching family scores across a search.

    ``penalty_mode="per_family"`` replaces ln(N) with the log of each
    family's own unmasked row count (an ablation switch); ``use_mask=False``
    scores all rows as if none were intervened (diagnostics only), as does
    ``smoothing`` > 0, which plugs additive-smoothed cell probabilities into
    the fidelity term instead of the pure MLE.
    """

    def __init__(
        self,
        data: Dataset,
        *,
        use_mask: bool = True,
        penalty_mode: str = "total",
        smoothing: float = 0.0,
    ):
        if penalty_mode not in PENALTY_MODES:
            raise ScoringError(f"penalty_mode must be one of {PENALTY_MODES}")
        if smoothing < 0:
            raise ScoringError("smoothing must be nonnegative")
        self.data = data
        self.use_mask = use_mask
        self.penalty_mode = penalty_mode
        self.smoothing = smoothing
        self._cards = data.cardinalities
        all_rows = np.arange(data.n)
        self._rows = [
            data.unmasked_rows(i) if use_mask else all_rows for i in range(data.d)
        ]
        self._cache: dict[tuple[int, tuple[int, ...]], FamilyScore] = {}

    # ------------------------------------------------------------------
    @property
    def n(self) -> int:
        return self.data.n

    def _check_graph(self, graph: CausalGraph) -> None:
        if graph.variables != self.data.variables:
            raise ScoringError("graph and dataset disagree on the variable table")

    def family_loglik(self, child: int, parents: tuple[int, ...] | list[int]) -> float:
        """Maximized multinomial log-likelihood of one family (masked rows excluded)."""
        return self.family_score(child, parents).loglik

    def family_score(self, child: int, parents) -> FamilyScore:
        d = self.data.d
        if not 0 <= child < d:
            raise ScoringError(f"unknown child index {child}")
        key_parents = tuple(sorted(int(p) for p in parents))
        if any(not 0 <= p < d for p in key_parents):
            raise ScoringError("unknown parent index")
        if child in key_parents:
            raise ScoringError("a variable cannot parent itself")
        key = (child, key_parents)
        hit = self._cache.get(key)
        if hit is not None:
            return hit

        k = self._cards[child] - 1
        for p in key_parents:
            k *= self._cards[p]
        score = FamilyScore(child, key_parents, self._loglik(child, key_parents), k)
        self._cache[key] = score
        return score

    def _loglik(self, child: int, parents: tuple[int, ...]) -> float:
        rows = self._rows[child]
        if rows.size == 0:
            return 0.0
        values = self.data.values
        r = self._cards[child]
        child_vals = values[rows, child]
        if parents:
            cards = [self._cards[p] for p in parents]
            config = np.ravel_multi_index([values[rows, p] for p in parents], cards)
        else:
            config = np.zeros(rows.size, dtype=np.int64)
        pair = config * r + child_vals
        cells, counts = np.unique(pair, return_counts=True)
        counts = counts.astype(float)
        cfg_of_cell = cells // r
        _, inverse = np.unique(cfg_of_cell, return_inverse=True)
        group = np.bincount(inverse, weights=counts)
        if self.smoothing > 0.0:
            a = self.smoothing
            probs = (counts + a) / (group[inverse] + a * r)
            return float(np.dot(counts, np.log(probs)))
        # sum n_pc ln n_pc - sum n_p ln n_p  ==  sum n_pc ln(n_pc / n_p)
        return float(np.dot(counts, np.log(counts)) - np.dot(group, np.log(group)))

    # ------------------------------------------------------------------
    def k_eff(self, graph: CausalGraph) -> int:
        self._check_graph(graph)
        return k_eff(graph, self._cards)

    def _family_penalty_n(self, child: int) -> float:
        if self.penalty_mode == "total":
            return math.log(self.n) if self.n else 0.0
        rows = self._rows[child].size
        return math.log(rows) if rows else 0.0

    def _family_term(self, child: int, parents) -> float:
        """One family's additive BIC contribution: -2*loglik + k*ln(n)."""
        fam = self.family_score(child, parents)
        return -2.0 * fam.loglik + fam.k * self._family_penalty_n(child)

    def bic(self, graph: CausalGraph) -> BicResult:
        """Total score of a DAG: -2 * loglik + k_eff * ln(N); lower is better."""
        self._check_graph(graph)
        cycle = detect_cycle(graph)
        if cycle is not None:
            raise ScoringError(f"graph is cyclic: {' -> '.join(cycle)}")
        parent_map = graph.parent_map()
        loglik = 0.0
        k_total = 0
        score = 0.0
        for child in range(graph.d):
            fam = self.family_score(child, parent_map[child])
            loglik += fam.loglik
            k_total += fam.k
            score += -2.0 * fam.loglik + fam.k * self._family_penalty_n(child)
        return BicResult(loglik=loglik, k_eff=k_total, n=self.n, bic=score)

    def delta_bic(self, graph: CausalGraph, op: EditOp) -> float:
        """BIC(graph) - BIC(graph after op); positive means the edit improves.

        Rescores only the families whose parent sets change: the edited
        child for ADD/DELETE, both endpoints for REVERSE.
        """
        self._check_graph(graph)
        verdict = check_structural(graph, op)
        if not verdict.valid:
            raise EditRejected(op, verdict)
        p = graph.index_of(op.parent)
        c = graph.index_of(op.child)
        affected = (c,) if op.kind is not EditKind.REVERSE else (c, p)
        delta = 0.0
        for child in affected:
            old_parents = graph.parents_of(child)
            new_parents = set(old_parents)
            if op.kind is EditKind.ADD and child == c:
                new_parents.add(p)
            elif op.kind is EditKind.DELETE and child == c:
                new_parents.discard(p)
            elif op.kind is EditKind.REVERSE:
                if child == c:
                    new_parents.discard(p)
                else:
                    new_parents.add(c)
            delta += self._family_term(child, old_parents) - self._family_term(
                child, tuple(sorted(new_parents))
            )
        return delta
