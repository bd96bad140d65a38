"""Directed causal graphs, atomic edge edits, and structural evaluation.

Graphs are immutable values: every edit produces a new graph, so a search
engine can score a candidate while keeping the current state. Acyclicity is
not enforced by the type (cycle breaking needs to hold cyclic graphs), but
every edit accepted through :func:`apply_edit` yields a DAG.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence


class GraphError(ValueError):
    """Raised for operations on graphs that violate their preconditions."""


class CyclicGraphError(GraphError):
    """Raised when an operation that requires a DAG receives a cyclic graph."""

    def __init__(self, cycle: Sequence[str]):
        self.cycle = list(cycle)
        super().__init__(f"graph contains a cycle: {' -> '.join(self.cycle)}")


class EditKind(str, Enum):
    ADD = "ADD"
    DELETE = "DELETE"
    REVERSE = "REVERSE"


# Tie-break order used when several candidate edits score equally.
_KIND_ORDER = {EditKind.ADD: 0, EditKind.DELETE: 1, EditKind.REVERSE: 2}


@dataclass(frozen=True)
class EditOp:
    """One atomic edit: ADD/DELETE/REVERSE of a directed edge parent -> child.

    For REVERSE, (parent, child) names the edge direction that currently
    exists. Names are plain strings so that proposals referencing unknown
    variables can still be represented (and rejected by the checker).
    """

    kind: EditKind
    parent: str
    child: str

    def inverse(self) -> "EditOp":
        """The edit that undoes this one (REVERSE maps to the flipped edge)."""
        if self.kind is EditKind.ADD:
            return EditOp(EditKind.DELETE, self.parent, self.child)
        if self.kind is EditKind.DELETE:
            return EditOp(EditKind.ADD, self.parent, self.child)
        return EditOp(EditKind.REVERSE, self.child, self.parent)

    def __str__(self) -> str:
        return f"{self.kind.value} {self.parent} -> {self.child}"


class VerdictReason(str, Enum):
    CYCLE = "CYCLE"
    EDGE_ABSENT = "EDGE_ABSENT"
    EDGE_PRESENT = "EDGE_PRESENT"
    UNKNOWN_VARIABLE = "UNKNOWN_VARIABLE"
    SELF_LOOP = "SELF_LOOP"


@dataclass(frozen=True)
class StructuralVerdict:
    valid: bool
    reason: VerdictReason | None = None

    def __post_init__(self) -> None:
        if self.valid == (self.reason is not None):
            raise ValueError("reason must be present exactly when valid is False")


_VALID = StructuralVerdict(True)


@dataclass(frozen=True)
class CausalGraph:
    """Named-variable directed graph with set-valued edges.

    ``variables`` fixes the 0-based index of each name; ``edges`` holds
    ``(parent_index, child_index)`` pairs.
    """

    variables: tuple[str, ...]
    edges: frozenset[tuple[int, int]] = frozenset()
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "edges", frozenset(self.edges))
        index = {name: i for i, name in enumerate(self.variables)}
        if len(index) != len(self.variables):
            raise GraphError("variable names must be unique")
        if any(not name for name in self.variables):
            raise GraphError("variable names must be nonempty")
        d = len(self.variables)
        for p, c in self.edges:
            if not (0 <= p < d and 0 <= c < d):
                raise GraphError(f"edge ({p}, {c}) references an unknown variable index")
            if p == c:
                raise GraphError(f"self-loop on variable {self.variables[p]!r}")
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_edges(
        cls, variables: Sequence[str], edges: Iterable[tuple[str, str]] = ()
    ) -> "CausalGraph":
        """Build a graph from (parent_name, child_name) pairs."""
        index = {name: i for i, name in enumerate(variables)}
        idx_edges = set()
        for p, c in edges:
            if p not in index or c not in index:
                raise GraphError(f"edge ({p!r}, {c!r}) references an unknown variable")
            idx_edges.add((index[p], index[c]))
        return cls(tuple(variables), frozenset(idx_edges))

    @property
    def d(self) -> int:
        return len(self.variables)

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise GraphError(f"unknown variable {name!r}") from None

    def has_variable(self, name: str) -> bool:
        return name in self._index

    def has_edge(self, parent: str, child: str) -> bool:
        return (
            parent in self._index
            and child in self._index
            and (self._index[parent], self._index[child]) in self.edges
        )

    def parents_of(self, child: int) -> tuple[int, ...]:
        return tuple(sorted(p for p, c in self.edges if c == child))

    def children_of(self, parent: int) -> tuple[int, ...]:
        return tuple(sorted(c for p, c in self.edges if p == parent))

    def parent_map(self) -> dict[int, tuple[int, ...]]:
        """Parent index tuple per child index, for all variables."""
        out: dict[int, list[int]] = {i: [] for i in range(self.d)}
        for p, c in self.edges:
            out[c].append(p)
        return {i: tuple(sorted(ps)) for i, ps in out.items()}

    def edge_names(self) -> list[tuple[str, str]]:
        """Edges as name pairs, sorted by (parent index, child index)."""
        return [
            (self.variables[p], self.variables[c]) for p, c in sorted(self.edges)
        ]

    def replace_edges(self, edges: Iterable[tuple[int, int]]) -> "CausalGraph":
        return CausalGraph(self.variables, frozenset(edges))


def check_structural(graph: CausalGraph, op: EditOp) -> StructuralVerdict:
    """Gatekeeper for atomic edits; every outcome is a verdict, never a raise.

    Rejection reasons: unknown variable, self-loop, adding a present edge,
    deleting/reversing an absent edge, or introducing a directed cycle.
    """
    if not graph.has_variable(op.parent) or not graph.has_variable(op.child):
        return StructuralVerdict(False, VerdictReason.UNKNOWN_VARIABLE)
    if op.parent == op.child:
        return StructuralVerdict(False, VerdictReason.SELF_LOOP)
    p = graph.index_of(op.parent)
    c = graph.index_of(op.child)
    present = (p, c) in graph.edges
    if op.kind is EditKind.ADD:
        if present:
            return StructuralVerdict(False, VerdictReason.EDGE_PRESENT)
        if _has_path(graph, c, p):
            return StructuralVerdict(False, VerdictReason.CYCLE)
    elif op.kind is EditKind.DELETE:
        if not present:
            return StructuralVerdict(False, VerdictReason.EDGE_ABSENT)
    else:  # REVERSE
        if not present:
            return StructuralVerdict(False, VerdictReason.EDGE_ABSENT)
        # the new edge c -> p closes a loop iff a path p ~> c survives
        # once the old edge p -> c is removed
        pruned = graph.replace_edges(graph.edges - {(p, c)})
        if _has_path(pruned, p, c):
            return StructuralVerdict(False, VerdictReason.CYCLE)
    return _VALID


def apply_edit(graph: CausalGraph, op: EditOp) -> CausalGraph:
    """Apply a structurally valid edit, returning a new graph.

    Raises :class:`EditRejected` carrying the verdict when the edit is
    invalid; the input graph is never modified.
    """
    verdict = check_structural(graph, op)
    if not verdict.valid:
        raise EditRejected(op, verdict)
    p = graph.index_of(op.parent)
    c = graph.index_of(op.child)
    if op.kind is EditKind.ADD:
        return graph.replace_edges(graph.edges | {(p, c)})
    if op.kind is EditKind.DELETE:
        return graph.replace_edges(graph.edges - {(p, c)})
    return graph.replace_edges((graph.edges - {(p, c)}) | {(c, p)})


class EditRejected(GraphError):
    """A structurally invalid edit, carrying the checker's verdict."""

    def __init__(self, op: EditOp, verdict: StructuralVerdict):
        self.op = op
        self.verdict = verdict
        super().__init__(f"{op} rejected: {verdict.reason.value}")


def _has_path(graph: CausalGraph, source: int, target: int) -> bool:
    """True when a directed path source ~> target exists (source == target counts)."""
    if source == target:
        return True
    children: dict[int, list[int]] = {i: [] for i in range(graph.d)}
    for p, c in graph.edges:
        children[p].append(c)
    seen = {source}
    stack = [source]
    while stack:
        node = stack.pop()
        for nxt in children[node]:
            if nxt == target:
                return True
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def detect_cycle(graph: CausalGraph) -> list[str] | None:
    """Find a directed cycle by DFS with an explicit recursion stack.

    Returns the cycle as a vertex name sequence ``v0 .. vm`` with
    ``v0 == vm``, rotated to start at its lowest-index vertex, or None for a
    DAG. Neighbors are explored in ascending index order, so the result is
    deterministic for a given variable ordering.
    """
    d = graph.d
    children: dict[int, list[int]] = {i: [] for i in range(d)}
    for p, c in graph.edges:
        children[p].append(c)
    for i in range(d):
        children[i].sort()

    WHITE, GREY, BLACK = 0, 1, 2
    color = [WHITE] * d
    path: list[int] = []

    def visit(u: int) -> list[int] | None:
        color[u] = GREY
        path.append(u)
        for v in children[u]:
            if color[v] == WHITE:
                found = visit(v)
                if found is not None:
                    return found
            elif color[v] == GREY:
                start = path.index(v)
                return path[start:] + [v]
        color[u] = BLACK
        path.pop()
        return None

    for root in range(d):
        if color[root] == WHITE:
            cycle = visit(root)
            if cycle is not None:
                loop = cycle[:-1]
                pivot = loop.index(min(loop))
                rotated = loop[pivot:] + loop[:pivot]
                return [graph.variables[i] for i in rotated + [rotated[0]]]
    return None


def break_cycles(
    graph: CausalGraph, weights: Mapping[tuple[int, int], float] | None = None
) -> CausalGraph:
    """Remove cycles by repeatedly deleting the lightest edge on a cycle.

    Each round detects one cycle and removes the minimum-weight edge lying on
    it (unit weight when a source provides none); ties break lexicographically
    on (parent index, child index). Terminates because every round removes an
    edge.
    """
    current = graph
    while True:
        cycle = detect_cycle(current)
        if cycle is None:
            return current
        idx = [current.index_of(name) for name in cycle]
        cycle_edges = list(zip(idx[:-1], idx[1:]))
        target = min(
            cycle_edges,
            key=lambda e: (1.0 if weights is None else weights.get(e, 1.0), e),
        )
        current = current.replace_edges(current.edges - {target})


def topological_order(graph: CausalGraph) -> list[int]:
    """Kahn's algorithm with an index-ordered ready set (deterministic).

    Raises :class:`CyclicGraphError` carrying a detected cycle path when the
    graph is not a DAG.
    """
    indegree = [0] * graph.d
    for _, c in graph.edges:
        indegree[c] += 1
    ready = sorted(i for i in range(graph.d) if indegree[i] == 0)
    children = {i: graph.children_of(i) for i in range(graph.d)}
    order: list[int] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        changed = False
        for c in children[node]:
            indegree[c] -= 1
            if indegree[c] == 0:
                ready.append(c)
                changed = True
        if changed:
            ready.sort()
    if len(order) != graph.d:
        cycle = detect_cycle(graph)
        assert cycle is not None
        raise CyclicGraphError(cycle)
    return order


@dataclass(frozen=True)
class StructureMetrics:
    """Directed-edge agreement between a predicted graph and the truth."""

    shd: int
    precision: float
    recall: float
    f1: float
    true_positives: int
    false_positives: int
    false_negatives: int

    def as_dict(self) -> dict[str, float]:
        return {
            "shd": self.shd,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
        }


def structure_metrics(predicted: CausalGraph, truth: CausalGraph) -> StructureMetrics:
    """SHD and precision/recall/F1 on directed edges.

    A reversed pair (predicted a->b where the truth has b->a) counts as one
    SHD unit, not an addition plus a deletion. Precision with zero predicted
    edges is 0 by convention; likewise recall with an empty truth.
    """
    if predicted.variables != truth.variables:
        raise GraphError("metrics require graphs over the same variable table")
    pred, true = predicted.edges, truth.edges
    tp = len(pred & true)
    extra = pred - true
    missing = true - pred
    reversed_pairs = sum(1 for p, c in extra if (c, p) in missing)
    fp = len(extra)
    fn = len(missing)
    shd = fp + fn - reversed_pairs
    precision = tp / len(pred) if pred else 0.0
    recall = tp / len(true) if true else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return StructureMetrics(shd, precision, recall, f1, tp, fp, fn)


def to_dot(graph: CausalGraph, name: str = "G") -> str:
    """Graphviz DOT text: all variables declared first, one line per edge."""
    lines = [f"digraph {name} {{"]
    for v in graph.variables:
        lines.append(f'  "{v}";')
    for p, c in graph.edge_names():
        lines.append(f'  "{p}" -> "{c}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
