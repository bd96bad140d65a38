"""Ground-truth discrete Bayesian networks: BIF parsing and edge-list exchange.

The BIF dialect accepted here is the one used by the public network
repository files: ``network``/``variable``/``probability`` blocks, discrete
variables only, with probabilities given either as a flat ``table`` or as
per-row ``( state, ... ) p1, p2, ...;`` entries. ``property`` statements and
comments are skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .graph import CausalGraph, CyclicGraphError, detect_cycle

ROW_SUM_TOLERANCE = 1e-6

BUNDLED_NETWORKS = ("cancer", "asia", "child", "alarm")


class BifParseError(ValueError):
    """Syntax or semantic error in a BIF document, with source position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class EdgeListError(ValueError):
    """Malformed edge-list document."""


@dataclass(frozen=True)
class DiscreteVariable:
    """A named discrete variable with an ordered list of state names."""

    name: str
    states: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.states) < 2:
            raise ValueError(f"variable {self.name!r} needs at least 2 states")
        if len(set(self.states)) != len(self.states):
            raise ValueError(f"variable {self.name!r} has duplicate state names")

    @property
    def cardinality(self) -> int:
        return len(self.states)


@dataclass(frozen=True, eq=False)
class ConditionalTable:
    """CPT of one child given its (possibly empty) ordered parent list.

    ``probs`` has one row per parent configuration and one column per child
    state. Configurations are enumerated in row-major order over the parents
    as declared, i.e. the last parent varies fastest.
    """

    child: str
    parents: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "parents", tuple(self.parents))
        if probs.ndim != 2:
            raise ValueError(f"CPT for {self.child!r} must be 2-D (configs x states)")
        if np.any(probs < 0):
            raise ValueError(f"CPT for {self.child!r} has negative entries")
        sums = probs.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)[0]
        if bad.size:
            raise ValueError(
                f"CPT row {bad[0]} for {self.child!r} sums to {sums[bad[0]]:.7g}"
            )
        # Renormalize exactly; published files carry rounded decimals.
        object.__setattr__(self, "probs", probs / sums[:, None])
        self.probs.setflags(write=False)


@dataclass(frozen=True, eq=False)
class DiscreteNetwork:
    """Variables plus one CPT per variable; the implied structure is a DAG."""

    variables: tuple[DiscreteVariable, ...]
    tables: tuple[ConditionalTable, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        by_name = {v.name: v for v in self.variables}
        if len(by_name) != len(self.variables):
            raise ValueError("duplicate variable name in network")
        by_child = {t.child: t for t in self.tables}
        missing = [v.name for v in self.variables if v.name not in by_child]
        if missing:
            raise ValueError(f"no probability table for variable {missing[0]!r}")
        if len(self.tables) != len(self.variables):
            extras = set(by_child) - set(by_name)
            raise ValueError(f"table for undeclared variable {sorted(extras)[0]!r}")
        for table in self.tables:
            child = by_name[table.child]
            n_configs = 1
            for p in table.parents:
                if p not in by_name:
                    raise ValueError(
                        f"table for {table.child!r} names unknown parent {p!r}"
                    )
                n_configs *= by_name[p].cardinality
            if table.probs.shape != (n_configs, child.cardinality):
                raise ValueError(
                    f"CPT for {table.child!r} has shape {table.probs.shape}, "
                    f"expected {(n_configs, child.cardinality)}"
                )
        # Normalize table order to variable order.
        object.__setattr__(
            self, "tables", tuple(by_child[v.name] for v in self.variables)
        )
        cycle = detect_cycle(network_skeleton(self))
        if cycle is not None:
            raise CyclicGraphError(cycle)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.variables)

    @property
    def d(self) -> int:
        return len(self.variables)

    def table_for(self, name: str) -> ConditionalTable:
        return self.tables[self.names.index(name)]


def network_skeleton(net: DiscreteNetwork) -> CausalGraph:
    """The directed graph {(p, c) : p in parents(c)} over the network's variables."""
    names = net.names
    return CausalGraph.from_edges(
        names, [(p, t.child) for t in net.tables for p in t.parents]
    )


# ---------------------------------------------------------------------------
# BIF parsing
# ---------------------------------------------------------------------------

_PUNCT = set("{}()[],;|")


@dataclass(frozen=True)
class _Token:
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
        elif text.startswith("//", i):
            while i < n and text[i] != "\n":
                advance(1)
        elif text.startswith("/*", i):
            start_line, start_col = line, col
            advance(2)
            while i < n and not text.startswith("*/", i):
                advance(1)
            if i >= n:
                raise BifParseError("unterminated comment", start_line, start_col)
            advance(2)
        elif ch in _PUNCT:
            tokens.append(_Token(ch, line, col))
            advance(1)
        else:
            start, start_line, start_col = i, line, col
            while i < n and text[i] not in " \t\r\n" and text[i] not in _PUNCT:
                advance(1)
            tokens.append(_Token(text[start:i], start_line, start_col))
    return tokens


class _TokenStream:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0

    def peek(self) -> _Token | None:
        return self._tokens[self._pos] if self._pos < len(self._tokens) else None

    def next(self, expected: str | None = None) -> _Token:
        tok = self.peek()
        if tok is None:
            last = self._tokens[-1] if self._tokens else None
            raise BifParseError(
                f"unexpected end of input (expected {expected or 'more input'})",
                last.line if last else 1,
                last.column if last else 1,
            )
        if expected is not None and tok.text != expected:
            raise BifParseError(
                f"expected {expected!r}, found {tok.text!r}", tok.line, tok.column
            )
        self._pos += 1
        return tok

    def next_if(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text:
            self._pos += 1
            return True
        return False

    def error(self, message: str) -> BifParseError:
        tok = self.peek()
        if tok is None:
            return BifParseError(message)
        return BifParseError(message, tok.line, tok.column)


def _skip_block(ts: _TokenStream) -> None:
    ts.next("{")
    depth = 1
    while depth:
        tok = ts.next()
        if tok.text == "{":
            depth += 1
        elif tok.text == "}":
            depth -= 1


def _skip_statement(ts: _TokenStream) -> None:
    while ts.next().text != ";":
        pass


def _parse_number(tok: _Token) -> float:
    try:
        value = float(tok.text)
    except ValueError:
        raise BifParseError(f"expected a number, found {tok.text!r}", tok.line, tok.column)
    return value


def _parse_variable(ts: _TokenStream) -> DiscreteVariable:
    name_tok = ts.next()
    ts.next("{")
    states: tuple[str, ...] | None = None
    while not ts.next_if("}"):
        tok = ts.next()
        if tok.text == "type":
            kind = ts.next()
            if kind.text != "discrete":
                raise BifParseError(
                    f"only discrete variables are supported, found {kind.text!r}",
                    kind.line,
                    kind.column,
                )
            ts.next("[")
            count_tok = ts.next()
            declared = int(_parse_number(count_tok))
            ts.next("]")
            ts.next("{")
            names: list[str] = []
            while not ts.next_if("}"):
                state = ts.next()
                if state.text == ",":
                    continue
                names.append(state.text)
            ts.next(";")
            if len(names) != declared:
                raise BifParseError(
                    f"variable {name_tok.text!r} declares {declared} states "
                    f"but lists {len(names)}",
                    count_tok.line,
                    count_tok.column,
                )
            states = tuple(names)
        elif tok.text == "property":
            _skip_statement(ts)
        else:
            raise BifParseError(
                f"unexpected token {tok.text!r} in variable block", tok.line, tok.column
            )
    if states is None:
        raise BifParseError(
            f"variable {name_tok.text!r} has no type declaration",
            name_tok.line,
            name_tok.column,
        )
    try:
        return DiscreteVariable(name_tok.text, states)
    except ValueError as exc:
        raise BifParseError(str(exc), name_tok.line, name_tok.column) from None


def _parse_name_list(ts: _TokenStream, closer: str) -> list[str]:
    names: list[str] = []
    while not ts.next_if(closer):
        tok = ts.next()
        if tok.text == ",":
            continue
        names.append(tok.text)
    return names


def _parse_probability(
    ts: _TokenStream, variables: dict[str, DiscreteVariable]
) -> ConditionalTable:
    ts.next("(")
    head_tok = ts.peek()
    header = _parse_name_list(ts, ")")
    if not header:
        raise ts.error("empty probability header")
    child_name = header[0]
    parents: list[str]
    if "|" in header:
        bar = header.index("|")
        if bar != 1:
            raise BifParseError(
                "probability header must be (child | parents)",
                head_tok.line,
                head_tok.column,
            )
        parents = header[bar + 1 :]
    else:
        if len(header) > 1:
            raise BifParseError(
                "probability header lists several children; only (child | parents) "
                "is supported",
                head_tok.line,
                head_tok.column,
            )
        parents = []
    if child_name not in variables:
        raise BifParseError(
            f"probability block for undeclared variable {child_name!r}",
            head_tok.line,
            head_tok.column,
        )
    for p in parents:
        if p not in variables:
            raise BifParseError(
                f"unknown parent {p!r} for {child_name!r}", head_tok.line, head_tok.column
            )
    child = variables[child_name]
    parent_cards = [variables[p].cardinality for p in parents]
    n_configs = int(np.prod(parent_cards)) if parents else 1
    rows = np.full((n_configs, child.cardinality), np.nan)

    ts.next("{")
    while not ts.next_if("}"):
        tok = ts.peek()
        assert tok is not None
        if tok.text == "table":
            ts.next()
            values: list[float] = []
            while True:
                vt = ts.next()
                if vt.text == ";":
                    break
                if vt.text == ",":
                    continue
                values.append(_parse_number(vt))
            if len(values) != n_configs * child.cardinality:
                raise BifParseError(
                    f"table for {child_name!r} lists {len(values)} values, expected "
                    f"{n_configs * child.cardinality}",
                    tok.line,
                    tok.column,
                )
            rows[:] = np.asarray(values).reshape(n_configs, child.cardinality)
        elif tok.text == "(":
            ts.next("(")
            state_names = _parse_name_list(ts, ")")
            if len(state_names) != len(parents):
                raise BifParseError(
                    f"row for {child_name!r} names {len(state_names)} parent states, "
                    f"expected {len(parents)}",
                    tok.line,
                    tok.column,
                )
            idx = []
            for p, s in zip(parents, state_names):
                try:
                    idx.append(variables[p].states.index(s))
                except ValueError:
                    raise BifParseError(
                        f"unknown state {s!r} for parent {p!r}", tok.line, tok.column
                    ) from None
            config = int(np.ravel_multi_index(idx, parent_cards)) if parents else 0
            values = []
            while True:
                vt = ts.next()
                if vt.text == ";":
                    break
                if vt.text == ",":
                    continue
                values.append(_parse_number(vt))
            if len(values) != child.cardinality:
                raise BifParseError(
                    f"row for {child_name!r} lists {len(values)} probabilities, "
                    f"expected {child.cardinality}",
                    tok.line,
                    tok.column,
                )
            if not np.all(np.isnan(rows[config])):
                raise BifParseError(
                    f"duplicate row for parent configuration {tuple(state_names)} "
                    f"of {child_name!r}",
                    tok.line,
                    tok.column,
                )
            rows[config] = values
        elif tok.text == "property":
            ts.next()
            _skip_statement(ts)
        else:
            raise BifParseError(
                f"unexpected token {tok.text!r} in probability block",
                tok.line,
                tok.column,
            )

    if np.any(np.isnan(rows)):
        first = int(np.nonzero(np.isnan(rows).any(axis=1))[0][0])
        raise BifParseError(
            f"missing row for parent configuration {first} of {child_name!r}"
        )
    sums = rows.sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)[0]
    if bad.size:
        raise BifParseError(
            f"row {int(bad[0])} for {child_name!r} sums to {sums[bad[0]]:.7g}"
        )
    if np.any(rows < 0):
        raise BifParseError(f"negative probability in table for {child_name!r}")
    return ConditionalTable(child_name, tuple(parents), rows)


def parse_bif(text: str) -> DiscreteNetwork:
    """Parse a complete BIF document into a :class:`DiscreteNetwork`.

    Variable declaration order defines the network's variable indices.
    Raises :class:`BifParseError` with source position on syntax errors,
    rows not summing to 1 within 1e-6, duplicate variables, unknown parents,
    or a cyclic structure.
    """
    ts = _TokenStream(_tokenize(text))
    variables: dict[str, DiscreteVariable] = {}
    order: list[str] = []
    tables: dict[str, ConditionalTable] = {}
    while ts.peek() is not None:
        tok = ts.next()
        if tok.text == "network":
            while ts.peek() is not None and ts.peek().text != "{":
                ts.next()
            _skip_block(ts)
        elif tok.text == "variable":
            var = _parse_variable(ts)
            if var.name in variables:
                raise BifParseError(
                    f"duplicate variable {var.name!r}", tok.line, tok.column
                )
            variables[var.name] = var
            order.append(var.name)
        elif tok.text == "probability":
            table = _parse_probability(ts, variables)
            if table.child in tables:
                raise BifParseError(
                    f"duplicate probability block for {table.child!r}",
                    tok.line,
                    tok.column,
                )
            tables[table.child] = table
        else:
            raise BifParseError(
                f"unexpected token {tok.text!r} at top level", tok.line, tok.column
            )
    if not order:
        raise BifParseError("document declares no variables")
    missing = [name for name in order if name not in tables]
    if missing:
        raise BifParseError(f"no probability block for variable {missing[0]!r}")
    try:
        return DiscreteNetwork(
            tuple(variables[name] for name in order),
            tuple(tables[name] for name in order),
        )
    except CyclicGraphError:
        raise
    except ValueError as exc:
        raise BifParseError(str(exc)) from None


def load_bif(path) -> DiscreteNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_bif(fh.read())


def bundled_network_path(name: str):
    """Filesystem path of a network shipped with the package."""
    key = name.lower()
    if key not in BUNDLED_NETWORKS:
        raise KeyError(
            f"unknown bundled network {name!r}; choose from {BUNDLED_NETWORKS}"
        )
    return resources.files("dagvet").joinpath("data", f"{key}.bif")

def load_bundled_network(name: str) -> DiscreteNetwork:
    return parse_bif(bundled_network_path(name).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Edge-list exchange (outputs of external structure-discovery tools)
# ---------------------------------------------------------------------------

EDGE_LIST_HEADER = "# variables:"


def write_edge_list(graph: CausalGraph) -> str:
    """Tab-separated edge list with a `# variables:` header fixing the table."""
    lines = [f"{EDGE_LIST_HEADER} {','.join(graph.variables)}"]
    for p, c in graph.edge_names():
        lines.append(f"{p}\t{c}")
    return "\n".join(lines) + "\n"


def read_edge_list(text: str) -> CausalGraph:
    """Inverse of :func:`write_edge_list`; `read(write(g)) == g`.

    Unknown variable names, duplicate edge lines, and a missing header are
    rejected.
    """
    variables: tuple[str, ...] | None = None
    edges: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith(EDGE_LIST_HEADER):
                if variables is not None:
                    raise EdgeListError(f"line {lineno}: repeated variables header")
                names = [v.strip() for v in line[len(EDGE_LIST_HEADER):].split(",")]
                names = [v for v in names if v]
                if not names:
                    raise EdgeListError(f"line {lineno}: empty variables header")
                variables = tuple(names)
            continue
        if variables is None:
            raise EdgeListError(
                f"line {lineno}: edge before the '{EDGE_LIST_HEADER}' header"
            )
        parts = line.split("\t")
        if len(parts) != 2:
            raise EdgeListError(
                f"line {lineno}: expected 'parent<TAB>child', got {raw!r}"
            )
        parent, child = parts[0].strip(), parts[1].strip()
        for name in (parent, child):
            if name not in variables:
                raise EdgeListError(f"line {lineno}: unknown variable {name!r}")
        if (parent, child) in seen:
            raise EdgeListError(f"line {lineno}: duplicate edge {parent} -> {child}")
        seen.add((parent, child))
        edges.append((parent, child))
    if variables is None:
        raise EdgeListError(f"missing '{EDGE_LIST_HEADER}' header")
    return CausalGraph.from_edges(variables, edges)
