"""Chat-endpoint proposer: prompt rendering, response parsing, transcripts.

The client speaks the ubiquitous JSON-over-HTTP chat-completion protocol:
POST {model, messages, temperature} to a configurable URL, bearer credential
from an environment variable. Request/response pairs are logged verbatim to
a per-run transcript file for audit.

Two failure modes are kept strictly apart: transport problems (timeouts,
connection errors, broken response envelopes) are retried and become fatal
for the run, while well-delivered responses whose content violates the
documented JSON schema raise :class:`MalformedResponseError`, which the
engine records in the error memory without spending patience.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import requests

from .graph import CausalGraph, EditKind, EditOp, break_cycles
from .proposers import Proposal, ProposalSource, ProposerContext

logger = logging.getLogger("dagvet.llm")

DEFAULT_API_KEY_ENV = "DAGVET_API_KEY"
OPERATION_KINDS = {"ADD": EditKind.ADD, "DELETE": EditKind.DELETE, "REVERSE": EditKind.REVERSE}


class EndpointError(RuntimeError):
    """Transport-level failure that survived all retries; fatal for the run."""


class MalformedResponseError(ValueError):
    """Response content that does not follow the documented JSON schema."""

    def __init__(self, message: str, raw: str = ""):
        self.raw = raw
        super().__init__(message)


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    path: str = "/v1/chat/completions"
    temperature: float = 0.6
    timeout: float = 120.0
    max_retries: int = 3
    retry_wait: float = 1.0
    api_key_env: str = DEFAULT_API_KEY_ENV
    transcript_path: str | None = None

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + self.path


class ChatClient:
    """One blocking chat request at a time, with retries and a transcript."""

    def __init__(self, config: EndpointConfig):
        self.config = config

    def complete(self, system: str, user: str) -> str:
        body = {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.config.temperature,
        }
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"

        last_error: Exception | None = None
        for attempt in range(1, self.config.max_retries + 1):
            try:
                response = requests.post(
                    self.config.url,
                    json=body,
                    headers=headers,
                    timeout=self.config.timeout,
                )
                response.raise_for_status()
                payload = response.json()
                content = payload["choices"][0]["message"]["content"]
                if not isinstance(content, str):
                    raise KeyError("message content is not text")
                self._log_transcript(body, response.text)
                return content
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                logger.warning(
                    "chat request attempt %d/%d failed: %s",
                    attempt,
                    self.config.max_retries,
                    exc,
                )
                if attempt < self.config.max_retries:
                    time.sleep(self.config.retry_wait)
        raise EndpointError(
            f"chat endpoint failed after {self.config.max_retries} attempts: {last_error}"
        ) from last_error

    def _log_transcript(self, request_body: dict, response_text: str) -> None:
        if not self.config.transcript_path:
            return
        record = {"timestamp": time.time(), "request": request_body, "response": response_text}
        with open(self.config.transcript_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")


# ---------------------------------------------------------------------------
# Prompt rendering
# ---------------------------------------------------------------------------


def _load_template(name: str) -> str:
    return resources.files("dagvet").joinpath("templates", name).read_text(encoding="utf-8")


def render_template(name: str, mapping: dict[str, str]) -> str:
    text = _load_template(name)
    for key, value in mapping.items():
        text = text.replace("{{" + key + "}}", value)
    return text


def format_variables(names: Sequence[str], descriptions: dict[str, str] | None = None) -> str:
    descriptions = descriptions or {}
    lines = []
    for name in names:
        desc = descriptions.get(name, "")
        lines.append(f"- {name}: {desc}" if desc else f"- {name}")
    return "\n".join(lines)


def render_system_prompt(domain: str) -> str:
    return render_template("system.txt", {"domain": domain or "general"})


def render_zero_shot_prompt(
    names: Sequence[str],
    domain: str = "",
    domain_context: str = "",
    descriptions: dict[str, str] | None = None,
) -> str:
    return render_template(
        "zero_shot.txt",
        {
            "domain": domain or "general",
            "variables": format_variables(names, descriptions),
            "domain_context": domain_context.strip() + "\n" if domain_context.strip() else "",
        },
    )


def render_refinement_prompt(ctx: ProposerContext, num_edge_operations: int = 1) -> str:
    edges = ctx.graph.edge_names()
    edges_text = "\n".join(f"{p} -> {c}" for p, c in edges) if edges else "(no edges)"
    memory_text = (
        "\n".join(f"- {r.describe()}" for r in ctx.memory) if ctx.memory else "(none)"
    )
    excluded: dict[str, list[str]] = {"ADD": [], "DELETE": [], "REVERSE": []}
    for record in ctx.memory:
        if record.op is not None:
            excluded[record.op.kind.value].append(
                f"{record.op.parent}->{record.op.child}"
            )
    excluded_text = "\n".join(
        f"{kind}: {', '.join(ops) if ops else '(none)'}" for kind, ops in excluded.items()
    )
    dossier_text = (
        "Causal dossier (confirmed edges):\n"
        + "\n".join(f"{p} -> {c}" for p, c in ctx.confirmed_edges)
        + "\n"
        if ctx.confirmed_edges
        else ""
    )
    previous = (
        f"Previous reasoning:\n{ctx.previous_reasoning.strip()}\n"
        if ctx.previous_reasoning.strip()
        else ""
    )
    return render_template(
        "refine.txt",
        {
            "domain": ctx.domain or "general",
            "variables": format_variables(ctx.graph.variables, dict(ctx.descriptions)),
            "domain_context": ctx.domain_context.strip() + "\n"
            if ctx.domain_context.strip()
            else "",
            "previous_reasoning": previous,
            "dossier": dossier_text,
            "iteration": str(ctx.iteration),
            "edges": edges_text,
            "score": f"{ctx.current_bic:.4f}",
            "memory": memory_text,
            "excluded": excluded_text,
            "num_edge_operations": str(num_edge_operations),
        },
    )


# ---------------------------------------------------------------------------
# Response parsing
# ---------------------------------------------------------------------------


def _extract_json(content: str) -> dict:
    """Parse the assistant content as a JSON object, tolerating code fences."""
    text = content.strip()
    if text.startswith("```"):
        first_newline = text.find("\n")
        if first_newline != -1:
            text = text[first_newline + 1 :]
        if text.rstrip().endswith("```"):
            text = text.rstrip()[:-3]
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedResponseError(f"response is not valid JSON: {exc}", raw=content)
    if not isinstance(data, dict):
        raise MalformedResponseError("response JSON is not an object", raw=content)
    return data


def parse_operations_response(content: str) -> tuple[EditOp, str]:
    """Validate a refinement response and return (first operation, reasoning)."""
    data = _extract_json(content)
    operations = data.get("operations")
    if not isinstance(operations, list) or not operations:
        raise MalformedResponseError("missing or empty 'operations' array", raw=content)
    if len(operations) > 1:
        logger.warning(
            "response proposed %d operations; taking the first, discarding the rest",
            len(operations),
        )
    first = operations[0]
    if not isinstance(first, dict):
        raise MalformedResponseError("operation entry is not an object", raw=content)
    kind_name = first.get("type")
    parent = first.get("parent")
    child = first.get("child")
    if kind_name not in OPERATION_KINDS:
        raise MalformedResponseError(f"invalid operation type {kind_name!r}", raw=content)
    if not isinstance(parent, str) or not isinstance(child, str) or not parent or not child:
        raise MalformedResponseError("operation needs 'parent' and 'child' names", raw=content)
    reasoning = data.get("overall_reasoning", "")
    op_reasoning = first.get("reasoning", "")
    if not isinstance(reasoning, str):
        reasoning = ""
    if isinstance(op_reasoning, str) and op_reasoning:
        reasoning = f"{reasoning} | {op_reasoning}" if reasoning else op_reasoning
    return EditOp(OPERATION_KINDS[kind_name], parent, child), reasoning


def parse_nodes_response(content: str, known: Sequence[str]) -> CausalGraph:
    """Validate a zero-shot response and build the declared graph.

    Unknown node names and unknown parents are dropped with a warning; any
    declared cycles are broken with unit weights (lexicographic tie-break).
    """
    data = _extract_json(content)
    nodes = data.get("nodes")
    if not isinstance(nodes, list):
        raise MalformedResponseError("missing 'nodes' list", raw=content)
    known_set = set(known)
    edges: set[tuple[str, str]] = set()
    for entry in nodes:
        if not isinstance(entry, dict) or "name" not in entry:
            raise MalformedResponseError("node entry needs a 'name'", raw=content)
        name = entry["name"]
        if name not in known_set:
            logger.warning("dropping unknown variable %r from initialization", name)
            continue
        parents = entry.get("parents", [])
        if not isinstance(parents, list):
            raise MalformedResponseError(
                f"'parents' of {name!r} must be a list", raw=content
            )
        for p in parents:
            if p not in known_set:
                logger.warning("ignoring unknown parent %r of %r", p, name)
                continue
            if p != name:
                edges.add((p, name))
    graph = CausalGraph.from_edges(tuple(known), edges)
    return break_cycles(graph)


# ---------------------------------------------------------------------------
# Proposer and initializer
# ---------------------------------------------------------------------------


class LlmProposer:
    """Renders the refinement prompt, sends one chat request, parses one edit."""

    def __init__(self, client: ChatClient, num_edge_operations: int = 1):
        self.client = client
        self.num_edge_operations = num_edge_operations

    def propose(self, ctx: ProposerContext) -> Proposal:
        system = render_system_prompt(ctx.domain)
        user = render_refinement_prompt(ctx, self.num_edge_operations)
        content = self.client.complete(system, user)
        op, reasoning = parse_operations_response(content)
        return Proposal(op, ProposalSource.LLM, reasoning=reasoning)


def llm_init(
    client: ChatClient,
    names: Sequence[str],
    domain: str = "",
    domain_context: str = "",
    descriptions: dict[str, str] | None = None,
) -> CausalGraph:
    """Zero-shot initial graph from variable metadata.

    An unparseable response falls back to the edgeless graph (with a loud
    warning) rather than aborting: the search can still start from nothing.
    """
    system = render_system_prompt(domain)
    user = render_zero_shot_prompt(names, domain, domain_context, descriptions)
    content = client.complete(system, user)
    try:
        return parse_nodes_response(content, names)
    except MalformedResponseError as exc:
        logger.warning(
            "UNPARSEABLE INITIALIZATION RESPONSE (%s); falling back to the edgeless graph",
            exc,
        )
        return CausalGraph(tuple(names))
