from __future__ import annotations

import json

import numpy as np
import pytest

from dagvet import (
    BicScorer,
    CausalGraph,
    EditKind,
    EditOp,
    GreedyProposer,
    MalformedResponseError,
    Outcome,
    Proposal,
    ProposalSource,
    ProposerExhausted,
    RunConfig,
    StopReason,
    build_mixed_dataset,
    hybrid_init,
    network_skeleton,
    refine,
    run_pipeline,
    structure_metrics,
    write_edge_list,
)
from dagvet.engine import greedy_warm_start, run_summary, write_run_summary, write_trajectory_csv
from tests.oracles import all_dags
from tests.synth import three_node_net


class ScriptedProposer:
    """Replays a fixed list; items may be EditOp, Proposal, or an exception."""

    def __init__(self, script, loop_last=True):
        self.script = list(script)
        self.loop_last = loop_last
        self.calls = 0

    def propose(self, ctx):
        idx = self.calls if self.calls < len(self.script) else -1
        if not self.loop_last and self.calls >= len(self.script):
            raise ProposerExhausted("script finished")
        item = self.script[idx]
        self.calls += 1
        if isinstance(item, Exception):
            raise item
        if isinstance(item, EditOp):
            return Proposal(item, ProposalSource.GREEDY)
        return item


@pytest.fixture(scope="module")
def chain_scorer():
    data = build_mixed_dataset(three_node_net("chain"), total=3000, seed=0)
    return BicScorer(data)


@pytest.fixture(scope="module")
def chain_truth():
    return network_skeleton(three_node_net("chain"))


def empty_graph(scorer):
    return CausalGraph(scorer.data.variables)


# ---------------------------------------------------------------------------
# loop protocol
# ---------------------------------------------------------------------------


def test_only_invalid_ops_run_all_iterations(chain_scorer):
    init = empty_graph(chain_scorer)
    bad = EditOp(EditKind.DELETE, "A", "B")  # absent edge, always invalid
    proposer = ScriptedProposer([bad])
    result = refine(init, chain_scorer, proposer, RunConfig(max_iterations=7))
    assert result.stop_reason is StopReason.HORIZON
    assert result.n_proposals == 7
    assert result.counts["REJECTED_STRUCTURAL"] == 7
    assert result.graph.edges == init.edges
    # patience was never spent: structural failures leave the counter alone
    assert proposer.calls == 7


def test_patience_stops_after_k_statistical_rejections(chain_scorer):
    # DELETE of a true edge from the truth graph worsens the score
    truth = network_skeleton(three_node_net("chain"))
    drop_ab = EditOp(EditKind.DELETE, "A", "B")
    drop_bc = EditOp(EditKind.DELETE, "B", "C")
    proposer = ScriptedProposer([drop_ab, drop_bc, drop_ab, drop_bc, drop_ab])
    result = refine(truth, chain_scorer, proposer, RunConfig(max_iterations=50, patience=5))
    assert result.stop_reason is StopReason.PATIENCE
    assert result.n_proposals == 5
    assert result.counts["REJECTED_STATISTICAL"] == 5
    assert result.graph.edges == truth.edges


def test_acceptance_resets_patience_and_clears_memory(chain_scorer):
    init = empty_graph(chain_scorer)
    bad_delete = EditOp(EditKind.DELETE, "C", "A")
    good_add = EditOp(EditKind.ADD, "A", "B")
    seen_memories = []

    class Recording(ScriptedProposer):
        def propose(self, ctx):
            seen_memories.append(tuple(ctx.memory))
            return super().propose(ctx)

    reverse_ab = EditOp(EditKind.REVERSE, "A", "B")  # statistical loser after accept
    proposer = Recording([bad_delete, good_add, reverse_ab, reverse_ab])
    result = refine(init, chain_scorer, proposer, RunConfig(max_iterations=4, patience=5))
    assert [e.outcome for e in result.trajectory] == [
        Outcome.REJECTED_STRUCTURAL,
        Outcome.ACCEPTED,
        Outcome.REJECTED_STATISTICAL,
        Outcome.REJECTED_STATISTICAL,
    ]
    # memory grew with the structural failure, then was cleared by the accept
    assert len(seen_memories[1]) == 1
    assert seen_memories[2] == ()
    assert len(seen_memories[3]) == 1


def test_cumulative_memory_mode_keeps_records(chain_scorer):
    init = empty_graph(chain_scorer)
    bad_delete = EditOp(EditKind.DELETE, "C", "A")
    good_add = EditOp(EditKind.ADD, "A", "B")
    seen = []

    class Recording(ScriptedProposer):
        def propose(self, ctx):
            seen.append(len(ctx.memory))
            return super().propose(ctx)

    proposer = Recording([bad_delete, good_add, bad_delete])
    refine(
        init,
        chain_scorer,
        proposer,
        RunConfig(max_iterations=3, memory_mode="cumulative"),
    )
    assert seen == [0, 1, 1]  # record kept across the acceptance


def test_accepted_bic_strictly_decreasing(chain_scorer):
    init = empty_graph(chain_scorer)
    result = refine(
        init, chain_scorer, GreedyProposer(chain_scorer), RunConfig(max_iterations=10)
    )
    accepted = [e.bic_after for e in result.trajectory if e.outcome is Outcome.ACCEPTED]
    assert accepted, "greedy should accept something on chain data"
    values = [result.init_bic.bic] + accepted
    for earlier, later in zip(values, values[1:]):
        assert later < earlier - 1e-9


def test_returned_graph_is_min_bic_visited(chain_scorer):
    init = empty_graph(chain_scorer)
    result = refine(
        init, chain_scorer, GreedyProposer(chain_scorer), RunConfig(max_iterations=10)
    )
    visited_bics = [result.init_bic.bic] + [
        e.bic_after for e in result.trajectory if e.outcome is Outcome.ACCEPTED
    ]
    assert result.bic_result.bic == min(visited_bics)


def test_returns_init_when_nothing_accepted(chain_scorer, chain_truth):
    # nothing improves on the optimum; returned graph must be the init itself
    best = min(all_dags(chain_truth.variables), key=lambda g: chain_scorer.bic(g).bic)
    result = refine(best, chain_scorer, GreedyProposer(chain_scorer), RunConfig())
    assert result.graph.edges == best.edges


def test_malformed_consumes_iteration_but_not_patience(chain_scorer):
    init = empty_graph(chain_scorer)
    script = [
        MalformedResponseError("not json"),
        MalformedResponseError("still not json"),
        EditOp(EditKind.ADD, "A", "B"),
    ]
    proposer = ScriptedProposer(script, loop_last=False)
    result = refine(init, chain_scorer, proposer, RunConfig(max_iterations=3, patience=1))
    outcomes = [e.outcome for e in result.trajectory]
    assert outcomes == [
        Outcome.REJECTED_MALFORMED,
        Outcome.REJECTED_MALFORMED,
        Outcome.ACCEPTED,
    ]
    assert result.stop_reason is StopReason.HORIZON


def test_proposer_exhausted_stop_reason(chain_scorer):
    init = empty_graph(chain_scorer)
    proposer = ScriptedProposer([], loop_last=False)
    result = refine(init, chain_scorer, proposer, RunConfig(max_iterations=5))
    assert result.stop_reason is StopReason.PROPOSER_EXHAUSTED
    assert result.n_proposals == 0


def test_taxonomy_counts_cover_all_proposals(chain_scorer):
    init = empty_graph(chain_scorer)
    script = [
        EditOp(EditKind.DELETE, "A", "B"),     # structural
        MalformedResponseError("garbage"),      # malformed
        EditOp(EditKind.ADD, "A", "B"),        # accepted
        EditOp(EditKind.REVERSE, "A", "B"),    # statistical
    ]
    proposer = ScriptedProposer(script, loop_last=False)
    result = refine(init, chain_scorer, proposer, RunConfig(max_iterations=4))
    counts = result.counts
    assert sum(counts.values()) == result.n_proposals == 4
    assert counts == {
        "ACCEPTED": 1,
        "REJECTED_STRUCTURAL": 1,
        "REJECTED_STATISTICAL": 1,
        "REJECTED_MALFORMED": 1,
    }


def test_default_horizon_is_variable_count(chain_scorer):
    init = empty_graph(chain_scorer)
    bad = EditOp(EditKind.DELETE, "A", "B")
    result = refine(init, chain_scorer, ScriptedProposer([bad]), RunConfig())
    assert result.n_proposals == init.d  # T = d by default


def test_deterministic_trajectory_with_deterministic_proposer(chain_scorer):
    init = empty_graph(chain_scorer)
    r1 = refine(init, chain_scorer, GreedyProposer(chain_scorer), RunConfig(seed=1))
    r2 = refine(init, chain_scorer, GreedyProposer(chain_scorer), RunConfig(seed=1))
    assert r1 == r2


def test_shd_tracked_when_truth_given(chain_scorer, chain_truth):
    init = empty_graph(chain_scorer)
    result = refine(
        init,
        chain_scorer,
        GreedyProposer(chain_scorer),
        RunConfig(max_iterations=5),
        truth=chain_truth,
    )
    assert all(e.shd_after is not None for e in result.trajectory)
    accepted = [e for e in result.trajectory if e.outcome is Outcome.ACCEPTED]
    assert accepted[-1].shd_after == structure_metrics(result.graph, chain_truth).shd


# ---------------------------------------------------------------------------
# hybrid initialization
# ---------------------------------------------------------------------------


def test_hybrid_init_single_candidate(chain_scorer, chain_truth):
    graph, result, label = hybrid_init([("only", chain_truth)], chain_scorer)
    assert graph is chain_truth and label == "only"
    assert result.bic == chain_scorer.bic(chain_truth).bic


def test_hybrid_init_prefers_lower_bic(asia_net):
    data = build_mixed_dataset(asia_net, total=5000, seed=0)
    scorer = BicScorer(data)
    truth = network_skeleton(asia_net)
    empty = CausalGraph(truth.variables)
    graph, _, label = hybrid_init([("empty", empty), ("truth", truth)], scorer)
    assert label == "truth" and graph is truth


def test_hybrid_init_tie_keeps_earliest(chain_scorer, chain_truth):
    same = CausalGraph(chain_truth.variables, chain_truth.edges)
    _, _, label = hybrid_init([("first", chain_truth), ("second", same)], chain_scorer)
    assert label == "first"


def test_hybrid_init_empty_list_rejected(chain_scorer):
    with pytest.raises(ValueError):
        hybrid_init([], chain_scorer)


def test_greedy_warm_start_improves(chain_scorer):
    start = empty_graph(chain_scorer)
    warm = greedy_warm_start(chain_scorer, start, max_accepts=10)
    assert chain_scorer.bic(warm).bic < chain_scorer.bic(start).bic


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def test_refine_reaches_brute_force_optimum_on_chain(chain_scorer):
    best = min(
        all_dags(chain_scorer.data.variables), key=lambda g: chain_scorer.bic(g).bic
    )
    result = refine(
        empty_graph(chain_scorer),
        chain_scorer,
        GreedyProposer(chain_scorer),
        RunConfig(),
    )
    assert result.graph.edges == best.edges


def test_pipeline_with_truth_baseline_keeps_shd_zero(tmp_path, cancer_net):
    truth = network_skeleton(cancer_net)
    baseline = tmp_path / "truth.tsv"
    baseline.write_text(write_edge_list(truth), encoding="utf-8")
    res = run_pipeline(cancer_net, str(baseline), RunConfig(seed=0))
    assert res.init_label == "stat"
    assert res.run.stop_reason in (StopReason.PATIENCE, StopReason.HORIZON)
    assert res.metrics.shd == 0
    assert res.metrics.f1 == 1.0


def test_pipeline_offline_candidates(cancer_net):
    res = run_pipeline(cancer_net, None, RunConfig(seed=0))
    assert res.init_label in ("warmstart", "empty")
    m = res.metrics
    if m.precision + m.recall > 0:
        assert m.f1 == pytest.approx(
            2 * m.precision * m.recall / (m.precision + m.recall), abs=1e-12
        )
    else:
        assert m.f1 == 0.0


def test_pipeline_rejects_mismatched_baseline(tmp_path, cancer_net):
    baseline = tmp_path / "bad.tsv"
    baseline.write_text("# variables: A,B\nA\tB\n", encoding="utf-8")
    with pytest.raises(ValueError, match="variable table"):
        run_pipeline(cancer_net, str(baseline), RunConfig(seed=0))


def test_random_proposer_pipeline_runs(cancer_net):
    res = run_pipeline(cancer_net, None, RunConfig(seed=0, proposer="random"))
    assert res.run.n_proposals >= 1


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def test_trajectory_csv_and_summary(tmp_path, chain_scorer, chain_truth):
    result = refine(
        empty_graph(chain_scorer),
        chain_scorer,
        GreedyProposer(chain_scorer),
        RunConfig(),
        truth=chain_truth,
    )
    csv_path = tmp_path / "trajectory.csv"
    write_trajectory_csv(result, csv_path)
    lines = csv_path.read_text().strip().split("\n")
    assert lines[0] == "iteration,op_kind,parent,child,outcome,delta_bic,bic_after,shd_after"
    assert len(lines) == result.n_proposals + 1

    summary_path = tmp_path / "summary.json"
    write_run_summary(result, summary_path, structure_metrics(result.graph, chain_truth))
    loaded = json.loads(summary_path.read_text())
    assert loaded["counts"] == result.counts
    assert loaded["stop_reason"] == result.stop_reason.value
    assert loaded["metrics"]["shd"] == 0
    assert loaded["final_bic"] == pytest.approx(result.bic_result.bic)
    assert run_summary(result)["n_proposals"] == result.n_proposals
