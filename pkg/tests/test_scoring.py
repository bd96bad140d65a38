from __future__ import annotations

import math

import numpy as np
import pytest

from dagvet import (
    BicScorer,
    CausalGraph,
    Dataset,
    EditKind,
    EditOp,
    EditRejected,
    apply_edit,
    build_mixed_dataset,
    enumerate_valid_edits,
    k_eff,
    load_bundled_network,
    network_skeleton,
)
from dagvet.scoring import ScoringError
from tests.oracles import grouped_family_loglik
from tests.synth import random_dag, random_dataset


def tiny_dataset(values, cardinalities=None, mask=None):
    values = np.asarray(values)
    d = values.shape[1]
    cards = cardinalities or tuple(max(2, int(values[:, i].max()) + 1) for i in range(d))
    mask = np.zeros(values.shape, dtype=bool) if mask is None else np.asarray(mask)
    rows, cols = np.nonzero(mask)
    env = np.zeros(values.shape[0], dtype=np.int64)
    env[rows] = cols + 1
    return Dataset(tuple(f"v{i}" for i in range(d)), cards, values, mask, env)


def test_parentless_binary_family_closed_form():
    ds = tiny_dataset([[0], [0], [1], [1]])
    scorer = BicScorer(ds)
    assert scorer.family_loglik(0, ()) == pytest.approx(4 * math.log(0.5), abs=1e-9)
    assert scorer.family_loglik(0, ()) == pytest.approx(-2.772589, abs=1e-6)


def test_fully_masked_family_scores_zero():
    mask = [[True], [True], [True], [True]]
    ds = tiny_dataset([[0], [0], [1], [1]], mask=mask)
    assert BicScorer(ds).family_loglik(0, ()) == 0.0


def test_family_loglik_matches_grouping_oracle():
    rng = np.random.default_rng(0)
    ds = random_dataset(rng, d=3, n=300)
    scorer = BicScorer(ds)
    got = scorer.family_loglik(2, (0, 1))
    want = grouped_family_loglik(ds.values, ds.mask, 2, (0, 1))
    assert got == pytest.approx(want, abs=1e-9)


def test_k_eff_isolated_binary_node():
    assert k_eff(CausalGraph(("A",)), (2,)) == 1


@pytest.mark.parametrize(
    "name,expected", [("cancer", 10), ("asia", 18), ("child", 230), ("alarm", 509)]
)
def test_k_eff_benchmark_goldens(name, expected):
    net = load_bundled_network(name)
    assert k_eff(network_skeleton(net), net.cardinalities) == expected


def test_k_eff_rejects_unit_cardinality():
    with pytest.raises(ScoringError):
        k_eff(CausalGraph(("A", "B")), (1, 2))


def test_k_eff_multiplicative_in_parents():
    g0 = CausalGraph.from_edges(("A", "B", "C"), [("A", "C")])
    g1 = CausalGraph.from_edges(("A", "B", "C"), [("A", "C"), ("B", "C")])
    cards = (3, 4, 2)
    family0 = (cards[2] - 1) * cards[0]
    family1 = (cards[2] - 1) * cards[0] * cards[1]
    assert k_eff(g1, cards) - k_eff(g0, cards) == family1 - family0


def test_bic_single_binary_variable_arithmetic():
    ds = tiny_dataset([[0], [0], [1], [1]])
    result = BicScorer(ds).bic(CausalGraph(("v0",)))
    assert result.k_eff == 1 and result.n == 4
    assert result.bic == pytest.approx(5.545177 + math.log(4), abs=1e-5)
    assert result.bic == pytest.approx(6.931472, abs=1e-5)


def test_bic_recomputable_from_fields(asia_net):
    data = build_mixed_dataset(asia_net, total=2000, seed=1)
    scorer = BicScorer(data)
    result = scorer.bic(network_skeleton(asia_net))
    recomputed = -2.0 * result.loglik + result.k_eff * math.log(result.n)
    assert result.bic == pytest.approx(recomputed, rel=1e-9)


def test_truth_beats_empty_on_asia(asia_net, asia_truth):
    data = build_mixed_dataset(asia_net, total=5000, seed=0)
    scorer = BicScorer(data)
    assert scorer.bic(asia_truth).bic < scorer.bic(CausalGraph(asia_truth.variables)).bic


def test_bic_rejects_cyclic_graph():
    ds = tiny_dataset([[0, 0], [1, 1]])
    cyclic = CausalGraph(("v0", "v1"), frozenset({(0, 1), (1, 0)}))
    with pytest.raises(ScoringError, match="cyclic"):
        BicScorer(ds).bic(cyclic)


def test_bic_rejects_wrong_variable_table(asia_net):
    data = build_mixed_dataset(asia_net, total=500, seed=0)
    with pytest.raises(ScoringError, match="variable table"):
        BicScorer(data).bic(CausalGraph(("x", "y")))


def test_delta_of_inverse_cancels():
    rng = np.random.default_rng(3)
    ds = random_dataset(rng, d=4, n=400)
    scorer = BicScorer(ds)
    graph = CausalGraph(ds.variables)
    op = EditOp(EditKind.ADD, "v0", "v2")
    delta = scorer.delta_bic(graph, op)
    edited = apply_edit(graph, op)
    back = scorer.delta_bic(edited, op.inverse())
    assert delta + back == pytest.approx(0.0, abs=1e-9)


def test_delta_matches_full_recompute_on_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(25):
        ds = random_dataset(rng, d=6, n=250)
        scorer = BicScorer(ds)
        graph = random_dag(rng, 6)
        graph = CausalGraph(ds.variables, graph.edges)
        ops = enumerate_valid_edits(graph)
        op = ops[int(rng.integers(0, len(ops)))]
        delta = scorer.delta_bic(graph, op)
        full = scorer.bic(graph).bic - scorer.bic(apply_edit(graph, op)).bic
        assert delta == pytest.approx(full, abs=1e-6)


def test_reverse_delta_equals_two_family_recount():
    rng = np.random.default_rng(5)
    ds = random_dataset(rng, d=4, n=300)
    scorer = BicScorer(ds)
    graph = CausalGraph(ds.variables, frozenset({(0, 1), (1, 2)}))
    op = EditOp(EditKind.REVERSE, "v0", "v1")
    delta = scorer.delta_bic(graph, op)

    ln_n = math.log(ds.n)

    def term(child, parents):
        fam = scorer.family_score(child, parents)
        return -2.0 * fam.loglik + fam.k * ln_n

    # child v1 loses parent v0; parent v0 gains parent v1
    expected = (term(1, (0,)) - term(1, ())) + (term(0, ()) - term(0, (1,)))
    assert delta == pytest.approx(expected, abs=1e-9)


def test_delta_rejects_structurally_invalid_op():
    ds = tiny_dataset([[0, 0], [1, 1]])
    scorer = BicScorer(ds)
    with pytest.raises(EditRejected):
        scorer.delta_bic(CausalGraph(ds.variables), EditOp(EditKind.DELETE, "v0", "v1"))


def test_mle_dominates_random_parameterizations():
    rng = np.random.default_rng(7)
    ds = random_dataset(rng, d=3, n=120)
    scorer = BicScorer(ds)
    for child in range(3):
        parents = tuple(p for p in range(3) if p != child)[:1]
        mle = scorer.family_loglik(child, parents)
        rows = np.nonzero(~ds.mask[:, child])[0]
        r = ds.cardinalities[child]
        p_card = ds.cardinalities[parents[0]]
        for _ in range(100):
            theta = rng.dirichlet(np.ones(r), size=p_card)
            ll = 0.0
            for k in rows:
                ll += math.log(theta[ds.values[k, parents[0]], ds.values[k, child]])
            assert ll <= mle + 1e-9


def test_adding_a_parent_never_decreases_family_loglik():
    rng = np.random.default_rng(13)
    for _ in range(20):
        ds = random_dataset(rng, d=4, n=150)
        scorer = BicScorer(ds)
        child = int(rng.integers(0, 4))
        others = [p for p in range(4) if p != child]
        rng.shuffle(others)
        parents: tuple[int, ...] = ()
        last = scorer.family_loglik(child, parents)
        for p in others:
            parents = tuple(sorted(parents + (p,)))
            current = scorer.family_loglik(child, parents)
            assert current >= last - 1e-9
            last = current


def test_masking_never_hurts_the_true_graph(cancer_net):
    data = build_mixed_dataset(cancer_net, total=3000, seed=0)
    truth = network_skeleton(cancer_net)
    masked = BicScorer(data, use_mask=True).bic(truth).bic
    unmasked = BicScorer(data, use_mask=False).bic(truth).bic
    assert masked <= unmasked


def test_per_family_penalty_mode_differs_but_decomposes(asia_net, asia_truth):
    data = build_mixed_dataset(asia_net, total=1000, seed=2)
    scorer = BicScorer(data, penalty_mode="per_family")
    graph = asia_truth
    op = EditOp(EditKind.DELETE, *graph.edge_names()[0])
    delta = scorer.delta_bic(graph, op)
    full = scorer.bic(graph).bic - scorer.bic(apply_edit(graph, op)).bic
    assert delta == pytest.approx(full, abs=1e-6)


def test_smoothing_flag_changes_fidelity_only_slightly():
    rng = np.random.default_rng(4)
    ds = random_dataset(rng, d=3, n=500, masked_fraction=0.0)
    plain = BicScorer(ds).family_loglik(0, (1,))
    smoothed = BicScorer(ds, smoothing=0.5).family_loglik(0, (1,))
    assert smoothed != plain
    assert smoothed == pytest.approx(plain, rel=0.05)


def test_cache_reused_across_graphs():
    rng = np.random.default_rng(9)
    ds = random_dataset(rng, d=3, n=100)
    scorer = BicScorer(ds)
    scorer.bic(CausalGraph(ds.variables))
    misses_before = len(scorer._cache)
    scorer.bic(CausalGraph(ds.variables))
    assert len(scorer._cache) == misses_before
