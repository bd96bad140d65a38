from __future__ import annotations

import numpy as np
import pytest

from dagvet import (
    BifParseError,
    CausalGraph,
    EdgeListError,
    detect_cycle,
    load_bundled_network,
    network_skeleton,
    parse_bif,
    read_edge_list,
    write_edge_list,
)
from tests.synth import random_dag

MINIMAL_BIF = """
network minimal {
}
variable A {
  type discrete [ 2 ] { on, off };
}
variable B {
  type discrete [ 2 ] { yes, no };
}
probability ( A ) {
  table 0.6, 0.4;
}
probability ( B | A ) {
  (on) 0.9, 0.1;
  (off) 0.2, 0.8;
}
"""


def test_minimal_document():
    net = parse_bif(MINIMAL_BIF)
    assert net.names == ("A", "B")
    assert net.cardinalities == (2, 2)
    skeleton = network_skeleton(net)
    assert skeleton.edge_names() == [("A", "B")]
    table = net.table_for("B")
    assert table.parents == ("A",)
    assert table.probs[0] == pytest.approx([0.9, 0.1])
    assert table.probs[1] == pytest.approx([0.2, 0.8])


def test_table_syntax_equivalent_to_rows():
    text = MINIMAL_BIF.replace(
        "(on) 0.9, 0.1;\n  (off) 0.2, 0.8;", "table 0.9, 0.1, 0.2, 0.8;"
    )
    net = parse_bif(text)
    assert net.table_for("B").probs[1] == pytest.approx([0.2, 0.8])


def test_row_not_summing_to_one():
    bad = MINIMAL_BIF.replace("(on) 0.9, 0.1;", "(on) 0.5, 0.4;")
    with pytest.raises(BifParseError, match="sums to 0.9"):
        parse_bif(bad)


def test_duplicate_variable():
    dup = MINIMAL_BIF + "\nvariable A {\n  type discrete [ 2 ] { x, y };\n}\n"
    with pytest.raises(BifParseError, match="duplicate variable"):
        parse_bif(dup)


def test_unknown_parent():
    bad = MINIMAL_BIF.replace("probability ( B | A )", "probability ( B | Z )")
    with pytest.raises(BifParseError, match="unknown parent"):
        parse_bif(bad)


def test_missing_probability_block():
    text = MINIMAL_BIF.replace(
        "probability ( A ) {\n  table 0.6, 0.4;\n}\n", ""
    )
    with pytest.raises(BifParseError, match="no probability block"):
        parse_bif(text)


def test_cyclic_structure_rejected():
    cyclic = (
        MINIMAL_BIF.replace(
            "probability ( A ) {\n  table 0.6, 0.4;\n}",
            "probability ( A | B ) {\n  (yes) 0.6, 0.4;\n  (no) 0.3, 0.7;\n}",
        )
    )
    with pytest.raises(Exception, match="cycle"):
        parse_bif(cyclic)


def test_syntax_error_carries_position():
    with pytest.raises(BifParseError, match=r"line \d+"):
        parse_bif("variable A {\n  type discrete [ 2 ] { a, b };\n")


def test_missing_row_rejected():
    text = MINIMAL_BIF.replace("  (off) 0.2, 0.8;\n", "")
    with pytest.raises(BifParseError, match="missing row"):
        parse_bif(text)


def test_comments_and_properties_skipped():
    text = MINIMAL_BIF.replace(
        "variable A {",
        "// leading comment\n/* block\ncomment */\nvariable A {\n  property foo bar;",
    )
    assert parse_bif(text).names == ("A", "B")


@pytest.mark.parametrize(
    "name,nodes,edges",
    [("cancer", 5, 4), ("asia", 8, 8), ("child", 20, 25), ("alarm", 37, 46)],
)
def test_bundled_networks_parse_and_match_counts(name, nodes, edges):
    net = load_bundled_network(name)
    skeleton = network_skeleton(net)
    assert net.d == nodes
    assert len(skeleton.edges) == edges
    assert detect_cycle(skeleton) is None
    for table in net.tables:
        assert np.allclose(table.probs.sum(axis=1), 1.0, atol=1e-6)


def test_asia_shape(asia_net):
    assert asia_net.names[0] == "asia"
    assert len(network_skeleton(asia_net).edges) == 8


def test_skeleton_edge_count_is_total_parent_count(cancer_net):
    total_parents = sum(len(t.parents) for t in cancer_net.tables)
    assert len(network_skeleton(cancer_net).edges) == total_parents


def test_parentless_only_network_has_edgeless_skeleton():
    text = """
variable A { type discrete [ 2 ] { a, b }; }
variable B { type discrete [ 3 ] { x, y, z }; }
probability ( A ) { table 0.5, 0.5; }
probability ( B ) { table 0.2, 0.3, 0.5; }
"""
    assert network_skeleton(parse_bif(text)).edges == frozenset()


# ---------------------------------------------------------------------------
# edge lists
# ---------------------------------------------------------------------------


def test_edge_list_basic():
    graph = read_edge_list("# variables: A,B\nA\tB\n")
    assert graph.variables == ("A", "B")
    assert graph.edge_names() == [("A", "B")]


def test_edge_list_round_trip_random_20_nodes():
    graph = random_dag(np.random.default_rng(7), 20, p=0.2)
    assert read_edge_list(write_edge_list(graph)) == graph


def test_edge_list_unknown_variable():
    with pytest.raises(EdgeListError, match="unknown variable 'Z'"):
        read_edge_list("# variables: A,B\nA\tZ\n")


def test_edge_list_missing_header():
    with pytest.raises(EdgeListError, match="header"):
        read_edge_list("A\tB\n")


def test_edge_list_duplicate_edge():
    with pytest.raises(EdgeListError, match="duplicate edge"):
        read_edge_list("# variables: A,B\nA\tB\nA\tB\n")
