import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cqedquant import netlist as nl


def lc_doc(C=1e-12, L=1e-9):
    return {
        "nodes": ["g", "a"],
        "ground": "g",
        "branches": [
            {"kind": "C", "from": "a", "to": "g", "params": {"C": C}},
            {"kind": "L", "from": "a", "to": "g", "params": {"L": L}},
        ],
    }


def test_lc_loop_matrix():
    ls = nl.build_loop_structure(nl.parse_netlist(lc_doc()))
    assert ls.F.shape == (1, 1)
    assert abs(ls.F[0, 0]) == 1
    assert [ls.kinds[b] for b in ls.tree] == ["C"]
    assert [ls.kinds[b] for b in ls.chord] == ["L"]


def test_roundtrip_serialization():
    doc = lc_doc()
    doc["couplers"] = [{"kind": "gyrator", "R": 50.0, "ports": [["a", "g"], ["a", "g"]]}]
    net = nl.parse_netlist(doc)
    again = nl.parse_netlist(nl.serialize_netlist(net))
    assert [(b.kind, b.start, b.end, b.value) for b in again.branches] == [
        (b.kind, b.start, b.end, b.value) for b in net.branches
    ]


def test_malformed_json_reports_position():
    with pytest.raises(nl.SchemaError) as exc:
        nl.parse_netlist('{"nodes": [')
    assert "line 1" in str(exc.value)


@pytest.mark.parametrize(
    "mutate, text",
    [
        (lambda d: d.update(extra=1), "unknown key"),
        (lambda d: d["branches"][0].update(kind="R"), "kind"),
        (lambda d: d["branches"][0]["params"].pop("C"), "missing parameter"),
        (lambda d: d["branches"][0].update(to="zz"), "unknown node"),
        (lambda d: d["branches"][1]["params"].update(L=-1.0), "nonpositive"),
    ],
)
def test_schema_errors(mutate, text):
    doc = lc_doc()
    mutate(doc)
    with pytest.raises(nl.NetlistError, match=text):
        nl.parse_netlist(doc)


def test_node_reached_only_by_junction_has_no_tree():
    doc = {
        "nodes": ["g", "a", "b"],
        "ground": "g",
        "branches": [
            {"kind": "C", "from": "a", "to": "g", "params": {"C": 1e-12}},
            {"kind": "JJ", "from": "a", "to": "b", "params": {"EJ": 1e-23}},
        ],
    }
    with pytest.raises(nl.NoTreeError, match="no valid BKD tree"):
        nl.build_loop_structure(nl.parse_netlist(doc))


def test_junction_capacitance_is_split_off():
    doc = {
        "nodes": ["g", "a"],
        "ground": "g",
        "branches": [{"kind": "JJ", "from": "a", "to": "g", "params": {"EJ": 1e-23, "CJ": 2e-15}}],
    }
    ls = nl.build_loop_structure(nl.parse_netlist(doc))
    assert [ls.kinds[b] for b in ls.tree] == ["C"]
    assert [ls.kinds[b] for b in ls.chord] == ["J"]


def test_transformer_folding_matches_block_formula():
    # rows: C, C, TL ; cols: L, TR
    F = np.array([[1, 0], [0, 1], [1, 0]])
    ls = nl.LoopStructure.from_blocks(["C", "C", "TL"], ["L", "TR"], F, turns=[[2.5]])
    out = nl.eliminate_transformers(ls)
    expected = F[:2, :1] + F[:2, 1:2] @ np.array([[2.5]]) @ F[2:, :1]
    assert np.array_equal(out.F, expected)
    assert out.eliminated


def test_transformer_loop_is_rejected():
    doc = {
        "nodes": ["g", "a", "b"],
        "ground": "g",
        "branches": [
            {"kind": "C", "from": "a", "to": "g", "params": {"C": 1e-12}},
            {"kind": "C", "from": "b", "to": "g", "params": {"C": 1e-12}},
        ],
        "transformers": [{"turns": [[1.0]], "left_ports": [["a", "g"]], "right_ports": [["b", "g"]]}],
    }
    with pytest.raises(nl.NoTreeError, match="transformer"):
        nl.build_loop_structure(nl.parse_netlist(doc))


@st.composite
def connected_circuits(draw):
    n = draw(st.integers(2, 6))
    nodes = ["g"] + [f"n{i}" for i in range(1, n)]
    branches = []
    # a capacitor spanning tree keeps every node reachable
    for i in range(1, n):
        j = draw(st.integers(0, i - 1))
        branches.append({"kind": "C", "from": nodes[i], "to": nodes[j], "params": {"C": 1e-12}})
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.sampled_from("CLJ")),
                          max_size=6))
    for a, b, k in extra:
        if a == b:
            continue
        kind = {"C": "C", "L": "L", "J": "JJ"}[k]
        key = {"C": "C", "L": "L", "JJ": "EJ"}[kind]
        branches.append({"kind": kind, "from": nodes[a], "to": nodes[b], "params": {key: 1e-9}})
    return {"nodes": nodes, "ground": "g", "branches": branches}


@settings(max_examples=60, deadline=None)
@given(connected_circuits())
def test_loop_matrix_satisfies_kirchhoff(doc):
    net = nl.parse_netlist(doc)
    ls = nl.build_loop_structure(net)
    edges = {e.id: e for e in net.expanded()}
    A_tree = nl.incidence_matrix(net.nodes, net.ground, [edges[i] for i in ls.tree])
    A_chord = nl.incidence_matrix(net.nodes, net.ground, [edges[i] for i in ls.chord])
    # currents: I_tree = -F I_chord must satisfy node conservation for any I_chord
    assert np.array_equal(A_tree @ ls.F, A_chord)
    assert len(ls.tree) == len(net.nodes) - 1
    assert all(ls.kinds[b] != "J" for b in ls.tree)


@settings(max_examples=30, deadline=None)
@given(connected_circuits())
def test_serialization_roundtrip_property(doc):
    net = nl.parse_netlist(doc)
    text = nl.serialize_netlist(net)
    again = nl.parse_netlist(text if isinstance(text, str) else json.dumps(text))
    assert np.array_equal(nl.build_loop_structure(again).F, nl.build_loop_structure(net).F)
