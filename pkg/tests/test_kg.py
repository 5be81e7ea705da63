import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from factgenius.kg import (
    DuplicateEntityError,
    EmptyGraphError,
    KgError,
    KnowledgeGraph,
    MalformedFileError,
    load_kg,
    reverse_label,
)

entity_ids = st.text(alphabet="ABCDxyz_123", min_size=1, max_size=6)
labels = st.text(alphabet="abcdr_", min_size=1, max_size=6)


def test_mini_kg_counts(mini_kg):
    # A-r-B and B-s-C plus their synthesized reverses
    assert mini_kg.entity_count == 3
    assert mini_kg.edge_count == 4
    assert mini_kg.closure_repairs == 2


def test_one_hop_relations(mini_kg):
    assert mini_kg.one_hop_relations("B") == ["s", "~r"]
    assert mini_kg.one_hop_relations("A") == ["r"]
    assert mini_kg.one_hop_relations("nope") == []


def test_unknown_entity_increments_diagnostic_counter(tmp_path):
    path = tmp_path / "kg.jsonl"
    path.write_text('{"entity": "A", "links": {"r": ["B"]}}\n', encoding="utf-8")
    graph = load_kg(path)
    assert graph.unknown_entity_queries == 0
    graph.one_hop_relations("missing")
    graph.neighbors("missing", "r")
    assert graph.unknown_entity_queries == 2


def test_neighbors(mini_kg):
    assert mini_kg.neighbors("A", "r") == ["B"]
    assert mini_kg.neighbors("B", "~r") == ["A"]
    assert mini_kg.neighbors("A", "nonexistent") == []


def test_reverse_label_toggles():
    assert reverse_label("mass") == "~mass"
    assert reverse_label("~mass") == "mass"


@given(labels)
def test_reverse_label_involution(label):
    assert reverse_label(reverse_label(label)) == label


def test_reverse_label_rejects_malformed():
    for bad in ("", "~", "~~x", "a~b"):
        with pytest.raises(KgError):
            reverse_label(bad)


def test_single_record_forces_reverse(tmp_path):
    path = tmp_path / "kg.jsonl"
    path.write_text('{"entity": "A", "links": {"r": ["B"]}}\n', encoding="utf-8")
    graph = load_kg(path)
    assert graph.one_hop_relations("B") == ["~r"]


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "kg.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(EmptyGraphError):
        load_kg(path)


def test_duplicate_entity_record_rejected(tmp_path):
    path = tmp_path / "kg.jsonl"
    path.write_text(
        '{"entity": "A", "links": {"r": ["B"]}}\n{"entity": "A", "links": {"s": ["C"]}}\n',
        encoding="utf-8",
    )
    with pytest.raises(DuplicateEntityError):
        load_kg(path)


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "kg.jsonl"
    path.write_text('{"entity": "A", "links": {}}\nnot json at all\n', encoding="utf-8")
    with pytest.raises(MalformedFileError) as info:
        load_kg(path)
    assert info.value.line == 2
    assert "line 2" in str(info.value)


@pytest.mark.parametrize(
    "record",
    [
        '{"links": {}}',
        '{"entity": "", "links": {}}',
        '{"entity": " A", "links": {}}',
        '{"entity": "A", "links": {"~~r": ["B"]}}',
        '{"entity": "A", "links": {"a~b": ["B"]}}',
        '{"entity": "A", "links": {"r": "B"}}',
        '{"entity": "A", "links": {"r": [""]}}',
        '["not", "an", "object"]',
    ],
)
def test_bad_records_rejected(tmp_path, record):
    path = tmp_path / "kg.jsonl"
    path.write_text(record + "\n", encoding="utf-8")
    with pytest.raises(MalformedFileError):
        load_kg(path)


def test_partial_reverse_file_repaired(fixtures_dir):
    graph = load_kg(fixtures_dir / "partial_reverse_kg.jsonl")
    # A-r-B was already mirrored; B-s-C, D-t-A, D-t-C were not.
    assert graph.closure_repairs == 3
    assert graph.neighbors("C", "~t") == ["D"]


def test_duplicate_triples_collapse(tmp_path):
    path = tmp_path / "kg.jsonl"
    path.write_text('{"entity": "A", "links": {"r": ["B", "B", "B"]}}\n', encoding="utf-8")
    graph = load_kg(path)
    assert graph.neighbors("A", "r") == ["B"]
    assert graph.edge_count == 2


def test_self_loop_accepted(tmp_path):
    path = tmp_path / "kg.jsonl"
    path.write_text('{"entity": "A", "links": {"r": ["A"]}}\n', encoding="utf-8")
    graph = load_kg(path)
    assert graph.neighbors("A", "r") == ["A"]
    assert graph.neighbors("A", "~r") == ["A"]


def test_tails_canonically_ordered(tmp_path):
    path = tmp_path / "kg.jsonl"
    path.write_text('{"entity": "A", "links": {"r": ["Z", "B", "M"]}}\n', encoding="utf-8")
    graph = load_kg(path)
    assert graph.neighbors("A", "r") == ["B", "M", "Z"]


def test_deterministic_loads(fixtures_dir):
    first = load_kg(fixtures_dir / "eval_kg.jsonl")
    second = load_kg(fixtures_dir / "eval_kg.jsonl")
    assert first.entities() == second.entities()
    for entity in first.entities():
        assert first.one_hop_relations(entity) == second.one_hop_relations(entity)
        for label in first.one_hop_relations(entity):
            assert first.neighbors(entity, label) == second.neighbors(entity, label)


@given(
    st.lists(
        st.tuples(entity_ids, st.dictionaries(labels, st.lists(entity_ids, min_size=1, max_size=3), max_size=3)),
        min_size=1,
        max_size=6,
        unique_by=lambda pair: pair[0],
    )
)
def test_reverse_closure_property(records):
    graph = KnowledgeGraph.from_records(records)
    for entity in graph.entities():
        for label in graph.one_hop_relations(entity):
            for tail in graph.neighbors(entity, label):
                assert entity in graph.neighbors(tail, reverse_label(label))


@given(
    st.lists(
        st.tuples(entity_ids, st.dictionaries(labels, st.lists(entity_ids, min_size=1, max_size=3), max_size=3)),
        min_size=1,
        max_size=6,
        unique_by=lambda pair: pair[0],
    )
)
def test_one_hop_equals_labels_with_nonempty_neighbors(records):
    graph = KnowledgeGraph.from_records(records)
    for entity in graph.entities():
        hop = graph.one_hop_relations(entity)
        assert hop == sorted(hop)
        assert all(graph.neighbors(entity, label) for label in hop)


def test_kg_jsonl_round_trip_of_reverse_marked_input(tmp_path):
    # a file that only states the reverse direction still closes correctly
    path = tmp_path / "kg.jsonl"
    path.write_text(json.dumps({"entity": "B", "links": {"~r": ["A"]}}) + "\n", encoding="utf-8")
    graph = load_kg(path)
    assert graph.neighbors("A", "r") == ["B"]
    assert graph.closure_repairs == 1
