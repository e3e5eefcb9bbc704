import json
from dataclasses import replace

import pytest

from actsim.architecture import (
    ArchitectureGraph,
    GeometryError,
    QubitNode,
    Species,
    attach_actuator_layer,
    bridge_between,
    build_conveyor_belt,
    build_ladder,
    build_star,
    ladder_index,
    resource_summary,
    validate,
)

NS = [2, 4, 6, 8]
LADDERS = ["three_species", "two_species_lowoverhead"]
CONVEYORS = ["three_register", "single_register"]


def all_builds():
    for N in NS:
        for v in LADDERS:
            yield f"ladder-{v}-{N}", build_ladder(N, v)
            yield f"ladder-act-{v}-{N}", build_ladder(N, "actuator_variant", base=v)
        for v in CONVEYORS:
            yield f"conveyor-{v}-{N}", build_conveyor_belt(N, v)
            yield f"conveyor-act-{v}-{N}", build_conveyor_belt(N, "actuator_variant", base=v)


BUILDS = list(all_builds())


@pytest.mark.parametrize("name,graph", BUILDS, ids=[b[0] for b in BUILDS])
def test_builders_produce_valid_graphs(name, graph):
    report = validate(graph)
    assert report.ok, report.violations


@pytest.mark.parametrize("name,graph", BUILDS, ids=[b[0] for b in BUILDS])
def test_detuning_rule_holds_everywhere(name, graph):
    drive = {s.id: s.drive_frequency for s in graph.species}
    for node in graph.nodes:
        kappa = sum(1 for e in graph.edges if node.index in e)
        assert node.coordination == kappa
        assert node.transition_frequency == pytest.approx(drive[node.species] + kappa * graph.zeta, rel=1e-15)


@pytest.mark.parametrize("N", NS)
def test_ladder_three_species_counts(N):
    s = resource_summary(build_ladder(N, "three_species"))
    assert (s.physical_qubits, s.crossed, s.double_crossed, s.drive_lines) == (2 * N * N + 4 * N - 1, 3 * N - 1, 0, 3)


@pytest.mark.parametrize("N", NS)
def test_ladder_low_overhead_counts(N):
    s = resource_summary(build_ladder(N, "two_species_lowoverhead"))
    assert (s.physical_qubits, s.crossed, s.double_crossed, s.drive_lines) == (
        2 * N * N + 4 * N - 1, N // 2 - 1, N + N // 2, 2,
    )


@pytest.mark.parametrize("N", NS)
def test_conveyor_counts(N):
    three = resource_summary(build_conveyor_belt(N, "three_register"))
    single = resource_summary(build_conveyor_belt(N, "single_register"))
    assert (three.physical_qubits, three.crossed, three.drive_lines) == (4 * N + 1, 2, 2)
    assert (single.physical_qubits, single.crossed, single.double_crossed, single.drive_lines) == (2 * N + 1, N, 2, 2)


@pytest.mark.parametrize("N", NS)
@pytest.mark.parametrize("base", LADDERS)
def test_ladder_actuator_overhead(N, base):
    plain = resource_summary(build_ladder(N, base))
    act = resource_summary(build_ladder(N, "actuator_variant", base=base))
    assert act.actuators == N - 1
    assert act.drive_lines == plain.drive_lines + 1
    assert act.physical_qubits == plain.physical_qubits


@pytest.mark.parametrize("N", NS)
@pytest.mark.parametrize("base", CONVEYORS)
def test_conveyor_actuator_overhead(N, base):
    act = resource_summary(build_conveyor_belt(N, "actuator_variant", base=base))
    assert act.actuators == 1
    assert act.drive_lines == 3


def test_ladder_n2_examples():
    g = build_ladder(2, "three_species")
    s = resource_summary(g)
    assert (s.physical_qubits, s.crossed, s.drive_lines) == (15, 5, 3)
    assert resource_summary(build_ladder(4, "three_species")).physical_qubits == 47


def test_conveyor_n4_single_register():
    s = resource_summary(build_conveyor_belt(4, "single_register"))
    assert s.physical_qubits == 9 and s.crossed == 4


@pytest.mark.parametrize("N", [1, 3, 0, -2])
def test_odd_or_small_n_rejected(N):
    with pytest.raises(GeometryError):
        build_ladder(N)
    with pytest.raises(GeometryError):
        build_conveyor_belt(N)


def test_unknown_variant():
    with pytest.raises(GeometryError):
        build_ladder(2, "hexagonal")


def test_ladder_index_layout():
    g = build_ladder(2)
    assert ladder_index(2, 1, 0) == 7
    assert g.nodes[ladder_index(2, 0, 1)].coupling_class == "crossed"


def test_conveyor_off_loop_couples_three_computational():
    g = build_conveyor_belt(4, "three_register")
    off = g.n_qubits - 1
    assert sorted(g.neighbors(off)) == [0, 4, 8]
    assert all(g.nodes[q].role == "computational" for q in g.neighbors(off))


class TestValidate:
    def _pair(self, s0, s1):
        species = (Species("A", 1.0), Species("B", 2.0))
        return ArchitectureGraph.build(species, [QubitNode(0, s0), QubitNode(1, s1)], [(0, 1)], zeta=0.1)

    def test_same_species_edge(self):
        report = validate(self._pair("A", "A"))
        assert [v.where for v in report.of_kind("P1")] == [(0, 1)]

    def test_detuning_violation(self):
        g = self._pair("A", "B")
        bad = replace(g, nodes=(replace(g.nodes[0], transition_frequency=5.0), g.nodes[1]))
        assert [v.where for v in validate(bad).of_kind("detuning")] == [(0,)]

    def test_malformed_edges(self):
        g = self._pair("A", "B")
        bad = replace(g, edges=((0, 0), (0, 1), (0, 1), (0, 7)))
        kinds = [v.kind for v in validate(bad).violations]
        assert kinds.count("malformed_edge") == 3

    def test_valid_pair(self):
        assert validate(self._pair("A", "B")).ok


class TestActuatorLayer:
    def test_empty_region_is_noop(self):
        g = build_ladder(2)
        assert attach_actuator_layer(g, []) is g

    def test_single_node(self):
        g = build_ladder(2)
        h = attach_actuator_layer(g, [3])
        assert h.n_qubits == g.n_qubits + 1
        assert len(h.edges) == len(g.edges) + 1
        assert len(h.species) == len(g.species) + 1
        assert validate(h).ok

    def test_full_row(self):
        g = build_ladder(2)
        row = sorted(g.mask("row0").members)
        h = attach_actuator_layer(g, row)
        assert resource_summary(h).actuators == 7
        assert validate(h).ok
        assert h.mask("freeze0").members == frozenset(row)

    def test_actuator_region_rejected(self):
        g = build_conveyor_belt(2, "actuator_variant")
        with pytest.raises(GeometryError):
            attach_actuator_layer(g, [g.n_qubits - 1])

    def test_stacking_layers_counts(self):
        g = build_conveyor_belt(4, "single_register")
        h = attach_actuator_layer(attach_actuator_layer(g, [1, 3]), [5])
        assert resource_summary(h).actuators == 3
        assert validate(h).ok


class TestBridge:
    def test_actuator_modules(self):
        a = build_conveyor_belt(2, "actuator_variant")
        b = build_conveyor_belt(2, "actuator_variant")
        g = bridge_between(a, b, (0, 0))
        assert validate(g).ok
        assert resource_summary(g).actuators == 3
        names = {m.name for m in g.masks}
        assert {"L.module", "R.module", "bridge"} <= names

    def test_same_object_rejected(self):
        a = build_conveyor_belt(2)
        with pytest.raises(GeometryError):
            bridge_between(a, a, (0, 0))

    def test_boundary_out_of_range(self):
        with pytest.raises(GeometryError):
            bridge_between(build_conveyor_belt(2), build_conveyor_belt(2), (0, 99))


class TestSerialisation:
    @pytest.mark.parametrize("name,graph", BUILDS[:8], ids=[b[0] for b in BUILDS[:8]])
    def test_round_trip_bit_exact(self, name, graph, tmp_path):
        path = tmp_path / "g.json"
        graph.save(path)
        again = ArchitectureGraph.load(path)
        assert again == graph
        assert again.digest() == graph.digest()
        again.save(tmp_path / "h.json")
        assert (tmp_path / "h.json").read_bytes() == path.read_bytes()

    def test_malformed_document(self):
        with pytest.raises(ValueError):
            ArchitectureGraph.from_dict({"nodes": []})

    def test_schema_keys(self):
        doc = build_star(2).to_dict()
        assert set(doc) == {"zeta", "base_coupling", "species", "nodes", "edges", "masks"}
        assert set(doc["nodes"][0]) == {"index", "species", "class", "role"}
        json.dumps(doc)


def test_empty_graph_summary():
    g = ArchitectureGraph.build([], [], [])
    s = resource_summary(g)
    assert (s.drive_lines, s.physical_qubits, s.crossed, s.double_crossed, s.actuators) == (0, 0, 0, 0, 0)


def test_star_builder():
    g = build_star(3)
    assert validate(g).ok
    assert sorted(g.neighbors(3)) == [0, 1, 2]
    assert build_star(0).n_qubits == 1
