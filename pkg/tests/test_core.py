import pytest

from qrs.core import (AgentCursor, FlowSpec, Kind, Link, Path, Priority, Station, Topology,
                      validate_path)

from helpers import chain, spec


def test_validate_path_on_chain():
    topo = chain(3)
    assert validate_path(Path([0, 1, 2]), topo)
    assert not validate_path(Path([0, 2]), topo)


def test_path_rejects_repeats_and_singletons():
    with pytest.raises(ValueError):
        Path([0, 1, 0])
    with pytest.raises(ValueError):
        Path([4])


def test_validate_path_unknown_station():
    assert not validate_path(Path([0, 7]), chain(3))


def test_flowspec_invariants():
    with pytest.raises(ValueError):
        FlowSpec(0, 1000, 10)
    with pytest.raises(ValueError):
        FlowSpec(10, 0, 10)
    with pytest.raises(ValueError):
        FlowSpec(10, 10, 0)
    s = FlowSpec(1_000_000, 1000, 5000, Priority.INTERACTIVE)
    assert s.jitter_bound == pytest.approx(0.005)


def test_station_available_defaults_to_capacity():
    s = Station(0, Kind.ROUTER, 500)
    assert s.available == 500 and s.up and s.is_router
    with pytest.raises(ValueError):
        Station(1, Kind.HOST, 100, available=200)


def test_link_invariants():
    with pytest.raises(ValueError):
        Link(1, 1, 10, 0.0)
    with pytest.raises(ValueError):
        Link(0, 1, 0, 0.0)
    with pytest.raises(ValueError):
        Link(0, 1, 10, 0.0, queue_capacity=0)


def test_topology_rejects_disconnected_and_duplicates():
    stations = [Station(i, Kind.ROUTER, 10) for i in range(3)]
    with pytest.raises(ValueError):
        Topology(stations, [Link(0, 1, 10, 0.0)])
    with pytest.raises(ValueError):
        Topology(stations, [Link(0, 1, 10, 0.0), Link(1, 0, 10, 0.0), Link(1, 2, 10, 0.0)])


def test_topology_adjacency_sorted():
    topo = chain(4)
    assert topo.adj[1] == [0, 2]
    assert topo.has_link(2, 1) and not topo.has_link(0, 2)


def test_cursor_invariants():
    with pytest.raises(ValueError):
        AgentCursor(sw=0, sc=1)
    with pytest.raises(ValueError):
        AgentCursor(tr=0)


def test_spec_helper_defaults():
    assert spec().rate == 1_000_000
