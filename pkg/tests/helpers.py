"""Shared builders, oracles and hypothesis strategies for the test suite."""

import itertools
import random

from hypothesis import strategies as st

from qrs import wire
from qrs.core import FlowSpec, Kind, Link, Path, Priority, Station, Topology
from qrs.scenario import FailureConfig, FlowConfig, Scenario

MBPS = 1_000_000


def spec(rate=MBPS, burst=1000, jitter_us=5000, priority=Priority.STREAMING):
    return FlowSpec(rate, burst, jitter_us, priority)


def topology(n, edges, hosts=(), capacity=4 * MBPS, bandwidth=2 * MBPS, prop=0.001,
             queue=400):
    stations = [Station(i, Kind.HOST if i in hosts else Kind.ROUTER, capacity) for i in range(n)]
    links = [Link(a, b, bandwidth, prop, queue) for a, b in edges]
    return Topology(stations, links)


def chain(n, **kw):
    return topology(n, [(i, i + 1) for i in range(n - 1)], **kw)


def square(**kw):
    # 0 - 1 - 3 and 0 - 2 - 3
    return topology(4, [(0, 1), (1, 3), (0, 2), (2, 3)], **kw)


def random_connected_graph(rng: random.Random, n: int, p: float):
    """Random spanning tree plus extra edges with probability ``p``."""
    order = list(range(n))
    rng.shuffle(order)
    edges = set()
    for i in range(1, n):
        a, b = order[i], order[rng.randrange(i)]
        edges.add((min(a, b), max(a, b)))
    for a, b in itertools.combinations(range(n), 2):
        if rng.random() < p:
            edges.add((a, b))
    return sorted(edges)


def all_simple_paths(adj, src, dst, banned=frozenset()):
    """Brute force loop-free path enumeration by depth-first search."""
    out = []

    def walk(node, seen):
        if node == dst:
            out.append(list(seen))
            return
        for nxt in adj[node]:
            if nxt not in seen and nxt not in banned:
                seen.append(nxt)
                walk(nxt, seen)
                seen.pop()

    if src not in banned:
        walk(src, [src])
    return out


def brute_diff(old, new):
    """Positional comparator written independently from the library."""
    same, d1, d2 = [], [], []
    h = 0
    for i in range(max(len(old), len(new))):
        a = old[i] if i < len(old) else None
        b = new[i] if i < len(new) else None
        if a is not None and a == b:
            same.append(a)
            continue
        if a is not None and b is not None:
            h += 1
        if a is not None:
            d1.append(a)
        if b is not None:
            d2.append(b)
    return same, d1, d2, h, len(same)


def flow(sender, receiver, rate=200_000, pkt=1000, start=0.0, stop=10.0, deps=()):
    return FlowConfig(sender, receiver, spec(rate, pkt), pkt, start, stop, tuple(deps))


def failure(time, station, available=None):
    return FailureConfig(time, station, available)


def scenario(topo, flows, failures=(), **kw):
    return Scenario(topo, list(flows), list(failures), **kw)


# -- hypothesis strategies for wire messages -----------------------------

u32 = st.integers(0, 2**32 - 1)
u16ish = st.integers(0, 2**16 - 1)


@st.composite
def paths(draw, max_len=12):
    ids = draw(st.lists(u32, min_size=2, max_size=max_len, unique=True))
    return Path(ids)


flowspecs = st.builds(FlowSpec, st.integers(1, 2**64 - 1), st.integers(1, 2**32 - 1),
                      st.integers(1, 2**32 - 1), st.sampled_from(list(Priority)))
station_specs = st.lists(st.tuples(u32, flowspecs), max_size=6).map(tuple)

messages = st.one_of(
    st.builds(wire.SenderUpdate, u32, u32, paths(), flowspecs),
    st.builds(wire.RouteRequest, u32, paths(), u32,
              st.lists(u32, max_size=6).map(tuple)),
    st.builds(wire.RouteReply, u32, st.lists(paths(), max_size=4).map(tuple)),
    st.builds(wire.AnalyzeRequest, u32, paths(), paths()),
    st.builds(wire.AnalyzeReply, u32, flowspecs, station_specs),
    st.builds(wire.QosExtractRequest, u32, paths()),
    st.builds(wire.QosExtractReply, u32, flowspecs),
    st.builds(wire.DetectorAlarm, u32, u32, flowspecs),
    st.builds(wire.CumulativeAlarm, u32,
              st.lists(st.tuples(u32, flowspecs), min_size=1, max_size=6).map(tuple)),
)


def random_message(rng: random.Random):
    """Plain-random generator used for the 10k round trip (cheaper than hypothesis)."""

    def rpath():
        return Path(rng.sample(range(1, 2**32), rng.randint(2, 10)))

    def rspec():
        return FlowSpec(rng.randint(1, 2**64 - 1), rng.randint(1, 2**32 - 1),
                        rng.randint(1, 2**32 - 1), rng.choice(list(Priority)))

    def rid():
        return rng.randint(0, 2**32 - 1)

    kind = rng.randrange(9)
    if kind == 0:
        return wire.SenderUpdate(rid(), rid(), rpath(), rspec())
    if kind == 1:
        return wire.RouteRequest(rid(), rpath(), rid(), tuple(rid() for _ in range(rng.randint(0, 4))))
    if kind == 2:
        return wire.RouteReply(rid(), tuple(rpath() for _ in range(rng.randint(0, 4))))
    if kind == 3:
        return wire.AnalyzeRequest(rid(), rpath(), rpath())
    if kind == 4:
        return wire.AnalyzeReply(rid(), rspec(), tuple((rid(), rspec()) for _ in range(rng.randint(0, 4))))
    if kind == 5:
        return wire.QosExtractRequest(rid(), rpath())
    if kind == 6:
        return wire.QosExtractReply(rid(), rspec())
    if kind == 7:
        return wire.DetectorAlarm(rid(), rid(), rspec())
    return wire.CumulativeAlarm(rid(), tuple((rid(), rspec()) for _ in range(rng.randint(1, 5))))
