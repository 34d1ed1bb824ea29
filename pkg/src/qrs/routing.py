"""Hop-count routing with deterministic tie-breaking.

Paths are totally ordered by ``(hop count, station-id sequence)``; every
function here returns the minimum under that order, which keeps routing
reproducible for a fixed topology.
"""

from __future__ import annotations

import heapq
from collections import deque
from typing import Iterable, Optional

from .core import Path, StationId, Topology


class Unreachable(Exception):
    pass


class NoAlternativePath(Exception):
    pass


def _best_path(adj, src, dst, banned_nodes=frozenset(), banned_edges=frozenset()) -> Optional[list]:
    """Lexicographically smallest among the min-hop paths, or None."""
    if src in banned_nodes or dst in banned_nodes:
        return None
    # BFS backwards from dst gives hop distances; a greedy smallest-id walk
    # from src along decreasing distance is then the lexicographic minimum.
    dist = {dst: 0}
    frontier = deque([dst])
    while frontier:
        u = frontier.popleft()
        for v in adj[u]:
            if v in dist or v in banned_nodes or (v, u) in banned_edges:
                continue
            dist[v] = dist[u] + 1
            frontier.append(v)
    if src not in dist:
        return None
    path = [src]
    u = src
    while u != dst:
        u = next(v for v in adj[u]
                 if dist.get(v) == dist[u] - 1 and (u, v) not in banned_edges)
        path.append(u)
    return path


def shortest_path(topo: Topology, src: StationId, dst: StationId,
                  avoid: Iterable[StationId] = ()) -> Path:
    if src == dst:
        raise ValueError("source and destination coincide")
    found = _best_path(topo.adj, src, dst, frozenset(avoid))
    if found is None:
        raise Unreachable(f"no path {src} -> {dst}")
    return Path(found)


def _order(p):
    return (len(p), tuple(p))


def k_best_paths(adj, src, dst, k: int, banned=frozenset()) -> list[list]:
    """Yen's deviation scheme under the (hops, ids) total order."""
    first = _best_path(adj, src, dst, banned)
    if first is None:
        return []
    found = [first]
    seen = {tuple(first)}
    heap: list = []
    while len(found) < k:
        prev = found[-1]
        for i in range(len(prev) - 1):
            root = prev[:i + 1]
            spur = prev[i]
            cut_edges = {(p[i], p[i + 1]) for p in found
                         if len(p) > i + 1 and p[:i + 1] == root}
            spur_path = _best_path(adj, spur, dst,
                                   banned | frozenset(root[:-1]), frozenset(cut_edges))
            if spur_path is None:
                continue
            cand = root[:-1] + spur_path
            key = tuple(cand)
            if key not in seen:
                seen.add(key)
                heapq.heappush(heap, (_order(cand), cand))
        if not heap:
            break
        found.append(heapq.heappop(heap)[1])
    return found


def alternative_paths(topo: Topology, old: Path, failed: StationId, k: int = 4,
                      rejected: Iterable[StationId] = ()) -> list[Path]:
    """Up to ``k`` loop-free sender->receiver paths avoiding ``failed`` and ``rejected``."""
    if failed not in old:
        raise ValueError(f"station {failed} is not on {old}")
    if k < 1:
        raise ValueError("k must be at least 1")
    banned = frozenset(rejected) | {failed}
    paths = k_best_paths(topo.adj, old.sender, old.receiver, k, banned)
    if not paths:
        raise NoAlternativePath(f"nothing from {old.sender} to {old.receiver} avoids {sorted(banned)}")
    return [Path(p) for p in paths]
