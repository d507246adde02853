"""Static overlay graphs: fully connected, ring, and star."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InputError

KINDS = ("fully", "ring", "star")


@dataclass(frozen=True)
class TopologyGraph:
    """Undirected client graph; adjacency[k] lists k's neighbors ascending."""

    kind: str
    clients: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[tuple[int, ...], ...]


def build(kind: str, clients: int) -> TopologyGraph:
    """Construct an overlay graph over ``clients`` nodes.

    fully: every pair connected (K >= 2). ring: i <-> (i+1) mod K (K >= 3).
    star: hub is client 0 (K >= 2).
    """
    if kind not in KINDS:
        raise InputError(f"unknown topology '{kind}'; valid options: {list(KINDS)}")
    minimum = 3 if kind == "ring" else 2
    if clients < minimum:
        raise InputError(f"{kind} topology needs at least {minimum} clients, got {clients}")

    if kind == "fully":
        edges = [(i, j) for i in range(clients) for j in range(i + 1, clients)]
    elif kind == "ring":
        edges = [tuple(sorted((i, (i + 1) % clients))) for i in range(clients)]
    else:
        edges = [(0, j) for j in range(1, clients)]

    edges = sorted(set(edges))
    neighbor_sets: list[set[int]] = [set() for _ in range(clients)]
    for a, b in edges:
        neighbor_sets[a].add(b)
        neighbor_sets[b].add(a)
    adjacency = tuple(tuple(sorted(s)) for s in neighbor_sets)
    return TopologyGraph(kind, clients, tuple(edges), adjacency)


def neighbors(graph: TopologyGraph, client: int) -> list[int]:
    """Ascending list of the client's one-hop neighbors."""
    if not 0 <= client < graph.clients:
        raise InputError(f"client {client} out of range [0, {graph.clients})")
    return list(graph.adjacency[client])
