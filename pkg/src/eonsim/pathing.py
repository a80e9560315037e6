"""Candidate path precomputation: K shortest (KSP) and K link-disjoint (KDSP) paths.

Paths are enumerated loopless (Yen-style, via networkx) with geographic
length as the edge weight, then ordered deterministically by
``(length_km, hop_count, link_ids)`` so two runs over the same topology
produce byte-identical catalogs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping

import networkx as nx

from .errors import NoPathError
from .topology import Link, Topology

# Guard against last-ulp differences between networkx's internal path weights
# and our recomputed sums when deciding where enumeration may stop.
_LENGTH_SLACK = 1e-9


class CatalogMode(str, Enum):
    KSP = "ksp"
    KDSP = "kdsp"


@dataclass(frozen=True)
class CandidatePath:
    """A simple path with the attributes the RMSA loop consumes."""

    source: str
    destination: str
    node_ids: tuple[str, ...]
    link_ids: tuple[int, ...]
    links: tuple[Link, ...]
    hop_count: int
    length_km: float
    span_count: int

    def sort_key(self) -> tuple[float, int, tuple[int, ...]]:
        return (self.length_km, self.hop_count, self.link_ids)


@dataclass(frozen=True)
class PathCatalog:
    """Precomputed candidate paths for every unordered node pair."""

    mode: CatalogMode
    k: int
    paths: Mapping[tuple[str, str], tuple[CandidatePath, ...]]

    def entry(self, src: str, des: str) -> tuple[CandidatePath, ...]:
        key = (src, des) if src < des else (des, src)
        return self.paths[key]

    def all_paths(self) -> Iterator[CandidatePath]:
        for candidates in self.paths.values():
            yield from candidates


def _graph(topology: Topology) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(topology.node_ids)
    for link in topology.links:
        g.add_edge(link.a, link.b, weight=link.length_km, link=link)
    return g


def _as_candidate(topology_graph: nx.Graph, nodes: list[str]) -> CandidatePath:
    links = tuple(topology_graph[u][v]["link"] for u, v in zip(nodes, nodes[1:]))
    return CandidatePath(
        source=nodes[0],
        destination=nodes[-1],
        node_ids=tuple(nodes),
        link_ids=tuple(l.id for l in links),
        links=links,
        hop_count=len(links),
        length_km=sum(l.length_km for l in links),
        span_count=sum(l.span_count for l in links),
    )


def _k_shortest_on_graph(graph: nx.Graph, src: str, des: str, k: int) -> list[CandidatePath]:
    """Deterministic k-shortest over an already-built graph.

    networkx yields paths in nondecreasing weight order but breaks ties
    arbitrarily, so enumeration continues until the next path is strictly
    longer than the current k-th best, then the collected set is re-sorted
    under the full (length, hops, link ids) key.
    """
    if src == des:
        raise ValueError("source and destination must differ")
    if src not in graph or des not in graph:
        raise ValueError(f"unknown endpoint in ({src!r}, {des!r})")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    found: list[CandidatePath] = []
    try:
        generator = nx.shortest_simple_paths(graph, src, des, weight="weight")
        for nodes in generator:
            candidate = _as_candidate(graph, nodes)
            if len(found) >= k:
                kth = sorted(p.length_km for p in found)[k - 1]
                if candidate.length_km > kth + _LENGTH_SLACK:
                    break
            found.append(candidate)
    except nx.NetworkXNoPath as exc:
        raise NoPathError(f"no path between {src!r} and {des!r}") from exc
    found.sort(key=CandidatePath.sort_key)
    return found[:k]


def k_shortest_paths(topology: Topology, src: str, des: str, k: int) -> list[CandidatePath]:
    """The k loopless minimum-length paths between src and des (fewer if fewer exist).

    Raises:
        NoPathError: src and des are disconnected (or equal).
    """
    return _k_shortest_on_graph(_graph(topology), src, des, k)


def k_disjoint_shortest_paths(topology: Topology, src: str, des: str, k: int) -> list[CandidatePath]:
    """Greedy link-disjoint variant: shortest path, remove its links, repeat.

    Returns up to k pairwise link-disjoint paths; may be suboptimal versus a
    flow-based disjoint pair, but is deterministic and its first path equals
    the first KSP path.
    """
    graph = _graph(topology)
    result: list[CandidatePath] = []
    for round_index in range(k):
        try:
            best = _k_shortest_on_graph(graph, src, des, 1)[0]
        except NoPathError:
            if round_index == 0:
                raise
            break
        result.append(best)
        graph.remove_edges_from(zip(best.node_ids, best.node_ids[1:]))
    return result


def build_catalog(topology: Topology, mode: CatalogMode | str, k: int) -> PathCatalog:
    """Precompute candidate paths for every unordered node pair."""
    mode = CatalogMode(mode)
    graph = _graph(topology)
    ids = sorted(topology.node_ids)
    catalog: dict[tuple[str, str], tuple[CandidatePath, ...]] = {}
    for i, src in enumerate(ids):
        for des in ids[i + 1:]:
            if mode is CatalogMode.KSP:
                paths = _k_shortest_on_graph(graph, src, des, k)
            else:
                paths = k_disjoint_shortest_paths(topology, src, des, k)
            catalog[(src, des)] = tuple(paths)
    return PathCatalog(mode=mode, k=k, paths=catalog)


def dump_catalog(catalog: PathCatalog, path: str | Path) -> None:
    """Write the catalog to a JSON file for inspection."""
    payload = {
        "mode": catalog.mode.value,
        "k": catalog.k,
        "connections": [
            {
                "src": src,
                "des": des,
                "paths": [
                    {
                        "nodes": list(p.node_ids),
                        "link_ids": list(p.link_ids),
                        "hop_count": p.hop_count,
                        "length_km": p.length_km,
                        "span_count": p.span_count,
                    }
                    for p in paths
                ],
            }
            for (src, des), paths in sorted(catalog.paths.items())
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
