"""Network graph model: nodes, links, spans and the nodal-degree connection PDF.

A topology is loaded from a JSON file, validated (connected, simple, positive
lengths), and every link is partitioned into amplified spans.  Instances are
immutable after load and safe to share across parallel replications.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import TopologyError

DEFAULT_TARGET_SPAN_KM = 70.0

_SPAN_SUM_TOL_KM = 1e-9


@dataclass(frozen=True)
class BandFiberParams:
    """Fiber attenuation and amplifier noise figure for one transmission band."""

    attenuation_db_per_km: float
    noise_figure_db: float

    def __post_init__(self):
        if self.attenuation_db_per_km <= 0:
            raise TopologyError(f"attenuation must be positive, got {self.attenuation_db_per_km}")
        if self.noise_figure_db <= 0:
            raise TopologyError(f"noise figure must be positive, got {self.noise_figure_db}")


#: Per-band fiber defaults: 4.5/6 dB EDFA noise figures in C/L, attenuation at
#: typical G.652.D values.  Overridable at file and link level.
DEFAULT_BAND_PARAMS: Mapping[str, BandFiberParams] = {
    "C": BandFiberParams(attenuation_db_per_km=0.20, noise_figure_db=4.5),
    "L": BandFiberParams(attenuation_db_per_km=0.22, noise_figure_db=6.0),
}


@dataclass(frozen=True)
class Span:
    """One amplified fiber span with its per-band physical parameters."""

    length_km: float
    band_params: Mapping[str, BandFiberParams]

    def __post_init__(self):
        if self.length_km <= 0:
            raise TopologyError(f"span length must be positive, got {self.length_km}")


@dataclass(frozen=True)
class Node:
    id: str
    degree: int


@dataclass(frozen=True)
class Link:
    """Undirected edge with physical length and its span partition."""

    id: int
    a: str
    b: str
    length_km: float
    spans: tuple[Span, ...]

    def __post_init__(self):
        if self.a == self.b:
            raise TopologyError(f"link {self.id} is a self-loop on node {self.a!r}")
        if self.length_km <= 0:
            raise TopologyError(f"link {self.id} has nonpositive length {self.length_km}")
        if not self.spans:
            raise TopologyError(f"link {self.id} has no spans")
        span_sum = sum(s.length_km for s in self.spans)
        if abs(span_sum - self.length_km) > _SPAN_SUM_TOL_KM:
            raise TopologyError(
                f"link {self.id}: span lengths sum to {span_sum} km, expected {self.length_km} km"
            )

    @property
    def endpoints(self) -> frozenset[str]:
        return frozenset((self.a, self.b))

    @property
    def span_count(self) -> int:
        return len(self.spans)

    def other(self, node_id: str) -> str:
        if node_id == self.a:
            return self.b
        if node_id == self.b:
            return self.a
        raise KeyError(f"node {node_id!r} is not an endpoint of link {self.id}")


@dataclass(frozen=True)
class Topology:
    """Validated, immutable network graph."""

    name: str
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    adjacency: Mapping[str, tuple[int, ...]] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_links_by_id", {link.id: link for link in self.links})

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def link(self, link_id: int) -> Link:
        return self._links_by_id[link_id]

    def incident_links(self, node_id: str) -> tuple[Link, ...]:
        return tuple(self._links_by_id[i] for i in self.adjacency[node_id])


@dataclass(frozen=True)
class ConnectionPdf:
    """Nodal-degree sampling distribution over unordered node pairs.

    Pairs are kept in lexicographic order so that inverse-CDF sampling over
    the cumulative vector is reproducible.
    """

    pairs: tuple[tuple[str, str], ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        total = math.fsum(self.probabilities)
        if abs(total - 1.0) > 1e-12:
            raise TopologyError(f"connection PDF sums to {total}, expected 1")
        if any(p <= 0 for p in self.probabilities):
            raise TopologyError("connection PDF has a nonpositive entry")

    @property
    def entries(self) -> dict[tuple[str, str], float]:
        return dict(zip(self.pairs, self.probabilities))

    def probability(self, src: str, des: str) -> float:
        key = (src, des) if src < des else (des, src)
        return self.entries[key]


def partition_spans(
    length_km: float,
    target_span_km: float = DEFAULT_TARGET_SPAN_KM,
    band_params: Mapping[str, BandFiberParams] | None = None,
) -> list[Span]:
    """Split a link into ``ceil(length/target)`` equal-length spans.

    Equal split keeps every span at or below the target length and avoids a
    short runt span at the end of the link.
    """
    if length_km <= 0 or target_span_km <= 0:
        raise TopologyError("partition_spans requires positive lengths")
    params = dict(band_params) if band_params is not None else dict(DEFAULT_BAND_PARAMS)
    # 1e-12 relative guard: float division may land a hair above an exact
    # integer ratio, which would add a spurious span.
    ratio = length_km / target_span_km
    count = math.ceil(ratio - 1e-12 * ratio)
    count = max(count, 1)
    span_length = length_km / count
    return [Span(length_km=span_length, band_params=params) for _ in range(count)]


def connection_pdf(topology: Topology) -> ConnectionPdf:
    """Nodal-degree PDF over unordered node pairs: D_src*D_des / sum over pairs."""
    nodes = topology.nodes
    if len(nodes) < 2:
        raise TopologyError("connection PDF needs at least 2 nodes")
    degree = {n.id: n.degree for n in nodes}
    ids = sorted(degree)
    pairs = [(a, b) for i, a in enumerate(ids) for b in ids[i + 1:]]
    weights = [degree[a] * degree[b] for a, b in pairs]
    denom = sum(weights)
    probs = [w / denom for w in weights]
    # exact normalization: put the float residue on the largest entry
    residue = 1.0 - math.fsum(probs)
    if residue != 0.0:
        top = max(range(len(probs)), key=probs.__getitem__)
        probs[top] += residue
    return ConnectionPdf(pairs=tuple(pairs), probabilities=tuple(probs))


def _build(name: str, node_ids: list[str], link_specs: list[dict]) -> Topology:
    """Assemble and validate a Topology from parsed pieces."""
    if len(node_ids) != len(set(node_ids)):
        raise TopologyError("duplicate node ids")
    seen_pairs: set[frozenset[str]] = set()
    seen_ids: set[int] = set()
    links = []
    for spec in link_specs:
        link = Link(**spec)
        if link.id in seen_ids:
            raise TopologyError(f"duplicate link id {link.id}")
        if link.a not in node_ids or link.b not in node_ids:
            raise TopologyError(f"link {link.id} references unknown node")
        if link.endpoints in seen_pairs:
            raise TopologyError(f"parallel link between {link.a!r} and {link.b!r} rejected")
        seen_ids.add(link.id)
        seen_pairs.add(link.endpoints)
        links.append(link)

    adjacency: dict[str, list[int]] = {n: [] for n in node_ids}
    for link in links:
        adjacency[link.a].append(link.id)
        adjacency[link.b].append(link.id)

    # connectivity check (BFS)
    if node_ids:
        by_id = {link.id: link for link in links}
        seen = {node_ids[0]}
        frontier = [node_ids[0]]
        while frontier:
            current = frontier.pop()
            for lid in adjacency[current]:
                nxt = by_id[lid].other(current)
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        if len(seen) != len(node_ids):
            missing = sorted(set(node_ids) - seen)
            raise TopologyError(f"graph is disconnected; unreachable nodes: {missing}")

    nodes = tuple(Node(id=n, degree=len(adjacency[n])) for n in node_ids)
    if any(n.degree < 1 for n in nodes):
        raise TopologyError("every node must have degree >= 1")
    return Topology(
        name=name,
        nodes=nodes,
        links=tuple(links),
        adjacency={n: tuple(ids) for n, ids in adjacency.items()},
    )


def _parse_band_params(raw: dict, where: str) -> dict[str, BandFiberParams]:
    params = {}
    for band, values in raw.items():
        try:
            params[band] = BandFiberParams(
                attenuation_db_per_km=float(values["attenuation_db_per_km"]),
                noise_figure_db=float(values["noise_figure_db"]),
            )
        except (KeyError, TypeError) as exc:
            raise TopologyError(f"bad band_params for {where}: {exc}") from exc
    return params


def load_topology(
    path: str | Path,
    band_params: Mapping[str, BandFiberParams] | None = None,
    target_span_km: float | None = None,
) -> Topology:
    """Load, validate and span-partition a topology from a JSON file.

    The file provides ``nodes: [{id}]`` and ``links: [{id, a, b, length_km}]``;
    links may carry an explicit ``span_lengths_km`` list that overrides the
    equal-split partition, plus per-link ``band_params``.  File-level
    ``band_params`` and ``target_span_km`` act as defaults.

    Args:
        path: topology file location.
        band_params: per-band fiber defaults; file-level values win over these.
        target_span_km: span partition target; overrides the file-level value.

    Raises:
        TopologyError: on parse failures or any structural invariant violation.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise TopologyError(f"cannot read topology file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise TopologyError(f"malformed topology file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise TopologyError("topology file must hold a JSON object")

    defaults = dict(band_params) if band_params is not None else dict(DEFAULT_BAND_PARAMS)
    if "band_params" in raw:
        defaults.update(_parse_band_params(raw["band_params"], "file defaults"))
    if target_span_km is None:
        target_span_km = float(raw.get("target_span_km", DEFAULT_TARGET_SPAN_KM))

    try:
        node_ids = [str(n["id"]) for n in raw["nodes"]]
        raw_links = raw["links"]
    except (KeyError, TypeError) as exc:
        raise TopologyError(f"topology file missing nodes/links: {exc}") from exc

    link_specs = []
    for entry in raw_links:
        try:
            link_id = int(entry["id"])
            a, b = str(entry["a"]), str(entry["b"])
            length_km = float(entry["length_km"])
        except (KeyError, TypeError, ValueError) as exc:
            raise TopologyError(f"malformed link entry {entry!r}: {exc}") from exc
        params = dict(defaults)
        if "band_params" in entry:
            params.update(_parse_band_params(entry["band_params"], f"link {link_id}"))
        if "span_lengths_km" in entry:
            lengths = [float(x) for x in entry["span_lengths_km"]]
            spans = tuple(Span(length_km=x, band_params=params) for x in lengths)
        else:
            spans = tuple(partition_spans(length_km, target_span_km, params))
        link_specs.append(
            dict(id=link_id, a=a, b=b, length_km=length_km, spans=spans)
        )

    name = str(raw.get("name", path.stem))
    return _build(name, node_ids, link_specs)


def build_topology(
    name: str,
    links: Iterable[tuple[str, str, float]],
    band_params: Mapping[str, BandFiberParams] | None = None,
    target_span_km: float = DEFAULT_TARGET_SPAN_KM,
) -> Topology:
    """Construct a topology from (a, b, length_km) triples; handy for tests."""
    params = dict(band_params) if band_params is not None else dict(DEFAULT_BAND_PARAMS)
    node_ids: list[str] = []
    link_specs = []
    for idx, (a, b, length) in enumerate(links):
        for n in (a, b):
            if n not in node_ids:
                node_ids.append(n)
        spans = tuple(partition_spans(length, target_span_km, params))
        link_specs.append(dict(id=idx, a=a, b=b, length_km=length, spans=spans))
    return _build(name, node_ids, link_specs)
