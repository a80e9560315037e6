"""Dynamic workload generation: Poisson arrivals, exponential holding times,
nodal-degree connection sampling and uniform throughput draws.

All randomness flows through numpy PCG64 generators seeded from four
``SeedSequence`` children of the workload seed (spawn keys 0..3 for
connection, throughput, inter-arrival and holding draws respectively), so the
four draw streams are decorrelated and extending ``request_count`` never
perturbs earlier values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .topology import ConnectionPdf

#: Identity of the RNG scheme, echoed into resolved configs for reproducibility.
RNG_SCHEME = "numpy-pcg64/seedsequence-spawn4"

THROUGHPUT_VALUES_GBPS: tuple[int, ...] = (100, 200, 300, 400, 500, 600)


@dataclass(frozen=True)
class Request:
    id: int
    source: str
    destination: str
    rate_gbps: int
    arrival_time: float
    holding_time: float


@dataclass(frozen=True)
class WorkloadSpec:
    """Arrival/departure rates plus size and seed of one replication's workload."""

    arrival_rate: float      # mu_at, requests per time unit
    departure_rate: float    # mu_ht, 1 / mean holding time
    request_count: int
    seed: int

    def __post_init__(self):
        if self.arrival_rate <= 0 or self.departure_rate <= 0:
            raise ValueError("rates must be positive")
        if self.request_count < 1:
            raise ValueError("request_count must be >= 1")

    @property
    def offered_load(self) -> float:
        return self.arrival_rate / self.departure_rate

    @classmethod
    def from_load(cls, offered_load: float, request_count: int, seed: int,
                  departure_rate: float = 1.0) -> "WorkloadSpec":
        """Fix the holding rate and derive the arrival rate from the load."""
        return cls(arrival_rate=offered_load * departure_rate,
                   departure_rate=departure_rate,
                   request_count=request_count, seed=seed)


@dataclass(frozen=True)
class WorkloadArrays:
    """Column-wise view of a workload; what the event loop actually consumes."""

    pairs: tuple[tuple[str, str], ...]
    pair_index: np.ndarray
    rate_gbps: np.ndarray
    arrival_time: np.ndarray
    holding_time: np.ndarray

    def __len__(self) -> int:
        return len(self.pair_index)


def _generators(seed: int) -> tuple[np.random.Generator, ...]:
    children = np.random.SeedSequence(seed).spawn(4)
    return tuple(np.random.Generator(np.random.PCG64(c)) for c in children)


def sample_connection(pdf: ConnectionPdf, rng: np.random.Generator) -> tuple[str, str]:
    """One pair drawn with exactly the PDF's probabilities (inverse CDF over
    the PDF's fixed lexicographic pair order)."""
    cumulative = np.cumsum(pdf.probabilities)
    idx = int(np.searchsorted(cumulative, rng.random(), side="right"))
    return pdf.pairs[min(idx, len(pdf.pairs) - 1)]


def sample_throughput(rng: np.random.Generator) -> int:
    """Uniform draw over the six 100..600 Gb/s steps."""
    return THROUGHPUT_VALUES_GBPS[int(rng.integers(0, len(THROUGHPUT_VALUES_GBPS)))]


def generate_workload_arrays(spec: WorkloadSpec, pdf: ConnectionPdf) -> WorkloadArrays:
    """Vectorized workload draw; identical values to per-request sampling
    because each stream comes from its own generator."""
    conn_rng, thr_rng, at_rng, ht_rng = _generators(spec.seed)
    n = spec.request_count
    cumulative = np.cumsum(pdf.probabilities)
    pair_index = np.searchsorted(cumulative, conn_rng.random(n), side="right")
    np.clip(pair_index, 0, len(pdf.pairs) - 1, out=pair_index)
    rate = np.asarray(THROUGHPUT_VALUES_GBPS)[thr_rng.integers(0, len(THROUGHPUT_VALUES_GBPS), size=n)]
    gaps = at_rng.exponential(scale=1.0 / spec.arrival_rate, size=n)
    holding = ht_rng.exponential(scale=1.0 / spec.departure_rate, size=n)
    return WorkloadArrays(
        pairs=pdf.pairs,
        pair_index=pair_index.astype(np.int64),
        rate_gbps=rate.astype(np.int64),
        arrival_time=np.cumsum(gaps),
        holding_time=holding,
    )


def generate_workload(spec: WorkloadSpec, pdf: ConnectionPdf) -> list[Request]:
    """Materialize the request stream; ids increase with arrival order."""
    arrays = generate_workload_arrays(spec, pdf)
    return [
        Request(
            id=i,
            source=arrays.pairs[arrays.pair_index[i]][0],
            destination=arrays.pairs[arrays.pair_index[i]][1],
            rate_gbps=int(arrays.rate_gbps[i]),
            arrival_time=float(arrays.arrival_time[i]),
            holding_time=float(arrays.holding_time[i]),
        )
        for i in range(len(arrays))
    ]


_CSV_HEADER = ["id", "src", "des", "rate_gbps", "arrival_time", "holding_time"]


def dump_workload_csv(requests: Sequence[Request], path: str | Path) -> None:
    """Write a replayable workload file (see README for the column contract)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for r in requests:
            writer.writerow([r.id, r.source, r.destination, r.rate_gbps,
                             repr(r.arrival_time), repr(r.holding_time)])


def load_workload_csv(path: str | Path) -> list[Request]:
    """Read a workload replay file written by :func:`dump_workload_csv`."""
    requests = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _CSV_HEADER:
            raise ValueError(f"unexpected workload header {header!r}")
        for row in reader:
            requests.append(Request(
                id=int(row[0]), source=row[1], destination=row[2],
                rate_gbps=int(row[3]), arrival_time=float(row[4]),
                holding_time=float(row[5]),
            ))
    if any(b.arrival_time < a.arrival_time for a, b in zip(requests, requests[1:])):
        raise ValueError("workload arrival times must be nondecreasing")
    return requests


def requests_to_arrays(requests: Sequence[Request]) -> WorkloadArrays:
    """Column-wise view of an explicit (replayed) request list."""
    pairs: list[tuple[str, str]] = []
    index_of: dict[tuple[str, str], int] = {}
    pair_index = np.empty(len(requests), dtype=np.int64)
    for i, r in enumerate(requests):
        key = (r.source, r.destination) if r.source < r.destination else (r.destination, r.source)
        if key not in index_of:
            index_of[key] = len(pairs)
            pairs.append(key)
        pair_index[i] = index_of[key]
    return WorkloadArrays(
        pairs=tuple(pairs),
        pair_index=pair_index,
        rate_gbps=np.array([r.rate_gbps for r in requests], dtype=np.int64),
        arrival_time=np.array([r.arrival_time for r in requests], dtype=float),
        holding_time=np.array([r.holding_time for r in requests], dtype=float),
    )
