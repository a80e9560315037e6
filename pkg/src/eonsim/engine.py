"""Discrete-event provisioning loop and policy comparison.

Per arrival: look up the connection's candidate paths, select a modulation
format from the reach table, size the request in slots, first-fit each
candidate, keep the per-candidate metrics (MaxF, MaxHop, MinGSNR), then let
the active policy pick the winner.  Departures release spectrum at
arrival + holding time; ties process departures first, then lower ids.

Replications are independent (seed + replica index) and aggregated with a
Student-t 95% interval.  The provisioning loop is timed on its own; catalog
and GSNR-cache precomputation is reported separately.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from heapq import heappush, heappop
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .config import ScenarioConfig
from .errors import SpectrumError
from .pathing import CandidatePath, CatalogMode, PathCatalog, build_catalog
from .qot import (GsnrModel, ModulationFormat, PathGsnrCache, build_mrd_table,
                  select_mfl)
from .spectrum import SpectrumGrid, required_slots
from .topology import ConnectionPdf, Topology, connection_pdf
from .traffic import (Request, WorkloadArrays, WorkloadSpec,
                      generate_workload_arrays, load_workload_csv,
                      requests_to_arrays)


class Policy(Enum):
    """Step-8 path selection rule."""

    MIN_MAX_F = "minmaxf"
    MIN_MAX_HOP = "minmaxhop"
    MAX_MIN_GSNR = "maxmingsnr"

    @classmethod
    def parse(cls, text: str) -> "Policy":
        return cls(text.strip().lower().replace("_", "").replace("-", ""))


#: Blocking reasons, ordered by how far the candidate got before failing.
REASON_NO_MFL = "no_mfl"
REASON_NO_SPECTRUM = "no_spectrum"
REASON_THRESHOLD = "threshold"
_REASON_RANK = {REASON_NO_MFL: 0, REASON_NO_SPECTRUM: 1, REASON_THRESHOLD: 2}
_REASONS = (REASON_NO_MFL, REASON_NO_SPECTRUM, REASON_THRESHOLD)


class CandidateEvaluation(NamedTuple):
    """Steps 5-7 outcome for one candidate path."""

    path_index: int
    feasible: bool
    reason: str | None
    mfl: ModulationFormat | None
    slot_count: int | None
    start_slot: int | None
    max_f: int | None
    max_hop: int | None
    min_gsnr_db: float | None


class _PathRuntime:
    """Per-scenario precomputation for one candidate path."""

    __slots__ = ("path", "mfl", "threshold_db", "by_rate", "gsnr_by_band", "hop_count")

    def __init__(self, path: CandidatePath, mfl: ModulationFormat | None,
                 by_rate: dict[int, tuple[int, int]],
                 gsnr_by_band: tuple[list[float], ...]):
        self.path = path
        self.mfl = mfl
        self.threshold_db = mfl.gsnr_threshold_db if mfl else math.nan
        self.by_rate = by_rate          # rate Gb/s -> (slot_count, channel_count)
        self.gsnr_by_band = gsnr_by_band  # indexed like SpectrumGrid.bands
        self.hop_count = path.hop_count


@dataclass
class ScenarioRuntime:
    """Immutable-after-build state shared by every replication of a scenario."""

    config: ScenarioConfig
    topology: Topology
    pdf: ConnectionPdf
    catalog: PathCatalog
    model: GsnrModel
    mrd_table: tuple[ModulationFormat, ...]
    cache: PathGsnrCache
    entries: dict[tuple[str, str], tuple[_PathRuntime, ...]]
    slots_per_channel: int
    precompute_seconds: float

    def entry(self, src: str, des: str) -> tuple[_PathRuntime, ...]:
        key = (src, des) if src < des else (des, src)
        return self.entries[key]

    def path_runtime(self, path: CandidatePath) -> _PathRuntime:
        for candidate in self.entries[(path.source, path.destination)
                                      if path.source < path.destination
                                      else (path.destination, path.source)]:
            if candidate.path.link_ids == path.link_ids:
                return candidate
        raise KeyError(f"path {path.link_ids} is not in the catalog")


def build_runtime(config: ScenarioConfig) -> ScenarioRuntime:
    """Load the topology and precompute catalog, reach table and GSNR cache."""
    started = time.perf_counter()
    topology = config.load_topology()
    pdf = connection_pdf(topology)
    catalog = build_catalog(topology, CatalogMode(config.catalog_mode), config.k)
    model = config.build_model()
    reference_span = config.reference_span()
    mrd_table = build_mrd_table(model, reference_span, config.formats(),
                                config.channel_bandwidth_ghz)
    cache = PathGsnrCache(model, config.channel_bandwidth_ghz)

    plan = model.band_plan
    spc = plan.slots_per_channel
    scan_names = [band.name for band, _ in plan.scan_bands]
    rates = config.throughput_values_gbps
    entries: dict[tuple[str, str], tuple[_PathRuntime, ...]] = {}
    for key, paths in catalog.paths.items():
        runtimes = []
        for path in paths:
            mfl = select_mfl(path.length_km, mrd_table)
            by_rate: dict[int, tuple[int, int]] = {}
            if mfl is not None:
                for rate in rates:
                    count = required_slots(rate, mfl.net_rate_gbps,
                                           config.symbol_rate_gbaud, plan.slot_width_ghz)
                    by_rate[rate] = (count, count // spc)
            arrays = cache.arrays(path)
            gsnr_by_band = tuple(arrays[name] for name in scan_names)
            runtimes.append(_PathRuntime(path, mfl, by_rate, gsnr_by_band))
        entries[key] = tuple(runtimes)
    return ScenarioRuntime(
        config=config, topology=topology, pdf=pdf, catalog=catalog, model=model,
        mrd_table=mrd_table, cache=cache, entries=entries, slots_per_channel=spc,
        precompute_seconds=time.perf_counter() - started,
    )


def _evaluate(entry: Sequence[_PathRuntime], rate: int, grid: SpectrumGrid,
              spc: int) -> list[CandidateEvaluation]:
    evaluations = []
    bands = grid.bands
    for index, prt in enumerate(entry):
        if prt.mfl is None:
            evaluations.append(CandidateEvaluation(
                index, False, REASON_NO_MFL, None, None, None, None, None, None))
            continue
        slot_count, channel_count = prt.by_rate[rate]
        start = grid.first_fit(prt.path, slot_count)
        if start is None:
            evaluations.append(CandidateEvaluation(
                index, False, REASON_NO_SPECTRUM, prt.mfl, slot_count,
                None, None, None, None))
            continue
        band_index = 0
        while start >= bands[band_index][1] + bands[band_index][2]:
            band_index += 1
        start_in_band = start - bands[band_index][1]
        gsnr = prt.gsnr_by_band[band_index]
        min_gsnr = gsnr[start_in_band]
        for j in range(1, channel_count):
            value = gsnr[start_in_band + j * spc]
            if value < min_gsnr:
                min_gsnr = value
        if min_gsnr < prt.threshold_db:
            evaluations.append(CandidateEvaluation(
                index, False, REASON_THRESHOLD, prt.mfl, slot_count,
                None, None, None, None))
            continue
        evaluations.append(CandidateEvaluation(
            index, True, None, prt.mfl, slot_count, start,
            start + slot_count - 1, prt.hop_count, min_gsnr))
    return evaluations


def evaluate_candidates(request: Request, candidates: Sequence[CandidatePath],
                        grid: SpectrumGrid, runtime: ScenarioRuntime) -> list[CandidateEvaluation]:
    """Steps 5-7 for every candidate path of a request, in catalog order.

    Pure query: the grid is never modified, and infeasibility is recorded as
    data (with the stage it failed at), not raised.
    """
    entry = tuple(runtime.path_runtime(path) for path in candidates)
    return _evaluate(entry, request.rate_gbps, grid, runtime.slots_per_channel)


def select_best(evaluations: Sequence[CandidateEvaluation],
                policy: Policy) -> CandidateEvaluation | None:
    """Step 8: pick the policy's best feasible candidate; catalog order breaks ties."""
    best = None
    if policy is Policy.MIN_MAX_F:
        for ev in evaluations:
            if ev.feasible and (best is None or ev.max_f < best.max_f):
                best = ev
    elif policy is Policy.MIN_MAX_HOP:
        for ev in evaluations:
            if ev.feasible and (best is None or ev.max_hop < best.max_hop):
                best = ev
    elif policy is Policy.MAX_MIN_GSNR:
        for ev in evaluations:
            if ev.feasible and (best is None or ev.min_gsnr_db > best.min_gsnr_db):
                best = ev
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(policy)
    return best


@dataclass(frozen=True)
class ReplicationResult:
    """Post-warm-up metrics from one independent replication."""

    seed: int
    offered_gbps: float
    accepted_gbps: float
    blocked_gbps: float
    accepted_count: int
    blocked_count: int
    gsnr_sum_db: float
    block_reasons: dict[str, int]
    wall_clock_s: float

    @property
    def bbp(self) -> float:
        return self.blocked_gbps / self.offered_gbps if self.offered_gbps else 0.0

    @property
    def bbp_requests(self) -> float:
        total = self.accepted_count + self.blocked_count
        return self.blocked_count / total if total else 0.0

    @property
    def avg_gsnr_db(self) -> float:
        return self.gsnr_sum_db / self.accepted_count if self.accepted_count else math.nan


@dataclass(frozen=True)
class ScenarioRow:
    """One (policy, catalog mode, load, band) cell aggregated over replications."""

    band: str
    catalog_mode: str
    policy: str
    offered_load: float
    replications: tuple[ReplicationResult, ...]
    bbp_mean: float
    bbp_ci95: float
    bbp_request_mean: float
    bbp_request_ci95: float
    avg_gsnr_db: float
    offered_gbps: float
    accepted_gbps: float
    blocked_gbps: float
    accepted_count: int
    blocked_count: int
    block_reasons: dict[str, int]
    wall_clock_s: float


@dataclass(frozen=True)
class SimReport:
    """Full scenario outcome: one row per (policy, load)."""

    band: str
    catalog_mode: str
    k: int
    seed: int
    request_count: int
    replication_count: int
    rows: tuple[ScenarioRow, ...]
    precompute_seconds: float

    def row(self, policy: str, offered_load: float) -> ScenarioRow:
        for r in self.rows:
            if r.policy == policy and r.offered_load == offered_load:
                return r
        raise KeyError((policy, offered_load))

    def result_fingerprint(self) -> tuple:
        """Everything except wall-clock timings; used to assert determinism."""
        return tuple(
            (r.band, r.catalog_mode, r.policy, r.offered_load, r.bbp_mean,
             r.bbp_ci95, r.bbp_request_mean, r.avg_gsnr_db, r.offered_gbps,
             r.accepted_gbps, r.blocked_gbps, r.accepted_count, r.blocked_count,
             tuple(sorted(r.block_reasons.items())),
             tuple((p.bbp, p.avg_gsnr_db) for p in r.replications))
            for r in self.rows
        )


def _student_t_halfwidth(values: Sequence[float]) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    spread = float(np.std(values, ddof=1))
    return float(stats.t.ppf(0.975, n - 1)) * spread / math.sqrt(n)


def _simulate_replication(runtime: ScenarioRuntime, arrays: WorkloadArrays,
                          policy: Policy, seed: int, warmup_count: int,
                          debug_check_interval: int = 0) -> ReplicationResult:
    """One event loop over a workload; returns post-warm-up metrics."""
    grid = SpectrumGrid(runtime.model.band_plan,
                        [link.id for link in runtime.topology.links])
    entry_by_pair = [runtime.entries[pair] for pair in arrays.pairs]
    spc = runtime.slots_per_channel

    arrivals = arrays.arrival_time.tolist()
    holdings = arrays.holding_time.tolist()
    pair_idx = arrays.pair_index.tolist()
    rates = arrays.rate_gbps.tolist()
    n = len(arrivals)

    offered = accepted_gbps = blocked_gbps = 0.0
    accepted_count = blocked_count = 0
    gsnr_sum = 0.0
    reasons = dict.fromkeys(_REASONS, 0)
    departures: list = []
    live_slot_links = 0  # debug conservation counter

    started = time.perf_counter()
    i = 0
    while True:
        if departures and (i >= n or departures[0][0] <= arrivals[i]):
            _, _, allocation = heappop(departures)
            grid.release(allocation)
            if debug_check_interval:
                live_slot_links -= allocation.slot_count * allocation.path.hop_count
            continue
        if i >= n:
            break
        rate = rates[i]
        evaluations = _evaluate(entry_by_pair[pair_idx[i]], rate, grid, spc)
        best = select_best(evaluations, policy)
        counted = i >= warmup_count
        if counted:
            offered += rate
        if best is None:
            if counted:
                blocked_count += 1
                blocked_gbps += rate
                stage = max(_REASON_RANK[ev.reason] for ev in evaluations)
                reasons[_REASONS[stage]] += 1
        else:
            prt = entry_by_pair[pair_idx[i]][best.path_index]
            allocation = grid.allocate(prt.path, best.start_slot, best.slot_count, i)
            heappush(departures, (arrivals[i] + holdings[i], i, allocation))
            if counted:
                accepted_count += 1
                accepted_gbps += rate
                gsnr_sum += best.min_gsnr_db
            if debug_check_interval:
                live_slot_links += best.slot_count * prt.hop_count
        i += 1
        if debug_check_interval and i % debug_check_interval == 0:
            busy = grid.busy_slot_count()
            if busy != live_slot_links:
                raise SpectrumError(
                    f"conservation violated at event {i}: grid holds {busy} "
                    f"slot-links, live allocations account for {live_slot_links}"
                )
    wall = time.perf_counter() - started

    return ReplicationResult(
        seed=seed, offered_gbps=offered, accepted_gbps=accepted_gbps,
        blocked_gbps=blocked_gbps, accepted_count=accepted_count,
        blocked_count=blocked_count, gsnr_sum_db=gsnr_sum,
        block_reasons=reasons, wall_clock_s=wall,
    )


def _aggregate(band: str, mode: str, policy: Policy, offered_load: float,
               reps: Sequence[ReplicationResult]) -> ScenarioRow:
    bbps = [r.bbp for r in reps]
    bbps_req = [r.bbp_requests for r in reps]
    gsnrs = [r.avg_gsnr_db for r in reps]
    reasons = dict.fromkeys(_REASONS, 0)
    for r in reps:
        for name, count in r.block_reasons.items():
            reasons[name] += count
    return ScenarioRow(
        band=band, catalog_mode=mode, policy=policy.value,
        offered_load=offered_load, replications=tuple(reps),
        bbp_mean=float(np.mean(bbps)),
        bbp_ci95=_student_t_halfwidth(bbps),
        bbp_request_mean=float(np.mean(bbps_req)),
        bbp_request_ci95=_student_t_halfwidth(bbps_req),
        avg_gsnr_db=float(np.nanmean(gsnrs)) if not all(math.isnan(g) for g in gsnrs) else math.nan,
        offered_gbps=sum(r.offered_gbps for r in reps),
        accepted_gbps=sum(r.accepted_gbps for r in reps),
        blocked_gbps=sum(r.blocked_gbps for r in reps),
        accepted_count=sum(r.accepted_count for r in reps),
        blocked_count=sum(r.blocked_count for r in reps),
        block_reasons=reasons,
        wall_clock_s=sum(r.wall_clock_s for r in reps),
    )


def run_scenario(config: ScenarioConfig,
                 runtime: ScenarioRuntime | None = None) -> SimReport:
    """Run the whole (policy x load x replication) grid of one scenario.

    A prebuilt runtime may be passed when several reports share one scenario
    (e.g. replay comparisons); it must have been built from the same config.
    """
    config.validate()
    if runtime is None:
        runtime = build_runtime(config)

    replay_arrays = None
    if config.replay_path is not None:
        replay_arrays = requests_to_arrays(load_workload_csv(config.replay_path))
        for pair in replay_arrays.pairs:
            if pair not in runtime.entries:
                raise SpectrumError(f"replayed pair {pair} missing from the catalog")

    rows = []
    for policy_name in config.policies:
        policy = Policy.parse(policy_name)
        for load in config.loads:
            reps = []
            for replica in range(config.replications):
                seed = config.seed + replica
                if replay_arrays is not None:
                    arrays = replay_arrays
                    measured_load = _measured_load(arrays)
                else:
                    spec = WorkloadSpec.from_load(
                        load, config.request_count, seed,
                        departure_rate=config.departure_rate)
                    arrays = generate_workload_arrays(spec, runtime.pdf)
                    measured_load = load
                warmup = int(len(arrays) * config.warmup_fraction)
                reps.append(_simulate_replication(
                    runtime, arrays, policy, seed, warmup,
                    debug_check_interval=config.debug_check_interval))
            rows.append(_aggregate(config.band, config.catalog_mode, policy,
                                   measured_load, reps))
    return SimReport(
        band=config.band, catalog_mode=config.catalog_mode, k=config.k,
        seed=config.seed, request_count=config.request_count,
        replication_count=config.replications, rows=tuple(rows),
        precompute_seconds=runtime.precompute_seconds,
    )


def _measured_load(arrays: WorkloadArrays) -> float:
    """Offered-load estimate for replayed workloads (rate x mean holding)."""
    span = float(arrays.arrival_time[-1]) if len(arrays) else 0.0
    if span <= 0:
        return math.nan
    return len(arrays) / span * float(np.mean(arrays.holding_time))


REPORT_COLUMNS = [
    "policy", "catalog_mode", "band", "offered_load",
    "bbp_mean", "bbp_ci95", "bbp_request_mean", "bbp_request_ci95",
    "avg_gsnr_db", "offered_gbps", "accepted_gbps", "blocked_gbps",
    "accepted_count", "blocked_count",
    "block_no_mfl", "block_no_spectrum", "block_threshold",
    "wall_clock_s", "precompute_s",
]


def write_report_csv(reports: Sequence[SimReport], path: str | Path) -> None:
    """One row per (policy, catalog mode, load, band); column order is stable."""
    lines = [",".join(REPORT_COLUMNS)]
    for report in reports:
        for r in report.rows:
            lines.append(",".join(str(x) for x in [
                r.policy, r.catalog_mode, r.band, repr(r.offered_load),
                repr(r.bbp_mean), repr(r.bbp_ci95), repr(r.bbp_request_mean),
                repr(r.bbp_request_ci95), repr(r.avg_gsnr_db),
                repr(r.offered_gbps), repr(r.accepted_gbps), repr(r.blocked_gbps),
                r.accepted_count, r.blocked_count,
                r.block_reasons[REASON_NO_MFL], r.block_reasons[REASON_NO_SPECTRUM],
                r.block_reasons[REASON_THRESHOLD],
                repr(r.wall_clock_s), repr(report.precompute_seconds),
            ]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_plot_data(reports: Sequence[SimReport], path: str | Path) -> None:
    """Gnuplot-style data: one block per (band, catalog, policy) series."""
    blocks = ["# eonsim plot data",
              "# columns: offered_load bbp_mean bbp_ci95 avg_gsnr_db wall_clock_s"]
    for report in reports:
        by_policy: dict[str, list[ScenarioRow]] = {}
        for r in report.rows:
            by_policy.setdefault(r.policy, []).append(r)
        for policy, rows in by_policy.items():
            blocks.append("")
            blocks.append(f'# series band={report.band} catalog={report.catalog_mode} '
                          f'policy={policy}')
            for r in sorted(rows, key=lambda x: x.offered_load):
                blocks.append(f"{r.offered_load!r} {r.bbp_mean!r} {r.bbp_ci95!r} "
                              f"{r.avg_gsnr_db!r} {r.wall_clock_s!r}")
    Path(path).write_text("\n".join(blocks) + "\n")
