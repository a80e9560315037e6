"""Per-link slot occupancy and first-fit assignment under continuity/contiguity.

Each link carries one occupancy bitmask per band (bit i = slot i of that band
busy).  Slots are indexed in scan order: C band first, ascending, then L band
ascending; the inter-band guard holds no slots.  An assignment must be one
contiguous run of slots, identical on every link of the path, entirely inside
one band.

``first_fit`` is a pure query; only ``allocate``/``release`` mutate the grid,
so evaluating K candidate paths never changes state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import SpectrumError
from .pathing import CandidatePath
from .qot import BandPlan


def required_slots(r_r_gbps: float, r_m_gbps: float, r_symbol_gbaud: float,
                   slot_width_ghz: float = 12.5) -> int:
    """Slots needed by a request: ceil(R_r/R_m) channels of ceil(R_symbol/slot) slots."""
    if r_r_gbps <= 0 or r_m_gbps <= 0 or r_symbol_gbaud <= 0:
        raise ValueError("rates must be positive")
    return _ceil(r_r_gbps / r_m_gbps) * _ceil(r_symbol_gbaud / slot_width_ghz)


def _ceil(ratio: float) -> int:
    # guard against float ratios landing a hair above an exact integer
    return max(math.ceil(ratio - 1e-12 * ratio), 1)


def candidate_max_f(start_slot: int, slot_count: int) -> int:
    """MaxF metric of a hypothetical assignment: its highest scan-order slot."""
    return start_slot + slot_count - 1


@dataclass(frozen=True)
class Allocation:
    """An active assignment: one slot run on every link of a path."""

    request_id: int
    path: CandidatePath
    start_slot: int
    slot_count: int
    band_name: str
    channel_center_frequencies_thz: tuple[float, ...]


class SpectrumGrid:
    """Occupancy bitmasks for every link over the band plan's slot space."""

    def __init__(self, band_plan: BandPlan, link_ids: Iterable[int]):
        self.band_plan = band_plan
        # (name, scan offset, slot count, full mask) per band in scan order
        self.bands: tuple[tuple[str, int, int, int], ...] = tuple(
            (band.name, offset, band_plan.band_slot_count(band),
             (1 << band_plan.band_slot_count(band)) - 1)
            for band, offset in band_plan.scan_bands
        )
        self.total_slots = band_plan.total_slots
        self._occ: dict[int, list[int]] = {lid: [0] * len(self.bands) for lid in link_ids}

    def clone_empty(self) -> "SpectrumGrid":
        return SpectrumGrid(self.band_plan, self._occ.keys())

    @property
    def link_ids(self) -> tuple[int, ...]:
        return tuple(self._occ.keys())

    def busy_slot_count(self) -> int:
        return sum(mask.bit_count() for masks in self._occ.values() for mask in masks)

    def is_free(self, link_id: int, band_index: int, start: int, count: int) -> bool:
        run = ((1 << count) - 1) << start
        return self._occ[link_id][band_index] & run == 0

    def first_fit(self, path: CandidatePath, slot_count: int) -> int | None:
        """Lowest scan-order start where ``slot_count`` contiguous slots are free
        on every link of the path and inside a single band; None if no fit."""
        if slot_count < 1:
            raise ValueError("slot_count must be >= 1")
        occ = self._occ
        for band_index, (_, offset, n_slots, full) in enumerate(self.bands):
            if slot_count > n_slots:
                continue
            free = full
            for lid in path.link_ids:
                free &= full ^ occ[lid][band_index]
                if not free:
                    break
            if not free:
                continue
            runs = _runs_of(free, slot_count)
            if runs:
                start_in_band = (runs & -runs).bit_length() - 1
                return offset + start_in_band
        return None

    def allocate(self, path: CandidatePath, start_slot: int, slot_count: int,
                 request_id: int) -> Allocation:
        """Mark the run busy on every path link; hard error if any slot is taken."""
        band_index, start_in_band = self._locate(start_slot, slot_count)
        run = ((1 << slot_count) - 1) << start_in_band
        occ = self._occ
        for lid in path.link_ids:
            if occ[lid][band_index] & run:
                raise SpectrumError(
                    f"overlapping allocation on link {lid}, slots "
                    f"[{start_slot}, {start_slot + slot_count})"
                )
        for lid in path.link_ids:
            occ[lid][band_index] |= run
        plan = self.band_plan
        band_name = self.bands[band_index][0]
        band = plan.band(band_name)
        spc = plan.slots_per_channel
        centers = tuple(
            plan.channel_center_thz(band, start_in_band + i * spc)
            for i in range(slot_count // spc)
        )
        return Allocation(
            request_id=request_id,
            path=path,
            start_slot=start_slot,
            slot_count=slot_count,
            band_name=band_name,
            channel_center_frequencies_thz=centers,
        )

    def release(self, allocation: Allocation) -> None:
        """Clear the allocation's slots; hard error if they are not all busy."""
        band_index, start_in_band = self._locate(allocation.start_slot, allocation.slot_count)
        run = ((1 << allocation.slot_count) - 1) << start_in_band
        occ = self._occ
        for lid in allocation.path.link_ids:
            if occ[lid][band_index] & run != run:
                raise SpectrumError(
                    f"double release: slots [{allocation.start_slot}, "
                    f"{allocation.start_slot + allocation.slot_count}) not busy on link {lid}"
                )
        for lid in allocation.path.link_ids:
            occ[lid][band_index] &= ~run
        return None

    def max_frequency(self) -> int:
        """Highest occupied scan-order slot index across all links; -1 if empty."""
        highest = -1
        for masks in self._occ.values():
            for (_, offset, _, _), mask in zip(self.bands, masks):
                if mask:
                    highest = max(highest, offset + mask.bit_length() - 1)
        return highest

    def dump_hex(self) -> dict[int, str]:
        """Stable debugging snapshot: per link, the full occupancy as hex.

        Bands are packed at their scan offsets into one integer (slot 0 =
        least significant bit) and rendered as fixed-width lowercase hex,
        ceil(total_slots/4) digits, most significant nibble first.
        """
        width = -(-self.total_slots // 4)
        out = {}
        for lid, masks in self._occ.items():
            value = 0
            for (_, offset, _, _), mask in zip(self.bands, masks):
                value |= mask << offset
            out[lid] = format(value, f"0{width}x")
        return out

    def _locate(self, start_slot: int, slot_count: int) -> tuple[int, int]:
        """Map a scan-order run onto (band index, start within band)."""
        for band_index, (name, offset, n_slots, _) in enumerate(self.bands):
            if offset <= start_slot < offset + n_slots:
                if start_slot + slot_count > offset + n_slots:
                    raise SpectrumError(
                        f"run [{start_slot}, {start_slot + slot_count}) straddles "
                        f"the {name} band boundary"
                    )
                return band_index, start_slot - offset
        raise SpectrumError(f"slot {start_slot} outside the grid (total {self.total_slots})")


def _runs_of(free: int, n: int) -> int:
    """Bitmask of positions starting a run of >= n free slots.

    Doubling trick: if f_a marks runs of length a, then f_a & (f_a >> s)
    marks runs of length a+s for any s <= a.
    """
    f = free
    have = 1
    while have < n:
        step = min(have, n - have)
        f &= f >> step
        have += step
    return f


def first_fit(grid: SpectrumGrid, path: CandidatePath, slot_count: int) -> int | None:
    return grid.first_fit(path, slot_count)


def allocate(grid: SpectrumGrid, path: CandidatePath, start_slot: int, slot_count: int,
             request_id: int) -> Allocation:
    return grid.allocate(path, start_slot, slot_count, request_id)


def release(grid: SpectrumGrid, allocation: Allocation) -> None:
    grid.release(allocation)


def max_frequency(grid: SpectrumGrid) -> int:
    return grid.max_frequency()
