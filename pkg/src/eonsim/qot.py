"""Per-channel quality of transmission: GSNR aggregation, reach, format selection.

The end-to-end GSNR of a lightpath is the harmonic aggregation of per-span
signal-to-noise terms plus a transceiver back-to-back term; an aging margin
is subtracted from the dB result.  ASE follows the transparent-span EDFA
expression (gain exactly compensates span loss); nonlinear interference is a
pluggable per-frequency coefficient table, cubic in launch power and linear
in span length, so a faithful ISRS closed form can be swapped in behind the
same signature.

Under the full-spectral-load assumption GSNR never depends on current grid
occupancy, so per-(path, channel position) values are precomputed once per
scenario in :class:`PathGsnrCache`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import QotError
from .pathing import CandidatePath
from .topology import Span

#: Planck constant (J*s), 2019 SI exact value.
PLANCK_J_S = 6.62607015e-34

_FREQ_TOL_THZ = 1e-9


def db_to_linear(x_db: float) -> float:
    """10^(x/10)."""
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0:
        raise QotError(f"cannot express nonpositive ratio {x} in dB")
    return 10.0 * math.log10(x)


def dbm_to_watt(p_dbm: float) -> float:
    return 1e-3 * db_to_linear(p_dbm)


def watt_to_dbm(p_w: float) -> float:
    return linear_to_db(p_w / 1e-3)


@dataclass(frozen=True)
class Band:
    """One contiguous block of equally spaced channels."""

    name: str
    channel_count: int
    lowest_center_thz: float


@dataclass(frozen=True)
class BandPlan:
    """Channel and slot geometry of the transmission window.

    ``bands`` are ordered by ascending frequency.  The first-fit scan order is
    different: bands are visited in descending frequency order (C before L,
    prioritizing the lower-noise band), slots ascending within each band.
    Slot 0 of the scan order is therefore the lowest-frequency C-band slot.
    """

    bands: tuple[Band, ...]
    channel_bandwidth_ghz: float = 75.0
    guard_band_ghz: float = 500.0
    slot_width_ghz: float = 12.5

    def __post_init__(self):
        if not self.bands:
            raise QotError("band plan needs at least one band")
        spc = self.channel_bandwidth_ghz / self.slot_width_ghz
        if abs(spc - round(spc)) > 1e-9:
            raise QotError(
                f"channel bandwidth {self.channel_bandwidth_ghz} GHz is not an integer "
                f"multiple of the {self.slot_width_ghz} GHz slot width"
            )
        centers = [b.lowest_center_thz for b in self.bands]
        if sorted(centers) != centers:
            raise QotError("bands must be ordered by ascending frequency")
        for low, high in zip(self.bands, self.bands[1:]):
            gap_thz = self.band_bottom_edge_thz(high) - self.band_top_edge_thz(low)
            if gap_thz < self.guard_band_ghz / 1e3 - _FREQ_TOL_THZ:
                raise QotError(
                    f"bands {low.name} and {high.name} are {gap_thz * 1e3:.1f} GHz apart, "
                    f"below the {self.guard_band_ghz} GHz guard band"
                )

    @property
    def slots_per_channel(self) -> int:
        return round(self.channel_bandwidth_ghz / self.slot_width_ghz)

    def band_slot_count(self, band: Band) -> int:
        return band.channel_count * self.slots_per_channel

    @property
    def total_slots(self) -> int:
        return sum(self.band_slot_count(b) for b in self.bands)

    def band_bottom_edge_thz(self, band: Band) -> float:
        return band.lowest_center_thz - self.channel_bandwidth_ghz / 2e3

    def band_top_edge_thz(self, band: Band) -> float:
        return self.band_bottom_edge_thz(band) + self.band_slot_count(band) * self.slot_width_ghz / 1e3

    @property
    def scan_bands(self) -> tuple[tuple[Band, int], ...]:
        """(band, slot offset) pairs in first-fit scan order."""
        ordered = sorted(self.bands, key=lambda b: -b.lowest_center_thz)
        result = []
        offset = 0
        for band in ordered:
            result.append((band, offset))
            offset += self.band_slot_count(band)
        return tuple(result)

    def band(self, name: str) -> Band:
        for b in self.bands:
            if b.name == name:
                return b
        raise KeyError(name)

    def band_of_frequency(self, freq_thz: float) -> Band:
        for b in self.bands:
            if self.band_bottom_edge_thz(b) - _FREQ_TOL_THZ <= freq_thz <= self.band_top_edge_thz(b) + _FREQ_TOL_THZ:
                return b
        raise QotError(f"frequency {freq_thz} THz lies outside every band")

    def channel_center_thz(self, band: Band, start_slot_in_band: int) -> float:
        """Center frequency of a channel occupying slots [start, start+spc) of a band."""
        mid = start_slot_in_band + self.slots_per_channel / 2.0
        return self.band_bottom_edge_thz(band) + mid * self.slot_width_ghz / 1e3

    def channel_start_positions(self, band: Band) -> range:
        return range(self.band_slot_count(band) - self.slots_per_channel + 1)

    def nominal_channel_centers_thz(self, band: Band) -> list[float]:
        step = self.channel_bandwidth_ghz / 1e3
        return [band.lowest_center_thz + j * step for j in range(band.channel_count)]


#: Paper-default channel layout: 53 C-band channels anchored at 191.60 THz,
#: 91 L-band channels placed below with exactly 500 GHz between band edges.
def default_band_plan(include_l_band: bool = True) -> BandPlan:
    c_band = Band(name="C", channel_count=53, lowest_center_thz=191.600)
    if not include_l_band:
        return BandPlan(bands=(c_band,))
    plan_probe = BandPlan(bands=(c_band,))
    guard_thz = plan_probe.guard_band_ghz / 1e3
    l_count = 91
    l_top_edge = plan_probe.band_bottom_edge_thz(c_band) - guard_thz
    ch_thz = plan_probe.channel_bandwidth_ghz / 1e3
    l_lowest_center = l_top_edge - l_count * ch_thz + ch_thz / 2.0
    l_band = Band(name="L", channel_count=l_count, lowest_center_thz=l_lowest_center)
    return BandPlan(bands=(l_band, c_band))


@dataclass(frozen=True)
class ModulationFormat:
    """A PM modulation level with its GSNR threshold and (derived) reach."""

    name: str
    bits_per_symbol: int
    net_rate_gbps: float
    gsnr_threshold_db: float
    mrd_km: float | None = None


#: PM-BPSK .. PM-64QAM at 64 GBaud: 100..600 Gb/s, thresholds at the
#: 1e-3 pre-FEC BER operating point.
DEFAULT_FORMATS: tuple[ModulationFormat, ...] = (
    ModulationFormat("PM-BPSK", 1, 100.0, 6.79),
    ModulationFormat("PM-QPSK", 2, 200.0, 9.81),
    ModulationFormat("PM-8QAM", 3, 300.0, 13.71),
    ModulationFormat("PM-16QAM", 4, 400.0, 16.54),
    ModulationFormat("PM-32QAM", 5, 500.0, 19.58),
    ModulationFormat("PM-64QAM", 6, 600.0, 22.54),
)


@dataclass(frozen=True)
class GsnrModel:
    """Everything needed to evaluate per-channel GSNR over a path.

    ``nli_frequencies_thz``/``nli_eta_per_w2`` define a piecewise-linear
    coefficient table eta(f) in 1/W^2 per span at ``reference_span_km``;
    per-span NLI power is eta(f) * (span_length/reference) * P_ch^3.
    ``subtract_nli_from_signal`` keeps the literal per-span numerator
    (P_ch - P_NLI); set False for the plain-P_ch variant.
    """

    band_plan: BandPlan
    launch_power_dbm: float
    snr_trx_db: float = 36.0
    aging_margin_db: float = 2.0
    nli_frequencies_thz: tuple[float, ...] = ()
    nli_eta_per_w2: tuple[float, ...] = ()
    reference_span_km: float = 70.0
    subtract_nli_from_signal: bool = True

    def __post_init__(self):
        if not math.isfinite(self.snr_trx_db):
            raise QotError("snr_trx_db must be finite")
        if self.aging_margin_db < 0:
            raise QotError("aging margin must be nonnegative")
        if self.reference_span_km <= 0:
            raise QotError("reference span must be positive")
        freqs, etas = self.nli_frequencies_thz, self.nli_eta_per_w2
        if len(freqs) != len(etas) or len(freqs) < 1:
            raise QotError("NLI table needs matching, non-empty frequency and eta vectors")
        if list(freqs) != sorted(freqs):
            raise QotError("NLI table frequencies must be ascending")
        if any(e < 0 for e in etas):
            raise QotError("NLI eta values must be nonnegative")
        lo, hi = freqs[0], freqs[-1]
        for band in self.band_plan.bands:
            if (self.band_plan.band_bottom_edge_thz(band) < lo - _FREQ_TOL_THZ
                    or self.band_plan.band_top_edge_thz(band) > hi + _FREQ_TOL_THZ):
                raise QotError(
                    f"NLI table [{lo}, {hi}] THz does not cover band {band.name}"
                )

    @property
    def launch_power_w(self) -> float:
        return dbm_to_watt(self.launch_power_dbm)

    @property
    def snr_trx_linear(self) -> float:
        return db_to_linear(self.snr_trx_db)

    def eta(self, freq_thz):
        """Interpolated NLI coefficient; accepts scalars or numpy arrays."""
        lo, hi = self.nli_frequencies_thz[0], self.nli_frequencies_thz[-1]
        if np.any(np.asarray(freq_thz) < lo - _FREQ_TOL_THZ) or np.any(np.asarray(freq_thz) > hi + _FREQ_TOL_THZ):
            raise QotError(f"frequency {freq_thz} THz outside NLI table [{lo}, {hi}]")
        out = np.interp(freq_thz, self.nli_frequencies_thz, self.nli_eta_per_w2)
        return float(out) if np.isscalar(freq_thz) or np.ndim(freq_thz) == 0 else out


def span_ase_power(span: Span, channel_frequency_thz: float, model: GsnrModel,
                   bandwidth_ghz: float) -> float:
    """ASE power (W) added by the span's loss-compensating EDFA.

    P_ASE = h * f * B * 10^((NF + G)/10) with the amplifier gain G matching
    the span loss (attenuation * length).
    """
    band = model.band_plan.band_of_frequency(channel_frequency_thz)
    try:
        params = span.band_params[band.name]
    except KeyError as exc:
        raise QotError(f"span lacks fiber parameters for band {band.name!r}") from exc
    gain_db = params.attenuation_db_per_km * span.length_km
    return (PLANCK_J_S * channel_frequency_thz * 1e12 * bandwidth_ghz * 1e9
            * db_to_linear(params.noise_figure_db + gain_db))


def span_nli_power(span: Span, channel_frequency_thz: float, model: GsnrModel) -> float:
    """Nonlinear interference power (W) generated in one span."""
    eta = model.eta(channel_frequency_thz)
    return eta * (span.length_km / model.reference_span_km) * model.launch_power_w ** 3


def _span_inverse_term(span: Span, freq_thz: float, model: GsnrModel,
                       bandwidth_ghz: float) -> float:
    p_ch = model.launch_power_w
    ase = span_ase_power(span, freq_thz, model, bandwidth_ghz)
    nli = span_nli_power(span, freq_thz, model)
    if nli >= p_ch:
        raise QotError(
            f"nonphysical regime: span NLI {nli:.3e} W >= launch power {p_ch:.3e} W"
        )
    signal = p_ch - nli if model.subtract_nli_from_signal else p_ch
    return (ase + nli) / signal


def path_gsnr(path: CandidatePath, channel_frequency_thz: float, model: GsnrModel,
              bandwidth_ghz: float) -> float:
    """End-to-end GSNR (dB) of a channel over every span of every link of a path.

    Harmonic sum of the per-span terms plus the transceiver back-to-back term,
    minus the aging margin.  The double sum is order-free, so the result does
    not depend on traversal order.
    """
    inverse = 0.0
    for link in path.links:
        for span in link.spans:
            inverse += _span_inverse_term(span, channel_frequency_thz, model, bandwidth_ghz)
    inverse += 1.0 / model.snr_trx_linear
    return linear_to_db(1.0 / inverse) - model.aging_margin_db


def uniform_chain_gsnr_db(span: Span, span_count: int, channel_frequency_thz: float,
                          model: GsnrModel, bandwidth_ghz: float) -> float:
    """GSNR (dB) of a chain of ``span_count`` identical spans."""
    if span_count < 1:
        raise ValueError("span_count must be >= 1")
    term = _span_inverse_term(span, channel_frequency_thz, model, bandwidth_ghz)
    inverse = span_count * term + 1.0 / model.snr_trx_linear
    return linear_to_db(1.0 / inverse) - model.aging_margin_db


def compute_mrd(mf: ModulationFormat, model: GsnrModel, reference_span: Span,
                channel_frequency_thz: float, bandwidth_ghz: float = 75.0) -> float:
    """Maximum reach distance (km) of a format over chains of the reference span.

    Finds the largest integer span count whose chain GSNR still meets the
    format threshold (doubling search, then bisection) and returns
    count * span length; 0 km when even a single span fails.
    """
    def ok(n: int) -> bool:
        return uniform_chain_gsnr_db(
            reference_span, n, channel_frequency_thz, model, bandwidth_ghz
        ) >= mf.gsnr_threshold_db

    if not ok(1):
        return 0.0
    lo, hi = 1, 2
    while ok(hi):
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo * reference_span.length_km


def worst_case_frequency(model: GsnrModel, reference_span: Span,
                         bandwidth_ghz: float = 75.0) -> float:
    """Scenario reference frequency for the MRD table.

    Single-band plans use the central channel (the classical worst-case
    assumption for a C-only system); multi-band plans use the genuinely worst
    channel position, i.e. the one minimizing single-span chain GSNR, with
    ties resolved toward the lowest frequency.
    """
    plan = model.band_plan
    if len(plan.bands) == 1:
        band = plan.bands[0]
        centers = plan.nominal_channel_centers_thz(band)
        return centers[band.channel_count // 2]
    best_freq, best_gsnr = None, math.inf
    for band in plan.bands:  # ascending frequency, so ties keep the lowest
        for start in plan.channel_start_positions(band):
            freq = plan.channel_center_thz(band, start)
            gsnr = uniform_chain_gsnr_db(reference_span, 1, freq, model, bandwidth_ghz)
            if gsnr < best_gsnr:
                best_freq, best_gsnr = freq, gsnr
    return best_freq


def build_mrd_table(model: GsnrModel, reference_span: Span,
                    formats: Sequence[ModulationFormat] = DEFAULT_FORMATS,
                    bandwidth_ghz: float = 75.0,
                    reference_frequency_thz: float | None = None) -> tuple[ModulationFormat, ...]:
    """Fill in ``mrd_km`` for every format at the scenario's reference frequency."""
    ordered = sorted(formats, key=lambda f: f.bits_per_symbol)
    for a, b in zip(ordered, ordered[1:]):
        if not (a.gsnr_threshold_db < b.gsnr_threshold_db and a.net_rate_gbps < b.net_rate_gbps):
            raise QotError("thresholds and rates must increase strictly with bits per symbol")
    if reference_frequency_thz is None:
        reference_frequency_thz = worst_case_frequency(model, reference_span, bandwidth_ghz)
    return tuple(
        replace(mf, mrd_km=compute_mrd(mf, model, reference_span,
                                       reference_frequency_thz, bandwidth_ghz))
        for mf in ordered
    )


def select_mfl(path_length_km: float,
               mrd_table: Sequence[ModulationFormat]) -> ModulationFormat | None:
    """Highest-order format whose reach covers the path; None = QoT-blocked.

    ``mrd_table`` must be sorted by ascending bits per symbol with mrd_km set.
    """
    for mf in reversed(mrd_table):
        if mf.mrd_km is None:
            raise QotError(f"format {mf.name} has no reach; build the MRD table first")
        if mf.mrd_km >= path_length_km:
            return mf
    return None


class PathGsnrCache:
    """Precomputed GSNR (dB) per (path, band, channel start position).

    Valid under the full-spectral-load assumption, which makes GSNR
    independent of grid occupancy.  Built once per scenario; read-only
    afterwards, hence safe to share across parallel replications.
    """

    def __init__(self, model: GsnrModel, bandwidth_ghz: float):
        self.model = model
        self.bandwidth_ghz = bandwidth_ghz
        self._per_path: dict[tuple[int, ...], dict[str, list[float]]] = {}
        plan = model.band_plan
        self._centers: dict[str, np.ndarray] = {}
        for band in plan.bands:
            positions = np.arange(len(plan.channel_start_positions(band)), dtype=float)
            mid = positions + plan.slots_per_channel / 2.0
            self._centers[band.name] = (
                plan.band_bottom_edge_thz(band) + mid * plan.slot_width_ghz / 1e3
            )

    def _build(self, path: CandidatePath) -> dict[str, list[float]]:
        model = self.model
        p_ch = model.launch_power_w
        inv_trx = 1.0 / model.snr_trx_linear
        # equal-split partitioning makes spans within a link identical, so
        # group them and weight each distinct span once
        groups: dict[tuple[float, int], list] = {}
        for link in path.links:
            for span in link.spans:
                key = (span.length_km, id(span.band_params))
                entry = groups.setdefault(key, [span.band_params, 0])
                entry[1] += 1
        out: dict[str, list[float]] = {}
        for band in model.band_plan.bands:
            centers = self._centers[band.name]
            base_nli = model.eta(centers) * p_ch ** 3  # at the reference span length
            inverse = np.full(centers.shape, inv_trx)
            for (length_km, _), (band_params, count) in groups.items():
                params = band_params[band.name]
                gain_db = params.attenuation_db_per_km * length_km
                ase = (PLANCK_J_S * centers * 1e12 * self.bandwidth_ghz * 1e9
                       * db_to_linear(params.noise_figure_db + gain_db))
                span_nli = base_nli * (length_km / model.reference_span_km)
                if np.any(span_nli >= p_ch):
                    raise QotError("nonphysical regime: span NLI exceeds launch power")
                signal = p_ch - span_nli if model.subtract_nli_from_signal else p_ch
                inverse += count * ((ase + span_nli) / signal)
            out[band.name] = (10.0 * np.log10(1.0 / inverse) - model.aging_margin_db).tolist()
        return out

    def arrays(self, path: CandidatePath) -> dict[str, list[float]]:
        key = path.link_ids
        cached = self._per_path.get(key)
        if cached is None:
            cached = self._build(path)
            self._per_path[key] = cached
        return cached

    def gsnr_db(self, path: CandidatePath, band_name: str, start_slot_in_band: int) -> float:
        return self.arrays(path)[band_name][start_slot_in_band]
