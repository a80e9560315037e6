"""Scenario configuration: TOML parsing, defaults, validation and echo.

A scenario file has four flat sections -- ``[run]``, ``[traffic]``,
``[grid]`` and ``[qot]`` -- whose keys map 1:1 onto :class:`ScenarioConfig`
fields.  Unknown sections or keys are hard errors.  Every field defaults to
the published experiment values, and the shipped ``paper_defaults`` profile
materializes exactly those defaults.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .qot import Band, BandPlan, GsnrModel, ModulationFormat
from .topology import BandFiberParams, Span, Topology, load_topology
from .traffic import RNG_SCHEME, THROUGHPUT_VALUES_GBPS

BAND_SCENARIOS = ("C", "C+L")
CATALOG_MODES = ("ksp", "kdsp")
POLICY_NAMES = ("minmaxf", "minmaxhop", "maxmingsnr")

#: Default NLI coefficient table: linear tilt, more NLI toward lower
#: frequencies so L-band channels see the larger penalty.  Calibration values,
#: not physics ground truth; swap in a faithful ISRS table via [qot].
DEFAULT_NLI_FREQUENCIES_THZ = (184.0, 196.0)
DEFAULT_NLI_ETA_PER_W2 = (1400.0, 900.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """One scenario: a band/catalog pair with its policy x load grid."""

    # [run]
    topology: str = "telefonica14_synthetic"
    band: str = "C+L"
    catalog_mode: str = "ksp"
    k: int = 5
    policies: tuple[str, ...] = POLICY_NAMES
    loads: tuple[float, ...] = (160.0, 200.0, 240.0, 280.0, 320.0)
    replications: int = 5
    seed: int = 20230517
    replay_path: str | None = None
    debug_check_interval: int = 0

    # [traffic]
    request_count: int = 100_000
    departure_rate: float = 1.0
    warmup_fraction: float = 0.1
    rng_scheme: str = RNG_SCHEME

    # [grid]
    channel_bandwidth_ghz: float = 75.0
    slot_width_ghz: float = 12.5
    guard_band_ghz: float = 500.0
    c_band_channels: int = 53
    l_band_channels: int = 91
    c_band_lowest_center_thz: float = 191.600
    target_span_km: float = 70.0

    # [qot]
    symbol_rate_gbaud: float = 64.0
    snr_trx_db: float = 36.0
    aging_margin_db: float = 2.0
    launch_power_dbm_c: float = 0.1
    launch_power_dbm_cl: float = -0.15
    reference_span_km: float = 70.0
    subtract_nli_from_signal: bool = True
    attenuation_db_per_km_c: float = 0.20
    attenuation_db_per_km_l: float = 0.22
    noise_figure_db_c: float = 4.5
    noise_figure_db_l: float = 6.0
    nli_frequencies_thz: tuple[float, ...] = DEFAULT_NLI_FREQUENCIES_THZ
    nli_eta_per_w2: tuple[float, ...] = DEFAULT_NLI_ETA_PER_W2
    mfl_names: tuple[str, ...] = ("PM-BPSK", "PM-QPSK", "PM-8QAM",
                                  "PM-16QAM", "PM-32QAM", "PM-64QAM")
    mfl_bits_per_symbol: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    mfl_rates_gbps: tuple[float, ...] = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0)
    mfl_thresholds_db: tuple[float, ...] = (6.79, 9.81, 13.71, 16.54, 19.58, 22.54)

    def validate(self) -> None:
        if self.band not in BAND_SCENARIOS:
            raise ConfigError(f"band must be one of {BAND_SCENARIOS}, got {self.band!r}")
        if self.catalog_mode not in CATALOG_MODES:
            raise ConfigError(f"catalog_mode must be one of {CATALOG_MODES}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not self.loads or any(l <= 0 for l in self.loads):
            raise ConfigError("load grid must be non-empty and positive")
        for p in self.policies:
            if p not in POLICY_NAMES:
                raise ConfigError(f"unknown policy {p!r}; choose from {POLICY_NAMES}")
        if not self.policies:
            raise ConfigError("at least one policy is required")
        if self.replications < 1 or self.request_count < 1:
            raise ConfigError("replications and request_count must be >= 1")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError("warmup_fraction must lie in [0, 1)")
        if self.rng_scheme != RNG_SCHEME:
            raise ConfigError(f"unsupported rng_scheme {self.rng_scheme!r}; "
                              f"this build provides {RNG_SCHEME!r}")
        lengths = {len(self.mfl_names), len(self.mfl_bits_per_symbol),
                   len(self.mfl_rates_gbps), len(self.mfl_thresholds_db)}
        if len(lengths) != 1:
            raise ConfigError("modulation format vectors must have matching lengths")

    # -- derived scenario objects ------------------------------------------

    @property
    def throughput_values_gbps(self) -> tuple[int, ...]:
        return THROUGHPUT_VALUES_GBPS

    @property
    def launch_power_dbm(self) -> float:
        return self.launch_power_dbm_c if self.band == "C" else self.launch_power_dbm_cl

    def band_fiber_params(self) -> dict[str, BandFiberParams]:
        return {
            "C": BandFiberParams(self.attenuation_db_per_km_c, self.noise_figure_db_c),
            "L": BandFiberParams(self.attenuation_db_per_km_l, self.noise_figure_db_l),
        }

    def band_plan(self) -> BandPlan:
        c_band = Band("C", self.c_band_channels, self.c_band_lowest_center_thz)
        if self.band == "C":
            return BandPlan(bands=(c_band,),
                            channel_bandwidth_ghz=self.channel_bandwidth_ghz,
                            guard_band_ghz=self.guard_band_ghz,
                            slot_width_ghz=self.slot_width_ghz)
        ch_thz = self.channel_bandwidth_ghz / 1e3
        c_bottom_edge = self.c_band_lowest_center_thz - ch_thz / 2.0
        l_top_edge = c_bottom_edge - self.guard_band_ghz / 1e3
        l_lowest_center = l_top_edge - self.l_band_channels * ch_thz + ch_thz / 2.0
        l_band = Band("L", self.l_band_channels, l_lowest_center)
        return BandPlan(bands=(l_band, c_band),
                        channel_bandwidth_ghz=self.channel_bandwidth_ghz,
                        guard_band_ghz=self.guard_band_ghz,
                        slot_width_ghz=self.slot_width_ghz)

    def build_model(self) -> GsnrModel:
        return GsnrModel(
            band_plan=self.band_plan(),
            launch_power_dbm=self.launch_power_dbm,
            snr_trx_db=self.snr_trx_db,
            aging_margin_db=self.aging_margin_db,
            nli_frequencies_thz=tuple(self.nli_frequencies_thz),
            nli_eta_per_w2=tuple(self.nli_eta_per_w2),
            reference_span_km=self.reference_span_km,
            subtract_nli_from_signal=self.subtract_nli_from_signal,
        )

    def reference_span(self) -> Span:
        return Span(length_km=self.reference_span_km, band_params=self.band_fiber_params())

    def formats(self) -> tuple[ModulationFormat, ...]:
        return tuple(
            ModulationFormat(name, bits, rate, threshold)
            for name, bits, rate, threshold in zip(
                self.mfl_names, self.mfl_bits_per_symbol,
                self.mfl_rates_gbps, self.mfl_thresholds_db)
        )

    def load_topology(self) -> Topology:
        return load_topology(resolve_topology_path(self.topology),
                             band_params=self.band_fiber_params(),
                             target_span_km=self.target_span_km)


def resolve_topology_path(name_or_path: str) -> Path:
    """A filesystem path as-is; otherwise a bundled topology by name."""
    candidate = Path(name_or_path)
    if candidate.suffix == ".json" or candidate.exists():
        return candidate
    bundled = resources.files("eonsim.data") / f"{name_or_path}.json"
    with resources.as_file(bundled) as concrete:
        if not concrete.exists():
            raise ConfigError(f"unknown topology {name_or_path!r}: neither a file "
                              f"nor a bundled data set")
        return Path(concrete)


_SECTION_FIELDS: Mapping[str, tuple[str, ...]] = {
    "run": ("topology", "band", "catalog_mode", "k", "policies", "loads",
            "replications", "seed", "replay_path", "debug_check_interval"),
    "traffic": ("request_count", "departure_rate", "warmup_fraction", "rng_scheme"),
    "grid": ("channel_bandwidth_ghz", "slot_width_ghz", "guard_band_ghz",
             "c_band_channels", "l_band_channels", "c_band_lowest_center_thz",
             "target_span_km"),
    "qot": ("symbol_rate_gbaud", "snr_trx_db", "aging_margin_db",
            "launch_power_dbm_c", "launch_power_dbm_cl", "reference_span_km",
            "subtract_nli_from_signal", "attenuation_db_per_km_c",
            "attenuation_db_per_km_l", "noise_figure_db_c", "noise_figure_db_l",
            "nli_frequencies_thz", "nli_eta_per_w2", "mfl_names",
            "mfl_bits_per_symbol", "mfl_rates_gbps", "mfl_thresholds_db"),
}

_TUPLE_FIELDS = {"policies", "loads", "nli_frequencies_thz", "nli_eta_per_w2",
                 "mfl_names", "mfl_bits_per_symbol", "mfl_rates_gbps",
                 "mfl_thresholds_db"}


def from_toml_text(text: str) -> ScenarioConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc
    values: dict[str, Any] = {}
    unknown_sections = set(raw) - set(_SECTION_FIELDS)
    if unknown_sections:
        raise ConfigError(f"unknown config sections: {sorted(unknown_sections)}")
    for section, allowed in _SECTION_FIELDS.items():
        payload = raw.get(section, {})
        if not isinstance(payload, dict):
            raise ConfigError(f"section [{section}] must be a table")
        unknown = set(payload) - set(allowed)
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
        for key, value in payload.items():
            values[key] = tuple(value) if key in _TUPLE_FIELDS else value
    try:
        config = replace(ScenarioConfig(), **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    config.validate()
    return config


def load_config(name_or_path: str) -> ScenarioConfig:
    """Load a config file, or a named profile shipped with the package."""
    candidate = Path(name_or_path)
    if candidate.suffix == ".toml" or candidate.exists():
        try:
            return from_toml_text(candidate.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {candidate}: {exc}") from exc
    bundled = resources.files("eonsim.profiles") / f"{name_or_path}.toml"
    try:
        text = bundled.read_text()
    except (FileNotFoundError, OSError) as exc:
        raise ConfigError(f"unknown config profile {name_or_path!r}") from exc
    return from_toml_text(text)


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize config value {value!r}")


def to_toml_text(config: ScenarioConfig) -> str:
    """Serialize with every default materialized; re-feeding this text
    reproduces the run (timings aside)."""
    lines = []
    for section, names in _SECTION_FIELDS.items():
        lines.append(f"[{section}]")
        for name in names:
            value = getattr(config, name)
            if value is None:
                continue  # optional keys (replay_path) are omitted when unset
            lines.append(f"{name} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)
