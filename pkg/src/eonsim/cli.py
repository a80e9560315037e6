"""Command-line front end: batch execution over load grids, bands and policies.

Exit codes: 0 success, 2 configuration problems, 3 topology problems,
1 any other runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import (BAND_SCENARIOS, CATALOG_MODES, POLICY_NAMES,
                     ScenarioConfig, load_config, to_toml_text)
from .engine import run_scenario, write_plot_data, write_report_csv
from .errors import ConfigError, EonsimError, TopologyError
from .qot import build_mrd_table

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_TOPOLOGY = 3


def _parse_loads(text: str) -> tuple[float, ...]:
    """Accept 'lo:hi:step' (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"--loads expects lo:hi:step, got {text!r}")
        lo, hi, step = (float(p) for p in parts)
        if step <= 0 or hi < lo:
            raise ConfigError(f"bad load range {text!r}")
        loads = []
        value = lo
        while value <= hi + 1e-9:
            loads.append(round(value, 9))
            value += step
        return tuple(loads)
    return tuple(float(p) for p in text.split(",") if p.strip())


def _parse_policies(text: str) -> tuple[str, ...]:
    if text.strip().lower() == "all":
        return POLICY_NAMES
    names = tuple(p.strip().lower() for p in text.split(",") if p.strip())
    for name in names:
        if name not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {name!r}; choose from {POLICY_NAMES}")
    return names


def _band_tag(band: str) -> str:
    return band.replace("+", "p")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eonsim",
        description="Dynamic RMSA simulation over C and C+L band elastic optical networks.",
    )
    parser.add_argument("--config", default="paper_defaults",
                        help="config file path or bundled profile name "
                             "(default: paper_defaults)")
    parser.add_argument("--policies", default=None,
                        help="'all' or comma list of minmaxf,minmaxhop,maxmingsnr")
    parser.add_argument("--loads", default=None,
                        help="offered load grid as lo:hi:step (inclusive) or comma list")
    parser.add_argument("--band", action="append", choices=BAND_SCENARIOS, default=None,
                        help="band scenario; repeat the flag to run several")
    parser.add_argument("--catalog", action="append", choices=CATALOG_MODES, default=None,
                        help="candidate path mode; repeat the flag to run several")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--replications", type=int, default=None)
    parser.add_argument("--out", default="eonsim-out", help="output directory")
    parser.add_argument("--replay", default=None, metavar="WORKLOAD.CSV",
                        help="replay a dumped workload instead of generating traffic")
    parser.add_argument("--export-mrd", action="store_true",
                        help="write the reach lookup table(s) and exit")
    return parser


def _apply_flags(config: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    updates = {}
    if args.policies is not None:
        updates["policies"] = _parse_policies(args.policies)
    if args.loads is not None:
        updates["loads"] = _parse_loads(args.loads)
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.replications is not None:
        updates["replications"] = args.replications
    if args.replay is not None:
        if not Path(args.replay).exists():
            raise ConfigError(f"replay file {args.replay!r} does not exist")
        updates["replay_path"] = args.replay
    return replace(config, **updates) if updates else config


def export_mrd_table(config: ScenarioConfig, path: Path) -> None:
    """Reach lookup table as CSV: mfl_name, m, R_m_Gbps, threshold_dB, mrd_km."""
    table = build_mrd_table(config.build_model(), config.reference_span(),
                            config.formats(), config.channel_bandwidth_ghz)
    lines = ["mfl_name,m,R_m_Gbps,threshold_dB,mrd_km"]
    for mf in table:
        lines.append(f"{mf.name},{mf.bits_per_symbol},{mf.net_rate_gbps!r},"
                     f"{mf.gsnr_threshold_db!r},{mf.mrd_km!r}")
    path.write_text("\n".join(lines) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        base = load_config(args.config)
        base = _apply_flags(base, args)
        bands = tuple(args.band) if args.band else (base.band,)
        catalogs = tuple(args.catalog) if args.catalog else (base.catalog_mode,)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)

        if args.export_mrd:
            for band in bands:
                config = replace(base, band=band)
                config.validate()
                target = out_dir / f"mrd_{_band_tag(band)}.csv"
                export_mrd_table(config, target)
                print(f"wrote {target}")
            return EXIT_OK

        reports = []
        for band in bands:
            for catalog in catalogs:
                config = replace(base, band=band, catalog_mode=catalog)
                config.validate()
                echo = out_dir / f"resolved_config_{_band_tag(band)}_{catalog}.toml"
                echo.write_text(to_toml_text(config))
                report = run_scenario(config)
                reports.append(report)
                for row in report.rows:
                    print(f"band={row.band} catalog={row.catalog_mode} "
                          f"policy={row.policy} load={row.offered_load:g} "
                          f"bbp={row.bbp_mean:.6g} ci95={row.bbp_ci95:.3g} "
                          f"gsnr={row.avg_gsnr_db:.3f} dB "
                          f"wall={row.wall_clock_s:.2f}s")
        write_report_csv(reports, out_dir / "report.csv")
        write_plot_data(reports, out_dir / "plot.dat")
        print(f"wrote {out_dir / 'report.csv'} and {out_dir / 'plot.dat'}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TopologyError as exc:
        print(f"topology error: {exc}", file=sys.stderr)
        return EXIT_TOPOLOGY
    except EonsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
