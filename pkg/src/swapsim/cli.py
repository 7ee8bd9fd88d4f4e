"""Command-line front end.

Subcommands: swap, contour, tomo, tags, rate. Every command reads one
config file (TOML or JSON), writes its outputs plus an effective-config
JSON into the output directory, and is byte-reproducible for a fixed
config and seed. SWAPSIM_THREADS caps the worker count of internally
parallel steps.

Exit codes: 0 success, 2 configuration errors, 3 numerical failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError
from .quadrature import QuadratureError
from .quantum import DensityOperator
from .source import SourceParams, source_fidelity
from .swap import (
    BsmModel,
    fidelity_contour,
    idealization_report,
    swap_fidelity_analytic,
    swapped_state,
)
from .timetags import (
    CorrelationHistogram,
    StreamFormatError,
    TimeTagStream,
    build_g3,
    correlation_visibility,
    extract_tomography_counts,
    find_bsm_coincidences,
    fourfold_rate,
    reduce_g2,
    side_peak_mean,
    synthesize_timetags,
)
from .tomography import (
    CountTable,
    ReconstructionError,
    enumerate_settings,
    monte_carlo_errors,
    simulate_counts,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _worker_cap() -> int:
    raw = os.environ.get("SWAPSIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"SWAPSIM_THREADS={raw!r} is not an integer") from None


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_sections(raw: dict):
    if "source" not in raw:
        raise ConfigError("config needs a [source] section")
    if "bsm" not in raw:
        raise ConfigError("config needs a [bsm] section")
    source = cfgmod.source_from_dict(raw["source"])
    bsm = cfgmod.bsm_from_dict(raw["bsm"])
    return source, bsm


def _resolve_seed(args, raw: dict) -> int:
    if args.seed is not None:
        return int(args.seed)
    if "seed" in raw:
        return int(raw["seed"])
    raise ConfigError("a seed is required (--seed or a 'seed' config key)")


def _effective_config(
    raw: dict,
    source: SourceParams,
    bsm: BsmModel,
    command: str,
    seed: int | None = None,
    experiment=None,
) -> dict:
    payload = {
        "source": cfgmod.source_to_dict(source),
        "bsm": cfgmod.bsm_to_dict(bsm),
    }
    if experiment is not None:
        payload["experiment"] = cfgmod.experiment_to_dict(experiment)
    for section in ("contour", "tomo", "tags"):
        if section in raw:
            payload[section] = raw[section]
    if seed is not None:
        payload["seed"] = seed
    payload["command"] = command
    return payload


def cmd_swap(args) -> int:
    raw = cfgmod.load_config(args.config)
    source, bsm = _load_sections(raw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    result = swapped_state(source, source, bsm)
    report = idealization_report(source, bsm)
    payload = result.to_json_dict()
    payload["analytic_fidelity"] = swap_fidelity_analytic(source, bsm)
    payload["source_fidelity_phi_plus"] = source_fidelity(source)
    _dump_json(out / "swap_result.json", payload)
    _dump_json(out / "idealization.json", report.to_json_dict())
    _dump_json(
        out / "effective_config.json", _effective_config(raw, source, bsm, "swap")
    )
    print(f"fidelity to singlet: {result.fidelity_psi_minus:.4f}")
    print(f"concurrence:         {result.concurrence:.4f}")
    print(f"herald probability:  {result.herald_probability:.4f}")
    return EXIT_OK


def cmd_contour(args) -> int:
    raw = cfgmod.load_config(args.config)
    source, bsm = _load_sections(raw)
    section = raw.get("contour", {})
    v_axis = np.linspace(
        float(section.get("v_min", 0.0)),
        float(section.get("v_max", 1.0)),
        int(section.get("v_steps", 41)),
    )
    s_axis = np.linspace(
        float(section.get("s_min", 0.0)),
        float(section.get("s_max", 3.0)),
        int(section.get("s_steps", 31)),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = fidelity_contour(v_axis, s_axis, source, bsm)
    (out / "contour.csv").write_text(grid.to_csv_text())
    if args.format == "json":
        _dump_json(out / "contour.json", grid.to_json_dict())

    markers = []
    for name in ("qd1", "qd2", "qd3"):
        marker_raw = cfgmod.load_config(cfgmod.bundled_config_path(name))
        mp, mb = _load_sections(marker_raw)
        markers.append(
            {
                "name": name.upper(),
                "s_tau_over_hbar": mp.fss_lifetime_product,
                "visibility": mb.visibility,
                "fidelity": swap_fidelity_analytic(mp, mb),
            }
        )
    _dump_json(out / "markers.json", {"markers": markers})
    _dump_json(
        out / "effective_config.json", _effective_config(raw, source, bsm, "contour")
    )
    print(f"contour grid {grid.fidelity.shape} written; markers: "
          + ", ".join(f"{m['name']}={m['fidelity']:.3f}" for m in markers))
    return EXIT_OK


def cmd_tomo(args) -> int:
    raw = cfgmod.load_config(args.config)
    source, bsm = _load_sections(raw)
    section = raw.get("tomo", {})
    seed = _resolve_seed(args, raw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    state_kind = section.get("state", "model")
    if state_kind == "model":
        state = swapped_state(source, source, bsm).rho
    elif state_kind == "file":
        state_path = section.get("state_file")
        if not state_path:
            raise ConfigError("[tomo] state='file' needs a state_file path")
        state = DensityOperator.from_json_dict(
            json.loads(Path(state_path).read_text())
        )
    else:
        raise ConfigError(f"[tomo] unknown state kind {state_kind!r}")

    n_expected = float(section.get("n_expected", 30.0))
    dark = float(section.get("dark_rate", 0.0))
    iterations = int(section.get("mc_iterations", 200))
    restarts = int(section.get("restarts", 10))

    table = simulate_counts(
        state,
        enumerate_settings(),
        n_expected,
        dark_rate=dark,
        seed=cfgmod.derive_seed(seed, "tomo-counts"),
    )
    (out / "counts.csv").write_text(table.to_csv_text())
    result = monte_carlo_errors(
        table,
        iterations=iterations,
        seed=cfgmod.derive_seed(seed, "tomo-mc"),
        restarts=restarts,
        workers=_worker_cap(),
    )
    _dump_json(out / "reconstruction.json", result.to_json_dict())
    _dump_json(
        out / "effective_config.json",
        _effective_config(raw, source, bsm, "tomo", seed=seed),
    )
    print(
        f"fidelity: {result.fidelity_psi_minus:.4f} +- {result.fidelity_sigma:.4f}  "
        f"concurrence: {result.concurrence:.4f} +- {result.concurrence_sigma:.4f}"
    )
    return EXIT_OK


def _write_histograms(
    out: Path, label: str, stream: TimeTagStream, cfg
) -> CorrelationHistogram | None:
    triggers = find_bsm_coincidences(stream, cfg)
    if triggers.size == 0:
        return None
    g3 = build_g3(stream, triggers, cfg)
    g2 = reduce_g2(g3, cfg)
    (out / f"g3_{label}.csv").write_text(g3.to_csv_text())
    (out / f"g2_{label}.csv").write_text(g2.to_csv_text())
    return g2


def cmd_tags(args) -> int:
    raw = cfgmod.load_config(args.config)
    source, bsm = _load_sections(raw)
    if "experiment" not in raw:
        raise ConfigError("config needs an [experiment] section")
    experiment = cfgmod.experiment_from_dict(raw["experiment"])
    section = raw.get("tags", {})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    budget = fourfold_rate(experiment, bsm, tau_x_ns=source.tau_x_ns)
    _dump_json(out / "rate_budget.json", budget.to_json_dict())

    if args.in_stream:
        data = Path(args.in_stream).read_bytes()
        stream = TimeTagStream.from_bytes(
            data,
            experiment,
            duration_s=float(section.get("duration_s", 0.0)),
            xxa_setting=section.get("analyzer_a", "H"),
            xxb_setting=section.get("analyzer_b", "V"),
        )
        g2 = _write_histograms(out, "input", stream, experiment)
        summary = {"events": len(stream), "histograms_written": g2 is not None}
        _dump_json(out / "tags_summary.json", summary)
        print(f"ingested {len(stream)} events")
        return EXIT_OK

    seed = _resolve_seed(args, raw)
    duration = float(section.get("duration_s", 0.0))
    analyzer_a = section.get("analyzer_a", "H")
    analyzer_b = section.get("analyzer_b", "V")

    cross = synthesize_timetags(
        source, source, bsm, experiment, duration,
        seed=cfgmod.derive_seed(seed, "tags-cross"),
        xxa_setting=analyzer_a, xxb_setting=analyzer_b,
    )
    co = synthesize_timetags(
        source, source, bsm, experiment, duration,
        seed=cfgmod.derive_seed(seed, "tags-co"),
        xxa_setting=analyzer_a, xxb_setting=analyzer_a,
    )
    (out / "stream_cross.qtt").write_bytes(cross.to_bytes())
    (out / "stream_co.qtt").write_bytes(co.to_bytes())

    summary = {
        "events_cross": len(cross),
        "events_co": len(co),
        "duration_s": duration,
        "analyzers_cross": [analyzer_a, analyzer_b],
        "analyzers_co": [analyzer_a, analyzer_a],
    }
    g2_cross = _write_histograms(out, "cross", cross, experiment)
    g2_co = _write_histograms(out, "co", co, experiment)
    if g2_cross is not None and g2_co is not None:
        summary["visibility"] = correlation_visibility(g2_cross, g2_co, experiment)
        summary["side_peak_mean_cross"] = side_peak_mean(g2_cross, experiment)
        summary["side_peak_mean_co"] = side_peak_mean(g2_co, experiment)
    _dump_json(out / "tags_summary.json", summary)
    _dump_json(
        out / "effective_config.json",
        _effective_config(raw, source, bsm, "tags", seed=seed, experiment=experiment),
    )
    vis = summary.get("visibility")
    print(
        f"events: {len(cross)} (cross), {len(co)} (co); "
        + (f"visibility: {vis:.3f}" if vis is not None else "no triggers")
    )
    return EXIT_OK


def cmd_rate(args) -> int:
    raw = cfgmod.load_config(args.config)
    source, bsm = _load_sections(raw)
    if "experiment" not in raw:
        raise ConfigError("config needs an [experiment] section")
    experiment = cfgmod.experiment_from_dict(raw["experiment"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    budget = fourfold_rate(experiment, bsm, tau_x_ns=source.tau_x_ns)
    _dump_json(out / "rate_budget.json", budget.to_json_dict())
    _dump_json(
        out / "effective_config.json",
        _effective_config(raw, source, bsm, "rate", experiment=experiment),
    )
    print(
        f"BSM singles: {budget.bsm_singles_hz/1e6:.3f} MHz, "
        f"four-fold rate: {budget.fourfold_hz*1e3:.3f} mHz"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swapsim",
        description="Entanglement-swapping simulator for cascade photon-pair sources",
    )
    parser.add_argument("--config", required=True, help="TOML or JSON parameter file")
    parser.add_argument("--seed", type=int, default=None, help="root seed (u64)")
    parser.add_argument("--out", default="swapsim-out", help="output directory")
    parser.add_argument(
        "--format", choices=("csv", "json"), default="csv", help="tabular output format"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("swap", help="heralded state, fidelity and idealization ladder")
    sub.add_parser("contour", help="fidelity grid over visibility and FSS-lifetime")
    sub.add_parser("tomo", help="simulate counts, reconstruct, Monte Carlo errors")
    tags = sub.add_parser("tags", help="synthesize or ingest time-tag streams")
    tags.add_argument("--in-stream", default=None, help="ingest an existing .qtt file")
    sub.add_parser("rate", help="four-fold rate budget")
    return parser


_COMMANDS = {
    "swap": cmd_swap,
    "contour": cmd_contour,
    "tomo": cmd_tomo,
    "tags": cmd_tags,
    "rate": cmd_rate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StreamFormatError as exc:
        print(f"stream format error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, ReconstructionError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
