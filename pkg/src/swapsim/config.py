"""Parameter-file loading and deterministic seed derivation.

Configs are TOML or JSON files with ``[source]``, ``[bsm]`` and
``[experiment]`` sections; the bundled qd1/qd2/qd3 files are the
reference examples. Decay-time keys accept the string "inf" (and TOML's
native inf) for "no decoherence".
"""

from __future__ import annotations

import json
import math
import sys
import zlib
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .source import SourceParams
from .swap import BsmModel
from .timetags import ExperimentConfig


class ConfigError(ValueError):
    """Malformed or incomplete configuration input."""


def _as_float(value, key: str) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        raise ConfigError(f"{key}: cannot parse {value!r} as a number")
    if isinstance(value, (int, float)):
        return float(value)
    raise ConfigError(f"{key}: expected a number, got {type(value).__name__}")


def load_config(path: str | Path) -> dict:
    """Parse a TOML (default) or JSON config file into a dict."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        if path.suffix.lower() == ".json":
            return json.loads(path.read_text())
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing key {key!r} in [{where}]")
    return section[key]


def source_from_dict(section: dict) -> SourceParams:
    try:
        return SourceParams(
            s_ueV=_as_float(_require(section, "S_ueV", "source"), "S_ueV"),
            tau_x_ns=_as_float(_require(section, "tau_X_ns", "source"), "tau_X_ns"),
            tau_ss_ns=_as_float(section.get("tau_SS_ns", math.inf), "tau_SS_ns"),
            tau_hv_ns=_as_float(section.get("tau_HV_ns", math.inf), "tau_HV_ns"),
            t2_star_ns=_as_float(section.get("T2_star_ns", math.inf), "T2_star_ns"),
            k=_as_float(section.get("k", 1.0), "k"),
        )
    except ValueError as exc:
        raise ConfigError(f"[source]: {exc}") from exc


def bsm_from_dict(section: dict) -> BsmModel:
    try:
        return BsmModel(
            visibility=_as_float(_require(section, "visibility", "bsm"), "visibility"),
            reflectance=_as_float(section.get("reflectance", 0.48), "reflectance"),
            transmittance=_as_float(section.get("transmittance", 0.52), "transmittance"),
            mode_overlap=_as_float(section.get("mode_overlap", 0.96), "mode_overlap"),
        )
    except ValueError as exc:
        raise ConfigError(f"[bsm]: {exc}") from exc


def experiment_from_dict(section: dict) -> ExperimentConfig:
    try:
        g2 = section.get("g2_window_ns", (-1.0, 2.8))
        return ExperimentConfig(
            pair_gen_prob=_as_float(
                _require(section, "pair_gen_prob", "experiment"), "pair_gen_prob"
            ),
            eta_x=_as_float(_require(section, "eta_x", "experiment"), "eta_x"),
            eta_xx=_as_float(_require(section, "eta_xx", "experiment"), "eta_xx"),
            rep_rate_hz=_as_float(section.get("rep_rate_hz", 160e6), "rep_rate_hz"),
            pulse_pair_delay_ns=_as_float(
                section.get("pulse_pair_delay_ns", 1.8), "pulse_pair_delay_ns"
            ),
            bsm_window_ns=_as_float(section.get("bsm_window_ns", 0.6), "bsm_window_ns"),
            record_range_ns=_as_float(
                section.get("record_range_ns", 100.0), "record_range_ns"
            ),
            g2_window_ns=(
                _as_float(g2[0], "g2_window_ns[0]"),
                _as_float(g2[1], "g2_window_ns[1]"),
            ),
            detector_jitter_sigma_ns=_as_float(
                section.get("detector_jitter_sigma_ns", 0.4), "detector_jitter_sigma_ns"
            ),
            tau_xx_ns=_as_float(section.get("tau_XX_ns", 0.12), "tau_XX_ns"),
            dark_rate_hz=_as_float(section.get("dark_rate_hz", 0.0), "dark_rate_hz"),
            bin_width_ns=_as_float(section.get("bin_width_ns", 0.1), "bin_width_ns"),
        )
    except ValueError as exc:
        raise ConfigError(f"[experiment]: {exc}") from exc


def _float_or_inf_str(value: float):
    return "inf" if math.isinf(value) else value


def source_to_dict(p: SourceParams) -> dict:
    return {
        "S_ueV": p.s_ueV,
        "tau_X_ns": p.tau_x_ns,
        "tau_SS_ns": _float_or_inf_str(p.tau_ss_ns),
        "tau_HV_ns": _float_or_inf_str(p.tau_hv_ns),
        "T2_star_ns": _float_or_inf_str(p.t2_star_ns),
        "k": p.k,
    }


def bsm_to_dict(m: BsmModel) -> dict:
    return {
        "visibility": m.visibility,
        "reflectance": m.reflectance,
        "transmittance": m.transmittance,
        "mode_overlap": m.mode_overlap,
    }


def experiment_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "pair_gen_prob": cfg.pair_gen_prob,
        "eta_x": cfg.eta_x,
        "eta_xx": cfg.eta_xx,
        "rep_rate_hz": cfg.rep_rate_hz,
        "pulse_pair_delay_ns": cfg.pulse_pair_delay_ns,
        "bsm_window_ns": cfg.bsm_window_ns,
        "record_range_ns": cfg.record_range_ns,
        "g2_window_ns": list(cfg.g2_window_ns),
        "detector_jitter_sigma_ns": cfg.detector_jitter_sigma_ns,
        "tau_XX_ns": cfg.tau_xx_ns,
        "dark_rate_hz": cfg.dark_rate_hz,
        "bin_width_ns": cfg.bin_width_ns,
    }


def bundled_config_path(name: str) -> Path:
    """Path of a parameter file shipped with the package (qd1, qd2, qd3)."""
    candidate = resources.files("swapsim").joinpath("data", f"{name}.toml")
    if not candidate.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return Path(str(candidate))


def derive_seed(root_seed: int, component: str, index: int = 0) -> np.random.SeedSequence:
    """Deterministic per-component seed stream.

    Compounds the root seed with a CRC of the component name and an
    index, so parallel and serial execution orders agree.
    """
    return np.random.SeedSequence(
        entropy=(int(root_seed), zlib.crc32(component.encode("utf-8")), int(index))
    )
