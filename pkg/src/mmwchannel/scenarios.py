"""Scenario parameter files (YAML, one section per scenario)."""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Union

import yaml

from .core import InvalidInput, ScenarioParameters

ENV_SCENARIO_PATH = "MMWCHANNEL_SCENARIOS"
FORMAT_VERSION = 1

# file key -> (mu field, sigma field)
_PAIRS = {
    "num_clusters": ("num_clusters_mu", "num_clusters_sigma"),
    "num_subpaths": ("num_subpaths_mu", "num_subpaths_sigma"),
    "num_aod_lobes": ("num_aod_lobes_mu", "num_aod_lobes_sigma"),
    "num_aoa_lobes": ("num_aoa_lobes_mu", "num_aoa_lobes_sigma"),
    "rms_lobe_asd_deg": ("rms_lobe_asd_mu_deg", "rms_lobe_asd_sigma_deg"),
    "rms_lobe_esd_deg": ("rms_lobe_esd_mu_deg", "rms_lobe_esd_sigma_deg"),
    "rms_lobe_asa_deg": ("rms_lobe_asa_mu_deg", "rms_lobe_asa_sigma_deg"),
    "rms_lobe_esa_deg": ("rms_lobe_esa_mu_deg", "rms_lobe_esa_sigma_deg"),
    "xpr_db": ("xpr_mu_db", "xpr_sigma_db"),
    "delay_scaling_r_ds": ("delay_scaling_r_ds_mu", "delay_scaling_r_ds_sigma"),
}
_SCALARS = (
    "frequency_ghz",
    "los_condition",
    "cluster_decay_gamma_ns",
    "subpath_decay_gamma_ns",
    "per_cluster_shadowing_db",
    "per_subpath_shadowing_db",
    "inter_cluster_void_ns",
    "notes",
)


def default_scenario_path() -> Path:
    env = os.environ.get(ENV_SCENARIO_PATH)
    if env:
        return Path(env)
    return Path(str(resources.files("mmwchannel") / "data" / "scenarios.yaml"))


def scenario_from_dict(name: str, section: Mapping) -> ScenarioParameters:
    known = set(_PAIRS) | set(_SCALARS)
    unknown = set(section) - known
    if unknown:
        raise InvalidInput(f"section {name!r}: unknown keys {sorted(unknown)}")
    kwargs = {"name": name}
    for key in _SCALARS:
        if key in section:
            kwargs[key] = section[key]
    for key, (mu, sigma) in _PAIRS.items():
        value = section.get(key)
        if value is None:
            kwargs[mu] = kwargs[sigma] = None
            continue
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise InvalidInput(f"section {name!r}: {key} must be [mu, sigma] or null")
        kwargs[mu], kwargs[sigma] = (float(v) for v in value)
    required = ("frequency_ghz", "los_condition", "cluster_decay_gamma_ns", "subpath_decay_gamma_ns",
                "per_cluster_shadowing_db", "per_subpath_shadowing_db")
    for key in required:
        if key not in kwargs:
            raise InvalidInput(f"section {name!r}: missing {key}")
    for key in ("num_clusters", "num_subpaths", "num_aod_lobes", "num_aoa_lobes", "rms_lobe_asd_deg",
                "rms_lobe_asa_deg", "xpr_db"):
        if kwargs[_PAIRS[key][0]] is None:
            raise InvalidInput(f"section {name!r}: {key} cannot be null")
    return ScenarioParameters(**kwargs)


def scenario_to_dict(sc: ScenarioParameters) -> dict:
    out = {
        "frequency_ghz": sc.frequency_ghz,
        "los_condition": sc.los_condition.value,
    }
    for key in _SCALARS[2:]:
        value = getattr(sc, key)
        if key == "notes" and not value:
            continue
        out[key] = value
    for key, (mu, sigma) in _PAIRS.items():
        m, s = getattr(sc, mu), getattr(sc, sigma)
        out[key] = None if m is None else [m, s]
    return out


def parse_scenarios(text: str) -> dict[str, ScenarioParameters]:
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict) or "scenarios" not in doc:
        raise InvalidInput("scenario file needs a top-level 'scenarios' mapping")
    if doc.get("version") != FORMAT_VERSION:
        raise InvalidInput(f"unsupported scenario file version {doc.get('version')!r}")
    return {name: scenario_from_dict(name, sec) for name, sec in doc["scenarios"].items()}


def load_scenarios(path: Optional[Union[str, Path]] = None) -> dict[str, ScenarioParameters]:
    path = Path(path) if path is not None else default_scenario_path()
    return parse_scenarios(path.read_text())


def dump_scenarios(scenarios: Mapping[str, ScenarioParameters]) -> str:
    doc = {"version": FORMAT_VERSION, "scenarios": {n: scenario_to_dict(s) for n, s in scenarios.items()}}
    return yaml.safe_dump(doc, sort_keys=False)


def load_scenario(spec: str) -> ScenarioParameters:
    """Resolve ``file:section`` or a bare section name in the default file."""
    path, _, section = spec.rpartition(":")
    scenarios = load_scenarios(path or None)
    if section not in scenarios:
        raise KeyError(f"unknown scenario section {section!r}; available: {', '.join(scenarios)}")
    return scenarios[section]
