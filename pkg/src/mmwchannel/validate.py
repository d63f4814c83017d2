"""Compare ensemble statistics with a scenario's reference values."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .core import ChannelImpulseResponse, InvalidInput, LspRecord, ScenarioParameters
from .lsp import fit_truncated_gaussian_xpr
from .tcsl import summarize_cirs

log = logging.getLogger(__name__)

REPORT_FORMAT = "mmwchannel-validation/1"
REFERENCE_SIZE = 10_000


@dataclass(frozen=True)
class Tolerances:
    """Tolerance bands quoted for an ensemble of ``REFERENCE_SIZE`` CIRs.

    Smaller ensembles widen every band by ``sqrt(REFERENCE_SIZE / n)``;
    ``scale`` multiplies all of them.
    """

    count_abs: float = 0.15
    decay_rel: float = 0.10
    xpr_db: float = 0.3
    lobe_spread_deg: float = 0.5
    scale: float = 1.0

    def factor(self, n: int) -> float:
        return self.scale * max(1.0, math.sqrt(REFERENCE_SIZE / max(n, 1)))


@dataclass(frozen=True)
class ValidationRow:
    name: str
    reference: float
    estimate: float
    tolerance: float
    relative: bool = False

    @property
    def deviation(self) -> float:
        d = abs(self.estimate - self.reference)
        return d / abs(self.reference) if self.relative else d

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.estimate) and self.deviation <= self.tolerance)


@dataclass
class ValidationReport:
    rows: list[ValidationRow]
    sample_size: int
    seed: Optional[int] = None
    scenario: str = ""
    config_hash: str = ""
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failed_rows(self) -> list[str]:
        return [r.name for r in self.rows if not r.passed]

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "toolkit_version": __version__,
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "sample_size": self.sample_size,
            "passed": self.passed,
            "warnings": list(self.warnings),
            "rows": [
                {
                    "name": r.name,
                    "reference": r.reference,
                    "estimate": r.estimate if np.isfinite(r.estimate) else None,
                    "tolerance": r.tolerance,
                    "relative": r.relative,
                    "passed": r.passed,
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [
            f"mmwchannel {__version__} validation: scenario={self.scenario} n={self.sample_size} "
            f"seed={self.seed} config={self.config_hash}",
            f"{'statistic':<24}{'reference':>11}{'estimate':>11}{'tolerance':>12}  result",
        ]
        for r in self.rows:
            tol = f"{100 * r.tolerance:.1f}%" if r.relative else f"{r.tolerance:.3f}"
            lines.append(
                f"{r.name:<24}{r.reference:>11.3f}{r.estimate:>11.3f}{tol:>12}  {'PASS' if r.passed else 'FAIL'}"
            )
        lines += [f"warning: {w}" for w in self.warnings]
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def validate_ensemble(
    ensemble: Sequence[ChannelImpulseResponse],
    scenario: ScenarioParameters,
    tolerances: Tolerances = Tolerances(),
    seed: Optional[int] = None,
    config_hash: str = "",
    check_frequency: bool = True,
) -> ValidationReport:
    """Re-extract statistics from ``ensemble`` and compare them with ``scenario``.

    With ``check_frequency`` a carrier mismatch between the CIRs and the
    scenario raises :class:`InvalidInput`; switch it off to compare across
    scenarios on purpose.
    """
    if not ensemble:
        raise InvalidInput("empty ensemble")
    freqs = {c.frequency_ghz for c in ensemble if c.frequency_ghz is not None}
    warnings = []
    if freqs and freqs != {scenario.frequency_ghz}:
        msg = f"ensemble frequency {sorted(freqs)} GHz differs from scenario {scenario.frequency_ghz} GHz"
        if check_frequency:
            raise InvalidInput(msg)
        warnings.append(msg)
    n = len(ensemble)
    k = tolerances.factor(n)
    if n < 100:
        warnings.append(f"only {n} realisations: estimates have wide variance, bands widened x{k:.1f}")

    s = summarize_cirs(ensemble, scenario.inter_cluster_void_ns)
    xpr = np.concatenate([c.xpr for c in ensemble])
    try:
        xpr_mu, xpr_sigma = fit_truncated_gaussian_xpr(xpr)
    except InvalidInput as exc:
        warnings.append(f"XPR not estimable: {exc}")
        xpr_mu = xpr_sigma = float("nan")

    ct, dt = tolerances.count_abs * k, tolerances.decay_rel * k
    lt, xt = tolerances.lobe_spread_deg * k, tolerances.xpr_db * k
    rows = [
        ValidationRow("num_clusters", scenario.num_clusters_mu, s.num_clusters[0], ct),
        ValidationRow("num_subpaths", scenario.num_subpaths_mu, s.num_subpaths[0], ct),
        ValidationRow("cluster_decay_ns", scenario.cluster_decay_gamma_ns, s.cluster_decay_ns, dt, True),
        ValidationRow("subpath_decay_ns", scenario.subpath_decay_gamma_ns, s.subpath_decay_ns, dt, True),
        ValidationRow("num_aod_lobes", scenario.num_aod_lobes_mu, s.num_aod_lobes[0], ct),
        ValidationRow("num_aoa_lobes", scenario.num_aoa_lobes_mu, s.num_aoa_lobes[0], ct),
        ValidationRow("rms_lobe_asd_deg", scenario.rms_lobe_asd_mu_deg, s.rms_lobe_asd[0], lt),
        ValidationRow("rms_lobe_asa_deg", scenario.rms_lobe_asa_mu_deg, s.rms_lobe_asa[0], lt),
    ]
    if scenario.rms_lobe_esd_mu_deg is not None:
        rows.append(ValidationRow("rms_lobe_esd_deg", scenario.rms_lobe_esd_mu_deg, s.rms_lobe_esd[0], lt))
    if scenario.rms_lobe_esa_mu_deg is not None:
        rows.append(ValidationRow("rms_lobe_esa_deg", scenario.rms_lobe_esa_mu_deg, s.rms_lobe_esa[0], lt))
    rows += [
        ValidationRow("xpr_mu_db", scenario.xpr_mu_db, xpr_mu, xt),
        ValidationRow("xpr_sigma_db", scenario.xpr_sigma_db, xpr_sigma, xt),
    ]
    for w in warnings:
        log.warning(w)
    return ValidationReport(rows, n, seed, scenario.name, config_hash, warnings)


LSP_NAMES = ("DS", "ASD", "ASA", "ZSA", "SF", "K")


@dataclass(frozen=True)
class CorrelationMatrix:
    names: tuple
    values: np.ndarray  # NaN rows/columns mark undefined parameters

    def __getitem__(self, pair):
        a, b = pair
        return float(self.values[self.names.index(a), self.names.index(b)])

    @property
    def undefined(self) -> list[str]:
        return [n for i, n in enumerate(self.names) if np.isnan(self.values[i, i])]


def lsp_columns(records: Sequence[LspRecord]) -> dict[str, np.ndarray]:
    """Per-location LSP columns: spreads in log10, SF and K in dB."""
    def col(attr):
        return np.array([getattr(r, attr) for r in records], dtype=float)

    with np.errstate(divide="ignore", invalid="ignore"):
        return {
            "DS": np.log10(col("rms_ds_ns") * 1e-9),
            "ASD": np.log10(col("asd_deg")),
            "ASA": np.log10(col("asa_deg")),
            "ZSA": np.log10(col("zsa_deg")),
            "SF": col("sf_db"),
            "K": col("k_factor_db"),
        }


def lsp_correlation_matrix(records: Sequence[LspRecord]) -> CorrelationMatrix:
    """Pairwise Pearson correlations over locations where both values are finite."""
    if len(records) < 3:
        raise InvalidInput("need at least 3 locations")
    cols = lsp_columns(records)
    n = len(LSP_NAMES)
    out = np.full((n, n), np.nan)
    for i, a in enumerate(LSP_NAMES):
        for j in range(i, n):
            x, y = cols[a], cols[LSP_NAMES[j]]
            m = np.isfinite(x) & np.isfinite(y)
            if np.count_nonzero(m) < 3:
                continue
            dx, dy = x[m] - x[m].mean(), y[m] - y[m].mean()
            sx, sy = np.sqrt(dx @ dx), np.sqrt(dy @ dy)
            if sx == 0 or sy == 0:
                continue
            out[i, j] = out[j, i] = np.clip(dx @ dy / (sx * sy), -1, 1)
    for i in range(n):
        if np.isnan(out[i, i]):
            out[i, :] = out[:, i] = np.nan
        else:
            out[i, i] = 1.0
    return CorrelationMatrix(LSP_NAMES, out)


def reference_correlations() -> dict:
    """Measured LSP cross-correlations shipped as reference data (not reproducible here)."""
    text = (resources.files("mmwchannel") / "data" / "lsp_correlations.yaml").read_text()
    return yaml.safe_load(text)
