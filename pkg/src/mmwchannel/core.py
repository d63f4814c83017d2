"""Domain types, unit conversions and angle helpers shared by every module.

Powers are held in linear mW internally; dB/dBm only appear at I/O
boundaries. Angles are degrees at the API surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np


class ChannelModelError(Exception):
    """Base class for toolkit errors."""


class InvalidInput(ChannelModelError, ValueError):
    """Inputs violate an operation's preconditions."""


class SingularKFactor(ChannelModelError, ValueError):
    """K-factor requested for a profile with a single resolvable component."""


class EmptyResult(ChannelModelError, ValueError):
    """An extraction found nothing to report (no qualifying bins, cells, ...)."""


class UndefinedIndex(ChannelModelError, ValueError):
    """A cluster validity index is undefined for the requested K."""


def db_to_linear(x):
    """Convert dB to a linear power ratio."""
    out = np.power(10.0, np.asarray(x, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(x):
    """Convert a linear power ratio to dB. Zero maps to ``-inf``."""
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def wrap_azimuth(angles):
    """Map azimuths onto [0, 360)."""
    out = np.mod(np.asarray(angles, dtype=float), 360.0)
    # np.mod can return 360.0 for tiny negative inputs
    out = np.where(out >= 360.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def circular_difference(a, b):
    """Minimal signed difference ``a - b`` in degrees, in (-180, 180]."""
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 360.0)
    d = np.where(d > 180.0, d - 360.0, d)
    return float(d) if d.ndim == 0 else d


class ElevationConvention(str, Enum):
    """How elevation angles are expressed in an input dataset."""

    HORIZON = "horizon"  # 0 at the horizon, positive up, [-90, 90]
    ZENITH = "zenith"  # 0 straight up, [0, 180]


def to_elevation(angles, convention=ElevationConvention.HORIZON):
    """Convert angles from ``convention`` to horizon-referenced elevation."""
    angles = np.asarray(angles, dtype=float)
    if ElevationConvention(convention) is ElevationConvention.ZENITH:
        angles = 90.0 - angles
    return angles


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PowerDelayProfile:
    """Received power per delay bin.

    Bin ``i`` starts at excess delay ``i * bin_width``.
    """

    powers: np.ndarray
    bin_width: float = 2.5
    noise_floor: float = 0.0

    def __post_init__(self):
        powers = _frozen(self.powers)
        if powers.ndim != 1 or powers.size == 0:
            raise InvalidInput("PDP needs a non-empty 1-D power sequence")
        if not np.all(np.isfinite(powers)) or np.any(powers < 0):
            raise InvalidInput("PDP powers must be finite and non-negative")
        if not self.bin_width > 0:
            raise InvalidInput("bin_width must be positive")
        if self.noise_floor < 0:
            raise InvalidInput("noise_floor must be non-negative")
        object.__setattr__(self, "powers", powers)

    @property
    def delays(self) -> np.ndarray:
        return np.arange(self.powers.size) * self.bin_width

    @property
    def total_power(self) -> float:
        return float(np.sum(self.powers))


@dataclass(frozen=True)
class PowerAngularSpectrum:
    """Power over an azimuth x elevation grid, indexed ``power[az, el]``."""

    azimuth_grid: np.ndarray
    elevation_grid: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        az = _frozen(self.azimuth_grid)
        el = _frozen(self.elevation_grid)
        p = _frozen(self.power)
        if az.ndim != 1 or el.ndim != 1 or az.size == 0 or el.size == 0:
            raise InvalidInput("angular grids must be non-empty 1-D arrays")
        if p.shape != (az.size, el.size):
            raise InvalidInput(f"power shape {p.shape} does not match grid ({az.size}, {el.size})")
        if np.any(az < 0) or np.any(az >= 360):
            raise InvalidInput("azimuth grid must lie in [0, 360)")
        for name, grid in (("azimuth", az), ("elevation", el)):
            if grid.size > 2 and not np.allclose(np.diff(grid), grid[1] - grid[0]):
                raise InvalidInput(f"{name} grid must be uniformly spaced")
            if grid.size > 1 and np.any(np.diff(grid) <= 0):
                raise InvalidInput(f"{name} grid must be increasing")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidInput("angular spectrum power must be finite and non-negative")
        object.__setattr__(self, "azimuth_grid", az)
        object.__setattr__(self, "elevation_grid", el)
        object.__setattr__(self, "power", p)

    @property
    def azimuth_step(self) -> float:
        return float(self.azimuth_grid[1] - self.azimuth_grid[0]) if self.azimuth_grid.size > 1 else 360.0

    @property
    def wraps(self) -> bool:
        """True when the azimuth grid covers the full circle."""
        return bool(np.isclose(self.azimuth_grid.size * self.azimuth_step, 360.0))


@dataclass(frozen=True)
class MultipathComponent:
    delay: float
    power: float
    aod_azimuth: float = 0.0
    aod_elevation: float = 0.0
    aoa_azimuth: float = 0.0
    aoa_elevation: float = 0.0
    xpr: float = 0.0

    def __post_init__(self):
        if not self.delay >= 0:
            raise InvalidInput("delay must be non-negative")
        if not self.power > 0:
            raise InvalidInput("path power must be strictly positive")
        for name in ("aod_azimuth", "aoa_azimuth"):
            if not 0 <= getattr(self, name) < 360:
                raise InvalidInput(f"{name} must lie in [0, 360)")
        if self.xpr < 0:
            raise InvalidInput("xpr must be non-negative")


_PATH_FIELDS = ("delay", "power", "aod_azimuth", "aod_elevation", "aoa_azimuth", "aoa_elevation", "xpr")


@dataclass(frozen=True, eq=False)
class ChannelImpulseResponse:
    """Multipath components stored column-wise, sorted by delay.

    ``cluster_id`` labels are contiguous integers from 0. Lobe labels index
    the AOA / AOD spatial lobes that generated each path.
    """

    delay: np.ndarray
    power: np.ndarray
    aod_azimuth: np.ndarray
    aod_elevation: np.ndarray
    aoa_azimuth: np.ndarray
    aoa_elevation: np.ndarray
    xpr: np.ndarray
    cluster_id: np.ndarray
    lobe_id_aoa: np.ndarray
    lobe_id_aod: np.ndarray
    scenario_tag: str = ""
    frequency_ghz: Optional[float] = None

    def __post_init__(self):
        for name in _PATH_FIELDS:
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        for name in ("cluster_id", "lobe_id_aoa", "lobe_id_aod"):
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype=np.int64))
        n = self.delay.size
        for name in _PATH_FIELDS + ("cluster_id", "lobe_id_aoa", "lobe_id_aod"):
            if getattr(self, name).shape != (n,):
                raise InvalidInput(f"{name} must have one entry per path")
        if n and np.any(np.diff(self.delay) < 0):
            raise InvalidInput("paths must be sorted by non-decreasing delay")
        if n and np.any(self.power <= 0):
            raise InvalidInput("path powers must be strictly positive")
        if n and np.any(self.xpr < 0):
            raise InvalidInput("xpr must be non-negative")
        if n:
            labels = np.unique(self.cluster_id)
            if not np.array_equal(labels, np.arange(labels.size)):
                raise InvalidInput("cluster labels must be contiguous integers starting at 0")

    def __len__(self) -> int:
        return int(self.delay.size)

    @property
    def num_clusters(self) -> int:
        return int(self.cluster_id.max()) + 1 if len(self) else 0

    @property
    def paths(self) -> list[MultipathComponent]:
        return [
            MultipathComponent(*(float(getattr(self, f)[i]) for f in _PATH_FIELDS))
            for i in range(len(self))
        ]

    def to_bytes(self) -> bytes:
        """Canonical byte encoding, used for determinism checks and hashing."""
        parts = [self.scenario_tag.encode(), repr(self.frequency_ghz).encode()]
        for name in _PATH_FIELDS:
            parts.append(np.ascontiguousarray(getattr(self, name), dtype="<f8").tobytes())
        for name in ("cluster_id", "lobe_id_aoa", "lobe_id_aod"):
            parts.append(np.ascontiguousarray(getattr(self, name), dtype="<i8").tobytes())
        return b"|".join(parts)

    def __eq__(self, other):
        if not isinstance(other, ChannelImpulseResponse):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()

    __hash__ = None

    @classmethod
    def from_paths(
        cls,
        paths: Sequence[MultipathComponent],
        cluster_id: Sequence[int],
        lobe_id_aoa: Optional[Sequence[int]] = None,
        lobe_id_aod: Optional[Sequence[int]] = None,
        scenario_tag: str = "",
        frequency_ghz: Optional[float] = None,
    ) -> "ChannelImpulseResponse":
        n = len(paths)
        order = np.argsort([p.delay for p in paths], kind="stable")
        cols = {f: np.array([getattr(paths[i], f) for i in order], dtype=float) for f in _PATH_FIELDS}
        zeros = np.zeros(n, dtype=np.int64)
        take = lambda v: np.asarray(v if v is not None else zeros, dtype=np.int64)[order]  # noqa: E731
        return cls(
            **cols,
            cluster_id=take(cluster_id),
            lobe_id_aoa=take(lobe_id_aoa),
            lobe_id_aod=take(lobe_id_aod),
            scenario_tag=scenario_tag,
            frequency_ghz=frequency_ghz,
        )


class LosCondition(str, Enum):
    LOS = "LOS"
    LOS_TO_NLOS = "LOS-to-NLOS"
    NLOS = "NLOS"


@dataclass(frozen=True)
class ScenarioParameters:
    """Time-cluster / spatial-lobe parameter set for one propagation scenario.

    Optional spreads are ``None`` where no measurement exists; the generator
    treats a missing departure elevation spread as zero.
    """

    name: str
    frequency_ghz: float
    los_condition: LosCondition
    num_clusters_mu: float
    num_clusters_sigma: float
    num_subpaths_mu: float
    num_subpaths_sigma: float
    cluster_decay_gamma_ns: float
    subpath_decay_gamma_ns: float
    per_cluster_shadowing_db: float
    per_subpath_shadowing_db: float
    num_aod_lobes_mu: float
    num_aod_lobes_sigma: float
    num_aoa_lobes_mu: float
    num_aoa_lobes_sigma: float
    rms_lobe_asd_mu_deg: float
    rms_lobe_asd_sigma_deg: float
    rms_lobe_asa_mu_deg: float
    rms_lobe_asa_sigma_deg: float
    rms_lobe_esa_mu_deg: Optional[float]
    rms_lobe_esa_sigma_deg: Optional[float]
    xpr_mu_db: float
    xpr_sigma_db: float
    rms_lobe_esd_mu_deg: Optional[float] = None
    rms_lobe_esd_sigma_deg: Optional[float] = None
    delay_scaling_r_ds_mu: Optional[float] = None
    delay_scaling_r_ds_sigma: Optional[float] = None
    inter_cluster_void_ns: float = 25.0
    notes: str = ""

    def __post_init__(self):
        object.__setattr__(self, "los_condition", LosCondition(self.los_condition))
        sigmas = [
            "num_clusters_sigma", "num_subpaths_sigma", "per_cluster_shadowing_db",
            "per_subpath_shadowing_db", "num_aod_lobes_sigma", "num_aoa_lobes_sigma",
            "rms_lobe_asd_sigma_deg", "rms_lobe_asa_sigma_deg", "rms_lobe_esa_sigma_deg",
            "rms_lobe_esd_sigma_deg", "xpr_sigma_db", "delay_scaling_r_ds_sigma",
        ]
        for name in sigmas:
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise InvalidInput(f"{self.name}: {name} must be >= 0 (got {v})")
        for name in ("cluster_decay_gamma_ns", "subpath_decay_gamma_ns", "inter_cluster_void_ns"):
            if not getattr(self, name) > 0:
                raise InvalidInput(f"{self.name}: {name} must be > 0")
        for name in ("num_clusters_mu", "num_subpaths_mu", "num_aod_lobes_mu", "num_aoa_lobes_mu"):
            if not getattr(self, name) >= 1:
                raise InvalidInput(f"{self.name}: {name} must be >= 1")
        if not self.frequency_ghz > 0:
            raise InvalidInput(f"{self.name}: frequency_ghz must be > 0")


@dataclass(frozen=True)
class LspRecord:
    """Large-scale parameters of one measurement location.

    Spreads are linear (deg / ns); SF and K in dB. Unknown values are NaN.
    """

    location_id: str
    tr_separation_m: float = float("nan")
    asd_deg: float = float("nan")
    asa_deg: float = float("nan")
    zsa_deg: float = float("nan")
    rms_ds_ns: float = float("nan")
    sf_db: float = float("nan")
    k_factor_db: float = float("nan")
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("asd_deg", "asa_deg", "zsa_deg", "rms_ds_ns"):
            v = getattr(self, name)
            if v < 0:
                raise InvalidInput(f"{name} must be non-negative")
        if self.zsa_deg > 90:
            raise InvalidInput("zsa_deg cannot exceed 90 degrees")
