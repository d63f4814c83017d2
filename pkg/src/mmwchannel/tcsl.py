"""Time-cluster / spatial-lobe partitioning and ensemble statistics.

Time clusters are maximal groups of arrivals separated from their
neighbours by at least the void interval. Spatial lobes are connected
regions of the angular spectrum above a threshold relative to its peak.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import ndimage

from .core import (
    ChannelImpulseResponse,
    EmptyResult,
    InvalidInput,
    PowerAngularSpectrum,
    PowerDelayProfile,
    db_to_linear,
    linear_to_db,
)
from .lsp import circular_spread, zenith_spread

# absorbs float error when a gap lands exactly on the void interval
_GAP_EPS = 1e-9


@dataclass(frozen=True)
class TimeCluster:
    start_ns: float
    end_ns: float
    members: np.ndarray  # bin or path indices, delay order
    power: float
    first_excess_ns: float  # first arrival relative to the earliest cluster
    member_delays: np.ndarray = field(repr=False, default=None)
    member_powers: np.ndarray = field(repr=False, default=None)

    @property
    def num_subpaths(self) -> int:
        return int(self.members.size)


def _split_runs(positions: np.ndarray, gaps: np.ndarray, void_ns: float) -> list[np.ndarray]:
    cuts = np.flatnonzero(gaps >= void_ns - _GAP_EPS) + 1
    return np.split(np.arange(positions.size), cuts)


def _clusters(idx, delays, powers, groups) -> list[TimeCluster]:
    t0 = delays[0]
    out = []
    for g in groups:
        d, p = delays[g], powers[g]
        out.append(
            TimeCluster(
                start_ns=float(d[0]),
                end_ns=float(d[-1]),
                members=idx[g],
                power=math.fsum(p),
                first_excess_ns=float(d[0] - t0),
                member_delays=d,
                member_powers=p,
            )
        )
    return out


def partition_time_clusters(pdp: PowerDelayProfile, void_ns: float = 25.0, snr_db: float = 5.0) -> list[TimeCluster]:
    """Split a PDP into time clusters.

    Bins at least ``snr_db`` above the noise floor are occupied. Two
    occupied bins fall in different clusters when the below-threshold bins
    between them span ``void_ns`` or more.
    """
    if void_ns <= 0:
        raise InvalidInput("void_ns must be positive")
    occ = np.flatnonzero((pdp.powers >= pdp.noise_floor * db_to_linear(snr_db)) & (pdp.powers > 0))
    if occ.size == 0:
        raise EmptyResult("no occupied delay bins")
    silence = (np.diff(occ) - 1) * pdp.bin_width
    groups = _split_runs(occ, silence, void_ns)
    return _clusters(occ, occ * pdp.bin_width, pdp.powers[occ], groups)


def partition_path_delays(delays, powers, void_ns: float = 25.0) -> list[TimeCluster]:
    """Time clusters of a discrete path set; a gap is the delay difference between consecutive arrivals."""
    delays = np.asarray(delays, dtype=float)
    powers = np.asarray(powers, dtype=float)
    if delays.size == 0:
        raise EmptyResult("no paths")
    if delays.size != powers.size:
        raise InvalidInput("delays and powers differ in length")
    order = np.argsort(delays, kind="stable")
    d = delays[order]
    groups = _split_runs(d, np.diff(d), void_ns)
    return _clusters(order, d, powers[order], groups)


@dataclass(frozen=True)
class SpatialLobe:
    domain: str  # "AOA" or "AOD"
    azimuth_idx: np.ndarray
    elevation_idx: np.ndarray
    azimuths: np.ndarray = field(repr=False)
    elevations: np.ndarray = field(repr=False)
    powers: np.ndarray = field(repr=False)
    peak_azimuth: float = 0.0
    peak_elevation: float = 0.0

    @property
    def power(self) -> float:
        return float(np.sum(self.powers))

    @property
    def num_cells(self) -> int:
        return int(self.powers.size)


def _label_wrapped(mask: np.ndarray, wrap: bool):
    labels, n = ndimage.label(mask)  # 4-neighbourhood
    if not wrap or n < 2 or mask.shape[0] < 2:
        return labels, n
    parent = list(range(n + 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    first, last = labels[0], labels[-1]
    for a, b in zip(first, last):
        if a and b:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(n + 1)])
    uniq = np.unique(roots[1:])
    remap = np.zeros(n + 1, dtype=int)
    remap[1:] = np.searchsorted(uniq, roots[1:]) + 1
    return remap[labels], uniq.size


def extract_spatial_lobes(pas: PowerAngularSpectrum, threshold_db: float = -10.0, domain: str = "AOA") -> list[SpatialLobe]:
    """Connected above-threshold regions of an angular spectrum, strongest first.

    Cells at or above ``peak * 10**(threshold_db/10)`` are kept; adjacency
    is the 4-neighbourhood, wrapping in azimuth when the grid spans 360 deg.
    """
    peak = pas.power.max()
    if peak <= 0:
        raise EmptyResult("angular spectrum has no power")
    mask = (pas.power >= peak * db_to_linear(-abs(threshold_db)) * (1 - 1e-12)) & (pas.power > 0)
    labels, n = _label_wrapped(mask, pas.wraps)
    lobes = []
    for k in range(1, n + 1):
        ai, ei = np.nonzero(labels == k)
        p = pas.power[ai, ei]
        j = int(np.argmax(p))
        lobes.append(
            SpatialLobe(
                domain=domain,
                azimuth_idx=ai,
                elevation_idx=ei,
                azimuths=pas.azimuth_grid[ai],
                elevations=pas.elevation_grid[ei],
                powers=p,
                peak_azimuth=float(pas.azimuth_grid[ai[j]]),
                peak_elevation=float(pas.elevation_grid[ei[j]]),
            )
        )
    lobes.sort(key=lambda lobe: -lobe.power)
    return lobes


def lobe_rms_spreads(lobe: SpatialLobe) -> tuple[float, float]:
    """(azimuth, elevation) RMS spreads of a lobe's cells in degrees."""
    if lobe.num_cells == 0:
        raise InvalidInput("empty lobe")
    return circular_spread(lobe.azimuths, lobe.powers), zenith_spread(lobe.elevations, lobe.powers)


def fit_decay_constant(groups: Iterable[tuple[Sequence[float], Sequence[float]]]) -> tuple[float, float]:
    """Exponential decay constant (ns) and residual shadowing (dB).

    Each group is ``(excess_delays, linear_powers)`` from one realisation.
    Powers in dB are regressed on delay with a free intercept per group,
    so normalisation differences between groups do not bias the slope.
    Returns NaN when no group holds two distinct delays.
    """
    sxx = sxy = 0.0
    resid = []
    n_obs = n_groups = 0
    cache = []
    for x, p in groups:
        x = np.asarray(x, dtype=float)
        if x.size < 2 or np.ptp(x) == 0:
            continue
        y = linear_to_db(np.asarray(p, dtype=float))
        dx, dy = x - x.mean(), y - y.mean()
        sxx += float(np.dot(dx, dx))
        sxy += float(np.dot(dx, dy))
        cache.append((dx, dy))
        n_obs += x.size
        n_groups += 1
    if sxx == 0:
        return float("nan"), float("nan")
    slope = sxy / sxx
    for dx, dy in cache:
        resid.append(dy - slope * dx)
    dof = n_obs - n_groups - 1
    sigma = float(np.sqrt(np.sum(np.concatenate(resid) ** 2) / dof)) if dof > 0 else float("nan")
    decay = -10.0 / (np.log(10.0) * slope) if slope < 0 else float("inf")
    return float(decay), sigma


def _mean_std(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std())


@dataclass
class TcslSummary:
    """Ensemble statistics in the layout of a scenario parameter table."""

    num_clusters: tuple[float, float]
    num_subpaths: tuple[float, float]
    cluster_decay_ns: float
    cluster_shadowing_db: float
    subpath_decay_ns: float
    subpath_shadowing_db: float
    num_aod_lobes: tuple[float, float] = (float("nan"), float("nan"))
    num_aoa_lobes: tuple[float, float] = (float("nan"), float("nan"))
    rms_lobe_asd: tuple[float, float] = (float("nan"), float("nan"))
    rms_lobe_esd: tuple[float, float] = (float("nan"), float("nan"))
    rms_lobe_asa: tuple[float, float] = (float("nan"), float("nan"))
    rms_lobe_esa: tuple[float, float] = (float("nan"), float("nan"))
    num_realizations: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def summarize_time_clusters(partitions: Sequence[Sequence[TimeCluster]]) -> dict:
    """Cluster count, subpath count and both decay fits over an ensemble."""
    counts = [len(p) for p in partitions]
    subpaths = [c.num_subpaths for p in partitions for c in p]
    gamma, sigma_c = fit_decay_constant(
        ([c.first_excess_ns for c in p], [c.power for c in p]) for p in partitions
    )
    sub_gamma, sigma_s = fit_decay_constant(
        (c.member_delays - c.member_delays[0], c.member_powers) for p in partitions for c in p
    )
    return dict(
        num_clusters=_mean_std(counts),
        num_subpaths=_mean_std(subpaths),
        cluster_decay_ns=gamma,
        cluster_shadowing_db=sigma_c,
        subpath_decay_ns=sub_gamma,
        subpath_shadowing_db=sigma_s,
    )


def tcsl_summary(
    pdps: Sequence[PowerDelayProfile],
    pass_aoa: Sequence[PowerAngularSpectrum] = (),
    pass_aod: Sequence[PowerAngularSpectrum] = (),
    threshold_db: float = -10.0,
    void_ns: float = 25.0,
    snr_db: float = 5.0,
) -> TcslSummary:
    """Table-style statistics from measured omnidirectional PDPs and spectra.

    Each occupied delay bin counts as one subpath.
    """
    if not pdps:
        raise InvalidInput("need at least one PDP")
    temporal = summarize_time_clusters([partition_time_clusters(p, void_ns, snr_db) for p in pdps])
    out = TcslSummary(**temporal, num_realizations=len(pdps))
    for attr_n, attr_a, attr_e, spectra, dom in (
        ("num_aoa_lobes", "rms_lobe_asa", "rms_lobe_esa", pass_aoa, "AOA"),
        ("num_aod_lobes", "rms_lobe_asd", "rms_lobe_esd", pass_aod, "AOD"),
    ):
        if not spectra:
            continue
        lobe_sets = [extract_spatial_lobes(s, threshold_db, dom) for s in spectra]
        spreads = np.array([lobe_rms_spreads(lb) for ls in lobe_sets for lb in ls]).reshape(-1, 2)
        setattr(out, attr_n, _mean_std([len(ls) for ls in lobe_sets]))
        setattr(out, attr_a, _mean_std(spreads[:, 0]))
        setattr(out, attr_e, _mean_std(spreads[:, 1]))
    return out


def _label_spreads(az, el, powers, labels) -> list[tuple[float, float]]:
    out = []
    for lab in np.unique(labels):
        m = labels == lab
        if np.count_nonzero(m) < 2:
            continue  # a single arrival carries no spread information
        out.append((circular_spread(az[m], powers[m]), zenith_spread(el[m], powers[m])))
    return out


def summarize_cirs(cirs: Sequence[ChannelImpulseResponse], void_ns: Optional[float] = None) -> TcslSummary:
    """Re-extract time-cluster and lobe statistics from generated CIRs.

    Time clusters are recovered blind from path delays. Discrete paths do
    not form a contiguous angular spectrum, so lobes are taken from the
    per-path lobe labels: a lobe counts when at least one path survives in
    it, and its RMS spread is measured on its member paths (lobes with a
    single path are skipped for the spread statistics).
    """
    cirs = [c for c in cirs if len(c)]
    if not cirs:
        raise InvalidInput("ensemble has no paths")
    void = void_ns if void_ns is not None else 25.0
    temporal = summarize_time_clusters([partition_path_delays(c.delay, c.power, void) for c in cirs])
    out = TcslSummary(**temporal, num_realizations=len(cirs))
    aoa_n, aod_n, aoa_s, aod_s = [], [], [], []
    for c in cirs:
        aoa_n.append(np.unique(c.lobe_id_aoa).size)
        aod_n.append(np.unique(c.lobe_id_aod).size)
        aoa_s += _label_spreads(c.aoa_azimuth, c.aoa_elevation, c.power, c.lobe_id_aoa)
        aod_s += _label_spreads(c.aod_azimuth, c.aod_elevation, c.power, c.lobe_id_aod)
    aoa_s = np.array(aoa_s).reshape(-1, 2)
    aod_s = np.array(aod_s).reshape(-1, 2)
    out.num_aoa_lobes = _mean_std(aoa_n)
    out.num_aod_lobes = _mean_std(aod_n)
    out.rms_lobe_asa, out.rms_lobe_esa = _mean_std(aoa_s[:, 0]), _mean_std(aoa_s[:, 1])
    out.rms_lobe_asd, out.rms_lobe_esd = _mean_std(aod_s[:, 0]), _mean_std(aod_s[:, 1])
    return out
