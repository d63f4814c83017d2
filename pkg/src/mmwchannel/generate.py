"""Stochastic CIR generation from time-cluster / spatial-lobe parameters.

One realisation is built in four steps: a cluster skeleton (arrival times
and cluster powers), subpaths inside each cluster, AOA/AOD spatial lobes,
and the random pairing of subpaths with lobes. Realisation ``i`` draws from
its own stream seeded by ``(seed, i)``, so ensembles do not depend on the
number of worker threads.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import optimize, stats

from .core import ChannelImpulseResponse, InvalidInput, ScenarioParameters, db_to_linear, wrap_azimuth

COUNT_MODELS = ("gaussian", "poisson")


@dataclass(frozen=True)
class GeneratorConfig:
    scenario: ScenarioParameters
    rng_seed: int = 0
    count_model: str = "gaussian"
    # shift the count distribution so its clamped mean equals the table mean
    correct_count_bias: bool = True
    min_subpath_power_db: Optional[float] = None
    inter_cluster_exponential_mean_ns: float = 17.0
    aod_elevation_center_deg: float = 0.0
    aoa_elevation_center_deg: float = 0.0
    min_lobe_spread_deg: float = 0.5

    def __post_init__(self):
        if self.count_model not in COUNT_MODELS:
            raise InvalidInput(f"count_model must be one of {COUNT_MODELS}")
        if self.inter_cluster_exponential_mean_ns < 0:
            raise InvalidInput("inter_cluster_exponential_mean_ns must be >= 0")
        if self.min_subpath_power_db is not None and self.min_subpath_power_db <= 0:
            raise InvalidInput("min_subpath_power_db must be positive (dB below the strongest path)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenario"]["los_condition"] = self.scenario.los_condition.value
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _clamped_gaussian_mean(loc: float, sigma: float) -> float:
    # E[max(1, round(X))] = 1 + sum_{k>=2} P(X >= k - 1/2)
    k = np.arange(2, int(loc + 12 * sigma) + 3)
    return 1.0 + float(np.sum(stats.norm.sf((k - 0.5 - loc) / sigma)))


@lru_cache(maxsize=256)
def count_location(mu: float, sigma: float, model: str = "gaussian") -> float:
    """Location parameter whose clamped count distribution has mean ``mu``."""
    if model == "poisson":
        # E[max(1, Poisson(lam))] = lam + exp(-lam)
        if mu <= 1:
            return 0.0
        return float(optimize.brentq(lambda lam: lam + np.exp(-lam) - mu, 0.0, mu))
    if sigma == 0 or mu <= 1:
        return float(mu)
    lo = mu - 12 * sigma - 5
    if _clamped_gaussian_mean(lo, sigma) >= mu:
        return lo
    # rounding alone can leave the mean a little below loc, so search above mu too
    hi = mu + 2 * sigma + 1
    return float(optimize.brentq(lambda m: _clamped_gaussian_mean(m, sigma) - mu, lo, hi, xtol=1e-12))


def draw_counts(mu, sigma, rng, model="gaussian", correct_bias=True, size=None):
    """Integer counts >= 1.

    ``gaussian``: ``max(1, round(N(loc, sigma)))``; ``poisson``:
    ``max(1, Poisson(loc))``. Without bias correction ``loc = mu`` and the
    clamp pushes the mean above ``mu``.
    """
    if mu < 1:
        raise InvalidInput("count mean must be >= 1")
    loc = count_location(float(mu), float(sigma), model) if correct_bias else float(mu)
    if model == "poisson":
        draw = rng.poisson(max(loc, 0.0), size=size)
    elif model == "gaussian":
        draw = np.rint(rng.normal(loc, sigma, size=size)) if sigma > 0 else np.full(size or (), np.rint(loc))
    else:
        raise InvalidInput(f"unknown count model {model!r}")
    out = np.maximum(draw, 1).astype(np.int64)
    return int(out) if size is None else out


def exponential_power_fractions(excess_delays, decay_ns, shadowing_db, rng=None) -> np.ndarray:
    """Unit-sum powers proportional to ``exp(-delay/decay) * 10**(X/10)``, X ~ N(0, shadowing^2) dB."""
    t = np.asarray(excess_delays, dtype=float)
    db = -10.0 * np.log10(np.e) * t / decay_ns
    if shadowing_db > 0:
        db = db + rng.normal(0.0, shadowing_db, size=t.size)
    p = db_to_linear(db - db.max())
    p = np.atleast_1d(p)
    return p / p.sum()


def _bounded_exponential(scale, upper, rng, size):
    """Exponential(scale) conditioned on values below ``upper`` (inverse CDF)."""
    scale = np.asarray(scale, dtype=float)
    u = rng.random(size)
    return -scale * np.log1p(-u * -np.expm1(-upper / scale))


def intra_cluster_offsets(num_subpaths: int, decay_ns: float, void_ns: float, rng) -> np.ndarray:
    """Subpath delays relative to the cluster's first arrival.

    Sorted exponential arrivals, built from their independent spacings, with
    every spacing kept below the void interval so that a cluster never
    splits on re-extraction.
    """
    m = int(num_subpaths)
    if m <= 1:
        return np.zeros(1)
    # spacing j of m-1 sorted Exp(decay) draws has mean decay / (m - j)
    scales = decay_ns / (m - np.arange(1, m))
    spacings = _bounded_exponential(scales, void_ns * (1 - 1e-6), rng, m - 1)
    return np.concatenate(([0.0], np.cumsum(spacings)))


@dataclass
class ClusterSkeleton:
    delay_ns: float
    power_fraction: float
    subpath_offsets_ns: np.ndarray = field(repr=False)

    @property
    def num_subpaths(self) -> int:
        return int(self.subpath_offsets_ns.size)


def generate_cluster_skeleton(config: GeneratorConfig, rng) -> list[ClusterSkeleton]:
    """Cluster arrival delays and unit-sum cluster powers.

    The silence between the last subpath of one cluster and the first of the
    next is the void interval plus an exponential excess.
    """
    sc = config.scenario
    n = draw_counts(sc.num_clusters_mu, sc.num_clusters_sigma, rng, config.count_model, config.correct_count_bias)
    m = draw_counts(
        sc.num_subpaths_mu, sc.num_subpaths_sigma, rng, config.count_model, config.correct_count_bias, size=n
    )
    offsets = [intra_cluster_offsets(k, sc.subpath_decay_gamma_ns, sc.inter_cluster_void_ns, rng) for k in m]
    extra = rng.exponential(config.inter_cluster_exponential_mean_ns, size=n - 1) if n > 1 else np.zeros(0)
    starts = np.zeros(n)
    for i in range(1, n):
        starts[i] = starts[i - 1] + offsets[i - 1][-1] + sc.inter_cluster_void_ns + extra[i - 1]
    fractions = exponential_power_fractions(starts, sc.cluster_decay_gamma_ns, sc.per_cluster_shadowing_db, rng)
    return [ClusterSkeleton(float(t), float(f), o) for t, f, o in zip(starts, fractions, offsets)]


def generate_subpaths(cluster: ClusterSkeleton, scenario: ScenarioParameters, rng) -> tuple[np.ndarray, np.ndarray]:
    """Absolute subpath delays and their powers (summing to the cluster power)."""
    frac = exponential_power_fractions(
        cluster.subpath_offsets_ns, scenario.subpath_decay_gamma_ns, scenario.per_subpath_shadowing_db, rng
    )
    return cluster.delay_ns + cluster.subpath_offsets_ns, cluster.power_fraction * frac


@dataclass(frozen=True)
class LobeSet:
    """Lobe centres and per-lobe RMS spreads for one link end."""

    azimuth_center: np.ndarray
    elevation_center: np.ndarray
    azimuth_spread: np.ndarray
    elevation_spread: np.ndarray

    def __len__(self):
        return int(self.azimuth_center.size)


def _lobe_spreads(mu, sigma, floor, rng, n):
    if mu is None:
        return np.zeros(n)
    return np.maximum(rng.normal(mu, sigma or 0.0, size=n), floor)


def generate_spatial_lobes(config: GeneratorConfig, rng) -> tuple[LobeSet, LobeSet]:
    """(AOD lobes, AOA lobes).

    Azimuth centres are uniform on [0, 360). Elevation centres are Gaussian
    at departure and Laplacian at arrival, with the table's mean RMS lobe
    elevation spread as their standard deviation.
    """
    sc = config.scenario
    model, fix = config.count_model, config.correct_count_bias
    n_aod = draw_counts(sc.num_aod_lobes_mu, sc.num_aod_lobes_sigma, rng, model, fix)
    n_aoa = draw_counts(sc.num_aoa_lobes_mu, sc.num_aoa_lobes_sigma, rng, model, fix)

    az = rng.uniform(0.0, 360.0, size=n_aod)
    esd = sc.rms_lobe_esd_mu_deg or 0.0
    el = config.aod_elevation_center_deg + (rng.normal(0.0, esd, size=n_aod) if esd > 0 else np.zeros(n_aod))
    aod = LobeSet(
        wrap_azimuth(az),
        np.clip(el, -90, 90),
        _lobe_spreads(sc.rms_lobe_asd_mu_deg, sc.rms_lobe_asd_sigma_deg, config.min_lobe_spread_deg, rng, n_aod),
        _lobe_spreads(sc.rms_lobe_esd_mu_deg, sc.rms_lobe_esd_sigma_deg, config.min_lobe_spread_deg, rng, n_aod),
    )

    az = rng.uniform(0.0, 360.0, size=n_aoa)
    esa = sc.rms_lobe_esa_mu_deg or 0.0
    lap = rng.laplace(0.0, esa / np.sqrt(2.0), size=n_aoa) if esa > 0 else np.zeros(n_aoa)
    aoa = LobeSet(
        wrap_azimuth(az),
        np.clip(config.aoa_elevation_center_deg + lap, -90, 90),
        _lobe_spreads(sc.rms_lobe_asa_mu_deg, sc.rms_lobe_asa_sigma_deg, config.min_lobe_spread_deg, rng, n_aoa),
        _lobe_spreads(sc.rms_lobe_esa_mu_deg, sc.rms_lobe_esa_sigma_deg, config.min_lobe_spread_deg, rng, n_aoa),
    )
    return aod, aoa


def lobe_offsets(labels, powers, spreads, rng) -> np.ndarray:
    """Angular offsets of paths about their lobe centre.

    Draws standard normal offsets, then centres and rescales them inside
    each lobe so the lobe's power-weighted RMS spread equals its drawn
    spread. A lobe holding a single path gets one unscaled normal offset.
    """
    z = rng.standard_normal(labels.size)
    out = np.zeros(labels.size)
    for lab in np.unique(labels):
        m = labels == lab
        s = spreads[lab]
        if s == 0:
            continue
        if np.count_nonzero(m) == 1:
            out[m] = z[m] * s
            continue
        w = powers[m] / powers[m].sum()
        zc = z[m] - np.dot(w, z[m])
        std = np.sqrt(np.dot(w, zc**2))
        out[m] = zc * (s / std) if std > 0 else 0.0
    return out


def assign_lobes(num_paths: int, num_lobes: int, rng) -> np.ndarray:
    """Random lobe label per path, covering every lobe when there are enough paths.

    A random subset of ``min(num_paths, num_lobes)`` paths takes one distinct
    lobe each; the remaining paths pick a lobe uniformly.
    """
    labels = rng.integers(0, num_lobes, size=num_paths)
    k = min(num_paths, num_lobes)
    seeded = rng.permutation(num_paths)[:k]
    labels[seeded] = rng.permutation(num_lobes)[:k]
    return labels


def assemble_cir(
    clusters: list[ClusterSkeleton], lobes: tuple[LobeSet, LobeSet], config: GeneratorConfig, rng
) -> ChannelImpulseResponse:
    """Combine temporal and spatial parts into one sorted CIR.

    Subpaths below the power floor are dropped; the rest are each paired
    with a uniformly chosen AOD lobe and AOA lobe.
    """
    sc = config.scenario
    delays, powers, labels = [], [], []
    for k, cl in enumerate(clusters):
        d, p = generate_subpaths(cl, sc, rng)
        delays.append(d)
        powers.append(p)
        labels.append(np.full(d.size, k))
    delay, power, cid = map(np.concatenate, (delays, powers, labels))

    if config.min_subpath_power_db is not None:
        keep = power >= power.max() * db_to_linear(-config.min_subpath_power_db)
        delay, power, cid = delay[keep], power[keep], cid[keep]
        cid = np.unique(cid, return_inverse=True)[1]

    order = np.argsort(delay, kind="stable")
    delay, power, cid = delay[order], power[order], cid[order]
    n = delay.size

    aod, aoa = lobes
    lab_aod = assign_lobes(n, len(aod), rng)
    lab_aoa = assign_lobes(n, len(aoa), rng)
    aod_az = wrap_azimuth(aod.azimuth_center[lab_aod] + lobe_offsets(lab_aod, power, aod.azimuth_spread, rng))
    aod_el = np.clip(aod.elevation_center[lab_aod] + lobe_offsets(lab_aod, power, aod.elevation_spread, rng), -90, 90)
    aoa_az = wrap_azimuth(aoa.azimuth_center[lab_aoa] + lobe_offsets(lab_aoa, power, aoa.azimuth_spread, rng))
    aoa_el = np.clip(aoa.elevation_center[lab_aoa] + lobe_offsets(lab_aoa, power, aoa.elevation_spread, rng), -90, 90)
    xpr = np.maximum(rng.normal(sc.xpr_mu_db, sc.xpr_sigma_db, size=n), 0.0)

    return ChannelImpulseResponse(
        delay=delay,
        power=power,
        aod_azimuth=np.atleast_1d(aod_az),
        aod_elevation=aod_el,
        aoa_azimuth=np.atleast_1d(aoa_az),
        aoa_elevation=aoa_el,
        xpr=xpr,
        cluster_id=cid,
        lobe_id_aoa=lab_aoa,
        lobe_id_aod=lab_aod,
        scenario_tag=sc.name,
        frequency_ghz=sc.frequency_ghz,
    )


def realization_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def generate_cir(config: GeneratorConfig, index: int = 0) -> ChannelImpulseResponse:
    """Realisation ``index`` of the ensemble defined by ``config``."""
    rng = realization_rng(config.rng_seed, index)
    clusters = generate_cluster_skeleton(config, rng)
    lobes = generate_spatial_lobes(config, rng)
    return assemble_cir(clusters, lobes, config, rng)


def generate_ensemble(config: GeneratorConfig, n: int, workers: int = 1) -> list[ChannelImpulseResponse]:
    """``n`` independent realisations, ordered by index."""
    if n < 1:
        raise InvalidInput("ensemble size must be >= 1")
    if workers <= 1:
        return [generate_cir(config, i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: generate_cir(config, i), range(n)))
