"""KPowerMeans joint delay-angle clustering and cluster validity indices.

The multipath component distance (MCD) combines half the Euclidean
distance between AOD unit vectors, the same for AOA, and a scaled delay
term ``zeta * |dtau| / range * std / range``. All three are linear in a
7-D feature vector, so the MCD is a Euclidean distance in that space and
the clustering reduces to power-weighted k-means with unit-norm angular
centroids.

``combine_validate`` and ``shape_pruning`` follow the published step
names; their exact rules are reconstructions documented on each function.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import ChannelImpulseResponse, InvalidInput, MultipathComponent, UndefinedIndex
from .lsp import circular_spread, zenith_spread

log = logging.getLogger(__name__)

Paths = Union[ChannelImpulseResponse, Sequence[MultipathComponent]]


@dataclass(frozen=True)
class PathArrays:
    delay: np.ndarray
    power: np.ndarray
    aod_azimuth: np.ndarray
    aod_elevation: np.ndarray
    aoa_azimuth: np.ndarray
    aoa_elevation: np.ndarray

    def __len__(self):
        return int(self.delay.size)


def as_arrays(paths: Paths) -> PathArrays:
    if isinstance(paths, PathArrays):
        return paths
    if isinstance(paths, ChannelImpulseResponse):
        src = paths
        get = lambda f: np.asarray(getattr(src, f), dtype=float)  # noqa: E731
    else:
        items = list(paths)
        get = lambda f: np.array([getattr(p, f) for p in items], dtype=float)  # noqa: E731
    return PathArrays(*(get(f) for f in ("delay", "power", "aod_azimuth", "aod_elevation", "aoa_azimuth", "aoa_elevation")))


def unit_vectors(azimuth, elevation) -> np.ndarray:
    az, el = np.radians(azimuth), np.radians(elevation)
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)


@dataclass(frozen=True)
class McdParams:
    """Delay-term weighting of the MCD.

    ``delay_spread_norm`` is the delay normalisation (the delay range of the
    data set) and ``delay_std`` its RMS delay spread.
    """

    delay_scaling_zeta: float = 1.0
    delay_spread_norm: float = 1.0
    delay_std: float = 0.0

    def __post_init__(self):
        if self.delay_scaling_zeta < 0:
            raise InvalidInput("zeta must be >= 0")
        if not self.delay_spread_norm > 0:
            raise InvalidInput("delay_spread_norm must be > 0")
        if self.delay_std < 0:
            raise InvalidInput("delay_std must be >= 0")

    @property
    def delay_weight(self) -> float:
        return self.delay_scaling_zeta * self.delay_std / self.delay_spread_norm**2

    @classmethod
    def from_paths(cls, paths: Paths, zeta: float = 1.0) -> "McdParams":
        a = as_arrays(paths)
        span = float(np.ptp(a.delay)) or 1.0
        w = a.power / a.power.sum()
        mean = np.dot(w, a.delay)
        std = float(np.sqrt(np.dot(w, (a.delay - mean) ** 2)))
        return cls(zeta, span, std)


def features(paths: Paths, params: McdParams) -> np.ndarray:
    """(L, 7) embedding in which MCD is the Euclidean distance."""
    a = as_arrays(paths)
    return np.column_stack(
        [
            0.5 * unit_vectors(a.aod_azimuth, a.aod_elevation),
            0.5 * unit_vectors(a.aoa_azimuth, a.aoa_elevation),
            params.delay_weight * a.delay,
        ]
    )


def mcd(p1: MultipathComponent, p2: MultipathComponent, params: McdParams) -> float:
    """Multipath component distance between two paths."""
    f = features([p1, p2], params)
    return float(np.linalg.norm(f[0] - f[1]))


def _centroid(x: np.ndarray, w: np.ndarray, fallback: Optional[np.ndarray] = None) -> np.ndarray:
    c = w @ x / w.sum()
    for sl in (slice(0, 3), slice(3, 6)):
        n = np.linalg.norm(c[sl])
        if n > 1e-15:
            c[sl] = 0.5 * c[sl] / n
        elif fallback is not None:
            c[sl] = fallback[sl]
        else:
            c[sl] = x[0, sl]
    return c


def _centroids(x, w, labels, k, previous=None) -> np.ndarray:
    out = np.empty((k, x.shape[1]))
    for j in range(k):
        m = labels == j
        prev = previous[j] if previous is not None else None
        out[j] = _centroid(x[m], w[m], prev) if np.any(m) else prev
    return out


def _sqdist(x, c) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2 * x @ c.T + (c * c).sum(1)[None, :]
    return np.maximum(d, 0.0)


@dataclass(frozen=True)
class ClusterPartition:
    """Assignment of paths to clusters.

    ``flagged`` marks outliers from :func:`shape_pruning`; flagged paths
    keep their label.
    """

    assignments: np.ndarray
    centroid_delay: np.ndarray
    centroid_aod: np.ndarray  # unit vectors
    centroid_aoa: np.ndarray
    flagged: np.ndarray = None
    objective: float = float("nan")
    objective_trace: tuple = ()
    scores: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.flagged is None:
            object.__setattr__(self, "flagged", np.zeros(self.assignments.size, dtype=bool))

    @property
    def K(self) -> int:
        return int(self.centroid_delay.size)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.K)


def _partition(x, w, labels, delays, objective=float("nan"), trace=(), flagged=None, centroids=None):
    labels = np.unique(labels, return_inverse=True)[1]
    k = int(labels.max()) + 1
    c = centroids if centroids is not None else _centroids(x, w, labels, k)
    delay = np.array([np.dot(w[labels == j], delays[labels == j]) / w[labels == j].sum() for j in range(k)])
    return ClusterPartition(
        assignments=labels,
        centroid_delay=delay,
        centroid_aod=2 * c[:, 0:3],
        centroid_aoa=2 * c[:, 3:6],
        flagged=flagged,
        objective=float(objective),
        objective_trace=tuple(trace),
    )


def _partition_features(partition: ClusterPartition, params: McdParams) -> np.ndarray:
    return np.column_stack(
        [0.5 * partition.centroid_aod, 0.5 * partition.centroid_aoa, params.delay_weight * partition.centroid_delay]
    )


def _cost(x, w, c, labels):
    return float(np.dot(w, ((x - c[labels]) ** 2).sum(1)))


def _run_kpm(x, w, k, rng, max_iter):
    L = x.shape[0]
    start = rng.choice(L, size=k, replace=False, p=w / w.sum())
    c = x[start].copy()
    labels = None
    trace = []
    for _ in range(max_iter):
        d2 = _sqdist(x, c)
        new = np.argmin(d2, axis=1)
        # an emptied cluster takes over the path that costs the most
        for j in range(k):
            if not np.any(new == j):
                cost = w * d2[np.arange(L), new]
                donors = np.bincount(new, minlength=k)[new] > 1
                new[int(np.argmax(np.where(donors, cost, -1.0)))] = j
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        c = _centroids(x, w, labels, k, previous=c)
        trace.append(_cost(x, w, c, labels))
    return labels, c, trace[-1], trace


def kpowermeans(paths: Paths, K: int, params: McdParams, rng_seed=0, max_iter: int = 100) -> ClusterPartition:
    """One KPowerMeans run with seeded power-weighted initial centroids.

    Alternates assignment to the nearest centroid (in MCD) with power-weighted
    centroid updates until the assignment is stable or ``max_iter`` passes.
    ``objective`` is the sum of power times squared MCD to the own centroid.
    """
    a = as_arrays(paths)
    L = len(a)
    if not 1 <= K <= L:
        raise InvalidInput(f"K={K} must lie in [1, L={L}]")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    x = features(a, params)
    w = a.power / a.power.sum()
    labels, c, obj, trace = _run_kpm(x, w, K, rng, max_iter)
    return _partition(x, w, labels, a.delay, obj, trace, centroids=c)


def _check_k(K, L):
    if K < 2:
        raise UndefinedIndex("CH index has an undefined numerator at K=1")
    if K >= L:
        raise UndefinedIndex(f"CH index has a zero denominator at K=L={L}")


def ch_index(partition: ClusterPartition, paths: Paths, params: McdParams) -> float:
    """Calinski-Harabasz index with MCD distances; ``inf`` when all clusters are tight."""
    a = as_arrays(paths)
    K, L = partition.K, len(a)
    _check_k(K, L)
    x = features(a, params)
    w = a.power / a.power.sum()
    c = _partition_features(partition, params)
    gc = _centroid(x, w)
    sizes = partition.sizes
    tr_b = float(np.sum(sizes * ((c - gc) ** 2).sum(1)))
    tr_w = float(np.sum(((x - c[partition.assignments]) ** 2).sum(1)))
    if tr_w <= 1e-30 * max(tr_b, 1.0):
        return math.inf
    return (tr_b / (K - 1)) / (tr_w / (L - K))


def db_index(partition: ClusterPartition, paths: Paths, params: McdParams) -> float:
    """Davies-Bouldin index with MCD distances; ``inf`` when two centroids coincide."""
    K = partition.K
    if K < 2:
        raise UndefinedIndex("Davies-Bouldin index needs at least two clusters")
    x = features(as_arrays(paths), params)
    c = _partition_features(partition, params)
    lab = partition.assignments
    s = np.array([np.mean(np.linalg.norm(x[lab == k] - c[k], axis=1)) for k in range(K)])
    m = np.sqrt(_sqdist(c, c))
    np.fill_diagonal(m, np.nan)
    if np.any(m[~np.isnan(m)] <= 1e-15):
        return math.inf
    r = (s[:, None] + s[None, :]) / m
    return float(np.mean(np.nanmax(r, axis=1)))


def _intra(x, c, lab, K):
    return np.array([np.mean(np.linalg.norm(x[lab == k] - c[k], axis=1)) for k in range(K)])


def combine_validate(partition: ClusterPartition, paths: Paths, params: McdParams, t: float = 2.0) -> ClusterPartition:
    """Merge clusters whose centroids are too close to tell apart.

    A pair merges when its centroid MCD is below ``t`` times the mean of the
    two clusters' average member-to-centroid MCDs. The closest qualifying
    pair (relative to its threshold) merges first; repeat until none applies.
    """
    a = as_arrays(paths)
    x = features(a, params)
    w = a.power / a.power.sum()
    lab = partition.assignments.copy()
    while True:
        lab = np.unique(lab, return_inverse=True)[1]
        K = int(lab.max()) + 1
        if K < 2:
            break
        c = _centroids(x, w, lab, K)
        s = _intra(x, c, lab, K)
        m = np.sqrt(_sqdist(c, c))
        thresh = t * 0.5 * (s[:, None] + s[None, :])
        iu = np.triu_indices(K, 1)
        ok = m[iu] < thresh[iu]
        if not np.any(ok):
            break
        ratio = np.where(ok, m[iu] / np.maximum(thresh[iu], 1e-300), np.inf)
        i, j = iu[0][np.argmin(ratio)], iu[1][np.argmin(ratio)]
        lab[lab == j] = i
    if np.array_equal(lab, partition.assignments):
        return partition
    return replace(_partition(x, w, lab, a.delay, flagged=partition.flagged.copy()), scores=partition.scores)


def shape_pruning(partition: ClusterPartition, paths: Paths, params: McdParams, s: float = 0.9, p: float = 0.9) -> ClusterPartition:
    """Flag outlying paths in each cluster without removing them.

    The power core of a cluster is the smallest set of its strongest paths
    holding at least a fraction ``p`` of its power. A path is flagged when it
    lies outside the core and its MCD to the centroid exceeds the
    ``s``-quantile of the cluster's MCDs, so at most ``1 - p`` of a
    cluster's power is ever flagged.
    """
    if not (0 < s <= 1 and 0 < p <= 1):
        raise InvalidInput("s and p must lie in (0, 1]")
    a = as_arrays(paths)
    x = features(a, params)
    c = _partition_features(partition, params)
    lab = partition.assignments
    flagged = partition.flagged.copy()
    for k in range(partition.K):
        idx = np.flatnonzero(lab == k)
        if idx.size < 2:
            continue
        dist = np.linalg.norm(x[idx] - c[k], axis=1)
        order = np.lexsort((dist, -a.power[idx]))
        cum = np.cumsum(a.power[idx][order])
        n_core = int(np.searchsorted(cum, p * cum[-1] * (1 - 1e-12))) + 1
        core = np.zeros(idx.size, dtype=bool)
        core[order[:n_core]] = True
        far = dist > np.quantile(dist, s)
        flagged[idx[~core & far]] = True
    return replace(partition, flagged=flagged)


def _seeded_rng(seed, K, r):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(K), int(r))))


def _best_of_restarts(x, w, K, restarts, seed, max_iter):
    best = None
    for r in range(restarts):
        run = _run_kpm(x, w, K, _seeded_rng(seed, K, r), max_iter)
        if best is None or run[2] < best[2] - 1e-15:
            best = run
    return best


def select_optimal_k(
    paths: Paths,
    k_range: Iterable[int],
    params: McdParams,
    restarts: int = 50,
    rng_seed: int = 0,
    workers: int = 1,
    max_iter: int = 100,
) -> ClusterPartition:
    """Best-of-restarts KPowerMeans for each K, choosing K by CH (DB breaks ties).

    Each (K, restart) run draws from its own stream seeded by
    ``(rng_seed, K, restart)``. ``scores`` on the result maps every K to
    its objective, CH and DB values.
    """
    a = as_arrays(paths)
    L = len(a)
    ks = sorted(set(int(k) for k in k_range))
    if 1 in ks:
        raise InvalidInput("K=1 cannot be evaluated: the CH index has an undefined numerator at K=1")
    ks = [k for k in ks if 2 <= k <= L - 1]
    if not ks:
        raise InvalidInput(f"no feasible K in the requested range (need 2 <= K <= L-1 = {L - 1})")
    log.warning("K=1 is excluded from the search; single-cluster data will be split")
    x = features(a, params)
    w = a.power / a.power.sum()

    def run(K):
        return K, _best_of_restarts(x, w, K, restarts, rng_seed, max_iter)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(run, ks))
    else:
        runs = [run(k) for k in ks]

    table, parts = {}, {}
    for K, (labels, c, obj, trace) in runs:
        part = _partition(x, w, labels, a.delay, obj, trace, centroids=c)
        parts[K] = part
        if part.K < 2:
            table[K] = (obj, -math.inf, math.inf)
            continue
        table[K] = (obj, ch_index(part, a, params), db_index(part, a, params))

    def key(K):
        _, ch, db = table[K]
        return (-ch, db, K)

    best = min(ks, key=key)
    return replace(parts[best], scores=table)


@dataclass(frozen=True)
class ClusterStats:
    asd: np.ndarray  # per-cluster intra-cluster spreads, degrees
    asa: np.ndarray
    zsd: np.ndarray
    zsa: np.ndarray
    shadowing_db: float
    num_clusters: int
    subpaths: np.ndarray

    def summary(self) -> dict:
        ms = lambda v: (float(np.mean(v)), float(np.std(v)))  # noqa: E731
        return {
            "num_clusters": self.num_clusters,
            "num_subpaths": ms(self.subpaths),
            "cluster_asd_deg": ms(self.asd),
            "cluster_asa_deg": ms(self.asa),
            "cluster_zsd_deg": ms(self.zsd),
            "cluster_zsa_deg": ms(self.zsa),
            "per_cluster_shadowing_db": self.shadowing_db,
        }


def cluster_statistics(partition: ClusterPartition, paths: Paths) -> ClusterStats:
    """Intra-cluster angular spreads and per-cluster shadowing.

    Flagged paths are left out. Shadowing is the standard deviation of
    cluster powers (dB) about a straight-line fit against cluster excess
    delay; it needs at least three clusters and is NaN otherwise.
    """
    a = as_arrays(paths)
    keep = ~partition.flagged
    K = partition.K
    spreads = np.zeros((K, 4))
    sizes = np.zeros(K, dtype=int)
    cl_power = np.zeros(K)
    cl_delay = np.zeros(K)
    for k in range(K):
        m = (partition.assignments == k) & keep
        sizes[k] = np.count_nonzero(m)
        if not sizes[k]:
            continue
        pw = a.power[m]
        spreads[k] = (
            circular_spread(a.aod_azimuth[m], pw),
            circular_spread(a.aoa_azimuth[m], pw),
            zenith_spread(a.aod_elevation[m], pw),
            zenith_spread(a.aoa_elevation[m], pw),
        )
        cl_power[k] = pw.sum()
        cl_delay[k] = a.delay[m].min()
    live = sizes > 0
    shadow = float("nan")
    if np.count_nonzero(live) >= 3:
        xd = cl_delay[live] - cl_delay[live].min()
        y = 10 * np.log10(cl_power[live])
        coef = np.polyfit(xd, y, 1)
        resid = y - np.polyval(coef, xd)
        shadow = float(np.sqrt(np.sum(resid**2) / (resid.size - 2))) if resid.size > 2 else float("nan")
    return ClusterStats(
        asd=spreads[live, 0], asa=spreads[live, 1], zsd=spreads[live, 2], zsa=spreads[live, 3],
        shadowing_db=shadow, num_clusters=int(np.count_nonzero(live)), subpaths=sizes[live],
    )
