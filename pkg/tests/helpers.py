"""Synthetic data builders shared by the test modules."""

import numpy as np

from mmwchannel.core import ChannelImpulseResponse, MultipathComponent
from mmwchannel.kpm import McdParams, features


def brute_force_spread(angles, powers, step=0.001):
    """Minimum over a Delta grid of the weighted std of (theta + Delta) mod 360."""
    a = np.asarray(angles, float)
    w = np.asarray(powers, float)
    w = w / w.sum()
    best = np.inf
    for chunk in np.array_split(np.arange(0.0, 360.0, step), 40):
        t = np.mod(a[None, :] + chunk[:, None], 360.0)
        m1 = t @ w
        m2 = (t**2) @ w
        best = min(best, float(np.sqrt(np.maximum(m2 - m1**2, 0.0)).min()))
    return best


def planted_paths(K, rng, per_cluster=12, angle_jitter=2.0, delay_jitter=1.5, separation=5.0):
    """Paths in K well-separated joint delay-angle groups.

    Draws group centres until every centroid pair is at least
    ``separation`` times the largest intra-group MCD spread apart.
    Returns (paths, truth_labels, params).
    """
    while True:
        paths, truth = [], []
        aod = rng.uniform(0, 360, K)
        aoa = rng.uniform(0, 360, K)
        aod_el = rng.normal(0, 8, K)
        aoa_el = rng.normal(0, 8, K)
        delay = np.sort(rng.uniform(5, 400, K))
        for k in range(K):
            for _ in range(per_cluster):
                paths.append(
                    MultipathComponent(
                        delay=float(delay[k] + abs(rng.normal(0, delay_jitter))),
                        power=float(10 ** rng.uniform(-2, 0)),
                        aod_azimuth=float((aod[k] + rng.normal(0, angle_jitter)) % 360),
                        aod_elevation=float(aod_el[k] + rng.normal(0, angle_jitter)),
                        aoa_azimuth=float((aoa[k] + rng.normal(0, angle_jitter)) % 360),
                        aoa_elevation=float(aoa_el[k] + rng.normal(0, angle_jitter)),
                    )
                )
                truth.append(k)
        truth = np.array(truth)
        params = McdParams.from_paths(paths)
        if K == 1 or separation <= 0 or separation_ratio(paths, truth, params) >= separation:
            return paths, truth, params


def separation_ratio(paths, truth, params):
    """Smallest centroid distance over the largest intra-group RMS MCD to the centroid."""
    x = features(paths, params)
    w = np.array([p.power for p in paths])
    K = truth.max() + 1
    c = np.array([w[truth == k] @ x[truth == k] / w[truth == k].sum() for k in range(K)])
    spread = max(np.sqrt(np.mean(np.sum((x[truth == k] - c[k]) ** 2, 1))) for k in range(K))
    d = min(np.linalg.norm(c[i] - c[j]) for i in range(K) for j in range(i + 1, K))
    return d / spread


def single_path_cir(delay=0.0, power=1.0, **kw):
    return ChannelImpulseResponse.from_paths([MultipathComponent(delay, power, **kw)], [0])


def planted_lsp_records(corr, n, rng, exact=False):
    """Locations whose LSP columns (log10 spreads, dB for SF/K) have correlation ``corr``.

    With ``exact`` the draws are whitened before colouring, so the sample
    correlation equals ``corr`` rather than scattering around it.
    """
    from mmwchannel.core import LspRecord

    if exact:
        z = rng.standard_normal((n, 6))
        z -= z.mean(axis=0)
        z = z @ np.linalg.inv(np.linalg.cholesky(np.cov(z, rowvar=False))).T
        z = z @ np.linalg.cholesky(corr).T
    else:
        z = rng.multivariate_normal(np.zeros(6), corr, size=n)
    # DS, ASD, ASA, ZSA (log10 domain), SF, K
    means = np.array([-7.3, 1.0, 1.2, 0.8, 0.0, 5.0])
    sds = np.array([0.2, 0.2, 0.2, 0.1, 4.0, 3.0])
    x = means + sds * z
    return [
        LspRecord(
            f"loc{i}", rms_ds_ns=10 ** r[0] * 1e9, asd_deg=10 ** r[1], asa_deg=10 ** r[2],
            zsa_deg=min(10 ** r[3], 90.0), sf_db=r[4], k_factor_db=r[5],
        )
        for i, r in enumerate(x)
    ]
