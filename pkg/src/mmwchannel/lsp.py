"""Large-scale parameter extraction from PDPs, angular spectra and path sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import optimize, stats

from .core import (
    EmptyResult,
    InvalidInput,
    MultipathComponent,
    PowerAngularSpectrum,
    PowerDelayProfile,
    SingularKFactor,
    db_to_linear,
    linear_to_db,
)


def _weights(angles, powers):
    angles = np.asarray(angles, dtype=float).ravel()
    powers = np.asarray(powers, dtype=float).ravel()
    if angles.size == 0 or angles.size != powers.size:
        raise InvalidInput("angles and powers must have the same non-zero length")
    if np.any(powers < 0) or not np.all(np.isfinite(powers)):
        raise InvalidInput("powers must be finite and non-negative")
    if not np.any(powers > 0):
        raise InvalidInput("at least one power must be positive")
    return angles, powers


def circular_spread(angles, powers) -> float:
    """Power-weighted circular RMS spread in degrees.

    Minimises the weighted standard deviation of ``(theta + delta) mod 360``
    over the offset ``delta``. The objective is piecewise constant in
    ``delta`` and only changes where an angle crosses the seam, so placing
    the seam just below each distinct angle enumerates every piece and the
    minimum is exact.
    """
    angles, powers = _weights(angles, powers)
    keep = powers > 0
    theta = np.mod(angles[keep], 360.0)
    w = powers[keep]
    uniq, inv = np.unique(theta, return_inverse=True)
    if uniq.size == 1:
        return 0.0
    wu = np.bincount(inv, weights=w)
    wu = wu / wu.sum()

    # seam just below uniq[k]: angles uniq[:k] move up by 360
    m1 = np.dot(wu, uniq)
    m2 = np.dot(wu, uniq**2)
    cw = np.concatenate(([0.0], np.cumsum(wu)[:-1]))
    c1 = np.concatenate(([0.0], np.cumsum(wu * uniq)[:-1]))
    s1 = m1 + 360.0 * cw
    s2 = m2 + 720.0 * c1 + 360.0**2 * cw
    k = int(np.argmin(s2 - s1**2))

    # two-pass evaluation at the winning seam for accuracy
    shifted = np.where(np.arange(uniq.size) < k, uniq + 360.0, uniq)
    mean = np.dot(wu, shifted)
    var = np.dot(wu, (shifted - mean) ** 2)
    return float(np.sqrt(max(var, 0.0)))


def zenith_spread(elevations, powers) -> float:
    """Elevation spread via the same minimisation as :func:`circular_spread`.

    For elevations within [-90, 90] the seam search cannot beat the plain
    weighted standard deviation; it is kept so both spreads share one
    definition.
    """
    elevations, powers = _weights(elevations, powers)
    if np.any(np.abs(elevations) > 90):
        raise InvalidInput("elevations must lie in [-90, 90]")
    return circular_spread(elevations, powers)


def _weighted_std(x, w) -> float:
    w = w / w.sum()
    mean = np.dot(w, x)
    return float(np.sqrt(max(np.dot(w, (x - mean) ** 2), 0.0)))


def rms_delay_spread(pdp: PowerDelayProfile, threshold_db: float = 30.0) -> float:
    """RMS delay spread (ns) over bins within ``threshold_db`` of the peak."""
    p = pdp.powers
    peak = p.max()
    if peak <= 0:
        raise InvalidInput("PDP has no power above threshold")
    mask = p >= peak * db_to_linear(-abs(threshold_db))
    return _weighted_std(pdp.delays[mask], p[mask])


def path_delay_spread(delays, powers) -> float:
    """RMS delay spread of a discrete path set."""
    delays, powers = _weights(delays, powers)
    return _weighted_std(delays, powers)


def k_factor(pdp_or_paths: Union[PowerDelayProfile, Sequence[MultipathComponent], Sequence[float]]) -> float:
    """Rician K-factor in dB: strongest component over the sum of the rest."""
    if isinstance(pdp_or_paths, PowerDelayProfile):
        p = pdp_or_paths.powers
    else:
        items = list(pdp_or_paths)
        if items and isinstance(items[0], MultipathComponent):
            p = np.array([c.power for c in items])
        else:
            p = np.asarray(items, dtype=float)
    p = p[p > 0]
    if p.size < 2:
        raise SingularKFactor("K-factor needs at least two resolvable components")
    p_max = p.max()
    rest = p.sum() - p_max
    if rest <= 0:
        raise SingularKFactor("all power sits in one component")
    return float(linear_to_db(p_max / rest))


@dataclass(frozen=True)
class ZsaFit:
    """Coefficients of ``max(a*d + b, c)`` for the local mean of log10(ZSA).

    ``n_floor`` counts the records on the constant branch; when it is zero
    ``c`` is not identified by the data and is reported as the lowest value
    of the linear branch over the observed distances.
    """

    a: float
    b: float
    c: float
    residual: float
    n_floor: int

    def __call__(self, d):
        return np.maximum(self.a * np.asarray(d, dtype=float) + self.b, self.c)


def _sse(a, b, c, d, y):
    return float(np.sum((np.maximum(a * d + b, c) - y) ** 2))


def fit_zsa_local_mean(records: Iterable[tuple[float, float]]) -> ZsaFit:
    """Least-squares fit of ``max(a*d + b, c)`` to ``(d, log10 ZSA)`` pairs.

    The constant branch occupies a prefix or suffix of the distance-sorted
    records, so every split is tried in closed form (OLS line + mean floor)
    and the best consistent split is polished with a bounded local solve.
    """
    arr = np.asarray(list(records), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise InvalidInput("need at least 3 (distance, log10 ZSA) records")
    order = np.argsort(arr[:, 0], kind="stable")
    d, y = arr[order, 0], arr[order, 1]
    if np.unique(d).size < 2:
        raise InvalidInput("records must span at least two distinct distances")
    n = d.size

    if np.ptp(y) == 0:
        return ZsaFit(0.0, float(y[0]), float(y[0]), 0.0, n)

    candidates = []

    def line_fit(dd, yy):
        if np.unique(dd).size < 2:
            return None
        a, b = np.polyfit(dd, yy, 1)
        return float(a), float(b)

    # all records on the line: c is unidentified
    ab = line_fit(d, y)
    if ab is not None:
        a, b = ab
        c = float(np.min(a * d + b))
        candidates.append((_sse(a, b, c, d, y), a, b, c))

    for k in range(1, n - 1):
        for floor_idx, line_idx in ((np.arange(k), np.arange(k, n)), (np.arange(k, n), np.arange(k))):
            ab = line_fit(d[line_idx], y[line_idx])
            if ab is None:
                continue
            a, b = ab
            c = float(np.mean(y[floor_idx]))
            candidates.append((_sse(a, b, c, d, y), a, b, c))

    candidates.sort(key=lambda t: t[0])
    best = candidates[0]
    if best[0] > 1e-20:
        res = optimize.minimize(
            lambda v: _sse(v[0], v[1], v[2], d, y),
            np.array(best[1:]),
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 20000},
        )
        if res.fun < best[0]:
            best = (float(res.fun), *map(float, res.x))
    _, a, b, c = best
    n_floor = int(np.sum(a * d + b < c - 1e-12))
    return ZsaFit(a=a, b=b, c=c, residual=float(best[0]), n_floor=n_floor)


def xpr_per_bin(pdp_vv: PowerDelayProfile, pdp_vh: PowerDelayProfile, min_snr_db: float = 5.0) -> np.ndarray:
    """Per-bin cross-polar ratio (dB) where both polarisations clear the noise."""
    if pdp_vv.powers.size != pdp_vh.powers.size or not np.isclose(pdp_vv.bin_width, pdp_vh.bin_width):
        raise InvalidInput("co- and cross-polar PDPs must share bin width and length")
    gain = db_to_linear(min_snr_db)
    ok = (
        (pdp_vv.powers > 0)
        & (pdp_vh.powers > 0)
        & (pdp_vv.powers >= pdp_vv.noise_floor * gain)
        & (pdp_vh.powers >= pdp_vh.noise_floor * gain)
    )
    if not np.any(ok):
        raise EmptyResult("no delay bin clears the SNR threshold in both polarisations")
    return linear_to_db(pdp_vv.powers[ok] / pdp_vh.powers[ok])


def _censored_moments(mu, sigma):
    z = mu / sigma
    cdf, pdf = stats.norm.cdf(z), stats.norm.pdf(z)
    m1 = mu * cdf + sigma * pdf
    m2 = (mu**2 + sigma**2) * cdf + mu * sigma * pdf
    return m1, m2


def fit_truncated_gaussian_xpr(samples) -> tuple[float, float]:
    """Estimate the Gaussian behind ``max(N(mu, sigma^2), 0)`` samples (dB).

    Method of moments: the first two moments of the zero-clipped normal are
    inverted numerically. With no clipped samples the plain mean and
    standard deviation are returned.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 30:
        raise InvalidInput("need at least 30 samples")
    if np.any(x < 0):
        raise InvalidInput("clipped XPR samples cannot be negative")
    if np.ptp(x) == 0:
        raise InvalidInput("samples are all identical")
    mean, std = float(np.mean(x)), float(np.std(x))
    if not np.any(x == 0):
        return mean, std

    m1, m2 = mean, float(np.mean(x**2))

    def eqs(v):
        mu, log_sigma = v
        e1, e2 = _censored_moments(mu, np.exp(log_sigma))
        return [(e1 - m1) / max(abs(m1), 1.0), (e2 - m2) / max(m2, 1.0)]

    sol = optimize.least_squares(eqs, x0=[mean, np.log(std)], xtol=1e-14, ftol=1e-14, gtol=1e-14)
    return float(sol.x[0]), float(np.exp(sol.x[1]))


def cross_correlation(x, y) -> float:
    """Pearson correlation of paired per-location values."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size or x.size < 3:
        raise InvalidInput("need two equal-length sequences of at least 3 values")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(np.dot(dx, dx)), np.sqrt(np.dot(dy, dy))
    if sx == 0 or sy == 0:
        raise InvalidInput("zero variance input")
    return float(np.clip(np.dot(dx, dy) / (sx * sy), -1.0, 1.0))


def count_directional_multipaths(pdp: PowerDelayProfile, snr_db: float = 5.0) -> int:
    """Number of resolvable peaks at least ``snr_db`` above the noise floor.

    A peak is a bin (or plateau of equal bins) strictly above both
    neighbours; the SNR test is inclusive.
    """
    p = pdp.powers
    threshold = pdp.noise_floor * db_to_linear(snr_db) * (1 - 1e-12)
    # collapse plateaus into single runs
    change = np.flatnonzero(np.diff(p) != 0) + 1
    starts = np.concatenate(([0], change))
    levels = p[starts]
    left = np.concatenate(([-np.inf], levels[:-1]))
    right = np.concatenate((levels[1:], [-np.inf]))
    peaks = (levels > left) & (levels > right) & (levels >= threshold) & (levels > 0)
    return int(np.count_nonzero(peaks))


def pas_spreads(pas: PowerAngularSpectrum) -> tuple[float, float]:
    """Global (azimuth, elevation) spreads of an angular spectrum."""
    az, el = np.meshgrid(pas.azimuth_grid, pas.elevation_grid, indexing="ij")
    return circular_spread(az, pas.power), zenith_spread(el, pas.power)
