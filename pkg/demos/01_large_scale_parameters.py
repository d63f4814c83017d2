"""
Large-scale parameters from a single location
=============================================

Delay spread, K-factor, angular spreads and XPR from synthetic sounder
output, followed by the distance-dependent fit of the elevation spread.
"""

import numpy as np

from mmwchannel.core import PowerAngularSpectrum, PowerDelayProfile
from mmwchannel.lsp import (
    circular_spread,
    fit_zsa_local_mean,
    k_factor,
    pas_spreads,
    rms_delay_spread,
    xpr_per_bin,
)

rng = np.random.default_rng(0)

# A PDP on a 2.5 ns grid: a strong first arrival and an exponential tail.
bins = np.arange(400)
powers = np.where(rng.random(400) < 0.15, np.exp(-bins * 2.5 / 40.0), 0.0)
powers[0] = 1.0
pdp = PowerDelayProfile(powers, bin_width=2.5, noise_floor=1e-6)

print(f"RMS delay spread (30 dB window): {rms_delay_spread(pdp):.2f} ns")
print(f"K-factor: {k_factor(pdp):.2f} dB")

# Angular spread is circular: two equal paths at 355 and 5 degrees sit 10
# degrees apart, so the RMS spread is 5, not the 175 a linear std would give.
print("spread of {355, 5} deg:", circular_spread([355.0, 5.0], [1.0, 1.0]))

# A measured PAS: azimuth in 10 degree steps, three elevation rows.
az = np.arange(0, 360, 10.0)
el = np.array([-10.0, 0.0, 10.0])
pas = np.exp(-0.5 * (((az[:, None] + 180) % 360 - 180) / 20.0) ** 2) * np.exp(-0.5 * (el[None, :] / 8.0) ** 2)
asa, zsa = pas_spreads(PowerAngularSpectrum(az, el, pas))
print(f"ASA {asa:.1f} deg, ZSA {zsa:.1f} deg")

# XPR per resolvable bin: co-pol over cross-pol, both above the SNR gate.
vh = PowerDelayProfile(powers / 10 ** (rng.normal(15, 5, 400).clip(0) / 10), 2.5, 1e-9)
x = xpr_per_bin(pdp, vh)
print(f"XPR over {x.size} bins: mean {x.mean():.1f} dB")

# The elevation spread local mean follows max(a*d + b, c) with distance.
d = np.linspace(30, 1200, 40)
y = np.maximum(-0.002 * d + 2.3, 0.66) + rng.normal(0, 0.02, d.size)
fit = fit_zsa_local_mean(zip(d, y))
print(f"log10 ZSA fit: a={fit.a:.5f} b={fit.b:.3f} c={fit.c:.3f} (floor points: {fit.n_floor})")
