"""
Time clusters and spatial lobes
===============================

The temporal and spatial halves of the TCSL view are extracted
independently: time clusters from the PDP, lobes from the PAS.
"""

import numpy as np

from mmwchannel.core import PowerAngularSpectrum, PowerDelayProfile
from mmwchannel.tcsl import extract_spatial_lobes, lobe_rms_spreads, partition_time_clusters

# Two bursts with 40 ns of silence between them (1 ns bins).
powers = np.zeros(200)
powers[[0, 2, 5, 9]] = [1.0, 0.5, 0.3, 0.1]
powers[[49, 50, 55]] = [0.2, 0.15, 0.05]
pdp = PowerDelayProfile(powers, bin_width=1.0, noise_floor=1e-4)

for void in (10.0, 25.0, 50.0):
    clusters = partition_time_clusters(pdp, void_ns=void)
    print(f"void {void:4.0f} ns -> {len(clusters)} cluster(s):",
          [(c.start_ns, c.end_ns, c.num_subpaths) for c in clusters])

# A PAS with one lobe straddling 0 degrees and a weaker one near 180.
az = np.arange(0, 360, 5.0)
el = np.array([0.0])
wrap = (az + 180) % 360 - 180
pas = np.exp(-0.5 * (wrap / 8) ** 2) + 0.3 * np.exp(-0.5 * ((az - 180) / 6) ** 2)
spectrum = PowerAngularSpectrum(az, el, pas[:, None])

for threshold in (-10.0, -20.0):
    lobes = extract_spatial_lobes(spectrum, threshold_db=threshold)
    print(f"threshold {threshold} dB: {len(lobes)} lobe(s)")
    for lobe in lobes:
        asp, esp = lobe_rms_spreads(lobe)
        print(f"   peak {lobe.peak_azimuth:5.1f} deg, {lobe.num_cells} cells, RMS azimuth spread {asp:.1f} deg")
