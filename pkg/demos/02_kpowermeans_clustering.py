"""
Joint delay-angle clustering with KPowerMeans
=============================================

Plant three groups of multipaths, let the validity indices pick the number
of clusters, then merge and prune the result.
"""

import numpy as np

from mmwchannel.core import MultipathComponent
from mmwchannel.kpm import (
    McdParams,
    cluster_statistics,
    combine_validate,
    select_optimal_k,
    shape_pruning,
)

rng = np.random.default_rng(4)

centres = [(20.0, 40.0, 200.0), (90.0, 160.0, 300.0), (180.0, 280.0, 60.0)]  # delay, AOD, AOA
paths = []
for delay, aod, aoa in centres:
    for _ in range(15):
        paths.append(MultipathComponent(
            delay=delay + abs(rng.normal(0, 2)),
            power=10 ** rng.uniform(-2, 0),
            aod_azimuth=(aod + rng.normal(0, 3)) % 360,
            aoa_azimuth=(aoa + rng.normal(0, 3)) % 360,
        ))

# The delay term of the distance is scaled by zeta * std(delay) / range(delay)^2.
params = McdParams.from_paths(paths, zeta=1.0)

# K=1 is excluded: the Calinski-Harabasz numerator is undefined there.
best = select_optimal_k(paths, range(2, 8), params, restarts=20, rng_seed=0)
print(" K   objective        CH       DB")
for k, (obj, ch, db) in sorted(best.scores.items()):
    print(f"{k:2d} {obj:10.4f} {ch:10.1f} {db:8.3f}")
print("selected K =", best.K)

part = shape_pruning(combine_validate(best, paths, params), paths, params)
print("after combine/prune:", part.K, "clusters,", int(part.flagged.sum()), "paths flagged as outliers")
print(cluster_statistics(part, paths).summary())
