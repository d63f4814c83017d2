"""
Generating channel impulse responses
====================================

Draw CIRs from a shipped scenario, look at one, and write an ensemble in
the on-disk format the command line tools read.
"""

import tempfile
from pathlib import Path

import numpy as np

from mmwchannel.formats import read_ensemble, write_ensemble
from mmwchannel.generate import GeneratorConfig, generate_cir, generate_ensemble
from mmwchannel.scenarios import load_scenarios

scenarios = load_scenarios()
print("shipped scenarios:", ", ".join(scenarios))

config = GeneratorConfig(scenarios["umi-28ghz-nlos"], rng_seed=7)
cir = generate_cir(config, index=0)
print(f"\nCIR 0: {len(cir)} paths in {cir.num_clusters} time clusters")
print(" delay_ns  power_db  AOD_az  AOA_az  XPR_db  cluster")
for i in range(min(len(cir), 8)):
    print(f"{cir.delay[i]:9.2f} {10 * np.log10(cir.power[i]):9.2f} {cir.aod_azimuth[i]:7.1f} "
          f"{cir.aoa_azimuth[i]:7.1f} {cir.xpr[i]:7.1f} {cir.cluster_id[i]:6d}")

# Realisation i depends only on (seed, i), so worker count does not matter.
a = generate_ensemble(config, 200)
b = generate_ensemble(config, 200, workers=4)
print("\nsame ensemble with 1 and 4 workers:", all(x.to_bytes() == y.to_bytes() for x, y in zip(a, b)))
print("mean clusters per CIR:", np.mean([c.num_clusters for c in a]))

with tempfile.TemporaryDirectory() as tmp:
    manifest = write_ensemble(tmp, a, scenario=config.scenario.name, config=config.to_dict(),
                              config_hash=config.config_hash(), seed=7)
    print("files written:", len(list(Path(tmp).iterdir())), "config hash", manifest["config_hash"])
    _, back = read_ensemble(tmp)
    print("read back", len(back), "CIRs")
