"""
Closing the loop
================

Generate from a scenario, re-extract its statistics and compare them with
the reference values. A mismatched scenario should fail.
"""

import numpy as np

from mmwchannel.core import LspRecord
from mmwchannel.generate import GeneratorConfig, generate_ensemble
from mmwchannel.scenarios import load_scenario
from mmwchannel.validate import lsp_correlation_matrix, reference_correlations, validate_ensemble

nlos28 = load_scenario("umi-28ghz-nlos")
config = GeneratorConfig(nlos28, rng_seed=1)
ensemble = generate_ensemble(config, 2000)

report = validate_ensemble(ensemble, nlos28, seed=1, config_hash=config.config_hash())
print(report.to_text())

# Comparing against the 73 GHz scenario on purpose: frequency checks off.
cross = validate_ensemble(ensemble, load_scenario("umi-73ghz-nlos"), check_frequency=False)
print("\nagainst 73 GHz NLOS, failing rows:", cross.failed_rows())

# LSP cross-correlations: the machinery runs on per-location records, and
# the measured coefficients ship separately as reference data only.
rng = np.random.default_rng(2)
z = rng.multivariate_normal([0, 0], [[1, -0.5], [-0.5, 1]], size=300)
records = [LspRecord(f"L{i}", rms_ds_ns=10 ** (1.5 + 0.2 * a), sf_db=4 * b, asd_deg=10.0 + i % 7,
                     asa_deg=20.0 - i % 5, zsa_deg=5.0 + i % 3) for i, (a, b) in enumerate(z)]
m = lsp_correlation_matrix(records)
print(f"\nplanted DS-SF -0.5, estimated {m['DS', 'SF']:.3f}")
ref = reference_correlations()
print("measured DS-SF by column:", dict(zip(ref["columns"], ref["coefficients"]["DS-SF"])),
      "| reproducible:", ref["reproducible"])
