from dataclasses import replace

import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from mmwchannel.core import InvalidInput, LosCondition
from mmwchannel.scenarios import (
    ENV_SCENARIO_PATH,
    dump_scenarios,
    load_scenario,
    load_scenarios,
    parse_scenarios,
)

SHIPPED = load_scenarios()


def test_shipped_sections():
    assert set(SHIPPED) == {
        "umi-28ghz-los", "umi-73ghz-los", "umi-2873ghz-los",
        "umi-28ghz-los-to-nlos", "umi-28ghz-nlos", "umi-73ghz-nlos",
    }


def test_spot_values():
    nlos = SHIPPED["umi-28ghz-nlos"]
    assert nlos.los_condition is LosCondition.NLOS
    assert (nlos.num_clusters_mu, nlos.num_subpaths_mu) == (2.1, 9.1)
    assert nlos.cluster_decay_gamma_ns == 49.4
    assert nlos.rms_lobe_esd_mu_deg is None
    assert (nlos.xpr_mu_db, nlos.xpr_sigma_db) == (16.7, 8.8)
    n73 = SHIPPED["umi-73ghz-nlos"]
    assert (n73.num_clusters_mu, n73.num_aoa_lobes_mu, n73.rms_lobe_asa_mu_deg) == (2.7, 2.5, 3.7)


def test_round_trip_shipped():
    assert parse_scenarios(dump_scenarios(SHIPPED)) == SHIPPED


@given(
    mu=st.floats(1.0, 20.0), sigma=st.floats(0.0, 10.0), gamma=st.floats(1.0, 200.0),
    esd=st.one_of(st.none(), st.tuples(st.floats(0.0, 20.0), st.floats(0.0, 10.0))),
)
def test_round_trip_generated(mu, sigma, gamma, esd):
    sc = replace(
        SHIPPED["umi-28ghz-nlos"], name="x", num_clusters_mu=mu, num_clusters_sigma=sigma,
        cluster_decay_gamma_ns=gamma,
        rms_lobe_esd_mu_deg=None if esd is None else esd[0],
        rms_lobe_esd_sigma_deg=None if esd is None else esd[1],
    )
    assert parse_scenarios(dump_scenarios({"x": sc}))["x"] == sc


def test_unknown_section_lists_available():
    with pytest.raises(KeyError) as e:
        load_scenario("umi-60ghz")
    for name in SHIPPED:
        assert name in str(e.value)


def test_file_section_and_env(tmp_path, monkeypatch):
    sc = replace(SHIPPED["umi-28ghz-nlos"], name="mine", num_clusters_mu=4.0)
    f = tmp_path / "s.yaml"
    f.write_text(dump_scenarios({"mine": sc}))
    assert load_scenario(f"{f}:mine").num_clusters_mu == 4.0
    monkeypatch.setenv(ENV_SCENARIO_PATH, str(f))
    assert load_scenario("mine") == sc


@pytest.mark.parametrize(
    "text, msg",
    [
        ("version: 2\nscenarios: {}\n", "version"),
        ("- a\n", "scenarios"),
        ("version: 1\nscenarios:\n  a: {frequency_ghz: 28, bogus: 1}\n", "unknown keys"),
    ],
)
def test_bad_files(text, msg):
    with pytest.raises(InvalidInput, match=msg):
        parse_scenarios(text)


def _mutated(key, value):
    doc = yaml.safe_load(dump_scenarios({"a": SHIPPED["umi-28ghz-nlos"]}))
    doc["scenarios"]["a"][key] = value
    return yaml.safe_dump(doc)


def test_required_fields_not_null():
    with pytest.raises(InvalidInput, match="cannot be null"):
        parse_scenarios(_mutated("num_clusters", None))


def test_bad_pair_shape():
    with pytest.raises(InvalidInput, match=r"\[mu, sigma\]"):
        parse_scenarios(_mutated("xpr_db", 16.7))


def test_missing_required():
    doc = yaml.safe_load(dump_scenarios({"a": SHIPPED["umi-28ghz-nlos"]}))
    del doc["scenarios"]["a"]["cluster_decay_gamma_ns"]
    with pytest.raises(InvalidInput, match="missing"):
        parse_scenarios(yaml.safe_dump(doc))
