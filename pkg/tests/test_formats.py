import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from mmwchannel.formats import (
    MANIFEST_NAME,
    PasFile,
    PdpFile,
    ParseError,
    UnitMismatch,
    dumps_cir,
    loads_cir,
    read_ensemble,
    read_manifest,
    write_ensemble,
)
from mmwchannel.generate import GeneratorConfig, generate_cir, generate_ensemble
from mmwchannel.scenarios import load_scenario

NLOS28 = load_scenario("umi-28ghz-nlos")
finite = st.floats(-150, 50, allow_nan=False)


@st.composite
def pdp_files(draw):
    n = draw(st.integers(0, 30))
    idx = np.sort(np.array(list(draw(st.sets(st.integers(0, 4000), min_size=n, max_size=n))), dtype=int))
    pw = np.array(draw(st.lists(finite, min_size=n, max_size=n)))
    sep = draw(st.one_of(st.none(), st.floats(1, 1000)))
    return PdpFile(draw(st.floats(0.1, 10)), draw(finite), draw(st.sampled_from(["a", "RX-17"])),
                   draw(st.sampled_from([28.0, 73.0])), draw(st.sampled_from(["VV", "VH"])), idx, pw, sep)


@given(pdp_files())
def test_pdp_round_trip(f):
    g = PdpFile.loads(f.dumps())
    assert g == f
    assert np.array_equal(g.power_dbm, f.power_dbm) and np.array_equal(g.bin_index, f.bin_index)


@given(
    step=st.sampled_from([1.0, 10.0, 7.5, 90.0, 360.0]),
    levels=st.lists(st.sampled_from([-20.0, -10.0, 0.0, 10.0, 20.0]), min_size=1, max_size=5, unique=True),
    conv=st.sampled_from(["horizon", "zenith"]),
    data=st.data(),
)
def test_pas_round_trip(step, levels, conv, data):
    if conv == "zenith":
        levels = [90.0 - e for e in levels]
    shape = (int(360 / step), len(levels))
    p = data.draw(hnp.arrays(float, shape, elements=st.one_of(finite, st.just(-np.inf))))
    f = PasFile(step, levels, "loc", "AOA", p, conv)
    g = PasFile.loads(f.dumps())
    assert g == f and np.array_equal(g.power_dbm, f.power_dbm)


def test_pas_zenith_converted():
    f = PasFile(90.0, [80.0, 100.0], "l", "AOD", np.zeros((4, 2)), "zenith")
    pas = f.to_pas()
    assert list(pas.elevation_grid) == [-10.0, 10.0]


@given(seed=st.integers(0, 2**32 - 1), index=st.integers(0, 1000))
def test_cir_round_trip(seed, index):
    cir = generate_cir(GeneratorConfig(NLOS28, rng_seed=seed), index)
    assert_same_cir(loads_cir(dumps_cir(cir, index)), cir)


def assert_same_cir(a, b):
    # power is stored in dBm, so the linear value comes back to within rounding
    np.testing.assert_allclose(a.power, b.power, rtol=1e-13)
    for name in ("delay", "aod_azimuth", "aod_elevation", "aoa_azimuth", "aoa_elevation", "xpr",
                 "cluster_id", "lobe_id_aod", "lobe_id_aoa"):
        assert np.array_equal(getattr(a, name), getattr(b, name)), name
    assert (a.scenario_tag, a.frequency_ghz) == (b.scenario_tag, b.frequency_ghz)


def _pdp_text():
    return PdpFile(1.0, -110.0, "a", 28.0, "VV", [0, 3], [-60.0, -70.0]).dumps()


class TestErrors:
    def test_bad_magic(self):
        with pytest.raises(ParseError) as e:
            PdpFile.loads("hello\n", "x.csv")
        assert e.value.line == 1 and "x.csv:line 1" in str(e.value)

    def test_bad_number_line(self):
        text = _pdp_text().replace("-70.0", "abc")
        lines = text.splitlines()
        with pytest.raises(ParseError) as e:
            PdpFile.loads(text)
        assert e.value.line == next(i for i, l in enumerate(lines, 1) if "abc" in l)

    def test_unit_mismatch(self):
        text = _pdp_text().replace("bin_width_ns=1.0", "bin_width_us=0.001")
        with pytest.raises(UnitMismatch, match="bin_width_ns") as e:
            PdpFile.loads(text)
        assert e.value.line == 2

    def test_unknown_field(self):
        text = _pdp_text().replace("# polarization=VV", "# polarization=VV\n# colour=red")
        with pytest.raises(ParseError, match="unknown header"):
            PdpFile.loads(text)

    def test_non_increasing_bins(self):
        text = _pdp_text() + "2,-80.0\n"
        with pytest.raises(ParseError, match="increasing"):
            PdpFile.loads(text)

    def test_bad_polarization(self):
        with pytest.raises(ParseError, match="polarization"):
            PdpFile.loads(_pdp_text().replace("polarization=VV", "polarization=HH"))

    def test_ragged_row(self):
        with pytest.raises(ParseError, match="fields") as e:
            PdpFile.loads(_pdp_text() + "9,1,2\n")
        assert e.value.line == len(_pdp_text().splitlines()) + 1

    def _pas_text(self):
        return PasFile(90.0, [0.0], "l", "AOA", np.zeros((4, 1))).dumps()

    def test_pas_duplicate_cell(self):
        with pytest.raises(ParseError, match="duplicate"):
            PasFile.loads(self._pas_text() + "0.0,0.0,1.0\n")

    def test_pas_incomplete(self):
        text = "\n".join(self._pas_text().splitlines()[:-1]) + "\n"
        with pytest.raises(ParseError, match="incomplete"):
            PasFile.loads(text)

    def test_pas_off_grid(self):
        text = self._pas_text().replace("270.0,0.0", "271.0,0.0")
        with pytest.raises(ParseError, match="grid"):
            PasFile.loads(text)

    def test_pas_step_must_divide(self):
        with pytest.raises(ParseError, match="divide"):
            PasFile.loads(self._pas_text().replace("azimuth_step_deg=90.0", "azimuth_step_deg=7.0"))


class TestEnsembleFiles:
    def test_round_trip(self, tmp_path):
        cfg = GeneratorConfig(NLOS28, rng_seed=3)
        cirs = generate_ensemble(cfg, 5)
        write_ensemble(tmp_path, cirs, scenario=NLOS28.name, config=cfg.to_dict(),
                       config_hash=cfg.config_hash(), seed=3)
        manifest, back = read_ensemble(tmp_path)
        for a, b in zip(back, cirs):
            assert_same_cir(a, b)
        assert len(back) == 5 and manifest["count"] == 5 and manifest["seed"] == 3
        assert (tmp_path / "delay_power.csv").read_text().startswith("cir,delay_ns,power_dbm,cluster_id")
        rows = (tmp_path / "angle_power.csv").read_text().splitlines()
        assert len(rows) == 1 + 2 * sum(len(c) for c in cirs)

    def test_hash_mismatch(self, tmp_path):
        cirs = generate_ensemble(GeneratorConfig(NLOS28), 2)
        write_ensemble(tmp_path, cirs, scenario="s", config={}, config_hash="h", seed=0)
        f = tmp_path / "cir_000001.csv"
        f.write_text(f.read_text().replace("0", "1", 1))
        with pytest.raises(ParseError, match="hash mismatch"):
            read_ensemble(tmp_path)

    def test_empty_directory(self, tmp_path):
        with pytest.raises(ParseError, match="manifest"):
            read_manifest(tmp_path)

    def test_empty_manifest(self, tmp_path):
        (tmp_path / MANIFEST_NAME).write_text(json.dumps({"format": "mmwchannel-ensemble/1", "files": []}))
        with pytest.raises(ParseError, match="no CIR files"):
            read_manifest(tmp_path)
