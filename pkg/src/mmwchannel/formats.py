"""Delimited-text file formats: PDPs, angular spectra, CIRs and ensemble manifests.

Every data file opens with a versioned magic line, then ``# key=value``
header lines, a column-name line and comma-separated rows. Powers are
stored in dBm and converted to linear mW only when building the in-memory
measurement objects.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import __version__
from .core import (
    ChannelImpulseResponse,
    ElevationConvention,
    InvalidInput,
    PowerAngularSpectrum,
    PowerDelayProfile,
    db_to_linear,
    linear_to_db,
    to_elevation,
)

PathLike = Union[str, Path]


class ParseError(InvalidInput):
    """Malformed file content; ``line`` is 1-based."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = ""):
        self.line = line
        self.source = source
        where = f"{source}:" if source else ""
        where += f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class UnitMismatch(ParseError):
    """A header field carries a unit other than the one the format defines."""


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return repr(float(x))


def _float(text: str, line: int, source: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", line, source) from None


@dataclass
class _Table:
    header: dict
    columns: list[str]
    rows: list[tuple[int, list[str]]]  # (line number, cells)


_UNITS = ("_ns", "_us", "_ms", "_s", "_dbm", "_db", "_mw", "_w", "_deg", "_rad", "_ghz", "_mhz", "_hz", "_m", "_km")


def _base(key: str) -> tuple[str, str]:
    for u in sorted(_UNITS, key=len, reverse=True):
        if key.endswith(u):
            return key[: -len(u)], u
    return key, ""


def _read_table(text: str, magic: str, source: str, required: Sequence[str], optional: Sequence[str] = ()) -> _Table:
    lines = text.splitlines()
    if not lines or lines[0].strip() != magic:
        found = lines[0].strip() if lines else ""
        raise ParseError(f"expected header line {magic!r}, found {found!r}", 1, source)
    known = set(required) | set(optional)
    by_base = {_base(k)[0]: k for k in known}
    header: dict = {}
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        if body:
            key, sep, value = body.partition("=")
            key = key.strip()
            if not sep:
                raise ParseError(f"header line needs key=value: {body!r}", i + 1, source)
            if key not in known:
                base = _base(key)[0]
                if base in by_base and _base(key)[1]:
                    raise UnitMismatch(f"field {key!r} has the wrong unit, expected {by_base[base]!r}", i + 1, source)
                raise ParseError(f"unknown header field {key!r}", i + 1, source)
            if key in header:
                raise ParseError(f"duplicate header field {key!r}", i + 1, source)
            header[key] = (value.strip(), i + 1)
        i += 1
    for key in required:
        if key not in header:
            raise ParseError(f"missing header field {key!r}", None, source)
    if i >= len(lines):
        raise ParseError("missing column line", i + 1, source)
    columns = [c.strip() for c in lines[i].split(",")]
    col_line = i + 1
    rows = []
    for n, line in enumerate(lines[i + 1 :], start=i + 2):
        if not line.strip():
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(columns):
            raise ParseError(f"expected {len(columns)} fields, found {len(cells)}", n, source)
        rows.append((n, cells))
    table = _Table(header, columns, rows)
    table.header["__columns_line__"] = ("", col_line)
    return table


def _header_value(t: _Table, key: str, source: str, kind=float, default=None):
    if key not in t.header:
        return default
    text, line = t.header[key]
    if kind is float:
        return _float(text, line, source)
    return text


def _write_table(magic: str, header: Sequence[tuple[str, str]], columns: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    out = [magic]
    out += [f"# {k}={v}" for k, v in header]
    out.append(",".join(columns))
    out += [",".join(r) for r in rows]
    return "\n".join(out) + "\n"


def _check_columns(t: _Table, expected: Sequence[str], source: str):
    if t.columns != list(expected):
        raise ParseError(f"expected columns {','.join(expected)}", t.header["__columns_line__"][1], source)


# ---------------------------------------------------------------- PDP


PDP_MAGIC = "# mmwchannel-pdp v1"
_PDP_COLUMNS = ("bin_index", "power_dbm")


@dataclass
class PdpFile:
    """One power delay profile. Bins absent from the file hold no power."""

    bin_width_ns: float
    noise_floor_dbm: float
    location_id: str
    frequency_ghz: float
    polarization: str
    bin_index: np.ndarray
    power_dbm: np.ndarray
    tr_separation_m: Optional[float] = None

    def __post_init__(self):
        self.bin_index = np.asarray(self.bin_index, dtype=np.int64)
        self.power_dbm = np.asarray(self.power_dbm, dtype=float)
        if self.polarization not in ("VV", "VH"):
            raise InvalidInput(f"polarization must be VV or VH, not {self.polarization!r}")
        if self.bin_index.shape != self.power_dbm.shape or self.bin_index.ndim != 1:
            raise InvalidInput("bin_index and power_dbm must be equal-length 1-D arrays")
        if self.bin_index.size and (self.bin_index[0] < 0 or np.any(np.diff(self.bin_index) <= 0)):
            raise InvalidInput("bin indices must be non-negative and strictly increasing")
        if not self.bin_width_ns > 0:
            raise InvalidInput("bin_width_ns must be positive")

    def to_pdp(self) -> PowerDelayProfile:
        n = int(self.bin_index[-1]) + 1 if self.bin_index.size else 1
        powers = np.zeros(n)
        powers[self.bin_index] = db_to_linear(self.power_dbm)
        return PowerDelayProfile(powers, self.bin_width_ns, float(db_to_linear(self.noise_floor_dbm)))

    @classmethod
    def from_pdp(cls, pdp: PowerDelayProfile, location_id: str, frequency_ghz: float, polarization: str = "VV",
                 tr_separation_m: Optional[float] = None) -> "PdpFile":
        idx = np.flatnonzero(pdp.powers > 0)
        floor = linear_to_db(pdp.noise_floor) if pdp.noise_floor > 0 else -np.inf
        return cls(pdp.bin_width, float(floor), location_id, frequency_ghz, polarization, idx,
                   linear_to_db(pdp.powers[idx]), tr_separation_m)

    def dumps(self) -> str:
        header = [
            ("bin_width_ns", _fmt(self.bin_width_ns)),
            ("noise_floor_dbm", _fmt(self.noise_floor_dbm)),
            ("location_id", self.location_id),
            ("frequency_ghz", _fmt(self.frequency_ghz)),
            ("polarization", self.polarization),
        ]
        if self.tr_separation_m is not None:
            header.append(("tr_separation_m", _fmt(self.tr_separation_m)))
        rows = ((str(int(i)), _fmt(p)) for i, p in zip(self.bin_index, self.power_dbm))
        return _write_table(PDP_MAGIC, header, _PDP_COLUMNS, rows)

    @classmethod
    def loads(cls, text: str, source: str = "") -> "PdpFile":
        t = _read_table(text, PDP_MAGIC, source,
                        ("bin_width_ns", "noise_floor_dbm", "location_id", "frequency_ghz", "polarization"),
                        ("tr_separation_m",))
        _check_columns(t, _PDP_COLUMNS, source)
        idx, pw, prev = [], [], -1
        for line, (b, p) in t.rows:
            try:
                k = int(b)
            except ValueError:
                raise ParseError(f"bin index must be an integer, found {b!r}", line, source) from None
            if k <= prev:
                raise ParseError("bin indices must be strictly increasing", line, source)
            prev = k
            idx.append(k)
            pw.append(_float(p, line, source))
        pol = _header_value(t, "polarization", source, str)
        if pol not in ("VV", "VH"):
            raise ParseError(f"polarization must be VV or VH, found {pol!r}", t.header["polarization"][1], source)
        try:
            return cls(
                bin_width_ns=_header_value(t, "bin_width_ns", source),
                noise_floor_dbm=_header_value(t, "noise_floor_dbm", source),
                location_id=_header_value(t, "location_id", source, str),
                frequency_ghz=_header_value(t, "frequency_ghz", source),
                polarization=pol,
                bin_index=np.array(idx, dtype=np.int64),
                power_dbm=np.array(pw),
                tr_separation_m=_header_value(t, "tr_separation_m", source),
            )
        except ParseError:
            raise
        except InvalidInput as exc:
            raise ParseError(str(exc), None, source) from None

    def __eq__(self, other):
        if not isinstance(other, PdpFile):
            return NotImplemented
        return self.dumps() == other.dumps()


# ---------------------------------------------------------------- PAS


PAS_MAGIC = "# mmwchannel-pas v1"
_PAS_COLUMNS = ("azimuth_deg", "elevation_deg", "power_dbm")


@dataclass
class PasFile:
    """Power angular spectrum on a complete azimuth x elevation grid.

    The azimuth grid is ``k * azimuth_step_deg`` for ``k`` covering the
    full circle. Cells without detectable power are written as ``-inf``.
    """

    azimuth_step_deg: float
    elevation_levels: np.ndarray
    location_id: str
    domain: str
    power_dbm: np.ndarray  # (n_az, n_el)
    elevation_convention: str = ElevationConvention.HORIZON.value

    def __post_init__(self):
        self.elevation_levels = np.asarray(self.elevation_levels, dtype=float)
        self.power_dbm = np.asarray(self.power_dbm, dtype=float)
        if self.domain not in ("AOA", "AOD"):
            raise InvalidInput(f"domain must be AOA or AOD, not {self.domain!r}")
        ElevationConvention(self.elevation_convention)
        n_az = 360.0 / self.azimuth_step_deg if self.azimuth_step_deg > 0 else 0.0
        if not (self.azimuth_step_deg > 0 and abs(n_az - round(n_az)) < 1e-9):
            raise InvalidInput("azimuth_step_deg must divide 360")
        if self.power_dbm.shape != (int(round(n_az)), self.elevation_levels.size):
            raise InvalidInput("power grid does not match the azimuth step and elevation levels")

    @property
    def azimuth_grid(self) -> np.ndarray:
        return np.arange(self.power_dbm.shape[0]) * self.azimuth_step_deg

    def to_pas(self) -> PowerAngularSpectrum:
        """In-memory spectrum, elevations converted to the horizon convention."""
        el = np.asarray(to_elevation(self.elevation_levels, ElevationConvention(self.elevation_convention)))
        order = np.argsort(el)
        p = db_to_linear(self.power_dbm)[:, order]
        return PowerAngularSpectrum(self.azimuth_grid, el[order], p)

    def dumps(self) -> str:
        header = [
            ("azimuth_step_deg", _fmt(self.azimuth_step_deg)),
            ("elevation_levels", ";".join(_fmt(e) for e in self.elevation_levels)),
            ("location_id", self.location_id),
            ("domain", self.domain),
            ("elevation_convention", self.elevation_convention),
        ]
        rows = (
            (_fmt(a), _fmt(e), _fmt(self.power_dbm[i, j]))
            for i, a in enumerate(self.azimuth_grid)
            for j, e in enumerate(self.elevation_levels)
        )
        return _write_table(PAS_MAGIC, header, _PAS_COLUMNS, rows)

    @classmethod
    def loads(cls, text: str, source: str = "") -> "PasFile":
        t = _read_table(text, PAS_MAGIC, source,
                        ("azimuth_step_deg", "elevation_levels", "location_id", "domain"),
                        ("elevation_convention",))
        _check_columns(t, _PAS_COLUMNS, source)
        step = _header_value(t, "azimuth_step_deg", source)
        lv_text, lv_line = t.header["elevation_levels"]
        levels = np.array([_float(v, lv_line, source) for v in lv_text.split(";")])
        n_az = 360.0 / step if step > 0 else 0.0
        if not (step > 0 and abs(n_az - round(n_az)) < 1e-9):
            raise ParseError("azimuth_step_deg must divide 360", t.header["azimuth_step_deg"][1], source)
        n_az = int(round(n_az))
        grid = np.full((n_az, levels.size), np.nan)
        for line, (a, e, p) in t.rows:
            az, el, pw = _float(a, line, source), _float(e, line, source), _float(p, line, source)
            i = az / step
            if abs(i - round(i)) > 1e-6 or not 0 <= round(i) < n_az:
                raise ParseError(f"azimuth {az} is not on the {step} deg grid", line, source)
            hit = np.flatnonzero(np.isclose(levels, el, atol=1e-9))
            if hit.size == 0:
                raise ParseError(f"elevation {el} is not a declared level", line, source)
            i, j = int(round(i)), int(hit[0])
            if not np.isnan(grid[i, j]):
                raise ParseError(f"duplicate cell ({az}, {el})", line, source)
            grid[i, j] = pw
        missing = np.argwhere(np.isnan(grid))
        if missing.size:
            i, j = missing[0]
            raise ParseError(
                f"incomplete grid: {len(missing)} cells missing, first at ({i * step}, {levels[j]})", None, source
            )
        conv = _header_value(t, "elevation_convention", source, str, ElevationConvention.HORIZON.value)
        try:
            return cls(step, levels, _header_value(t, "location_id", source, str),
                       _header_value(t, "domain", source, str), grid, conv)
        except (InvalidInput, ValueError) as exc:
            raise ParseError(str(exc), None, source) from None

    def __eq__(self, other):
        if not isinstance(other, PasFile):
            return NotImplemented
        return self.dumps() == other.dumps()


# ---------------------------------------------------------------- CIR / paths


CIR_MAGIC = "# mmwchannel-cir v1"
_CIR_COLUMNS = (
    "delay_ns",
    "power_dbm",
    "aod_azimuth_deg",
    "aod_elevation_deg",
    "aoa_azimuth_deg",
    "aoa_elevation_deg",
    "xpr_db",
)
_LABEL_COLUMNS = ("cluster_id", "lobe_aod", "lobe_aoa")


def dumps_cir(cir: ChannelImpulseResponse, index: Optional[int] = None) -> str:
    header = [("scenario", cir.scenario_tag)]
    if cir.frequency_ghz is not None:
        header.append(("frequency_ghz", _fmt(cir.frequency_ghz)))
    if index is not None:
        header.append(("index", str(index)))
    pdbm = linear_to_db(cir.power)
    rows = (
        (
            _fmt(cir.delay[i]),
            _fmt(pdbm[i]),
            _fmt(cir.aod_azimuth[i]),
            _fmt(cir.aod_elevation[i]),
            _fmt(cir.aoa_azimuth[i]),
            _fmt(cir.aoa_elevation[i]),
            _fmt(cir.xpr[i]),
            str(int(cir.cluster_id[i])),
            str(int(cir.lobe_id_aod[i])),
            str(int(cir.lobe_id_aoa[i])),
        )
        for i in range(len(cir))
    )
    return _write_table(CIR_MAGIC, header, _CIR_COLUMNS + _LABEL_COLUMNS, rows)


def loads_cir(text: str, source: str = "") -> ChannelImpulseResponse:
    """Parse a CIR or bare path list. Label columns are optional and default to 0."""
    t = _read_table(text, CIR_MAGIC, source, (), ("scenario", "frequency_ghz", "index"))
    n_base = len(_CIR_COLUMNS)
    if tuple(t.columns[:n_base]) != _CIR_COLUMNS or t.columns[n_base:] not in ([], list(_LABEL_COLUMNS)):
        raise ParseError(
            f"expected columns {','.join(_CIR_COLUMNS)}[,{','.join(_LABEL_COLUMNS)}]",
            t.header["__columns_line__"][1],
            source,
        )
    vals = np.array([[_float(c, line, source) for c in cells[:n_base]] for line, cells in t.rows]).reshape(-1, n_base)
    labels = np.zeros((len(t.rows), 3), dtype=np.int64)
    if len(t.columns) > n_base:
        for r, (line, cells) in enumerate(t.rows):
            try:
                labels[r] = [int(c) for c in cells[n_base:]]
            except ValueError:
                raise ParseError("labels must be integers", line, source) from None
    delays = vals[:, 0]
    if delays.size and np.any(np.diff(delays) < 0):
        bad = int(np.flatnonzero(np.diff(delays) < 0)[0]) + 1
        raise ParseError("paths must be sorted by delay", t.rows[bad][0], source)
    try:
        return ChannelImpulseResponse(
            delay=delays,
            power=db_to_linear(vals[:, 1]),
            aod_azimuth=vals[:, 2],
            aod_elevation=vals[:, 3],
            aoa_azimuth=vals[:, 4],
            aoa_elevation=vals[:, 5],
            xpr=vals[:, 6],
            cluster_id=labels[:, 0],
            lobe_id_aod=labels[:, 1],
            lobe_id_aoa=labels[:, 2],
            scenario_tag=_header_value(t, "scenario", source, str, ""),
            frequency_ghz=_header_value(t, "frequency_ghz", source),
        )
    except ParseError:
        raise
    except InvalidInput as exc:
        raise ParseError(str(exc), None, source) from None


# ---------------------------------------------------------------- ensembles


MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "mmwchannel-ensemble/1"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def cir_filename(index: int) -> str:
    return f"cir_{index:06d}.csv"


def plot_tables(cirs: Sequence[ChannelImpulseResponse]) -> tuple[str, str]:
    """Long-format delay-power and angle-power tables for plotting tools."""
    dp, ap = io.StringIO(), io.StringIO()
    wd, wa = csv.writer(dp, lineterminator="\n"), csv.writer(ap, lineterminator="\n")
    wd.writerow(["cir", "delay_ns", "power_dbm", "cluster_id"])
    wa.writerow(["cir", "domain", "azimuth_deg", "elevation_deg", "power_dbm", "lobe_id"])
    for k, c in enumerate(cirs):
        pdbm = linear_to_db(c.power)
        for i in range(len(c)):
            wd.writerow([k, _fmt(c.delay[i]), _fmt(pdbm[i]), int(c.cluster_id[i])])
            wa.writerow([k, "AOD", _fmt(c.aod_azimuth[i]), _fmt(c.aod_elevation[i]), _fmt(pdbm[i]), int(c.lobe_id_aod[i])])
            wa.writerow([k, "AOA", _fmt(c.aoa_azimuth[i]), _fmt(c.aoa_elevation[i]), _fmt(pdbm[i]), int(c.lobe_id_aoa[i])])
    return dp.getvalue(), ap.getvalue()


def write_ensemble(directory: PathLike, cirs: Sequence[ChannelImpulseResponse], *, scenario: str, config: dict,
                   config_hash: str, seed: int) -> dict:
    """Write one file per CIR, the plot tables and a manifest; return the manifest."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, c in enumerate(cirs):
        text = dumps_cir(c, index=i)
        name = cir_filename(i)
        (out / name).write_text(text)
        files.append({"name": name, "sha256": sha256_text(text)})
    delay_power, angle_power = plot_tables(cirs)
    (out / "delay_power.csv").write_text(delay_power)
    (out / "angle_power.csv").write_text(angle_power)
    manifest = {
        "format": MANIFEST_FORMAT,
        "toolkit_version": __version__,
        "scenario": scenario,
        "config": config,
        "config_hash": config_hash,
        "seed": seed,
        "count": len(cirs),
        "files": files,
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def read_manifest(directory: PathLike) -> dict:
    path = Path(directory) / MANIFEST_NAME
    if not path.is_file():
        raise ParseError(f"no {MANIFEST_NAME} in {directory}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, str(path)) from None
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ParseError(f"unsupported manifest format {manifest.get('format')!r}", None, str(path))
    if not manifest.get("files"):
        raise ParseError("manifest lists no CIR files", None, str(path))
    return manifest


def read_ensemble(directory: PathLike) -> tuple[dict, list[ChannelImpulseResponse]]:
    """Load a manifest and its CIRs, checking every file's hash."""
    manifest = read_manifest(directory)
    cirs = []
    for entry in manifest["files"]:
        path = Path(directory) / entry["name"]
        if not path.is_file():
            raise ParseError(f"missing ensemble file {entry['name']}")
        text = path.read_text()
        if sha256_text(text) != entry["sha256"]:
            raise ParseError(f"hash mismatch for {entry['name']}", None, str(path))
        cirs.append(loads_cir(text, str(path)))
    return manifest, cirs
