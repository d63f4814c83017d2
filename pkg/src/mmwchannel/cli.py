"""Command-line front end: ``mmwchannel {extract,cluster,generate,validate}``.

Exit codes: 0 success or validation pass, 1 validation fail, 2 usage
error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .core import (
    ChannelModelError,
    EmptyResult,
    InvalidInput,
    LspRecord,
    PowerDelayProfile,
    ScenarioParameters,
    SingularKFactor,
)
from .formats import PasFile, ParseError, PdpFile, loads_cir, read_ensemble, write_ensemble
from .generate import COUNT_MODELS, GeneratorConfig, generate_ensemble
from .kpm import McdParams, cluster_statistics, combine_validate, select_optimal_k, shape_pruning
from .lsp import count_directional_multipaths, k_factor, pas_spreads, rms_delay_spread, xpr_per_bin
from .scenarios import ENV_SCENARIO_PATH, load_scenario
from .tcsl import partition_path_delays
from .validate import Tolerances, lsp_correlation_matrix, validate_ensemble

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3

log = logging.getLogger("mmwchannel")


class UsageError(Exception):
    pass


def _provenance(config_hash: str, seed) -> dict:
    return {"toolkit_version": __version__, "config_hash": config_hash, "seed": seed}


def _hash_args(args: argparse.Namespace, skip=("func", "out", "report")) -> str:
    items = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip}
    blob = json.dumps(items, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _json_safe(obj):
    """Replace NaN/inf floats with None so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _banner(prov: dict) -> str:
    return f"# mmwchannel {prov['toolkit_version']} config={prov['config_hash']} seed={prov['seed']}"


def parse_k_range(text: str) -> range:
    try:
        a, b = (int(v) for v in text.split(".."))
    except ValueError:
        raise UsageError(f"--k-range must look like a..b, got {text!r}") from None
    if a > b:
        raise UsageError(f"empty --k-range {text!r}")
    if a <= 1:
        raise UsageError(
            "--k-range must start at 2: K=1 is excluded because the Calinski-Harabasz index "
            "has an undefined numerator at K=1"
        )
    return range(a, b + 1)


def _scenario(spec: str) -> ScenarioParameters:
    try:
        return load_scenario(spec)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    except FileNotFoundError as exc:
        raise ParseError(f"scenario file not found: {exc.filename}") from None


# ---------------------------------------------------------------- extract


def read_sf_table(path) -> dict[str, float]:
    """Shadow-fading values per location from a ``location_id,sf_db`` CSV."""
    rows = list(csv.reader(Path(path).read_text().splitlines()))
    if not rows or [c.strip() for c in rows[0]] != ["location_id", "sf_db"]:
        raise ParseError("expected header location_id,sf_db", 1, str(path))
    out = {}
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, found {len(row)}", n, str(path))
        try:
            out[row[0].strip()] = float(row[1])
        except ValueError:
            raise ParseError(f"not a number: {row[1]!r}", n, str(path)) from None
    return out


# spreads are summarised in log10 as well (delay spread in seconds)
_LOG_COLUMNS = ("rms_ds_ns", "asd_deg", "asa_deg", "zsa_deg")


def _group_stats(records: list[dict]) -> dict:
    """Median, mean and log10-domain mean/std of each LSP over a group of locations."""
    out = {"num_locations": len(records)}
    for col in ("rms_ds_ns", "asd_deg", "asa_deg", "zsa_deg", "sf_db", "k_factor_db", "xpr_mean_db"):
        v = np.array([r[col] for r in records], dtype=float)
        v = v[np.isfinite(v)]
        if not v.size:
            continue
        entry = {"n": int(v.size), "median": float(np.median(v)), "mean": float(np.mean(v)),
                 "std": float(np.std(v))}
        if col in _LOG_COLUMNS and np.all(v > 0):
            lv = np.log10(v * (1e-9 if col == "rms_ds_ns" else 1.0))
            entry["log10_mean"], entry["log10_std"] = float(np.mean(lv)), float(np.std(lv))
        out[col] = entry
    return out


def cmd_extract(args) -> int:
    if not args.pdp and not args.pas:
        raise UsageError("give at least one --pdp or --pas file")
    pdps = defaultdict(dict)
    pas = defaultdict(dict)
    for f in args.pdp or []:
        pf = PdpFile.loads(Path(f).read_text(), str(f))
        if pf.polarization in pdps[pf.location_id]:
            raise ParseError(f"second {pf.polarization} PDP for location {pf.location_id}", None, str(f))
        pdps[pf.location_id][pf.polarization] = pf
    for f in args.pas or []:
        pa = PasFile.loads(Path(f).read_text(), str(f))
        if pa.domain in pas[pa.location_id]:
            raise ParseError(f"second {pa.domain} PAS for location {pa.location_id}", None, str(f))
        pas[pa.location_id][pa.domain] = pa

    sf = read_sf_table(args.sf) if args.sf else {}
    records, xpr_samples = [], {}
    for loc in sorted(set(pdps) | set(pas)):
        r = {"location_id": loc, "frequency_ghz": math.nan, "tr_separation_m": math.nan, "rms_ds_ns": math.nan, "k_factor_db": math.nan,
             "asd_deg": math.nan, "asa_deg": math.nan, "zsa_deg": math.nan, "sf_db": math.nan,
             "num_multipaths": None, "xpr_mean_db": math.nan}
        vv = pdps[loc].get("VV")
        if vv is not None:
            pdp = vv.to_pdp()
            r["frequency_ghz"] = vv.frequency_ghz
            r["tr_separation_m"] = vv.tr_separation_m if vv.tr_separation_m is not None else math.nan
            r["rms_ds_ns"] = rms_delay_spread(pdp, args.threshold_db)
            try:
                r["k_factor_db"] = k_factor(pdp)
            except SingularKFactor:
                pass
            r["num_multipaths"] = count_directional_multipaths(pdp, args.snr_db)
            vh = pdps[loc].get("VH")
            if vh is not None:
                if not math.isclose(vh.bin_width_ns, vv.bin_width_ns):
                    raise ParseError(f"VV and VH bin widths differ at location {loc}")
                a, b = pdp.powers, vh.to_pdp().powers
                n = max(a.size, b.size)
                pv = PowerDelayProfile(np.pad(a, (0, n - a.size)), pdp.bin_width, pdp.noise_floor)
                ph = PowerDelayProfile(np.pad(b, (0, n - b.size)), pdp.bin_width, vh.to_pdp().noise_floor)
                try:
                    x = xpr_per_bin(pv, ph, args.snr_db)
                    xpr_samples[loc] = x.tolist()
                    r["xpr_mean_db"] = float(np.mean(x))
                except EmptyResult:
                    pass
        if "AOD" in pas[loc]:
            r["asd_deg"] = pas_spreads(pas[loc]["AOD"].to_pas())[0]
        if "AOA" in pas[loc]:
            r["asa_deg"], r["zsa_deg"] = pas_spreads(pas[loc]["AOA"].to_pas())
        r["sf_db"] = sf.get(loc, math.nan)
        records.append(r)

    prov = _provenance(_hash_args(args), args.seed)
    cols = ["location_id", "frequency_ghz", "tr_separation_m", "rms_ds_ns", "k_factor_db", "asd_deg", "asa_deg", "zsa_deg",
            "sf_db", "num_multipaths", "xpr_mean_db"]
    buf = io.StringIO()
    buf.write(_banner(prov) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow(["" if r[c] is None else (f"{r[c]:.6g}" if isinstance(r[c], float) else r[c]) for c in cols])
    table = buf.getvalue()

    lsp_records = [
        LspRecord(r["location_id"], r["tr_separation_m"], r["asd_deg"], r["asa_deg"], r["zsa_deg"], r["rms_ds_ns"],
                  r["sf_db"], r["k_factor_db"])
        for r in records
    ]
    freqs = sorted({r["frequency_ghz"] for r in records if np.isfinite(r["frequency_ghz"])})
    summary = {
        **prov,
        "records": records,
        "xpr_samples_db": xpr_samples,
        "pooled": _group_stats(records),
        "by_frequency": {repr(f): _group_stats([r for r in records if r["frequency_ghz"] == f]) for f in freqs},
    }
    if len(lsp_records) >= 3:
        cm = lsp_correlation_matrix(lsp_records)
        summary["correlation"] = {
            "names": list(cm.names),
            "values": [[None if np.isnan(v) else float(v) for v in row] for row in cm.values],
        }
    summary = _json_safe(summary)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "lsp.csv").write_text(table)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(table)
    return EXIT_OK


# ---------------------------------------------------------------- cluster


def cmd_cluster(args) -> int:
    cir = loads_cir(Path(args.paths).read_text(), str(args.paths))
    if len(cir) == 0:
        raise ParseError("paths file has no rows", None, str(args.paths))
    prov = _provenance(_hash_args(args), args.seed)
    result = {**prov, "method": args.method, "num_paths": len(cir)}
    lines = [_banner(prov)]
    if args.method == "tcsl":
        clusters = partition_path_delays(cir.delay, cir.power, args.void_ns)
        labels = np.empty(len(cir), dtype=int)
        for k, c in enumerate(clusters):
            labels[c.members] = k
        result.update(
            num_clusters=len(clusters),
            labels=labels.tolist(),
            clusters=[
                {"start_ns": c.start_ns, "end_ns": c.end_ns, "num_subpaths": c.num_subpaths, "power": c.power}
                for c in clusters
            ],
        )
        lines.append(f"time clusters: {len(clusters)} (void {args.void_ns} ns)")
        for k, c in enumerate(clusters):
            lines.append(f"  {k}: {c.start_ns:.2f}-{c.end_ns:.2f} ns  subpaths={c.num_subpaths}")
    else:
        ks = parse_k_range(args.k_range)
        params = McdParams.from_paths(cir, args.zeta)
        try:
            part = select_optimal_k(cir, ks, params, restarts=args.restarts, rng_seed=args.seed, workers=args.threads)
        except InvalidInput as exc:
            raise UsageError(str(exc)) from None
        chosen = part.K
        part = shape_pruning(combine_validate(part, cir, params), cir, params)
        stats = cluster_statistics(part, cir)
        result.update(
            k_selected=chosen,
            num_clusters=part.K,
            labels=part.assignments.tolist(),
            flagged=part.flagged.tolist(),
            scores={str(k): {"objective": o, "ch": ch, "db": db} for k, (o, ch, db) in part.scores.items()},
            stats=stats.summary(),
        )
        lines.append(f"{'K':>3}{'objective':>14}{'CH':>14}{'DB':>10}")
        for k, (o, ch, db) in sorted(part.scores.items()):
            lines.append(f"{k:>3}{o:>14.6g}{ch:>14.6g}{db:>10.4g}{'  <-' if k == chosen else ''}")
        lines.append(f"selected K*={chosen}; after combine/prune: {part.K} clusters, "
                     f"{int(part.flagged.sum())} flagged paths")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(json.dumps(_json_safe(result), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- generate


def cmd_generate(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    sc = _scenario(args.scenario)
    config = GeneratorConfig(sc, rng_seed=args.seed, count_model=args.count_model,
                             min_subpath_power_db=args.min_subpath_power_db)
    cirs = generate_ensemble(config, args.count, workers=args.threads)
    manifest = write_ensemble(args.out, cirs, scenario=sc.name, config=config.to_dict(),
                              config_hash=config.config_hash(), seed=args.seed)
    prov = _provenance(manifest["config_hash"], args.seed)
    sys.stdout.write(_banner(prov) + "\n")
    sys.stdout.write(f"wrote {len(cirs)} CIRs for {sc.name} to {args.out}\n")
    return EXIT_OK


# ---------------------------------------------------------------- validate


def cmd_validate(args) -> int:
    manifest, cirs = read_ensemble(args.ensemble)
    if args.scenario:
        sc = _scenario(args.scenario)
    else:
        try:
            sc = ScenarioParameters(**manifest["config"]["scenario"])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"manifest has no usable scenario record ({exc})") from None
    tol = Tolerances(scale=args.tolerance_scale)
    report = validate_ensemble(cirs, sc, tol, seed=manifest.get("seed"), config_hash=manifest.get("config_hash", ""),
                               check_frequency=args.strict)
    if manifest.get("scenario") and manifest["scenario"] != sc.name:
        report.warnings.insert(0, f"ensemble was generated from {manifest['scenario']!r}, validated against {sc.name!r}")
    sys.stdout.write(report.to_text() + "\n")
    out = Path(args.report) if args.report else Path(args.ensemble) / "validation.json"
    out.write_text(report.to_json() + "\n")
    return EXIT_OK if report.passed else EXIT_FAIL


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    common.add_argument("--tolerance-scale", type=float, default=1.0, help="multiplier on validation tolerances")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mmwchannel", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"mmwchannel {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("extract", parents=[common], help="large-scale parameters from PDP/PAS files")
    e.add_argument("--pdp", nargs="+", default=[], metavar="FILE")
    e.add_argument("--pas", nargs="+", default=[], metavar="FILE")
    e.add_argument("--sf", metavar="FILE", help="per-location shadow fading, CSV with location_id,sf_db")
    e.add_argument("--out", metavar="DIR", help="write lsp.csv and summary.json here")
    e.add_argument("--threshold-db", type=float, default=30.0, help="delay-spread threshold below peak")
    e.add_argument("--snr-db", type=float, default=5.0, help="minimum SNR for multipaths and XPR bins")
    e.set_defaults(func=cmd_extract)

    c = sub.add_parser("cluster", parents=[common], help="cluster a path list (KPowerMeans or time clusters)")
    c.add_argument("--paths", required=True, metavar="FILE")
    c.add_argument("--method", choices=("kpm", "tcsl"), default="kpm")
    c.add_argument("--k-range", default="2..8", metavar="A..B")
    c.add_argument("--restarts", type=int, default=50)
    c.add_argument("--zeta", type=float, default=1.0, help="MCD delay scaling")
    c.add_argument("--void-ns", type=float, default=25.0, help="minimum inter-cluster void (tcsl)")
    c.add_argument("--out", metavar="FILE", help="write the partition as JSON")
    c.set_defaults(func=cmd_cluster)

    g = sub.add_parser("generate", parents=[common], help="generate a CIR ensemble")
    g.add_argument("--scenario", required=True, metavar="FILE:SECTION",
                   help=f"scenario section; a bare SECTION reads ${ENV_SCENARIO_PATH} or the packaged file")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--out", required=True, metavar="DIR")
    g.add_argument("--count-model", choices=COUNT_MODELS, default="gaussian")
    g.add_argument("--min-subpath-power-db", type=float, default=None,
                   help="drop subpaths this many dB below the strongest (default keep all)")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", parents=[common], help="compare an ensemble with scenario references")
    v.add_argument("--ensemble", required=True, metavar="DIR")
    v.add_argument("--scenario", metavar="FILE:SECTION", help="default: the scenario recorded in the manifest")
    v.add_argument("--report", metavar="FILE", help="JSON report path (default DIR/validation.json)")
    v.add_argument("--strict", action="store_true", help="treat a carrier-frequency mismatch as a data error")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    if args.tolerance_scale <= 0:
        parser.error("--tolerance-scale must be positive")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mmwchannel {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ChannelModelError, OSError) as exc:
        print(f"mmwchannel {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
