"""Command line entry point: ``dudenet run`` and ``dudenet check``.

``run`` evaluates a sweep and writes one CSV per metric plus ``manifest.json``.
Exit status: 0 on success, 2 for invalid input, 3 when any sweep point failed
numerically (the other points are still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .association import association_probability, decoupled_fraction
from .config_io import ConfigError, SweepSpec, load_sweep, read_ini, config_from_ini, summary
from .coverage import area_sum_rate, config_digest, tier_coverages, tier_rate_coverages
from .model import MM_TIERS, TIERS, Link, TierId, validate
from .montecarlo import CampaignResult, mean_ci, run_campaign
from .numerics import QuadratureError

__all__ = ["main", "run_sweep", "COLUMNS"]

COLUMNS = ("sweep_value", "link", "tier_or_total", "threshold", "analytical", "empirical_mean", "empirical_ci99")
KM2 = 1e6


class PointFailure(RuntimeError):
    pass


def _num(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return format(float(x), ".12g")


def _row(value, link, tier, threshold, analytical, emp=(None, None)):
    return (value, link, tier, threshold, analytical, emp[0], emp[1])


def _link_variants(spec: SweepSpec):
    """(label, link, association rule, coupled flag) for every reported link."""
    out = [(link.value, link, link, False) for link in spec.links]
    if spec.coupled and Link.UL in spec.links:
        out.append(("UL_coupled", Link.UL, Link.DL, True))
    return out


def _empirical_asr(config, camp, link, rule, coupled):
    sinr, tiers, _ = camp.series(link, coupled)
    freq = {k: np.mean(tiers == int(k)) for k in TIERS}
    mm = freq[TierId.L] + freq[TierId.N]
    total = 0.0
    for k in TIERS:
        sel = tiers == int(k)
        if not sel.any():
            continue
        lam = config.density(k)
        gamma = lam if k not in MM_TIERS else (lam * freq[k] / mm if mm > 0 else 0.0)
        total += gamma * config[k].bandwidth * float(np.mean(np.log2(1.0 + sinr[sel])))
    return total * KM2


def _metric_rows(metric, value, config, spec, camp: CampaignResult | None):
    rows = []
    if metric == "association":
        for link in spec.links:
            emp = camp.association_frequency(link) if camp else {}
            total = 0.0
            for k in TIERS:
                a = association_probability(config, link, k)
                total += a
                rows.append(_row(value, link.value, k.label, None, a, emp.get(k, (None, None))))
            rows.append(_row(value, link.value, "total", None, total, (1.0, 0.0) if camp else (None, None)))
    elif metric == "decoupled_fraction":
        rows.append(_row(value, "DL-UL", "total", None, decoupled_fraction(config),
                         camp.decoupled_fraction() if camp else (None, None)))
    elif metric == "sinr_coverage":
        taus_db = np.asarray(spec.sinr_thresholds_db)
        taus = 10.0 ** (taus_db / 10.0)
        for label, link, rule, coupled in _link_variants(spec):
            per = tier_coverages(config, link, taus, rule=rule, variant=spec.sinr_variant)
            a = {k: association_probability(config, rule, k) for k in TIERS}
            total = np.clip(sum(a[k] * per[k] for k in TIERS), 0.0, 1.0)
            emp = camp.sinr_coverage(link, taus, coupled=coupled) if camp else [(None, None)] * len(taus)
            sinr, tiers, _ = camp.series(link, coupled) if camp else (None, None, None)
            for k in TIERS:
                for j, t in enumerate(taus_db):
                    e = (None, None)
                    if camp is not None and np.any(tiers == int(k)):
                        e = mean_ci(sinr[tiers == int(k)] > taus[j])
                    rows.append(_row(value, label, k.label, t, per[k][j], e))
            for j, t in enumerate(taus_db):
                rows.append(_row(value, label, "total", t, total[j], emp[j]))
    elif metric == "rate_coverage":
        rhos = np.asarray(spec.rate_thresholds)
        for label, link, rule, coupled in _link_variants(spec):
            per = tier_rate_coverages(config, link, rhos, rule=rule)
            a = {k: association_probability(config, rule, k) for k in TIERS}
            total = np.clip(sum(a[k] * per[k] for k in TIERS), 0.0, 1.0)
            emp = camp.rate_coverage(link, rhos, coupled=coupled) if camp else [(None, None)] * len(rhos)
            for k in TIERS:
                for j, r in enumerate(rhos):
                    rows.append(_row(value, label, k.label, r, per[k][j]))
            for j, r in enumerate(rhos):
                rows.append(_row(value, label, "total", r, total[j], emp[j]))
    elif metric == "asr":
        for label, link, rule, coupled in _link_variants(spec):
            total, parts = area_sum_rate(config, link, rule=rule, per_tier=True)
            for k in TIERS:
                rows.append(_row(value, label, k.label, None, parts[k] * KM2))
            emp = (_empirical_asr(config, camp, link, rule, coupled), None) if camp else (None, None)
            rows.append(_row(value, label, "total", None, total * KM2, emp))
    return rows


def _evaluate_point(spec: SweepSpec, base, value, n_drops, seed):
    try:
        config = spec.configure(base, value)
    except ConfigError as exc:
        raise PointFailure(f"sweep value {value:g}: {exc}") from exc
    problems = validate(config)
    if problems:
        raise PointFailure(f"sweep value {value:g}: invalid config: " + "; ".join(problems))
    camp = None
    if n_drops > 0:
        want = set(spec.metrics) - {"association", "decoupled_fraction"}
        camp = run_campaign(config, n_drops, seed, metrics=("sinr",) if want else ("association",))
    out = {}
    for metric in spec.metrics:
        try:
            out[metric] = _metric_rows(metric, value, config, spec, camp)
        except QuadratureError as exc:
            raise PointFailure(f"{metric} failed at sweep value {value:g}: {exc}") from exc
    return config, out


def _write_atomic(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_num(r[0]), r[1], r[2], _num(r[3]), _num(r[4]), _num(r[5]), _num(r[6])])
    return buf.getvalue()


def run_sweep(config_source, sweep_source, out_dir, mc_drops=None, seed=None, threads=1, log=None) -> int:
    """Library form of ``dudenet run``; returns the exit status."""
    log = log or sys.stderr
    start = time.perf_counter()
    try:
        base = read_ini(config_source)
        problems = validate(config_from_ini(base))
        spec = load_sweep(sweep_source)
    except ConfigError as exc:
        print(f"error: {exc}", file=log)
        return 2
    if problems:
        print("error: invalid config:", file=log)
        for p in problems:
            print(f"  - {p}", file=log)
        return 2
    n_drops = spec.mc.n_drops if mc_drops is None else int(mc_drops)
    seed = spec.mc.seed if seed is None else int(seed)

    def one(value):
        try:
            return value, _evaluate_point(spec, base, value, n_drops, seed), None
        except PointFailure as exc:
            return value, None, str(exc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, spec.values))
    else:
        results = [one(v) for v in spec.values]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    failures = [msg for _, res, msg in results if msg]
    files = []
    for metric in spec.metrics:
        rows = [r for _, res, _ in results if res for r in res[1][metric]]
        path = out / f"{metric}.csv"
        _write_atomic(path, _csv_text(rows))
        files.append(path.name)
    digests = [config_digest(res[0]) for _, res, _ in results if res]
    manifest = {
        "tool": "dudenet",
        "version": __version__,
        "config_digest": config_digest(config_from_ini(base)),
        "point_digests": digests,
        "sweep_parameter": spec.parameter,
        "sweep_values": [float(v) for v in spec.values],
        "metrics": list(spec.metrics),
        "mc_drops": n_drops,
        "seed": seed,
        "files": files,
        "failures": failures,
        "wall_time_s": round(time.perf_counter() - start, 3),
    }
    _write_atomic(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    for msg in failures:
        print(f"error: {msg}", file=log)
    return 3 if failures else 0


def _check(config_path, log=None, err=None) -> int:
    log, err = log or sys.stdout, err or sys.stderr
    try:
        config = config_from_ini(read_ini(config_path))
    except ConfigError as exc:
        print(f"error: {exc}", file=err)
        return 2
    print(summary(config), file=log, end="")
    problems = validate(config)
    if problems:
        print("violations:", file=err)
        for p in problems:
            print(f"  - {p}", file=err)
        return 1
    print("ok", file=log)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dudenet", description="Decoupled DL/UL HetNet analysis and simulation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="evaluate a sweep and write CSV files")
    run.add_argument("--config", required=True, help="network config (INI)")
    run.add_argument("--sweep", required=True, help="sweep spec (INI)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--mc-drops", type=int, default=None, help="Monte Carlo drops per sweep point (0 disables)")
    run.add_argument("--seed", type=int, default=None, help="master seed")
    run.add_argument("--threads", type=int, default=1, help="sweep points evaluated concurrently")
    check = sub.add_parser("check", help="validate a config and print its parameters")
    check.add_argument("--config", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check":
        return _check(args.config)
    return run_sweep(args.config, args.sweep, args.out, args.mc_drops, args.seed, max(1, args.threads))


if __name__ == "__main__":
    sys.exit(main())
