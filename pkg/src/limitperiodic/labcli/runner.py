"""Experiment driver: run one configuration, write its outputs and a manifest.

Every experiment returns the text of its output files; the driver is the
single writer. ``manifest.json`` is written last and lists each file with
its SHA-256 digest. Apart from the ``timestamps`` entry of the manifest,
outputs depend only on the configuration and the seed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__
from ..bands import compute_bands, verify_norm_measure_bound
from ..cocycle import lyapunov_family
from ..construct import grids
from ..construct.induction import block_layout, lemma_induction, niceness_census
from ..construct.params import InductionParams, JoiningSettings, SchemeSettings
from ..construct.scheme import iterate_scheme, to_json
from ..construct.start import lemma_start
from ..errors import LimitPeriodicError
from ..odometer import DEFAULT_SCHEDULE, Ball, GroupSchedule, PeriodicPotential, PotentialFamily
from .config import OUT_ENV, RunConfig
from .plotting import render_svg, series_csv

MANIFEST = "manifest.json"


@dataclass
class Outcome:
    files: dict = field(default_factory=dict)  # name -> text
    passed: bool = True
    summary: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)


@dataclass
class RunManifest:
    config: dict
    version: str
    files: list
    passed: bool
    summary: dict
    errors: list
    timestamps: dict

    def to_dict(self) -> dict:
        return {
            "tool": "limitperiodic",
            "version": self.version,
            "config": self.config,
            "files": self.files,
            "passed": self.passed,
            "summary": self.summary,
            "errors": self.errors,
            "timestamps": self.timestamps,
        }


def _csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _family(cfg: RunConfig) -> PotentialFamily:
    return PotentialFamily(tuple(PeriodicPotential(np.array(m)) for m in cfg.members))


def _schedule(cfg: RunConfig) -> GroupSchedule:
    return DEFAULT_SCHEDULE if cfg.schedule is None else GroupSchedule(cfg.schedule)


def _energy_grid(cfg: RunConfig) -> np.ndarray:
    n = int(round((cfg.e_max - cfg.e_min) / cfg.step))
    return cfg.e_min + cfg.step * np.arange(n + 1)


def _pairs(cfg: RunConfig):
    return [(i, lam) for i in range(len(cfg.members)) for lam in cfg.lambdas]


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# experiments ----------------------------------------------------------------


def exp_bands(cfg: RunConfig, threads: int) -> Outcome:
    W = _family(cfg)
    specs = _map(lambda p: compute_bands(W[p[0]], p[1]), _pairs(cfg), threads)
    rows, summary = [], []
    for (i, lam), spec in zip(_pairs(cfg), specs):
        for q, b in enumerate(spec.bands):
            rows.append([i, lam, q, b.lo, b.hi, b.length, int(b.thin)])
        summary.append(
            {"member": i, "lambda": lam, "measure": spec.measure, "components": spec.component_count}
        )
    out = Outcome()
    out.files["bands.csv"] = _csv(["member", "lambda", "band_index", "lo", "hi", "length", "thin"], rows)
    out.files["bands.json"] = to_json({"spectra": summary})
    out.summary = {"spectra": len(specs)}
    return out


def exp_lyapunov(cfg: RunConfig, threads: int) -> Outcome:
    W = _family(cfg)
    E = _energy_grid(cfg)
    curves = _map(lambda lam: np.asarray(lyapunov_family(E, lam, W)), list(cfg.lambdas), threads)
    rows = [[lam, e, L] for lam, c in zip(cfg.lambdas, curves) for e, L in zip(E, c)]
    series = {f"lambda={lam:g}": (E, c) for lam, c in zip(cfg.lambdas, curves)}
    out = Outcome()
    out.files["lyapunov.csv"] = _csv(["lambda", "E", "lyapunov"], rows)
    out.files["lyapunov_plot.svg"] = render_svg(series, "E", "L(E)", "Lyapunov exponent")
    out.files["lyapunov_plot.csv"] = series_csv(series)
    out.summary = {"points": len(rows), "min": float(min(c.min() for c in curves))}
    return out


def exp_meas_bounds(cfg: RunConfig, threads: int) -> Outcome:
    W = _family(cfg)

    def one(p):
        i, lam = p
        spec = compute_bands(W[i], lam)
        return spec, verify_norm_measure_bound(W[i], lam, spectrum=spec, per_band=cfg.per_band)

    res = _map(one, _pairs(cfg), threads)
    rows = []
    out = Outcome()
    for (i, lam), (spec, rep) in zip(_pairs(cfg), res):
        n = spec.period
        longest = max(b.length for b in spec.bands)
        band_ok = longest <= 2 * math.pi / n + 1e-9
        rows.append([i, lam, n, longest, 2 * math.pi / n, int(band_ok), rep.log_measure,
                     rep.log_certified_C, rep.log_bound, rep.status])
        if rep.status == "fail" or not band_ok:
            out.passed = False
    counts = {s: sum(1 for r in rows if r[-1] == s) for s in ("pass", "fail", "inconclusive")}
    header = ["member", "lambda", "period", "longest_band", "band_bound", "band_ok",
              "log_measure", "log_certified_C", "log_bound", "status"]
    out.files["meas_bounds.csv"] = _csv(header, rows)
    out.summary = {"statuses": counts}
    return out


def _settings(cfg: RunConfig) -> JoiningSettings:
    base = JoiningSettings.desk() if cfg.preset == "desk" else JoiningSettings()
    return base.with_overrides(seed=cfg.seed, **cfg.settings)


def exp_start(cfg: RunConfig, threads: int) -> Outcome:
    W = _family(cfg)
    ball = Ball(W[0], cfg.radius)
    res = lemma_start(W, ball, cfg.M, cfg.levels, _settings(cfg), _schedule(cfg))
    rows = [[r.K, r.n_K, r.N1, r.N2, r.delta, int(r.delta_resolved), int(r.claim1),
             "" if r.claim2 is None else int(r.claim2), r.drift, int(r.fits_ball)] for r in res.reports]
    out = Outcome()
    out.files["start_levels.csv"] = _csv(
        ["K", "n_K", "N1", "N2", "delta", "delta_resolved", "claim1", "claim2", "drift", "fits_ball"], rows
    )
    out.files["start.json"] = to_json(dict(res.to_dict(), drifts=res.drifts))
    out.passed = res.family is not None and all(r.claim1 and r.claim2 is not False for r in res.reports)
    out.summary = {"level": res.level, "drifts": res.drifts}
    return out


def exp_induction(cfg: RunConfig, threads: int) -> Outcome:
    W = _family(cfg)
    m, n_k = W.count, W.period
    sched = _schedule(cfg)
    n_K = sched.period(cfg.level) if cfg.level is not None else m * cfg.r * n_k
    params = InductionParams(
        r=cfg.r, amp_exponent=cfg.amp_exponent, theta_exponent=cfg.theta_exponent, theta_nice=cfg.theta_nice,
        diameter_exponent=cfg.diameter_exponent,
    )
    layout = block_layout(m, n_k, n_K, params)
    out = Outcome()
    census_summary = []
    for lam in cfg.lambdas:
        census = niceness_census(W, layout, params, cfg.energy, lam)
        out.files[f"census_lambda{lam:g}.csv"] = census.to_csv()
        census_summary.append(
            {"lambda": lam, "not_very_nice": census.not_very_nice, "bound": census.bound,
             "within_bound": census.within_bound}
        )
        out.passed &= census.within_bound
    cert = None
    if n_K in sched.indices:
        half = grids.window_half_width(W.sup_norm(), cfg.lambdas)
        E = grids.symmetric_grid(half, cfg.step)
        hyps = []
        for lam in cfg.lambdas:
            hmin = float(grids.family_lyapunov_grid(E, [lam], W.members).min())
            hyps.append((lam, hmin / (m * n_k), hmin))
        res = lemma_induction(W, sched.level_of(n_K), params, sched, hypotheses=hyps, seed=cfg.seed)
        cert = res.certificate.to_dict()
        out.passed &= res.certificate.measure_ok
    out.files["induction.json"] = to_json({"census": census_summary, "certificate": cert})
    out.summary = {"census": census_summary, "certificate_run": cert is not None}
    return out


def exp_iterate(cfg: RunConfig, threads: int) -> Outcome:
    W = _family(cfg)
    if cfg.preset == "desk":
        base = SchemeSettings.desk(M_cap=cfg.M_cap, seed=cfg.seed)
        stages = tuple(s.with_overrides(**cfg.settings) for s in base.stages)
        settings = SchemeSettings(stages, cfg.M_cap)
    else:
        settings = SchemeSettings((_settings(cfg),), cfg.M_cap)
    res = iterate_scheme(Ball(W[0], cfg.radius), W, cfg.eps_1, cfg.depth, settings, _schedule(cfg))
    rows = [[c.stage, c.family.period, c.ball.radius, c.delta, c.center_measure,
             math.log10(c.center_measure) if c.center_measure > 0 else "-inf", int(c.passed)]
            for c in res.certificates]
    out = Outcome()
    out.files["stages.csv"] = _csv(
        ["stage", "period", "radius", "delta", "center_measure", "log10_measure", "passed"], rows
    )
    out.files["certificates.json"] = to_json(dict(res.to_dict(), settings=settings.to_dict()))
    if res.certificates:
        st = np.array([c.stage for c in res.certificates], float)
        lm = np.array([math.log10(c.center_measure) if c.center_measure > 0 else -np.inf
                       for c in res.certificates])
        series = {"log10 measure": (st, lm)}
        out.files["measure_decay.svg"] = render_svg(series, "stage", "log10 |spectrum|", "Spectrum measure")
        out.files["measure_decay.csv"] = series_csv(series)
    bounds_ok = all(b["status"] != "fail" for c in res.certificates for b in c.explicit_bounds)
    out.passed = res.passed and res.measures_decreasing and bounds_ok and len(res.certificates) == cfg.depth
    if res.failure:
        out.errors.append({"type": "construction", "stage": res.failure["stage"], "message": res.failure["message"]})
    out.summary = {
        "stages": len(res.certificates),
        "measures": res.measures,
        "measures_decreasing": res.measures_decreasing,
        "explicit_bounds_ok": bounds_ok,
    }
    return out


EXPERIMENTS = {
    "bands": exp_bands,
    "lyapunov-curve": exp_lyapunov,
    "meas-bounds": exp_meas_bounds,
    "start": exp_start,
    "induction": exp_induction,
    "iterate": exp_iterate,
}


# driver ---------------------------------------------------------------------


def default_out_dir() -> str:
    return os.environ.get(OUT_ENV, "results")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def run(cfg: RunConfig, out_dir=None, threads: int = 1) -> RunManifest:
    """Execute ``cfg``; numerical failures become manifest error entries."""
    out = Path(out_dir or cfg.out or default_out_dir())
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    t0 = time.perf_counter()
    try:
        outcome = EXPERIMENTS[cfg.kind](cfg, threads)
    except (LimitPeriodicError, ArithmeticError, ValueError) as exc:
        outcome = Outcome(passed=False, errors=[{"type": type(exc).__name__, "message": str(exc)}])
    listed = []
    for name in sorted(outcome.files):
        path = out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(outcome.files[name])
        listed.append({"path": name, "sha256": sha256_file(path), "bytes": path.stat().st_size})
    manifest = RunManifest(
        config=cfg.to_dict(),
        version=__version__,
        files=listed,
        passed=bool(outcome.passed and not outcome.errors),
        summary=outcome.summary,
        errors=outcome.errors,
        timestamps={"started": started, "finished": _now(), "seconds": round(time.perf_counter() - t0, 3)},
    )
    with open(out / MANIFEST, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_json(manifest.to_dict()))
    return manifest


def verify_manifest(out_dir) -> list[str]:
    """Names of listed files whose digest no longer matches."""
    out = Path(out_dir)
    data = json.loads((out / MANIFEST).read_text(encoding="utf-8"))
    return [f["path"] for f in data["files"] if sha256_file(out / f["path"]) != f["sha256"]]


__all__ = ["EXPERIMENTS", "MANIFEST", "RunManifest", "default_out_dir", "run", "sha256_file", "verify_manifest"]
