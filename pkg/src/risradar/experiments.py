"""SNR sweeps over design variants, level-crossing measurements and CSV output."""

from __future__ import annotations

import csv
import io
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from .design import (
    alternating_maximization,
    baseline_no_ris,
    baseline_passive,
    mismatched_design,
)
from .errors import RisRadarError
from .scenario import sigma2_for_snr0, snr0_from_sigma2

__all__ = [
    "SweepRecord",
    "CSV_COLUMNS",
    "sigma_from_snr0",
    "snr0_of",
    "default_grid",
    "default_cases",
    "parse_case",
    "record_from_report",
    "run_case",
    "design_sigma_for_pd",
    "sweep_snr0",
    "select",
    "level_crossing",
    "gain_at_pd_level",
    "activation_threshold",
    "crossover",
    "locate_activation",
    "format_records",
    "emit_records",
]


@dataclass(frozen=True)
class SweepRecord:
    case: str
    snr0_db: float
    pd: float
    p_r_w: float
    l: int
    amplitude: float
    radar_consumed_w: float
    ris_consumed_w: float
    budget_ok: bool
    iterations: int
    converged: bool


CSV_COLUMNS = tuple(f.name for f in fields(SweepRecord))


def sigma_from_snr0(snr0_db, config):
    """Target strength (both paths) at which the radar alone reaches ``snr0_db``."""
    return sigma2_for_snr0(snr0_db, config.radar, config.link)


def snr0_of(config):
    return snr0_from_sigma2(config.target.sigma2_g1, config.radar, config.link)


def default_grid(config=None):
    sweep = (config.raw.get("sweep", {}) if config is not None else {}) or {}
    start = sweep.get("snr0_db_start", 0.0)
    stop = sweep.get("snr0_db_stop", 30.0)
    step = sweep.get("snr0_db_step", 0.25)
    n = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(n), 10)


def _db_tag(value):
    return f"{value:g}db"


def default_cases(config=None, mismatched=False):
    sweep = (config.raw.get("sweep", {}) if config is not None else {}) or {}
    levels = sweep.get("a_max_db", [10, 20, 30, 40])
    cases = ["no_ris", "passive"] + [f"active_{_db_tag(v)}" for v in levels]
    if mismatched:
        cases += [f"mismatched_{_db_tag(v)}" for v in levels]
    return cases


_CASE_RE = re.compile(r"^(active|mismatched)_(-?[0-9.]+)db$")


def parse_case(case):
    """Split a case label into (kind, a_max_db or None)."""
    if case in ("no_ris", "passive"):
        return case, None
    m = _CASE_RE.match(case)
    if not m:
        raise ValueError(f"unknown case {case!r}; expected no_ris, passive, active_<x>db "
                         "or mismatched_<x>db")
    return m.group(1), float(m.group(2))


def record_from_report(case, snr0_db, report):
    d, c = report.design, report.consumed
    return SweepRecord(
        case=case,
        snr0_db=float(snr0_db),
        pd=float(report.pd),
        p_r_w=float(d.p_r),
        l=int(d.l),
        amplitude=float(d.amplitude),
        radar_consumed_w=float(c.radar),
        ris_consumed_w=float(c.ris),
        budget_ok=bool(report.budget_ok),
        iterations=int(report.iterations),
        converged=bool(report.converged),
    )


def _failed_record(case, snr0_db):
    nan = math.nan
    return SweepRecord(case, float(snr0_db), nan, nan, 0, nan, nan, nan, False, 0, False)


def _with_amax(config, a_max_db):
    return config.with_ris(a_max=10.0 ** (a_max_db / 20.0))


def design_sigma_for_pd(config, pd_level=0.5, tol=1e-4, lo_db=-40.0, hi_db=60.0):
    """Target strength at which the matched active design reaches ``pd_level``.

    Bisection on the reference SNR; stops once PD is within ``tol`` of the level.
    """
    def pd_at(snr_db):
        s = sigma_from_snr0(snr_db, config)
        return alternating_maximization(config.with_target(s)).pd

    if not pd_at(lo_db) < pd_level < pd_at(hi_db):
        raise RisRadarError(f"PD level {pd_level} not reached in [{lo_db}, {hi_db}] dB")
    for _ in range(200):
        mid = 0.5 * (lo_db + hi_db)
        pd = pd_at(mid)
        if abs(pd - pd_level) <= tol:
            break
        if pd < pd_level:
            lo_db = mid
        else:
            hi_db = mid
    return sigma_from_snr0(mid, config)


def run_case(config, case, snr0_db, design_sigma2=None):
    """Solve one (case, SNR0) point; infeasibility yields a flagged record."""
    kind, a_db = parse_case(case)
    sigma2 = sigma_from_snr0(snr0_db, config)
    cfg = config.with_target(sigma2)
    try:
        if kind == "no_ris":
            report = baseline_no_ris(cfg)
        elif kind == "passive":
            report = baseline_passive(cfg)
        elif kind == "active":
            report = alternating_maximization(_with_amax(cfg, a_db))
        else:
            report = mismatched_design(_with_amax(cfg, a_db), design_sigma2)
    except RisRadarError:
        return _failed_record(case, snr0_db)
    return record_from_report(case, snr0_db, report)


def _run_point(args):
    return run_case(*args)


def sweep_snr0(config, grid=None, cases=None, workers=1, mismatch_pd=0.5):
    """One record per (case, grid point), sorted by case label then SNR0.

    Mismatched cases design for the RIS-path strength at which the matched
    active design has PD ``mismatch_pd``.
    """
    grid = default_grid(config) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty SNR0 grid")
    cases = default_cases(config) if cases is None else list(cases)
    design_sigma = {}
    for case in cases:
        kind, a_db = parse_case(case)
        if kind == "mismatched":
            design_sigma[case] = design_sigma_for_pd(_with_amax(config, a_db), mismatch_pd)
    jobs = [(config, case, float(s), design_sigma.get(case)) for case in cases for s in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_point, jobs, chunksize=8))
    else:
        records = [_run_point(job) for job in jobs]
    return sorted(records, key=lambda r: (r.case, r.snr0_db))


def select(records, case):
    return sorted((r for r in records if r.case == case), key=lambda r: r.snr0_db)


def level_crossing(records, pd_level):
    """SNR0 at which PD first reaches ``pd_level`` (linear interpolation in dB)."""
    x = np.array([r.snr0_db for r in records])
    y = np.array([r.pd for r in records])
    if np.any(np.diff(y) < 0):
        raise ValueError("PD is not monotone along SNR0")
    if not (y[0] <= pd_level <= y[-1]):
        raise ValueError(f"PD level {pd_level} not bracketed by [{y[0]:.6g}, {y[-1]:.6g}]")
    i = int(np.searchsorted(y, pd_level, side="left"))
    if i == 0 or y[i] == pd_level:
        return float(x[i])
    return float(x[i - 1] + (pd_level - y[i - 1]) * (x[i] - x[i - 1]) / (y[i] - y[i - 1]))


def gain_at_pd_level(records_a, records_b, pd_level):
    """SNR0 advantage (dB) of ``records_a`` over ``records_b`` at ``pd_level``."""
    return level_crossing(records_b, pd_level) - level_crossing(records_a, pd_level)


def activation_threshold(records):
    """Smallest SNR0 at which the design switches at least one element on."""
    for r in records:
        if r.l >= 1:
            return r.snr0_db
    return None


def crossover(records_a, records_b):
    """First point where ``a`` overtakes ``b``: interpolated (SNR0, PD), or None."""
    pts = {r.snr0_db: r for r in records_b}
    pairs = [(ra, pts[ra.snr0_db]) for ra in records_a if ra.snr0_db in pts]
    prev = None
    for ra, rb in pairs:
        diff = ra.pd - rb.pd
        if prev is not None and prev[0] <= 0 < diff:
            d0, r0a, r0b = prev
            t = -d0 / (diff - d0)
            snr = r0a.snr0_db + t * (ra.snr0_db - r0a.snr0_db)
            pd = r0b.pd + t * (rb.pd - r0b.pd)
            return snr, pd
        prev = (diff, ra, rb)
    return None


def locate_activation(config, lo_db, hi_db, tol_db=1e-3):
    """Bisect the SNR0 at which the passive design first switches elements on."""
    def active(snr_db):
        return baseline_passive(config.with_target(sigma_from_snr0(snr_db, config))).design.l >= 1

    if active(lo_db) or not active(hi_db):
        raise ValueError(f"passive activation not bracketed by [{lo_db}, {hi_db}] dB")
    while hi_db - lo_db > tol_db:
        mid = 0.5 * (lo_db + hi_db)
        if active(mid):
            hi_db = mid
        else:
            lo_db = mid
    return hi_db


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".15g")
    return str(value)


def format_records(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([_fmt(v) for v in astuple(r)])
    return buf.getvalue()


def emit_records(records, destination):
    """Write records as CSV to a path or an open text stream."""
    text = format_records(records)
    if hasattr(destination, "write"):
        destination.write(text)
        return
    path = Path(destination)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write records to '{path}': {exc.strerror}") from exc
