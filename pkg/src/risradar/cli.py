"""Batch command-line front end.

    risradar optimize --config table1.json --set target.snr0_db=15 --set ris.a_max_db=40
    risradar sweep    --config table1.json --out fig2.csv
    risradar simulate --config table1.json --trials 1000000 --seed 7
    risradar validate --config table1.json --trials 1000000 --seed 7
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .design import Design, alternating_maximization, evaluate_design
from .detection import pfa_from_threshold, pd_two_channel, threshold_from_pfa
from .errors import RisRadarError
from .experiments import (
    _fmt,
    default_cases,
    default_grid,
    emit_records,
    format_records,
    record_from_report,
    snr0_of,
    sweep_snr0,
)
from .scenario import config_hash, lin_to_db, load_config
from .simkit import element_layout, element_level_coherence_check, estimate_detection_mc

VALIDATE_PFAS = (1e-1, 1e-2, 1e-3)


def _case_label(config):
    return f"active_{lin_to_db(config.ris.a_max ** 2):g}db"


def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        try:
            with open(out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise RisRadarError(f"cannot write '{out}': {exc.strerror}") from None


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _design_from_args(args, config):
    given = [v is not None for v in (args.p_r, args.l, args.amplitude)]
    if any(given):
        if not all(given):
            raise RisRadarError("--p-r, --l and --amplitude must be given together")
        return Design(args.p_r, args.l, args.amplitude)
    return alternating_maximization(config, seed=config.mc_seed).design


def cmd_optimize(args, config):
    report = alternating_maximization(config, seed=config.mc_seed)
    d, op, c = report.design, report.operating_point, report.consumed
    lines = [
        f"config hash        {config_hash(config)}",
        f"SNR0               {snr0_of(config):.4f} dB",
        f"PFA / threshold    {op.pfa:.3g} / {op.gamma:.6f}",
        f"radar power P_r    {d.p_r:.6g} W",
        f"RIS elements L     {d.l}",
        f"amplitude a        {d.amplitude:.6g} (a_max {config.ris.a_max:.6g})",
        f"SNR1 / SNR2        {lin_to_db(op.snr1) if op.snr1 > 0 else -math.inf:.4f} dB / "
        f"{lin_to_db(op.snr2) if op.snr2 > 0 else -math.inf:.4f} dB",
        f"PD                 {op.pd:.10f}",
        f"radar consumption  {c.radar:.6g} W",
        f"RIS consumption    {c.ris:.6g} W (circuits {c.ris_circuits:.6g}, "
        f"amplifiers {c.ris_amplifier:.6g})",
        f"total / budget     {c.total:.12g} / {config.radar.p_max:.6g} W "
        f"({'ok' if report.budget_ok else 'VIOLATED'})",
        f"BCA sweeps         {report.iterations} ({'converged' if report.converged else 'not converged'})",
    ]
    text = "\n".join(lines) + "\n"
    row = format_records([record_from_report(_case_label(config), snr0_of(config), report)])
    if args.out in (None, "-"):
        sys.stdout.write(text + "\n" + row)
    else:
        sys.stdout.write(text)
        _write(row, args.out)
    return 0


def cmd_sweep(args, config):
    cases = args.cases.split(",") if args.cases else default_cases(config, args.mismatched)
    grid = None
    if args.start is not None or args.stop is not None or args.step is not None:
        base = default_grid(config)
        start = base[0] if args.start is None else args.start
        stop = base[-1] if args.stop is None else args.stop
        step = (base[1] - base[0]) if args.step is None else args.step
        n = int(round((stop - start) / step)) + 1
        grid = np.round(start + step * np.arange(n), 10)
    records = sweep_snr0(config, grid=grid, cases=cases, workers=args.workers)
    if args.out in (None, "-"):
        emit_records(records, sys.stdout)
    else:
        emit_records(records, args.out)
        print(f"wrote {len(records)} records to {args.out} (config {config_hash(config)})",
              file=sys.stderr)
    return 0


MC_COLUMNS = ("hypothesis", "pfa", "gamma", "trials", "hits", "p_hat", "ci_halfwidth", "seed",
              "analytic", "p_r_w", "l", "amplitude")


def cmd_simulate(args, config):
    design = _design_from_args(args, config)
    trials = config.mc_trials if args.trials is None else args.trials
    seed = config.mc_seed if args.seed is None else args.seed
    rows = []
    for pfa in args.pfa or [config.pfa]:
        gamma = threshold_from_pfa(pfa)
        op = evaluate_design(design, config, detector="two_channel", gamma=gamma)
        for hyp, analytic in (("target-absent", pfa_from_threshold(gamma)),
                              ("target-present", op.pd)):
            est = estimate_detection_mc(design, config, hyp, trials, seed, gamma=gamma,
                                        workers=args.workers)
            rows.append((hyp, pfa, gamma, est.trials, est.hits, est.p_hat, est.ci_halfwidth,
                         est.seed, analytic, design.p_r, design.l, design.amplitude))
    _write(_csv(MC_COLUMNS, rows), args.out)
    return 0


def cmd_validate(args, config):
    design = _design_from_args(args, config)
    trials = config.mc_trials if args.trials is None else args.trials
    seed = config.mc_seed if args.seed is None else args.seed
    rows = []
    for pfa in VALIDATE_PFAS:
        gamma = threshold_from_pfa(pfa)
        op = evaluate_design(design, config, detector="two_channel", gamma=gamma)
        checks = (("pfa", "target-absent", pfa_from_threshold(gamma)),
                  ("pd", "target-present", pd_two_channel(op.snr1, op.snr2, gamma)))
        for name, hyp, analytic in checks:
            est = estimate_detection_mc(design, config, hyp, trials, seed, gamma=gamma,
                                        workers=args.workers)
            tol = 3.0 * math.sqrt(analytic * (1 - analytic) / trials)
            rows.append((name, pfa, analytic, est.p_hat, tol, est.agrees_with(analytic)))
    n_elem = args.elements
    layout = element_layout(config, n_elem)
    amps = [config.ris.a_max] * n_elem
    coh = element_level_coherence_check(layout, amps, trials=args.coherence_trials, seed=seed)
    rows.append(("coherent_factor", "", coh.sum_a, abs(coh.factor), 1e-10 * coh.sum_a,
                 coh.aligned_ok))
    for which, v in (("aligned", coh.noise_var_aligned), ("random", coh.noise_var_random)):
        rows.append((f"noise_var_{which}", "", 1.0, v / coh.noise_var_expected,
                     5.0 * coh.rel_se, coh.variance_ok(which)))
    out = _csv(("check", "pfa", "analytic", "empirical", "tolerance", "pass"), rows)
    _write(out, args.out)
    failed = [r[0] for r in rows if not r[-1]]
    summary = (f"validate: {len(rows) - len(failed)}/{len(rows)} checks passed "
               f"(config {config_hash(config)}, trials {trials}, seed {seed})")
    print(summary, file=sys.stderr)
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="risradar", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario JSON (table1.json is built in)")
    common.add_argument("--out", "-o", default=None, help="output file (default: stdout)")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override a config field; repeatable")
    common.add_argument("--seed", type=int, default=None, help="RNG seed (overrides mc.seed)")
    common.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (overrides mc.trials)")
    common.add_argument("--no-ris-detector", choices=("single", "two_channel"), default=None,
                        help="detector used whenever the RIS is off")
    common.add_argument("--workers", type=int, default=1, help="parallel workers")
    common.add_argument("--show-config", action="store_true",
                        help="print the effective configuration to stderr")

    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("optimize", parents=[common], help="optimal radar/RIS design for one scenario")
    sw = sub.add_parser("sweep", parents=[common], help="sweep SNR0 over all design variants")
    sw.add_argument("--start", type=float, default=None)
    sw.add_argument("--stop", type=float, default=None)
    sw.add_argument("--step", type=float, default=None)
    sw.add_argument("--cases", default=None, help="comma-separated case labels")
    sw.add_argument("--mismatched", action="store_true", help="add mismatched-design cases")
    for name, hlp in (("simulate", "Monte Carlo detection rates for a design"),
                      ("validate", "analytic vs Monte Carlo checks")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        p.add_argument("--p-r", type=float, default=None, help="radar power, W (default: optimized)")
        p.add_argument("--l", type=int, default=None, help="element count")
        p.add_argument("--amplitude", type=float, default=None, help="common element amplitude")
        if name == "simulate":
            p.add_argument("--pfa", type=float, action="append", default=None,
                           help="false-alarm level(s) to simulate (default: config PFA)")
        else:
            p.add_argument("--elements", type=int, default=64,
                           help="elements in the phase-coherence check")
            p.add_argument("--coherence-trials", type=int, default=100_000)
    return parser


COMMANDS = {"optimize": cmd_optimize, "sweep": cmd_sweep, "simulate": cmd_simulate,
            "validate": cmd_validate}


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"mc.seed={args.seed}")
    if args.trials is not None:
        overrides.append(f"mc.trials={args.trials}")
    if args.no_ris_detector is not None:
        overrides.append(f'detection.no_ris_detector="{args.no_ris_detector}"')
    try:
        config = load_config(args.config, overrides)
        if args.show_config:
            print(json.dumps(config.raw, indent=2, sort_keys=True), file=sys.stderr)
        return COMMANDS[args.command](args, config)
    except (RisRadarError, OSError, ValueError) as exc:
        print(f"risradar {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())
