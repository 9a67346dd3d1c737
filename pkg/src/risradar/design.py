"""Power split between radar transmitter and active RIS.

The joint problem (radar power, element count, element amplitudes under one
power budget) is solved by block-coordinate ascent over two blocks, each of
which has a closed-form optimum:

* radar power given the RIS: the largest power meeting the budget;
* RIS given the radar power: uniform amplitudes ``g(L)`` and an element count
  found from the unimodal relaxation of the RIS-channel SNR.

Block ascent only ever hands power from the RIS back to the radar, so its
limit depends on the starting triplet. :func:`alternating_maximization`
therefore runs it from several starts (see its docstring).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .detection import OperatingPoint, compute_snrs, pd_single_channel, pd_two_channel, threshold_from_pfa
from .errors import InfeasibleDesignError

__all__ = [
    "Design",
    "PowerBreakdown",
    "SubproblemContext",
    "DesignReport",
    "power_breakdown",
    "evaluate_design",
    "optimal_radar_power",
    "subproblem_context",
    "amplitude_for_count",
    "ris_objective",
    "optimal_ris",
    "alternating_maximization",
    "baseline_no_ris",
    "baseline_passive",
    "passive_config",
    "mismatched_design",
]

BUDGET_SLACK = 1e-9
# guards floor() against kappa / (rho_s + zeta) landing a hair below an integer
_FLOOR_RTOL = 1e-12


@dataclass(frozen=True)
class Design:
    """Radar power, element count and common element amplitude.

    Element phases always follow the alignment rule
    ``phi_l = -(beta_tl + beta_lr)``; ``phase_rule`` only records that.
    """

    p_r: float
    l: int
    amplitude: float = 1.0
    phase_rule: str = "aligned"

    def amplitudes(self):
        return np.full(self.l, self.amplitude)


@dataclass(frozen=True)
class PowerBreakdown:
    radar_circuit: float
    radar_amplifier: float
    ris_circuits: float
    ris_amplifier: float

    @property
    def radar(self):
        return self.radar_circuit + self.radar_amplifier

    @property
    def ris(self):
        return self.ris_circuits + self.ris_amplifier

    @property
    def total(self):
        return self.radar + self.ris


@dataclass(frozen=True)
class SubproblemContext:
    """Quantities of the RIS subproblem at a fixed radar power.

    ``signal_gain`` is ``alpha_2^2 sigma2_g2 P_r`` and ``noise_gain`` is
    ``alpha_sr^2 P_v``, so the RIS-channel SNR of ``L`` elements at common
    amplitude ``a`` is ``signal_gain (L a)^2 / (p_w2 + noise_gain L a^2)``.
    """

    p_r: float
    kappa: float
    zeta: float
    rho_s: float
    a_max: float
    l_max: int
    l_bar: int
    l1: float
    l2_minus: float
    l2_plus: float
    signal_gain: float
    noise_gain: float
    p_w2: float


@dataclass(frozen=True)
class DesignReport:
    design: Design
    operating_point: OperatingPoint
    consumed: PowerBreakdown
    iterations: int = 0
    converged: bool = True
    budget_ok: bool = True
    detector: str = "two_channel"
    passive: bool = False
    history: tuple = field(default=(), repr=False)

    @property
    def pd(self):
        return self.operating_point.pd


def passive_config(config):
    """Scenario with passive-RIS hardware: rho_s = P_c, no dynamic noise, unit gain."""
    return config.with_ris(rho_s=config.ris.p_c, p_v=0.0, eta_s=1.0, a_max=1.0)


def power_breakdown(design, config, passive=False, sigma2_g2=None):
    """Power drawn by each consumer; ``sigma2_g2`` overrides the target strength."""
    radar, ris = config.radar, config.ris
    sigma2 = config.target.sigma2_g2 if sigma2_g2 is None else sigma2_g2
    sum_a2 = design.l * design.amplitude**2
    if passive:
        ris_circuits = design.l * ris.p_c
        ris_amp = 0.0
    else:
        ris_circuits = design.l * ris.rho_s
        p_out = (config.link.alpha_rts**2 * sigma2 * design.p_r + ris.p_v) * sum_a2
        ris_amp = p_out / ris.eta_s
    return PowerBreakdown(radar.rho_r, design.p_r / radar.eta_r, ris_circuits, ris_amp)


def evaluate_design(design, config, detector=None, gamma=None):
    """Operating point of ``design``.

    Designs with ``l >= 1`` always use the two-channel detector. A design with
    the RIS switched off uses ``detector`` (default: the config's
    ``no_ris_detector``).
    """
    detector = config.no_ris_detector if detector is None else detector
    gamma = threshold_from_pfa(config.pfa) if gamma is None else gamma
    snr1, snr2 = compute_snrs(design, config.link, config.target, config.radar, config.ris)
    if design.l == 0 and detector == "single":
        pd = pd_single_channel(snr1, config.pfa)
    else:
        pd = pd_two_channel(snr1, snr2, gamma)
    return OperatingPoint(snr1=snr1, snr2=snr2, gamma=gamma, pfa=config.pfa, pd=pd)


def _report(design, config, detector=None, passive=False, iterations=0, converged=True,
            history=(), gamma=None):
    detector = config.no_ris_detector if detector is None else detector
    op = evaluate_design(design, config, detector, gamma)
    consumed = power_breakdown(design, config, passive=passive)
    ok = consumed.total <= config.radar.p_max + BUDGET_SLACK
    return DesignReport(design, op, consumed, iterations, converged, ok, detector, passive,
                        tuple(history))


def optimal_radar_power(l, amplitude, config):
    """Largest radar power that keeps the RIS configuration ``(l, amplitude)`` in budget."""
    radar, ris = config.radar, config.ris
    sum_a2 = l * amplitude**2 if l else 0.0
    numerator = radar.p_max - radar.rho_r - l * ris.rho_s - ris.p_v * sum_a2 / ris.eta_s
    denominator = (1.0 / radar.eta_r
                   + config.link.alpha_rts**2 * config.target.sigma2_g2 * sum_a2 / ris.eta_s)
    if numerator < 0:
        # a budget-exhausting RIS can round to a few ulps of P_max below zero
        if numerator >= -8 * np.finfo(float).eps * radar.p_max:
            return 0.0
        raise InfeasibleDesignError(
            f"RIS with {l} elements at amplitude {amplitude:g} needs more than the "
            f"{radar.p_max - radar.rho_r:g} W left after the radar circuit power"
        )
    return numerator / denominator


def subproblem_context(p_r, config):
    if p_r < 0:
        raise ValueError(f"radar power must be >= 0, got {p_r}")
    radar, ris, link = config.radar, config.ris, config.link
    kappa = radar.p_max - radar.rho_r - p_r / radar.eta_r
    zeta = (link.alpha_rts**2 * config.target.sigma2_g2 * p_r + ris.p_v) / ris.eta_s
    rho_s, a_max = ris.rho_s, ris.a_max
    noise_gain = link.alpha_sr**2 * ris.p_v
    if kappa <= 0:
        l_bar = 0
        l1 = l2m = l2p = 0.0
    else:
        per_elem = rho_s + zeta
        l_bar = ris.l_max if per_elem == 0 else min(
            ris.l_max, math.floor(kappa / per_elem * (1 + _FLOOR_RTOL)))
        unit = rho_s + a_max**2 * zeta
        l1 = math.inf if unit == 0 else kappa / unit
        l2m, l2p = _stationary_points(kappa, zeta, rho_s, noise_gain, radar.p_w2)
    return SubproblemContext(
        p_r=p_r, kappa=kappa, zeta=zeta, rho_s=rho_s, a_max=a_max, l_max=ris.l_max,
        l_bar=int(l_bar), l1=l1, l2_minus=l2m, l2_plus=l2p,
        signal_gain=link.alpha_2**2 * config.target.sigma2_g2 * p_r,
        noise_gain=noise_gain, p_w2=radar.p_w2,
    )


def _stationary_points(kappa, zeta, rho_s, noise_gain, p_w2):
    """Roots of the derivative of the budget-limited branch of the RIS objective.

    With ``A = p_w2 zeta + noise_gain kappa`` and ``B = p_w2 zeta`` the roots
    are ``(A -+ sqrt(A B)) / (noise_gain rho_s)``. The smaller one is computed
    in the rationalized form ``sqrt(A) kappa / (rho_s (sqrt(A) + sqrt(B)))``,
    which stays finite as ``noise_gain -> 0`` (limit ``kappa / (2 rho_s)``).
    """
    if rho_s == 0:
        return math.inf, math.inf
    big_a = p_w2 * zeta + noise_gain * kappa
    big_b = p_w2 * zeta
    sa, sb = math.sqrt(big_a), math.sqrt(big_b)
    if sa + sb == 0:
        return math.inf, math.inf
    l2m = sa * kappa / (rho_s * (sa + sb))
    l2p = math.inf if noise_gain == 0 else (big_a + sa * sb) / (noise_gain * rho_s)
    return l2m, l2p


def amplitude_for_count(l, ctx):
    """Best common amplitude for ``l`` elements: saturated or budget-exhausting."""
    if l < 0 or l > ctx.l_bar:
        raise InfeasibleDesignError(f"element count {l} outside [0, {ctx.l_bar}]")
    if l == 0:
        return 1.0
    if ctx.zeta == 0:
        return ctx.a_max
    a2 = (ctx.kappa - ctx.rho_s * l) / (ctx.zeta * l)
    return max(1.0, min(ctx.a_max, math.sqrt(max(a2, 0.0))))


def ris_objective(l, ctx):
    """RIS-channel SNR of ``l`` elements at amplitude ``g(l)``."""
    if l == 0:
        return 0.0
    a2 = amplitude_for_count(l, ctx) ** 2
    return ctx.signal_gain * l * l * a2 / (ctx.p_w2 + ctx.noise_gain * l * a2)


def optimal_ris(p_r, config, ctx=None):
    """Element count and amplitude maximizing the RIS-channel SNR at radar power ``p_r``.

    The relaxed objective is non-decreasing up to ``max(L1, L2-)`` and
    non-increasing afterwards, so the integer optimum is the floor or ceiling
    of ``min(max(L1, L2-), L_bar)``. Ties go to the smaller count.
    """
    ctx = subproblem_context(p_r, config) if ctx is None else ctx
    if ctx.l_bar == 0:
        return 0, 1.0
    l_rel = min(max(ctx.l1, ctx.l2_minus), ctx.l_bar)
    candidates = sorted({0, math.floor(l_rel), min(math.ceil(l_rel), ctx.l_bar)})
    best_l, best_f = 0, 0.0
    for l in candidates:
        f = ris_objective(l, ctx)
        if f > best_f:
            best_l, best_f = l, f
    return best_l, amplitude_for_count(best_l, ctx)


def _ris_step(p_r, config, gamma):
    """Exact PD-maximizing RIS block at fixed radar power (detector-aware at L=0)."""
    ctx = subproblem_context(p_r, config)
    l, a = optimal_ris(p_r, config, ctx)
    if l and config.no_ris_detector == "single":
        on = evaluate_design(Design(p_r, l, a), config, gamma=gamma).pd
        off = evaluate_design(Design(p_r, 0, 1.0), config, gamma=gamma).pd
        if off >= on:
            return 0, 1.0
    return l, a


def _bca(config, l, a, gamma, max_sweeps, tol):
    history = []
    design = None
    converged = False
    for sweep in range(1, max_sweeps + 1):
        p_r = optimal_radar_power(l, a, config)
        incumbent = Design(p_r, l, a)
        kept = evaluate_design(incumbent, config, gamma=gamma).pd
        l, a = _ris_step(p_r, config, gamma)
        new = Design(p_r, l, a)
        pd = evaluate_design(new, config, gamma=gamma).pd
        # g(L) loses digits to cancellation in kappa - rho_s L when amplifier
        # power is tiny next to circuit power; never trade the incumbent for a
        # rounding-degraded copy of itself
        if pd < kept:
            new, pd = incumbent, kept
            l, a = incumbent.l, incumbent.amplitude
        history.append(pd)
        if design is not None and (new == design or pd - history[-2] < tol):
            design = new
            converged = True
            break
        design = new
    return design, history, converged


def _better(a, b):
    """Deterministic ordering of candidate results: PD, then fewer elements, then less power."""
    if b is None:
        return True
    (da, ha, _), (db, hb, _) = a, b
    if ha[-1] != hb[-1]:
        return ha[-1] > hb[-1]
    if da.l != db.l:
        return da.l < db.l
    return da.p_r < db.p_r


def _random_triplet(config, rng):
    """Uniformly drawn feasible (l, amplitude); infeasible draws are halved in size."""
    ris = config.ris
    l = int(rng.integers(0, ris.l_max + 1))
    a = float(rng.uniform(1.0, ris.a_max))
    while l > 0:
        try:
            optimal_radar_power(l, a, config)
            break
        except InfeasibleDesignError:
            l //= 2
    return l, (a if l else 1.0)


def _saturated_start(config, l):
    """Largest feasible common amplitude for ``l`` elements with the radar off."""
    radar, ris = config.radar, config.ris
    if l == 0:
        return 0, 1.0
    spare = radar.p_max - radar.rho_r - l * ris.rho_s
    if spare < 0:
        return None
    if ris.p_v == 0:
        return l, ris.a_max
    a2 = spare * ris.eta_s / (ris.p_v * l)
    if a2 < 1:
        return None
    return l, min(ris.a_max, math.sqrt(a2))


def _climb_element_count(config, best, gamma, max_sweeps, tol):
    """Hill-climb on the element count of the starting triplet.

    Optima where the amplitude saturates sit at isolated kinks (one per
    element count), which a scan over radar power can step over; restarting
    from neighbouring counts at full amplitude walks along those kinks.
    """
    start = _saturated_start(config, best[0].l)
    if start is not None:
        cand = _bca(config, *start, gamma, max_sweeps, tol)
        if _better(cand, best):
            best = cand
    for step in (1, -1):
        l = best[0].l
        while True:
            l += step
            if not 0 <= l <= config.ris.l_max:
                break
            start = _saturated_start(config, l)
            if start is None:
                break
            cand = _bca(config, *start, gamma, max_sweeps, tol)
            if not _better(cand, best):
                break
            best = cand
    return best


def _amplitude_at(p_r, l, config):
    """g(l) at radar power ``p_r``, or None when ``l`` elements do not fit."""
    radar, ris = config.radar, config.ris
    spare = radar.p_max - radar.rho_r - p_r / radar.eta_r - l * ris.rho_s
    per = (config.link.alpha_rts**2 * config.target.sigma2_g2 * p_r + ris.p_v) * l / ris.eta_s
    if spare < 0:
        return None
    a2 = ris.a_max**2 if per == 0 else min(ris.a_max**2, spare / per)
    return math.sqrt(a2) if a2 >= 1 else None


def _best_power_for_count(config, l, gamma, n_scan=64):
    """Radar power maximizing PD with ``l`` elements at amplitude g(l), or None."""
    try:
        p_hi = optimal_radar_power(l, 1.0, config)
    except InfeasibleDesignError:
        return None

    def neg_pd(p):
        a = _amplitude_at(p, l, config)
        return 1.0 if a is None else -evaluate_design(Design(p, l, a), config, gamma=gamma).pd

    grid = np.linspace(0.0, p_hi, n_scan + 1)
    values = [neg_pd(float(p)) for p in grid]
    i = int(np.argmin(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_scan)]
    res = minimize_scalar(neg_pd, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(p_hi, 1e-300)})
    p = float(res.x) if res.fun <= values[i] else float(grid[i])
    a = _amplitude_at(p, l, config)
    return None if a is None else (l, a)


def _refine_counts(config, best, gamma, max_sweeps, tol, radius=2):
    """Re-optimize radar power separately for element counts near the incumbent.

    The single-sweep profile over radar power has one local maximum per
    element count, and every budget-tight point is a fixed point of the
    ascent, so the profile search can settle on the wrong hump.
    """
    seen = set()
    while True:
        centre = best[0].l
        todo = [l for l in range(max(centre - radius, 1), min(centre + radius, config.ris.l_max) + 1)
                if l not in seen]
        if not todo:
            return best
        for l in todo:
            seen.add(l)
            start = _best_power_for_count(config, l, gamma)
            if start is None:
                continue
            cand = _bca(config, *start, gamma, max_sweeps, tol)
            if _better(cand, best):
                best = cand


def alternating_maximization(config, init=None, multistart=True, n_grid_starts=32,
                             n_random_starts=8, seed=0, refine=True, max_sweeps=50,
                             tol=1e-12):
    """Block-coordinate ascent on PD over (radar power) and (element count, amplitude).

    Parameters
    ----------
    config : ScenarioConfig
    init : (l, amplitude) or Design, optional
        Starting RIS configuration. Defaults to the RIS switched off.
    multistart : bool
        If False only ``init`` is used. Otherwise the ascent is also started
        from the best RIS configuration at each of ``n_grid_starts`` evenly
        spaced radar powers, from ``n_random_starts`` seeded random feasible
        triplets, and (``refine``) from the radar power maximizing the
        single-sweep PD profile near the best grid start.
    max_sweeps, tol
        A run stops when a sweep improves PD by less than ``tol`` or after
        ``max_sweeps`` sweeps (then ``converged`` is False).

    Returns
    -------
    DesignReport
        The best run; ties prefer fewer elements, then lower radar power.
    """
    radar = config.radar
    if radar.p_max <= radar.rho_r:
        raise InfeasibleDesignError("radar circuit power exhausts the budget")
    gamma = threshold_from_pfa(config.pfa)
    if init is None:
        l0, a0 = 0, 1.0
    elif isinstance(init, Design):
        l0, a0 = init.l, init.amplitude
    else:
        l0, a0 = init
    starts = [(l0, a0)]
    p_full = (radar.p_max - radar.rho_r) * radar.eta_r
    grid = np.linspace(0.0, p_full, n_grid_starts + 1)[1:] if multistart else np.array([])
    for p0 in grid:
        starts.append(_ris_step(float(p0), config, gamma))
    if multistart:
        rng = np.random.default_rng(seed)
        starts.extend(_random_triplet(config, rng) for _ in range(n_random_starts))

    best = None
    for l, a in starts:
        cand = _bca(config, l, a, gamma, max_sweeps, tol)
        if _better(cand, best):
            best = cand

    if multistart and refine and len(grid) > 1:
        def profile(p):
            l, a = _ris_step(p, config, gamma)
            return -evaluate_design(Design(p, l, a), config, gamma=gamma).pd

        values = [profile(float(p)) for p in grid]
        i = int(np.argmin(values))
        lo = grid[i - 1] if i > 0 else 0.0
        hi = grid[min(i + 1, len(grid) - 1)]
        res = minimize_scalar(profile, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * p_full})
        for p0 in (float(res.x), float(grid[i])):
            cand = _bca(config, *_ris_step(p0, config, gamma), gamma, max_sweeps, tol)
            if _better(cand, best):
                best = cand
        best = _climb_element_count(config, best, gamma, max_sweeps, tol)
        best = _refine_counts(config, best, gamma, max_sweeps, tol)

    design, history, converged = best
    return _report(design, config, iterations=len(history), converged=converged,
                   history=history, gamma=gamma)


def baseline_no_ris(config, detector=None):
    """Radar alone with the whole budget on the transmitter."""
    radar = config.radar
    design = Design((radar.p_max - radar.rho_r) * radar.eta_r, 0, 1.0)
    return _report(design, config, detector=detector)


def baseline_passive(config, detector=None):
    """Exact passive-RIS optimum by enumerating the element count.

    Passive elements cost ``P_c`` each and neither amplify nor add noise; the
    radar gets the rest of the budget.
    """
    radar = config.radar
    cfg = replace(passive_config(config),
                  no_ris_detector=config.no_ris_detector if detector is None else detector)
    p_c = cfg.ris.p_c
    budget = radar.p_max - radar.rho_r
    l_top = cfg.ris.l_max if p_c == 0 else min(cfg.ris.l_max,
                                                math.floor(budget / p_c * (1 + _FLOOR_RTOL)))
    gamma = threshold_from_pfa(cfg.pfa)
    best, best_pd = None, -1.0
    for l in range(l_top + 1):
        design = Design(max(budget - l * p_c, 0.0) * radar.eta_r, l, 1.0)
        pd = evaluate_design(design, cfg, gamma=gamma).pd
        if pd > best_pd:
            best, best_pd = design, pd
    return _report(best, cfg, passive=True, gamma=gamma)


def mismatched_design(config, sigma2_g2_design, **kwargs):
    """Design for an assumed RIS-path target strength, evaluated under the true one.

    The returned report carries the true PD and the true power draw; its
    ``budget_ok`` flag is False when the RIS amplifiers, driven by a stronger
    echo than assumed, push the total past the budget.
    """
    if not sigma2_g2_design > 0:
        raise ValueError(f"design target strength must be > 0, got {sigma2_g2_design}")
    assumed = config.with_target(config.target.sigma2_g1, sigma2_g2_design)
    planned = alternating_maximization(assumed, **kwargs)
    report = _report(planned.design, config, iterations=planned.iterations,
                     converged=planned.converged, history=planned.history)
    # planned draw is feasible up to rounding; any extra draw past the budget counts
    ok = report.consumed.total <= max(config.radar.p_max, planned.consumed.total)
    return replace(report, budget_ok=ok)
