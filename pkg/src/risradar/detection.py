"""Closed-form detection laws for the two-channel square-law (GLRT) detector.

Under target absence the statistic ``|y1|^2/P1 + |y2|^2/P2`` is Erlang-2 with
unit rate, so ``PFA = (1 + gamma) exp(-gamma)``. With independent Swerling-1
responses on both channels it is the sum of two exponentials with means
``1 + snr1`` and ``1 + snr2`` (hypo-exponential).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = [
    "OperatingPoint",
    "pfa_from_threshold",
    "threshold_from_pfa",
    "compute_snrs",
    "pd_two_channel",
    "pd_single_channel",
    "operating_point",
]

# (1 + g) exp(-g) underflows double precision just past this point
GAMMA_MAX = 745.0
EQUAL_SNR_RTOL = 1e-9


@dataclass(frozen=True)
class OperatingPoint:
    snr1: float
    snr2: float
    gamma: float
    pfa: float
    pd: float


def pfa_from_threshold(gamma):
    """False-alarm probability of the two-channel statistic at threshold ``gamma``."""
    if gamma < 0:
        raise DomainError(f"threshold must be >= 0, got {gamma}")
    return (1.0 + gamma) * math.exp(-gamma)


def threshold_from_pfa(pfa, max_iter=200):
    """Invert :func:`pfa_from_threshold` by bisection followed by Newton polishing.

    Parameters
    ----------
    pfa : float
        Target false-alarm probability, strictly inside (0, 1).
    max_iter : int
        Bisection iteration cap.

    Returns
    -------
    float
        The unique ``gamma > 0`` with ``(1 + gamma) exp(-gamma) == pfa``.
    """
    if not 0.0 < pfa < 1.0:
        raise DomainError(f"pfa must lie in (0, 1), got {pfa}")
    lo, hi = 0.0, GAMMA_MAX
    if pfa_from_threshold(hi) > pfa:
        raise DomainError(f"pfa {pfa} is below the representable range")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pfa_from_threshold(mid) > pfa:
            lo = mid
        else:
            hi = mid
    gamma = 0.5 * (lo + hi)
    # Newton on log-PFA: h(g) = log(1+g) - g - log(pfa), h'(g) = -g/(1+g)
    log_pfa = math.log(pfa)
    for _ in range(3):
        if gamma <= 0:
            break
        h = math.log1p(gamma) - gamma - log_pfa
        step = h / (-gamma / (1.0 + gamma))
        candidate = gamma - step
        if not lo <= candidate <= hi:
            break
        gamma = candidate
    return gamma


def compute_snrs(design, link, target, radar, ris):
    """Per-channel SNRs of a design.

    ``design`` only needs ``p_r``, ``l`` and ``amplitude`` attributes; element
    amplitudes are uniform, so the sums reduce to ``l * a`` and ``l * a**2``.
    """
    p_r, l, a = design.p_r, design.l, design.amplitude
    snr1 = link.alpha_1**2 * target.sigma2_g1 * p_r / radar.p_w1
    if l == 0 or p_r == 0:
        return snr1, 0.0
    sum_a = l * a
    sum_a2 = l * a * a
    snr2 = (link.alpha_2**2 * target.sigma2_g2 * p_r * sum_a**2
            / (radar.p_w2 + link.alpha_sr**2 * ris.p_v * sum_a2))
    return snr1, snr2


def pd_two_channel(snr1, snr2, gamma):
    """Detection probability of the two-channel GLRT for Swerling-1 targets.

    Evaluated as ``exp(-g/m1) * (1 + m2 * (1 - exp(-d)) / (m1 - m2))`` with
    ``m1 >= m2`` the channel means and ``d = g (m1 - m2) / (m1 m2)``; this is
    algebraically the hypo-exponential survival function but has no
    cancellation as ``m1 -> m2``. Exactly-equal (to 1e-9 relative) SNRs use
    the Erlang-2 law.
    """
    if snr1 < 0 or snr2 < 0:
        raise DomainError(f"SNRs must be >= 0, got ({snr1}, {snr2})")
    if gamma <= 0:
        raise DomainError(f"threshold must be > 0, got {gamma}")
    if abs(snr1 - snr2) <= EQUAL_SNR_RTOL * (1.0 + max(snr1, snr2)):
        mu = 1.0 + 0.5 * (snr1 + snr2)
        return min(1.0, math.exp(-gamma / mu) * (1.0 + gamma / mu))
    m1, m2 = 1.0 + max(snr1, snr2), 1.0 + min(snr1, snr2)
    if math.isinf(m1):
        return 1.0
    d = gamma * (m1 - m2) / (m1 * m2)
    pd = math.exp(-gamma / m1) * (1.0 - m2 * math.expm1(-d) / (m1 - m2))
    return min(1.0, max(0.0, pd))


def pd_single_channel(snr, pfa):
    """Swerling-1 detection probability of a lone square-law channel."""
    if snr < 0:
        raise DomainError(f"snr must be >= 0, got {snr}")
    if not 0.0 < pfa < 1.0:
        raise DomainError(f"pfa must lie in (0, 1), got {pfa}")
    return math.exp(math.log(pfa) / (1.0 + snr))


def operating_point(snr1, snr2, pfa, detector="two_channel"):
    """Bundle SNRs, threshold and PD.

    ``detector="single"`` evaluates the single-channel law and ignores
    ``snr2``; ``gamma`` is then the two-channel threshold for reference.
    """
    gamma = threshold_from_pfa(pfa)
    if detector == "single":
        pd = pd_single_channel(snr1, pfa)
    elif detector == "two_channel":
        pd = pd_two_channel(snr1, snr2, gamma)
    else:
        raise DomainError(f"unknown detector {detector!r}")
    return OperatingPoint(snr1=snr1, snr2=snr2, gamma=gamma, pfa=pfa, pd=pd)
