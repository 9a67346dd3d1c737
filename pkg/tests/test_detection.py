import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from risradar.design import Design
from risradar.detection import (
    compute_snrs,
    operating_point,
    pd_single_channel,
    pd_two_channel,
    pfa_from_threshold,
    threshold_from_pfa,
)
from risradar.errors import DomainError
from risradar.scenario import LinkBudget, RadarParams, RisParams, TargetStats


def bisect_threshold(pfa):
    lo, hi = 0.0, 100.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (1 + mid) * math.exp(-mid) > pfa:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def survival_by_convolution(snr1, snr2, gamma):
    m1, m2 = 1 + snr1, 1 + snr2
    inner, _ = quad(lambda x: math.exp(-x / m1) / m1 * math.exp(-(gamma - x) / m2),
                    0, gamma, epsabs=1e-14, epsrel=1e-13, limit=200)
    return math.exp(-gamma / m1) + inner


def test_threshold_at_1e6():
    g = threshold_from_pfa(1e-6)
    assert g == pytest.approx(bisect_threshold(1e-6), rel=1e-12)
    assert g == pytest.approx(16.69, abs=5e-3)
    assert (1 + g) * math.exp(-g) == pytest.approx(1e-6, rel=1e-12)


def test_threshold_limits():
    assert pfa_from_threshold(0.0) == 1.0
    assert threshold_from_pfa(1 - 1e-12) < 1e-5


@pytest.mark.parametrize("g", [1.0, 5.0, 20.0])
def test_threshold_round_trip(g):
    assert threshold_from_pfa(pfa_from_threshold(g)) == pytest.approx(g, rel=1e-10)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
def test_threshold_domain(bad):
    with pytest.raises(DomainError):
        threshold_from_pfa(bad)


@given(st.floats(0.01, 700), st.floats(0.01, 700))
def test_pfa_strictly_decreasing(a, b):
    if a < b and pfa_from_threshold(a) > 0 and b - a > 1e-9 * b:
        assert pfa_from_threshold(a) > pfa_from_threshold(b)


def _synthetic():
    radar = RadarParams(p_max=4, rho_r=2, eta_r=1, g_tx_rt=1, g_rx_rt=1, g_rx_rs=1,
                        wavelength=1, bandwidth=1, pulse_duration=1, p_w1=1, p_w2=1)
    ris = RisParams(l_max=10, a_max=10, rho_s=0, eta_s=1, p_v=1, g_st=1, g_sr=1)
    link = LinkBudget(1, 1, 1, 1, 1, 1, 1)
    return radar, ris, link, TargetStats(1, 1)


def test_snrs_by_hand():
    radar, ris, link, target = _synthetic()
    assert compute_snrs(Design(1.0, 2, 1.0), link, target, radar, ris) == (1.0, 4 / 3)
    assert compute_snrs(Design(1.0, 0, 1.0), link, target, radar, ris)[1] == 0.0
    assert compute_snrs(Design(0.0, 2, 1.0), link, target, radar, ris) == (0.0, 0.0)


def test_noise_only_pd_equals_pfa():
    for g in (0.5, 5.0, 16.7):
        assert pd_two_channel(0, 0, g) - pfa_from_threshold(g) == 0.0


def test_pd_asymptote():
    assert pd_two_channel(1e12, 3.0, 16.7) == pytest.approx(1.0, abs=1e-10)


def test_pd_symmetric():
    assert pd_two_channel(10, 5, 16.69) == pd_two_channel(5, 10, 16.69)


def test_pd_matches_convolution_at_reference_point():
    assert pd_two_channel(10, 5, 16.69) == pytest.approx(
        survival_by_convolution(10, 5, 16.69), abs=1e-9)


@pytest.mark.parametrize("s", [0.1, 1.0, 10.0])
def test_erlang_branch_continuity(s):
    g = threshold_from_pfa(1e-3)
    assert abs(pd_two_channel(s, s + 1e-8, g) - pd_two_channel(s, s, g)) <= 1e-6


def test_near_equal_snrs_match_convolution():
    for d in (1e-7, 1e-5, 1e-3):
        assert pd_two_channel(3, 3 + d, 8.0) == pytest.approx(
            survival_by_convolution(3, 3 + d, 8.0), abs=1e-9)


def test_pd_no_underflow_at_tiny_pfa():
    g = threshold_from_pfa(1e-300)
    assert 0 < pd_two_channel(0.0, 0.0, g) <= 1.1e-300
    assert pd_two_channel(0.0, 1e-3, g) > 0


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0.1, 40), st.floats(1.01, 2.0))
def test_pd_monotone(s1, s2, g, k):
    base = pd_two_channel(s1, s2, g)
    assert pd_two_channel(s1 * k + 1e-3, s2, g) >= base
    assert pd_two_channel(s1, s2 * k + 1e-3, g) >= base
    assert pd_two_channel(s1, s2, g * k) <= base


@given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(1e-3, 700))
def test_pd_at_least_pfa_and_bounded(s1, s2, g):
    pd = pd_two_channel(s1, s2, g)
    assert pfa_from_threshold(g) * (1 - 1e-12) <= pd <= 1.0


def test_pd_strictly_increasing_on_grid():
    g = threshold_from_pfa(1e-6)
    grid = np.linspace(0, 50, 101)
    pd1 = [pd_two_channel(s, 2.0, g) for s in grid]
    pd2 = [pd_two_channel(2.0, s, g) for s in grid]
    assert np.all(np.diff(pd1) > 0) and np.all(np.diff(pd2) > 0)


def test_single_channel_basics():
    assert pd_single_channel(0.0, 1e-3) == pytest.approx(1e-3, rel=1e-14)
    assert pd_single_channel(1e9, 1e-6) == pytest.approx(1.0, abs=1e-7)
    with pytest.raises(DomainError):
        pd_single_channel(1.0, 0.0)


def test_single_channel_half_detection_snr():
    one_plus = math.log(1e-6) / math.log(0.5)
    assert one_plus == pytest.approx(19.93, abs=5e-3)
    snr = one_plus - 1
    assert 10 * math.log10(snr) == pytest.approx(12.77, abs=5e-3)
    assert pd_single_channel(snr, 1e-6) == pytest.approx(0.5, rel=1e-13)


def test_single_channel_against_monte_carlo():
    rng = np.random.default_rng(11)
    snr, pfa, n = 4.0, 1e-2, 2_000_000
    x = rng.exponential(1 + snr, n)
    p = pd_single_channel(snr, pfa)
    assert abs(np.mean(x > -math.log(pfa)) - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_operating_point_detectors():
    single = operating_point(5.0, 3.0, 1e-4, "single")
    both = operating_point(5.0, 3.0, 1e-4, "two_channel")
    assert single.pd == pd_single_channel(5.0, 1e-4)
    assert both.pd == pd_two_channel(5.0, 3.0, threshold_from_pfa(1e-4))
    with pytest.raises(DomainError):
        operating_point(1, 1, 1e-3, "triple")
