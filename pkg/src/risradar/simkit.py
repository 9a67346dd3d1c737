"""Monte Carlo validation of the detection chain.

Trials are simulated at the matched-filter sample level: one complex sample on
the beam toward the target and one on the beam toward the RIS. Random numbers
come from counter-based Philox streams, one per block of ``BLOCK_SIZE``
trials keyed by ``(seed, block index)``. Hit counts are therefore identical
for any number of workers and any completion order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .detection import threshold_from_pfa
from .errors import DomainError

__all__ = [
    "BLOCK_SIZE",
    "McEstimate",
    "ElementLayout",
    "CoherenceReport",
    "block_rng",
    "complex_normal",
    "simulate_statistic",
    "estimate_detection_mc",
    "element_layout",
    "element_level_coherence_check",
]

BLOCK_SIZE = 2**16
HYPOTHESES = ("target-present", "target-absent")


@dataclass(frozen=True)
class McEstimate:
    trials: int
    hits: int
    seed: int

    def __post_init__(self):
        if not 0 <= self.hits <= self.trials:
            raise ValueError(f"hits {self.hits} outside [0, {self.trials}]")

    @property
    def p_hat(self):
        return self.hits / self.trials

    @property
    def ci_halfwidth(self):
        p = self.p_hat
        return 3.0 * math.sqrt(p * (1.0 - p) / self.trials)

    def agrees_with(self, p, nsigma=3.0):
        """True if ``p_hat`` is within ``nsigma`` binomial deviations of ``p``."""
        return abs(self.p_hat - p) <= nsigma * math.sqrt(p * (1.0 - p) / self.trials)


def block_rng(seed, block):
    """Independent Philox generator for one trial block."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng, size, var=1.0):
    """CN(0, var) samples: real and imaginary parts each of variance var / 2."""
    x = rng.standard_normal((2,) + tuple(np.atleast_1d(size)))
    return math.sqrt(var / 2.0) * (x[0] + 1j * x[1])


def _channel_terms(design, config, amplitudes):
    link, radar, ris = config.link, config.radar, config.ris
    a = design.amplitudes() if amplitudes is None else np.asarray(amplitudes, dtype=float)
    sum_a, sum_a2 = float(a.sum()), float((a * a).sum())
    root_p = math.sqrt(design.p_r)
    gain1 = link.alpha_1 * root_p
    gain2 = link.alpha_2 * root_p * sum_a
    var_z2 = radar.p_w2 + link.alpha_sr**2 * ris.p_v * sum_a2
    return gain1, gain2, var_z2


def _block_statistic(seed, block, n, design, config, present, amplitudes):
    rng = block_rng(seed, block)
    gain1, gain2, var_z2 = _channel_terms(design, config, amplitudes)
    # always draw the target responses so both hypotheses share noise samples
    u1 = complex_normal(rng, n)
    u2 = complex_normal(rng, n)
    w1 = complex_normal(rng, n, config.radar.p_w1)
    z2 = complex_normal(rng, n, var_z2)
    if present:
        y1 = math.sqrt(config.target.sigma2_g1) * gain1 * u1 + w1
        y2 = math.sqrt(config.target.sigma2_g2) * gain2 * u2 + z2
    else:
        y1, y2 = w1, z2
    return np.abs(y1) ** 2 / config.radar.p_w1 + np.abs(y2) ** 2 / var_z2


def _blocks(trials):
    full, rest = divmod(trials, BLOCK_SIZE)
    sizes = [BLOCK_SIZE] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def _check(hypothesis, trials):
    if hypothesis not in HYPOTHESES:
        raise DomainError(f"hypothesis must be one of {HYPOTHESES}, got {hypothesis!r}")
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")


def simulate_statistic(design, config, hypothesis, trials, seed, amplitudes=None):
    """GLRT statistic for every trial, in trial order."""
    _check(hypothesis, trials)
    present = hypothesis == "target-present"
    return np.concatenate([
        _block_statistic(seed, b, n, design, config, present, amplitudes)
        for b, n in _blocks(trials)
    ])


def estimate_detection_mc(design, config, hypothesis="target-present", trials=None, seed=None,
                          gamma=None, pfa=None, amplitudes=None, workers=1):
    """Empirical detection (or false-alarm) rate of the two-channel GLRT.

    Parameters
    ----------
    design : Design
        Radar power, element count and amplitude; ``amplitudes`` may override
        the per-element values.
    hypothesis : {"target-present", "target-absent"}
    trials, seed : int, optional
        Default to the config's ``mc`` section.
    gamma, pfa : float, optional
        Threshold, given directly or through a false-alarm level. Defaults to
        the config's PFA.
    workers : int
        Threads used over trial blocks; does not affect the result.
    """
    trials = config.mc_trials if trials is None else trials
    seed = config.mc_seed if seed is None else seed
    _check(hypothesis, trials)
    if gamma is None:
        gamma = threshold_from_pfa(config.pfa if pfa is None else pfa)
    present = hypothesis == "target-present"

    def count(block):
        b, n = block
        stat = _block_statistic(seed, b, n, design, config, present, amplitudes)
        return int(np.count_nonzero(stat > gamma))

    blocks = _blocks(trials)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(count, blocks))
    else:
        hits = sum(map(count, blocks))
    return McEstimate(trials=trials, hits=hits, seed=seed)


@dataclass(frozen=True)
class ElementLayout:
    """Uniform linear array of RIS elements with per-element phase terms (radians)."""

    positions: np.ndarray
    beta_t: np.ndarray
    beta_r: np.ndarray
    phi: np.ndarray

    @property
    def l(self):
        return len(self.positions)

    def coherent_factor(self, amplitudes):
        a = np.asarray(amplitudes, dtype=float)
        return complex(np.sum(a * np.exp(1j * (self.beta_t + self.phi + self.beta_r))))


def element_layout(config, l, phases="aligned", rng=None):
    """Place ``l`` elements at half-wavelength spacing centred on the RIS position.

    ``phases="aligned"`` applies ``phi = -(beta_t + beta_r)``; ``"random"``
    draws them uniformly from ``rng``.
    """
    lam = config.radar.wavelength
    radar_pos, target_pos, ris_pos = config.geometry.positions()
    theta = math.radians(config.ris.orientation_deg)
    axis = np.array([math.cos(theta), math.sin(theta)])
    offsets = (np.arange(l) - (l - 1) / 2.0) * (lam / 2.0)
    pos = ris_pos + offsets[:, None] * axis
    k = 2.0 * math.pi / lam
    two_pi = 2.0 * math.pi
    beta_t = np.mod(k * np.hypot(*(pos - target_pos).T), two_pi)
    beta_r = np.mod(k * np.hypot(*(pos - radar_pos).T), two_pi)
    if phases == "aligned":
        phi = np.mod(-(beta_t + beta_r), two_pi)
    elif phases == "random":
        rng = np.random.default_rng() if rng is None else rng
        phi = rng.uniform(0.0, two_pi, l)
    else:
        raise DomainError(f"phases must be 'aligned' or 'random', got {phases!r}")
    return ElementLayout(pos, beta_t, beta_r, phi)


@dataclass(frozen=True)
class CoherenceReport:
    sum_a: float
    factor: complex
    residue: float
    noise_var_expected: float
    noise_var_aligned: float
    noise_var_random: float
    random_factor: complex
    trials: int

    @property
    def rel_se(self):
        # |X|^2 of a circular Gaussian is exponential: its sample mean has relative SE 1/sqrt(n)
        return 1.0 / math.sqrt(self.trials)

    @property
    def aligned_ok(self):
        return self.residue <= 1e-10 * self.sum_a

    def variance_ok(self, which, nse=5.0):
        v = self.noise_var_aligned if which == "aligned" else self.noise_var_random
        return abs(v / self.noise_var_expected - 1.0) <= nse * self.rel_se

    @property
    def passed(self):
        return (self.aligned_ok and self.variance_ok("aligned") and self.variance_ok("random")
                and abs(self.random_factor) <= self.sum_a * (1 + 1e-12))


def _noise_variance(layout, a, p_v, trials, rng, chunk=2**14):
    """Sample second moment of sum_l a_l v_l exp(i(phi_l + beta_lr))."""
    steer = a * np.exp(1j * (layout.phi + layout.beta_r))
    acc, done = 0.0, 0
    while done < trials:
        n = min(chunk, trials - done)
        v = complex_normal(rng, (n, layout.l), p_v)
        acc += float(np.sum(np.abs(v @ steer) ** 2))
        done += n
    return acc / trials


def element_level_coherence_check(layout, amplitudes, trials=100_000, seed=0, p_v=1.0):
    """Check that aligned phases make every element's echo add coherently.

    Returns the residue of the coherent factor against ``sum(a)`` and the
    dynamic-noise power measured with the aligned phases and with uniformly
    random phases (same amplitudes and geometry), both against
    ``p_v * sum(a**2)``.
    """
    a = np.asarray(amplitudes, dtype=float)
    if a.shape != (layout.l,):
        raise DomainError(f"expected {layout.l} amplitudes, got shape {a.shape}")
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    sum_a = float(a.sum())
    factor = layout.coherent_factor(a)
    rng_phase = block_rng(seed, 0)
    scrambled = ElementLayout(layout.positions, layout.beta_t, layout.beta_r,
                              rng_phase.uniform(0.0, 2.0 * math.pi, layout.l))
    var_aligned = _noise_variance(layout, a, p_v, trials, block_rng(seed, 1))
    var_random = _noise_variance(scrambled, a, p_v, trials, block_rng(seed, 2))
    return CoherenceReport(
        sum_a=sum_a,
        factor=factor,
        residue=abs(factor - sum_a),
        noise_var_expected=p_v * float(np.sum(a * a)),
        noise_var_aligned=var_aligned,
        noise_var_random=var_random,
        random_factor=scrambled.coherent_factor(a),
        trials=trials,
    )
