"""Scenario configuration, geometry and link-budget coefficients.

Everything is stored in linear SI units. Decibel variants of a field are
accepted only at parse time: ``<name>_db`` for dimensionless power ratios,
``<name>_dbm`` for powers. The amplitude limit ``a_max_db`` is an amplitude
ratio, so it converts with ``10 ** (x / 20)`` (equivalently it is the dB value
of ``a_max ** 2``).
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConflictError, DegenerateGeometryError, MissingFieldError

__all__ = [
    "RadarParams",
    "RisParams",
    "Geometry",
    "TargetStats",
    "LinkBudget",
    "ScenarioConfig",
    "db_to_lin",
    "lin_to_db",
    "dbm_to_watt",
    "watt_to_dbm",
    "parse_config",
    "load_config",
    "config_from_dict",
    "derive_geometry",
    "geometry_from_distances",
    "link_budget",
    "sigma2_for_snr0",
    "snr0_from_sigma2",
    "apply_overrides",
    "config_hash",
    "BUILTIN_CONFIGS",
]

BUILTIN_CONFIGS = {"table1.json": Path(__file__).parent / "data" / "table1.json"}

NO_RIS_DETECTORS = ("single", "two_channel")


def db_to_lin(x_db):
    if np.ndim(x_db):
        return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(x) if np.ndim(x) else 10.0 * math.log10(x)


def dbm_to_watt(x_dbm):
    return db_to_lin(x_dbm) * 1e-3


def watt_to_dbm(x):
    return lin_to_db(x) + 30.0


@dataclass(frozen=True)
class RadarParams:
    """Radar transmitter/receiver parameters (linear SI units)."""

    p_max: float
    rho_r: float
    eta_r: float
    g_tx_rt: float
    g_rx_rt: float
    g_rx_rs: float
    wavelength: float
    bandwidth: float
    pulse_duration: float
    p_w1: float
    p_w2: float

    def __post_init__(self):
        for name in (
            "p_max", "rho_r", "eta_r", "g_tx_rt", "g_rx_rt", "g_rx_rs",
            "wavelength", "bandwidth", "pulse_duration", "p_w1", "p_w2",
        ):
            _require_positive(f"radar.{name}", getattr(self, name))
        if self.eta_r > 1:
            raise ConfigError(f"radar.eta_r must be in (0, 1], got {self.eta_r}")
        if self.p_max <= self.rho_r:
            raise ConfigError(
                f"radar.p_max ({self.p_max} W) must exceed radar.rho_r ({self.rho_r} W)"
            )

    @property
    def time_bandwidth(self):
        return self.bandwidth * self.pulse_duration


@dataclass(frozen=True)
class RisParams:
    """Active RIS hardware parameters.

    ``p_c`` is the switch/control share of ``rho_s``; it is the per-element
    cost of the passive baseline.
    """

    l_max: int
    a_max: float
    rho_s: float
    eta_s: float
    p_v: float
    g_st: float
    g_sr: float
    p_c: float | None = None
    orientation_deg: float = 0.0

    def __post_init__(self):
        if isinstance(self.l_max, bool) or int(self.l_max) != self.l_max or self.l_max < 0:
            raise ConfigError(f"ris.l_max must be a non-negative integer, got {self.l_max}")
        object.__setattr__(self, "l_max", int(self.l_max))
        if not self.a_max >= 1:
            raise ConfigError(f"ris.a_max must be >= 1, got {self.a_max}")
        if not self.rho_s >= 0:
            raise ConfigError(f"ris.rho_s must be >= 0, got {self.rho_s}")
        if not self.p_v >= 0:
            raise ConfigError(f"ris.p_v must be >= 0, got {self.p_v}")
        _require_positive("ris.eta_s", self.eta_s)
        if self.eta_s > 1:
            raise ConfigError(f"ris.eta_s must be in (0, 1], got {self.eta_s}")
        _require_positive("ris.g_st", self.g_st)
        _require_positive("ris.g_sr", self.g_sr)
        if self.p_c is None:
            object.__setattr__(self, "p_c", self.rho_s)
        elif not 0 <= self.p_c <= self.rho_s * (1 + 1e-12):
            raise ConfigError(f"ris.p_c must lie in [0, rho_s], got {self.p_c}")


@dataclass(frozen=True)
class Geometry:
    radar_pos: tuple | None
    target_pos: tuple | None
    ris_pos: tuple | None
    d_rt: float
    d_ts: float
    d_sr: float

    def __post_init__(self):
        for name in ("d_rt", "d_ts", "d_sr"):
            if not getattr(self, name) > 0:
                raise DegenerateGeometryError(f"distance {name} must be > 0")

    def positions(self):
        """Planar positions (radar, target, RIS); synthesized from distances if needed."""
        if self.radar_pos is not None:
            return (np.asarray(self.radar_pos, float), np.asarray(self.target_pos, float),
                    np.asarray(self.ris_pos, float))
        # radar at origin, target on +x, RIS below the axis
        x = (self.d_rt**2 + self.d_sr**2 - self.d_ts**2) / (2 * self.d_rt)
        y2 = self.d_sr**2 - x**2
        if y2 < -1e-9 * self.d_sr**2:
            raise DegenerateGeometryError("distances violate the triangle inequality")
        return (np.zeros(2), np.array([self.d_rt, 0.0]), np.array([x, -math.sqrt(max(y2, 0.0))]))


@dataclass(frozen=True)
class TargetStats:
    sigma2_g1: float
    sigma2_g2: float

    def __post_init__(self):
        _require_positive("target.sigma2_g1", self.sigma2_g1)
        _require_positive("target.sigma2_g2", self.sigma2_g2)


@dataclass(frozen=True)
class LinkBudget:
    alpha_rt: float
    alpha_tr: float
    alpha_ts: float
    alpha_sr: float
    alpha_1: float
    alpha_2: float
    alpha_rts: float


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete, validated scenario.

    ``raw`` keeps the effective configuration document (after overrides) so
    reports can be traced back to their inputs.
    """

    radar: RadarParams
    ris: RisParams
    geometry: Geometry
    target: TargetStats
    pfa: float
    no_ris_detector: str = "single"
    mc_trials: int = 1_000_000
    mc_seed: int = 0
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not 0 < self.pfa < 1:
            raise ConfigError(f"detection.pfa must lie in (0, 1), got {self.pfa}")
        if self.no_ris_detector not in NO_RIS_DETECTORS:
            raise ConfigError(
                f"detection.no_ris_detector must be one of {NO_RIS_DETECTORS}, "
                f"got {self.no_ris_detector!r}"
            )
        if self.mc_trials < 1:
            raise ConfigError(f"mc.trials must be >= 1, got {self.mc_trials}")

    @property
    def link(self):
        return link_budget(self.radar, self.ris, self.geometry)

    def with_target(self, sigma2_g1, sigma2_g2=None):
        sigma2_g2 = sigma2_g1 if sigma2_g2 is None else sigma2_g2
        return replace(self, target=TargetStats(sigma2_g1, sigma2_g2))

    def with_ris(self, **changes):
        return replace(self, ris=replace(self.ris, **changes))

    def with_radar(self, **changes):
        return replace(self, radar=replace(self.radar, **changes))


def _require_positive(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and value > 0
            and math.isfinite(value)):
        raise ConfigError(f"{name} must be a finite positive number, got {value!r}")


def _section(doc, name, required=True):
    sec = doc.get(name)
    if sec is None:
        if required:
            raise MissingFieldError(name)
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{name}' must be an object")
    return sec


def _number(sec, key, where):
    value = sec[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {value!r}")
    return float(value)


def _quantity(sec, where, name, unit, required=True, default=None):
    """Read ``name`` given either linearly or as a dB/dBm variant."""
    suffix = {"ratio": "_db", "power": "_dbm", "amplitude": "_db"}[unit]
    present = [k for k in (name, name + suffix) if k in sec]
    if len(present) > 1:
        raise ConflictError(f"{where}.{name}", present)
    if not present:
        if required:
            raise MissingFieldError(f"{where}.{name}")
        return default
    key = present[0]
    value = _number(sec, key, where)
    if key == name:
        return value
    if unit == "ratio":
        return 10.0 ** (value / 10.0)
    if unit == "power":
        return 10.0 ** ((value - 30.0) / 10.0)
    return 10.0 ** (value / 20.0)


def _point(sec, key, where):
    value = sec[key]
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise ConfigError(f"{where}.{key} must be a 2-element list of numbers")
    return (float(value[0]), float(value[1]))


def derive_geometry(radar_pos, target_pos, ris_pos):
    """Geometry from three planar points; raises on coincident points."""
    pts = [np.asarray(p, dtype=float) for p in (radar_pos, target_pos, ris_pos)]
    for p in pts:
        if p.shape != (2,):
            raise ConfigError("positions must be 2-D points")
    r, t, s = pts
    d_rt = float(np.hypot(*(t - r)))
    d_ts = float(np.hypot(*(s - t)))
    d_sr = float(np.hypot(*(r - s)))
    names = {"d_rt": d_rt, "d_ts": d_ts, "d_sr": d_sr}
    for name, d in names.items():
        if d == 0:
            raise DegenerateGeometryError(f"coincident points: {name} = 0")
    return Geometry(tuple(r), tuple(t), tuple(s), d_rt, d_ts, d_sr)


def geometry_from_distances(d_rt, d_ts, d_sr):
    return Geometry(None, None, None, float(d_rt), float(d_ts), float(d_sr))


def link_budget(radar, ris, geo):
    lam = radar.wavelength
    four_pi = 4.0 * math.pi
    alpha_rt = math.sqrt(radar.g_tx_rt / four_pi) / geo.d_rt
    alpha_tr = lam * math.sqrt(radar.g_rx_rt) / (four_pi * geo.d_rt)
    alpha_ts = lam * math.sqrt(ris.g_st) / (four_pi * geo.d_ts)
    alpha_sr = lam * math.sqrt(ris.g_sr * radar.g_rx_rs) / (four_pi * geo.d_sr)
    mf_gain = math.sqrt(radar.time_bandwidth)
    return LinkBudget(
        alpha_rt=alpha_rt,
        alpha_tr=alpha_tr,
        alpha_ts=alpha_ts,
        alpha_sr=alpha_sr,
        alpha_1=alpha_rt * alpha_tr * mf_gain,
        alpha_2=alpha_rt * alpha_ts * alpha_sr * mf_gain,
        alpha_rts=alpha_rt * alpha_ts,
    )


def sigma2_for_snr0(snr0_db, radar, link):
    """Target strength giving reference SNR ``snr0_db`` to the radar alone at full budget."""
    p_full = (radar.p_max - radar.rho_r) * radar.eta_r
    return 10.0 ** (snr0_db / 10.0) * radar.p_w1 / (link.alpha_1**2 * p_full)


def snr0_from_sigma2(sigma2_g1, radar, link):
    p_full = (radar.p_max - radar.rho_r) * radar.eta_r
    return lin_to_db(link.alpha_1**2 * sigma2_g1 * p_full / radar.p_w1)


def _parse_radar(doc):
    sec = _section(doc, "radar")
    w = "radar"
    return RadarParams(
        p_max=_quantity(sec, w, "p_max", "power"),
        rho_r=_quantity(sec, w, "rho_r", "power"),
        eta_r=_number(sec, "eta_r", w) if "eta_r" in sec else _missing("radar.eta_r"),
        g_tx_rt=_quantity(sec, w, "g_tx_rt", "ratio"),
        g_rx_rt=_quantity(sec, w, "g_rx_rt", "ratio"),
        g_rx_rs=_quantity(sec, w, "g_rx_rs", "ratio"),
        wavelength=_number(sec, "wavelength", w) if "wavelength" in sec else _missing("radar.wavelength"),
        bandwidth=_number(sec, "bandwidth", w) if "bandwidth" in sec else _missing("radar.bandwidth"),
        pulse_duration=(_number(sec, "pulse_duration", w) if "pulse_duration" in sec
                        else _missing("radar.pulse_duration")),
        p_w1=_quantity(sec, w, "p_w1", "power"),
        p_w2=_quantity(sec, w, "p_w2", "power"),
    )


def _missing(name):
    raise MissingFieldError(name)


def _parse_ris(doc):
    sec = _section(doc, "ris")
    w = "ris"
    if "l_max" not in sec:
        raise MissingFieldError("ris.l_max")
    l_max = sec["l_max"]
    if isinstance(l_max, bool) or not isinstance(l_max, (int, float)):
        raise ConfigError(f"ris.l_max must be an integer, got {l_max!r}")
    rho_s = _quantity(sec, w, "rho_s", "power", required=False)
    p_c = _quantity(sec, w, "p_c", "power", required=False)
    p_dc = _quantity(sec, w, "p_dc", "power", required=False)
    if rho_s is not None and p_dc is not None:
        raise ConflictError("ris.rho_s", ["rho_s", "p_dc"])
    if rho_s is None:
        if p_c is None:
            raise MissingFieldError("ris.p_c")
        if p_dc is None:
            raise MissingFieldError("ris.p_dc")
        rho_s = p_c + p_dc
    return RisParams(
        l_max=l_max,
        a_max=_quantity(sec, w, "a_max", "amplitude"),
        rho_s=rho_s,
        eta_s=_number(sec, "eta_s", w) if "eta_s" in sec else _missing("ris.eta_s"),
        p_v=_quantity(sec, w, "p_v", "power"),
        g_st=_quantity(sec, w, "g_st", "ratio"),
        g_sr=_quantity(sec, w, "g_sr", "ratio"),
        p_c=p_c,
        orientation_deg=_number(sec, "orientation_deg", w) if "orientation_deg" in sec else 0.0,
    )


def _parse_geometry(doc):
    sec = _section(doc, "geometry")
    pos_keys = [k for k in ("radar_pos", "target_pos", "ris_pos") if k in sec]
    dist_keys = [k for k in ("d_rt", "d_ts", "d_sr") if k in sec]
    if pos_keys and dist_keys:
        raise ConflictError("geometry", pos_keys + dist_keys)
    if dist_keys:
        for k in ("d_rt", "d_ts", "d_sr"):
            if k not in sec:
                raise MissingFieldError(f"geometry.{k}")
        return geometry_from_distances(*(_number(sec, k, "geometry") for k in ("d_rt", "d_ts", "d_sr")))
    radar_pos = _point(sec, "radar_pos", "geometry") if "radar_pos" in sec else (0.0, 0.0)
    for k in ("target_pos", "ris_pos"):
        if k not in sec:
            raise MissingFieldError(f"geometry.{k}")
    return derive_geometry(radar_pos, _point(sec, "target_pos", "geometry"),
                           _point(sec, "ris_pos", "geometry"))


def _parse_target(doc, radar, ris, geo):
    sec = _section(doc, "target")
    s1 = _quantity(sec, "target", "sigma2_g1", "ratio", required=False)
    s2 = _quantity(sec, "target", "sigma2_g2", "ratio", required=False)
    if "snr0_db" in sec:
        if s1 is not None:
            raise ConflictError("target.sigma2_g1", ["sigma2_g1", "snr0_db"])
        s1 = sigma2_for_snr0(_number(sec, "snr0_db", "target"), radar, link_budget(radar, ris, geo))
        if s2 is None:
            s2 = s1
    if s1 is None:
        raise MissingFieldError("target.sigma2_g1")
    if s2 is None:
        raise MissingFieldError("target.sigma2_g2")
    return TargetStats(s1, s2)


def config_from_dict(doc):
    """Build a validated :class:`ScenarioConfig` from a parsed document."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration document must be a JSON object")
    radar = _parse_radar(doc)
    ris = _parse_ris(doc)
    geo = _parse_geometry(doc)
    target = _parse_target(doc, radar, ris, geo)
    det = _section(doc, "detection")
    if "pfa" not in det:
        raise MissingFieldError("detection.pfa")
    mc = _section(doc, "mc", required=False)
    trials = mc.get("trials", 1_000_000)
    seed = mc.get("seed", 0)
    if isinstance(trials, bool) or not isinstance(trials, int):
        raise ConfigError(f"mc.trials must be an integer, got {trials!r}")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"mc.seed must be a non-negative integer, got {seed!r}")
    return ScenarioConfig(
        radar=radar,
        ris=ris,
        geometry=geo,
        target=target,
        pfa=_number(det, "pfa", "detection"),
        no_ris_detector=det.get("no_ris_detector", "single"),
        mc_trials=trials,
        mc_seed=seed,
        raw=copy.deepcopy(doc),
    )


def parse_config(text, overrides=None):
    """Parse a JSON scenario document, apply ``key=value`` overrides, validate."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from None
    if overrides:
        doc = apply_overrides(doc, overrides)
    return config_from_dict(doc)


def load_config(path, overrides=None):
    path = Path(path)
    if not path.exists() and path.name in BUILTIN_CONFIGS and len(path.parts) == 1:
        path = BUILTIN_CONFIGS[path.name]
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc.strerror}") from None
    return parse_config(text, overrides)


# variants that must be dropped when an override sets a sibling spelling
_VARIANT_SUFFIXES = ("", "_db", "_dbm")


def apply_overrides(doc, overrides):
    """Return a copy of ``doc`` with dotted ``section.key=value`` overrides applied.

    Values are decoded as JSON when possible, otherwise kept as strings.
    Setting one unit variant of a field removes the others, so
    ``ris.a_max_db=40`` replaces a linear ``a_max``.
    """
    doc = copy.deepcopy(doc)
    items = overrides.items() if isinstance(overrides, dict) else overrides
    for item in items:
        if isinstance(item, str):
            if "=" not in item:
                raise ConfigError(f"override '{item}' must look like section.key=value")
            key, value = item.split("=", 1)
        else:
            key, value = item
        if isinstance(value, str):
            try:
                value = json.loads(value)
            except json.JSONDecodeError:
                pass
        parts = key.strip().split(".")
        if len(parts) < 2 or not all(parts):
            raise ConfigError(f"override key '{key}' must look like section.key")
        node = doc
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override '{key}' descends into a non-object")
        leaf = parts[-1]
        base = leaf
        for suf in ("_dbm", "_db"):
            if leaf.endswith(suf):
                base = leaf[: -len(suf)]
                break
        for suf in _VARIANT_SUFFIXES:
            node.pop(base + suf, None)
        if parts[0] == "target" and leaf in ("snr0_db", "sigma2_g1", "sigma2_g1_db"):
            for k in ("snr0_db", "sigma2_g1", "sigma2_g1_db", "sigma2_g2", "sigma2_g2_db"):
                node.pop(k, None)
        if parts[0] == "ris" and base in ("rho_s", "p_dc"):
            for k in ("rho_s", "rho_s_dbm", "p_dc", "p_dc_dbm"):
                node.pop(k, None)
        node[leaf] = value
    return doc


def config_hash(config_or_doc):
    """Short SHA-256 digest of the canonical JSON of the effective configuration."""
    doc = config_or_doc.raw if isinstance(config_or_doc, ScenarioConfig) else config_or_doc
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
