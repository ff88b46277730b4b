"""INI layer for network configs and sweep specifications.

Config files use engineering units (dBm, dB, dBi, BS/km^2, MHz, degrees).
Sections ``[global]``, ``[tier_1]``, ``[tier_2]``, ``[tier_3]``,
``[tier_L]`` and ``[tier_N]`` are all required. ``[tier_3]`` holds the
values shared by the two mmWave views and ``[tier_L]``/``[tier_N]`` add
their path-loss law (any shared key may be overridden there).
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import AntennaPattern, BlockageModel, Link, NetworkConfig, TierId, TierParams
from .numerics import QuadratureSpec, db_to_linear, dbm_to_watt, linear_to_db, watt_to_dbm

__all__ = [
    "ConfigError",
    "SweepSpec",
    "MCSpec",
    "METRICS",
    "read_ini",
    "load_config",
    "config_from_ini",
    "dump_config",
    "apply_setting",
    "load_sweep",
    "summary",
]

METRICS = ("association", "decoupled_fraction", "sinr_coverage", "rate_coverage", "asr")
TIER_SECTIONS = ("tier_1", "tier_2", "tier_3", "tier_L", "tier_N")
GLOBAL_KEYS = ("lambda_u", "p_u", "g_main", "g_side", "theta_b", "p_los", "r_b", "noise_figure")
TIER_KEYS = ("lambda", "p_dl", "c", "alpha", "b_dl", "b_ul", "epsilon", "w", "g", "noise_figure")


class ConfigError(ValueError):
    pass


def read_ini(source) -> configparser.ConfigParser:
    """Parse a path or INI text, keeping key case."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "[" not in source):
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"no such file: {path}")
        text = path.read_text()
    else:
        text = source
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparsable config: {exc}") from exc
    return cp


def _float(cp, section, key, default=None):
    if cp.has_option(section, key):
        raw = cp.get(section, key)
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from None
    if default is None:
        raise ConfigError(f"[{section}] missing key {key!r}")
    return default


def _check_keys(cp, section, allowed):
    unknown = sorted(set(cp.options(section)) - set(allowed))
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {', '.join(unknown)}")


def config_from_ini(cp: configparser.ConfigParser) -> NetworkConfig:
    for sec in ("global", *TIER_SECTIONS):
        if not cp.has_section(sec):
            raise ConfigError(f"missing section [{sec}]")
    _check_keys(cp, "global", GLOBAL_KEYS)
    for sec in TIER_SECTIONS:
        _check_keys(cp, sec, TIER_KEYS)
    g = lambda key, default=None: _float(cp, "global", key, default)  # noqa: E731
    g_main = g("g_main")
    nf = g("noise_figure", 10.0)

    def tier(sections, mm):
        def get(key, default=None):
            for sec in sections:
                if cp.has_option(sec, key):
                    return _float(cp, sec, key)
            if default is None:
                raise ConfigError(f"[{sections[-1]}] missing key {key!r}")
            return default

        return TierParams(
            density=get("lambda") * 1e-6,
            dl_power=dbm_to_watt(get("p_dl")),
            pl_intercept=db_to_linear(get("c")),
            pl_exponent=get("alpha"),
            dl_bias=db_to_linear(get("b_dl", 0.0)),
            ul_bias=db_to_linear(get("b_ul", 0.0)),
            pc_fraction=get("epsilon", 0.0),
            bandwidth=get("w") * 1e6,
            bs_gain=db_to_linear(get("g", g_main if mm else 0.0)),
            noise_figure_db=get("noise_figure", nf),
        )

    tiers = (
        tier(("tier_1",), False),
        tier(("tier_2",), False),
        tier(("tier_L", "tier_3"), True),
        tier(("tier_N", "tier_3"), True),
    )
    quad = QuadratureSpec()
    if cp.has_section("quadrature"):
        _check_keys(cp, "quadrature", ("abs_tol", "rel_tol", "max_subdivisions"))
        quad = QuadratureSpec(
            abs_tol=_float(cp, "quadrature", "abs_tol", quad.abs_tol),
            rel_tol=_float(cp, "quadrature", "rel_tol", quad.rel_tol),
            max_subdivisions=int(_float(cp, "quadrature", "max_subdivisions", quad.max_subdivisions)),
        )
    return NetworkConfig(
        tiers=tiers,
        antenna=AntennaPattern(db_to_linear(g_main), db_to_linear(g("g_side")), math.radians(g("theta_b"))),
        blockage=BlockageModel(g("p_los"), g("r_b")),
        ue_density=g("lambda_u") * 1e-6,
        ue_power=dbm_to_watt(g("p_u")),
        quadrature=quad,
    )


def load_config(source) -> NetworkConfig:
    return config_from_ini(read_ini(source))


def _fmt(x) -> str:
    # shortest repr that round-trips the double
    return repr(float(x))


def dump_config(config: NetworkConfig) -> str:
    """Serialize to the INI layout read by :func:`load_config`."""
    a, b = config.antenna, config.blockage
    lines = ["[global]"]
    lines += [
        f"lambda_u = {_fmt(config.ue_density * 1e6)}",
        f"p_u = {_fmt(watt_to_dbm(config.ue_power))}",
        f"g_main = {_fmt(linear_to_db(a.main_gain))}",
        f"g_side = {_fmt(linear_to_db(a.side_gain))}",
        f"theta_b = {_fmt(math.degrees(a.beamwidth))}",
        f"p_los = {_fmt(b.los_fraction)}",
        f"r_b = {_fmt(b.los_radius)}",
    ]

    def tier_lines(t: TierParams, keys):
        vals = {
            "lambda": t.density * 1e6, "p_dl": watt_to_dbm(t.dl_power), "c": linear_to_db(t.pl_intercept),
            "alpha": t.pl_exponent, "b_dl": linear_to_db(t.dl_bias), "b_ul": linear_to_db(t.ul_bias),
            "epsilon": t.pc_fraction, "w": t.bandwidth / 1e6, "g": linear_to_db(t.bs_gain),
            "noise_figure": t.noise_figure_db,
        }
        return [f"{k} = {_fmt(vals[k])}" for k in keys]

    everything = TIER_KEYS
    for sec, k in (("tier_1", TierId.M1), ("tier_2", TierId.S2)):
        lines += ["", f"[{sec}]"] + tier_lines(config[k], everything)
    lines += ["", "[tier_3]"]
    lines += ["", "[tier_L]"] + tier_lines(config[TierId.L], everything)
    lines += ["", "[tier_N]"] + tier_lines(config[TierId.N], everything)
    q = config.quadrature
    lines += ["", "[quadrature]", f"abs_tol = {_fmt(q.abs_tol)}", f"rel_tol = {_fmt(q.rel_tol)}",
              f"max_subdivisions = {q.max_subdivisions}"]
    return "\n".join(lines) + "\n"


def apply_setting(cp: configparser.ConfigParser, path: str, value: float):
    """Set ``section.key`` on a parsed config (``tier_3`` keys also clear L/N overrides)."""
    if "." not in path:
        raise ConfigError(f"parameter path must look like section.key, got {path!r}")
    section, key = path.split(".", 1)
    allowed = GLOBAL_KEYS if section == "global" else TIER_KEYS if section in TIER_SECTIONS else ()
    if key not in allowed:
        raise ConfigError(f"unknown parameter {path!r}")
    if not cp.has_section(section):
        cp.add_section(section)
    cp.set(section, key, _fmt(value))
    if section == "tier_3":
        for sec in ("tier_L", "tier_N"):
            if cp.has_section(sec):
                cp.remove_option(sec, key)


@dataclass(frozen=True)
class MCSpec:
    n_drops: int = 0
    seed: int = 0


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep and what to report.

    ``parameter`` is ``section.key`` or ``eta`` (mmWave share of a fixed
    small-cell density ``total``).
    """

    parameter: str
    values: tuple
    metrics: tuple
    links: tuple
    coupled: bool = False
    total: float | None = None
    sinr_thresholds_db: tuple = tuple(np.linspace(-10.0, 20.0, 61))
    rate_thresholds: tuple = tuple(np.logspace(5.0, 10.0, 41))
    sinr_variant: str = "sinr"
    overrides: tuple = ()
    mc: MCSpec = field(default_factory=MCSpec)

    def configure(self, base: configparser.ConfigParser, value: float) -> NetworkConfig:
        """Config at one sweep value, on a copy of ``base``."""
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        cp.read_dict(base)
        for path, v in self.overrides:
            apply_setting(cp, path, v)
        if self.parameter == "eta":
            apply_setting(cp, "tier_2.lambda", self.total * (1.0 - value))
            apply_setting(cp, "tier_3.lambda", self.total * value)
        else:
            apply_setting(cp, self.parameter, value)
        return config_from_ini(cp)


def _floats(text: str, what: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace("\n", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{what}: expected a comma-separated list of numbers") from None


def _grid(sec, prefix: str, what: str):
    """Explicit list under ``<prefix>`` or a start/stop/count/scale range."""
    if prefix in sec:
        return _floats(sec[prefix], what)
    keys = [f"{prefix}_{k}" for k in ("start", "stop", "count")]
    if all(k in sec for k in keys):
        start, stop = float(sec[keys[0]]), float(sec[keys[1]])
        count = int(sec[keys[2]])
        scale = sec.get(f"{prefix}_scale", "lin").strip().lower()
        if scale == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError(f"{what}: log grids need positive bounds")
            return tuple(np.logspace(math.log10(start), math.log10(stop), count))
        if scale != "lin":
            raise ConfigError(f"{what}: scale must be lin or log")
        return tuple(np.linspace(start, stop, count))
    return None


def load_sweep(source) -> SweepSpec:
    cp = read_ini(source)
    if not cp.has_section("sweep"):
        raise ConfigError("missing section [sweep]")
    sec = cp["sweep"]
    parameter = sec.get("parameter", "").strip()
    if not parameter:
        raise ConfigError("[sweep] missing key 'parameter'")
    values = _grid(sec, "values", "values")
    if not values:
        raise ConfigError("no sweep values")
    metrics = tuple(m.strip() for m in sec.get("metrics", "association").split(",") if m.strip())
    bad = [m for m in metrics if m not in METRICS]
    if bad or not metrics:
        raise ConfigError(f"unknown metrics {bad}; choose from {', '.join(METRICS)}")
    link = sec.get("link", "both").strip().upper()
    links = {"DL": (Link.DL,), "UL": (Link.UL,), "BOTH": (Link.DL, Link.UL)}.get(link)
    if links is None:
        raise ConfigError("link must be DL, UL or both")
    total = None
    if parameter == "eta":
        if "total" not in sec:
            raise ConfigError("eta sweeps need 'total' (fixed lambda_2 + lambda_3 in BS/km^2)")
        total = float(sec["total"])
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ConfigError("eta values must lie in [0, 1]")
    variant = sec.get("sinr_variant", "sinr").strip().lower()
    if variant not in ("sinr", "snr_sparse", "sir_dense"):
        raise ConfigError("sinr_variant must be sinr, snr_sparse or sir_dense")
    kwargs = {}
    tau = _grid(sec, "thresholds_db", "thresholds_db")
    if tau:
        kwargs["sinr_thresholds_db"] = tau
    rates = _grid(sec, "rates", "rates")
    if rates:
        kwargs["rate_thresholds"] = rates
    overrides = ()
    if cp.has_section("overrides"):
        overrides = tuple((k, float(v)) for k, v in cp["overrides"].items())
    mc = MCSpec()
    if cp.has_section("mc"):
        mc = MCSpec(int(cp["mc"].get("n_drops", "0")), int(cp["mc"].get("seed", "0")))
    coupled = sec.getboolean("coupled", fallback=False)
    return SweepSpec(parameter, values, metrics, links, coupled, total, sinr_variant=variant,
                     overrides=overrides, mc=mc, **kwargs)


def summary(config: NetworkConfig) -> str:
    """Parameter table in the engineering units of the config file."""
    out = io.StringIO()
    a, b = config.antenna, config.blockage
    out.write(f"UE density        {config.ue_density * 1e6:g} /km^2\n")
    out.write(f"UE power          {watt_to_dbm(config.ue_power):g} dBm\n")
    out.write(f"antenna           G_M {linear_to_db(a.main_gain):g} dBi, G_m {linear_to_db(a.side_gain):g} dBi, "
              f"beamwidth {math.degrees(a.beamwidth):g} deg\n")
    out.write(f"blockage          p_L {b.los_fraction:g}, R_B {b.los_radius:g} m\n")
    out.write(f"{'tier':<6}{'lambda/km2':>11}{'P_DL dBm':>10}{'C dB':>8}{'alpha':>7}{'B dB':>7}"
              f"{'Bu dB':>7}{'eps':>6}{'W MHz':>8}{'G dBi':>7}{'noise dBm':>11}\n")
    for k in TierId:
        t = config[k]
        out.write(f"{k.label:<6}{t.density * 1e6:>11g}{watt_to_dbm(t.dl_power):>10g}"
                  f"{linear_to_db(t.pl_intercept):>8g}{t.pl_exponent:>7g}{linear_to_db(t.dl_bias):>7g}"
                  f"{linear_to_db(t.ul_bias):>7g}{t.pc_fraction:>6g}{t.bandwidth / 1e6:>8g}"
                  f"{linear_to_db(t.bs_gain):>7g}{watt_to_dbm(t.noise_power):>11.2f}\n")
    return out.getvalue()
