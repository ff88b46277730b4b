"""SINR coverage, rate coverage and area sum rate.

The per-tier conditional coverage is an integral over the serving distance
of ``exp(-tau sigma^2 / S(x)) * L_I(tau / S(x); x)`` against the serving
distance density. Everything else is assembled from it.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .association import (
    association_probability,
    breakpoints,
    length_scale,
    serving_density,
    support,
)
from .interference import laplace_dl, laplace_ul
from .model import SUB6_TIERS, TIERS, Link, NetworkConfig, TierId
from .numerics import QuadratureError, QuadratureSpec, integrate_vec

__all__ = [
    "CoverageCurve",
    "TierCoverageError",
    "received_signal",
    "conditional_coverage",
    "tier_coverages",
    "VARIANTS",
    "sinr_coverage",
    "sinr_coverage_coupled_ul",
    "snr_coverage_sparse",
    "sir_coverage_dense",
    "active_densities",
    "mean_load",
    "rate_coverage",
    "tier_rate_coverages",
    "spectral_efficiency",
    "area_sum_rate",
    "config_digest",
    "DEFAULT_SINR_GRID_DB",
    "DEFAULT_RATE_GRID",
]

DEFAULT_SINR_GRID_DB = np.linspace(-10.0, 20.0, 61)
DEFAULT_RATE_GRID = np.logspace(5.0, 10.0, 41)

# mean-load constant for round-robin cells with PPP users
LOAD_FACTOR = 1.28


class TierCoverageError(QuadratureError):
    pass


@dataclass
class CoverageCurve:
    """A metric sampled over thresholds or a swept parameter."""

    x_axis: list
    analytical: list
    empirical: list | None = None   # (mean, ci99 half-width or None) per point
    link: str = ""
    metric: str = ""
    config_digest: str = ""
    meta: dict = field(default_factory=dict)


def config_digest(config: NetworkConfig) -> str:
    return hashlib.sha256(repr(config).encode()).hexdigest()[:16]


def received_signal(config: NetworkConfig, link: Link, k: TierId, x):
    """Mean received desired power S_{link,k}(x) (fading-free)."""
    t = config[k]
    x = np.asarray(x, dtype=float)
    if link is Link.DL:
        return t.dl_power * t.bs_gain * t.pl_intercept * np.power(x, -t.pl_exponent)
    return config.ue_power * t.bs_gain * t.pl_intercept * np.power(x, -(1.0 - t.pc_fraction) * t.pl_exponent)


def _laplace(config, link, rule, k, s, x, densities):
    if link is Link.DL:
        return laplace_dl(config, k, s, x, densities)
    return laplace_ul(config, k, s, x, densities, rule=rule)


def conditional_coverage(
    config: NetworkConfig,
    link: Link,
    k: TierId,
    taus,
    *,
    rule: Link | None = None,
    noise: bool = True,
    interference: bool = True,
    densities: dict | None = None,
    spec: QuadratureSpec | None = None,
):
    """P(SINR > tau | tier k) for an array of linear thresholds.

    ``rule`` is the association rule (defaults to ``link``; the downlink
    rule on the uplink gives coupled access).
    """
    k = TierId(k)
    rule = rule or link
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    a_k = association_probability(config, rule, k)
    out = np.zeros(taus.shape)
    if a_k == 0:
        return out
    zero = taus <= 0
    out[zero] = 1.0
    run = ~zero & np.isfinite(taus)
    if not run.any():
        return out
    tv = taus[run]
    sigma2 = config[k].noise_power if noise else 0.0

    def g(x):
        sig = received_signal(config, link, k, x)
        with np.errstate(divide="ignore", over="ignore"):
            s = tv[:, None] / sig[None, :]
        val = np.exp(-s * sigma2) if sigma2 > 0 else np.ones(s.shape)
        live = val > 0
        if interference and live.any():
            xb = np.broadcast_to(x[None, :], s.shape)
            lap = np.zeros(s.shape)
            lap[live] = _laplace(config, link, rule, k, s[live], xb[live], densities)
            val = val * lap
        return val * serving_density(config, rule, k, x)[None, :]

    try:
        vals, _ = integrate_vec(
            g, 0.0, support(config, k), spec or config.quadrature,
            points=breakpoints(config, rule, k), scale=length_scale(config, k),
        )
    except QuadratureError as exc:
        raise TierCoverageError(f"coverage integral failed for tier {k.label} ({link.value}): {exc}",
                                estimate=exc.estimate) from exc
    out[run] = np.clip(np.asarray(vals) / a_k, 0.0, 1.0)
    return out


def _total(config, link, taus, rule=None, **kw):
    rule = rule or link
    taus = np.asarray(taus, dtype=float)
    total = np.zeros(np.atleast_1d(taus).shape)
    for k in TIERS:
        a_k = association_probability(config, rule, k)
        if a_k > 0:
            total = total + a_k * conditional_coverage(config, link, k, taus, rule=rule, **kw)
    total = np.clip(total, 0.0, 1.0)
    return total if taus.ndim else float(total[0])


VARIANTS = ("sinr", "snr_sparse", "sir_dense")


def _variant_kwargs(config, link, rule, variant):
    if variant == "sinr":
        return {}
    if variant == "snr_sparse":
        return {"interference": False}
    if variant == "sir_dense":
        return {"noise": False, "densities": active_densities(config, link, rule)}
    raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")


def tier_coverages(config: NetworkConfig, link: Link, taus, rule: Link | None = None, variant: str = "sinr") -> dict:
    """Conditional coverage of every tier (zeros for unused tiers) under a coverage variant."""
    rule = rule or link
    kw = _variant_kwargs(config, link, rule, variant)
    return {k: conditional_coverage(config, link, k, taus, rule=rule, **kw) for k in TIERS}


def sinr_coverage(config: NetworkConfig, link: Link, tau):
    """SINR coverage probability at linear threshold(s) ``tau``."""
    return _total(config, link, tau)


def sinr_coverage_coupled_ul(config: NetworkConfig, tau):
    """Uplink SINR coverage when each UE uses its downlink serving BS."""
    return _total(config, Link.UL, tau, rule=Link.DL)


def snr_coverage_sparse(config: NetworkConfig, link: Link, tau, rule: Link | None = None):
    """Noise-limited coverage (interference dropped)."""
    return _total(config, link, tau, rule=rule, **_variant_kwargs(config, link, rule, "snr_sparse"))


def active_densities(config: NetworkConfig, link: Link, rule: Link | None = None) -> dict:
    """Interferer densities min(lambda, lambda_U A) per physical tier."""
    rule = rule or link
    lam_u = config.ue_density
    a = {k: association_probability(config, rule, k) for k in TIERS}
    return {
        1: min(config.density(TierId.M1), lam_u * a[TierId.M1]),
        2: min(config.density(TierId.S2), lam_u * a[TierId.S2]),
        3: min(config.density(TierId.L), lam_u * (a[TierId.L] + a[TierId.N])),
    }


def sir_coverage_dense(config: NetworkConfig, link: Link, tau, rule: Link | None = None):
    """Interference-limited coverage with thinned active interferer densities and no noise."""
    return _total(config, link, tau, rule=rule, **_variant_kwargs(config, link, rule or link, "sir_dense"))


def mean_load(config: NetworkConfig, link: Link, k: TierId, rule: Link | None = None) -> float:
    """Approximate mean number of UEs sharing the serving BS (typical UE included)."""
    rule = rule or link
    lam = config.density(k)
    a = association_probability(config, rule, k)
    if lam == 0 or a == 0:
        return 1.0
    return 1.0 + LOAD_FACTOR * a * config.ue_density / lam


def tier_rate_coverages(config: NetworkConfig, link: Link, rho, rule: Link | None = None) -> dict:
    """Per-tier conditional rate coverage C_k(2^(rho N_k / W_k) - 1) for an array of rates."""
    rule = rule or link
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    out = {}
    for k in TIERS:
        exponent = rho * mean_load(config, link, k, rule) / config[k].bandwidth
        with np.errstate(over="ignore"):
            taus = np.expm1(exponent * math.log(2.0))
        out[k] = conditional_coverage(config, link, k, taus, rule=rule)
    return out


def rate_coverage(config: NetworkConfig, link: Link, rho, rule: Link | None = None):
    """P(W log2(1 + SINR) / N > rho) for rate threshold(s) ``rho`` in bit/s."""
    rule = rule or link
    scalar = np.ndim(rho) == 0
    per_tier = tier_rate_coverages(config, link, rho, rule)
    total = sum(association_probability(config, rule, k) * per_tier[k] for k in TIERS)
    total = np.clip(total, 0.0, 1.0)
    return float(total[0]) if scalar else total


def _se_upper(config, link, k, rule, floor=1e-6):
    """Spectral efficiency beyond which coverage falls below ``floor`` of its rho=0 value."""
    rho = 4.0
    while rho < 200.0:
        c = conditional_coverage(config, link, k, [2.0**rho - 1.0], rule=rule)[0]
        if c < floor:
            return rho
        rho *= 1.5
    return rho


def spectral_efficiency(config: NetworkConfig, link: Link, k: TierId, rule: Link | None = None) -> float:
    """E[log2(1 + SINR) | tier k] in bit/s/Hz, as the integral of coverage over rho."""
    rule = rule or link
    if association_probability(config, rule, k) == 0:
        return 0.0
    upper = _se_upper(config, link, k, rule)
    spec = QuadratureSpec(abs_tol=1e-7, rel_tol=1e-6)

    def f(rho):
        return conditional_coverage(config, link, k, np.expm1(rho * math.log(2.0)), rule=rule)

    val, _ = integrate_vec(f, 0.0, upper, spec)
    return float(val)


def area_sum_rate(config: NetworkConfig, link: Link, rule: Link | None = None, per_tier: bool = False):
    """Area sum rate in bit/s/m^2.

    The mmWave LoS/NLoS terms share the physical density in proportion to
    their association probabilities.
    """
    rule = rule or link
    a = {k: association_probability(config, rule, k) for k in TIERS}
    mm_total = a[TierId.L] + a[TierId.N]
    parts = {}
    for k in TIERS:
        lam = config.density(k)
        if k in SUB6_TIERS:
            gamma = lam
        else:
            gamma = lam * a[k] / mm_total if mm_total > 0 else 0.0
        w = config[k].bandwidth
        if gamma == 0 or w == 0 or a[k] == 0:
            parts[k] = 0.0
            continue
        parts[k] = gamma * w * spectral_efficiency(config, link, k, rule)
    total = float(sum(parts.values()))
    return (total, parts) if per_tier else total

