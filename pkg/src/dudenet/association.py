"""Nearest-BS distance laws and biased-received-power association.

The association rule of a link compares ``B T r^-alpha`` (downlink) or
``B' T' r^-(1-eps) alpha`` (uplink) across tiers. Tier ``k`` wins at
distance ``r`` when no BS of tier ``i`` lies closer than the transfer
image ``Psi_{k,i}(r)``; with independent PPPs this gives one-dimensional
integrals over the serving distance.

Functions taking a ``rule`` argument use the association rule of that
link. Coupled uplink access is the uplink evaluated under the downlink
rule.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .model import MM_TIERS, TIERS, Link, NetworkConfig, TierId, effective_signal_constant
from .numerics import integrate, integrate_vec

__all__ = [
    "DistanceLaw",
    "AssociationReport",
    "TierNeverSelected",
    "distance_law",
    "transfer_coefficients",
    "transfer",
    "ddtf",
    "udtf",
    "association_probability",
    "association_probabilities",
    "serving_density",
    "conditional_distance_pdf",
    "conditional_distance_cdf",
    "decoupled_fraction",
    "association_report",
    "breakpoints",
    "length_scale",
]


class TierNeverSelected(ValueError):
    pass


def _exponent_measure(config: NetworkConfig, k: TierId, r):
    """Mean number of tier-k BSs within distance r (the exponent in the void probability)."""
    r = np.asarray(r, dtype=float)
    lam = config.density(k)
    if k in (TierId.M1, TierId.S2):
        return math.pi * lam * r * r
    pl = config.blockage.los_fraction
    rb = config.blockage.los_radius
    inner = np.minimum(r, rb)
    if k == TierId.L:
        return math.pi * lam * pl * inner * inner
    outer = np.maximum(r * r - rb * rb, 0.0)
    return math.pi * lam * ((1.0 - pl) * inner * inner + outer)


def _ccdf(config, k, r):
    if config.density(k) == 0:
        return np.ones_like(np.asarray(r, dtype=float))
    return np.exp(-_exponent_measure(config, k, r))


def _pdf(config, k, r):
    r = np.asarray(r, dtype=float)
    lam = config.density(k)
    if lam == 0:
        return np.zeros_like(r)
    if k in (TierId.M1, TierId.S2):
        weight = 1.0
    elif k == TierId.L:
        weight = config.blockage.p_los(r)
    else:
        weight = config.blockage.p_nlos(r)
    return 2.0 * math.pi * lam * weight * r * np.exp(-_exponent_measure(config, k, r))


@dataclass(frozen=True)
class DistanceLaw:
    """Law of the distance from the typical UE to its nearest tier-k BS.

    The LoS law is defective: with probability ``defect`` no LoS BS exists.
    """

    config: NetworkConfig
    tier: TierId

    def cdf(self, r):
        return 1.0 - _ccdf(self.config, self.tier, r)

    def ccdf(self, r):
        return _ccdf(self.config, self.tier, r)

    def pdf(self, r):
        return _pdf(self.config, self.tier, r)

    @property
    def defect(self) -> float:
        if self.tier == TierId.L and self.config.density(self.tier) > 0:
            return float(_ccdf(self.config, self.tier, self.config.blockage.los_radius))
        return 1.0 if self.config.density(self.tier) == 0 else 0.0


def distance_law(config: NetworkConfig, k: TierId) -> DistanceLaw:
    return DistanceLaw(config, TierId(k))


def transfer_coefficients(config: NetworkConfig, rule: Link, k: TierId, i: TierId):
    """(coef, power) with ``Psi_{k,i}(r) = coef * r**power``."""
    tk, ti = config[k], config[i]
    if rule is Link.DL:
        num = ti.dl_bias * effective_signal_constant(config, i, Link.DL)
        den = tk.dl_bias * effective_signal_constant(config, k, Link.DL)
        ek = tk.pl_exponent
        ei = ti.pl_exponent
    else:
        num = ti.ul_bias * effective_signal_constant(config, i, Link.UL)
        den = tk.ul_bias * effective_signal_constant(config, k, Link.UL)
        ek = (1.0 - tk.pc_fraction) * tk.pl_exponent
        ei = (1.0 - ti.pc_fraction) * ti.pl_exponent
    return (num / den) ** (1.0 / ei), ek / ei


def transfer(config: NetworkConfig, rule: Link, k: TierId, i: TierId, r):
    if k == i:
        return np.asarray(r, dtype=float) if np.ndim(r) else float(r)
    coef, power = transfer_coefficients(config, rule, k, i)
    return coef * np.power(r, power)


def ddtf(config: NetworkConfig, k: TierId, i: TierId, r):
    """Downlink distance transfer function phi_{k,i}(r)."""
    return transfer(config, Link.DL, k, i, r)


def udtf(config: NetworkConfig, k: TierId, i: TierId, r):
    """Uplink distance transfer function varphi_{k,i}(r)."""
    return transfer(config, Link.UL, k, i, r)


def length_scale(config: NetworkConfig, k: TierId) -> float:
    """Typical nearest-BS distance of tier ``k``, used to scale the tail map."""
    lam = config.density(k)
    return 1.0 / math.sqrt(math.pi * lam) if lam > 0 else 100.0


def support(config: NetworkConfig, k: TierId) -> float:
    return config.blockage.los_radius if k == TierId.L else math.inf


def breakpoints(config: NetworkConfig, rule: Link, k: TierId, extra_rules=()):
    """Serving distances of tier k at which the integrand has a kink or jump."""
    rb = config.blockage.los_radius
    pts = set()
    if k.is_mmwave:
        pts.add(rb)
    if config.density(TierId.L) > 0:
        for rl in (rule, *extra_rules):
            for i in MM_TIERS:
                if i != k:
                    pts.add(float(transfer(config, rl, i, k, rb)))
    for rl in extra_rules:
        # crossing of the two transfer images used by the decoupled fraction
        for i in TIERS:
            if i == k or config.density(i) == 0:
                continue
            c1, p1 = transfer_coefficients(config, rule, k, i)
            c2, p2 = transfer_coefficients(config, rl, k, i)
            if p1 != p2 and c1 != c2:
                log_x = math.log(c2 / c1) / (p1 - p2)
                if abs(log_x) < 700.0:
                    pts.add(math.exp(log_x))
    return sorted(p for p in pts if 0 < p < support(config, k))


def serving_density(config: NetworkConfig, rule: Link, k: TierId, x):
    """Joint density of (R_k = x, tier k wins): f_{R_k}(x) prod_i ccdf_i(Psi_{k,i}(x))."""
    x = np.asarray(x, dtype=float)
    out = _pdf(config, k, x)
    for i in TIERS:
        if i == k or config.density(i) == 0:
            continue
        out = out * _ccdf(config, i, transfer(config, rule, k, i, x))
    return out


def _integrate_over_serving(config, rule, k, f, extra_rules=()):
    upper = support(config, k)
    return integrate(
        f, 0.0, upper, config.quadrature,
        points=breakpoints(config, rule, k, extra_rules),
        scale=length_scale(config, k),
    )


@functools.lru_cache(maxsize=512)
def association_probability(config: NetworkConfig, rule: Link, k: TierId) -> float:
    """Probability that the typical UE associates with tier ``k`` under ``rule``."""
    k = TierId(k)
    if config.density(k) == 0:
        return 0.0
    return _integrate_over_serving(config, rule, k, lambda x: serving_density(config, rule, k, x))


def association_probabilities(config: NetworkConfig, rule: Link) -> dict:
    return {k: association_probability(config, rule, k) for k in TIERS}


def conditional_distance_pdf(config: NetworkConfig, rule: Link, k: TierId, x):
    """PDF of the serving distance given association with tier ``k``."""
    a = association_probability(config, rule, k)
    if a < 1e-12:
        raise TierNeverSelected(f"tier {TierId(k).label} never selected under {rule.value} rule (A={a:.3g})")
    return serving_density(config, rule, k, x) / a


def conditional_distance_cdf(config: NetworkConfig, rule: Link, k: TierId, x):
    """CDF of the serving distance given tier ``k``, evaluated on an array of distances."""
    a = association_probability(config, rule, k)
    if a < 1e-12:
        raise TierNeverSelected(f"tier {TierId(k).label} never selected under {rule.value} rule")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xs = np.minimum(x, support(config, k))
    # integrate each upper limit through a common [0, 1] map
    pts = breakpoints(config, rule, k)

    def f(t):
        u = xs[:, None] * t[None, :]
        return serving_density(config, rule, k, u) * xs[:, None]

    vals, _ = integrate_vec(f, 0.0, 1.0, config.quadrature,
                            points=sorted({p / s for s in xs if s > 0 for p in pts if p < s}))
    return np.clip(np.asarray(vals) / a, 0.0, 1.0)


def decoupled_fraction(config: NetworkConfig) -> float:
    """Fraction of UEs whose downlink and uplink serving BSs differ."""
    same = 0.0
    for k in TIERS:
        if config.density(k) == 0:
            continue

        def f(r, k=k):
            r = np.asarray(r, dtype=float)
            out = _pdf(config, k, r)
            for i in TIERS:
                if i == k or config.density(i) == 0:
                    continue
                excl = np.maximum(transfer(config, Link.DL, k, i, r), transfer(config, Link.UL, k, i, r))
                out = out * _ccdf(config, i, excl)
            return out

        same += _integrate_over_serving(config, Link.DL, k, f, extra_rules=(Link.UL,))
    return float(min(max(1.0 - same, 0.0), 1.0))


@dataclass(frozen=True)
class AssociationReport:
    probs: dict             # (Link, TierId) -> probability
    decoupled_fraction: float

    def total(self, link: Link) -> float:
        return sum(p for (l, _), p in self.probs.items() if l is link)


def association_report(config: NetworkConfig) -> AssociationReport:
    probs = {(link, k): association_probability(config, link, k) for link in Link for k in TIERS}
    return AssociationReport(probs, decoupled_fraction(config))
