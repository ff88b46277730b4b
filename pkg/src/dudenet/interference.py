"""Laplace transforms of the downlink and uplink interference.

Interference from a PPP outside an exclusion radius, with unit-mean
Rayleigh fading, reduces to the kernel ``int_x^inf r / (1 + r^a / beta) dr``
(:func:`kernel_v`) or its blockage-weighted variants (:func:`kernel_w`).

All evaluators broadcast over arrays of ``s`` and serving distance ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .association import association_probability, breakpoints, length_scale, serving_density, transfer
from .model import MM_TIERS, SUB6_TIERS, BlockageModel, Link, NetworkConfig, TierId, effective_signal_constant
from .numerics import gauss_2f1, integrate_vec

__all__ = ["kernel_v", "kernel_w", "laplace_dl", "laplace_ul", "LaplaceEvaluator", "DivergentKernel"]


class DivergentKernel(ValueError):
    pass


def _v_unit(y, alpha):
    """int_y^inf t / (1 + t^alpha) dt for alpha > 2."""
    y = np.asarray(y, dtype=float)
    limit = math.pi / (alpha * math.sin(2.0 * math.pi / alpha))
    out = np.full(y.shape, limit)
    with np.errstate(over="ignore", divide="ignore"):
        zmag = np.power(y, -alpha)
    ok = (y > 0) & (zmag < 1e250)
    if ok.any():
        yy = y[ok]
        b = 1.0 - 2.0 / alpha
        out[ok] = np.power(yy, 2.0 - alpha) / (alpha - 2.0) * gauss_2f1(b, b + 1.0, -zmag[ok])
    return out


def _h_unit(y, alpha):
    """int_0^y t / (1 + t^alpha) dt, any alpha > 0."""
    y = np.asarray(y, dtype=float)
    if alpha == 2.0:
        return 0.5 * np.log1p(y * y)
    if alpha == 1.0:
        return y - np.log1p(y)
    b = 2.0 / alpha
    if b.is_integer():
        # rare exponents where the connection formula degenerates
        return np.vectorize(lambda v: _quad_h(v, alpha))(y)
    with np.errstate(over="ignore"):
        z = -np.power(y, alpha)
    out = np.zeros(y.shape)
    big = ~np.isfinite(z)
    if alpha > 2.0:
        out[big] = math.pi / (alpha * math.sin(2.0 * math.pi / alpha))
    else:
        out[big] = np.inf
    fin = ~big
    out[fin] = 0.5 * y[fin] ** 2 * gauss_2f1(b, b + 1.0, z[fin])
    return out


def _quad_h(v, alpha):
    if v <= 0:
        return 0.0
    val, _ = integrate_vec(lambda t: v * v * t / (1.0 + (v * t) ** alpha), 0.0, 1.0)
    return val


def _finite_unit(a, b, alpha):
    """int_a^b t / (1 + t^alpha) dt for 0 <= a <= b (b may be inf when alpha > 2)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    out = np.zeros(a.shape)
    if alpha > 2.0:
        tail = a >= 1.0
        if tail.any():
            vb = np.zeros(a.shape)
            fb = np.isfinite(b) & tail
            vb[fb] = _v_unit(b[fb], alpha)
            out[tail] = _v_unit(a[tail], alpha) - vb[tail]
        head = ~tail
        if head.any():
            hb = np.empty(int(head.sum()))
            bh = b[head]
            inf_b = ~np.isfinite(bh)
            hb[inf_b] = math.pi / (alpha * math.sin(2.0 * math.pi / alpha))
            hb[~inf_b] = _h_unit(bh[~inf_b], alpha)
            out[head] = hb - _h_unit(a[head], alpha)
    else:
        if np.any(~np.isfinite(b)):
            raise DivergentKernel(f"divergent tail for path-loss exponent {alpha} <= 2")
        if alpha == 2.0:
            out = 0.5 * (np.log1p(b * b) - np.log1p(a * a))
        else:
            out = _h_unit(b, alpha) - _h_unit(a, alpha)
    return np.maximum(out, 0.0)


def _scaled(fn, x, alpha, beta, *extra):
    """Apply the scaling r = beta^(1/alpha) t to a unit-beta kernel."""
    x, beta = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(beta, dtype=float))
    out = np.zeros(x.shape)
    pos = beta > 0
    if pos.any():
        scale = np.power(beta[pos], 1.0 / alpha)
        args = [x[pos] / scale] + [np.broadcast_to(e, x.shape)[pos] / scale for e in extra]
        out[pos] = scale * scale * fn(*args)
    return out


def kernel_v(x, alpha, beta):
    """V(x, alpha, beta) = int_x^inf r / (1 + r^alpha / beta) dr via the 2F1 closed form."""
    if not alpha > 2:
        raise DivergentKernel(f"divergent tail for path-loss exponent {alpha} <= 2")
    out = _scaled(lambda y: _v_unit(y, alpha), x, alpha, beta)
    return out if np.ndim(out) else float(out)


def _finite_kernel(a, b, alpha, beta):
    return _scaled(lambda ya, yb: _finite_unit(ya, yb, alpha), a, alpha, beta, b)


def kernel_w(kind, x, alpha, beta, blockage: BlockageModel):
    """Blockage-weighted kernels W_L and W_N.

    ``kind`` is ``"L"`` or ``"N"`` (or the matching :class:`TierId`).
    W_L integrates ``p_L`` times the kernel over ``[x, R_B)``; W_N adds the
    NLoS part inside the ball and the full kernel beyond it.
    """
    kind = kind.label if isinstance(kind, TierId) else str(kind).upper()
    rb = blockage.los_radius
    pl = blockage.los_fraction
    x = np.asarray(x, dtype=float)
    inner_lo = np.minimum(x, rb)
    if kind == "L":
        out = pl * _finite_kernel(inner_lo, rb, alpha, beta)
    elif kind == "N":
        if not alpha > 2:
            raise DivergentKernel(f"divergent tail for path-loss exponent {alpha} <= 2")
        out = (1.0 - pl) * _finite_kernel(inner_lo, rb, alpha, beta) + kernel_v(np.maximum(x, rb), alpha, beta)
    else:
        raise ValueError(f"kind must be L or N, got {kind!r}")
    out = np.asarray(out)
    return out if out.ndim else float(out)


def _density(config, physical, densities):
    if densities and physical in densities:
        return densities[physical]
    return config[{1: TierId.M1, 2: TierId.S2, 3: TierId.L}[physical]].density


def _mm_exponent(config, rule, k, s, x, link, densities):
    lam3 = _density(config, 3, densities)
    if lam3 == 0:
        return np.zeros(np.broadcast(s, x).shape)
    total = 0.0
    for p_j, g_j in config.antenna.mixture():
        if p_j == 0:
            continue
        for i in MM_TIERS:
            t_i = effective_signal_constant(config, i, link)
            excl = transfer(config, rule, k, i, x)
            total = total + p_j * kernel_w(i, excl, config[i].pl_exponent, s * t_i * g_j, config.blockage)
    return 2.0 * math.pi * lam3 * total


def laplace_dl(config: NetworkConfig, k: TierId, s, x, densities=None):
    """Laplace transform of downlink interference given tier k at distance x.

    ``densities`` optionally maps physical tier (1, 2, 3) to an active-BS
    density that replaces lambda in the interference exponent only.
    """
    k = TierId(k)
    s, x = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(x, dtype=float))
    if k.is_mmwave:
        expo = _mm_exponent(config, Link.DL, k, s, x, Link.DL, densities)
    else:
        expo = np.zeros(s.shape)
        for i in SUB6_TIERS:
            lam = _density(config, i.physical, densities)
            if lam == 0:
                continue
            t_i = effective_signal_constant(config, i, Link.DL)
            expo = expo + 2.0 * math.pi * lam * kernel_v(transfer(config, Link.DL, k, i, x), config[i].pl_exponent, s * t_i)
    out = np.exp(-expo)
    return out if out.ndim else float(out)


def _ul_sub6_exponent(config, rule, k, i, s, x, lam, spec):
    """2 pi lam int_0^inf V(max{Psi_ki(x), Psi_ik(u)}, a, s T' u^(eps a)) f_X(u) du."""
    ti = config[i]
    alpha = ti.pl_exponent
    fpc = ti.pc_fraction * alpha
    t_i = effective_signal_constant(config, i, Link.UL)
    a_i = association_probability(config, rule, i)
    if a_i < 1e-12:
        return np.zeros(s.shape)
    excl = transfer(config, rule, k, i, x).ravel()
    # below u* the exclusion is set by the serving link, beyond it by the interferer's own association
    ustar = transfer(config, rule, k, i, excl)
    ell = length_scale(config, i)
    coef = 2.0 * math.pi * lam / a_i
    s_f = s.ravel()[:, None] * t_i
    # kinks of the interferer's distance density sit at fixed u; clip them into both ranges
    edges = [0.0, *breakpoints(config, rule, i), math.inf]
    segments = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        segments.append((np.minimum(lo, ustar), np.minimum(hi, ustar), True))
        segments.append((np.maximum(lo, ustar), np.maximum(hi, ustar), False))

    def g(t):
        tt = t[None, :]
        total = 0.0
        for lo, hi, inner in segments:
            lo_c = lo[:, None]
            if np.isinf(hi).any():
                u = lo_c + ell * tt / (1.0 - tt)
                jac = ell / (1.0 - tt) ** 2
            else:
                width = (hi - lo)[:, None]
                if not width.any():
                    continue
                u = lo_c + width * tt
                jac = width
            r0 = excl[:, None] if inner else transfer(config, rule, i, k, u)
            v = kernel_v(r0, alpha, s_f * np.power(u, fpc))
            total = total + v * serving_density(config, rule, i, u) * jac
        return coef * total

    vals, _ = integrate_vec(g, 0.0, 1.0, spec)
    return np.asarray(vals).reshape(s.shape)


def laplace_ul(config: NetworkConfig, k: TierId, s, x, densities=None, rule: Link = Link.UL):
    """Laplace transform of uplink interference given tier k at distance x.

    ``rule`` selects the association rule of all UEs; ``Link.DL`` gives the
    coupled-access variant.
    """
    k = TierId(k)
    s, x = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(x, dtype=float))
    if k.is_mmwave:
        expo = _mm_exponent(config, rule, k, s, x, Link.UL, densities)
    else:
        expo = np.zeros(s.shape)
        spec = config.quadrature.relaxed(1e-8)
        active = s > 0
        if active.any():
            for i in SUB6_TIERS:
                lam = _density(config, i.physical, densities)
                if lam == 0:
                    continue
                part = np.zeros(s.shape)
                part[active] = _ul_sub6_exponent(config, rule, k, i, s[active], x[active], lam, spec)
                expo = expo + part
    out = np.exp(-expo)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LaplaceEvaluator:
    """Interference Laplace transform for one (link, serving tier) pair."""

    config: NetworkConfig
    link: Link
    tier: TierId
    rule: Link = None
    densities: tuple = ()

    def __call__(self, s, x):
        dens = dict(self.densities) or None
        if self.link is Link.DL:
            return laplace_dl(self.config, self.tier, s, x, dens)
        return laplace_ul(self.config, self.tier, s, x, dens, rule=self.rule or Link.UL)
