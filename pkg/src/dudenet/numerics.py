"""Quadrature, special functions and unit conversions.

All integrands in the analytical model are improper integrals over link
distances. :func:`integrate_vec` is a globally adaptive 21-point
Gauss-Kronrod scheme that evaluates every pending panel in a single
vectorized call, which lets callers batch many related integrals (one per
threshold, one per outer node, ...) through one adaptive run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "HypergeometricDomainError",
    "integrate",
    "integrate_vec",
    "gauss_2f1",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watt",
    "watt_to_dbm",
]


# QUADPACK qk21 tables (positive half, descending; last entry is the centre).
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208174519520,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

# Full 21-node rule on [-1, 1].
KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss 10-point weights sit on the odd Kronrod positions.
GAUSS_WEIGHTS = np.zeros(21)
GAUSS_WEIGHTS[1:10:2] = _WG
GAUSS_WEIGHTS[11:20:2] = _WG[::-1]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for the adaptive integrator.

    ``infinite_tail_transform`` maps ``[a, inf)`` onto ``[0, 1)`` with
    ``x = a + scale * t / (1 - t)`` instead of truncating the range.
    """

    abs_tol: float = 1e-9
    rel_tol: float = 1e-7
    max_subdivisions: int = 20000
    infinite_tail_transform: bool = True

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    def relaxed(self, abs_tol: float = 1e-8) -> "QuadratureSpec":
        """Looser copy used for inner integrals of nested quadrature."""
        return QuadratureSpec(
            abs_tol=max(abs_tol, self.abs_tol),
            rel_tol=max(self.rel_tol, 1e-6),
            max_subdivisions=self.max_subdivisions,
            infinite_tail_transform=self.infinite_tail_transform,
        )


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed; ``estimate`` holds the partial result."""

    def __init__(self, message, estimate=None, error=None, abscissa=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.abscissa = abscissa


class HypergeometricDomainError(ValueError):
    pass


def _panel_rule(values, half):
    """Kronrod estimate and QUADPACK-style error for panels.

    ``values`` has shape (m, P, 21); ``half`` has shape (P,).
    """
    k = values @ KRONROD_WEIGHTS
    g = values @ GAUSS_WEIGHTS
    mean = k / 2.0
    resasc = np.abs(values - mean[..., None]) @ KRONROD_WEIGHTS
    diff = np.abs(k - g)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * diff / resasc) ** 1.5), diff)
    return k * half, np.abs(scaled * half)


def integrate_vec(f, lower, upper, spec=None, points=None, scale=1.0):
    """Integrate a batch of integrands sharing one domain.

    ``f`` maps a 1-D array of abscissae of length n to an array of shape
    (m, n), or (n,) for a single integrand. Refinement continues until
    every component meets ``max(abs_tol, rel_tol * |I_j|)``.

    ``points`` are interior breakpoints (kinks, jumps) placed as panel
    edges. For an infinite ``upper`` the tail transform with length
    ``scale`` is applied; breakpoints are mapped accordingly.

    Returns ``(values, errors)`` as arrays of shape (m,) (or scalars for a
    single integrand).
    """
    spec = spec or QuadratureSpec()
    lower = float(lower)
    upper = float(upper)
    if not lower < upper:
        raise ValueError(f"need lower < upper, got [{lower}, {upper}]")
    if math.isinf(lower):
        raise ValueError("lower limit must be finite")

    infinite = math.isinf(upper)
    if infinite:
        if not spec.infinite_tail_transform:
            raise ValueError("infinite upper limit needs infinite_tail_transform")
        scale = float(scale)
        if not scale > 0:
            raise ValueError("scale must be positive")

        def g(t):
            one_m = 1.0 - t
            x = lower + scale * t / one_m
            return np.asarray(f(x), dtype=float) * (scale / one_m**2)

        a, b = 0.0, 1.0
        mapped = [(p - lower) / (p - lower + scale) for p in (points or ()) if p > lower and np.isfinite(p)]
        # breakpoints far out in the tail would collapse onto t = 1
        mapped = [t for t in mapped if t < 1.0 - 1e-9]
    else:
        g = lambda x: np.asarray(f(x), dtype=float)  # noqa: E731
        a, b = lower, upper
        mapped = [p for p in (points or ()) if lower < p < upper]

    edges = np.unique(np.concatenate([[a], np.asarray(mapped, dtype=float), [b]]))
    lo = edges[:-1]
    hi = edges[1:]

    scalar_out = None

    def evaluate(lo, hi):
        nonlocal scalar_out
        centre = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        x = (centre[:, None] + half[:, None] * KRONROD_NODES[None, :]).ravel()
        y = g(x)
        if scalar_out is None:
            scalar_out = y.ndim == 1
        y = np.atleast_2d(y)
        if y.shape[-1] != x.size:
            raise ValueError("integrand returned wrong number of values")
        bad = ~np.isfinite(y)
        if bad.any():
            col = int(np.argwhere(bad)[0][-1])
            xa = float(x[col])
            if infinite:
                xa = lower + scale * xa / (1.0 - xa)
            raise QuadratureError(f"integrand is not finite at x={xa!r}", abscissa=xa)
        y = y.reshape(y.shape[0], lo.size, 21)
        return _panel_rule(y, half)

    val, err = evaluate(lo, hi)
    n_sub = lo.size
    while True:
        total = val.sum(axis=1)
        total_err = err.sum(axis=1)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total))
        if np.all(total_err <= tol):
            break
        ratio = err / tol[:, None]
        score = ratio.max(axis=0)
        width_ok = (hi - lo) > 64 * np.finfo(float).eps * np.maximum(1.0, np.abs(lo))
        # refine panels carrying more than their share of the error budget
        share = 1.0 / lo.size
        pick = (score > share) & width_ok
        if not pick.any():
            pick = (score >= score[width_ok].max()) & width_ok if width_ok.any() else pick
        if not pick.any() or n_sub + pick.sum() > spec.max_subdivisions:
            est = total if not scalar_out else float(total[0])
            raise QuadratureError(
                f"no convergence after {n_sub} subdivisions (error {total_err.max():.3g} > tol {tol.max():.3g})",
                estimate=est,
                error=total_err,
            )
        plo, phi = lo[pick], hi[pick]
        mid = 0.5 * (plo + phi)
        new_lo = np.concatenate([plo, mid])
        new_hi = np.concatenate([mid, phi])
        nval, nerr = evaluate(new_lo, new_hi)
        keep = ~pick
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        val = np.concatenate([val[:, keep], nval], axis=1)
        err = np.concatenate([err[:, keep], nerr], axis=1)
        n_sub += int(pick.sum())

    if scalar_out:
        return float(total[0]), float(total_err[0])
    return total, total_err


def integrate(f, lower, upper, spec=None, points=None, scale=1.0):
    """Integrate a vectorized scalar function ``f`` over ``[lower, upper]``.

    ``upper`` may be ``np.inf``. Raises :class:`QuadratureError` on
    non-convergence or a non-finite integrand value.

    >>> round(integrate(np.exp, 0.0, 1.0), 12)
    1.718281828459
    """
    value, _ = integrate_vec(lambda x: np.asarray(f(x), dtype=float).reshape(-1), lower, upper, spec, points, scale)
    return float(value)


def _series_1(b, c, w, rtol=1e-16, max_terms=20000):
    """sum_n (b)_n / (c)_n w^n, i.e. 2F1(1, b; c; w), vectorized over w."""
    w = np.asarray(w, dtype=float)
    total = np.ones_like(w)
    term = np.ones_like(w)
    active = np.ones(w.shape, dtype=bool)
    for n in range(max_terms):
        term = np.where(active, term * ((b + n) / (c + n)) * w, 0.0)
        total = total + term
        active = np.abs(term) > rtol * np.abs(total)
        if not active.any():
            return total
    raise HypergeometricDomainError("hypergeometric series did not converge")


def _series(a, b, c, w, rtol=1e-16, max_terms=20000):
    """Generic 2F1(a, b; c; w) Maclaurin series, |w| < 1."""
    w = np.asarray(w, dtype=float)
    total = np.ones_like(w)
    term = np.ones_like(w)
    for n in range(max_terms):
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1.0))) * w
        total = total + term
        if np.all(np.abs(term) <= rtol * np.abs(total)):
            return total
    raise HypergeometricDomainError("hypergeometric series did not converge")


# |z| above which the 1/z connection formula replaces the Pfaff series
_CONNECT = 3.0


def gauss_2f1(b, c, z):
    """Evaluate 2F1(1, b; c; z) for ``c > b > 0`` and ``z <= 0``.

    For ``-3 <= z <= 0`` the Pfaff transformation maps the argument to
    ``w = z / (z - 1)`` in ``[0, 3/4]``. Below ``-3`` the 1/z connection
    formula is used, which needs a non-integer ``b``.
    """
    b = float(b)
    c = float(c)
    if not (c > b > 0):
        raise HypergeometricDomainError(f"unsupported parameters b={b}, c={c} (need c > b > 0)")
    z_arr = np.asarray(z, dtype=float)
    if np.any(np.isnan(z_arr)) or np.any(z_arr > 0):
        raise HypergeometricDomainError("only the branch z <= 0 is supported")
    out = np.empty_like(z_arr)

    near = z_arr >= -_CONNECT
    if near.any():
        zn = z_arr[near]
        w = zn / (zn - 1.0)
        out[near] = _series_1(c - b, c, w) / (1.0 - zn)

    far = ~near
    if far.any():
        if float(b).is_integer():
            raise HypergeometricDomainError(f"integer b={b} is not supported for z < -{_CONNECT}")
        zf = z_arr[far]
        y = 1.0 / zf
        mz = -zf
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            t1 = (c - 1.0) / (b - 1.0) / mz * _series_1(2.0 - c, 2.0 - b, y) if c != 1.0 else 0.0
            # Gamma(c) Gamma(1-b) / Gamma(c-b), via log-gamma for magnitude safety
            lg = math.lgamma(c) + math.lgamma(1.0 - b) - math.lgamma(c - b)
            sign = _gamma_sign(c) * _gamma_sign(1.0 - b) * _gamma_sign(c - b)
            t2 = sign * np.exp(lg - b * np.log(mz) + (c - b - 1.0) * np.log1p(-y))
        out[far] = t1 + t2

    if np.ndim(z) == 0:
        return float(out)
    return out


def _gamma_sign(x):
    if x > 0:
        return 1.0
    return -1.0 if math.floor(x) % 2 else 1.0


def db_to_linear(x):
    """Convert dB (or dBi) to a linear ratio."""
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0) if np.ndim(x) else 10.0 ** (float(x) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watt(x):
    """Convert dBm to watt."""
    return db_to_linear(np.asarray(x, dtype=float) - 30.0) if np.ndim(x) else 10.0 ** ((float(x) - 30.0) / 10.0)


def watt_to_dbm(x):
    return 10.0 * np.log10(x) + 30.0
