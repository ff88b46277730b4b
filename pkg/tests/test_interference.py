"""Interference kernels and Laplace transforms."""

import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from conftest import rayleigh_ppp_laplace_mc, single_tier
from dudenet.association import conditional_distance_pdf, transfer
from dudenet.coverage import received_signal
from dudenet.interference import DivergentKernel, LaplaceEvaluator, kernel_v, kernel_w, laplace_dl, laplace_ul
from dudenet.model import AntennaPattern, BlockageModel, Link, TierId, effective_signal_constant, table_one
from dudenet.montecarlo import Z99


def _quad_kernel(lo, hi, alpha, beta):
    f = lambda r: r / (1.0 + r**alpha / beta)
    # split at the knee r = beta^(1/alpha) for accuracy
    knee = beta ** (1 / alpha)
    pts = sorted({lo, *(p for p in (knee, 10 * knee) if lo < p < hi)})
    total = 0.0
    for a, b in zip(pts, pts[1:] + [hi]):
        total += sp_integrate.quad(f, a, b, epsabs=0, epsrel=1e-13, limit=500)[0]
    return total


def _mp_kernel(x, alpha, beta):
    """Extended-precision V as the full integral minus the quadrature of [0, x].

    Slowly decaying tails (alpha near 2) defeat direct quadrature to
    infinity, while the full integral has the closed form
    beta^(2/alpha) pi / (alpha sin(2 pi / alpha)).
    """
    with mpmath.workdps(40):
        a, b = mpmath.mpf(alpha), mpmath.mpf(beta)
        full = b ** (2 / a) * mpmath.pi / (a * mpmath.sin(2 * mpmath.pi / a))
        knee = b ** (1 / a)
        pts = [mpmath.mpf(0)] + [p for p in (knee / 10, knee, 10 * knee) if p < x] + [mpmath.mpf(x)]
        head = mpmath.quad(lambda r: r / (1 + r**a / b), pts)
        return float(full - head)


class TestKernelV:
    def test_zero_beta(self):
        assert kernel_v(10.0, 3.0, 0.0) == 0.0

    def test_alpha_four(self):
        # int_1^inf r / (1 + r^4) dr = pi / 8
        assert kernel_v(1.0, 4.0, 1.0) == pytest.approx(math.pi / 8, rel=1e-10)

    def test_large_beta(self):
        assert kernel_v(50.0, 3.0, 1e4) == pytest.approx(_quad_kernel(50.0, np.inf, 3.0, 1e4), rel=1e-8)

    @pytest.mark.parametrize("x", [0.5, 5.0, 50.0, 500.0, 5000.0])
    @pytest.mark.parametrize("alpha", [2.2, 2.92, 3.0, 3.7, 4.5])
    @pytest.mark.parametrize("beta", [1e-3, 1.0, 1e3, 1e6, 1e10])
    def test_grid_against_quadrature(self, x, alpha, beta):
        assert kernel_v(x, alpha, beta) == pytest.approx(_mp_kernel(x, alpha, beta), rel=1e-8)

    def test_divergent(self):
        with pytest.raises(DivergentKernel):
            kernel_v(1.0, 2.0, 1.0)

    def test_zero_exclusion_limit(self):
        alpha, beta = 3.0, 7.0
        full = beta ** (2 / alpha) * math.pi / (alpha * math.sin(2 * math.pi / alpha))
        assert kernel_v(0.0, alpha, beta) == pytest.approx(full, rel=1e-12)

    @given(x=st.floats(0.1, 1e4), beta=st.floats(1e-3, 1e8), f=st.floats(1.01, 10))
    def test_monotone(self, x, beta, f):
        assert kernel_v(x * f, 3.0, beta) <= kernel_v(x, 3.0, beta)
        assert kernel_v(x, 3.0, beta * f) >= kernel_v(x, 3.0, beta)


class TestKernelW:
    blockage = BlockageModel(0.2, 200.0)

    def test_empty_los_support(self):
        assert kernel_w("L", 200.0, 2.0, 1.0, self.blockage) == 0.0
        assert kernel_w("L", 500.0, 2.0, 1.0, self.blockage) == 0.0

    def test_log_case(self):
        expected = 0.1 * math.log(1 + 200.0**2)
        assert kernel_w("L", 0.0, 2.0, 1.0, self.blockage) == pytest.approx(expected, rel=1e-10)
        assert expected == pytest.approx(1.05966, abs=1e-5)

    def test_nlos_against_quadrature(self):
        ref = 0.8 * _quad_kernel(10.0, 200.0, 2.92, 1e3) + _quad_kernel(200.0, np.inf, 2.92, 1e3)
        assert kernel_w("N", 10.0, 2.92, 1e3, self.blockage) == pytest.approx(ref, rel=1e-8)

    @pytest.mark.parametrize("alpha", [2.0, 2.5, 3.3])
    @pytest.mark.parametrize("x", [0.0, 30.0, 150.0])
    def test_los_against_quadrature(self, alpha, x):
        for beta in (1e-2, 1e2, 1e6):
            ref = 0.2 * _quad_kernel(x, 200.0, alpha, beta)
            assert kernel_w(TierId.L, x, alpha, beta, self.blockage) == pytest.approx(ref, rel=1e-9)

    def test_integer_exponent_fallback(self):
        # 2/alpha integral: the closed form degenerates at alpha = 1
        ref = 0.2 * _quad_kernel(5.0, 200.0, 1.0, 10.0)
        assert kernel_w("L", 5.0, 1.0, 10.0, self.blockage) == pytest.approx(ref, rel=1e-8)

    def test_nlos_needs_decaying_tail(self):
        with pytest.raises(DivergentKernel):
            kernel_w("N", 1.0, 2.0, 1.0, self.blockage)

    def test_split_sums_to_unblocked_kernel(self):
        # p_L W_L/p_L + W_N with p_L -> full weight recovers V on [x, inf)
        x, alpha, beta = 20.0, 3.0, 1e4
        total = kernel_w("L", x, alpha, beta, self.blockage) + kernel_w("N", x, alpha, beta, self.blockage)
        assert total == pytest.approx(kernel_v(x, alpha, beta), rel=1e-12)


class TestLaplaceDL:
    def test_zero_s(self, cfg):
        for k in TierId:
            assert laplace_dl(cfg, k, 0.0, 80.0) == 1.0

    def test_no_sub6_interferers(self):
        cfg = table_one(lam1=0, lam2=0)
        assert laplace_dl(cfg, TierId.M1, 1e9, 50.0) == 1.0

    def test_closed_form_single_tier(self):
        # alpha = 4, no exclusion effect at x -> 0: exp(-pi^2/2 lam sqrt(s T))
        cfg = single_tier().replace_tier(TierId.M1, pl_exponent=4.0)
        t = effective_signal_constant(cfg, TierId.M1, Link.DL)
        s, x = 1e6, 1e-3
        expected = math.exp(-cfg.density(TierId.M1) * math.pi**2 / 2 * math.sqrt(s * t))
        assert laplace_dl(cfg, TierId.M1, s, x) == pytest.approx(expected, rel=1e-6)

    def test_monotone_in_s(self, cfg):
        for k in TierId:
            s = np.logspace(-3, 3, 30) / float(received_signal(cfg, Link.DL, k, 60.0))
            v = laplace_dl(cfg, k, s, 60.0)
            assert np.all(np.diff(v) <= 0) and np.all((v > 0) & (v <= 1))

    @given(f=st.floats(1.1, 10))
    @settings(max_examples=10, deadline=None)
    def test_monotone_in_density(self, f):
        cfg = table_one()
        more = cfg.with_densities(cfg.density(TierId.M1) * f, cfg.density(TierId.S2) * f, cfg.density(TierId.L) * f)
        for k in TierId:
            s = 1.0 / float(received_signal(cfg, Link.DL, k, 80.0))
            assert laplace_dl(more, k, s, 80.0) <= laplace_dl(cfg, k, s, 80.0)

    def test_degenerate_antenna(self, cfg):
        flat = replace(cfg, antenna=AntennaPattern(cfg.antenna.main_gain, cfg.antenna.main_gain, 2 * math.pi - 1e-9))
        s, x = 1.0 / float(received_signal(cfg, Link.DL, TierId.L, 60.0)), 60.0
        expo = 0.0
        for i in (TierId.L, TierId.N):
            t_i = effective_signal_constant(flat, i, Link.DL)
            expo += kernel_w(i, transfer(flat, Link.DL, TierId.L, i, x), flat[i].pl_exponent, s * t_i, flat.blockage)
        expected = math.exp(-2 * math.pi * flat.density(TierId.L) * expo)
        assert laplace_dl(flat, TierId.L, s, x) == pytest.approx(expected, rel=1e-12)

    def test_dense_thinning_halves_exponent(self):
        cfg = single_tier()
        s = 1.0 / float(received_signal(cfg, Link.DL, TierId.M1, 100.0))
        full = laplace_dl(cfg, TierId.M1, s, 100.0)
        half = laplace_dl(cfg, TierId.M1, s, 100.0, densities={1: cfg.density(TierId.M1) / 2})
        assert math.log(half) == pytest.approx(0.5 * math.log(full), rel=1e-12)

    def test_against_simulated_interference(self, cfg):
        # macro serving at 100 m: interferers are the two sub-6 PPPs outside their DDTF images
        x = 100.0
        s = 1.0 / float(received_signal(cfg, Link.DL, TierId.M1, x))
        rng = np.random.default_rng(11)
        n = 10_000
        total = np.zeros(n)
        for i in (TierId.M1, TierId.S2):
            excl = transfer(cfg, Link.DL, TierId.M1, i, x)
            t_i = effective_signal_constant(cfg, i, Link.DL)
            # E[exp(-s I)] factorizes across independent tiers
            total = total + np.log(rayleigh_ppp_laplace_mc(rng, cfg.density(i), 3.0, t_i, s, excl, n, 20_000.0))
        samples = np.exp(total)
        ci = Z99 * samples.std(ddof=1) / math.sqrt(n)
        assert abs(samples.mean() - laplace_dl(cfg, TierId.M1, s, x)) < ci + 2e-3

    def test_evaluator_wraps_functions(self, cfg):
        ev = LaplaceEvaluator(cfg, Link.DL, TierId.S2)
        assert ev(3e9, 70.0) == laplace_dl(cfg, TierId.S2, 3e9, 70.0)


def _laplace_ul_2d(cfg, k, s, x, rule=Link.UL):
    """Direct double integral over (u, r) with r0(u) = max(Psi_ki(x), Psi_ik(u))."""
    expo = 0.0
    for i in (TierId.M1, TierId.S2):
        lam = cfg.density(i)
        if lam == 0:
            continue
        t = cfg[i]
        t_i = effective_signal_constant(cfg, i, Link.UL)
        excl = transfer(cfg, rule, k, i, x)

        def inner(u):
            r0 = max(excl, transfer(cfg, rule, i, k, u))
            beta = s * t_i * u ** (t.pc_fraction * t.pl_exponent)
            return sp_integrate.quad(lambda r: r / (1 + r**t.pl_exponent / beta), r0, np.inf, limit=200)[0]

        f = lambda u: inner(u) * float(conditional_distance_pdf(cfg, rule, i, u))
        val = sum(sp_integrate.quad(f, a, b, limit=200)[0] for a, b in ((0, 50), (50, 300), (300, 2000)))
        val += sp_integrate.quad(f, 2000, np.inf, limit=200)[0]
        expo += 2 * math.pi * lam * val
    return math.exp(-expo)


class TestLaplaceUL:
    def test_zero_s(self, cfg):
        for k in TierId:
            assert laplace_ul(cfg, k, 0.0, 80.0) == 1.0

    @pytest.mark.parametrize("k,x", [(TierId.M1, 150.0), (TierId.S2, 60.0)])
    def test_against_double_integral(self, cfg, k, x):
        s = 1.0 / float(received_signal(cfg, Link.UL, k, x))
        assert laplace_ul(cfg, k, s, x) == pytest.approx(_laplace_ul_2d(cfg, k, s, x), rel=1e-5)

    def test_coupled_rule_against_double_integral(self, cfg):
        s = 1.0 / float(received_signal(cfg, Link.UL, TierId.S2, 90.0))
        got = laplace_ul(cfg, TierId.S2, s, 90.0, rule=Link.DL)
        assert got == pytest.approx(_laplace_ul_2d(cfg, TierId.S2, s, 90.0, rule=Link.DL), rel=1e-5)

    def test_no_fpc_single_tier(self):
        cfg = single_tier().replace_tier(TierId.M1, pc_fraction=0.0)
        s = 1.0 / float(received_signal(cfg, Link.UL, TierId.M1, 120.0))
        assert laplace_ul(cfg, TierId.M1, s, 120.0) == pytest.approx(_laplace_ul_2d(cfg, TierId.M1, s, 120.0), rel=1e-5)

    def test_exclusion_never_below_serving_image(self, cfg):
        # shrinking the lower bound to the serving image only cannot increase interference
        s = 1.0 / float(received_signal(cfg, Link.UL, TierId.M1, 150.0))
        lap = laplace_ul(cfg, TierId.M1, s, 150.0)
        excl = transfer(cfg, Link.UL, TierId.M1, TierId.M1, 150.0)
        upper_bound = 0.0
        for i in (TierId.M1, TierId.S2):
            t_i = effective_signal_constant(cfg, i, Link.UL)
            e = transfer(cfg, Link.UL, TierId.M1, i, excl)
            upper_bound += 2 * math.pi * cfg.density(i) * kernel_v(e, 3.0, s * t_i * 1e12)
        assert lap >= math.exp(-upper_bound)

    def test_monotone_in_s(self, cfg):
        s = np.logspace(-2, 3, 12) / float(received_signal(cfg, Link.UL, TierId.S2, 80.0))
        v = laplace_ul(cfg, TierId.S2, s, np.full(s.shape, 80.0))
        assert np.all(np.diff(v) <= 1e-12) and np.all((v > 0) & (v <= 1))

    def test_monotone_in_density(self, cfg):
        s = 1.0 / float(received_signal(cfg, Link.UL, TierId.M1, 200.0))
        base = laplace_ul(cfg, TierId.M1, s, 200.0)
        more = laplace_ul(cfg, TierId.M1, s, 200.0, densities={1: 2 * cfg.density(TierId.M1), 2: 2 * cfg.density(TierId.S2)})
        assert more < base

    def test_mmwave_against_simulated_interference(self, cfg):
        # LoS serving at 50 m: LoS/NLoS interferers beyond the UDTF images with sectored gains
        x = 50.0
        k = TierId.L
        s = 1.0 / float(received_signal(cfg, Link.UL, k, x))
        rng = np.random.default_rng(3)
        lam = cfg.density(TierId.L)
        r_max = 8000.0
        excl = {i: float(transfer(cfg, Link.UL, k, i, x)) for i in (TierId.L, TierId.N)}
        r_min = min(excl.values())
        n = 10_000
        samples = np.empty(n)
        (p_main, _), _ = cfg.antenna.mixture()
        for j in range(n):
            m = rng.poisson(lam * math.pi * (r_max**2 - r_min**2))
            r = np.sqrt(rng.uniform(r_min**2, r_max**2, size=m))
            los = (r < cfg.blockage.los_radius) & (rng.random(m) < cfg.blockage.los_fraction)
            tier = np.where(los, TierId.L, TierId.N)
            keep = r >= np.where(los, excl[TierId.L], excl[TierId.N])
            t = np.array([effective_signal_constant(cfg, i, Link.UL) for i in (TierId.L, TierId.N)])[tier - 2]
            alpha = np.where(los, cfg[TierId.L].pl_exponent, cfg[TierId.N].pl_exponent)
            g = np.where(rng.random(m) < p_main, 1.0, cfg.antenna.side_gain / cfg.antenna.main_gain)
            i_tot = np.sum((t * g * rng.exponential(size=m) * r ** (-alpha))[keep])
            samples[j] = math.exp(-s * i_tot)
        ci = Z99 * samples.std(ddof=1) / math.sqrt(n)
        assert abs(samples.mean() - laplace_ul(cfg, k, s, x)) < ci + 2e-3
