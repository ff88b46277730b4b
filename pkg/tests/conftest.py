import math

import numpy as np
import pytest

from dudenet.model import TierId, per_km2, table_one
from dudenet.numerics import db_to_linear


def random_config(rng: np.random.Generator):
    """A valid config with densities, biases, powers and FPC drawn at random."""
    lam = 10.0 ** rng.uniform(0.0, 2.3, size=3)
    cfg = table_one(lam1=lam[0], lam2=lam[1], lam3=lam[2], lam_u=float(10.0 ** rng.uniform(1.5, 3.0)))
    for k in (TierId.M1, TierId.S2):
        cfg = cfg.replace_tier(
            k,
            dl_bias=db_to_linear(rng.uniform(-10, 10)),
            ul_bias=db_to_linear(rng.uniform(-10, 10)),
            pc_fraction=float(rng.uniform(0.0, 0.8)),
            pl_exponent=float(rng.uniform(2.5, 4.5)),
            dl_power=cfg[k].dl_power * db_to_linear(rng.uniform(-6, 6)),
        )
    cfg = cfg.replace_mm(dl_bias=db_to_linear(rng.uniform(-10, 10)), ul_bias=db_to_linear(rng.uniform(-10, 10)))
    cfg = cfg.replace_tier(TierId.N, pl_exponent=float(rng.uniform(2.3, 4.0)))
    cfg = cfg.replace_tier(TierId.L, pl_exponent=float(rng.uniform(1.8, 3.0)))
    return cfg


def single_tier(lam=5.0, **changes):
    """Only the macro tier is deployed."""
    cfg = table_one(lam1=lam, lam2=0.0, lam3=0.0)
    return cfg.replace_tier(TierId.M1, **changes) if changes else cfg


@pytest.fixture(scope="session")
def cfg():
    return table_one()


@pytest.fixture(scope="session")
def dense_cfg():
    return table_one(lam1=15.0, lam2=100.0, lam3=100.0, lam_u=500.0)


SINR_GRID_DB = np.array([-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0])


def db(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def rayleigh_ppp_laplace_mc(rng, lam, alpha, t_int, s, r_min, n_draws, r_max):
    """Empirical E[exp(-s I)] for a PPP of interferers outside r_min with unit-mean fading."""
    area = math.pi * (r_max**2 - r_min**2)
    out = np.empty(n_draws)
    for j in range(n_draws):
        n = rng.poisson(lam * area)
        r = np.sqrt(rng.uniform(r_min**2, r_max**2, size=n))
        i_tot = np.sum(t_int * rng.exponential(size=n) * r ** (-alpha))
        out[j] = math.exp(-s * i_tot)
    return out


# one verdict line per acceptance criterion, printed after the run
_VERDICTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    exc = outcome.excinfo
    detail = getattr(item, "criterion_detail", "")
    if exc is not None:
        first = str(exc[1]).strip().splitlines()
        detail = first[0] if first else exc[0].__name__
    _VERDICTS[marker.args[0]] = (exc is None, marker.args[1], detail)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        ok, title, detail = _VERDICTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")


__all__ = ["random_config", "single_tier", "db", "SINR_GRID_DB", "per_km2"]
