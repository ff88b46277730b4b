"""Monte Carlo simulator of the two-band HetNet.

Each drop places independent PPPs of BSs and UEs in a square window and
puts the typical UE at the centre. Association, SINR and load are then
measured directly on the realization, with no use of the analytical model.

Drops are seeded by ``SeedSequence(seed, spawn_key=(drop,))`` so results do
not depend on execution order or on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .association import AssociationReport
from .model import TIERS, Link, NetworkConfig, TierId, effective_signal_constant

__all__ = [
    "Deployment",
    "DropResult",
    "Association",
    "CampaignResult",
    "EmptyWindow",
    "default_window",
    "sample_deployment",
    "associate",
    "measure_sinr",
    "run_drop",
    "run_campaign",
    "mean_ci",
    "MAX_ATTEMPTS",
    "Z99",
]

MAX_ATTEMPTS = 10_000
Z99 = NormalDist().inv_cdf(0.995)


class EmptyWindow(ValueError):
    pass


class Association(NamedTuple):
    bs: int             # index into Deployment.positions
    tier: TierId
    distance: float


def _tier_by_phys(phys, los):
    """TierId codes from physical tier (1, 2, 3) and LoS state."""
    tier = np.where(phys == 1, int(TierId.M1), int(TierId.S2))
    return np.where(phys == 3, np.where(los, int(TierId.L), int(TierId.N)), tier)


@dataclass(frozen=True, eq=False)
class Deployment:
    """One realization: BS and UE positions, and LoS flags seen by the typical UE.

    The typical UE sits at the origin, which is the window centre.
    """

    side: float
    bs_points: tuple                 # per physical tier, (n_i, 2) arrays
    ue_points: np.ndarray
    los_flags: np.ndarray            # typical UE to each mmWave BS
    rng_seed: int = 0
    spawn_key: tuple = ()
    _trees: dict = field(default_factory=dict, repr=False)

    @property
    def positions(self) -> np.ndarray:
        return np.concatenate(self.bs_points, axis=0) if any(len(p) for p in self.bs_points) else np.zeros((0, 2))

    @property
    def phys(self) -> np.ndarray:
        return np.concatenate([np.full(len(p), i + 1) for i, p in enumerate(self.bs_points)])

    @property
    def offsets(self) -> tuple:
        return tuple(np.cumsum([0] + [len(p) for p in self.bs_points])[:3])

    def tree(self, physical: int):
        if physical not in self._trees:
            pts = self.bs_points[physical - 1]
            self._trees[physical] = cKDTree(pts) if len(pts) else None
        return self._trees[physical]

    def typical_tiers(self) -> np.ndarray:
        """TierId of every BS as seen from the typical UE."""
        phys = self.phys
        los = np.zeros(len(phys), dtype=bool)
        los[phys == 3] = self.los_flags
        return _tier_by_phys(phys, los)

    def rng(self, stream: int) -> np.random.Generator:
        """Independent generator for a named stage of this drop."""
        ss = np.random.SeedSequence(self.rng_seed, spawn_key=tuple(self.spawn_key) + (stream,))
        return np.random.default_rng(ss)


def _physical_density(config: NetworkConfig, physical: int) -> float:
    return config.density({1: TierId.M1, 2: TierId.S2, 3: TierId.L}[physical])


def default_window(config: NetworkConfig) -> float:
    """Window side in m: max(4 km, 12 / sqrt(lambda_min)) with lambda_min in BS/km^2."""
    dens = [_physical_density(config, p) for p in (1, 2, 3)]
    positive = [d for d in dens if d > 0]
    if not positive:
        raise EmptyWindow("no tier has a positive density")
    return max(4000.0, 12000.0 / math.sqrt(min(positive) * 1e6))


def _check_window(config: NetworkConfig, side: float):
    q99 = max(
        math.sqrt(math.log(100.0) / (math.pi * d))
        for d in (_physical_density(config, p) for p in (1, 2, 3)) if d > 0
    )
    if side < 6.0 * q99:
        raise ValueError(f"window side {side:.0f} m is below 6x the 99th-percentile nearest-BS distance ({q99:.0f} m)")


def sample_deployment(config: NetworkConfig, window_side: float | None = None, seed=0, spawn_key=()) -> Deployment:
    """Draw BS and UE PPPs in a square window centred on the typical UE."""
    side = default_window(config) if window_side is None else float(window_side)
    _check_window(config, side)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(spawn_key) + (0,)))
    area = side * side
    half = side / 2.0

    def ppp(lam):
        n = rng.poisson(lam * area) if lam > 0 else 0
        return rng.uniform(-half, half, size=(n, 2))

    bs = tuple(ppp(_physical_density(config, p)) for p in (1, 2, 3))
    ues = ppp(config.ue_density)
    d3 = np.hypot(bs[2][:, 0], bs[2][:, 1])
    los = (d3 < config.blockage.los_radius) & (rng.random(len(d3)) < config.blockage.los_fraction)
    return Deployment(side, bs, ues, los, int(seed), tuple(spawn_key))


def _log_weight(config, rule, k):
    """(log of B T, distance exponent) of the association metric of tier k."""
    t = config[k]
    if rule is Link.DL:
        return math.log(t.dl_bias * effective_signal_constant(config, k, Link.DL)), t.pl_exponent
    return (math.log(t.ul_bias * effective_signal_constant(config, k, Link.UL)),
            (1.0 - t.pc_fraction) * t.pl_exponent)


def associate(deployment: Deployment, config: NetworkConfig, link: Link) -> Association:
    """Serving BS of the typical UE: literal argmax of the biased received power.

    Ties go to the lower tier index, then the shorter distance.
    """
    pos = deployment.positions
    if not len(pos):
        raise EmptyWindow("no BS in the window")
    d = np.hypot(pos[:, 0], pos[:, 1])
    tiers = deployment.typical_tiers()
    metric = np.empty(len(d))
    for k in TIERS:
        sel = tiers == int(k)
        if sel.any():
            logw, a = _log_weight(config, link, k)
            metric[sel] = logw - a * np.log(d[sel])
    order = np.lexsort((d, tiers, -metric))
    b = int(order[0])
    return Association(b, TierId(int(tiers[b])), float(d[b]))


def _mm_candidates(tree, points, blockage, rng):
    """Nearest LoS and nearest NLoS mmWave BS of each point as {tier: (index, distance)}.

    Index -1 marks a missing candidate. LoS flags are drawn for every BS
    inside the ball; BSs beyond it are NLoS.
    """
    m, n3 = len(points), tree.n
    rb, pl = blockage.los_radius, blockage.los_fraction
    d, j = tree.query(points, k=min(n3, 16), distance_upper_bound=rb)
    d, j = d.reshape(m, -1), j.reshape(m, -1)
    crowded = np.isfinite(d[:, -1]) & (d.shape[1] < n3)
    if crowded.any():
        # more BSs inside the ball than queried: widen those rows to every in-ball BS
        kk = int(min(n3, max(len(x) for x in tree.query_ball_point(points[crowded], rb))))
        dc, jc = tree.query(points[crowded], k=kk, distance_upper_bound=rb)
        width = max(d.shape[1], kk)
        d = np.pad(d, ((0, 0), (0, width - d.shape[1])), constant_values=np.inf)
        j = np.pad(j, ((0, 0), (0, width - j.shape[1])), constant_values=n3)
        d[crowded, :kk] = dc.reshape(-1, kk)
        j[crowded, :kk] = jc.reshape(-1, kk)
    inside = np.isfinite(d)
    los = inside & (rng.random(d.shape) < pl)
    nlos = inside & ~los
    rows = np.arange(m)
    out = {}
    for k, mask in ((TierId.L, los), (TierId.N, nlos)):
        col = np.argmax(mask, axis=1)
        has = mask[rows, col]
        out[k] = (np.where(has, j[rows, col], -1), np.where(has, d[rows, col], np.inf))
    # no NLoS BS inside the ball: the nearest BS beyond it is the NLoS candidate
    need = ~nlos.any(axis=1)
    count = inside.sum(axis=1)
    need &= count < n3
    if need.any():
        kk = int(count[need].max()) + 1
        dn, jn = tree.query(points[need], k=kk)
        dn, jn = dn.reshape(-1, kk), jn.reshape(-1, kk)
        sel = np.arange(len(dn))
        jN, dN = out[TierId.N]
        jN[need] = jn[sel, count[need]]
        dN[need] = dn[sel, count[need]]
    return out


def _associate_many(deployment, config, rules, points, rng):
    """Serving BS, tier and distance of many UEs under each rule in ``rules``.

    Only the nearest BS of each sub-6GHz tier and the LoS/NLoS candidates of
    the mmWave tier can win. LoS flags are drawn once and shared by all rules.
    """
    m = len(points)
    best = {r: np.full((m, 4), -np.inf) for r in rules}
    cand = {r: np.zeros((m, 4), dtype=np.int64) for r in rules}
    dist = {r: np.zeros((m, 4)) for r in rules}
    offsets = deployment.offsets
    for phys, k in ((1, TierId.M1), (2, TierId.S2)):
        tree = deployment.tree(phys)
        if tree is None or not m:
            continue
        d, j = tree.query(points)
        for r in rules:
            logw, a = _log_weight(config, r, k)
            best[r][:, k] = logw - a * np.log(d)
            cand[r][:, k] = j + offsets[phys - 1]
            dist[r][:, k] = d
    tree = deployment.tree(3)
    if tree is not None and m:
        for k, (j, d) in _mm_candidates(tree, points, config.blockage, rng).items():
            ok = j >= 0
            for r in rules:
                logw, a = _log_weight(config, r, k)
                with np.errstate(divide="ignore"):
                    best[r][ok, k] = logw - a * np.log(d[ok])
                cand[r][ok, k] = j[ok] + offsets[2]
                dist[r][ok, k] = d[ok]
    out = {}
    idx = np.arange(m)
    for r in rules:
        if m and np.isneginf(best[r].max(axis=1)).any():
            raise EmptyWindow("no BS in the window")
        tier = np.argmax(best[r], axis=1)
        out[r] = (cand[r][idx, tier], tier, dist[r][idx, tier])
    return out


@dataclass(frozen=True)
class DropResult:
    """Typical-UE outcome of one drop. SINR fields are NaN when not measured."""

    dl_bs: int
    dl_tier: TierId
    ul_bs: int
    ul_tier: TierId
    dl_distance: float
    ul_distance: float
    dl_sinr: float = math.nan
    ul_sinr: float = math.nan
    ul_sinr_coupled: float = math.nan
    dl_load: int = 1
    ul_load: int = 1
    ul_coupled_load: int = 1

    @property
    def decoupled(self) -> bool:
        return self.dl_bs != self.ul_bs


def _mm_gain(config, rng, n):
    a = config.antenna
    return np.where(rng.random(n) < a.p_main, a.main_gain, a.side_gain)


def _fading(rng, n, fading):
    return rng.exponential(1.0, n) if fading else np.ones(n)


def _pathloss(config, tiers, r):
    tiers = np.asarray(tiers, dtype=np.int64)
    c = _by_tier(config, lambda p: p.pl_intercept)[tiers]
    return c * np.power(r, -_by_tier(config, lambda p: p.pl_exponent)[tiers])


def _dl_sinr(dep, config, assoc, rng, fading):
    pos = dep.positions
    phys = dep.phys
    d = np.hypot(pos[:, 0], pos[:, 1])
    tiers = dep.typical_tiers()
    k = assoc.tier
    t = config[k]
    signal = t.dl_power * t.bs_gain * t.pl_intercept * assoc.distance ** -t.pl_exponent
    signal *= _fading(rng, 1, fading)[0]
    band = (phys == 3) if k.is_mmwave else (phys != 3)
    band[assoc.bs] = False
    idx = np.flatnonzero(band)
    power = _by_tier(config, lambda p: p.dl_power)[tiers[idx]]
    gain = _mm_gain(config, rng, len(idx)) if k.is_mmwave else np.ones(len(idx))
    interference = np.sum(power * gain * _pathloss(config, tiers[idx], d[idx]) * _fading(rng, len(idx), fading))
    return signal / (interference + t.noise_power)


def _active_ues(served, proposals):
    """First proposal landing in each BS's cell: (bs ids, positions, own tier, own distance)."""
    bs, tier, dist = served
    ids, first = np.unique(bs, return_index=True)
    return ids, proposals[first], tier[first], dist[first]


def _by_tier(config, fn):
    return np.array([fn(config[k]) for k in TIERS])


def _ul_sinr(dep, config, assoc, active, rng, fading):
    ids, upos, utier, udist = active
    k = assoc.tier
    t = config[k]
    x = assoc.distance
    signal = config.ue_power * x ** (t.pc_fraction * t.pl_exponent) * t.bs_gain * t.pl_intercept * x ** -t.pl_exponent
    signal *= _fading(rng, 1, fading)[0]
    rx = dep.positions[assoc.bs]
    phys = dep.phys[ids]
    band = (phys == 3) if k.is_mmwave else (phys != 3)
    band &= ids != assoc.bs
    upos, utier, udist = upos[band], utier[band], udist[band]
    r = np.hypot(upos[:, 0] - rx[0], upos[:, 1] - rx[1])
    n = len(r)
    if k.is_mmwave:
        rb = config.blockage.los_radius
        los = (r < rb) & (rng.random(n) < config.blockage.los_fraction)
        link_tier = np.where(los, int(TierId.L), int(TierId.N))
        power = np.full(n, config.ue_power)
        gain = _mm_gain(config, rng, n)
    else:
        link_tier = utier
        fpc = _by_tier(config, lambda p: p.pc_fraction * p.pl_exponent)[utier]
        power = config.ue_power * np.power(udist, fpc)
        gain = np.ones(n)
    interference = np.sum(power * gain * _pathloss(config, link_tier, r) * _fading(rng, n, fading))
    return signal / (interference + t.noise_power)


def measure_sinr(deployment: Deployment, config: NetworkConfig, *, fading: bool = True,
                 max_attempts: int = MAX_ATTEMPTS) -> DropResult:
    """Associate the typical UE and measure DL, UL and coupled-UL SINR and cell loads.

    The uplink active UE of every BS is found by rejection sampling: up to
    ``max_attempts`` uniform window points are proposed and each BS keeps the
    first one whose uplink association is that BS. BSs never hit stay silent.
    """
    dl = associate(deployment, config, Link.DL)
    ul = associate(deployment, config, Link.UL)
    rng_assoc = deployment.rng(1)
    rng_dl = deployment.rng(2)
    rng_ul = deployment.rng(3)
    rng_cp = deployment.rng(4)
    half = deployment.side / 2.0
    proposals = rng_assoc.uniform(-half, half, size=(max_attempts, 2))
    served = _associate_many(deployment, config, (Link.DL, Link.UL), proposals, rng_assoc)
    active_ul = _active_ues(served[Link.UL], proposals)
    active_dl = _active_ues(served[Link.DL], proposals)
    loads = [1, 1]
    if len(deployment.ue_points):
        users = _associate_many(deployment, config, (Link.DL, Link.UL), deployment.ue_points, rng_assoc)
        loads = [1 + int(np.count_nonzero(users[r][0] == a.bs)) for r, a in ((Link.DL, dl), (Link.UL, ul))]
    return DropResult(
        dl.bs, dl.tier, ul.bs, ul.tier, dl.distance, ul.distance,
        dl_sinr=float(_dl_sinr(deployment, config, dl, rng_dl, fading)),
        ul_sinr=float(_ul_sinr(deployment, config, ul, active_ul, rng_ul, fading)),
        ul_sinr_coupled=float(_ul_sinr(deployment, config, dl, active_dl, rng_cp, fading)),
        dl_load=loads[0], ul_load=loads[1], ul_coupled_load=loads[0],
    )


def run_drop(config: NetworkConfig, seed: int, index: int, *, full: bool = True,
             window_side: float | None = None, fading: bool = True) -> DropResult:
    dep = sample_deployment(config, window_side, seed, spawn_key=(index,))
    if full:
        return measure_sinr(dep, config, fading=fading)
    dl = associate(dep, config, Link.DL)
    ul = associate(dep, config, Link.UL)
    return DropResult(dl.bs, dl.tier, ul.bs, ul.tier, dl.distance, ul.distance)


def mean_ci(samples):
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    if n == 0:
        return math.nan, None
    mean = float(samples.mean())
    if n < 2:
        return mean, None
    return mean, float(Z99 * samples.std(ddof=1) / math.sqrt(n))


@dataclass
class CampaignResult:
    """Per-drop arrays from a campaign with empirical estimators."""

    config: NetworkConfig
    seed: int
    dl_tier: np.ndarray
    ul_tier: np.ndarray
    dl_bs: np.ndarray
    ul_bs: np.ndarray
    dl_sinr: np.ndarray
    ul_sinr: np.ndarray
    ul_sinr_coupled: np.ndarray
    dl_load: np.ndarray
    ul_load: np.ndarray
    ul_coupled_load: np.ndarray

    @property
    def n_drops(self) -> int:
        return len(self.dl_tier)

    @property
    def decoupled(self) -> np.ndarray:
        return self.dl_bs != self.ul_bs

    def series(self, link: Link, coupled: bool = False):
        """(SINR, serving tier, cell load) arrays of one link."""
        if link is Link.DL:
            return self.dl_sinr, self.dl_tier, self.dl_load
        if coupled:
            return self.ul_sinr_coupled, self.dl_tier, self.ul_coupled_load
        return self.ul_sinr, self.ul_tier, self.ul_load

    def association_frequency(self, link: Link) -> dict:
        tiers = self.dl_tier if link is Link.DL else self.ul_tier
        return {k: mean_ci(tiers == int(k)) for k in TIERS}

    def decoupled_fraction(self):
        return mean_ci(self.decoupled)

    def association_report(self) -> AssociationReport:
        probs = {(link, k): v[0] for link in Link for k, v in self.association_frequency(link).items()}
        return AssociationReport(probs, self.decoupled_fraction()[0])

    def sinr_coverage(self, link: Link, taus, coupled: bool = False) -> list:
        sinr, _, _ = self.series(link, coupled)
        return [mean_ci(sinr > tau) for tau in np.atleast_1d(taus)]

    def rate_coverage(self, link: Link, rhos, coupled: bool = False) -> list:
        sinr, tiers, load = self.series(link, coupled)
        bw = np.array([self.config[TierId(int(k))].bandwidth for k in tiers])
        rate = bw * np.log2(1.0 + sinr) / load
        return [mean_ci(rate > rho) for rho in np.atleast_1d(rhos)]

    def spectral_efficiency(self, link: Link, tier: TierId | None = None, coupled: bool = False):
        sinr, tiers, _ = self.series(link, coupled)
        se = np.log2(1.0 + sinr)
        if tier is not None:
            se = se[tiers == int(tier)]
        return mean_ci(se)


def run_campaign(config: NetworkConfig, n_drops: int, seed: int = 0, metrics=("association",), *,
                 window_side: float | None = None, threads: int = 1, fading: bool = True) -> CampaignResult:
    """Run ``n_drops`` independent drops.

    ``metrics`` containing only ``"association"``/``"decoupled"`` skips the
    SINR and load measurements.
    """
    if n_drops < 1:
        raise ValueError("n_drops must be at least 1")
    full = bool(set(metrics) - {"association", "decoupled"})

    def one(i):
        return run_drop(config, seed, i, full=full, window_side=window_side, fading=fading)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            drops = list(pool.map(one, range(n_drops)))
    else:
        drops = [one(i) for i in range(n_drops)]

    def col(name, dtype=float):
        return np.array([getattr(d, name) for d in drops], dtype=dtype)

    return CampaignResult(
        config, seed,
        col("dl_tier", np.int8), col("ul_tier", np.int8), col("dl_bs", np.int64), col("ul_bs", np.int64),
        col("dl_sinr"), col("ul_sinr"), col("ul_sinr_coupled"),
        col("dl_load", np.int64), col("ul_load", np.int64), col("ul_coupled_load", np.int64),
    )
