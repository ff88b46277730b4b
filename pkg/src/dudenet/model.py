"""System model: tiers, antenna and blockage models, network configuration.

Everything here is stored in linear SI units (W, m, Hz, BS/m^2). dB and
dBm only appear in :func:`table_one` and in the config file layer.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import QuadratureSpec, db_to_linear, dbm_to_watt

__all__ = [
    "TierId",
    "Link",
    "TierParams",
    "AntennaPattern",
    "BlockageModel",
    "NetworkConfig",
    "TIERS",
    "SUB6_TIERS",
    "MM_TIERS",
    "validate",
    "effective_signal_constant",
    "table_one",
    "per_km2",
]


class TierId(enum.IntEnum):
    """Association tiers; L and N are two views of one mmWave BS process."""

    M1 = 0
    S2 = 1
    L = 2
    N = 3

    @property
    def label(self) -> str:
        return ("1", "2", "L", "N")[self]

    @property
    def is_mmwave(self) -> bool:
        return self >= TierId.L

    @property
    def physical(self) -> int:
        """Index of the physical BS process (1, 2 or 3)."""
        return (1, 2, 3, 3)[self]

    @classmethod
    def parse(cls, text: str) -> "TierId":
        text = str(text).strip().upper()
        for t in cls:
            if text in (t.name, t.label):
                return t
        raise ValueError(f"unknown tier {text!r}")


class Link(enum.Enum):
    DL = "DL"
    UL = "UL"


TIERS = tuple(TierId)
SUB6_TIERS = (TierId.M1, TierId.S2)
MM_TIERS = (TierId.L, TierId.N)

KM2 = 1e6


def per_km2(x):
    """Convert a density in BS/km^2 to BS/m^2."""
    return x / KM2


@dataclass(frozen=True)
class TierParams:
    density: float          # BS per m^2
    dl_power: float         # W
    pl_intercept: float     # linear
    pl_exponent: float
    dl_bias: float = 1.0    # linear
    ul_bias: float = 1.0    # linear
    pc_fraction: float = 0.0
    bandwidth: float = 20e6  # Hz
    bs_gain: float = 1.0    # linear
    noise_figure_db: float = 10.0

    @property
    def noise_power(self) -> float:
        """Thermal noise over the tier bandwidth plus the noise figure, in W."""
        return dbm_to_watt(-174.0 + 10.0 * math.log10(self.bandwidth) + self.noise_figure_db)

    def path_loss(self, r):
        return self.pl_intercept * np.power(r, -self.pl_exponent)


@dataclass(frozen=True)
class AntennaPattern:
    """Two-level sectored pattern of mmWave BSs."""

    main_gain: float        # linear
    side_gain: float        # linear
    beamwidth: float        # rad

    @property
    def p_main(self) -> float:
        return self.beamwidth / (2.0 * math.pi)

    @property
    def p_side(self) -> float:
        return 1.0 - self.p_main

    def gain(self, theta):
        """Gain for an angle offset from boresight, ``theta`` in [-pi, pi]."""
        theta = np.asarray(theta)
        return np.where(np.abs(theta) <= self.beamwidth / 2.0, self.main_gain, self.side_gain)

    def mixture(self):
        """((probability, gain relative to main lobe), ...) for an interfering beam."""
        return ((self.p_main, 1.0), (self.p_side, self.side_gain / self.main_gain))


@dataclass(frozen=True)
class BlockageModel:
    """Blockage ball: LoS with probability ``los_fraction`` inside ``los_radius``."""

    los_fraction: float
    los_radius: float       # m

    def p_los(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.los_radius, self.los_fraction, 0.0)

    def p_nlos(self, r):
        return 1.0 - self.p_los(r)


@dataclass(frozen=True)
class NetworkConfig:
    """Complete parameter set. ``tiers`` is ordered by :class:`TierId`."""

    tiers: tuple
    antenna: AntennaPattern
    blockage: BlockageModel
    ue_density: float       # UE per m^2
    ue_power: float         # W
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __getitem__(self, k: TierId) -> TierParams:
        return self.tiers[int(k)]

    def density(self, k: TierId) -> float:
        """Density of the physical process behind tier ``k``."""
        return self.tiers[int(k)].density

    def replace_tier(self, k: TierId, **changes) -> "NetworkConfig":
        tiers = list(self.tiers)
        tiers[int(k)] = replace(tiers[int(k)], **changes)
        return replace(self, tiers=tuple(tiers))

    def replace_mm(self, **changes) -> "NetworkConfig":
        """Change a parameter shared by the LoS and NLoS views of the mmWave tier."""
        return self.replace_tier(TierId.L, **changes).replace_tier(TierId.N, **changes)

    def with_densities(self, lam1=None, lam2=None, lam3=None) -> "NetworkConfig":
        cfg = self
        if lam1 is not None:
            cfg = cfg.replace_tier(TierId.M1, density=lam1)
        if lam2 is not None:
            cfg = cfg.replace_tier(TierId.S2, density=lam2)
        if lam3 is not None:
            cfg = cfg.replace_mm(density=lam3)
        return cfg

    def active_tiers(self):
        return tuple(k for k in TIERS if self[k].density > 0)


def table_one(**overrides) -> NetworkConfig:
    """Default parameterization of the two-band network, with 0 dB biases.

    Keyword overrides are applied to the physical densities in BS/km^2
    (``lam1``, ``lam2``, ``lam3``) and UE density (``lam_u``).
    """
    lam1 = per_km2(overrides.pop("lam1", 5.0))
    lam2 = per_km2(overrides.pop("lam2", 30.0))
    lam3 = per_km2(overrides.pop("lam3", 30.0))
    lam_u = per_km2(overrides.pop("lam_u", 200.0))
    if overrides:
        raise TypeError(f"unknown overrides {sorted(overrides)}")
    g_main = db_to_linear(18.0)
    sub6 = dict(pl_intercept=db_to_linear(-38.5), pl_exponent=3.0, pc_fraction=0.2, bandwidth=20e6)
    mm = dict(density=lam3, dl_power=dbm_to_watt(30.0), pc_fraction=0.0, bandwidth=1e9, bs_gain=g_main)
    tiers = (
        TierParams(density=lam1, dl_power=dbm_to_watt(46.0), **sub6),
        TierParams(density=lam2, dl_power=dbm_to_watt(40.0), **sub6),
        TierParams(pl_intercept=db_to_linear(-61.4), pl_exponent=2.0, **mm),
        TierParams(pl_intercept=db_to_linear(-72.0), pl_exponent=2.92, **mm),
    )
    return NetworkConfig(
        tiers=tiers,
        antenna=AntennaPattern(g_main, db_to_linear(-2.0), math.radians(10.0)),
        blockage=BlockageModel(0.2, 200.0),
        ue_density=lam_u,
        ue_power=dbm_to_watt(23.0),
    )


_SHARED_MM = ("density", "dl_power", "dl_bias", "ul_bias", "bandwidth", "bs_gain", "noise_figure_db")


def validate(config: NetworkConfig) -> list:
    """Return a list of human-readable invariant violations (empty if valid)."""
    out = []
    if len(config.tiers) != len(TIERS):
        return [f"tiers: expected {len(TIERS)} tiers, got {len(config.tiers)}"]
    for k in TIERS:
        t = config[k]
        name = f"tier {k.label}"
        if not (t.density >= 0 and math.isfinite(t.density)):
            out.append(f"{name}: density must be a finite non-negative number")
        if not t.dl_power > 0:
            out.append(f"{name}: dl_power must be positive")
        if not t.pl_intercept > 0:
            out.append(f"{name}: path_loss_intercept must be positive")
        if k == TierId.L:
            if not t.pl_exponent > 0:
                out.append(f"{name}: path_loss_exponent must be positive")
        elif not t.pl_exponent > 2:
            out.append(f"{name}: path_loss_exponent must exceed 2 for unbounded tiers")
        for attr in ("dl_bias", "ul_bias", "bs_gain", "bandwidth"):
            if not getattr(t, attr) > 0:
                out.append(f"{name}: {attr} must be positive")
        if not 0 <= t.pc_fraction < 1:
            out.append(f"{name}: pc_fraction outside [0,1)")
        if k.is_mmwave and t.pc_fraction != 0:
            out.append(f"{name}: pc_fraction must be 0 for mmWave tiers")
        if k.is_mmwave and t.bs_gain != config.antenna.main_gain:
            out.append(f"{name}: bs_gain must equal the antenna main_gain (beam-aligned serving link)")
    for attr in _SHARED_MM:
        if getattr(config[TierId.L], attr) != getattr(config[TierId.N], attr):
            out.append(f"tiers L/N: {attr} must be shared by the LoS and NLoS mmWave tiers")
    if not any(config[k].density > 0 for k in TIERS):
        out.append("density: at least one tier needs a positive density")
    a = config.antenna
    if not a.side_gain > 0:
        out.append("antenna: side_gain must be positive")
    if not a.main_gain >= a.side_gain:
        out.append("antenna: main_gain must be at least side_gain")
    if not 0 < a.beamwidth < 2 * math.pi:
        out.append("antenna: beamwidth outside (0, 2*pi)")
    b = config.blockage
    if not 0 <= b.los_fraction <= 1:
        out.append("blockage: los_fraction outside [0,1]")
    if not b.los_radius > 0:
        out.append("blockage: los_radius must be positive")
    if not config.ue_density >= 0:
        out.append("ue_density must be non-negative")
    if not config.ue_power > 0:
        out.append("ue_power must be positive")
    return out


def effective_signal_constant(config: NetworkConfig, k: TierId, link: Link) -> float:
    """T_k = P_DL G C for the downlink, T'_k = P_u G C for the uplink."""
    t = config[k]
    power = t.dl_power if link is Link.DL else config.ue_power
    return power * t.bs_gain * t.pl_intercept
