"""Decoupled downlink/uplink association in sub-6GHz/mmWave HetNets.

Analytical association, coverage, rate and area-sum-rate evaluation with
an independent Monte Carlo simulator for cross-checking.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .model import Link, NetworkConfig, TierId, table_one, validate  # noqa: E402

__all__ = ["Link", "NetworkConfig", "TierId", "table_one", "validate", "__version__"]
