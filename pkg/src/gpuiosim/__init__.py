"""Deterministic discrete-event simulator of a CPU-GPU file I/O stack.

Models a GPU whose threadblocks read files through a shared RPC queue
serviced by host threads, an OS page cache with ondemand readahead, an
SSD, a PCIe link, a GPU-side page cache with pluggable replacement, and
a per-threadblock readahead prefetcher. Integer-nanosecond clock, fully
reproducible for a given config and seed.
"""

from gpuiosim.simcore import EventQueue, SeededRng, SimError
from gpuiosim.config import ExperimentConfig
from gpuiosim.simulation import Simulation

__version__ = "0.1.0"

__all__ = [
    "EventQueue",
    "SeededRng",
    "SimError",
    "ExperimentConfig",
    "Simulation",
    "__version__",
]
