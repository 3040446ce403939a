"""Run configuration: a flat key=value namespace with typed defaults.

Keys use dotted section names (ssd.*, pcie.*, host.*, rpc.*, gpu.*,
gpufs.*, workload.*, mode.*). Sizes accept K/M/G suffixes (binary:
K=1024). Unknown keys and malformed values raise immediately; a config
error should never surface as a weird simulation result.

Per-byte copy costs are given in ns/byte as floats for readability
(0.05 ns/byte = 20 GB/s); the simulation converts them to integer
ps/byte once at startup so event arithmetic stays integral.
"""

import os

from gpuiosim.simcore import SimError

_SUFFIX = {"K": 1024, "M": 1024 ** 2, "G": 1024 ** 3}


def parse_size(text: str) -> int:
    """Integer with optional K/M/G suffix: '64K' -> 65536."""
    s = str(text).strip()
    mult = 1
    if s and s[-1].upper() in _SUFFIX:
        mult = _SUFFIX[s[-1].upper()]
        s = s[:-1]
    try:
        if "." in s:
            v = float(s) * mult
            if v != int(v):
                raise ValueError
            return int(v)
        return int(s, 0) * mult
    except ValueError:
        raise SimError(f"bad size value {text!r}")


def _float(text) -> float:
    try:
        return float(text)
    except ValueError:
        raise SimError(f"bad float value {text!r}")


def _bool(text) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise SimError(f"bad bool value {text!r}")


def _str(text) -> str:
    return str(text).strip()


# key -> (default, parser)
DEFAULTS = {
    "seed": (42, parse_size),
    "repetitions": (10, parse_size),

    "ssd.bandwidth_bytes_per_s": (2_800_000_000, parse_size),
    "ssd.base_latency_ns": (80_000, parse_size),
    "ssd.max_inflight": (32, parse_size),

    "pcie.bandwidth_bytes_per_s": (12_000_000_000, parse_size),
    "pcie.latency_ns": (10_000, parse_size),

    "host.os_page_size": (4096, parse_size),
    "host.cache_capacity_bytes": (8 * 1024 ** 3, parse_size),
    "host.ra_max_bytes": (128 * 1024, parse_size),
    "host.cpu_copy_ns_per_byte": (0.1, _float),

    "rpc.n_slots": (128, parse_size),
    "rpc.n_workers": (4, parse_size),
    "rpc.poll_interval_ns": (1000, parse_size),
    "rpc.staging_bytes": (2 * 1024 ** 2, parse_size),

    "gpu.sm_count": (15, parse_size),
    "gpu.max_threads_per_sm": (2048, parse_size),
    "gpu.threads_per_tb": (512, parse_size),
    "gpu.start_jitter_ns": (1000, parse_size),
    "gpu.dispatch_order": ("round-robin", _str),

    "gpufs.page_size": (4096, parse_size),
    "gpufs.cache_bytes": (256 * 1024 ** 2, parse_size),
    "gpufs.policy": ("global-lru-dealloc", _str),
    "gpufs.prefetch_bytes": (0, parse_size),
    "gpufs.lookup_ns": (200, parse_size),
    "gpufs.alloc_ns": (600, parse_size),
    "gpufs.dealloc_ns": (600, parse_size),
    "gpufs.remap_ns": (300, parse_size),
    "gpufs.global_contention_ns": (400, parse_size),
    "gpufs.copy_ns_per_byte": (0.005, _float),

    "workload.kind": ("strided", _str),          # strided | random | benchmark
    "workload.benchmark": ("", _str),
    "workload.scale": (1.0, _float),
    "workload.n_tb": (120, parse_size),
    "workload.file_bytes": (98_304_000, parse_size),  # 120 strides of 800KiB
    "workload.n_files": (1, parse_size),
    "workload.total_bytes": (0, parse_size),     # 0: read the files fully
    "workload.request_bytes": (64 * 1024, parse_size),
    "workload.requests_per_tb": (64, parse_size),  # random kind only
    "workload.compute_ns_per_byte": (0.0, _float),
    "workload.record_trace": ("", _str),

    "mode.ramfs": (False, _bool),
    "mode.pcie_disabled": (False, _bool),
    "mode.gpu_cache_disabled": (False, _bool),
    "mode.replay_trace": ("", _str),
}


class ExperimentConfig:
    """Bag of validated settings; copy_with for derived runs."""

    def __init__(self, overrides: dict | None = None):
        self.values = {k: d for k, (d, _p) in DEFAULTS.items()}
        if overrides:
            for k, v in overrides.items():
                self.set(k, v)
        self.validate()

    def set(self, key: str, raw) -> None:
        if key not in DEFAULTS:
            raise SimError(f"unknown config key {key!r}")
        _default, parser = DEFAULTS[key]
        self.values[key] = parser(raw) if isinstance(raw, str) else raw

    def __getitem__(self, key: str):
        return self.values[key]

    def copy_with(self, overrides: dict) -> "ExperimentConfig":
        cfg = ExperimentConfig()
        cfg.values = dict(self.values)
        for k, v in overrides.items():
            cfg.set(k, v)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        v = self.values
        if v["rpc.n_slots"] % v["rpc.n_workers"] != 0:
            raise SimError("rpc.n_slots must divide evenly across rpc.n_workers")
        if v["rpc.poll_interval_ns"] < 1:
            raise SimError("rpc.poll_interval_ns must be >= 1")
        for key in ("gpufs.page_size", "host.os_page_size", "workload.request_bytes",
                    "rpc.staging_bytes"):
            if v[key] < 1:
                raise SimError(f"{key} must be positive")
        if v["gpufs.page_size"] % v["host.os_page_size"] != 0:
            raise SimError("gpufs.page_size must be a multiple of host.os_page_size")
        if v["gpufs.prefetch_bytes"] % v["gpufs.page_size"] != 0:
            raise SimError("gpufs.prefetch_bytes must be a multiple of gpufs.page_size")
        if v["repetitions"] < 1:
            raise SimError("repetitions must be >= 1")
        if v["workload.kind"] not in ("strided", "random", "benchmark"):
            raise SimError(f"unknown workload.kind {v['workload.kind']!r}")
        for key in ("host.cpu_copy_ns_per_byte", "gpufs.copy_ns_per_byte",
                    "workload.compute_ns_per_byte"):
            if v[key] < 0:
                raise SimError(f"{key} must be >= 0")


def ns_per_byte_to_ps(value: float) -> int:
    """0.05 ns/byte -> 50 ps/byte, exact integer for event math."""
    ps = round(value * 1000)
    if abs(ps - value * 1000) > 1e-6:
        raise SimError(f"{value} ns/byte does not round to whole ps/byte")
    return int(ps)


def load_config(path: str | None, overrides: list[str] | None = None) -> ExperimentConfig:
    """Config from an optional key=value file plus command-line overrides."""
    cfg = ExperimentConfig()
    if path:
        if not os.path.exists(path):
            raise SimError(f"config file not found: {path}")
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise SimError(f"{path}:{lineno}: expected key=value, got {text!r}")
                key, _eq, val = text.partition("=")
                cfg.set(key.strip(), val.strip())
    for item in overrides or []:
        if "=" not in item:
            raise SimError(f"override must be key=value, got {item!r}")
        key, _eq, val = item.partition("=")
        cfg.set(key.strip(), val.strip())
    cfg.validate()
    return cfg
