"""Experiment harness: repetition loops, parameter sweeps, figure presets.

A preset is a named list of (label, config) arms at desk scale. Every
arm runs `repetitions` times with seeds seed, seed+1, ...; the CSV gets
one row per repetition plus an arithmetic-mean row per arm. Output is
CSV only; plotting stays outside the package.
"""

import os

from gpuiosim.config import ExperimentConfig
from gpuiosim.metrics import MetricsReport, mean_report, write_csv
from gpuiosim.simcore import SimError
from gpuiosim.simulation import Simulation
from gpuiosim.workloads import BENCHMARKS

KiB = 1024
MiB = 1024 ** 2


def run_config(cfg: ExperimentConfig, label: str) -> list[MetricsReport]:
    """All repetitions of one arm, mean row appended."""
    reports = []
    for rep in range(cfg["repetitions"]):
        sim = Simulation(cfg, cfg["seed"] + rep, label=label, rep=rep)
        reports.append(sim.run())
    reports.append(mean_report(reports[: cfg["repetitions"]]))
    return reports


def sweep(cfg: ExperimentConfig, param: str, values: list[str]) -> list[MetricsReport]:
    rows = []
    for v in values:
        arm = cfg.copy_with({param: v})
        rows.extend(run_config(arm, label=f"{param}={v}"))
    return rows


# -- presets ---------------------------------------------------------------

# 120 threadblocks striding a 98304000-byte file: 800KiB per stride
_MICRO = {
    "workload.kind": "strided",
    "workload.n_tb": 120,
    "workload.file_bytes": 98_304_000,
    "workload.n_files": 1,
}
_STRIDE = 98_304_000 // 120


def _arms_fig2(base: ExperimentConfig):
    # each threadblock reads its whole segment in one call; only the
    # cache page size varies between arms
    for size in (4 * KiB, 16 * KiB, 64 * KiB, 256 * KiB, 1024 * KiB):
        yield f"page-{size}", base.copy_with({
            **_MICRO,
            "gpufs.page_size": size,
            "workload.request_bytes": _STRIDE,
            "gpufs.prefetch_bytes": 0,
        })


def _arms_fig5(base: ExperimentConfig):
    for size in (64 * KiB, 128 * KiB, 256 * KiB, 1024 * KiB):
        yield f"request-{size}", base.copy_with({
            **_MICRO,
            "gpufs.page_size": size,
            "workload.request_bytes": min(size, _STRIDE),
            "gpufs.prefetch_bytes": 0,
        })


def _arms_fig6(base: ExperimentConfig):
    for size in (4 * KiB, 16 * KiB, 64 * KiB, 256 * KiB, 1024 * KiB):
        yield f"ramfs-page-{size}", base.copy_with({
            **_MICRO,
            "mode.ramfs": True,
            "gpufs.page_size": size,
            "workload.request_bytes": _STRIDE,
            "gpufs.prefetch_bytes": 0,
        })


def _arms_fig8(base: ExperimentConfig):
    for pf in (0, 12 * KiB, 28 * KiB, 60 * KiB, 124 * KiB, 252 * KiB):
        yield f"prefetch-{pf}", base.copy_with({
            **_MICRO,
            "gpufs.page_size": 4 * KiB,
            "workload.request_bytes": 64 * KiB,
            "gpufs.prefetch_bytes": pf,
        })


def _arms_fig10micro(base: ExperimentConfig):
    # read twice the GPU page cache size so replacement is always active
    pressure = {
        **_MICRO,
        "gpufs.cache_bytes": 98_304_000 // 2,
        "gpufs.page_size": 4 * KiB,
        "workload.request_bytes": 64 * KiB,
    }
    yield "lra-prefetch", base.copy_with({
        **pressure, "gpufs.policy": "per-tb-lra", "gpufs.prefetch_bytes": 60 * KiB})
    yield "global-prefetch", base.copy_with({
        **pressure, "gpufs.policy": "global-lru-dealloc", "gpufs.prefetch_bytes": 60 * KiB})
    yield "baseline-4k", base.copy_with({
        **pressure, "gpufs.policy": "global-lru-dealloc", "gpufs.prefetch_bytes": 0})


def _bench_arm_overrides(scale: float):
    cache = max(int(500_000_000 * scale), 4 * MiB)
    return [
        ("baseline-4k", {"gpufs.policy": "global-lru-dealloc",
                         "gpufs.prefetch_bytes": 0, "gpufs.cache_bytes": cache}),
        ("prefetch", {"gpufs.policy": "global-lru-dealloc",
                      "gpufs.prefetch_bytes": 60 * KiB, "gpufs.cache_bytes": cache}),
        ("lra-prefetch", {"gpufs.policy": "per-tb-lra",
                          "gpufs.prefetch_bytes": 60 * KiB, "gpufs.cache_bytes": cache}),
    ]


def _arms_bench(base: ExperimentConfig):
    scale = base["workload.scale"]
    for name in sorted(BENCHMARKS):
        for arm, over in _bench_arm_overrides(scale):
            yield f"{name}-{arm}", base.copy_with({
                "workload.kind": "benchmark",
                "workload.benchmark": name,
                "gpufs.page_size": 4 * KiB,
                "workload.request_bytes": 64 * KiB,
                **over,
            })


def _run_fig3(base: ExperimentConfig, out_dir: str) -> list[MetricsReport]:
    """GPU pattern vs its host-side replay, PCIe and GPU cache out of the loop."""
    rows = []
    for size in (4 * KiB, 16 * KiB, 64 * KiB, 128 * KiB, 256 * KiB, 800 * KiB):
        trace_path = os.path.join(out_dir, f"fig3-trace-{size}.txt")
        gpu_cfg = base.copy_with({
            **_MICRO,
            "repetitions": 1,
            "workload.request_bytes": size,
            "mode.gpu_cache_disabled": True,
            "mode.pcie_disabled": True,
            "workload.record_trace": trace_path,
        })
        rows.extend(run_config(gpu_cfg, label=f"gpu-pattern-{size}"))
        replay_cfg = base.copy_with({
            **_MICRO,
            "repetitions": 1,
            "workload.request_bytes": size,
            "mode.replay_trace": trace_path,
        })
        rows.extend(run_config(replay_cfg, label=f"cpu-replay-{size}"))
    return rows


PRESETS = ("fig2", "fig3", "fig5", "fig6", "fig8", "fig10micro", "bench")


def run_preset(name: str, base: ExperimentConfig, out_dir: str) -> str:
    """Execute a preset; returns the CSV path it wrote."""
    os.makedirs(out_dir, exist_ok=True)
    if name == "fig3":
        rows = _run_fig3(base, out_dir)
    else:
        builders = {
            "fig2": _arms_fig2,
            "fig5": _arms_fig5,
            "fig6": _arms_fig6,
            "fig8": _arms_fig8,
            "fig10micro": _arms_fig10micro,
            "bench": _arms_bench,
        }
        if name not in builders:
            raise SimError(f"unknown preset {name!r}; have {', '.join(PRESETS)}")
        rows = []
        for label, cfg in builders[name](base):
            rows.extend(run_config(cfg, label))
    path = os.path.join(out_dir, f"{name}.csv")
    write_csv(path, rows)
    return path
