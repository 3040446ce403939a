"""Workload construction: access programs, benchmark registry, traces.

A workload assigns every threadblock a program, a list of
(file_id, offset, length) segments it reads in order, request_bytes at a
time. The two generators cover the experiment grid:

  sequential strided   the input span is split into n_tb equal strides,
                       TB i reads stride i front to back (the standard
                       data-parallel partitioning);
  random uniform       each TB reads page-aligned request-sized records
                       at seeded uniform offsets.

The benchmark registry pins the input-set shapes of fourteen GPU
benchmark workloads (file count, file sizes, threadblock count). A scale
factor shrinks them proportionally so a full grid runs at desk scale.
"""

import os
from typing import NamedTuple

from gpuiosim.simcore import SeededRng, SimError


class WorkloadSpec(NamedTuple):
    name: str
    files: dict            # file_id -> size in bytes
    read_only: dict        # file_id -> bool
    programs: list         # per-TB list of (file_id, offset, length)
    request_bytes: int
    total_bytes: int       # sum of all segment lengths
    unique_bytes: int      # size of the union of all segments


def _unique_bytes(programs) -> int:
    by_file = {}
    for prog in programs:
        for fid, off, length in prog:
            by_file.setdefault(fid, []).append((off, off + length))
    total = 0
    for spans in by_file.values():
        spans.sort()
        cur_lo, cur_hi = spans[0]
        for lo, hi in spans[1:]:
            if lo > cur_hi:
                total += cur_hi - cur_lo
                cur_lo, cur_hi = lo, hi
            else:
                cur_hi = max(cur_hi, hi)
        total += cur_hi - cur_lo
    return total


def _segments_for_stride(files: list[int], start: int, length: int) -> list[tuple[int, int, int]]:
    """Map [start, start+length) of the concatenated files to per-file runs."""
    segs = []
    base = 0
    for fid, size in enumerate(files):
        lo = max(start, base)
        hi = min(start + length, base + size)
        if lo < hi:
            segs.append((fid, lo - base, hi - lo))
        base += size
    return segs


def gen_sequential_strided(files: list[int], n_tb: int, total_bytes: int,
                           request_bytes: int, page_size: int,
                           name: str = "strided") -> WorkloadSpec:
    capacity = sum(files)
    if total_bytes > capacity:
        raise SimError(f"workload reads {total_bytes} bytes but files hold {capacity}")
    if n_tb < 1 or total_bytes % n_tb != 0:
        raise SimError(f"total_bytes {total_bytes} not divisible by {n_tb} threadblocks")
    stride = total_bytes // n_tb
    if request_bytes > stride:
        raise SimError(f"request_bytes {request_bytes} exceeds stride {stride}")
    programs = [_segments_for_stride(files, i * stride, stride) for i in range(n_tb)]
    return WorkloadSpec(name, {i: s for i, s in enumerate(files)},
                        {i: True for i in range(len(files))},
                        programs, request_bytes, total_bytes,
                        _unique_bytes(programs))


def gen_random_uniform(file_bytes: int, n_tb: int, requests_per_tb: int,
                       request_bytes: int, page_size: int, rng: SeededRng,
                       name: str = "random") -> WorkloadSpec:
    """Page-aligned random reads; each request is its own one-shot segment."""
    if request_bytes > file_bytes:
        raise SimError("request larger than the file")
    n_slots = (file_bytes - request_bytes) // page_size + 1
    programs = []
    total = 0
    for _tb in range(n_tb):
        prog = []
        for _r in range(requests_per_tb):
            off = rng.below(n_slots) * page_size
            prog.append((0, off, request_bytes))
            total += request_bytes
        programs.append(prog)
    return WorkloadSpec(name, {0: file_bytes}, {0: True},
                        programs, request_bytes, total,
                        _unique_bytes(programs))


# Benchmark input sets: (file sizes in bytes, threadblock count).
# Sizes are the published input footprints, decimal bytes.
BENCHMARKS = {
    "hotspot":    ([1_000_000_000, 1_000_000_000], 128),
    "lud":        ([256_000_000], 128),
    "backprop":   ([3_250_000_000], 128),
    "bfs":        ([1_100_000_000], 128),
    "dwt2d":      ([768_000_000], 128),
    "nw":         ([950_000_000, 950_000_000], 100),
    "pathfinder": ([1_000_000, 952_000_000], 100),
    "stencil":    ([1_000_000_000], 128),
    "2dconv":     ([1_000_000_000], 128),
    "3dconv":     ([512_000_000], 128),
    "gesummv":    ([950_000_000], 128),
    "mvt":        ([950_000_000], 128),
    "bicg":       ([950_000_000], 128),
    "atax":       ([950_000_000], 128),
}


def benchmark_workload(name: str, request_bytes: int, page_size: int,
                       scale: float = 1.0) -> WorkloadSpec:
    """Strided read of a benchmark's input files, optionally scaled down.

    Scaled sizes snap to page multiples and the total snaps to a
    threadblock multiple, so strides stay aligned at any scale.
    """
    if name not in BENCHMARKS:
        raise SimError(f"unknown benchmark {name!r}; have {sorted(BENCHMARKS)}")
    sizes, n_tb = BENCHMARKS[name]
    scaled = []
    for s in sizes:
        pages = max(1, int(s * scale) // page_size)
        scaled.append(pages * page_size)
    chunk = n_tb * page_size
    total = (sum(scaled) // chunk) * chunk
    if total == 0:
        raise SimError(f"scale {scale} leaves {name} with no whole stride")
    if request_bytes > total // n_tb:
        request_bytes = total // n_tb
    return gen_sequential_strided(scaled, n_tb, total, request_bytes,
                                  page_size, name=name)


# -- traces --------------------------------------------------------------------

class TraceRecord(NamedTuple):
    tb_id: int
    file_id: int
    offset: int
    size: int


def save_trace(path: str, records: list[TraceRecord]) -> None:
    with open(path, "w") as fh:
        fh.write("# tb_id file_id offset size\n")
        for r in records:
            fh.write(f"{r.tb_id} {r.file_id} {r.offset} {r.size}\n")


def load_trace(path: str) -> list[TraceRecord]:
    if not os.path.exists(path):
        raise SimError(f"trace file not found: {path}")
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 4:
                raise SimError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                vals = [int(p) for p in parts]
            except ValueError:
                raise SimError(f"{path}:{lineno}: fields must be decimal integers")
            tb_id, file_id, offset, size = vals
            if tb_id < 0 or file_id < 0 or offset < 0 or size <= 0:
                raise SimError(f"{path}:{lineno}: out-of-range field in {text!r}")
            records.append(TraceRecord(tb_id, file_id, offset, size))
    if not records:
        raise SimError(f"{path}: trace has no records")
    return records
