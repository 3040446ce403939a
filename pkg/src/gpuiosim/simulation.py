"""One simulation run: component wiring, event loop, invariant checks.

Two execution modes share the host stack:

  gpu     threadblocks drive reads through the RPC slots and the GPU
          page cache (optionally bypassing cache and PCIe);
  replay  a recorded request trace drives the host path directly, one
          stream per host worker, no GPU in the loop.

Every run finishes with conservation checks; a violation raises rather
than producing a quietly wrong report.
"""

from gpuiosim.config import ExperimentConfig, ns_per_byte_to_ps
from gpuiosim.devices import PcieModel, SsdModel
from gpuiosim.gpu_cache import GpuPageCache
from gpuiosim.gpu_exec import (Dispatcher, GpuConfig, GpuContext, ThreadBlock,
                               resident_limit)
from gpuiosim.host_os import HostOs
from gpuiosim.metrics import Metrics, MetricsReport, build_report
from gpuiosim.rpc import HostWorker, RpcQueue, slot_for_threadblock
from gpuiosim.simcore import EventQueue, SeededRng, SimError
from gpuiosim.workloads import (TraceRecord, WorkloadSpec, _unique_bytes,
                                benchmark_workload, gen_random_uniform,
                                gen_sequential_strided, load_trace, save_trace)

_WORKLOAD_STREAM = 1
_DISPATCH_STREAM = 2


def build_workload(cfg: ExperimentConfig, rng: SeededRng) -> WorkloadSpec:
    kind = cfg["workload.kind"]
    page = cfg["gpufs.page_size"]
    request = cfg["workload.request_bytes"]
    if kind == "benchmark":
        if not cfg["workload.benchmark"]:
            raise SimError("workload.kind=benchmark needs workload.benchmark=NAME")
        return benchmark_workload(cfg["workload.benchmark"], request, page,
                                  cfg["workload.scale"])
    if kind == "strided":
        files = [cfg["workload.file_bytes"]] * cfg["workload.n_files"]
        total = cfg["workload.total_bytes"] or sum(files)
        return gen_sequential_strided(files, cfg["workload.n_tb"], total,
                                      request, page)
    return gen_random_uniform(cfg["workload.file_bytes"], cfg["workload.n_tb"],
                              cfg["workload.requests_per_tb"], request, page,
                              rng.fork(_WORKLOAD_STREAM))


def trace_workload(records: list[TraceRecord], cfg: ExperimentConfig) -> WorkloadSpec:
    """Wrap a trace in a WorkloadSpec against the configured files."""
    files = {i: cfg["workload.file_bytes"] for i in range(cfg["workload.n_files"])}
    programs = {}
    for i, r in enumerate(records):
        if r.file_id not in files:
            raise SimError(f"trace record {i}: unknown file {r.file_id}")
        if r.offset + r.size > files[r.file_id]:
            raise SimError(f"trace record {i}: read past EOF")
        programs.setdefault(r.tb_id, []).append((r.file_id, r.offset, r.size))
    progs = [programs[k] for k in sorted(programs)]
    total = sum(r.size for r in records)
    return WorkloadSpec("replay", files, {i: True for i in files}, progs,
                        max(r.size for r in records), total,
                        _unique_bytes(progs))


class HostStream:
    """Replay actor: issues its requests back-to-back through the host."""

    def __init__(self, sid: int, q: EventQueue, host: HostOs,
                 requests: list[tuple[int, int, int]], metrics, on_done):
        self.sid = sid
        self.q = q
        self.host = host
        self.requests = requests
        self.metrics = metrics
        self.on_done = on_done
        self.idx = 0
        self.blocked_ns = 0

    def start(self, at: int) -> None:
        self.q.schedule(at, "stream-start", self._next)

    def _next(self, now: int) -> None:
        if self.idx == len(self.requests):
            self.on_done(self, now)
            return
        fid, off, size = self.requests[self.idx]
        self.idx += 1
        self.host.pread(fid, off, size, now, self._done)

    def _done(self, nbytes: int, now: int, blocked: int) -> None:
        self.blocked_ns += blocked
        self.metrics.user_bytes += nbytes
        self._next(now)


class Simulation:
    """Wires one configured run and executes it to completion."""

    def __init__(self, cfg: ExperimentConfig, seed: int,
                 label: str = "run", rep: int = 0):
        self.cfg = cfg
        self.seed = seed
        self.label = label
        self.rep = rep
        self.q = EventQueue()
        self.metrics = Metrics()
        rng = SeededRng(seed)

        self.replaying = bool(cfg["mode.replay_trace"])
        if self.replaying:
            self.trace = load_trace(cfg["mode.replay_trace"])
            self.workload = trace_workload(self.trace, cfg)
        else:
            self.trace = None
            self.workload = build_workload(cfg, rng)

        self.ssd = SsdModel(cfg["ssd.bandwidth_bytes_per_s"],
                            cfg["ssd.base_latency_ns"],
                            cfg["ssd.max_inflight"],
                            instant=cfg["mode.ramfs"])
        self.pcie = PcieModel(cfg["pcie.bandwidth_bytes_per_s"],
                              cfg["pcie.latency_ns"])
        self.host = HostOs(self.q, self.ssd, self.workload.files,
                           cfg["host.os_page_size"],
                           cfg["host.cache_capacity_bytes"],
                           cfg["host.ra_max_bytes"],
                           ns_per_byte_to_ps(cfg["host.cpu_copy_ns_per_byte"]),
                           self.metrics)

        self.workers: list[HostWorker] = []
        self.streams: list[HostStream] = []
        self.cache = None
        self.dispatcher = None
        self.recorded: list[TraceRecord] | None = None
        self._finished = False
        self.end_at = 0

        if self.replaying:
            self._wire_replay(cfg)
        else:
            self._wire_gpu(cfg, rng)

    # -- wiring -----------------------------------------------------------

    def _wire_replay(self, cfg: ExperimentConfig) -> None:
        n_slots = cfg["rpc.n_slots"]
        per_worker = n_slots // cfg["rpc.n_workers"]
        groups: dict[int, list] = {}
        for r in self.trace:
            wid = slot_for_threadblock(r.tb_id, n_slots) // per_worker
            groups.setdefault(wid, []).append((r.file_id, r.offset, r.size))
        self._streams_left = len(groups)
        for wid in sorted(groups):
            self.streams.append(HostStream(wid, self.q, self.host,
                                           groups[wid], self.metrics,
                                           self._stream_done))

    def _stream_done(self, stream: HostStream, now: int) -> None:
        self._streams_left -= 1
        if self._streams_left == 0:
            self.end_at = now
            self._finished = True

    def _wire_gpu(self, cfg: ExperimentConfig, rng: SeededRng) -> None:
        recorder = None
        if cfg["workload.record_trace"]:
            self.recorded = []
            recorder = (lambda tb, fid, off, size:
                        self.recorded.append(TraceRecord(tb, fid, off, size)))
        rpc = RpcQueue(self.q, cfg["rpc.n_slots"], self.metrics)
        per_worker = cfg["rpc.n_slots"] // cfg["rpc.n_workers"]
        for w in range(cfg["rpc.n_workers"]):
            worker = HostWorker(w, rpc, self.host, self.pcie,
                                cfg["rpc.poll_interval_ns"],
                                cfg["rpc.staging_bytes"],
                                cfg["gpufs.page_size"],
                                cfg["mode.pcie_disabled"],
                                self.metrics, recorder)
            worker.slot_lo = w * per_worker
            worker.slot_hi = (w + 1) * per_worker
            self.workers.append(worker)
        rpc.workers = self.workers

        gpu_cfg = GpuConfig(cfg["gpu.sm_count"], cfg["gpu.max_threads_per_sm"],
                            cfg["gpu.threads_per_tb"], cfg["gpu.start_jitter_ns"],
                            cfg["gpu.dispatch_order"])
        limit = resident_limit(gpu_cfg)
        raw = cfg["mode.gpu_cache_disabled"]
        if not raw:
            self.cache = GpuPageCache(cfg["gpufs.cache_bytes"],
                                      cfg["gpufs.page_size"],
                                      cfg["gpufs.policy"], limit,
                                      cfg["gpufs.lookup_ns"], cfg["gpufs.alloc_ns"],
                                      cfg["gpufs.dealloc_ns"], cfg["gpufs.remap_ns"],
                                      cfg["gpufs.global_contention_ns"],
                                      self.metrics)
        ctx = GpuContext(self.q, self.cache, rpc, self.workload.files,
                         self.workload.read_only, cfg["gpufs.page_size"],
                         cfg["gpufs.prefetch_bytes"],
                         ns_per_byte_to_ps(cfg["gpufs.copy_ns_per_byte"]),
                         raw, self.metrics)
        compute_ps = ns_per_byte_to_ps(cfg["workload.compute_ns_per_byte"])
        tbs = [ThreadBlock(i, prog, self.workload.request_bytes, compute_ps,
                           ctx, None)
               for i, prog in enumerate(self.workload.programs)]
        self.dispatcher = Dispatcher(self.q, tbs, limit, gpu_cfg.dispatch_order,
                                     rng.fork(_DISPATCH_STREAM),
                                     gpu_cfg.start_jitter_ns, self._gpu_done)
        for tb in tbs:
            tb.dispatcher = self.dispatcher

    def _gpu_done(self, now: int) -> None:
        self.end_at = now
        self._finished = True

    # -- execution ----------------------------------------------------------

    def run(self) -> MetricsReport:
        if self.replaying:
            for s in self.streams:
                s.start(0)
        else:
            for w in self.workers:
                w.start()
            self.dispatcher.start()
        while not self._finished:
            ev = self.q.pop()
            if ev is None:
                break
            ev.action(ev.fire_at)
        if not self._finished:
            raise SimError("deadlock: event queue drained with work unfinished")
        for w in self.workers:
            w.settle_spins(self.end_at)
        self._verify()
        if self.recorded is not None and self.cfg["workload.record_trace"]:
            save_trace(self.cfg["workload.record_trace"], self.recorded)
        return build_report(self.label, self.workload.name, self.seed, self.rep,
                            self.metrics, self.pcie, self.ssd, self.workers,
                            self.end_at)

    # -- invariants -----------------------------------------------------------

    def _verify(self) -> None:
        m = self.metrics
        if not self.q.conservation_ok():
            raise SimError("event conservation violated")
        if m.tag_mismatches:
            raise SimError(f"{m.tag_mismatches} pages delivered with wrong content")
        if self.cache is not None:
            self.cache.check_unique_mapping()
        w = self.workload
        in_bounds = all(off + length <= w.files[fid]
                        for prog in w.programs for fid, off, length in prog)
        if in_bounds and m.user_bytes != w.total_bytes:
            raise SimError(f"delivered {m.user_bytes} of {w.total_bytes} bytes")
        if self.ssd.bytes_read < w.unique_bytes:
            raise SimError("SSD read less than the unique workload bytes")
        if (not self.replaying and not self.cfg["mode.pcie_disabled"]):
            moved = m.user_bytes - m.cache_hit_user_bytes
            if self.pcie.bytes_moved < moved:
                raise SimError("PCIe moved less than the delivered bytes")
