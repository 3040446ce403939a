"""Threadblock execution: dispatch, residency, and the gread path.

A threadblock alternates file reads (gread) with a compute delay
proportional to the bytes read. gread walks the request page by page:

  1. page cache lookup; valid frame -> copy out (hit);
  2. frame in flight -> block until the fetching TB installs it;
  3. miss -> allocate a frame, check the private prefetch buffer;
     hit there -> fill the frame and copy out;
  4. otherwise RPC for page_size + prefetch_size bytes (page aligned,
     read-only files only), block until the slot is ready, install the
     requested page, push the remainder into the private buffer.

At most resident_limit TBs run concurrently: sm_count *
floor(max_threads_per_sm / threads_per_tb). When one finishes, the next
id in the dispatch order becomes resident. Start times carry a small
seeded jitter, the stand-in for hardware scheduling nondeterminism.
"""

from typing import NamedTuple

from gpuiosim.prefetcher import PrivateBuffer, request_span
from gpuiosim.rpc import IoRequest
from gpuiosim.simcore import SeededRng, SimError, cost_ns, page_tag, shuffled_order

ISSUING = "issuing"
WAITING_RPC = "waiting-rpc"
WAITING_FRAME = "waiting-frame"
COPYING = "copying"
COMPUTING = "computing"
DONE = "done"

DISPATCH_ORDERS = ("round-robin", "shuffled", "reverse")


class GpuConfig(NamedTuple):
    sm_count: int
    max_threads_per_sm: int
    threads_per_tb: int
    start_jitter_ns: int
    dispatch_order: str


def resident_limit(cfg: GpuConfig) -> int:
    """TBs that fit on the device at once."""
    per_sm = cfg.max_threads_per_sm // cfg.threads_per_tb
    limit = cfg.sm_count * per_sm
    if limit < 1:
        raise SimError("threads_per_tb exceeds max_threads_per_sm: nothing can run")
    return limit


class GpuContext(NamedTuple):
    """Shared wiring handed to every threadblock."""
    q: object
    cache: object
    rpc: object
    files: dict
    read_only: dict
    page_size: int
    prefetch_bytes: int
    gpu_copy_ps: int
    raw_mode: bool
    metrics: object


class ThreadBlock:
    """One threadblock: a program of (file, offset, length) segments read
    request_bytes at a time."""

    def __init__(self, tb_id: int, program: list[tuple[int, int, int]],
                 request_bytes: int, compute_ps: int, ctx: GpuContext, dispatcher):
        self.tb_id = tb_id
        self.program = program
        self.request_bytes = request_bytes
        self.compute_ps = compute_ps
        self.ctx = ctx
        self.dispatcher = dispatcher
        self.phase = ISSUING
        self.seg_idx = 0
        self.seg_off = 0  # consumed bytes of the current segment
        self.outstanding_rpc = False
        self.frame = None  # frame awaiting this TB's RPC data
        self.pb = PrivateBuffer(tb_id, ctx.prefetch_bytes, ctx.metrics)
        self.g_file = -1
        self.g_start = 0
        self.g_pos = 0
        self.g_end = 0

    # -- request loop ---------------------------------------------------------

    def start(self, at: int) -> None:
        self.ctx.q.schedule(at, "tb-start", self._next_request)

    def _next_request(self, now: int) -> None:
        while self.seg_idx < len(self.program):
            file_id, base, length = self.program[self.seg_idx]
            if self.seg_off < length:
                size = min(self.request_bytes, length - self.seg_off)
                self._gread(file_id, base + self.seg_off, size, now)
                return
            self.seg_idx += 1
            self.seg_off = 0
        self.phase = DONE
        self.dispatcher.on_tb_done(self, now)

    def _gread(self, file_id: int, offset: int, size: int, now: int) -> None:
        self.phase = ISSUING
        self.ctx.metrics.greads += 1
        self.g_file = file_id
        self.g_start = offset
        self.g_pos = offset
        self.g_end = offset + size
        if self.ctx.raw_mode:
            self.outstanding_rpc = True
            self.phase = WAITING_RPC
            self.ctx.rpc.submit(IoRequest(self.tb_id, file_id, offset, size, True),
                                self._on_raw_ready, now)
            return
        self._page_step(now)

    def _finish_gread(self, now: int, delivered: int) -> None:
        self.seg_off += delivered
        if delivered < self.g_end - self.g_start:
            # short read (EOF): nothing more to get from this segment
            self.seg_off = self.program[self.seg_idx][2]
        delay = cost_ns(delivered, self.compute_ps)
        self.phase = COMPUTING
        self.ctx.q.schedule(now + delay, "tb-compute-done", self._next_request)

    # -- raw mode (gpu page cache disabled) ------------------------------------

    def _on_raw_ready(self, slot, now: int) -> None:
        self.outstanding_rpc = False
        nbytes = slot.result_bytes
        self.ctx.rpc.release(slot, now)
        self.ctx.metrics.user_bytes += nbytes
        self._finish_gread(now, nbytes)

    # -- paged gread ------------------------------------------------------------

    def _page_step(self, now: int) -> None:
        ctx = self.ctx
        if self.g_pos >= self.g_end:
            self._finish_gread(now, self.g_pos - self.g_start)
            return
        file_size = ctx.files[self.g_file]
        if self.g_pos >= file_size:
            self._finish_gread(now, self.g_pos - self.g_start)
            return
        pg = ctx.page_size
        page = self.g_pos // pg
        page_end = min((page + 1) * pg, file_size)
        want = min(self.g_end, page_end) - self.g_pos

        frame, t = ctx.cache.lookup(self.g_file, page, now)
        if frame is not None and frame.valid:
            ctx.metrics.pc_hits += 1
            if frame.tag != page_tag(self.g_file, page):
                ctx.metrics.tag_mismatches += 1
            t += cost_ns(want, ctx.gpu_copy_ps)
            self._deliver(want, cache_hit=True)
            self.phase = COPYING
            self.g_pos += want
            ctx.q.schedule(t, "tb-page", self._page_step)
            return
        if frame is not None:
            # someone else is fetching this page: single flight, wait
            ctx.metrics.pc_hit_pending += 1
            self.phase = WAITING_FRAME
            frame.waiters.append(self._page_step)
            return

        ctx.metrics.pc_misses += 1
        frame, t = ctx.cache.allocate(self.tb_id, self.g_file, page, t)
        entry = self.pb.take(self.g_file, page)
        if entry is not None:
            nbytes, tag = entry
            for wake in ctx.cache.install(frame, tag, nbytes):
                ctx.q.schedule(t, "frame-ready", wake)
            if tag != page_tag(self.g_file, page):
                ctx.metrics.tag_mismatches += 1
            t += cost_ns(nbytes, ctx.gpu_copy_ps)   # staging copy into the frame
            t += cost_ns(want, ctx.gpu_copy_ps)     # frame to user buffer
            self._deliver(want, cache_hit=False)
            self.phase = COPYING
            self.g_pos += want
            ctx.q.schedule(t, "tb-page", self._page_step)
            return

        span = request_span(page * pg, pg, ctx.prefetch_bytes,
                            file_size, ctx.read_only[self.g_file])
        assert not self.outstanding_rpc, "second RPC while one is pending"
        self.outstanding_rpc = True
        self.frame = frame
        self.phase = WAITING_RPC
        req = IoRequest(self.tb_id, self.g_file, page * pg, span, False)
        ctx.q.schedule(t, "rpc-submit",
                       lambda _t, r=req: ctx.rpc.submit(r, self._on_slot_ready, _t))

    def _on_slot_ready(self, slot, now: int) -> None:
        ctx = self.ctx
        self.outstanding_rpc = False
        pages = slot.result_pages
        ctx.rpc.release(slot, now)
        frame, self.frame = self.frame, None
        if not pages:
            # zero bytes came back: the page starts at or past EOF
            for wake in ctx.cache.release(frame):
                ctx.q.schedule(now, "frame-ready", wake)
            self._finish_gread(now, self.g_pos - self.g_start)
            return
        page, nbytes, tag = pages[0]
        assert page == frame.page and frame.file_id == self.g_file
        t = now + cost_ns(nbytes, ctx.gpu_copy_ps)  # staging copy into the frame
        for wake in ctx.cache.install(frame, tag, nbytes):
            ctx.q.schedule(t, "frame-ready", wake)
        if len(pages) > 1:
            rest = pages[1:]
            self.pb.fill(self.g_file, rest)
            t += cost_ns(sum(nb for _p, nb, _t2 in rest), ctx.gpu_copy_ps)
        page_end = min(page * ctx.page_size + nbytes, ctx.files[self.g_file])
        want = min(self.g_end, page_end) - self.g_pos
        assert want > 0
        if tag != page_tag(self.g_file, page):
            ctx.metrics.tag_mismatches += 1
        t += cost_ns(want, ctx.gpu_copy_ps)
        self._deliver(want, cache_hit=False)
        self.phase = COPYING
        self.g_pos += want
        ctx.q.schedule(t, "tb-page", self._page_step)

    def _deliver(self, nbytes: int, cache_hit: bool) -> None:
        m = self.ctx.metrics
        m.user_bytes += nbytes
        if cache_hit:
            m.cache_hit_user_bytes += nbytes
        if m.log_deliveries:
            m.deliveries.append((self.tb_id, self.g_file, self.g_pos // self.ctx.page_size))


class Dispatcher:
    """Keeps at most resident_limit TBs active, in the configured order."""

    def __init__(self, q, tbs: list[ThreadBlock], limit: int, order: str,
                 rng: SeededRng, jitter_ns: int, on_all_done):
        if order not in DISPATCH_ORDERS:
            raise SimError(f"unknown gpu.dispatch_order {order!r}")
        self.q = q
        self.tbs = tbs
        self.limit = limit
        n = len(tbs)
        if order == "round-robin":
            self.order = list(range(n))
        elif order == "reverse":
            self.order = list(range(n - 1, -1, -1))
        else:
            self.order = shuffled_order(n, rng)
        # jitters drawn per TB id, independent of dispatch order
        self.jitter = [rng.below(jitter_ns + 1) if jitter_ns > 0 else 0 for _ in range(n)]
        self.next_idx = 0
        self.active = 0
        self.done_count = 0
        self.all_done_at = 0
        self.on_all_done = on_all_done

    def start(self) -> None:
        if not self.tbs:
            self.on_all_done(0)
            return
        while self.next_idx < len(self.tbs) and self.active < self.limit:
            self._activate(0)

    def _activate(self, now: int) -> None:
        tb = self.tbs[self.order[self.next_idx]]
        self.next_idx += 1
        self.active += 1
        assert self.active <= self.limit, "residency limit exceeded"
        tb.start(now + self.jitter[tb.tb_id])

    def on_tb_done(self, tb: ThreadBlock, now: int) -> None:
        self.active -= 1
        self.done_count += 1
        tb.pb.drain()
        if tb.ctx.cache is not None:
            tb.ctx.cache.retire_tb(tb.tb_id)
        if self.next_idx < len(self.tbs):
            self._activate(now)
        if self.done_count == len(self.tbs):
            self.all_done_at = now
            self.on_all_done(now)
