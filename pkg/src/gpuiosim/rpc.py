"""GPU-to-CPU RPC queue and the host worker threads that drain it.

The queue is an array of n_slots slots; threadblock tb writes slot
tb % n_slots (FIFO waiters when occupied). Each worker owns a contiguous
range of n_slots / n_workers slots and polls them in index order every
poll_interval while idle, counting empty scans as spins. Service is
strictly one slot at a time per worker: pread the requested span, stage
the returned pages, push one PCIe transfer per staging-capacity batch,
mark the slot ready when the last batch lands, then poll again.
"""

from typing import NamedTuple

from gpuiosim.simcore import EventQueue, SimError, page_tag

EMPTY, PENDING, IN_SERVICE, READY = "empty", "pending", "in-service", "ready"


class IoRequest(NamedTuple):
    tb_id: int
    file_id: int
    offset: int
    size: int
    raw: bool  # bypass page semantics (gpu cache disabled mode)


def slot_for_threadblock(tb_id: int, n_slots: int) -> int:
    return tb_id % n_slots


def batch_ready(chunk_sizes: list[int], staging_bytes: int) -> list[int]:
    """Coalesce staged chunks into transfer sizes of at most staging_bytes.

    Chunks pack greedily in order; a single chunk larger than the staging
    buffer is split. Returns the list of transfer byte counts.
    """
    if staging_bytes < 1:
        raise SimError("rpc.staging_bytes must be >= 1")
    batches: list[int] = []
    cur = 0
    for size in chunk_sizes:
        if size <= 0:
            continue
        while size > 0:
            room = staging_bytes - cur
            if room == 0:
                batches.append(cur)
                cur = 0
                room = staging_bytes
            piece = min(size, room)
            cur += piece
            size -= piece
    if cur:
        batches.append(cur)
    return batches


class Slot:
    __slots__ = ("index", "state", "request", "result_pages", "result_bytes",
                 "ready_cb", "waiters")

    def __init__(self, index: int):
        self.index = index
        self.state = EMPTY
        self.request: IoRequest | None = None
        self.result_pages: list[tuple[int, int, int]] = []  # (page, nbytes, tag)
        self.result_bytes = 0
        self.ready_cb = None
        self.waiters: list[tuple[IoRequest, object]] = []


class RpcQueue:
    """Slot array shared by all threadblocks and workers."""

    def __init__(self, q: EventQueue, n_slots: int, metrics):
        self.q = q
        self.n_slots = n_slots
        self.slots = [Slot(i) for i in range(n_slots)]
        self.metrics = metrics
        self.workers: list = []  # populated by the wiring; index by slot range

    def submit(self, req: IoRequest, ready_cb, now: int) -> None:
        """Place a request in the TB's slot; queue behind it if occupied."""
        slot = self.slots[slot_for_threadblock(req.tb_id, self.n_slots)]
        if slot.state != EMPTY:
            self.metrics.slot_collisions += 1
            slot.waiters.append((req, ready_cb))
            return
        self._write(slot, req, ready_cb)

    def _write(self, slot: Slot, req: IoRequest, ready_cb) -> None:
        slot.state = PENDING
        slot.request = req
        slot.result_pages = []
        slot.result_bytes = 0
        slot.ready_cb = ready_cb
        self.metrics.rpc_count += 1
        self.metrics.rpc_requested_bytes += req.size
        for w in self.workers:
            if w.slot_lo <= slot.index < w.slot_hi:
                w.notify(self.q.now)
                break

    def release(self, slot: Slot, now: int) -> None:
        """Consumer is done with a ready slot; hand it to the next waiter."""
        assert slot.state == READY
        slot.state = EMPTY
        slot.request = None
        slot.ready_cb = None
        if slot.waiters:
            req, cb = slot.waiters.pop(0)
            self.q.schedule(now, "slot-write",
                            lambda _t, s=slot, r=req, c=cb: self._write(s, r, c))


class HostWorker:
    """One host thread: polls its slot range, services one slot at a time."""

    def __init__(self, worker_id: int, queue: RpcQueue, host, pcie,
                 poll_interval_ns: int, staging_bytes: int, page_size: int,
                 pcie_disabled: bool, metrics, recorder=None):
        self.id = worker_id
        self.queue = queue
        self.host = host
        self.pcie = pcie
        self.poll_interval = poll_interval_ns
        self.staging_bytes = staging_bytes
        self.page_size = page_size
        self.pcie_disabled = pcie_disabled
        self.metrics = metrics
        self.recorder = recorder
        self.slot_lo = 0
        self.slot_hi = 0
        self.busy = False
        self.stopped = False
        self.parked_at = None  # tick of the last empty scan, None if active
        self.spin_count = 0
        self.first_service_spins = -1
        self.first_service_at = -1

    def start(self) -> None:
        self.queue.q.schedule(0, "worker-poll", self.poll)

    def poll(self, now: int) -> None:
        """One scan of the owned slot range at a poll tick.

        An empty scan parks the worker instead of scheduling the next
        tick literally; notify() later computes the exact tick at which
        a literal 200ns poll loop would have seen the write, and the
        skipped empty ticks are added to spin_count. Observable behavior
        (service times, spin counts) is identical to literal polling;
        only the idle event traffic disappears.
        """
        if self.stopped:
            return
        assert not self.busy, "poll while servicing"
        for i in range(self.slot_lo, self.slot_hi):
            slot = self.queue.slots[i]
            if slot.state == PENDING:
                if self.first_service_spins < 0:
                    self.first_service_spins = self.spin_count
                    self.first_service_at = now
                self._service(slot, now)
                return
        self.spin_count += 1
        self.parked_at = now

    def notify(self, now: int) -> None:
        """A slot in this worker's range was written at time `now`."""
        if self.stopped or self.busy or self.parked_at is None:
            return
        anchor = self.parked_at
        self.parked_at = None
        # first poll tick strictly after the write (a tick at the write
        # instant scans before the write lands, same as the event order)
        ticks = (now - anchor) // self.poll_interval + 1
        self.queue.q.schedule(anchor + ticks * self.poll_interval, "worker-wake",
                              lambda t, a=anchor: self._wake(a, t))

    def _wake(self, anchor: int, now: int) -> None:
        if self.stopped:
            return
        self.spin_count += (now - anchor) // self.poll_interval - 1
        self.poll(now)

    def settle_spins(self, end_at: int) -> None:
        """Account the empty ticks a parked worker would have spun by end_at."""
        if self.parked_at is not None and end_at > self.parked_at:
            self.spin_count += (end_at - self.parked_at) // self.poll_interval
            self.parked_at = end_at

    def _service(self, slot: Slot, now: int) -> None:
        self.busy = True
        slot.state = IN_SERVICE
        req = slot.request
        if self.recorder is not None:
            self.recorder(req.tb_id, req.file_id, req.offset, req.size)
        self.host.pread(req.file_id, req.offset, req.size, now,
                        lambda nbytes, t, _blocked, s=slot: self._pread_done(s, nbytes, t))

    def _pread_done(self, slot: Slot, nbytes: int, now: int) -> None:
        req = slot.request
        pages: list[tuple[int, int, int]] = []
        if not req.raw and nbytes > 0:
            # split into GPU pages with per-page metadata and content tags
            first = req.offset // self.page_size
            last = (req.offset + nbytes - 1) // self.page_size
            for p in range(first, last + 1):
                pstart = p * self.page_size
                pbytes = min(self.page_size, req.offset + nbytes - pstart)
                pages.append((p, pbytes, page_tag(req.file_id, p)))
        if self.pcie_disabled or nbytes == 0:
            self._ready(slot, pages, nbytes, now)
            return
        done = now
        for batch in batch_ready([nb for _p, nb, _t in pages] if pages else [nbytes],
                                 self.staging_bytes):
            done = self.pcie.transfer(batch, now)
        self.queue.q.schedule(done, "pcie-complete",
                              lambda t, s=slot, pg=pages, nb=nbytes: self._ready(s, pg, nb, t))

    def _ready(self, slot: Slot, pages, nbytes: int, now: int) -> None:
        slot.state = READY
        slot.result_pages = pages
        slot.result_bytes = nbytes
        cb = slot.ready_cb
        self.queue.q.schedule(now, "slot-ready", lambda t, c=cb, s=slot: c(s, t))
        self.busy = False
        self.queue.q.schedule(now, "worker-poll", self.poll)
