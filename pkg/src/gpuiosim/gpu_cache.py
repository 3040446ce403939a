"""GPU-side file page cache with pluggable replacement.

Two policies:

- global-lru-dealloc: one global queue in allocation order; a miss with
  no free frame deallocates the least recently allocated valid frame and
  allocates a fresh one. Every structural op (alloc, dealloc) runs under
  a shared lock and additionally pays a contention penalty, modeling the
  synchronized global queue.
- per-tb-lra: each threadblock owns a FIFO queue of the frames it
  allocated, capped at floor(cache_pages / resident_limit). At the cap
  (or when no frame is free) the TB remaps its own queue head in place,
  a single cheap op touching no other TB's frames and no shared lock.
  When a TB finishes, its frames retire: the pages stay cached and
  hittable, but newly started TBs may reclaim retired frames (oldest
  allocation first) without touching any running TB's queue.

remap_ns < dealloc_ns + alloc_ns is enforced: the remap path must be
cheaper than the dealloc/realloc pair it replaces.
"""

from collections import deque
from dataclasses import dataclass, field

from gpuiosim.simcore import SimError

GLOBAL_LRU = "global-lru-dealloc"
PER_TB_LRA = "per-tb-lra"
POLICIES = (GLOBAL_LRU, PER_TB_LRA)


def lra_capacity(cache_bytes: int, page_size: int, resident_limit: int) -> int:
    """Per-TB queue cap: floor(cache pages / concurrently resident TBs)."""
    return (cache_bytes // page_size) // resident_limit


@dataclass(slots=True)
class Frame:
    file_id: int = -1
    page: int = -1
    valid: bool = False      # data installed
    inflight: bool = False   # allocated, RPC pending
    tag: int = 0
    nbytes: int = 0
    last_alloc_seq: int = 0
    owner_tb: int = -1
    waiters: list = field(default_factory=list)  # TBs blocked on this fetch


class GpuPageCache:
    """Maps (file, page) -> Frame; charges policy costs in TB-local time.

    Structural ops of the global policy serialize on `_lock_busy`; the
    caller's clock is pushed past the lock wait. Time math is returned,
    never scheduled here: the threadblock state machine owns scheduling.
    """

    def __init__(self, cache_bytes: int, page_size: int, policy: str,
                 resident_limit: int, lookup_ns: int, alloc_ns: int,
                 dealloc_ns: int, remap_ns: int, contention_ns: int, metrics):
        if policy not in POLICIES:
            raise SimError(f"unknown gpufs.policy {policy!r}")
        if remap_ns >= dealloc_ns + alloc_ns:
            raise SimError("gpufs.remap_ns must be < dealloc_ns + alloc_ns")
        if cache_bytes < page_size:
            raise SimError("gpufs.cache_bytes smaller than one page")
        self.page_size = page_size
        self.total_frames = cache_bytes // page_size
        self.free_frames = self.total_frames
        self.policy = policy
        self.quota = lra_capacity(cache_bytes, page_size, resident_limit)
        if policy == PER_TB_LRA and self.quota < 1:
            raise SimError(
                f"per-tb-lra needs cache_bytes/page_size >= resident TBs "
                f"({self.total_frames} frames for {resident_limit} TBs)")
        self.lookup_ns = lookup_ns
        self.alloc_ns = alloc_ns
        self.dealloc_ns = dealloc_ns
        self.remap_ns = remap_ns
        self.contention_ns = contention_ns
        self.metrics = metrics
        self.frames: dict[tuple[int, int], Frame] = {}
        self.global_fifo: dict[int, Frame] = {}  # alloc seq -> frame, FIFO
        self.tb_queues: dict[int, deque[Frame]] = {}
        self.retired: deque[Frame] = deque()  # frames of finished TBs
        self._alloc_seq = 0
        self._lock_busy = 0
        self.victim_log: list[tuple[int, int, int]] = []  # (tb, file, page)

    # -- ops ----------------------------------------------------------------

    def lookup(self, file_id: int, page: int, t: int) -> tuple[Frame | None, int]:
        """Hash lookup; returns (frame or None, time after charge)."""
        self.metrics.pc_lookups += 1
        return self.frames.get((file_id, page)), t + self.lookup_ns

    def _locked(self, t: int, dur: int) -> int:
        """Run a structural op under the global lock; returns completion time."""
        start = max(t, self._lock_busy)
        end = start + dur
        self._lock_busy = end
        return end

    def allocate(self, tb_id: int, file_id: int, page: int, t: int) -> tuple[Frame, int]:
        """Bind a frame to (file, page) for tb_id; returns (frame, time after costs).

        The returned frame is in-flight until install() or release().
        """
        key = (file_id, page)
        assert key not in self.frames, "allocate of a mapped page"
        if self.policy == GLOBAL_LRU:
            frame, t = self._allocate_global(tb_id, t)
        else:
            frame, t = self._allocate_per_tb(tb_id, t)
        frame.file_id, frame.page = file_id, page
        frame.valid = False
        frame.inflight = True
        frame.owner_tb = tb_id
        frame.last_alloc_seq = self._alloc_seq
        self._alloc_seq += 1
        self.frames[key] = frame
        if self.policy == GLOBAL_LRU:
            self.global_fifo[frame.last_alloc_seq] = frame
        return frame, t

    def _allocate_global(self, tb_id: int, t: int) -> tuple[Frame, int]:
        if self.free_frames > 0:
            self.free_frames -= 1
            t = self._locked(t, self.alloc_ns + self.contention_ns)
            self.metrics.pc_allocs += 1
            return Frame(), t
        victim = None
        for seq in self.global_fifo:  # insertion order == allocation order
            frame = self.global_fifo[seq]
            if frame.valid:
                victim = frame
                break
        if victim is None:
            raise SimError("global-lru-dealloc: every frame is in flight")
        del self.global_fifo[victim.last_alloc_seq]
        del self.frames[(victim.file_id, victim.page)]
        self.victim_log.append((tb_id, victim.file_id, victim.page))
        self.metrics.pc_evictions += 1
        self.metrics.pc_allocs += 1
        t = self._locked(t, self.dealloc_ns + self.alloc_ns + 2 * self.contention_ns)
        victim.valid = False
        return victim, t

    def _allocate_per_tb(self, tb_id: int, t: int) -> tuple[Frame, int]:
        queue = self.tb_queues.setdefault(tb_id, deque())
        if len(queue) < self.quota:
            if self.free_frames > 0:
                self.free_frames -= 1
                frame = Frame()
                queue.append(frame)
                self.metrics.pc_allocs += 1
                return frame, t + self.alloc_ns
            if self.retired:
                # reclaim a finished TB's frame; no running queue is touched
                victim = self.retired.popleft()
                assert victim.valid and not victim.inflight, "retired frame in flight"
                del self.frames[(victim.file_id, victim.page)]
                self.victim_log.append((tb_id, victim.file_id, victim.page))
                self.metrics.pc_remaps += 1
                queue.append(victim)
                victim.valid = False
                return victim, t + self.remap_ns
        if not queue:
            raise SimError(
                f"per-tb-lra: tb {tb_id} has no frames to recycle and none are free "
                f"(cache too small for the resident TB count)")
        victim = queue.popleft()  # least recently allocated own frame
        assert victim.valid and not victim.inflight, "per-tb victim in flight"
        del self.frames[(victim.file_id, victim.page)]
        self.victim_log.append((tb_id, victim.file_id, victim.page))
        self.metrics.pc_remaps += 1
        queue.append(victim)  # remapped in place, now most recently allocated
        victim.valid = False
        return victim, t + self.remap_ns

    def install(self, frame: Frame, tag: int, nbytes: int) -> list:
        """Fill an in-flight frame with data; returns waiters to wake."""
        assert frame.inflight, "install on a frame that is not in flight"
        frame.valid = True
        frame.inflight = False
        frame.tag = tag
        frame.nbytes = nbytes
        waiters, frame.waiters = frame.waiters, []
        return waiters

    def release(self, frame: Frame) -> list:
        """Unbind an in-flight frame (zero-byte RPC result past EOF)."""
        assert frame.inflight
        del self.frames[(frame.file_id, frame.page)]
        if self.policy == GLOBAL_LRU:
            del self.global_fifo[frame.last_alloc_seq]
            self.free_frames += 1
        else:
            queue = self.tb_queues[frame.owner_tb]
            assert queue[-1] is frame, "released frame is not the newest own frame"
            queue.pop()
            self.free_frames += 1
        frame.valid = False
        frame.inflight = False
        waiters, frame.waiters = frame.waiters, []
        return waiters

    def retire_tb(self, tb_id: int) -> None:
        """Move a finished TB's frames to the reclaim pool (pages stay cached)."""
        queue = self.tb_queues.pop(tb_id, None)
        if queue:
            self.retired.extend(queue)

    def mapped_pages(self) -> int:
        return len(self.frames)

    def check_unique_mapping(self) -> None:
        """No two frames may hold the same (file, page)."""
        seen = set()
        for key, frame in self.frames.items():
            assert (frame.file_id, frame.page) == key
            if key in seen:
                raise SimError(f"duplicate mapping for {key}")
            seen.add(key)
