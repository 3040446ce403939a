"""Host OS layer: page cache with LRU eviction and ondemand readahead.

The readahead engine mimics the Linux scheme at page granularity:

- cold sequential read: initial window = min(4 * requested pages, ra_max),
  requested pages fetched synchronously, the tail asynchronously, with a
  marker on the first purely-async page;
- read hitting a marker: the next window is issued (double the current
  one, capped at ra_max) and the marker advances to its first page. If
  the hit does not match the per-file window state the stream is a
  foreign interleaved one; its window is rebuilt from the contiguous
  resident run around the marker (context recovery);
- non-sequential read: exactly the requested pages, window state reset.

Sequentiality is accepted when the request starts at offset 0, continues
the previous request, or its preceding page is resident (in-flight
counts: a requested page proves the stream passed there). Pages fetch at
most once while resident (single flight); concurrent readers of an
in-flight page block until it arrives.
"""

from dataclasses import dataclass, field

from gpuiosim.devices import SsdModel
from gpuiosim.simcore import EventQueue, SimError, cost_ns


@dataclass(slots=True)
class PageState:
    present: bool = False  # False while the SSD fetch is in flight
    marker: bool = False
    waiters: list = field(default_factory=list)


@dataclass(slots=True)
class ReadaheadState:
    """Per-file window state. window_size == 0 means no current window."""
    window_start: int = 0
    window_size: int = 0
    async_size: int = 0
    prev_end: int = -1  # one past the last requested page


class _Pread:
    """One outstanding pread: blocks until every requested page is present."""

    __slots__ = ("nbytes", "issued_at", "pending", "cb")

    def __init__(self, nbytes, issued_at, pending, cb):
        self.nbytes = nbytes
        self.issued_at = issued_at
        self.pending = pending
        self.cb = cb


class HostOs:
    """OS page cache + readahead + pread for the simulated host threads."""

    def __init__(self, q: EventQueue, ssd: SsdModel, files: dict[int, int],
                 page_size: int, capacity_bytes: int, ra_max_bytes: int,
                 cpu_copy_ps: int, metrics):
        if ra_max_bytes % page_size:
            raise SimError("host.ra_max_bytes must be a multiple of host.os_page_size")
        self.q = q
        self.ssd = ssd
        self.files = files
        self.page_size = page_size
        self.capacity_pages = max(1, capacity_bytes // page_size)
        self.ra_max = ra_max_bytes // page_size
        self.cpu_copy_ps = cpu_copy_ps
        self.metrics = metrics
        self.resident: dict[tuple[int, int], PageState] = {}
        self.recency: dict[tuple[int, int], None] = {}  # present pages, LRU order
        self.ra: dict[int, ReadaheadState] = {}
        self.fetch_counts: dict[tuple[int, int], int] = {}

    # -- helpers -----------------------------------------------------------

    def _page_bytes(self, file_id: int, page: int) -> int:
        return min(self.page_size, self.files[file_id] - page * self.page_size)

    def _file_pages(self, file_id: int) -> int:
        size = self.files[file_id]
        return (size + self.page_size - 1) // self.page_size

    def _is_resident(self, file_id: int, page: int) -> bool:
        return (file_id, page) in self.resident

    def _resident_run(self, file_id: int, m: int) -> tuple[int, int]:
        """Contiguous resident/in-flight run [start, end) around page m.

        Scans are capped at ra_max pages each way; the estimate only feeds
        a window size that saturates at ra_max anyway.
        """
        start = m
        while m - start < self.ra_max and start > 0 and self._is_resident(file_id, start - 1):
            start -= 1
        end = m + 1
        limit = self._file_pages(file_id)
        while end - m <= self.ra_max and end < limit and self._is_resident(file_id, end):
            end += 1
        return start, end

    # -- readahead policy ---------------------------------------------------

    def _decide(self, file_id: int, start_page: int, npages: int):
        """Returns (async_runs, marker_page, window_bytes)."""
        ra = self.ra.setdefault(file_id, ReadaheadState())
        req_end = start_page + npages
        file_pages = self._file_pages(file_id)

        marker_page = -1
        for p in range(start_page, req_end):
            st = self.resident.get((file_id, p))
            if st is not None and st.marker:
                st.marker = False  # each marker triggers at most once
                if marker_page < 0:
                    marker_page = p

        if marker_page >= 0:
            if ra.window_size > 0 and marker_page == ra.window_start + ra.window_size - ra.async_size:
                new_start = max(ra.window_start + ra.window_size, req_end)
                new_size = min(2 * ra.window_size, self.ra_max)
            else:
                run_start, run_end = self._resident_run(file_id, marker_page)
                new_start = max(run_end, req_end)
                new_size = min(2 * max(run_end - run_start, 1), self.ra_max)
            new_size = min(new_size, max(file_pages - new_start, 0))
            ra.prev_end = req_end
            if new_size == 0:
                ra.window_start, ra.window_size, ra.async_size = start_page, 0, 0
                return [], -1, 0
            ra.window_start, ra.window_size, ra.async_size = new_start, new_size, new_size
            return [(new_start, new_size)], new_start, new_size * self.page_size

        sequential = (
            start_page == 0
            or start_page == ra.prev_end
            or (start_page > 0 and self._is_resident(file_id, start_page - 1))
        )
        ra.prev_end = req_end
        if not sequential:
            ra.window_start, ra.window_size, ra.async_size = start_page, 0, 0
            return [], -1, 0

        wsize = max(npages, min(4 * npages, self.ra_max))
        wsize = min(wsize, max(file_pages - start_page, npages))
        ra.window_start, ra.window_size = start_page, wsize
        ra.async_size = wsize - npages
        if ra.async_size <= 0:
            return [], -1, wsize * self.page_size
        return [(req_end, ra.async_size)], req_end, wsize * self.page_size

    # -- fetch machinery ----------------------------------------------------

    def _evict_for(self, needed: int) -> None:
        while len(self.resident) + needed > self.capacity_pages and self.recency:
            key = next(iter(self.recency))
            del self.recency[key]
            del self.resident[key]
            self.metrics.host_evictions += 1

    def _dispatch(self, file_id: int, pages: list[int], at: int) -> None:
        """Fetch missing pages, chunked at ra_max pages per SSD request."""
        for i in range(0, len(pages), self.ra_max):
            chunk = pages[i:i + self.ra_max]
            nbytes = sum(self._page_bytes(file_id, p) for p in chunk)
            done = self.ssd.submit(nbytes, at)
            self.q.schedule(done, "ssd-complete",
                            lambda now, f=file_id, c=chunk: self._arrive(f, c, now))

    def _start_fetch(self, file_id: int, run_start: int, run_len: int, at: int) -> list[int]:
        """Mark missing pages of the run in-flight and dispatch them."""
        missing = []
        for p in range(run_start, run_start + run_len):
            key = (file_id, p)
            if key in self.resident:
                continue
            missing.append(p)
        if not missing:
            return []
        self._evict_for(len(missing))
        for p in missing:
            self.resident[(file_id, p)] = PageState()
            self.fetch_counts[(file_id, p)] = self.fetch_counts.get((file_id, p), 0) + 1
        # contiguous sub-runs become single SSD requests
        run: list[int] = []
        for p in missing:
            if run and p != run[-1] + 1:
                self._dispatch(file_id, run, at)
                run = []
            run.append(p)
        if run:
            self._dispatch(file_id, run, at)
        return missing

    def _arrive(self, file_id: int, pages: list[int], now: int) -> None:
        for p in pages:
            key = (file_id, p)
            st = self.resident.get(key)
            if st is None:  # dropped while in flight (cache_drop keeps present only)
                st = PageState()
                self.resident[key] = st
            st.present = True
            self.recency[key] = None
            for ctx in st.waiters:
                ctx.pending -= 1
                if ctx.pending == 0:
                    self._finish(ctx, now)
            st.waiters.clear()

    def _finish(self, ctx: _Pread, ready_at: int) -> None:
        blocked = ready_at - ctx.issued_at
        self.metrics.host_blocked_ns += blocked
        done = ready_at + max(1, cost_ns(ctx.nbytes, self.cpu_copy_ps))
        self.q.schedule(done, "pread-done",
                        lambda now, c=ctx, b=blocked: c.cb(c.nbytes, now, b))

    # -- public ops ---------------------------------------------------------

    def pread(self, file_id: int, offset: int, size: int, at: int, cb) -> None:
        """Read [offset, offset+size) of file_id; cb(bytes_read, done_at, blocked_ns).

        Returns short counts at EOF, 0 beyond it. Blocks (in simulated
        time) until every requested page is present; readahead windows
        are fetched without blocking.
        """
        fsize = self.files[file_id]
        self.metrics.preads += 1
        if offset >= fsize or size <= 0:
            self.q.schedule(at + 1, "pread-done", lambda now: cb(0, now, 0))
            return
        nbytes = min(size, fsize - offset)
        self.metrics.pread_bytes += nbytes
        start_page = offset // self.page_size
        end_page = (offset + nbytes - 1) // self.page_size + 1
        npages = end_page - start_page

        # refresh LRU position of present requested pages first so the
        # fetches below never evict pages this very pread is about to read
        for p in range(start_page, end_page):
            key = (file_id, p)
            if key in self.recency:
                del self.recency[key]
                self.recency[key] = None

        # readahead engages only on a missing page (sync path) or a marker
        # hit (async path); fully cached unmarked reads leave state alone
        any_missing = any((file_id, p) not in self.resident
                          for p in range(start_page, end_page))
        any_marker = any(st is not None and st.marker
                         for st in (self.resident.get((file_id, p))
                                    for p in range(start_page, end_page)))
        if any_missing or any_marker:
            async_runs, marker_page, window_bytes = self._decide(file_id, start_page, npages)
        else:
            async_runs, marker_page, window_bytes = [], -1, 0
        if window_bytes:
            self.metrics.window_history.append(window_bytes)

        # sync part first so its SSD admission precedes the async tail
        self._start_fetch(file_id, start_page, npages, at)
        for run_start, run_len in async_runs:
            self._start_fetch(file_id, run_start, run_len, at)
        if marker_page >= 0:
            st = self.resident.get((file_id, marker_page))
            if st is not None:
                st.marker = True

        ctx = _Pread(nbytes, at, 0, cb)
        for p in range(start_page, end_page):
            key = (file_id, p)
            st = self.resident.get(key)
            if st is None:  # evicted under extreme pressure; refetch alone
                self._start_fetch(file_id, p, 1, at)
                st = self.resident[key]
            if not st.present:
                st.waiters.append(ctx)
                ctx.pending += 1
        if ctx.pending == 0:
            self._finish(ctx, at)

    def cache_drop(self, at: int) -> None:
        """Drop all present pages and window state (in-flight pages survive)."""
        for key in list(self.recency):
            del self.resident[key]
        self.recency.clear()
        self.ra.clear()
        self.metrics.cache_drops.append(at)
