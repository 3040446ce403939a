"""Per-threadblock private readahead buffer.

Each RPC fetches page_size + prefetch_size bytes (page aligned, clamped
at EOF, and only for read-only files). The requested page goes into the
shared page cache; the rest lands here, private to the owning TB. An
entry serves exactly one hit (consumed on take) and a new fill discards
whatever is left, so capacity never exceeds prefetch_size.
"""

from gpuiosim.simcore import SimError


def request_span(offset: int, page_size: int, prefetch_bytes: int,
                 file_size: int, read_only: bool) -> int:
    """RPC span in bytes for a miss at page-aligned offset.

    Prefetching applies only to read-only files (dirty pages are never
    speculatively fetched); otherwise the span is a single page.
    """
    if offset % page_size:
        raise SimError("request_span offset must be page aligned")
    if offset >= file_size:
        return 0
    want = page_size + prefetch_bytes if (read_only and prefetch_bytes > 0) else page_size
    return min(want, file_size - offset)


class PrivateBuffer:
    """TB-private store of prefetched pages keyed by (file, page)."""

    def __init__(self, tb_id: int, capacity_bytes: int, metrics):
        self.tb_id = tb_id
        self.capacity = capacity_bytes
        self.metrics = metrics
        self.entries: dict[tuple[int, int], tuple[int, int]] = {}  # key -> (nbytes, tag)
        self.filled_bytes = 0

    def fill(self, file_id: int, pages: list[tuple[int, int, int]]) -> None:
        """Replace contents with (page, nbytes, tag) triples; stale entries drop."""
        for nbytes, _tag in self.entries.values():
            self.metrics.pb_discarded_bytes += nbytes
        self.entries.clear()
        self.filled_bytes = 0
        for page, nbytes, tag in pages:
            if self.filled_bytes + nbytes > self.capacity:
                self.metrics.pb_discarded_bytes += nbytes  # no room, never served
                continue
            self.entries[(file_id, page)] = (nbytes, tag)
            self.filled_bytes += nbytes
            self.metrics.pb_filled_bytes += nbytes

    def take(self, file_id: int, page: int) -> tuple[int, int] | None:
        """Consume an entry; None on miss. Each entry serves one hit."""
        entry = self.entries.pop((file_id, page), None)
        if entry is None:
            self.metrics.pb_misses += 1
            return None
        self.filled_bytes -= entry[0]
        self.metrics.pb_hits += 1
        self.metrics.pb_consumed_bytes += entry[0]
        return entry

    def drain(self) -> None:
        """Count leftovers as discarded (end of TB run)."""
        for nbytes, _tag in self.entries.values():
            self.metrics.pb_discarded_bytes += nbytes
        self.entries.clear()
        self.filled_bytes = 0
