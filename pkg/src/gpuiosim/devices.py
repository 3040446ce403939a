"""Analytic device models: SSD and PCIe link.

Both compute completion times eagerly at submission, which is exact
because callers submit in event order and the models are work
conserving. All times are integer ns, rounded up, never zero.
"""

import heapq

from gpuiosim.simcore import SimError


def _xfer_ns(nbytes: int, bandwidth_bytes_per_s: int) -> int:
    """Wire/media occupancy of a transfer, >= 1ns, ceil at ns resolution."""
    if nbytes <= 0:
        return 1
    return max(1, (nbytes * 1_000_000_000 + bandwidth_bytes_per_s - 1) // bandwidth_bytes_per_s)


class SsdModel:
    """SSD with FIFO admission into max_inflight slots.

    Admitted requests overlap their base-latency phase; the data transfer
    phase serializes on the media, so aggregate throughput converges to
    (and never exceeds) the configured bandwidth. For an idle device this
    is exactly start + base_latency + size/bandwidth. instant=True models
    a ramfs backing store: completion in 1ns, no bandwidth term.
    """

    def __init__(self, bandwidth_bytes_per_s: int, base_latency_ns: int,
                 max_inflight: int, instant: bool = False):
        if max_inflight < 1:
            raise SimError("ssd.max_inflight must be >= 1")
        self.bandwidth = bandwidth_bytes_per_s
        self.base_latency = base_latency_ns
        self.max_inflight = max_inflight
        self.instant = instant
        self._inflight: list[int] = []  # completion-time heap of admitted requests
        self._media_busy = 0
        self.bytes_read = 0
        self.requests = 0

    def submit(self, nbytes: int, at: int) -> int:
        """Submit a read; returns its completion time."""
        if nbytes <= 0:
            raise SimError("ssd read of <= 0 bytes")
        self.bytes_read += nbytes
        self.requests += 1
        if self.instant:
            return at + 1
        start = at
        if len(self._inflight) >= self.max_inflight:
            # FIFO admission: wait for the earliest inflight slot to free.
            start = max(at, heapq.heappop(self._inflight))
        media_start = max(start + self.base_latency, self._media_busy)
        done = media_start + _xfer_ns(nbytes, self.bandwidth)
        self._media_busy = done
        heapq.heappush(self._inflight, done)
        return done


class PcieModel:
    """Host-to-device link: serialized transfers, per-transfer latency.

    completion = max(at, busy_until) + latency + size/bandwidth. Effective
    bandwidth is strictly increasing in transfer size.
    """

    def __init__(self, bandwidth_bytes_per_s: int, latency_ns: int):
        self.bandwidth = bandwidth_bytes_per_s
        self.latency = latency_ns
        self.busy_until = 0
        self.bytes_moved = 0
        self.transfers = 0

    def transfer(self, nbytes: int, at: int) -> int:
        """Queue a transfer; returns its completion time."""
        if nbytes <= 0:
            raise SimError("pcie transfer of <= 0 bytes")
        start = max(at, self.busy_until)
        done = start + self.latency + _xfer_ns(nbytes, self.bandwidth)
        self.busy_until = done
        self.bytes_moved += nbytes
        self.transfers += 1
        return done

    def effective_bandwidth(self, nbytes: int) -> float:
        """bytes/s seen by a single transfer of nbytes on an idle link."""
        return nbytes * 1e9 / (self.latency + _xfer_ns(nbytes, self.bandwidth))
