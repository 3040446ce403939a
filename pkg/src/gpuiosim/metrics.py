"""Counters collected during a run and the CSV report built from them.

A single Metrics object is threaded through every component of one
simulation; components bump counters as they act. After the run the
simulation freezes everything into a MetricsReport row. Column order in
the CSV is fixed so downstream diffs stay byte-stable.
"""

import csv


class Metrics:
    """Mutable counters for one simulation run."""

    def __init__(self, log_deliveries: bool = False):
        # gpu-side
        self.greads = 0
        self.user_bytes = 0
        self.cache_hit_user_bytes = 0
        self.tag_mismatches = 0
        self.pc_lookups = 0
        self.pc_hits = 0
        self.pc_hit_pending = 0
        self.pc_misses = 0
        self.pc_allocs = 0
        self.pc_evictions = 0
        self.pc_remaps = 0
        self.pb_hits = 0
        self.pb_misses = 0
        self.pb_filled_bytes = 0
        self.pb_consumed_bytes = 0
        self.pb_discarded_bytes = 0
        # rpc layer
        self.rpc_count = 0
        self.rpc_requested_bytes = 0
        self.slot_collisions = 0
        # host side
        self.preads = 0
        self.pread_bytes = 0
        self.host_blocked_ns = 0
        self.host_evictions = 0
        self.window_history = []   # readahead window sizes, bytes
        self.cache_drops = []      # times the host cache was flushed
        # optional delivery log for small runs
        self.log_deliveries = log_deliveries
        self.deliveries = []


CSV_FIELDS = [
    "label", "workload", "seed", "rep",
    "end_to_end_ns", "io_bandwidth_bps", "user_bytes", "cache_hit_user_bytes",
    "prefetch_waste_bytes",
    "greads", "rpc_count", "rpc_requested_bytes", "slot_collisions",
    "pc_hits", "pc_hit_pending", "pc_misses", "pc_evictions", "pc_remaps",
    "pb_hits", "pb_misses", "pb_filled_bytes", "pb_consumed_bytes",
    "pb_discarded_bytes",
    "pcie_bytes", "pcie_transfers", "ssd_bytes", "ssd_requests",
    "preads", "pread_bytes", "host_blocked_ns", "host_evictions",
    "ra_windows", "ra_max_window_bytes",
    "worker_spins", "worker_first_spins", "worker_first_service_ns",
]


class MetricsReport:
    """Frozen snapshot of one run (or the mean of several)."""

    def __init__(self, values: dict):
        missing = [f for f in CSV_FIELDS if f not in values]
        if missing:
            raise ValueError(f"report missing fields: {missing}")
        self.values = values

    def __getitem__(self, key):
        return self.values[key]

    def row(self) -> dict:
        out = {}
        for f in CSV_FIELDS:
            v = self.values[f]
            if isinstance(v, float):
                v = f"{v:.3f}"
            out[f] = v
        return out


def build_report(label: str, workload: str, seed: int, rep: int,
                 m: Metrics, pcie, ssd, workers, end_to_end_ns: int) -> MetricsReport:
    transferred = m.user_bytes - m.cache_hit_user_bytes
    waste = max(0, pcie.bytes_moved - transferred) if pcie.bytes_moved else 0
    bandwidth = m.user_bytes * 1e9 / end_to_end_ns if end_to_end_ns > 0 else 0.0
    return MetricsReport({
        "label": label,
        "workload": workload,
        "seed": seed,
        "rep": rep,
        "end_to_end_ns": end_to_end_ns,
        "io_bandwidth_bps": bandwidth,
        "user_bytes": m.user_bytes,
        "cache_hit_user_bytes": m.cache_hit_user_bytes,
        "prefetch_waste_bytes": waste,
        "greads": m.greads,
        "rpc_count": m.rpc_count,
        "rpc_requested_bytes": m.rpc_requested_bytes,
        "slot_collisions": m.slot_collisions,
        "pc_hits": m.pc_hits,
        "pc_hit_pending": m.pc_hit_pending,
        "pc_misses": m.pc_misses,
        "pc_evictions": m.pc_evictions,
        "pc_remaps": m.pc_remaps,
        "pb_hits": m.pb_hits,
        "pb_misses": m.pb_misses,
        "pb_filled_bytes": m.pb_filled_bytes,
        "pb_consumed_bytes": m.pb_consumed_bytes,
        "pb_discarded_bytes": m.pb_discarded_bytes,
        "pcie_bytes": pcie.bytes_moved,
        "pcie_transfers": pcie.transfers,
        "ssd_bytes": ssd.bytes_read,
        "ssd_requests": ssd.requests,
        "preads": m.preads,
        "pread_bytes": m.pread_bytes,
        "host_blocked_ns": m.host_blocked_ns,
        "host_evictions": m.host_evictions,
        "ra_windows": len(m.window_history),
        "ra_max_window_bytes": max(m.window_history, default=0),
        "worker_spins": ";".join(str(w.spin_count) for w in workers),
        "worker_first_spins": ";".join(str(w.first_service_spins) for w in workers),
        "worker_first_service_ns": ";".join(str(w.first_service_at) for w in workers),
    })


def _mean_field(name: str, vals: list):
    if name in ("label", "workload"):
        return vals[0]
    if name == "seed":
        return "mean"
    if name == "rep":
        return len(vals)
    if isinstance(vals[0], str):  # per-worker semicolon lists
        if vals[0] == "":         # replay rows have no workers
            return ""
        cols = [[int(x) for x in v.split(";")] for v in vals]
        width = len(cols[0])
        return ";".join(f"{sum(c[i] for c in cols) / len(cols):.1f}" for i in range(width))
    return sum(vals) / len(vals)


def mean_report(reports: list[MetricsReport]) -> MetricsReport:
    if not reports:
        raise ValueError("no reports to average")
    return MetricsReport({f: _mean_field(f, [r[f] for r in reports])
                          for f in CSV_FIELDS})


def write_csv(path: str, reports: list[MetricsReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in reports:
            writer.writerow(r.row())
