"""End-to-end behavior checks over the calibrated defaults.

Each test prints one "criterion N: PASS/FAIL (...)" line for the release
checklist and then asserts, so pytest and the printed summary agree. The
microbenchmark used throughout is 120 threadblocks striding a
98_304_000-byte file (800 KiB per TB) with 64 KiB requests.
"""

import csv
import math
from collections import deque

from gpuiosim.config import ExperimentConfig
from gpuiosim.devices import SsdModel
from gpuiosim.experiments import run_preset
from gpuiosim.host_os import HostOs
from gpuiosim.metrics import Metrics
from gpuiosim.simcore import EventQueue
from gpuiosim.simulation import Simulation
from gpuiosim.workloads import TraceRecord, save_trace

KiB = 1024
MICRO = {
    "workload.kind": "strided",
    "workload.n_tb": 120,
    "workload.file_bytes": 98_304_000,
    "workload.n_files": 1,
}
STRIDE = 98_304_000 // 120  # 819200

_CACHE = {}


def run_sim(overrides, seed=42, log_deliveries=False):
    key = (tuple(sorted(overrides.items())), seed, log_deliveries)
    if key not in _CACHE:
        sim = Simulation(ExperimentConfig(dict(overrides)), seed)
        sim.metrics.log_deliveries = log_deliveries
        _CACHE[key] = (sim, sim.run())
    return _CACHE[key]


def bw(report):
    return report["io_bandwidth_bps"]


def _verdict(num, ok, detail):
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num}: {detail}"


# -- 1: readahead window law ---------------------------------------------------------

def test_criterion_1_readahead_window_law():
    q = EventQueue()
    ssd = SsdModel(2_800_000_000, 80_000, 32)
    m = Metrics()
    host = HostOs(q, ssd, {0: 4 * 1024 ** 2}, 4096, 1 << 30, 128 * KiB, 100, m)

    def read_page(page):
        host.pread(0, page * 4096, 4096, q.now, lambda n, t, b: None)
        while (ev := q.pop()) is not None:
            ev.action(ev.fire_at)

    read_page(0)
    cold_ok = ssd.bytes_read == 16 * KiB
    for page in range(1, 256):
        read_page(page)
    ramp = m.window_history[:4]
    ramp_ok = ramp == [16 * KiB, 32 * KiB, 64 * KiB, 128 * KiB]
    cap_ok = set(m.window_history[3:]) == {128 * KiB}
    _verdict(1, cold_ok and ramp_ok and cap_ok,
             f"cold read fetched {16 if cold_ok else ssd.bytes_read // KiB}KiB, "
             f"windows {'->'.join(str(w // KiB) for w in ramp)}KiB then constant")


# -- 2: worker load imbalance vs request size ----------------------------------------

def test_criterion_2_worker_imbalance():
    seeds = range(42, 47)
    sizes = (64 * KiB, 128 * KiB, 256 * KiB, 1024 * KiB)

    def ratio(size, seed):
        sim, _r = run_sim({**MICRO, "gpufs.page_size": size,
                           "workload.request_bytes": min(size, STRIDE),
                           "gpufs.prefetch_bytes": 0}, seed=seed)
        spins = [w.first_service_spins for w in sim.workers]
        denom = max(spins[0], spins[1])
        return min(spins[2], spins[3]) / denom if denom else float("inf")

    ok = True
    lows, bigs = [], []
    for seed in seeds:
        big = [ratio(s, seed) for s in sizes[1:]]
        low = ratio(sizes[0], seed)
        ok = ok and all(r >= 10.0 for r in big) and low < sum(big) / len(big)
        lows.append(low)
        bigs.extend(big)
    _verdict(2, ok,
             f">=128KiB spin ratios {min(bigs):.0f}x-{max(bigs):.0f}x (floor 10x), "
             f"64KiB ratio below the big-request mean on {len(seeds)} seeds")


# -- 3: prefetcher speedup ------------------------------------------------------------

def test_criterion_3_prefetch_speedup():
    _s, base = run_sim({**MICRO, "gpufs.page_size": 4 * KiB,
                        "workload.request_bytes": 64 * KiB,
                        "gpufs.prefetch_bytes": 0})
    _s, pf = run_sim({**MICRO, "gpufs.page_size": 4 * KiB,
                      "workload.request_bytes": 64 * KiB,
                      "gpufs.prefetch_bytes": 60 * KiB})
    _s, big = run_sim({**MICRO, "gpufs.page_size": 64 * KiB,
                       "workload.request_bytes": 64 * KiB,
                       "gpufs.prefetch_bytes": 0})
    speedup = bw(pf) / bw(base)
    closeness = bw(pf) / bw(big)
    _verdict(3, speedup >= 2.0 and closeness >= 0.8,
             f"prefetch 60KiB vs none: {speedup:.2f}x (need >= 2.0); "
             f"vs 64KiB pages: {closeness:.2f} (need >= 0.8)")


# -- 4: page-size sweep shape ---------------------------------------------------------

def test_criterion_4_page_size_sweep_unimodal(tmp_path):
    path = run_preset("fig2", ExperimentConfig(), str(tmp_path))
    labels, bws = [], []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            if row["seed"] == "mean":
                labels.append(row["label"])
                bws.append(float(row["io_bandwidth_bps"]))
    peak = bws.index(max(bws))
    rising = all(bws[i] < bws[i + 1] for i in range(peak))
    falling = all(bws[i] > bws[i + 1] for i in range(peak, len(bws) - 1))
    _verdict(4, peak != 0 and rising and falling,
             "mean bandwidth by page size "
             + ", ".join(f"{l.split('-')[1]}:{b / 1e9:.2f}GB/s"
                         for l, b in zip(labels, bws))
             + f"; peak at {labels[peak].split('-')[1]} (not 4096)")


# -- 5: replacement policy under cache pressure ---------------------------------------

def test_criterion_5_replacement_ordering():
    pressure = {**MICRO, "gpufs.cache_bytes": 98_304_000 // 2,
                "gpufs.page_size": 4 * KiB, "workload.request_bytes": 64 * KiB}
    _s, lra = run_sim({**pressure, "gpufs.policy": "per-tb-lra",
                       "gpufs.prefetch_bytes": 60 * KiB})
    _s, pf = run_sim({**pressure, "gpufs.policy": "global-lru-dealloc",
                      "gpufs.prefetch_bytes": 60 * KiB})
    _s, base = run_sim({**pressure, "gpufs.policy": "global-lru-dealloc",
                        "gpufs.prefetch_bytes": 0})
    ordered = bw(lra) > bw(pf) > bw(base)
    gain = bw(lra) / bw(base)
    _verdict(5, ordered and gain >= 4.0,
             f"{bw(lra) / 1e9:.2f} > {bw(pf) / 1e9:.2f} > {bw(base) / 1e9:.2f} GB/s, "
             f"end-to-end gain {gain:.1f}x (need >= 4.0)")


# -- 6: RPC and private-buffer request law --------------------------------------------

def test_criterion_6_rpc_fraction_law():
    _s, r = run_sim({**MICRO, "gpufs.page_size": 4 * KiB,
                     "workload.request_bytes": 64 * KiB,
                     "gpufs.prefetch_bytes": 60 * KiB})
    n_tb = MICRO["workload.n_tb"]
    span = 4 * KiB + 60 * KiB
    expected_rpc = n_tb * math.ceil(STRIDE / span)
    rpc_ok = r["rpc_count"] == expected_rpc
    # 15 prefetched pages per span, short only at each stride's last span
    slack = 15 * n_tb
    pb_ok = abs(r["pb_hits"] - 15 * r["rpc_count"]) <= slack
    _verdict(6, rpc_ok and pb_ok,
             f"rpc_count {r['rpc_count']} == {expected_rpc}, "
             f"pb_hits {r['pb_hits']} within {slack} of 15x")


# -- 7: conservation oracle -----------------------------------------------------------

def test_criterion_7_conservation():
    checked = 0
    ok = True
    for sim, r in list(_CACHE.values()):
        if sim.replaying or sim.cfg["mode.pcie_disabled"]:
            continue
        ok = ok and r["pcie_bytes"] + r["cache_hit_user_bytes"] >= r["user_bytes"]
        ok = ok and r["ssd_bytes"] >= sim.workload.unique_bytes
        ok = ok and sim.metrics.tag_mismatches == 0
        checked += 1
    _verdict(7, ok and checked >= 5,
             f"{checked} runs: pcie >= delivered, ssd >= touched, 0 tag mismatches")


# -- 8: straight-line oracle equivalence ----------------------------------------------

def tiny_oracle(policy):
    """Replays the tiny scenario with plain loops: 2 TBs one at a time,
    16 pages each, 8-frame cache, 4-page fetch span (1 wanted + 3 ahead)."""
    n_pages, span, frames, quota = 32, 4, 8, 8
    free = frames
    cached = set()
    fifo = deque()      # global policy: pages in allocation order
    retired = deque()   # per-tb policy: frames of finished TBs
    deliveries, victims = [], []
    rpc = pb_hits = 0
    for tb in (0, 1):
        own = deque()
        pb = set()
        for page in range(tb * 16, tb * 16 + 16):
            if page not in cached:
                if policy == "global-lru-dealloc":
                    if free:
                        free -= 1
                    else:
                        victim = fifo.popleft()
                        cached.remove(victim)
                        victims.append((tb, 0, victim))
                    fifo.append(page)
                else:
                    if len(own) < quota and free:
                        free -= 1
                    elif len(own) < quota and retired:
                        victim = retired.popleft()
                        cached.remove(victim)
                        victims.append((tb, 0, victim))
                    else:
                        victim = own.popleft()
                        cached.remove(victim)
                        victims.append((tb, 0, victim))
                    own.append(page)
                cached.add(page)
                if page in pb:
                    pb_hits += 1
                    pb.discard(page)
                else:
                    rpc += 1
                    pb = set(range(page + 1, min(page + span, n_pages)))
            deliveries.append((tb, 0, page))
        retired.extend(own)
    return deliveries, rpc, victims, pb_hits


def test_criterion_8_tiny_instance_matches_oracle():
    overrides = {
        "workload.kind": "strided", "workload.n_tb": 2, "workload.n_files": 1,
        "workload.file_bytes": 32 * 4096, "workload.request_bytes": 2 * 4096,
        "gpufs.page_size": 4096, "gpufs.cache_bytes": 8 * 4096,
        "gpufs.prefetch_bytes": 3 * 4096,
        "gpu.sm_count": 1, "gpu.max_threads_per_sm": 512,
        "gpu.threads_per_tb": 512, "gpu.start_jitter_ns": 0,
    }
    ok = True
    details = []
    for policy in ("global-lru-dealloc", "per-tb-lra"):
        sim, r = run_sim({**overrides, "gpufs.policy": policy},
                         seed=1, log_deliveries=True)
        deliveries, rpc, victims, pb_hits = tiny_oracle(policy)
        match = (sim.metrics.deliveries == deliveries
                 and r["rpc_count"] == rpc
                 and sim.cache.victim_log == victims
                 and r["pb_hits"] == pb_hits)
        ok = ok and match
        details.append(f"{policy}: {len(deliveries)} deliveries, "
                       f"{rpc} rpcs, {len(victims)} victims")
    _verdict(8, ok, "; ".join(details))


# -- 9: determinism -------------------------------------------------------------------

def test_criterion_9_preset_is_deterministic(tmp_path):
    a = run_preset("fig3", ExperimentConfig(), str(tmp_path / "a"))
    b = run_preset("fig3", ExperimentConfig(), str(tmp_path / "b"))
    with open(a, "rb") as fa, open(b, "rb") as fb:
        same = fa.read() == fb.read()
    _verdict(9, same, "fig3 preset twice with one seed: byte-identical CSV")


# -- 10: interleaving lowers blocked time ---------------------------------------------

def test_criterion_10_interleaving_benefit(tmp_path):
    n_pages = 8 * 1024 ** 2 // 4096
    quarter = n_pages // 4
    seq = [TraceRecord(0, 0, p * 4096, 4096) for p in range(n_pages)]
    inter = [TraceRecord(q, 0, (q * quarter + i) * 4096, 4096)
             for i in range(quarter) for q in range(4)]
    blocked = {}
    for name, records in (("sequential", seq), ("interleaved", inter)):
        path = str(tmp_path / f"{name}.trace")
        save_trace(path, records)
        cfg = ExperimentConfig({"workload.file_bytes": 8 * 1024 ** 2,
                                "workload.n_files": 1,
                                "mode.replay_trace": path})
        blocked[name] = Simulation(cfg, seed=42).run()["host_blocked_ns"]
    _verdict(10, blocked["interleaved"] < blocked["sequential"],
             f"blocked {blocked['interleaved'] / 1e6:.2f}ms interleaved vs "
             f"{blocked['sequential'] / 1e6:.2f}ms sequential")
