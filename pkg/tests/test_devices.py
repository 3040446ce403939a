"""SSD and PCIe analytic models against closed-form oracles.

The oracle numbers are frozen from the model definitions:

  ssd idle:    done = at + latency + ceil(bytes * 1e9 / bw)
               128KiB at 2.8 GB/s -> 80000 + ceil(131072e9 / 2.8e9)
                                   = 80000 + 46812 = 126812 ns
  ssd loaded:  transfers serialize on the media, so the k-th of many
               requests submitted at t=0 completes at latency + k * xfer;
               64 x 1MiB -> 80000 + 64 * 374492 = 24047488 ns
  pcie idle:   done = at + latency + ceil(bytes * 1e9 / bw)
               4KiB  -> 10000 + 342   = 10342 ns
               1MiB  -> 10000 + 87382 = 97382 ns
"""

import pytest

from gpuiosim.devices import PcieModel, SsdModel
from gpuiosim.simcore import SimError

BW = 2_800_000_000
LAT = 80_000


def test_ssd_idle_closed_form():
    ssd = SsdModel(BW, LAT, 32)
    assert ssd.submit(128 * 1024, 0) == 126_812
    assert ssd.bytes_read == 131_072 and ssd.requests == 1


def test_ssd_idle_with_offset_start():
    ssd = SsdModel(BW, LAT, 32)
    assert ssd.submit(128 * 1024, 1000) == 1000 + 126_812


def test_ssd_media_serializes_under_load():
    # 64 x 1MiB at t=0: completions latency + k * xfer, k = 1..64,
    # regardless of the 32-slot admission window
    ssd = SsdModel(BW, LAT, 32)
    xfer = (1024 ** 2 * 10 ** 9 + BW - 1) // BW
    assert xfer == 374_492
    dones = [ssd.submit(1024 ** 2, 0) for _ in range(64)]
    assert dones == [LAT + (k + 1) * xfer for k in range(64)]
    assert dones[-1] == 24_047_488


def test_ssd_throughput_converges_to_bandwidth():
    ssd = SsdModel(BW, LAT, 32)
    total = 64 * 1024 ** 2
    done = 0
    for _ in range(64):
        done = ssd.submit(1024 ** 2, 0)
    rate = total * 1e9 / done
    assert rate >= 0.95 * BW
    assert rate <= BW


def test_ssd_max_inflight_one_fully_serializes():
    ssd = SsdModel(BW, LAT, 1)
    d1 = ssd.submit(4096, 0)
    d2 = ssd.submit(4096, 0)
    # second request is admitted only when the first completes
    assert d2 == d1 + LAT + (4096 * 10 ** 9 + BW - 1) // BW


def test_ssd_idle_gap_resets_media():
    ssd = SsdModel(BW, LAT, 32)
    d1 = ssd.submit(4096, 0)
    d2 = ssd.submit(4096, d1 + 1_000_000)
    assert d2 == d1 + 1_000_000 + LAT + (4096 * 10 ** 9 + BW - 1) // BW


def test_ssd_instant_mode():
    ssd = SsdModel(BW, LAT, 32, instant=True)
    assert ssd.submit(10 * 1024 ** 2, 123) == 124
    assert ssd.bytes_read == 10 * 1024 ** 2


def test_ssd_rejects_bad_requests():
    with pytest.raises(SimError):
        SsdModel(BW, LAT, 0)
    ssd = SsdModel(BW, LAT, 32)
    with pytest.raises(SimError):
        ssd.submit(0, 0)


def test_pcie_idle_closed_form():
    pcie = PcieModel(12_000_000_000, 10_000)
    assert pcie.transfer(4096, 0) == 10_342
    pcie2 = PcieModel(12_000_000_000, 10_000)
    assert pcie2.transfer(1024 ** 2, 0) == 97_382


def test_pcie_serializes():
    pcie = PcieModel(12_000_000_000, 10_000)
    d1 = pcie.transfer(4096, 0)
    d2 = pcie.transfer(4096, 0)
    assert d2 == d1 + 10_342
    assert pcie.transfers == 2 and pcie.bytes_moved == 8192


def test_pcie_effective_bandwidth_increases_with_size():
    pcie = PcieModel(12_000_000_000, 10_000)
    sizes = [4096 << i for i in range(10)]
    rates = [pcie.effective_bandwidth(s) for s in sizes]
    assert all(a < b for a, b in zip(rates, rates[1:]))
    assert rates[-1] < 12_000_000_000


def test_pcie_rejects_zero_bytes():
    pcie = PcieModel(12_000_000_000, 10_000)
    with pytest.raises(SimError):
        pcie.transfer(0, 0)


def test_transfer_time_never_zero():
    ssd = SsdModel(10 ** 15, 0, 32)
    assert ssd.submit(1, 0) >= 1
    pcie = PcieModel(10 ** 15, 0)
    assert pcie.transfer(1, 0) >= 1
