"""Report construction, mean rows, and CSV stability."""

import csv

import pytest

from gpuiosim.metrics import (CSV_FIELDS, Metrics, MetricsReport, mean_report,
                              write_csv)


def _report(**over):
    values = {f: 0 for f in CSV_FIELDS}
    values.update({"label": "arm", "workload": "strided", "seed": 1, "rep": 0,
                   "worker_spins": "0;0", "worker_first_spins": "0;0",
                   "worker_first_service_ns": "0;0"})
    values.update(over)
    return MetricsReport(values)


def test_report_requires_every_field():
    with pytest.raises(ValueError):
        MetricsReport({"label": "x"})


def test_row_formats_floats_three_decimals():
    r = _report(io_bandwidth_bps=2_640_000_000.123456)
    assert r.row()["io_bandwidth_bps"] == "2640000000.123"


def test_mean_report_numeric_fields():
    a = _report(seed=1, end_to_end_ns=100, user_bytes=10)
    b = _report(seed=2, end_to_end_ns=300, user_bytes=30)
    m = mean_report([a, b])
    assert m["seed"] == "mean"
    assert m["rep"] == 2
    assert m["end_to_end_ns"] == 200
    assert m["user_bytes"] == 20
    assert m["label"] == "arm" and m["workload"] == "strided"


def test_mean_report_averages_worker_lists_per_position():
    a = _report(worker_spins="1;2;3;4")
    b = _report(worker_spins="3;4;5;6")
    m = mean_report([a, b])
    assert m["worker_spins"] == "2.0;3.0;4.0;5.0"


def test_mean_report_rejects_empty():
    with pytest.raises(ValueError):
        mean_report([])


def test_mean_report_passes_through_empty_worker_lists():
    # replay runs have no workers at all
    a = _report(worker_spins="", worker_first_spins="", worker_first_service_ns="")
    b = _report(worker_spins="", worker_first_spins="", worker_first_service_ns="")
    m = mean_report([a, b])
    assert m["worker_spins"] == ""


def test_write_csv_column_order_is_fixed(tmp_path):
    path = tmp_path / "out.csv"
    write_csv(str(path), [_report(), _report(seed=2)])
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_FIELDS
    assert len(rows) == 3


def test_metrics_starts_zeroed():
    m = Metrics()
    assert m.user_bytes == 0 and m.rpc_count == 0 and m.pb_hits == 0
    assert m.window_history == [] and m.deliveries == []
    assert not m.log_deliveries
