import pytest

from qrs import bundled, run_with_trace
from qrs.metrics import InsufficientData, Ratio, Trace, delay_jitter, finalize

from helpers import failure, flow, scenario, topology


def test_jitter_examples():
    assert delay_jitter([0.010, 0.010, 0.010]) == ([0.0, 0.0], 0.0)
    series, mean = delay_jitter([0.010, 0.014, 0.011])
    assert series == pytest.approx([0.004, 0.003])
    assert mean == pytest.approx(0.0035)
    with pytest.raises(InsufficientData):
        delay_jitter([0.01])


def test_ratio_zero_denominator():
    r = Ratio(0, 0)
    assert r.value == 1.0 and r.zero_denominator
    assert Ratio(1, 4).value == 0.25


def line():
    return topology(4, [(0, 1), (1, 2), (2, 3)], hosts={0, 3})


def test_lossless_run_flags_empty_denominators():
    r, _ = run_with_trace(scenario(line(), [flow(0, 3, stop=3)], horizon=3))
    assert r.total.lost == 0
    assert r.detector.value == 1.0 and r.detector.zero_denominator
    row = [x for x in r.rows() if x[1] == "detector_utilization"][0]
    assert row[3:] == ("1", 1)


def test_detected_and_recovered_failure():
    r, _ = run_with_trace(bundled("batching"))
    assert r.detector.value == 1.0 and not r.detector.zero_denominator
    assert r.connector.value == 1.0 and not r.connector.zero_denominator


@pytest.fixture(scope="module")
def failure_trace():
    return run_with_trace(bundled("default").with_(mode="baseline"))


def test_loss_matches_independent_scan(failure_trace):
    report, trace = failure_trace
    queue = sum(1 for r in trace if r[0] == "drop" and r[4] == "queue_full")
    down = sum(1 for r in trace if r[0] == "drop" and r[4] == "station_down")
    assert report.total.lost == queue + down
    assert sum(report.loss_series) == report.total.lost


def test_persisted_trace_reproduces_report(failure_trace):
    report, trace = failure_trace
    again = finalize(Trace.from_bytes(trace.to_bytes()))
    assert again.to_csv() == report.to_csv()


def test_ratios_in_unit_interval(failure_trace):
    report, _ = failure_trace
    for r in (report.reservation_success, report.detector, report.connector,
              report.analyzer, report.efficiency, *report.reservation_series):
        assert 0.0 <= r.value <= 1.0
    assert report.total.lost <= report.total.generated


def test_csv_shape(failure_trace):
    report, _ = failure_trace
    lines = report.to_csv().splitlines()
    assert lines[0] == "time_bucket_s,metric_name,stream_id,value,denominator_flag"
    assert all(len(l.split(",")) == 5 for l in lines)
    assert "nan" not in report.to_csv().lower()


def test_efficiency_accounts_held_time():
    # the only router degrades halfway: reservation lost for the second half
    sc = scenario(line(), [flow(0, 3, stop=4)], failures=[failure(2, 1, available=0)],
                  horizon=4, mode="baseline")
    r, _ = run_with_trace(sc)
    assert r.efficiency.value == pytest.approx(0.5)
