import numpy as np
import pytest

from pswlsim.config import ExperimentConfig, config_from_dict
from pswlsim.errors import ConfigError
from pswlsim.simkernel import DiskQueue, SimKernel, response_time, run_experiment
from pswlsim.workload import WorkloadStream


def stream_of(events):
    """events: list of (time_us, is_write, unit)"""
    times = np.array([e[0] for e in events], dtype=np.float64)
    writes = np.array([e[1] for e in events], dtype=bool)
    pages = np.array([e[2] for e in events], dtype=np.int64)
    return WorkloadStream(times, writes, pages)


def toy_config(**overrides):
    base = {
        "array": {"original_disks": 2, "scaling_disks": 1,
                  "raid_level": "raid5", "scaling_scheme": "rr", "stripes": 64},
        "flash": {"blocks_per_disk": 16, "pages_per_block": 8,
                  "max_pe_cycles": 100000},
        "controller": {"sampling_period": 64},
        "hotness": {"window": 256},
        "workload": {"ops": 0},
        "run": {"seed": 7},
    }

    def merge(dst, src):
        for key, val in src.items():
            if isinstance(val, dict) and isinstance(dst.get(key), dict):
                merge(dst[key], val)
            else:
                dst[key] = val
    merge(base, overrides)
    return config_from_dict(base)


def test_response_time_idle_queue():
    q = DiskQueue()
    assert response_time(10.0, q, 500.0) == 500.0
    assert q.busy_until == 510.0


def test_response_time_queue_wait():
    q = DiskQueue(busy_until=100.0)
    # arrival 0, disk busy until 100: wait 100 then serve
    assert response_time(0.0, q, 500.0) == 600.0


def test_response_time_zero_service_idle():
    q = DiskQueue()
    assert response_time(5.0, q, 0.0) == 0.0


def test_response_time_hand_trace_spec_case():
    q = DiskQueue(busy_until=0.0)
    # busy_until = arrival + 100 -> response = 100 + service
    q.busy_until = 150.0
    assert response_time(50.0, q, 500.0) == 600.0


def test_back_to_back_writes_fcfs():
    q = DiskQueue()
    r1 = response_time(0.0, q, 500.0)
    r2 = response_time(0.0, q, 500.0)
    assert (r1, r2) == (500.0, 1000.0)
    assert (r1 + r2) / 2 == 750.0


def test_empty_workload_report():
    cfg = toy_config()
    report = run_experiment(cfg, stream_of([]))
    assert report.final["total_io"] > 0  # scaling plan I/O only
    assert report.counters["host_io"] == 0
    assert report.final["wl_trigger_count"] == 0
    assert not report.failed


def test_raid5_single_write_art_hand_trace():
    # no scaling, no GC pressure: one write = data program + parity program,
    # each 500us on its own idle disk -> ART exactly 500
    cfg = toy_config(array={"scaling_disks": 0, "scaling_scheme": "rr"})
    kernel = SimKernel(cfg)
    report = kernel.run(stream_of([(0.0, True, 0)]))
    assert report.counters["host_io"] == 1
    assert report.counters["parity_io"] == 1
    assert report.counters["scaling_io"] == 0
    assert report.final["avg_response_time_us"] == pytest.approx(500.0)


def test_two_writes_same_disk_art():
    cfg = toy_config(array={"scaling_disks": 0, "scaling_scheme": "rr",
                            "raid_level": "raid0", "original_disks": 2})
    kernel = SimKernel(cfg)
    # units 0 and 2 both live on disk 0 (round-robin rows)
    report = kernel.run(stream_of([(0.0, True, 0), (0.0, True, 2)]))
    assert report.final["avg_response_time_us"] == pytest.approx(750.0)


def test_io_conservation_components_sum():
    cfg = toy_config(workload={"ops": 2000, "zipf_skew": 1.0}, run={"seed": 3})
    report = run_experiment(cfg)
    c = report.counters
    assert c["total_io"] == (c["host_io"] + c["parity_io"] + c["scaling_io"]
                             + c["wl_io"] + c["gc_io"])
    assert report.final["total_io"] == c["total_io"]
    assert all(v >= 0 for v in c.values())


def test_determinism_identical_reports():
    cfg = toy_config(workload={"ops": 3000}, run={"seed": 11},
                     initial_wear={"mode": "explicit", "pe_counts": [40, 40, 0]})
    a = run_experiment(toy_config(workload={"ops": 3000}, run={"seed": 11},
                                  initial_wear={"mode": "explicit",
                                                "pe_counts": [40, 40, 0]}))
    b = run_experiment(cfg)
    assert a.to_json() == b.to_json()
    assert a.series == b.series


def test_afp_non_decreasing_and_metrics_sane():
    cfg = toy_config(workload={"ops": 4000},
                     initial_wear={"mode": "explicit", "pe_counts": [50, 50, 0]})
    report = run_experiment(cfg)
    afps = [row["afp"] for row in report.series]
    assert all(b >= a - 1e-15 for a, b in zip(afps, afps[1:]))
    assert all(row["stddev"] >= 0 for row in report.series)
    assert report.final["avg_response_time_us"] >= 50.0  # min service time


def test_scaling_plan_charged_as_io_and_latency():
    cfg = toy_config()
    kernel = SimKernel(cfg)
    report = kernel.run(stream_of([]))
    moves = len(kernel.plan.moves)
    assert moves > 0
    # each move is one read + one program, plus parity rewrites
    assert report.counters["scaling_io"] >= 2 * moves
    assert kernel.queues[0].busy_until > 0.0


def test_wear_accumulates_on_devices():
    cfg = toy_config(workload={"ops": 3000, "write_fraction": 1.0})
    kernel = SimKernel(cfg)
    kernel.run(None)
    assert sum(dev.pe_count for dev in kernel.devices) > 0


def test_pswl_converges_on_small_gap_run():
    cfg = toy_config(
        array={"original_disks": 3, "scaling_disks": 1, "stripes": 100},
        workload={"ops": 40000, "write_fraction": 1.0, "zipf_skew": 0.9},
        initial_wear={"mode": "explicit", "pe_counts": [25.0, 25.0, 25.0, 0.0]},
        run={"until": "converged", "seed": 5},
        controller={"sampling_period": 256})
    report = run_experiment(cfg)
    assert report.converged, report.failure_reason
    assert report.convergence_event > 0
    assert report.convergence_total_io <= report.final["total_io"]
    # the run stopped at the first converged sample: gap below the exit bar
    kernel_gap = report.series[-1]
    assert kernel_gap["phase"] == "converged"


def test_converged_mode_flags_nonconvergence_on_empty_stream():
    cfg = toy_config(
        run={"until": "converged"},
        initial_wear={"mode": "explicit", "pe_counts": [50, 50, 0]})
    report = run_experiment(cfg, stream_of([]))
    assert not report.converged
    assert report.failure_reason == "non_convergence"


def test_already_converged_start_costs_only_plan_io():
    cfg = toy_config(run={"until": "converged"},
                     workload={"ops": 1000})
    # no initial wear anywhere: zero gap, immediate exit
    report = run_experiment(cfg)
    assert report.converged
    assert report.convergence_event == 0
    assert report.counters["host_io"] == 0
    assert report.convergence_total_io == report.counters["scaling_io"] + report.counters["gc_io"]


def test_worn_out_device_reports_failure():
    cfg = toy_config(
        flash={"max_pe_cycles": 2},
        workload={"ops": 30000, "write_fraction": 1.0})
    report = run_experiment(cfg)
    assert report.failed
    assert "worn_out" in report.failure_reason


def test_series_csv_round_trip(tmp_path):
    cfg = toy_config(workload={"ops": 1000})
    report = run_experiment(cfg)
    path = tmp_path / "series.csv"
    report.write_series_csv(str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "event_index,stddev,art,triggers,total_io,afp,e,u,kp,ki,kd,phase"
    assert len(lines) == len(report.series) + 1


def test_stripes_validation():
    with pytest.raises(ConfigError):
        SimKernel(toy_config(array={"stripes": 10 ** 9}))
