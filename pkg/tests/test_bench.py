import pytest

from adw.bench import (CostModel, WorkloadSpec, curve_for_block_size,
                       detect_saturation, export_csv, run_benchmark, summarize)
from adw.errors import InvalidSpec, IoFailure, NoSaturation

# The full default matrix is exercised (and timed) by the acceptance suite;
# unit tests here run narrower sweeps to stay fast.
SMALL_SPEC = WorkloadSpec(send_rates=(20, 60, 120), block_sizes=(10, 70),
                          txs_per_rate=200)


@pytest.fixture(scope="module")
def small_metrics():
    return run_benchmark(SMALL_SPEC, CostModel(), seed=3)


class TestSpecValidation:
    def test_defaults_valid(self):
        WorkloadSpec().validate()

    def test_descending_rates_rejected(self):
        with pytest.raises(InvalidSpec):
            WorkloadSpec(send_rates=(100, 20)).validate()

    def test_nonpositive_rejected(self):
        with pytest.raises(InvalidSpec):
            WorkloadSpec(block_sizes=(0,)).validate()

    def test_matrix_shape(self, small_metrics):
        assert len(small_metrics) == 6  # 3 rates x 2 block sizes

    def test_default_matrix_is_40_rows(self):
        spec = WorkloadSpec()
        assert len(spec.send_rates) * len(spec.block_sizes) == 40


class TestSimulation:
    def test_unsaturated_run_tracks_send_rate(self):
        # capacity 10x the send rate: throughput == rate, latency small
        cost = CostModel(validate_us=4000, commit_us=10000, queue_penalty_us=0)
        spec = WorkloadSpec(send_rates=(20,), block_sizes=(10,), txs_per_rate=500)
        (row,) = run_benchmark(spec, cost, seed=1)
        assert cost.capacity(10) == pytest.approx(200.0)
        assert row.throughput_tps == pytest.approx(20.0, rel=0.05)
        per_tx_service = (cost.validate_us + cost.commit_us / 10) / 1e6
        assert row.avg_latency_s <= 0.5 + per_tx_service + cost.endorse_us / 1e6

    def test_same_seed_identical_metrics(self):
        first = run_benchmark(SMALL_SPEC, CostModel(), seed=7)
        second = run_benchmark(SMALL_SPEC, CostModel(), seed=7)
        assert [m.to_dict() for m in first] == [m.to_dict() for m in second]

    def test_no_invalid_transactions(self, small_metrics):
        assert all(m.invalid == 0 for m in small_metrics)

    def test_throughput_never_exceeds_send_rate(self, small_metrics):
        assert all(m.throughput_tps <= m.send_rate for m in small_metrics)

    def test_latencies_positive_and_ordered(self, small_metrics):
        for m in small_metrics:
            assert 0 < m.min_latency_s <= m.avg_latency_s <= m.max_latency_s
            assert m.avg_latency_s <= m.p95_latency_s <= m.max_latency_s

    def test_timeout_cuts_dominate_at_low_rate_large_blocks(self, small_metrics):
        row = next(m for m in small_metrics
                   if m.send_rate == 20 and m.block_size == 70)
        assert row.timeout_cuts == row.blocks


class TestDetectSaturation:
    def test_step_curve_interpolation(self):
        curve = [(100, 100.0), (120, 110.0), (140, 110.0)]
        assert detect_saturation(curve) == pytest.approx(115.789, abs=0.01)

    def test_no_saturation(self):
        with pytest.raises(NoSaturation):
            detect_saturation([(20, 20.0), (40, 40.0), (60, 60.0)])

    def test_requires_three_points(self):
        with pytest.raises(InvalidSpec):
            detect_saturation([(20, 20.0), (40, 40.0)])

    def test_crossing_clamped_to_bracket(self):
        # saturated throughput below the previous rate clamps to the bracket
        curve = [(100, 100.0), (120, 80.0), (140, 80.0)]
        assert 100.0 <= detect_saturation(curve) <= 120.0

    def test_calibrated_model_saturates_near_110(self, small_metrics):
        curve = curve_for_block_size(small_metrics, 10)
        # only three points here; the full matrix check lives in acceptance
        saturation = detect_saturation(curve)
        assert 60 <= saturation <= 120


class TestExport:
    def test_csv_shape(self, small_metrics, tmp_path):
        path = export_csv(small_metrics, tmp_path / "bench.csv")
        lines = path.read_text().splitlines()
        assert len(lines) == 1 + len(small_metrics)
        assert lines[0] == ("send_rate,block_size,throughput_tps,"
                            "avg_latency_s,p95_latency_s,invalid")

    def test_empty_metrics_error(self, tmp_path):
        with pytest.raises(IoFailure):
            export_csv([], tmp_path / "bench.csv")

    def test_re_export_byte_identical(self, small_metrics, tmp_path):
        p1 = export_csv(small_metrics, tmp_path / "a.csv")
        p2 = export_csv(small_metrics, tmp_path / "b.csv")
        assert p1.read_bytes() == p2.read_bytes()

    def test_summary_curves(self, small_metrics):
        summary = summarize(small_metrics, SMALL_SPEC, CostModel(), seed=3)
        assert set(summary["curves"]) == {"10", "70"}
        assert len(summary["rows"]) == len(small_metrics)
        assert summary["cost_model"]["nominal_capacity_tps"] == pytest.approx(
            CostModel().nominal_capacity, abs=0.01)
