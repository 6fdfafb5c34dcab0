import numpy as np
import pandas as pd
import pytest

from services import heatmap_service

RUNS = [
    [(0, 1), (0, 1), (2, 3), (2, 3), (2, 3)],
    [(0, 1), (2, 3), (2, 3), (2, 3), (2, 3)],
]


def _write_trace(directory, instance, policy, seed, actions):
    frame = pd.DataFrame({
        "t": np.arange(1, len(actions) + 1),
        "super_arm": [heatmap_service.encode_super_arm(a) for a in actions],
        "expected_reward": 0.0,
        "sampled_reward": 0.0,
    })
    frame.to_csv(directory / f"{instance}__{policy}__seed{seed}{heatmap_service.TRACE_SUFFIX}", index=False)


class TestEncoding:

    def test_encode_decode(self):
        assert heatmap_service.encode_super_arm((0, 12)) == "0-12"
        assert heatmap_service.decode_super_arm("0-12") == (0, 12)
        assert heatmap_service.decode_super_arm(3) == (3,)


class TestExplorationHeatmap:

    def test_counts_per_bucket(self):
        counts = heatmap_service.exploration_heatmap(RUNS, num_arms=4, bucket=2)
        assert counts.shape == (4, 3)
        np.testing.assert_array_equal(counts[0], [3, 0, 0])
        np.testing.assert_array_equal(counts[2], [1, 4, 2])
        assert counts.sum() == 2 * 5 * 2

    def test_default_bucket(self):
        assert heatmap_service.default_bucket(20000) == 400
        assert heatmap_service.default_bucket(7, buckets=50) == 1
        assert heatmap_service.default_bucket(101, buckets=50) == 3

    def test_frame_columns_name_first_round_of_bucket(self):
        counts = heatmap_service.exploration_heatmap(RUNS, num_arms=4, bucket=2)
        frame = heatmap_service.heatmap_frame(counts, 2)
        assert list(frame.columns) == ["arm", "t1", "t3", "t5"]

    def test_final_bucket_share(self):
        counts = heatmap_service.exploration_heatmap(RUNS, num_arms=4, bucket=2)
        assert heatmap_service.final_bucket_share(counts, [2, 3]) == 1.0
        assert heatmap_service.final_bucket_share(counts, [0]) == 0.0
        assert heatmap_service.final_bucket_share(np.zeros((2, 1), dtype=int), [0]) == 0.0

    def test_arm_out_of_range(self):
        with pytest.raises(heatmap_service.AggregationError, match="outside"):
            heatmap_service.exploration_heatmap(RUNS, num_arms=3, bucket=2)

    def test_no_runs(self):
        with pytest.raises(heatmap_service.AggregationError):
            heatmap_service.exploration_heatmap([], num_arms=3, bucket=2)


class TestBuildHeatmaps:

    def test_groups_traces_by_policy(self, tmp_path):
        for seed, actions in enumerate(RUNS):
            _write_trace(tmp_path, "synthetic", "crucb", seed, actions)
        _write_trace(tmp_path, "synthetic", "sw-ucb", 0, [(0, 1)] * 5)

        written = heatmap_service.build_heatmaps(tmp_path, buckets=3, out_dir=tmp_path / "maps")
        assert sorted(written) == ["crucb", "sw-ucb"]

        frame = pd.read_csv(written["crucb"])
        assert list(frame.columns) == ["arm", "t1", "t3", "t5"]
        assert frame.loc[frame["arm"] == 2].iloc[0, 1:].tolist() == [1, 4, 2]
        # Arm count is inferred from the largest index seen per policy.
        assert len(pd.read_csv(written["sw-ucb"])) == 2

    def test_skips_unexpected_names(self, tmp_path, caplog):
        _write_trace(tmp_path, "synthetic", "crucb", 0, RUNS[0])
        (tmp_path / f"stray{heatmap_service.TRACE_SUFFIX}").write_text("t,super_arm\n1,0\n")
        heatmap_service.build_heatmaps(tmp_path, num_arms=4)
        assert "unexpected name" in caplog.text

    def test_empty_directory(self, tmp_path):
        with pytest.raises(heatmap_service.AggregationError, match="No trace files"):
            heatmap_service.build_heatmaps(tmp_path)
