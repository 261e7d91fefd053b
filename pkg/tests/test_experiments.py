"""Study drivers, density estimation, and summaries."""

import math

import numpy as np
import pytest

from spikedfisher import (
    GAUSSIAN,
    RADEMACHER,
    DetectorConfig,
    EntryDistribution,
    ExperimentConfig,
    FrequencyTable,
    ModelDims,
    ParameterError,
    SignalModel,
    SpikeSpec,
    block_noise_model,
    ensure_generator,
    kde_1d,
    kde_2d,
    null_model,
    run_clt_study,
    run_detection_study,
    silverman_bandwidth,
    summarize,
)

SPEC = SpikeSpec(spikes=((20.0, 1), (0.2, 2), (0.1, 1)))
DIMS = ModelDims(p=60, n=120, T=300)


def small_clt_config(**overrides):
    base = dict(
        ladder=(DIMS,),
        target=SPEC,
        dist=GAUSSIAN,
        replicates=24,
        master_seed=7,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestExperimentConfig:
    def test_accepts_tuple_dims(self):
        config = ExperimentConfig(
            ladder=((60, 120, 300),),
            target=SPEC,
            dist=GAUSSIAN,
            replicates=5,
            master_seed=1,
        )
        assert config.ladder == (DIMS,)

    def test_rejects_bad_fields(self):
        with pytest.raises(ParameterError):
            small_clt_config(ladder=())
        with pytest.raises(ParameterError):
            small_clt_config(replicates=0)
        with pytest.raises(ParameterError):
            small_clt_config(master_seed=-1)
        with pytest.raises(ParameterError):
            small_clt_config(master_seed=2**64)
        with pytest.raises(ParameterError):
            small_clt_config(dist="gaussian")
        with pytest.raises(ParameterError):
            small_clt_config(outputs=("summary", "plots"))


class TestCltStudy:
    def test_shapes_and_indices(self):
        result = run_clt_study(small_clt_config())
        assert result.dims == DIMS
        assert [e.shape for e in result.empirical] == [(24, 1), (24, 2), (24, 1)]
        assert [l.shape for l in result.limit] == [(24, 1), (24, 2), (24, 1)]
        assert [r.index for r in result.records] == list(range(24))
        assert len(result.constants) == 3
        assert result.constants[0].lam == pytest.approx(128.0 / 3.0, rel=1e-12)

    def test_centering_is_at_the_outlier(self):
        # sqrt(p)(l - phi(a)) should straddle 0, not sit at phi(a) scale.
        result = run_clt_study(small_clt_config(replicates=40))
        top = result.empirical[0][:, 0]
        assert abs(top.mean()) < 0.5 * math.sqrt(result.constants[0].sigma_sq)

    def test_thread_count_does_not_change_results(self):
        serial = run_clt_study(small_clt_config(), threads=1)
        threaded = run_clt_study(small_clt_config(), threads=4)
        for a, b in zip(serial.empirical + serial.limit, threaded.empirical + threaded.limit):
            np.testing.assert_array_equal(a, b)

    def test_seed_fixes_everything(self):
        one = run_clt_study(small_clt_config())
        two = run_clt_study(small_clt_config())
        for a, b in zip(one.empirical + one.limit, two.empirical + two.limit):
            np.testing.assert_array_equal(a, b)
        other = run_clt_study(small_clt_config(master_seed=8))
        assert not np.array_equal(one.empirical[0], other.empirical[0])

    def test_rejects_bad_targets(self):
        with pytest.raises(ParameterError):
            run_clt_study(small_clt_config(target=null_model(DIMS)))
        with pytest.raises(ParameterError):
            run_clt_study(small_clt_config(target=SpikeSpec()))
        with pytest.raises(ParameterError):
            run_clt_study(small_clt_config(ladder=(DIMS, DIMS)))
        # Spike 2.0 sits inside the critical interval at (c, y) = (0.2, 0.5).
        with pytest.raises(ParameterError):
            run_clt_study(small_clt_config(target=SpikeSpec(spikes=((2.0, 1),))))

    def test_rademacher_study_runs(self):
        result = run_clt_study(small_clt_config(dist=RADEMACHER, replicates=6))
        assert result.dist == RADEMACHER
        assert result.constants[0].sigma_sq == pytest.approx(2039.8880658436212, rel=1e-9)


class TestDetectionStudy:
    LADDER = (ModelDims(p=20, n=40, T=100), ModelDims(p=30, n=60, T=150))

    def config(self, **overrides):
        base = dict(
            ladder=self.LADDER,
            target=block_noise_model,
            dist=GAUSSIAN,
            replicates=16,
            master_seed=3,
        )
        base.update(overrides)
        return ExperimentConfig(**base)

    def test_table_shape_and_sums(self):
        table = run_detection_study(self.config())
        assert table.row_labels == ("0", "1", "2", "3", "4", "5+")
        assert table.column_labels == ("p=20", "p=30")
        assert table.frequencies.shape == (6, 2)
        np.testing.assert_allclose(table.frequencies.sum(axis=0), 1.0, atol=1e-12)

    def test_thread_count_does_not_change_results(self):
        one = run_detection_study(self.config(), threads=1)
        four = run_detection_study(self.config(), threads=4)
        np.testing.assert_array_equal(one.frequencies, four.frequencies)

    def test_fixed_model_target(self):
        dims = self.LADDER[0]
        table = run_detection_study(
            self.config(ladder=(dims,), target=null_model(dims))
        )
        assert table.frequencies.shape == (6, 1)
        # Pure noise: mass concentrates on the zero bin.
        assert table.frequencies[0, 0] > 0.5

    def test_fixed_model_must_match_ladder(self):
        with pytest.raises(ParameterError):
            run_detection_study(self.config(target=null_model(self.LADDER[0])))

    def test_builder_must_return_signal_model(self):
        with pytest.raises(ParameterError):
            run_detection_study(self.config(target=lambda dims: dims))

    def test_spike_spec_target_rejected(self):
        with pytest.raises(ParameterError):
            run_detection_study(self.config(target=SPEC))


class TestFrequencyTable:
    def test_validates_column_sums(self):
        good = np.array([[0.5, 1.0], [0.5, 0.0]])
        FrequencyTable(("a", "b"), ("x", "y"), good)
        with pytest.raises(ParameterError):
            FrequencyTable(("a", "b"), ("x", "y"), np.array([[0.6, 1.0], [0.5, 0.0]]))
        with pytest.raises(ParameterError):
            FrequencyTable(("a", "b"), ("x", "y"), np.array([[1.5, 1.0], [-0.5, 0.0]]))
        with pytest.raises(ParameterError):
            FrequencyTable(("a", "b"), ("x",), good)

    def test_column_lookup(self):
        table = FrequencyTable(("a", "b"), ("x", "y"), np.array([[0.5, 1.0], [0.5, 0.0]]))
        np.testing.assert_array_equal(table.column("y"), [1.0, 0.0])
        with pytest.raises(ParameterError):
            table.column("z")


class TestKde1d:
    def test_recovers_standard_normal(self):
        rng = ensure_generator(101)
        draws = rng.standard_normal(100_000)
        grid = np.linspace(-3.0, 3.0, 121)
        est = kde_1d(draws, grid)
        ref = np.exp(-(grid**2) / 2.0) / math.sqrt(2.0 * math.pi)
        assert np.max(np.abs(est - ref)) < 0.01

    def test_bandwidth_formula(self):
        samples = np.array([0.0, 1.0, 2.0, 5.0])
        expected = 1.06 * samples.std(ddof=1) * 4.0 ** (-0.2)
        assert silverman_bandwidth(samples) == pytest.approx(expected, rel=1e-14)

    def test_integrates_to_one(self):
        rng = ensure_generator(5)
        draws = rng.standard_normal(2_000)
        grid = np.linspace(-6.0, 6.0, 601)
        est = kde_1d(draws, grid)
        assert np.trapezoid(est, grid) == pytest.approx(1.0, abs=1e-3)

    def test_rejects_degenerate_samples(self):
        grid = np.linspace(-1.0, 1.0, 5)
        with pytest.raises(ParameterError):
            kde_1d(np.array([1.0]), grid)
        with pytest.raises(ParameterError):
            kde_1d(np.array([2.0, 2.0, 2.0]), grid)


class TestKde2d:
    def test_recovers_standard_normal_pair(self):
        rng = ensure_generator(303)
        draws = rng.standard_normal((100_000, 2))
        gx = np.linspace(-2.0, 2.0, 41)
        gy = np.linspace(-2.0, 2.0, 41)
        est = kde_2d(draws, gx, gy)
        ref = np.exp(-(gx[:, None] ** 2 + gy[None, :] ** 2) / 2.0) / (2.0 * math.pi)
        assert est.shape == (41, 41)
        assert np.max(np.abs(est - ref)) < 0.01

    def test_transpose_symmetry(self):
        rng = ensure_generator(6)
        draws = rng.standard_normal((500, 2)) @ np.array([[1.0, 0.3], [0.0, 0.9]])
        gx = np.linspace(-2.0, 2.0, 11)
        gy = np.linspace(-1.0, 1.5, 13)
        direct = kde_2d(draws, gx, gy)
        swapped = kde_2d(draws[:, ::-1], gy, gx)
        np.testing.assert_allclose(direct, swapped.T, rtol=1e-12, atol=1e-15)

    def test_rejects_degenerate_samples(self):
        gx = np.linspace(-1.0, 1.0, 5)
        with pytest.raises(ParameterError):
            kde_2d(np.array([[1.0, 2.0]]), gx, gx)
        with pytest.raises(ParameterError):
            kde_2d(np.ones((10, 3)), gx, gx)
        flat = np.column_stack([np.ones(10), np.arange(10.0)])
        with pytest.raises(ParameterError):
            kde_2d(flat, gx, gx)


class TestSummarize:
    def test_hand_example(self):
        stats = summarize(np.array([1.0, 1.0, 1.0, 3.0]))
        assert stats.mean == pytest.approx(1.5, rel=1e-15)
        assert stats.variance == pytest.approx(1.0, rel=1e-15)

    def test_ks_small_for_matching_reference(self):
        rng = ensure_generator(8)
        draws = 2.0 + 3.0 * rng.standard_normal(20_000)
        stats = summarize(draws, ref_mean=2.0, ref_var=9.0)
        assert stats.ks_distance < 0.02

    def test_ks_large_for_wrong_reference(self):
        rng = ensure_generator(8)
        draws = 2.0 + 3.0 * rng.standard_normal(20_000)
        stats = summarize(draws, ref_mean=0.0, ref_var=1.0)
        assert stats.ks_distance > 0.3

    def test_rejects_degenerate_input(self):
        with pytest.raises(ParameterError):
            summarize(np.array([]))
        with pytest.raises(ParameterError):
            summarize(np.array([1.0]))
        with pytest.raises(ParameterError):
            summarize(np.array([2.0, 2.0, 2.0]))  # zero default reference variance
        with pytest.raises(ParameterError):
            summarize(np.array([1.0, 2.0]), ref_var=-1.0)
