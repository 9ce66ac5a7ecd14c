import math

import numpy as np
import pytest
import scipy.stats

from dpq.bench import (
    CSV_HEADER,
    ExperimentConfig,
    estimate,
    evenly_spaced_quantiles,
    gen_gaussian,
    gen_uniform,
    ingest_csv,
    load_config,
    parse_config,
    parse_m_range,
    run_experiment,
)
from dpq.core import RandomSource


class TestGenerators:
    def test_gaussian_moments(self):
        rng = RandomSource(0)
        draws = gen_gaussian(1_000_000, rng)
        assert abs(draws.mean()) < 3 * 5 / 1000
        assert abs(draws.std() - 5.0) < 0.1

    def test_gaussian_deterministic(self):
        assert np.array_equal(gen_gaussian(100, RandomSource(1)),
                              gen_gaussian(100, RandomSource(1)))

    def test_uniform_range(self):
        draws = gen_uniform(100_000, RandomSource(2))
        assert draws.min() >= -5.0 and draws.max() < 5.0

    def test_uniform_ks(self):
        draws = gen_uniform(100_000, RandomSource(3))
        stat, _ = scipy.stats.kstest(draws, scipy.stats.uniform(-5, 10).cdf)
        assert stat < 1.628 / math.sqrt(draws.size)  # 99% band

    def test_uniform_deterministic(self):
        assert np.array_equal(gen_uniform(50, RandomSource(4)),
                              gen_uniform(50, RandomSource(4)))


class TestIngestCsv:
    def test_divisor(self, tmp_path):
        path = tmp_path / "books.csv"
        path.write_text("title,pages\nA,100\nB,250\n")
        assert ingest_csv(path, "pages", 100) == [1.0, 2.5]

    def test_identity_divisor(self, tmp_path):
        path = tmp_path / "books.csv"
        path.write_text("rating,pages\n4.5,100\n3.0,250\n")
        assert ingest_csv(path, "rating", 1) == [4.5, 3.0]

    def test_malformed_rows_skipped_with_warning(self, tmp_path):
        path = tmp_path / "messy.csv"
        rows = ["value"] + ["1.0"] * 7 + ["oops", "two words", "NaN?"]
        path.write_text("\n".join(rows) + "\n")
        with pytest.warns(UserWarning, match="skipped 3"):
            values = ingest_csv(path, "value", 1)
        assert len(values) == 7

    def test_missing_column(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("a\n1\n")
        with pytest.raises(ValueError, match="column"):
            ingest_csv(path, "b", 1)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            ingest_csv(tmp_path / "nope.csv", "a", 1)

    def test_all_rows_unparseable(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("v\nx\ny\n")
        with pytest.warns(UserWarning):
            with pytest.raises(ValueError, match="no parseable"):
                ingest_csv(path, "v", 1)


class TestEvenlySpacedQuantiles:
    def test_m1_is_median(self):
        assert np.allclose(evenly_spaced_quantiles(1, 10).quantiles, [0.5])

    def test_m2_thirds(self):
        assert np.allclose(evenly_spaced_quantiles(2, 10).quantiles, [1 / 3, 2 / 3])

    def test_m3_quartiles(self):
        assert np.allclose(evenly_spaced_quantiles(3, 10).quantiles,
                           [0.25, 0.5, 0.75])


class TestConfigParsing:
    def test_m_range_forms(self):
        assert parse_m_range("1-4") == (1, 2, 3, 4)
        assert parse_m_range("5,2,9") == (2, 5, 9)
        assert parse_m_range("1-3,7") == (1, 2, 3, 7)

    def test_full_config(self):
        config = parse_config(
            """
            # benchmark run
            algorithm=jointexp
            dataset=gaussian
            n=500
            m_range=1-3
            epsilon=0.5
            trials=4
            seed=9
            range=-50,50
            timing=off
            """
        )
        assert config.algorithm == "jointexp"
        assert config.m_range == (1, 2, 3)
        assert config.data_range == (-50.0, 50.0)
        assert config.timing is False

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config("algorithm=jointexp\ndataset=gaussian\nbogus=1\n")

    def test_unknown_algorithm_rejected(self):
        with pytest.raises(ValueError):
            parse_config("algorithm=magic\ndataset=gaussian\n")

    def test_file_dataset_requires_path(self):
        with pytest.raises(ValueError, match="data_file"):
            parse_config("algorithm=jointexp\ndataset=ratings\n")


class TestRunExperiment:
    def base_config(self, **overrides):
        fields = dict(algorithm="jointexp", dataset="gaussian", n=80,
                      m_range=(1,), epsilon=1.0, trials=2, seed=3,
                      timing=False)
        fields.update(overrides)
        return ExperimentConfig(**fields)

    def test_record_count(self, tmp_path):
        out = tmp_path / "r.csv"
        records = run_experiment(self.base_config(), out)
        assert len(records) == 2
        lines = out.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 3

    def test_byte_identical_reruns(self, tmp_path):
        config = self.base_config(m_range=(1, 2), trials=3)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_experiment(config, a)
        run_experiment(config, b)
        assert a.read_bytes() == b.read_bytes()

    def test_timing_mode_records_positive_time(self, tmp_path):
        config = self.base_config(timing=True)
        records = run_experiment(config, tmp_path / "t.csv")
        assert all(r.wall_time_seconds > 0 for r in records)

    def test_all_algorithms_run(self, tmp_path):
        for algorithm in ("jointexp", "appindexp", "csmooth", "aggtree"):
            records = run_experiment(
                self.base_config(algorithm=algorithm), tmp_path / f"{algorithm}.csv"
            )
            assert len(records) == 2
            assert all(r.misclassified_per_quantile >= 0 for r in records)

    def test_file_dataset_resampling(self, tmp_path):
        pool = tmp_path / "pool.csv"
        pool.write_text("value\n" + "\n".join(str(v) for v in range(200)) + "\n")
        config = self.base_config(dataset="file", data_file=str(pool),
                                  data_column="value", n=50,
                                  data_range=(0.0, 200.0))
        records = run_experiment(config, tmp_path / "f.csv")
        assert len(records) == 2

    def test_jitter_enabled(self, tmp_path):
        config = self.base_config(jitter=1e-9 * 200)
        records = run_experiment(config, tmp_path / "j.csv")
        assert len(records) == 2

    def test_jitter_auto_scale(self, tmp_path):
        config = parse_config(
            "algorithm=aggtree\ndataset=uniform\nn=40\nm_range=1\n"
            "trials=1\ntiming=off\njitter=auto\n"
        )
        records = run_experiment(config, tmp_path / "ja.csv")
        assert len(records) == 1

    def test_same_trial_same_data_across_m(self, tmp_path):
        # Trial streams are seeded by trial index only, so the trial-0 rows
        # of different m values see identical datasets.
        config = self.base_config(m_range=(1, 3), trials=1, algorithm="aggtree")
        records = run_experiment(config, tmp_path / "d.csv")
        assert len(records) == 2


class TestEstimateDispatch:
    def test_unknown_algorithm(self):
        from dpq.core import prepare_dataset

        ds = prepare_dataset([1.0], 0, 2)
        spec = evenly_spaced_quantiles(1, 1)
        with pytest.raises(ValueError, match="unknown algorithm"):
            estimate("nope", ds, spec, 1.0, RandomSource(0))
