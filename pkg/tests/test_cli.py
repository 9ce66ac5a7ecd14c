import numpy as np
import pytest

from dpq.cli import main


@pytest.fixture
def data_csv(tmp_path):
    path = tmp_path / "values.csv"
    rng = np.random.default_rng(5)
    rows = "\n".join(str(v) for v in rng.normal(0, 5, 300))
    path.write_text("value\n" + rows + "\n")
    return path


class TestQuantilesCommand:
    def run_quantiles(self, capsys, data_csv, algorithm, extra=()):
        code = main([
            "quantiles", "--algorithm", algorithm, "--data", str(data_csv),
            "--m", "3", "--epsilon", "1", "--range=-100,100", "--seed", "7",
            *extra,
        ])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        return [float(line) for line in lines]

    def test_prints_m_sorted_values(self, capsys, data_csv):
        values = self.run_quantiles(capsys, data_csv, "jointexp")
        assert len(values) == 3
        assert values == sorted(values)
        assert all(-100 <= v <= 100 for v in values)

    def test_deterministic_given_seed(self, capsys, data_csv):
        first = self.run_quantiles(capsys, data_csv, "jointexp")
        second = self.run_quantiles(capsys, data_csv, "jointexp")
        assert first == second

    def test_every_algorithm(self, capsys, data_csv):
        for algorithm in ("jointexp", "appindexp", "csmooth", "aggtree"):
            values = self.run_quantiles(capsys, data_csv, algorithm)
            assert len(values) == 3

    def test_jitter_flag(self, capsys, data_csv):
        values = self.run_quantiles(capsys, data_csv, "jointexp",
                                    extra=("--jitter", "1e-7"))
        assert len(values) == 3

    def test_bare_jitter_flag_uses_default_scale(self, capsys, data_csv):
        values = self.run_quantiles(capsys, data_csv, "jointexp",
                                    extra=("--jitter",))
        assert len(values) == 3


class TestRunCommand:
    def test_run_writes_csv(self, tmp_path, capsys):
        config = tmp_path / "config.txt"
        config.write_text(
            "algorithm=aggtree\ndataset=uniform\nn=60\nm_range=1,2\n"
            "epsilon=1\ntrials=2\nseed=1\ntiming=off\n"
        )
        out = tmp_path / "results.csv"
        assert main(["run", "--config", str(config), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 5  # header + 2 m's x 2 trials

    def test_out_defaults_to_config_value(self, tmp_path):
        out = tmp_path / "fromconfig.csv"
        config = tmp_path / "config.txt"
        config.write_text(
            "algorithm=aggtree\ndataset=uniform\nn=40\nm_range=1\n"
            f"trials=1\ntiming=off\nout={out}\n"
        )
        assert main(["run", "--config", str(config)]) == 0
        assert out.exists()


class TestCalibrateCommand:
    def test_writes_table(self, tmp_path):
        out = tmp_path / "calib.txt"
        assert main(["calibrate", "--out", str(out), "--max-m", "2"]) == 0
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert len(lines) == 3  # m=1: 1 row, m=2: 2 rows
