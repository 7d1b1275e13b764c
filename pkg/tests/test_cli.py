import json

import numpy as np
import pytest

from spdtok.ablate import format_ablation_table, run_ablation
from spdtok.cli import main
from spdtok.errors import InvalidSpec, MissingRun
from spdtok.report import consolidate, curves_csv, load_run, markdown_table
from spdtok.train import DataConfig, ExperimentConfig, train_experiment

SYNTH = dict(n_classes=2, dim=4, trials_per_class=12, separation=1.5,
             dispersion=0.05, seed=13)


def tiny_exp(seeds=(3, 4)):
    return ExperimentConfig(
        data=DataConfig(source="synth", embedding="logeuclidean", synth=SYNTH),
        model=dict(d_model=16, layers=1, heads=2, d_ff=16, dropout=0.0),
        epochs=2, batch_size=8, seeds=seeds,
    )


class TestAblate:
    def test_embedding_axis_variants(self, tmp_path):
        table = run_ablation(tiny_exp(), "embedding", str(tmp_path))
        names = [r["variant"] for r in table["rows"]]
        assert names == ["logeuclidean", "bwspd", "euclidean"]
        assert table["rows"][0]["p_vs_first"] is None
        for row in table["rows"][1:]:
            assert 0.0 <= row["p_vs_first"] <= 1.0
        assert (tmp_path / "ablation_embedding.csv").is_file()
        assert (tmp_path / "ablation_embedding.json").is_file()
        assert "variant" in format_ablation_table(table)

    def test_bn_axis(self):
        table = run_ablation(tiny_exp(seeds=(3,)), "bn_embed")
        names = [r["variant"] for r in table["rows"]]
        assert names == ["with_bn", "without_bn"]
        # a single seed cannot support a paired test
        assert all(r["p_vs_first"] is None for r in table["rows"])

    def test_depth_and_heads_axes(self):
        table = run_ablation(tiny_exp(seeds=(3,)), "depth")
        assert [r["variant"] for r in table["rows"]] == ["depth2", "depth4", "depth6", "depth8"]
        table = run_ablation(tiny_exp(seeds=(3,)), "heads")
        assert [r["variant"] for r in table["rows"]] == ["heads4", "heads8", "heads16"]

    def test_bands_axis_needs_time_series(self):
        with pytest.raises(InvalidSpec):
            run_ablation(tiny_exp(), "bands")

    def test_bands_axis_runs(self):
        exp = ExperimentConfig(
            data=DataConfig(source="band_mixture", embedding="logeuclidean",
                            band_mixture=dict(trials_per_class=8, samples=256, seed=1)),
            model=dict(d_model=16, layers=1, heads=2, d_ff=16, dropout=0.0),
            epochs=1, batch_size=8, seeds=(3,),
        )
        table = run_ablation(exp, "bands")
        assert [r["variant"] for r in table["rows"]] == ["multiband_T3", "single_T1"]

    def test_attention_axis_runs(self):
        table = run_ablation(tiny_exp(seeds=(3,)), "attention")
        assert [r["variant"] for r in table["rows"]] == ["standard", "geometric"]

    def test_unknown_axis(self):
        with pytest.raises(InvalidSpec):
            run_ablation(tiny_exp(), "width")


class TestReport:
    def make_runs(self, tmp_path, seeds=(3, 4, 5, 6, 7)):
        out = tmp_path / "exp"
        train_experiment(tiny_exp(seeds=seeds), str(out))
        return [str(out / f"seed{s}") for s in seeds]

    def test_single_run_table(self, tmp_path):
        dirs = self.make_runs(tmp_path, seeds=(3,))
        merged = consolidate(dirs)
        assert merged["summary"]["n_runs"] == 1
        md = markdown_table(merged)
        assert md.count("\n") == 2  # header, separator, one row

    def test_std_matches_scalar_oracle(self, tmp_path):
        dirs = self.make_runs(tmp_path)
        merged = consolidate(dirs)
        finals = [load_run(d)["final_test_accuracy"] for d in dirs]
        mean = sum(finals) / len(finals)
        var = sum((x - mean) ** 2 for x in finals) / (len(finals) - 1)
        assert np.isclose(merged["summary"]["final_test_accuracy_std"], np.sqrt(var), atol=1e-12)
        assert np.isclose(merged["summary"]["final_test_accuracy_mean"], mean, atol=1e-12)

    def test_curves_csv_rows(self, tmp_path):
        dirs = self.make_runs(tmp_path, seeds=(3, 4))
        text = curves_csv(consolidate(dirs))
        lines = text.strip().splitlines()
        assert lines[0].startswith("seed,epoch,")
        assert len(lines) == 1 + 2 * 2  # two runs x two epochs

    def test_refuses_mixed_configs(self, tmp_path):
        dirs = self.make_runs(tmp_path, seeds=(3,))
        other_exp = tiny_exp(seeds=(3,))
        other_exp.model["layers"] = 2
        out2 = tmp_path / "exp2"
        train_experiment(other_exp, str(out2))
        with pytest.raises(InvalidSpec, match="layers"):
            consolidate(dirs + [str(out2 / "seed3")])

    def test_missing_run(self, tmp_path):
        with pytest.raises(MissingRun):
            consolidate([str(tmp_path / "nope")])


class TestCliMain:
    def test_verify_filter(self, capsys):
        rc = main(["verify", "--filter", "pair_counts"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "pair_counts/offdiag_pairs_d8" in out

    def test_verify_writes_json(self, tmp_path, capsys):
        path = tmp_path / "verify.json"
        rc = main(["verify", "--filter", "injectivity", "--json", str(path)])
        assert rc == 0
        parsed = json.loads(path.read_text())
        assert parsed["all_passed"] is True

    def test_train_and_report_round_trip(self, tmp_path, capsys):
        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps(tiny_exp(seeds=(3, 4)).to_dict()))
        out = tmp_path / "runs"
        rc = main(["train", "--config", str(cfg_path), "--out", str(out)])
        assert rc == 0
        assert "mean final test accuracy" in capsys.readouterr().out
        rc = main(["report", str(out / "seed3"), str(out / "seed4"),
                   "--out", str(tmp_path / "rep")])
        assert rc == 0
        assert (tmp_path / "rep" / "report.md").is_file()
        assert (tmp_path / "rep" / "curves.csv").is_file()

    def test_env_seed_override(self, tmp_path, capsys, monkeypatch):
        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps(tiny_exp(seeds=(3, 4)).to_dict()))
        monkeypatch.setenv("SPDTOK_SEED", "9")
        rc = main(["train", "--config", str(cfg_path)])
        out = capsys.readouterr().out
        assert rc == 0
        assert "seed 9" in out and "seed 3" not in out

    def test_ablate_command(self, tmp_path, capsys):
        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps(tiny_exp(seeds=(3,)).to_dict()))
        rc = main(["ablate", "--config", str(cfg_path), "--axis", "bn_embed",
                   "--out", str(tmp_path / "abl")])
        assert rc == 0
        assert (tmp_path / "abl" / "ablation_bn_embed.csv").is_file()

    def test_bench_command(self, tmp_path, capsys):
        path = tmp_path / "bench.json"
        rc = main(["bench", "--dims", "2,8", "--trials", "3", "--json", str(path)])
        assert rc == 0
        parsed = json.loads(path.read_text())
        dims = {r["dim"] for r in parsed["rows"]}
        assert dims == {2, 8}

    def test_error_exit_code(self, tmp_path, capsys):
        rc = main(["report", str(tmp_path / "missing")])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_cross_process_reproducibility(self, tmp_path):
        import subprocess
        import sys

        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps(tiny_exp(seeds=(11,)).to_dict()))
        for sub in ("a", "b"):
            proc = subprocess.run(
                [sys.executable, "-m", "spdtok.cli", "train",
                 "--config", str(cfg_path), "--out", str(tmp_path / sub)],
                capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
        blob_a = (tmp_path / "a" / "seed11" / "metrics.json").read_bytes()
        blob_b = (tmp_path / "b" / "seed11" / "metrics.json").read_bytes()
        assert blob_a == blob_b

    def test_verify_nonzero_exit_on_failure(self, capsys, monkeypatch):
        import spdtok.verify as verify
        from spdtok.verify import PropertyResult

        def failing_suite(rng):
            return [PropertyResult("alwaysfail", "forced", False, {"why": "injected"})]

        monkeypatch.setitem(verify.SUITES, "alwaysfail", failing_suite)
        rc = main(["verify", "--filter", "alwaysfail"])
        out = capsys.readouterr().out
        assert rc == 1
        assert "[FAIL] alwaysfail/forced" in out
