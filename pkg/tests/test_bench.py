import json

import numpy as np
import pytest

from hnmvts.bench.config import OUT_DIR_ENV, default_config_text, load_config, resolve_out_dir
from hnmvts.bench.runner import (
    ResultRecord,
    load_records,
    run_experiment,
    summarize,
    summary_csv,
    summary_text,
    write_records,
)


def small_cfg(tmp_path, **overrides):
    lines = {
        "data": {"source": "synthetic", "name": "toy"},
        "synth": {
            "n_channels": "3",
            "timesteps": "260",
            "groups": "0,0,1",
            "rho": "0.9",
            "sigma": "0.05",
            "seed": "0",
        },
        "split": {"ratios": "0.6,0.2,0.2"},
        "model": {"backbone": "dlinear", "kernel": "3"},
        "train": {
            "lookback": "8",
            "horizon": "4",
            "batch_size": "16",
            "lr": "0.01",
            "max_epochs": "2",
        },
        "bench": {"horizons": "4", "seeds": "0", "variants": "baseline,hn_mvts"},
        "output": {"dir": str(tmp_path / "runs")},
    }
    for section, kv in overrides.items():
        lines.setdefault(section, {}).update(kv)
    text = "\n".join(
        f"[{sec}]\n" + "\n".join(f"{k} = {v}" for k, v in kv.items())
        for sec, kv in lines.items()
    )
    path = tmp_path / "spec.ini"
    path.write_text(text)
    return path


class TestConfig:
    def test_defaults_parse(self, tmp_path):
        p = tmp_path / "empty.ini"
        p.write_text("[data]\nsource = synthetic\n")
        cfg = load_config(p)
        assert cfg.lookback == 336
        assert cfg.horizons == (48, 96, 192, 336)
        assert cfg.seeds == (0, 1, 2, 3, 4)
        assert cfg.lr == pytest.approx(1e-4)
        assert cfg.variants == ("baseline", "hn_mvts")

    def test_default_text_is_self_consistent(self, tmp_path):
        p = tmp_path / "full.ini"
        p.write_text(default_config_text())
        cfg = load_config(p)
        assert cfg.batch_size == 64 and cfg.revin is True

    def test_bad_variant_rejected(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[bench]\nvariants = baseline,nonsense\n")
        with pytest.raises(ValueError, match="nonsense"):
            load_config(p)

    def test_out_dir_resolution(self, tmp_path, monkeypatch):
        monkeypatch.delenv(OUT_DIR_ENV, raising=False)
        assert str(resolve_out_dir("runs")) == "runs"
        monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "env"))
        assert resolve_out_dir("runs") == tmp_path / "env"
        assert resolve_out_dir("runs", str(tmp_path / "flag")) == tmp_path / "flag"


class TestRunExperiment:
    def test_one_cell_two_records(self, tmp_path):
        cfg = load_config(small_cfg(tmp_path))
        records = run_experiment(cfg)
        assert len(records) == 2
        assert {r.variant for r in records} == {"baseline", "hn_mvts"}
        for r in records:
            assert r.status == "ok"
            assert r.test_mse is not None and r.test_mse >= 0
            assert r.test_mae is not None and r.test_mae >= 0
            assert r.n_epochs == 2

    def test_grid_count(self, tmp_path):
        cfg = load_config(
            small_cfg(tmp_path, bench={"horizons": "2,4", "seeds": "0,1"})
        )
        records = run_experiment(cfg)
        assert len(records) == 2 * 2 * 2

    def test_rerun_overwrites_matching_records(self, tmp_path):
        cfg = load_config(small_cfg(tmp_path))
        out = tmp_path / "results.jsonl"
        first = run_experiment(cfg, out_path=out)
        second = run_experiment(cfg, out_path=out)
        assert len(first) == len(second) == 2
        persisted = load_records(out)
        assert len(persisted) == 2

    def test_reproducible_modulo_timing(self, tmp_path):
        cfg = load_config(small_cfg(tmp_path))
        a = run_experiment(cfg)
        b = run_experiment(cfg)
        strip = lambda r: {
            k: v
            for k, v in json.loads(r.to_json()).items()
            if not k.startswith("seconds_per_epoch")
        }
        assert [strip(r) for r in a] == [strip(r) for r in b]

    def test_hyper_param_counts_recorded(self, tmp_path):
        cfg = load_config(small_cfg(tmp_path))
        records = run_experiment(cfg)
        by_variant = {r.variant: r for r in records}
        assert by_variant["baseline"].hyper_param_count == 0
        # two heads x N*H*D*d + N*d = 2*3*4*8*3 + 3*3
        assert by_variant["hn_mvts"].hyper_param_count == 2 * 3 * 4 * 8 * 3 + 9

    def test_mlp_backbone_grid(self, tmp_path):
        cfg = load_config(
            small_cfg(
                tmp_path,
                model={"backbone": "mlp", "mlp_widths": "6", "gen_mode": "shared_mlp"},
            )
        )
        records = run_experiment(cfg)
        assert all(r.status == "ok" for r in records)
        by_variant = {r.variant: r for r in records}
        # one head: d*(H*D) output map (no hidden, no bias) + N*d embeddings
        assert by_variant["hn_mvts"].hyper_param_count == 3 * (4 * 6) + 3 * 3

    def test_failed_cell_recorded_not_raised(self, tmp_path):
        cfg = load_config(
            small_cfg(tmp_path, train={"lookback": "500", "horizon": "4"})
        )
        records = run_experiment(cfg)
        assert len(records) == 2
        assert all(r.status == "failed" for r in records)
        assert all("timesteps" in r.reason for r in records)


class TestRecordsFile:
    def test_roundtrip(self, tmp_path):
        rec = ResultRecord("d", "dlinear", "baseline", 4, 0, test_mse=0.5, test_mae=0.4)
        path = tmp_path / "r.jsonl"
        write_records([rec], path)
        back = load_records(path)
        assert back[0] == rec

    def test_stable_key_order(self):
        rec = ResultRecord("d", "dlinear", "baseline", 4, 0)
        keys = list(json.loads(rec.to_json()).keys())
        assert keys == sorted(keys, key=keys.index)  # insertion order preserved
        assert keys[0] == "dataset" and "test_mse" in keys


class TestSummarize:
    @staticmethod
    def records_for(mse_pairs, dataset="d", horizon=4):
        records = []
        for seed, (base, hn) in enumerate(mse_pairs):
            records.append(
                ResultRecord(dataset, "dlinear", "baseline", horizon, seed,
                             test_mse=base, test_mae=base, seconds_per_epoch_mean=2.0,
                             seconds_per_epoch_std=0.0)
            )
            records.append(
                ResultRecord(dataset, "dlinear", "hn_mvts", horizon, seed,
                             test_mse=hn, test_mae=hn, seconds_per_epoch_mean=2.5,
                             seconds_per_epoch_std=0.0)
            )
        return records

    def test_identical_metrics_no_change(self):
        rows = summarize(self.records_for([(0.5, 0.5)] * 5))
        row = rows[0]
        assert row.rel_mse_change == 0.0
        assert not row.significant

    def test_five_seeds_strictly_lower_not_significant(self):
        # exact two-sided k=5 cannot reach p < 0.05; flag must follow the math
        pairs = [(0.5 + 0.01 * i, 0.4 + 0.01 * i) for i in range(5)]
        row = summarize(self.records_for(pairs))[0]
        assert row.hn_mse_mean < row.baseline_mse_mean
        assert row.p_value == pytest.approx(2 / 32)
        assert not row.significant

    def test_timing_ratio_from_reference_values(self):
        # reference overhead pair: 15.31 -> 17.24 seconds/epoch
        records = self.records_for([(0.5, 0.4)] * 5)
        for r in records:
            r.seconds_per_epoch_mean = 15.31 if r.variant == "baseline" else 17.24
        row = summarize(records)[0]
        assert row.time_ratio == pytest.approx(17.24 / 15.31, abs=1e-12)
        assert row.time_ratio == pytest.approx(1.126, abs=2e-3)

    def test_means_match_flat_recompute(self, rng):
        pairs = [(float(a), float(b)) for a, b in rng.uniform(0.1, 1.0, size=(5, 2))]
        row = summarize(self.records_for(pairs))[0]
        assert row.baseline_mse_mean == pytest.approx(
            np.mean([p[0] for p in pairs]), abs=1e-12
        )
        assert row.baseline_mse_std == pytest.approx(
            np.std([p[0] for p in pairs]), abs=1e-12
        )

    def test_missing_pair_marked_incomplete(self):
        records = self.records_for([(0.5, 0.4)] * 5)
        records = [r for r in records if not (r.variant == "hn_mvts" and r.seed == 3)]
        row = summarize(records)[0]
        assert not row.complete
        assert "incomplete" in row.note

    def test_text_and_csv_render(self):
        rows = summarize(self.records_for([(0.5, 0.4)] * 5))
        text = summary_text(rows)
        assert "baseline MSE" in text and "dlinear" in text
        csv_out = summary_csv(rows)
        assert csv_out.startswith("dataset,")
        assert len(csv_out.strip().splitlines()) == 2
