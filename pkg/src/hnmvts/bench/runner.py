"""Experiment orchestration: baseline-vs-hypernetwork grids plus statistics.

`run_experiment` trains every (horizon, seed, variant) cell of a grid,
evaluates on the chronological test split (hypernetwork models are baked
first), and maintains a JSON-lines result file keyed by
(dataset, backbone, variant, horizon, seed): reruns overwrite matching
records atomically. `summarize` folds records into per-cell comparison rows
with exact Wilcoxon significance over the seed pairs.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..backbones import DLinearBackbone, MlpBackbone
from ..data import SeriesTable, chrono_split, gen_synthetic, load_csv, make_windows
from ..hypernet import bake, build_baseline, build_hyper
from ..numcore import spawn_rng
from ..trainer import TrainConfig, TrainingError, evaluate, train
from .config import RunConfig
from .stats import wilcoxon_signed_rank

__all__ = ["ResultRecord", "SummaryRow", "run_experiment", "summarize",
           "summary_text", "summary_csv", "load_records", "write_records"]

_RECORD_FIELDS = [
    "dataset", "backbone", "variant", "horizon", "seed", "status", "reason",
    "test_mse", "test_mae", "seconds_per_epoch_mean", "seconds_per_epoch_std",
    "n_epochs", "best_epoch", "param_count_total", "param_count_trainable",
    "hyper_param_count",
]


@dataclass
class ResultRecord:
    dataset: str
    backbone: str
    variant: str
    horizon: int
    seed: int
    status: str = "ok"
    reason: str = ""
    test_mse: float | None = None
    test_mae: float | None = None
    seconds_per_epoch_mean: float | None = None
    seconds_per_epoch_std: float | None = None
    n_epochs: int | None = None
    best_epoch: int | None = None
    param_count_total: int | None = None
    param_count_trainable: int | None = None
    hyper_param_count: int | None = None

    @property
    def key(self) -> tuple:
        return (self.dataset, self.backbone, self.variant, self.horizon, self.seed)

    def to_json(self) -> str:
        data = asdict(self)
        return json.dumps({k: data[k] for k in _RECORD_FIELDS})

    @classmethod
    def from_json(cls, line: str) -> "ResultRecord":
        return cls(**json.loads(line))


def load_records(path: str | Path) -> list[ResultRecord]:
    path = Path(path)
    if not path.exists():
        return []
    records = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(ResultRecord.from_json(line))
    return records


def write_records(records: list[ResultRecord], path: str | Path) -> None:
    """Atomic replace so a crash never leaves a half-written result file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".results-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _merge_record(records: list[ResultRecord], rec: ResultRecord) -> list[ResultRecord]:
    out = [r for r in records if r.key != rec.key]
    out.append(rec)
    out.sort(key=lambda r: (r.dataset, r.backbone, r.horizon, r.variant, r.seed))
    return out


def load_table(cfg: RunConfig) -> SeriesTable:
    if cfg.source == "synthetic":
        return gen_synthetic(cfg.synth, cfg.synth_seed)
    return load_csv(cfg.source, timestamp_column=cfg.timestamp_column)


def build_model_for_run(cfg: RunConfig, variant: str, train_split: SeriesTable,
                        horizon: int, seed: int):
    """Deterministic model for one grid cell; init stream keyed by the cell."""
    rng = spawn_rng(seed, 50_000 + horizon * 4 + (0 if variant == "baseline" else 1))
    if cfg.backbone == "dlinear":
        backbone = DLinearBackbone(cfg.lookback, cfg.kernel)
    else:
        backbone = MlpBackbone(cfg.lookback, cfg.mlp_widths, rng=rng)
    if variant == "baseline":
        return build_baseline(
            backbone, train_split.n_channels, horizon, rng,
            revin=cfg.revin, shared_final=cfg.shared_final,
            channel_names=list(train_split.channel_names),
        )
    return build_hyper(
        backbone, train_split, horizon, rng,
        d=cfg.embed_dim, mode=cfg.gen_mode, gen_hidden=cfg.gen_hidden,
        learnable_z=cfg.learnable_embeddings, revin=cfg.revin,
    )


def run_experiment(cfg: RunConfig, out_path: str | Path | None = None,
                   progress=None) -> list[ResultRecord]:
    """Run the full grid; returns (and optionally persists) all records."""
    if not cfg.seeds:
        raise ValueError("seed list must be nonempty")
    if not cfg.horizons:
        raise ValueError("horizon list must be nonempty")
    table = load_table(cfg)
    train_split, val_split, test_split = chrono_split(table, cfg.split)
    records = load_records(out_path) if out_path else []
    for horizon in cfg.horizons:
        try:
            train_w = make_windows(train_split, cfg.lookback, horizon)
            val_w = make_windows(val_split, cfg.lookback, horizon)
            test_w = make_windows(test_split, cfg.lookback, horizon)
            window_error = None
        except ValueError as err:
            window_error = str(err)
        for seed in cfg.seeds:
            for variant in cfg.variants:
                if window_error is not None:
                    rec = ResultRecord(cfg.dataset_name, cfg.backbone, variant,
                                       horizon, seed, status="failed",
                                       reason=window_error)
                else:
                    rec = _run_cell(cfg, variant, train_split, horizon, seed,
                                    train_w, val_w, test_w)
                records = _merge_record(records, rec)
                if out_path:
                    write_records(records, out_path)
                if progress:
                    progress(rec)
    return records


def _run_cell(cfg: RunConfig, variant: str, train_split: SeriesTable, horizon: int,
              seed: int, train_w, val_w, test_w) -> ResultRecord:
    rec = ResultRecord(cfg.dataset_name, cfg.backbone, variant, horizon, seed)
    try:
        model = build_model_for_run(cfg, variant, train_split, horizon, seed)
        tc = TrainConfig(
            lookback=cfg.lookback, horizon=horizon, batch_size=cfg.batch_size,
            lr=cfg.lr, max_epochs=cfg.max_epochs, seed=seed, shuffle=cfg.shuffle,
            revin=cfg.revin, early_stop_patience=cfg.early_stop_patience,
        )
        model, history = train(model, train_w, val_w, tc)
        rec.param_count_total = model.param_count()
        rec.param_count_trainable = model.param_count(trainable_only=True)
        rec.hyper_param_count = sum(t.size for t in model.hyper_parameters().values())
        if variant == "hn_mvts":
            model = bake(model)
        metrics = evaluate(model, test_w)
        rec.test_mse = metrics["mse"]
        rec.test_mae = metrics["mae"]
        rec.seconds_per_epoch_mean = float(np.mean(history.seconds))
        rec.seconds_per_epoch_std = float(np.std(history.seconds))
        rec.n_epochs = history.n_epochs
        rec.best_epoch = history.best_epoch
    except (TrainingError, ValueError) as err:
        rec.status = "failed"
        rec.reason = str(err)
    return rec


@dataclass
class SummaryRow:
    dataset: str
    backbone: str
    horizon: int
    n_seeds: int = 0
    complete: bool = False
    baseline_mse_mean: float | None = None
    baseline_mse_std: float | None = None
    hn_mse_mean: float | None = None
    hn_mse_std: float | None = None
    baseline_mae_mean: float | None = None
    hn_mae_mean: float | None = None
    rel_mse_change: float | None = None
    p_value: float | None = None
    significant: bool = False
    time_ratio: float | None = None
    note: str = ""


def summarize(records: list[ResultRecord], alpha: float = 0.05) -> list[SummaryRow]:
    cells: dict[tuple, dict[str, dict[int, ResultRecord]]] = {}
    for rec in records:
        if rec.status != "ok":
            continue
        cell = cells.setdefault((rec.dataset, rec.backbone, rec.horizon), {})
        cell.setdefault(rec.variant, {})[rec.seed] = rec
    rows = []
    for (dataset, backbone, horizon), by_variant in sorted(cells.items()):
        row = SummaryRow(dataset, backbone, horizon)
        base = by_variant.get("baseline", {})
        hn = by_variant.get("hn_mvts", {})
        seeds = sorted(set(base) & set(hn))
        row.n_seeds = len(seeds)
        if not seeds or set(base) != set(hn):
            row.note = "incomplete: variants cover different seeds"
            rows.append(row)
            continue
        row.complete = True
        base_mse = [base[s].test_mse for s in seeds]
        hn_mse = [hn[s].test_mse for s in seeds]
        row.baseline_mse_mean = float(np.mean(base_mse))
        row.baseline_mse_std = float(np.std(base_mse))
        row.hn_mse_mean = float(np.mean(hn_mse))
        row.hn_mse_std = float(np.std(hn_mse))
        row.baseline_mae_mean = float(np.mean([base[s].test_mae for s in seeds]))
        row.hn_mae_mean = float(np.mean([hn[s].test_mae for s in seeds]))
        row.rel_mse_change = (row.hn_mse_mean - row.baseline_mse_mean) / row.baseline_mse_mean
        if len(seeds) >= 5:
            res = wilcoxon_signed_rank(base_mse, hn_mse, alpha=alpha)
            row.p_value = res.p_value
            row.significant = res.significant
        else:
            row.note = "too few paired seeds for the significance test"
        base_time = [base[s].seconds_per_epoch_mean for s in seeds]
        hn_time = [hn[s].seconds_per_epoch_mean for s in seeds]
        if all(v is not None for v in base_time + hn_time) and np.mean(base_time) > 0:
            row.time_ratio = float(np.mean(hn_time) / np.mean(base_time))
        rows.append(row)
    return rows


def summary_text(rows: list[SummaryRow]) -> str:
    header = (
        f"{'dataset':<12} {'backbone':<9} {'H':>4}  "
        f"{'baseline MSE':>18} {'hn_mvts MSE':>18} {'change':>8} "
        f"{'p':>8} {'sig':>4} {'t-ratio':>8}"
    )
    lines = [header, "-" * len(header)]
    for r in rows:
        if not r.complete:
            lines.append(
                f"{r.dataset:<12} {r.backbone:<9} {r.horizon:>4}  [{r.note}]"
            )
            continue
        base = f"{r.baseline_mse_mean:.4f}±{r.baseline_mse_std:.4f}"
        hn = f"{r.hn_mse_mean:.4f}±{r.hn_mse_std:.4f}"
        p = f"{r.p_value:.4f}" if r.p_value is not None else "n/a"
        ratio = f"{r.time_ratio:.3f}" if r.time_ratio is not None else "n/a"
        lines.append(
            f"{r.dataset:<12} {r.backbone:<9} {r.horizon:>4}  "
            f"{base:>18} {hn:>18} {r.rel_mse_change:>+7.1%} "
            f"{p:>8} {'yes' if r.significant else 'no':>4} {ratio:>8}"
        )
    return "\n".join(lines)


def summary_csv(rows: list[SummaryRow]) -> str:
    cols = [
        "dataset", "backbone", "horizon", "n_seeds", "complete",
        "baseline_mse_mean", "baseline_mse_std", "hn_mse_mean", "hn_mse_std",
        "baseline_mae_mean", "hn_mae_mean", "rel_mse_change", "p_value",
        "significant", "time_ratio", "note",
    ]
    lines = [",".join(cols)]
    for r in rows:
        vals = []
        for c in cols:
            v = getattr(r, c)
            vals.append("" if v is None else str(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"
