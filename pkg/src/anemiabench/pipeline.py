"""Batch orchestration: ingest, select, tune, evaluate, and report.

Every run is driven by one JSON config and one seed. The seed fans out
to per-stage sub-seeds, so identical config + seed reproduces every
output file byte for byte. Reports are plain CSV/JSON, ready to plot.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import REPORT_FORMAT_VERSION, __version__
from .balance import SmoteConfig
from .epi import factors_table, format_ci, format_or, format_p
from .errors import ConfigError, PipelineStageError
from .evaluation import (
    METRIC_ROW_NAMES,
    MetricReport,
    evaluate,
    grid_search,
    make_cv_plan,
)
from .ingest import Dataset, encode, load_dataset, stratified_split
from .learners import LEARNER_IDS, default_grid
from .schema import load_schema
from .seeding import subseed
from .select import BorutaConfig, score_features

OUTPUT_DIR_ENV = "ANEMIABENCH_OUTPUT_DIR"


@dataclass(frozen=True)
class SelectionConfig:
    top_k: int = 15
    min_methods: int = 3
    forced_includes: tuple[str, ...] = ()
    boruta_max_iterations: int = 100
    boruta_n_trees: int = 100
    boruta_significance: float = 0.05


@dataclass(frozen=True)
class PipelineConfig:
    data_path: str
    schema_path: str
    seed: int
    output_dir: str
    test_frac: float = 0.2
    smote: SmoteConfig = field(default_factory=SmoteConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    models: tuple[str, ...] = LEARNER_IDS
    grid_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        bad = sorted(set(self.models) - set(LEARNER_IDS))
        if bad:
            raise ConfigError(f"unknown model ids {bad}; valid: {list(LEARNER_IDS)}")
        if not 0 < self.test_frac < 1:
            raise ConfigError("test_frac must be in (0, 1)")

    def canonical_dict(self) -> dict:
        return {
            "data_path": self.data_path,
            "schema_path": self.schema_path,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "test_frac": self.test_frac,
            "smote": {
                "k_neighbors": self.smote.k_neighbors,
                "target_ratio": self.smote.target_ratio,
            },
            "selection": {
                "top_k": self.selection.top_k,
                "min_methods": self.selection.min_methods,
                "forced_includes": list(self.selection.forced_includes),
                "boruta": {
                    "max_iterations": self.selection.boruta_max_iterations,
                    "n_trees": self.selection.boruta_n_trees,
                    "significance": self.selection.boruta_significance,
                },
            },
            "models": {m: self.grid_overrides.get(m, {}) for m in self.models},
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def config_from_dict(doc: dict, base_dir: Path | None = None) -> PipelineConfig:
    """Parse a config document; relative paths resolve against the config
    file's directory. The ANEMIABENCH_OUTPUT_DIR env var overrides
    output_dir."""
    try:
        seed = doc["seed"]
        data_path = doc["data_path"]
        schema_path = doc["schema_path"]
        output_dir = doc["output_dir"]
    except KeyError as exc:
        raise ConfigError(f"config missing required field {exc}") from exc

    def resolve(p: str) -> str:
        path = Path(p)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return str(path)

    env_out = os.environ.get(OUTPUT_DIR_ENV)
    if env_out:
        output_dir = env_out

    smote_doc = doc.get("smote", {})
    sel_doc = doc.get("selection", {})
    boruta_doc = sel_doc.get("boruta", {})
    models_doc = doc.get("models", list(LEARNER_IDS))
    if isinstance(models_doc, dict):
        models = tuple(models_doc.keys())
        overrides = {m: dict(g) for m, g in models_doc.items() if g}
    else:
        models = tuple(models_doc)
        overrides = {}
    return PipelineConfig(
        data_path=resolve(data_path),
        schema_path=resolve(schema_path),
        seed=int(seed),
        output_dir=resolve(output_dir),
        test_frac=float(doc.get("test_frac", 0.2)),
        smote=SmoteConfig(
            k_neighbors=int(smote_doc.get("k_neighbors", 5)),
            target_ratio=float(smote_doc.get("target_ratio", 1.0)),
            seed=0,
        ),
        selection=SelectionConfig(
            top_k=int(sel_doc.get("top_k", 15)),
            min_methods=int(sel_doc.get("min_methods", 3)),
            forced_includes=tuple(sel_doc.get("forced_includes", ())),
            boruta_max_iterations=int(boruta_doc.get("max_iterations", 100)),
            boruta_n_trees=int(boruta_doc.get("n_trees", 100)),
            boruta_significance=float(boruta_doc.get("significance", 0.05)),
        ),
        models=models,
        grid_overrides=overrides,
    )


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh), base_dir=path.parent)


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    status: str
    n_rows_loaded: int = 0
    n_rows_used: int = 0
    class_counts: dict = field(default_factory=dict)
    n_train: int = 0
    n_test: int = 0
    selected_features: list = field(default_factory=list)
    models: dict = field(default_factory=dict)
    failed_stage: str | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "toolkit_version": __version__,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "status": self.status,
            "n_rows_loaded": self.n_rows_loaded,
            "n_rows_used": self.n_rows_used,
            "class_counts": self.class_counts,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "selected_features": self.selected_features,
            "models": self.models,
            "failed_stage": self.failed_stage,
            "error": self.error,
        }


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _log(message: str, quiet: bool) -> None:
    if not quiet:
        print(message, file=sys.stderr)


class _StageTimer:
    """Logs stage wall-clock to stderr; never touches the output files,
    so timing noise cannot break byte-level reproducibility."""

    def __init__(self, quiet: bool):
        self.quiet = quiet
        self.t0 = time.time()

    def mark(self, stage: str) -> None:
        t1 = time.time()
        _log(f"[{stage}] {t1 - self.t0:.1f}s", self.quiet)
        self.t0 = t1


def run_pipeline(
    cfg: PipelineConfig,
    jobs: int = 1,
    keep_going: bool = False,
    emit_encoded: bool = False,
    quiet: bool = False,
) -> RunManifest:
    """Execute the full workflow and write reports under cfg.output_dir.

    On any stage failure the partially written report files are removed
    and the manifest records the failing stage before the error is
    re-raised as PipelineStageError.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        config_hash=cfg.config_hash(), seed=cfg.seed, status="running"
    )
    written: list[Path] = []
    timer = _StageTimer(quiet)

    def track(path: Path) -> Path:
        written.append(path)
        return path

    stage = "ingest"
    try:
        schema = load_schema(cfg.schema_path)
        ds, n_loaded = load_dataset(cfg.data_path, schema)
        manifest.n_rows_loaded = n_loaded
        manifest.n_rows_used = ds.n_rows
        manifest.class_counts = {
            "0": int(np.sum(ds.labels == 0)),
            "1": int(np.sum(ds.labels == 1)),
        }
        matrix_full = encode(ds)
        if emit_encoded:
            _write_encoded(track(out / "encoded.csv"), matrix_full, ds)
        timer.mark(stage)

        stage = "split"
        plan = stratified_split(ds, cfg.test_frac, subseed(cfg.seed, "split"))
        manifest.n_train = len(plan.train_indices)
        manifest.n_test = len(plan.test_indices)
        train_ds = ds.subset_rows(plan.train_indices)
        timer.mark(stage)

        stage = "select"
        train_matrix_all = encode(train_ds)
        boruta_cfg = BorutaConfig(
            max_iterations=cfg.selection.boruta_max_iterations,
            n_trees=cfg.selection.boruta_n_trees,
            significance=cfg.selection.boruta_significance,
            seed=subseed(cfg.seed, "boruta"),
        )
        table = score_features(
            train_ds,
            train_matrix_all,
            boruta_cfg,
            top_k=cfg.selection.top_k,
            min_methods=cfg.selection.min_methods,
            forced_includes=cfg.selection.forced_includes,
        )
        _write_feature_scores(track(out / "feature_scores.csv"), table)
        selected = list(table.final_set)
        if not selected:
            raise ConfigError("consensus selected no features")
        manifest.selected_features = selected
        timer.mark(stage)

        stage = "model-data"
        model_matrix = matrix_full.subset_features(selected)
        X_all = model_matrix.values
        y_all = np.asarray(ds.labels)
        X_train = X_all[plan.train_indices]
        y_train = y_all[plan.train_indices]
        X_test = X_all[plan.test_indices]
        y_test = y_all[plan.test_indices]
        cv_plan = make_cv_plan(
            y_train, n_folds=5, n_repeats=3, seed=subseed(cfg.seed, "cv")
        )
        timer.mark(stage)

        reports: dict[str, MetricReport] = {}
        cv_rows: list[dict] = []
        failed_models: dict[str, str] = {}
        for model_id in cfg.models:
            stage = f"model:{model_id}"
            grid = cfg.grid_overrides.get(model_id) or default_grid(model_id)
            try:
                result = grid_search(
                    model_id,
                    grid,
                    cv_plan,
                    X_train,
                    y_train,
                    cfg.smote,
                    seed=subseed(cfg.seed, "model", model_id),
                    jobs=jobs,
                )
                leaked = sum(a.synthetic_in_validation for a in result.audits)
                if leaked:
                    raise PipelineStageError(
                        stage, f"{leaked} synthetic rows reached validation"
                    )
                report = evaluate(result.model, X_test, y_test, X_train, y_train)
            except Exception as exc:
                if not keep_going:
                    raise
                failed_models[model_id] = str(exc)
                _log(f"[{stage}] failed, skipping: {exc}", quiet)
                continue
            reports[model_id] = report
            manifest.models[model_id] = {
                "best_hp": result.best_hp,
                "mean_cv_f1": result.mean_f1[result.best_index],
            }
            for row in result.cv_table():
                cv_rows.append({"model": model_id, **row})
            timer.mark(stage)

        stage = "reports"
        _write_model_performance(
            track(out / "model_performance.csv"), list(reports), reports
        )
        _write_cv_results(track(out / "cv_results.csv"), cv_rows)
        for model_id, report in reports.items():
            _write_curve(
                track(out / f"roc_{model_id}.csv"),
                ("threshold", "fpr", "tpr"),
                report.roc_points,
            )
            _write_curve(
                track(out / f"pr_{model_id}.csv"),
                ("threshold", "recall", "precision"),
                report.pr_points,
            )
        _write_text(
            track(out / "metrics.json"),
            json.dumps(
                {m: r.to_dict() for m, r in reports.items()},
                indent=2,
                sort_keys=True,
            )
            + "\n",
        )
        timer.mark(stage)

        stage = "epi"
        _write_factors(track(out / "factors.csv"), factors_table(ds))
        timer.mark(stage)

        manifest.status = "ok"
        if failed_models:
            manifest.status = "partial"
            manifest.models.update(
                {m: {"error": e} for m, e in failed_models.items()}
            )
        _write_text(
            out / "manifest.json",
            json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n",
        )
        return manifest
    except Exception as exc:
        for path in written:
            if path.exists():
                path.unlink()
        manifest.status = "failed"
        manifest.failed_stage = stage
        manifest.error = str(exc)
        _write_text(
            out / "manifest.json",
            json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n",
        )
        if isinstance(exc, PipelineStageError):
            raise
        raise PipelineStageError(stage, exc) from exc


def _write_encoded(path: Path, matrix, ds: Dataset) -> None:
    header = [col.header for col in matrix.column_map] + [ds.schema.label_name]
    lines = [",".join(header)]
    values = matrix.values
    for i in range(values.shape[0]):
        cells = [_fmt(v) for v in values[i]] + [str(int(ds.labels[i]))]
        lines.append(",".join(cells))
    _write_text(path, "\n".join(lines) + "\n")


def _write_feature_scores(path: Path, table) -> None:
    lines = ["feature,method,raw_score,normalized,selected,consensus_count"]
    for s in table.scores:
        lines.append(
            ",".join(
                [
                    s.feature,
                    s.method,
                    _fmt(s.raw_score),
                    _fmt(s.normalized),
                    "true" if s.selected else "false",
                    str(table.consensus_count[s.feature]),
                ]
            )
        )
    _write_text(path, "\n".join(lines) + "\n")


def _write_model_performance(path: Path, model_ids: list[str], reports) -> None:
    lines = [",".join(["metric", *model_ids])]
    for row_name in METRIC_ROW_NAMES:
        cells = [row_name]
        for m in model_ids:
            cells.append(_fmt(reports[m].row_values()[row_name]))
        lines.append(",".join(cells))
    _write_text(path, "\n".join(lines) + "\n")


def _write_cv_results(path: Path, rows: list[dict]) -> None:
    lines = ["model,candidate,hyperparameters,mean_f1,std_f1"]
    for r in rows:
        hp_json = json.dumps(r["hp"], sort_keys=True).replace('"', "'")
        lines.append(
            ",".join(
                [
                    r["model"],
                    str(r["candidate"]),
                    f'"{hp_json}"',
                    _fmt(r["mean_f1"]),
                    _fmt(r["std_f1"]),
                ]
            )
        )
    _write_text(path, "\n".join(lines) + "\n")


def _write_curve(path: Path, header: tuple[str, ...], points) -> None:
    lines = [",".join(header)]
    for t, a, b in points:
        t_str = "inf" if t == float("inf") else _fmt(t)
        lines.append(",".join([t_str, _fmt(a), _fmt(b)]))
    _write_text(path, "\n".join(lines) + "\n")


def _write_factors(path: Path, rows) -> None:
    lines = [
        "feature,category,anemic,not_anemic,total,prevalence_pct,"
        "crude_or,adj_or,ci_low,ci_high,p"
    ]
    for r in rows:
        prev = "" if r.prevalence_pct is None else f"{r.prevalence_pct:.2f}"
        lines.append(
            ",".join(
                [
                    r.feature,
                    r.category,
                    str(r.anemic),
                    str(r.not_anemic),
                    str(r.total),
                    prev,
                    format_or(r.crude_or),
                    format_or(r.adjusted_or),
                    format_ci(r.ci_low),
                    format_ci(r.ci_high),
                    format_p(r.p_value),
                ]
            )
        )
    _write_text(path, "\n".join(lines) + "\n")
