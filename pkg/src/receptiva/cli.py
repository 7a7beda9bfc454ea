"""Command-line pipeline orchestration.

Subcommands mirror the processing chain: synth, features, label, train,
eval, cluster, relate, bias, and all (the whole chain). Each run lives in
``<out_dir>/run_<config-hash>/``; every step writes its artifacts plus a
manifest with the config hash and seed, and rerunning a step with the same
configuration reproduces its artifacts byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io as rio
from .config import ConfigError, RunConfig, config_dict, config_hash, load_config
from .ema import ema_descriptives
from .models.serialize import load_model, save_model
from .pipeline import (
    Dataset,
    ParticipantModels,
    aggregate_metrics,
    build_dataset,
    cluster_step,
    eval_participant,
    fit_participant,
    participant_table,
    relationship_step,
)
from .relationship import SCORE_GRID
from .synth import generate
from .timeseries import Channel

STEP_ORDER = ("synth", "features", "label", "train", "eval", "cluster", "relate", "bias")


class MissingArtifact(Exception):
    pass


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifact(str(path))
    return path


def _raw_dir(config: RunConfig, run_dir: Path) -> Path:
    return Path(config.data_dir) if config.data_dir else run_dir / "raw"


def _manifest(run_dir: Path, step: str, config: RunConfig, artifacts: list[str]) -> None:
    rio.write_manifest(
        run_dir / f"{step}.manifest.json", step, config_hash(config), config.seed, artifacts
    )


def step_synth(config: RunConfig, run_dir: Path) -> list[str]:
    raw = _raw_dir(config, run_dir)
    raw.mkdir(parents=True, exist_ok=True)
    cohort = generate(config.cohort_spec())
    artifacts = []
    for p in cohort.participants:
        for channel in (Channel.ECG, Channel.EDA, Channel.ST, Channel.ACC3):
            name = rio.signal_filename(p.participant_id, channel)
            rio.write_signal_csv(raw / name, [d[channel] for d in p.day_records])
            artifacts.append(f"raw/{name}")
    rio.write_ema_csv(run_dir / "ema.csv", cohort.all_events())
    rio.write_ground_truth_csv(run_dir / "ground_truth.csv", cohort)
    rio.write_meta_csv(
        run_dir / "cohort_meta.csv",
        {"intercept": cohort.intercept, "seed": config.seed,
         "n_participants": len(cohort.participants)},
    )
    artifacts += ["ema.csv", "ground_truth.csv", "cohort_meta.csv"]
    return artifacts


def _discover_pids(raw: Path) -> list[str]:
    pids = sorted({f.name.split("_")[0] for f in raw.glob("*_ECG.csv")})
    if not pids:
        raise MissingArtifact(str(raw / "<pid>_ECG.csv"))
    return pids


def _load_participant_days(raw: Path, pid: str) -> list[dict[Channel, list]]:
    per_channel = {}
    for channel in (Channel.ECG, Channel.EDA, Channel.ST, Channel.ACC3):
        path = _require(raw / rio.signal_filename(pid, channel))
        per_channel[channel] = rio.read_signal_csv(path, pid, channel)
    n_days = min(len(v) for v in per_channel.values())
    return [{ch: per_channel[ch][d] for ch in per_channel} for d in range(n_days)]


def step_features(config: RunConfig, run_dir: Path) -> list[str]:
    raw = _raw_dir(config, run_dir)
    datasets = []
    names = None
    for pid in _discover_pids(raw):
        days = _load_participant_days(raw, pid)
        table = participant_table(days, config)
        names = table.names
        datasets.append(build_dataset(table, [], config.label_window_min))
    rio.write_rows_csv(run_dir / "features.csv", datasets)
    rio.write_feature_columns(run_dir / "feature_columns.csv", names)
    return ["features.csv", "feature_columns.csv"]


def _load_labeled(config: RunConfig, run_dir: Path, name: str = "labeled.csv") -> list[Dataset]:
    names = rio.read_feature_columns(_require(run_dir / "feature_columns.csv"))
    events = rio.read_ema_csv(_require(run_dir / "ema.csv"))
    by_pid: dict[str, list] = {}
    for e in events:
        by_pid.setdefault(e.participant_id, []).append(e)
    return rio.read_rows_csv(_require(run_dir / name), names, by_pid, config.seg_len_s)


def step_label(config: RunConfig, run_dir: Path) -> list[str]:
    from .ema import pseudo_label

    datasets = _load_labeled(config, run_dir, name="features.csv")
    for ds in datasets:
        event_idx, labels = pseudo_label(ds.events, ds.seg_end_s, config.label_window_min)
        ds.event_idx = event_idx
        ds.y = labels
        for i, e in enumerate(event_idx):
            if e >= 0 and ds.events[e].responded:
                ds.affect[i] = ds.events[e].composite
            else:
                ds.affect[i] = np.nan
    rio.write_rows_csv(run_dir / "labeled.csv", datasets)
    return ["labeled.csv"]


def _models_dir(run_dir: Path) -> Path:
    return run_dir / "models"


def _save_participant_models(dirpath: Path, models: ParticipantModels) -> list[str]:
    dirpath.mkdir(parents=True, exist_ok=True)
    written = []
    meta = {
        "participant_id": models.participant_id,
        "receptivity_excluded": models.receptivity_excluded,
        "exclusion_reason": models.exclusion_reason,
        "affect_excluded": models.affect_excluded,
        "baseline_response_rate": models.baseline_response_rate,
        "baseline_affect_mean": models.baseline_affect_mean,
        "baseline_affect_std": models.baseline_affect_std,
        "affect_scale": list(models.affect_scale),
        "train_affect_values": [float(v) for v in models.train_affect_values],
    }
    (dirpath / "meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n")
    written.append("meta.json")
    parts = {
        "norm.json": models.norm_stats,
        "pca.json": models.pca,
        "pca_norm.json": models.pca_norm,
        "forest_classify.json": models.forest_classify,
        "net_classify.json": models.net_classify,
        "forest_regress.json": models.forest_regress,
        "net_hetero.json": models.net_hetero,
    }
    for name, obj in parts.items():
        if obj is not None:
            save_model(dirpath / name, obj)
            written.append(name)
    return written


def _load_participant_models(dirpath: Path) -> ParticipantModels:
    meta = json.loads(_require(dirpath / "meta.json").read_text())
    models = ParticipantModels(
        participant_id=meta["participant_id"],
        receptivity_excluded=meta["receptivity_excluded"],
        exclusion_reason=meta["exclusion_reason"],
        affect_excluded=meta["affect_excluded"],
        baseline_response_rate=meta["baseline_response_rate"],
        baseline_affect_mean=meta["baseline_affect_mean"],
        baseline_affect_std=meta["baseline_affect_std"],
        affect_scale=tuple(meta["affect_scale"]),
        train_affect_values=np.asarray(meta["train_affect_values"]),
    )
    for attr, name in (
        ("norm_stats", "norm.json"),
        ("pca", "pca.json"),
        ("pca_norm", "pca_norm.json"),
        ("forest_classify", "forest_classify.json"),
        ("net_classify", "net_classify.json"),
        ("forest_regress", "forest_regress.json"),
        ("net_hetero", "net_hetero.json"),
    ):
        path = dirpath / name
        if path.exists():
            setattr(models, attr, load_model(path))
    return models


def step_train(config: RunConfig, run_dir: Path) -> list[str]:
    datasets = _load_labeled(config, run_dir)
    artifacts = []
    for ds in datasets:
        models = fit_participant(ds, config)
        written = _save_participant_models(_models_dir(run_dir) / ds.participant_id, models)
        artifacts.extend(f"models/{ds.participant_id}/{w}" for w in written)
    return artifacts


def _runs(config: RunConfig, run_dir: Path, datasets: list[Dataset]):
    runs = []
    for ds in datasets:
        models = _load_participant_models(_models_dir(run_dir) / ds.participant_id)
        runs.append(eval_participant(ds, models, config))
    return runs


def step_eval(config: RunConfig, run_dir: Path) -> list[str]:
    datasets = _load_labeled(config, run_dir)
    runs = _runs(config, run_dir, datasets)
    metric_rows = []
    for run in runs:
        for key in sorted(run.metrics):
            metric_rows.append([run.participant_id, key, run.metrics[key]])
    for key, value in aggregate_metrics(runs).items():
        metric_rows.append(["cohort", key, value])
    rio.write_table_csv(run_dir / "metrics.csv", ["pid", "key", "value"], metric_rows)

    by_pid = {ds.participant_id: ds for ds in datasets}
    rec_rows, aff_rows = [], []
    for run in runs:
        ds = by_pid[run.participant_id]
        for i, row in enumerate(run.test_rows):
            e = int(ds.event_idx[row])
            base = [run.participant_id, e if e >= 0 else "", ds.seg_start_s[row]]
            if run.receptivity_pred:
                rec_rows.append(base + [float(run.receptivity_pred[config.model][i])])
            if run.affect_mu is not None:
                aff_rows.append(base + [float(run.affect_mu[i]), float(run.affect_sigma[i])])
    rio.write_table_csv(
        run_dir / "receptivity_predictions.csv",
        ["pid", "event_id", "seg_start_s", "p_response"], rec_rows,
    )
    rio.write_table_csv(
        run_dir / "affect_predictions.csv",
        ["pid", "event_id", "seg_start_s", "mu", "sigma"], aff_rows,
    )
    events = rio.read_ema_csv(_require(run_dir / "ema.csv"))
    report = ema_descriptives(events)
    rio.write_kv_csv(
        run_dir / "ema_descriptives.csv",
        {
            "n_notifications": report.n_notifications,
            "n_responses": report.n_responses,
            "receptivity_rate": report.receptivity_rate,
            "mean_response_time_s": report.mean_response_time_s,
            "median_response_time_s": report.median_response_time_s,
            "max_response_time_s": report.max_response_time_s,
            "n_late_responses": report.n_late_responses,
        },
    )
    return ["metrics.csv", "receptivity_predictions.csv", "affect_predictions.csv",
            "ema_descriptives.csv"]


def step_cluster(config: RunConfig, run_dir: Path) -> list[str]:
    datasets = _load_labeled(config, run_dir)
    report = cluster_step(datasets, seed=config.seed)
    entries = {
        "k": report.k,
        "silhouette": report.silhouette,
        "anova_f": report.anova_f,
        "anova_p": report.anova_p,
        "chi2_stat": report.chi2_stat,
        "chi2_p": report.chi2_p,
        "low_receptivity_cluster": report.low_receptivity_cluster,
        "affect_gap_points": report.affect_gap_points,
    }
    for c in report.clusters:
        entries[f"cluster{c.cluster}_size"] = c.size
        entries[f"cluster{c.cluster}_receptivity_rate"] = c.receptivity_rate
        entries[f"cluster{c.cluster}_mean_affect"] = c.mean_affect
        entries[f"cluster{c.cluster}_mean_pa"] = c.mean_pa
        entries[f"cluster{c.cluster}_mean_na"] = c.mean_na
    rio.write_kv_csv(run_dir / "cluster_report.csv", entries)
    rio.write_table_csv(
        run_dir / "cluster_silhouette_by_k.csv", ["k", "silhouette"],
        [[k, s] for k, s in report.silhouette_by_k],
    )
    return ["cluster_report.csv", "cluster_silhouette_by_k.csv"]


def step_relate(config: RunConfig, run_dir: Path) -> list[str]:
    datasets = _load_labeled(config, run_dir)
    runs = _runs(config, run_dir, datasets)
    report, retained = relationship_step(runs, datasets, config)
    rio.write_kv_csv(
        run_dir / "relationship.csv",
        {
            "kappa": report.kappa,
            "kappa_degenerate": float(report.kappa_degenerate),
            "point_biserial_r": report.point_biserial_r,
            "mean_affect_pred_response": report.mean_affect_pred_response,
            "mean_affect_pred_non_response": report.mean_affect_pred_non_response,
            "gap_points": report.gap_points,
            "gap_sd": report.gap_sd,
            "pos_affect_rate_pred_response": report.pos_affect_rate_pred_response,
            "pos_affect_rate_pred_non_response": report.pos_affect_rate_pred_non_response,
            "sigma_retained_fraction": retained,
            "n_rows": report.n_rows,
        },
    )
    ecdf_rows = [
        [int(score), curve, float(report.ecdf[curve][i])]
        for curve in sorted(report.ecdf)
        for i, score in enumerate(SCORE_GRID)
    ]
    rio.write_table_csv(run_dir / "ecdf.csv", ["score", "curve", "cum_fraction"], ecdf_rows)
    dist_rows = [
        [int(score), curve, float(report.distribution[curve][i])]
        for curve in sorted(report.distribution)
        for i, score in enumerate(SCORE_GRID)
    ]
    rio.write_table_csv(
        run_dir / "affect_distribution.csv", ["score", "curve", "density"], dist_rows
    )
    return ["relationship.csv", "ecdf.csv", "affect_distribution.csv"]


def step_bias(config: RunConfig, run_dir: Path) -> list[str]:
    from .bias import ParticipantBiasInputs, trigger_bias_experiment
    from .models.forest import forest_train, forest_predict
    from .pipeline import _forest_params
    from .synth import ParticipantPlan
    from .timeseries import normalize_apply, normalize_fit

    datasets = _load_labeled(config, run_dir)
    meta = rio.read_meta_csv(_require(run_dir / "cohort_meta.csv"))
    intercept = float(meta["intercept"])
    spec = config.cohort_spec()
    eval_days = list(range(spec.days - config.bias_eval_days, spec.days))
    eval_start = spec.day_wear_start(eval_days[0])

    truth: dict[str, list[tuple[float, float]]] = {}
    with open(_require(run_dir / "ground_truth.csv")) as f:
        f.readline()
        for line in f:
            kind, pid, epoch, value = line.rstrip("\n").split(",")
            if kind == "affect":
                truth.setdefault(pid, []).append((float(epoch), float(value)))

    inputs = []
    for index, ds in enumerate(datasets):
        rows_train = np.flatnonzero((ds.y != -1) & (ds.seg_end_s <= eval_start))
        if rows_train.size == 0 or np.unique(ds.y[rows_train]).size < 2:
            continue
        stats = normalize_fit(ds.X[rows_train])
        model = forest_train(
            normalize_apply(stats, ds.X[rows_train]), ds.y[rows_train].astype(int),
            "classify", _forest_params(config), seed=config.seed,
        )
        pairs = sorted(truth.get(ds.participant_id, []))
        plan = ParticipantPlan(
            participant_id=ds.participant_id,
            index=index,
            minute_epochs=np.array([t for t, _ in pairs]),
            minute_affect=np.array([v for _, v in pairs]),
            notify_epochs=np.empty(0),
            notify_affect=np.empty(0),
        )
        day_segments = {}
        for day in eval_days:
            start = spec.day_wear_start(day)
            sel = (ds.seg_end_s > start) & (ds.seg_end_s <= start + spec.wear_seconds)
            p_hat = forest_predict(model, normalize_apply(stats, ds.X[sel]))
            day_segments[day] = (ds.seg_end_s[sel], p_hat)
        inputs.append(ParticipantBiasInputs(plan=plan, day_segments=day_segments))
    summary = trigger_bias_experiment(spec, intercept, inputs, eval_days, config.seed)
    rio.write_kv_csv(
        run_dir / "bias.csv",
        {
            "mean_random": summary.mean_random,
            "mean_triggered": summary.mean_triggered,
            "delta_points": summary.delta_points,
            "delta_sd": summary.delta_sd,
            "n_random_responses": summary.n_random_responses,
            "n_triggered_responses": summary.n_triggered_responses,
            "n_truncated_days": summary.n_truncated_days,
            "random_score_sd": summary.random_score_sd,
        },
    )
    return ["bias.csv"]


def step_all(config: RunConfig, run_dir: Path) -> list[str]:
    artifacts = []
    for step in STEP_ORDER:
        artifacts.extend(STEP_FUNCS[step](config, run_dir))
        _manifest(run_dir, step, config, artifacts)
    summary = {}
    for name, prefix in (
        ("metrics.csv", ""),
        ("relationship.csv", "relate_"),
        ("cluster_report.csv", "cluster_"),
        ("bias.csv", "bias_"),
    ):
        path = run_dir / name
        if name == "metrics.csv":
            with open(path) as f:
                f.readline()
                for line in f:
                    pid, key, value = line.rstrip("\n").split(",")
                    if pid == "cohort" and value:
                        summary[key] = float(value)
        else:
            for key, value in rio.read_kv_csv(path).items():
                summary[f"{prefix}{key}"] = value
    rio.write_kv_csv(run_dir / "summary.csv", summary)
    artifacts.append("summary.csv")
    return artifacts


STEP_FUNCS = {
    "synth": step_synth,
    "features": step_features,
    "label": step_label,
    "train": step_train,
    "eval": step_eval,
    "cluster": step_cluster,
    "relate": step_relate,
    "bias": step_bias,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="receptiva",
        description="Synthetic receptivity/affect pipeline runner",
    )
    parser.add_argument("step", choices=(*STEP_ORDER, "all"))
    parser.add_argument("-c", "--config", default=None, help="key=value config file")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        parser.add_argument(flag, dest=f.name, default=None, help=f"override {f.name}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        f.name: getattr(args, f.name)
        for f in fields(RunConfig)
        if getattr(args, f.name) is not None
    }
    try:
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run_dir = Path(config.out_dir) / f"run_{config_hash(config)}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(
        "".join(f"{k}={v}\n" for k, v in sorted(config_dict(config).items()))
    )
    try:
        if args.step == "all":
            artifacts = step_all(config, run_dir)
            _manifest(run_dir, "all", config, artifacts)
        else:
            artifacts = STEP_FUNCS[args.step](config, run_dir)
            _manifest(run_dir, args.step, config, artifacts)
    except MissingArtifact as exc:
        print(f"error: missing upstream artifact: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{args.step}: wrote {len(artifacts)} artifact(s) under {run_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
