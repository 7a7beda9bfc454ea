"""End-to-end orchestration: features, datasets, models, analyses.

Everything here works on in-memory objects so the acceptance experiments
can stream one participant at a time; the CLI layers file I/O on top. Model
evaluation is personalized: each participant gets their own normalization,
split, and models, and cohort metrics average across participants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bias import BiasSummary, ParticipantBiasInputs, trigger_bias_experiment
from .cluster import (
    ClusterReport,
    ClusterSummary,
    kmeans,
    select_cluster_features,
    silhouette,
)
from .config import RunConfig
from .ema import LABEL_NONE, LABEL_RESPONSE, EmaEvent, grouped_stratified_split, pseudo_label
from .features import FeatureTable, PreparedDay, concat_tables, extract_day_features, prepare_day
from .models import (
    ForestModel,
    baseline_classify,
    baseline_regress,
    evaluate,
    forest_predict,
    forest_train,
    net_predict,
    net_train,
    pca_apply,
    pca_fit,
    sigma_filter,
)
from .models.forest import ForestParams
from .models.search import DEFAULT_GRID, SMALL_GRID, grid_search
from .relationship import RelationshipReport, relationship_report
from .stattests import chi2_independence, rm_anova
from .synth import CohortSpec, draw_events, generate_participant, plan_cohort, synth_day_signals
from .timeseries import Channel, SignalRecord, normalize_apply, normalize_fit

SCORE_LO, SCORE_HI = 13.0, 91.0
MODELS = ("baseline", "forest", "net")


@dataclass(eq=False)
class Dataset:
    """Complete feature rows for one participant with pseudo-labels."""

    participant_id: str
    X: np.ndarray
    names: tuple[str, ...]
    seg_start_s: np.ndarray
    seg_end_s: np.ndarray
    event_idx: np.ndarray
    y: np.ndarray
    affect: np.ndarray
    pa: np.ndarray
    na: np.ndarray
    events: list[EmaEvent]

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def labeled_rows(self) -> np.ndarray:
        return np.flatnonzero(self.y != LABEL_NONE)


def build_dataset(table: FeatureTable, events: list[EmaEvent], window_min: float) -> Dataset:
    """Pseudo-label a feature table and drop rows with missing blocks."""
    event_idx, labels = pseudo_label(events, table.seg_end_s, window_min)
    keep = table.complete
    idx = event_idx[keep]
    affect = np.full(idx.shape, np.nan)
    pa = np.full(idx.shape, np.nan)
    na = np.full(idx.shape, np.nan)
    for i, e in enumerate(idx):
        if e >= 0 and events[e].responded:
            affect[i] = events[e].composite
            pa[i] = events[e].pa_mean
            na[i] = events[e].na_mean
    return Dataset(
        participant_id=table.participant_id,
        X=table.matrix[keep],
        names=table.names,
        seg_start_s=table.seg_start_s[keep],
        seg_end_s=table.seg_end_s[keep],
        event_idx=idx,
        y=labels[keep],
        affect=affect,
        pa=pa,
        na=na,
        events=events,
    )


def label_window_keep_mask(
    seg_end_s: np.ndarray, events: list[EmaEvent], window_min: float
) -> np.ndarray:
    """Mask of segments that any event's label window would cover."""
    _, labels = pseudo_label(events, seg_end_s, window_min)
    return labels != LABEL_NONE


def participant_table(
    day_records: list[dict[Channel, SignalRecord]],
    config: RunConfig,
    day_beats: list[np.ndarray] | None = None,
    label_events: list[EmaEvent] | None = None,
    day_filter: "set[int] | None" = None,
    segment_stride: int = 1,
) -> FeatureTable:
    """Feature rows over a participant's wear days.

    ``label_events`` restricts extraction to segments a label window covers;
    ``day_filter`` restricts to specific day indices; ``segment_stride``
    keeps every n-th segment (thinned candidate grids).
    """
    from .ecg import BeatSeries
    from .timeseries import segment_span

    tables = []
    for day, records in enumerate(day_records):
        if day_filter is not None and day not in day_filter:
            continue
        beats = None
        if day_beats is not None:
            beats = BeatSeries.from_peak_times(day_beats[day])
        prepared = prepare_day(records, beats=beats)
        keep = None
        if label_events is not None or segment_stride > 1:
            segs = segment_span(
                prepared.participant_id, prepared.start_s,
                prepared.end_s - prepared.start_s, config.seg_len_s, config.overlap_s,
            )
            ends = np.array([s.seg_end_s for s in segs])
            keep = np.ones(ends.size, dtype=bool)
            if label_events is not None:
                keep &= label_window_keep_mask(ends, label_events, config.label_window_min)
            if segment_stride > 1:
                stride_mask = np.zeros(ends.size, dtype=bool)
                stride_mask[::segment_stride] = True
                keep &= stride_mask
        tables.append(
            extract_day_features(
                prepared, config.seg_len_s, config.overlap_s,
                config.historic_spans_s, keep=keep,
            )
        )
    return concat_tables(tables)


def _forest_params(config: RunConfig) -> ForestParams:
    depth = None if config.forest_depth <= 0 else config.forest_depth
    return ForestParams(
        n_estimators=config.forest_trees,
        max_depth=depth,
        min_samples_leaf=config.forest_leaf,
        min_samples_split=config.forest_split,
        max_features_rule=config.forest_features,
    )


def _searched_params(config: RunConfig, X, y, event_ids, task: str, seed: int) -> ForestParams:
    if config.grid == "none":
        return _forest_params(config)
    grid = SMALL_GRID if config.grid == "small" else DEFAULT_GRID
    best = grid_search(X, y, event_ids, task, grid=grid, seed=seed)
    return ForestParams(**best)


@dataclass(eq=False)
class ParticipantRun:
    """Per-participant model outcomes on the held-out rows."""

    participant_id: str
    receptivity_excluded: bool = False
    exclusion_reason: str = ""
    affect_excluded: bool = False
    metrics: dict[str, float] = field(default_factory=dict)
    test_rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    receptivity_pred: dict[str, np.ndarray] = field(default_factory=dict)
    affect_mu: np.ndarray | None = None
    affect_sigma: np.ndarray | None = None
    train_affect_values: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass(eq=False)
class ParticipantModels:
    """Everything fitted for one participant, reusable for prediction."""

    participant_id: str
    receptivity_excluded: bool = False
    exclusion_reason: str = ""
    affect_excluded: bool = False
    norm_stats: object = None
    pca: object = None
    pca_norm: object = None
    baseline_response_rate: float = float("nan")
    forest_classify: ForestModel | None = None
    net_classify: object = None
    baseline_affect_mean: float = float("nan")
    baseline_affect_std: float = float("nan")
    forest_regress: ForestModel | None = None
    net_hetero: object = None
    affect_scale: tuple[float, float] = (0.0, 1.0)
    train_affect_values: np.ndarray = field(default_factory=lambda: np.empty(0))


def participant_split(ds: Dataset, config: RunConfig):
    """The participant's deterministic event-grouped split, falling back to
    a response-only split when receptivity is excluded."""
    split = grouped_stratified_split(ds.event_idx, ds.y, config.test_frac, config.seed)
    receptivity_excluded = split.excluded
    reason = split.reason
    if split.excluded:
        affect_labels = np.where(np.isfinite(ds.affect), LABEL_RESPONSE, LABEL_NONE).astype(np.int8)
        split = grouped_stratified_split(ds.event_idx, affect_labels, config.test_frac, config.seed)
    return split, receptivity_excluded, reason


def fit_participant(ds: Dataset, config: RunConfig) -> ParticipantModels:
    """Normalize, reduce and fit baseline/forest/net for both tasks."""
    seed = config.seed
    models = ParticipantModels(participant_id=ds.participant_id)
    split, models.receptivity_excluded, models.exclusion_reason = participant_split(ds, config)
    if split.excluded:
        models.affect_excluded = True
        return models
    train = split.train_rows
    models.norm_stats = normalize_fit(ds.X[train])
    x_train = normalize_apply(models.norm_stats, ds.X[train])
    y_train = ds.y[train].astype(int)
    models.pca = pca_fit(x_train, config.pca_variance)
    # Net inputs are the reduced components re-standardized on the train set.
    z_raw = pca_apply(models.pca, x_train)
    models.pca_norm = normalize_fit(z_raw)
    z_train = normalize_apply(models.pca_norm, z_raw)

    if not models.receptivity_excluded:
        models.baseline_response_rate = float(np.mean(y_train == 1))
        params = _searched_params(config, x_train, y_train, ds.event_idx[train], "classify", seed)
        models.forest_classify = forest_train(x_train, y_train, "classify", params, seed=seed)
        from .models.forest import inverse_frequency_weights

        models.net_classify, _ = net_train(
            z_train, y_train.astype(float), head="binary",
            epochs=config.net_epochs, batch_size=config.net_batch,
            step=config.net_step, seed=seed,
            class_weights=inverse_frequency_weights(y_train),
        )

    aff_mask = np.isfinite(ds.affect[train])
    a_train = ds.affect[train][aff_mask]
    models.train_affect_values = a_train
    if a_train.size < 2 or float(a_train.std()) == 0.0:
        models.affect_excluded = True
        return models
    models.baseline_affect_mean = float(a_train.mean())
    models.baseline_affect_std = float(a_train.std())
    params = _searched_params(
        config, x_train[aff_mask], a_train, ds.event_idx[train][aff_mask], "regress", seed
    )
    models.forest_regress = forest_train(x_train[aff_mask], a_train, "regress", params, seed=seed)
    # The uncertainty net trains on standardized scores for stable steps;
    # predictions map back to score units.
    a_mean, a_sd = models.baseline_affect_mean, models.baseline_affect_std
    models.affect_scale = (a_mean, a_sd)
    models.net_hetero, _ = net_train(
        z_train[aff_mask], (a_train - a_mean) / a_sd, head="hetero",
        epochs=config.net_epochs, batch_size=config.net_batch,
        step=config.net_step, seed=seed,
    )
    return models


def eval_participant(ds: Dataset, models: ParticipantModels, config: RunConfig) -> ParticipantRun:
    """Predict on the held-out rows and compute every model's metrics."""
    run = ParticipantRun(
        participant_id=ds.participant_id,
        receptivity_excluded=models.receptivity_excluded,
        exclusion_reason=models.exclusion_reason,
        affect_excluded=models.affect_excluded,
        train_affect_values=models.train_affect_values,
    )
    split, _, _ = participant_split(ds, config)
    if split.excluded:
        return run
    test = split.test_rows
    run.test_rows = test
    x_test = normalize_apply(models.norm_stats, ds.X[test])
    z_test = normalize_apply(models.pca_norm, pca_apply(models.pca, x_test))
    y_test = ds.y[test].astype(int)
    seed = config.seed

    if not models.receptivity_excluded:
        from .models.baseline import baseline_classify_rate

        base = baseline_classify_rate(models.baseline_response_rate, test.size, seed).astype(float)
        preds = {"baseline": base}
        preds["forest"] = forest_predict(models.forest_classify, x_test)
        preds["net"] = net_predict(models.net_classify, z_test)
        for model in MODELS:
            for k, v in evaluate(preds[model], y_test, "classify").items():
                run.metrics[f"receptivity_{model}_{k}"] = v
        run.receptivity_pred = preds

    if models.affect_excluded:
        return run
    aff_test_mask = np.isfinite(ds.affect[test])
    a_test = ds.affect[test][aff_test_mask]
    a_mean, a_sd = models.affect_scale
    mu_raw, sigma_raw = net_predict(models.net_hetero, z_test)
    run.affect_mu = np.clip(mu_raw * a_sd + a_mean, SCORE_LO, SCORE_HI)
    run.affect_sigma = sigma_raw * a_sd
    if a_test.size:
        mu_b = baseline_regress(models.train_affect_values, a_test.size, seed)
        run.metrics.update(
            {f"affect_baseline_{k}": v for k, v in evaluate(mu_b, a_test, "regress").items()}
        )
        mu_f = np.clip(
            forest_predict(models.forest_regress, x_test[aff_test_mask]), SCORE_LO, SCORE_HI
        )
        run.metrics.update(
            {f"affect_forest_{k}": v for k, v in evaluate(mu_f, a_test, "regress").items()}
        )
        run.metrics.update(
            {
                f"affect_net_{k}": v
                for k, v in evaluate(run.affect_mu[aff_test_mask], a_test, "regress").items()
            }
        )
    return run


def train_participant(ds: Dataset, config: RunConfig) -> ParticipantRun:
    """Fit and evaluate in one pass (the in-memory experiment path)."""
    return eval_participant(ds, fit_participant(ds, config), config)


@dataclass(eq=False)
class ExperimentResult:
    runs: list[ParticipantRun]
    datasets: list[Dataset]
    cohort_metrics: dict[str, float]


def aggregate_metrics(runs: list[ParticipantRun]) -> dict[str, float]:
    """Mean of each per-participant metric across participants that have it."""
    pools: dict[str, list[float]] = {}
    for run in runs:
        for key, value in run.metrics.items():
            if np.isfinite(value):
                pools.setdefault(key, []).append(value)
    return {key: float(np.mean(vals)) for key, vals in sorted(pools.items())}


def run_models_experiment(
    sources,
    config: RunConfig,
    label_only: bool = True,
) -> ExperimentResult:
    """Feature extraction + personalized models for a cohort.

    ``sources`` yields objects with participant_id, day_records, events and
    optional day_beat_times (used instead of R-peak detection when present).
    """
    runs = []
    datasets = []
    for source in sources:
        beats = getattr(source, "day_beat_times", None)
        table = participant_table(
            source.day_records, config, day_beats=beats,
            label_events=source.events if label_only else None,
        )
        ds = build_dataset(table, source.events, config.label_window_min)
        datasets.append(ds)
        runs.append(train_participant(ds, config))
    return ExperimentResult(runs=runs, datasets=datasets, cohort_metrics=aggregate_metrics(runs))


def synth_sources(spec: CohortSpec, keep_signals: bool = False):
    """Stream generated participants; signal arrays are dropped after use
    unless kept."""
    plan = plan_cohort(spec)
    for p in plan.plans:
        data = generate_participant(spec, p, plan.intercept)
        yield data
        if not keep_signals:
            data.day_records = []


def cluster_step(
    datasets: list[Dataset],
    seed: int,
    percentile: float = 90.0,
    with_k_sweep: bool = True,
    max_silhouette_rows: int = 2000,
) -> ClusterReport:
    """Pooled two-cluster analysis on the receptivity-correlated features."""
    mats, ys, affs, pas, nas, pids = [], [], [], [], [], []
    for ds in datasets:
        rows = ds.labeled_rows()
        if rows.size == 0:
            continue
        stats = normalize_fit(ds.X[rows])
        mats.append(normalize_apply(stats, ds.X[rows]))
        ys.append(ds.y[rows])
        affs.append(ds.affect[rows])
        pas.append(ds.pa[rows])
        nas.append(ds.na[rows])
        pids.extend([ds.participant_id] * rows.size)
    if not mats:
        raise ValueError("no labeled rows to cluster")
    X = np.vstack(mats)
    y = np.concatenate(ys).astype(int)
    affect = np.concatenate(affs)
    pa = np.concatenate(pas)
    na = np.concatenate(nas)
    pids_arr = np.asarray(pids)
    if np.unique(y).size < 2:
        raise ValueError("clustering needs both receptivity outcomes")

    cols = select_cluster_features(X, y, percentile)
    Xc = X[:, cols]
    labels, _, _ = kmeans(Xc, k=2, max_iter=300, seed=seed, restarts=10)

    stride = max(1, int(np.ceil(Xc.shape[0] / max_silhouette_rows)))
    sil = silhouette(Xc[::stride], labels[::stride])
    sweep = []
    if with_k_sweep:
        for k in range(2, 7):
            lab_k, _, _ = kmeans(Xc, k=k, max_iter=300, seed=seed, restarts=4)
            if np.unique(lab_k[::stride]).size < 2:
                continue
            sweep.append((k, silhouette(Xc[::stride], lab_k[::stride])))

    summaries = []
    for c in (0, 1):
        members = labels == c
        with_aff = members & np.isfinite(affect)
        summaries.append(
            ClusterSummary(
                cluster=c,
                size=int(members.sum()),
                receptivity_rate=float(np.mean(y[members] == 1)),
                mean_affect=float(affect[with_aff].mean()) if with_aff.any() else float("nan"),
                mean_pa=float(pa[with_aff].mean()) if with_aff.any() else float("nan"),
                mean_na=float(na[with_aff].mean()) if with_aff.any() else float("nan"),
            )
        )
    by_participant: dict[str, dict[int, np.ndarray]] = {}
    for pid in np.unique(pids_arr):
        per = {}
        for c in (0, 1):
            vals = affect[(pids_arr == pid) & (labels == c)]
            vals = vals[np.isfinite(vals)]
            if vals.size:
                per[c] = vals
        by_participant[str(pid)] = per
    try:
        anova = rm_anova(by_participant)
        anova_f, anova_p = anova.f_stat, anova.p_value
    except ValueError:
        anova_f, anova_p = float("nan"), float("nan")
    table = np.array(
        [
            [np.count_nonzero((labels == c) & (y == 1)), np.count_nonzero((labels == c) & (y == 0))]
            for c in (0, 1)
        ],
        dtype=float,
    )
    try:
        chi2_stat, chi2_p = chi2_independence(table)
    except ValueError:
        chi2_stat, chi2_p = float("nan"), float("nan")
    low = int(np.argmin([s.receptivity_rate for s in summaries]))
    gap = summaries[low].mean_affect - summaries[1 - low].mean_affect
    return ClusterReport(
        k=2,
        assignments=labels,
        clusters=summaries,
        silhouette=sil,
        anova_f=anova_f,
        anova_p=anova_p,
        chi2_stat=chi2_stat,
        chi2_p=chi2_p,
        low_receptivity_cluster=low,
        affect_gap_points=gap,
        silhouette_by_k=sweep,
        feature_indices=cols,
    )


def relationship_step(
    runs: list[ParticipantRun],
    datasets: list[Dataset],
    config: RunConfig,
) -> tuple[RelationshipReport, float]:
    """Pool per-participant test predictions and build the relationship
    report after the uncertainty filter."""
    by_pid = {ds.participant_id: ds for ds in datasets}
    pred_resp, mu, sigma, true_y, true_aff, train_aff = [], [], [], [], [], []
    for run in runs:
        if run.receptivity_excluded or run.affect_mu is None or not run.receptivity_pred:
            continue
        ds = by_pid[run.participant_id]
        rows = run.test_rows
        pred_resp.append((run.receptivity_pred[config.model] >= 0.5).astype(int))
        mu.append(run.affect_mu)
        sigma.append(run.affect_sigma)
        true_y.append(ds.y[rows].astype(int))
        true_aff.append(ds.affect[rows])
        train_aff.append(run.train_affect_values)
    if not mu:
        raise ValueError("no participant produced affect predictions")
    pred_resp = np.concatenate(pred_resp)
    mu = np.concatenate(mu)
    sigma = np.concatenate(sigma)
    true_y = np.concatenate(true_y)
    true_aff = np.concatenate(true_aff)
    pooled_train = np.concatenate(train_aff)
    mask, retained = sigma_filter(sigma, config.sigma_cutoff)
    if not mask.any():
        raise ValueError("uncertainty filter removed every prediction")
    report = relationship_report(
        pred_resp[mask], mu[mask], true_y[mask], true_aff[mask],
        train_affect_sd=float(pooled_train.std()),
    )
    return report, retained


def run_bias_trial(
    config: RunConfig,
    seed: int,
    use_truth_beats: bool = True,
) -> BiasSummary:
    """Generate a fresh cohort, train the receptivity trigger on the early
    days, and compare prompt policies on the held-out days.

    The trigger is a single cohort-level model over per-participant
    normalized features: short training periods carry too few events for
    reliable personalized rankings, and a deployed trigger would pool early
    participants the same way.
    """
    from dataclasses import replace as dc_replace

    spec = dc_replace(config.cohort_spec(), seed=seed)
    eval_days = list(range(spec.days - config.bias_eval_days, spec.days))
    train_days = set(range(spec.days - config.bias_eval_days))
    eval_start = spec.day_wear_start(eval_days[0])

    plan = plan_cohort(spec)
    train_x, train_y = [], []
    eval_tables: list[tuple] = []
    for p in plan.plans:
        events, _ = draw_events(spec, p, plan.intercept)
        train_events = [e for e in events if e.notify_epoch_s < eval_start]
        day_records = []
        day_beats = []
        for day in range(spec.days):
            records, beats, _ = synth_day_signals(
                spec, p, day, with_ecg_waveform=not use_truth_beats
            )
            day_records.append(records)
            day_beats.append(beats)
        table_train = participant_table(
            day_records, config,
            day_beats=day_beats if use_truth_beats else None,
            label_events=train_events, day_filter=train_days,
        )
        ds = build_dataset(table_train, train_events, config.label_window_min)
        rows = ds.labeled_rows()
        if rows.size == 0:
            continue
        stats = normalize_fit(ds.X[rows])
        train_x.append(normalize_apply(stats, ds.X[rows]))
        train_y.append(ds.y[rows].astype(int))
        per_day = {}
        for day in eval_days:
            table_eval = participant_table(
                day_records, config,
                day_beats=day_beats if use_truth_beats else None,
                day_filter={day}, segment_stride=config.bias_eval_stride,
            )
            ok = table_eval.complete
            per_day[day] = (
                table_eval.seg_end_s[ok],
                normalize_apply(stats, table_eval.matrix[ok]),
            )
        eval_tables.append((p, per_day))

    x_train = np.vstack(train_x)
    y_train = np.concatenate(train_y)
    if np.unique(y_train).size < 2:
        raise ValueError("training days contain a single receptivity outcome")
    # Rank on the receptivity-correlated feature subset: the trigger needs a
    # sharp ordering, and the full feature set drowns it in noise columns.
    cols = select_cluster_features(x_train, y_train, percentile=90.0)
    x_train = x_train[:, cols]
    if config.model == "net":
        from .models.forest import inverse_frequency_weights

        pca = pca_fit(x_train, config.pca_variance)
        pca_norm = normalize_fit(pca_apply(pca, x_train))
        net, _ = net_train(
            normalize_apply(pca_norm, pca_apply(pca, x_train)), y_train.astype(float),
            head="binary", epochs=config.net_epochs, batch_size=config.net_batch,
            step=config.net_step, seed=seed,
            class_weights=inverse_frequency_weights(y_train),
        )
        predict = lambda x: net_predict(net, normalize_apply(pca_norm, pca_apply(pca, x)))
    elif config.model == "baseline":
        rate = float(np.mean(y_train == 1))
        predict = lambda x, r=rate: np.full(x.shape[0], r)
    else:
        model = forest_train(x_train, y_train, "classify", _forest_params(config), seed=seed)
        predict = lambda x: forest_predict(model, x)

    inputs = []
    for p, per_day in eval_tables:
        day_segments = {
            day: (ends, predict(x[:, cols])) for day, (ends, x) in per_day.items()
        }
        inputs.append(ParticipantBiasInputs(plan=p, day_segments=day_segments))
    return trigger_bias_experiment(spec, plan.intercept, inputs, eval_days, seed)
