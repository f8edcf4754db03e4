"""End-to-end run: generate/ingest -> normalize -> train both stages ->
evaluate detectors -> detect/classify -> allocate -> schedule -> export.

Every stage writes its artifacts under the run directory and registers them
in a manifest keyed by the config hash, so identical (config, seed) runs
produce identical manifests.
"""

from __future__ import annotations

import json
import time
import zipfile
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import anomaly, classify, generator, localizer, metrics, scheduler, traces
from .config import (
    PipelineConfig,
    parse_float_list,
    parse_int_list,
    parse_str_list,
)
from .errors import StageError
from .events import EventRecord
from .orchestrator import (
    AllocationPlan,
    IlpInstance,
    SliceSpec,
    build_instance,
    save_instance,
    save_plan,
    solve,
    validate_plan,
)
from .topology import NetworkTopology, build_topology


@dataclass
class SplitIndices:
    train_end: int
    val_end: int
    n_samples: int

    @property
    def test_start(self) -> int:
        return self.val_end


def make_splits(n_samples: int, config: PipelineConfig) -> SplitIndices:
    t1 = int(n_samples * config.dataset.train_fraction)
    t2 = int(n_samples * (config.dataset.train_fraction + config.dataset.val_fraction))
    return SplitIndices(train_end=t1, val_end=t2, n_samples=n_samples)


def slices_from_config(config: PipelineConfig) -> list[SliceSpec]:
    sc = config.slices
    names = parse_str_list(sc.names)
    thr = parse_float_list(sc.throughput_mbps)
    lat = parse_float_list(sc.latency_ms)
    tol = parse_int_list(sc.tolerance_intervals)
    frac = parse_float_list(sc.quota_fractions)
    if not (len(names) == len(thr) == len(lat) == len(tol) == len(frac)):
        raise ValueError("slice config lists must have equal lengths")
    cap = config.topology.capacity_prbs
    return [
        SliceSpec(
            id=i + 1, name=names[i], throughput_mbps=thr[i], latency_ms=lat[i],
            tolerance_intervals=tol[i], quota_prbs=int(frac[i] * cap),
        )
        for i in range(len(names))
    ]


def _stable_digest(path: Path) -> str:
    """Content digest that ignores zip timestamps in .npz containers."""
    h = hashlib.sha256()
    if path.suffix == ".npz":
        with zipfile.ZipFile(path) as zf:
            for name in sorted(zf.namelist()):
                h.update(name.encode())
                h.update(zf.read(name))
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


class RunContext:
    """Holds intermediate products while stages execute."""

    def __init__(self, config: PipelineConfig, out_dir: Path):
        self.config = config
        self.out = out_dir
        self.artifacts: dict[str, str] = {}
        self.report: dict = {}
        self.topology: NetworkTopology | None = None
        self.raw: traces.TraceSet | None = None
        self.events: list[EventRecord] = []
        self.norm: traces.TraceSet | None = None
        self.splits: SplitIndices | None = None
        self.lookback: int = 0
        self.ae_models: dict[str, anomaly.AutoencoderModel] = {}
        self.metric_order: list[str] = []
        self.train_ends: np.ndarray | None = None
        self.test_ends: np.ndarray | None = None
        self.train_tensors: np.ndarray | None = None
        self.test_tensors: np.ndarray | None = None
        self.train_raw: np.ndarray | None = None
        self.test_raw: np.ndarray | None = None
        self.train_labels: np.ndarray | None = None
        self.test_labels: np.ndarray | None = None
        self.loc_model: localizer.LocalizerModel | None = None
        self.direct_model: localizer.LocalizerModel | None = None
        self.test_probs: np.ndarray | None = None
        self.detected: list[classify.DetectedEvent] = []
        self.instance: IlpInstance | None = None
        self.plan: AllocationPlan | None = None

    def register(self, name: str, path: Path) -> None:
        self.artifacts[name] = _stable_digest(path)


def stage_dataset(ctx: RunContext) -> None:
    cfg = ctx.config
    ctx.topology = build_topology(
        cfg.topology.n_stations, cfg.topology.spacing_km, cfg.topology.capacity_prbs
    )
    if cfg.dataset.source == "csv":
        ctx.raw = traces.ingest_csv(cfg.dataset.traces_csv,
                                    interval_minutes=cfg.dataset.interval_minutes)
        ctx.events = traces.ingest_events_csv(cfg.dataset.events_csv)
    else:
        base = generator.generate_baseline(
            ctx.topology, cfg.dataset.n_days, cfg.seed, cfg.signatures,
            interval_minutes=cfg.dataset.interval_minutes,
        )
        specs = generator.sample_events(
            ctx.topology, base.n_samples, cfg.dataset.n_events, cfg.seed + 1,
            min_duration=cfg.events.min_duration,
            max_duration=cfg.events.max_duration,
            min_gap=cfg.events.min_gap,
            radius_km=cfg.events.radius_km,
        )
        if cfg.events.benign_count > 0:
            benign = generator.sample_benign_anomalies(
                ctx.topology, base.n_samples, cfg.events.benign_count,
                cfg.seed + 11,
            )
            base, _ = generator.inject_events(base, ctx.topology, benign,
                                              cfg.signatures)
        ctx.raw, ctx.events = generator.inject_events(base, ctx.topology, specs,
                                                      cfg.signatures)
    traces_path = ctx.out / "traces.csv"
    events_path = ctx.out / "events.csv"
    traces.export_csv(ctx.raw, traces_path)
    traces.export_events_csv(ctx.events, events_path)
    ctx.register("traces_csv", traces_path)
    ctx.register("events_csv", events_path)
    ctx.splits = make_splits(ctx.raw.n_samples, cfg)
    ctx.lookback = traces.lookback_length(cfg.dataset.lookback_minutes,
                                          cfg.dataset.interval_minutes)


def stage_normalize(ctx: RunContext) -> None:
    stats = traces.compute_norm_stats(ctx.raw, ctx.config.dataset.train_fraction)
    ctx.norm = traces.normalize(ctx.raw, stats)
    ctx.report["norm_maxima"] = {m: float(x) for m, x in
                                 zip(stats.metrics, stats.maxima)}


def stage_train_autoencoders(ctx: RunContext) -> None:
    cfg = ctx.config
    s1 = cfg.stage1
    ctx.metric_order = list(ctx.norm.metrics)
    ends = anomaly.eventless_window_ends(
        ctx.norm.n_samples, ctx.events, ctx.lookback,
        start=ctx.lookback - 1, stop=ctx.splits.train_end,
    )
    cells = tuple(parse_int_list(s1.cells))
    results: dict[str, anomaly.AutoencoderModel] = {}

    def train_one(metric: str) -> tuple[str, anomaly.AutoencoderModel]:
        xs = anomaly.windows_array(ctx.norm, metric, ends, ctx.lookback)
        cfg_m = anomaly.AeTrainConfig(
            epochs=s1.epochs, batch_size=s1.batch_size, lr=s1.lr,
            seed=cfg.seed + ctx.metric_order.index(metric),
            patience=s1.patience, val_fraction=s1.val_fraction,
            clip_norm=s1.clip_norm,
            max_windows=s1.max_windows or None, encoder_cells=cells,
        )
        return metric, anomaly.train_autoencoder(metric, xs, cfg_m)

    if s1.workers > 1:
        with ThreadPoolExecutor(max_workers=s1.workers) as pool:
            for metric, model in pool.map(train_one, ctx.metric_order):
                results[metric] = model
    else:
        for metric in ctx.metric_order:
            m, model = train_one(metric)
            results[m] = model
    ctx.ae_models = results
    model_dir = ctx.out / "autoencoders"
    anomaly.save_autoencoder_set(model_dir, results, ctx.metric_order)
    for metric in ctx.metric_order:
        ctx.register(f"ae_{metric}", model_dir / f"ae_{metric}.npz")
    ctx.report["stage1"] = {
        m: {"epochs": results[m].training["epochs_run"],
            "final_mse": results[m].training["final_train_mse"]}
        for m in ctx.metric_order
    }


def _window_sets(ctx: RunContext) -> None:
    cfg = ctx.config
    lb = ctx.lookback
    splits = ctx.splits
    all_train = np.arange(lb - 1, splits.train_end)
    labels_train = localizer.labels_for_windows(ctx.events, all_train,
                                                ctx.topology.n_stations)
    pos = all_train[labels_train.any(axis=1)]
    stride = max(1, cfg.stage2.train_stride)
    sampled = all_train[::stride]
    ctx.train_ends = np.unique(np.concatenate([sampled, pos]))
    ctx.train_labels = localizer.labels_for_windows(ctx.events, ctx.train_ends,
                                                    ctx.topology.n_stations)
    ctx.test_ends = np.arange(splits.test_start, splits.n_samples)
    ctx.test_labels = localizer.labels_for_windows(ctx.events, ctx.test_ends,
                                                   ctx.topology.n_stations)


def stage_error_tensors(ctx: RunContext) -> None:
    _window_sets(ctx)
    lb = ctx.lookback
    ctx.train_tensors = anomaly.error_tensors_for_windows(
        ctx.ae_models, ctx.norm, ctx.train_ends, ctx.metric_order, lb)
    ctx.test_tensors = anomaly.error_tensors_for_windows(
        ctx.ae_models, ctx.norm, ctx.test_ends, ctx.metric_order, lb)
    if ctx.config.stage2.train_baselines:
        ctx.train_raw = anomaly.raw_tensors_for_windows(
            ctx.norm, ctx.train_ends, ctx.metric_order, lb)
        ctx.test_raw = anomaly.raw_tensors_for_windows(
            ctx.norm, ctx.test_ends, ctx.metric_order, lb)


def _loc_config(ctx: RunContext) -> localizer.LocTrainConfig:
    s2 = ctx.config.stage2
    arch = localizer.LocArchitecture(
        conv_filters=tuple(parse_int_list(s2.conv_filters)),
        dense=tuple(parse_int_list(s2.dense)),
        dropout=s2.dropout,
    )
    return localizer.LocTrainConfig(
        epochs=s2.epochs, batch_size=s2.batch_size, lr=s2.lr,
        seed=ctx.config.seed, pos_neg_ratio=s2.pos_neg_ratio, arch=arch,
    )


def stage_train_localizer(ctx: RunContext) -> None:
    cfg = _loc_config(ctx)
    ctx.loc_model = localizer.train_localizer(
        ctx.train_tensors, ctx.train_labels, cfg)
    path = ctx.out / "localizer.npz"
    ctx.loc_model.save(path)
    ctx.register("localizer", path)
    if ctx.config.stage2.train_baselines:
        ctx.direct_model = localizer.baseline_cnn_direct(
            ctx.train_raw, ctx.train_labels, cfg)
        dpath = ctx.out / "localizer_direct.npz"
        ctx.direct_model.save(dpath)
        ctx.register("localizer_direct", dpath)
    ctx.report["stage2"] = {"final_loss": ctx.loc_model.training_meta["final_loss"]}


def stage_evaluate(ctx: RunContext) -> None:
    labels = ctx.test_labels.ravel()
    ctx.test_probs = localizer.localize_batch(ctx.loc_model, ctx.test_tensors)
    scores = {"two_stage": ctx.test_probs.ravel()}
    if ctx.direct_model is not None:
        scores["cnn_direct"] = localizer.localize_batch(
            ctx.direct_model, ctx.test_raw).ravel()
    scores["ae_threshold"] = localizer.ae_station_scores(ctx.test_tensors).ravel()

    results = {}
    for name, sc in scores.items():
        fpr, tpr, _ = metrics.roc_curve(sc, labels)
        recall, precision, _ = metrics.pr_curve(sc, labels)
        results[name] = {
            "auc": metrics.auc(fpr, tpr),
            "auprc": metrics.auprc(recall, precision),
        }
        roc_path = ctx.out / f"roc_{name}.csv"
        pr_path = ctx.out / f"pr_{name}.csv"
        metrics.export_curves_csv(roc_path, fpr, tpr, "fpr", "tpr")
        metrics.export_curves_csv(pr_path, recall, precision, "recall", "precision")
        ctx.register(f"roc_{name}", roc_path)
        ctx.register(f"pr_{name}", pr_path)
    ctx.report["detectors"] = results

    heatmap_path = ctx.out / "heatmap.csv"
    metrics.export_heatmap(ctx.test_probs, ctx.test_ends, ctx.events, heatmap_path)
    ctx.register("heatmap", heatmap_path)
    ctx.register("heatmap_truth", heatmap_path.with_name("heatmap_truth.csv"))


def stage_detect_classify(ctx: RunContext) -> None:
    cc = ctx.config.classifier
    ctx.detected = classify.detect_events(
        ctx.test_probs, ctx.test_ends, ctx.topology,
        threshold=cc.threshold, debounce=cc.debounce, radius_km=cc.radius_km,
        interval_minutes=ctx.config.dataset.interval_minutes,
    )
    path = ctx.out / "detected_events.json"
    classify.export_events_json(ctx.detected, path)
    ctx.register("detected_events", path)
    ctx.report["detected_events"] = len(ctx.detected)


def stage_orchestrate(ctx: RunContext) -> None:
    oc = ctx.config.orchestrator
    slices = slices_from_config(ctx.config)
    event = _orchestration_event(ctx)
    if event is None:
        ctx.report["orchestrator"] = {"skipped": "no detected events"}
        return
    ctx.instance = build_instance(
        ctx.topology, event.affected, slices, event,
        horizon=oc.horizon or None, interval_ms=oc.interval_ms,
        bits_per_prb=oc.bits_per_prb_per_interval(),
        sliding_deferral=oc.sliding_deferral,
    )
    ctx.plan = solve(ctx.instance, node_limit=oc.node_limit)
    report = validate_plan(ctx.plan, ctx.instance)
    inst_path = ctx.out / "instance.json"
    plan_path = ctx.out / "plan.json"
    save_instance(ctx.instance, inst_path)
    save_plan(ctx.plan, plan_path)
    ctx.register("instance", inst_path)
    ctx.register("plan", plan_path)
    ctx.report["orchestrator"] = {
        "objective": ctx.plan.objective,
        "status": ctx.plan.status,
        "feasible": report.ok,
        "stations": list(ctx.instance.station_ids),
        "theta": ctx.instance.theta,
    }


def _orchestration_event(ctx: RunContext):
    if not ctx.detected:
        return None
    rank = {"Severe": 3, "Moderate": 2, "Light": 1, "None": 0}
    return max(ctx.detected, key=lambda ev: (rank[ev.severity.value],
                                             len(ev.affected), -ev.first_window))


def stage_schedule(ctx: RunContext) -> None:
    if ctx.plan is None:
        ctx.report["scheduler"] = {"skipped": "no allocation plan"}
        return
    cfg = ctx.config
    sc = cfg.scheduler
    slices = slices_from_config(cfg)
    inst = ctx.instance
    nt, horizon = inst.n_stations, inst.horizon
    ens_demand = np.zeros((nt, horizon), dtype=int)
    q0 = int(inst.ens_quota.max())
    rng = np.random.default_rng(cfg.seed + 2)
    ens_demand[:, : inst.theta + 1] = rng.poisson(
        sc.ens_utilization * q0, size=(nt, inst.theta + 1))
    demand = scheduler.make_demand_trace(
        slices, nt, horizon, cfg.seed + 3, interval_ms=inst.interval_ms,
        start_hour=sc.start_hour,
        utilization=parse_float_list(sc.utilization),
        ens_demand=ens_demand,
        prb_bits_per_second=cfg.orchestrator.prb_bits_per_second,
    )
    caps = inst.capacities
    mult = None
    event = _orchestration_event(ctx)
    if event is not None and event.severity.value == "Severe":
        mult = np.ones((nt, horizon))
        mult[:, : inst.theta + 1] = sc.severe_capacity_mult
    common = dict(opportunities=sc.opportunities, capacities=caps,
                  capacity_mult=mult, interval_ms=inst.interval_ms)
    m_on = scheduler.simulate(ctx.plan, demand, slices, lending=True, **common)
    m_off = scheduler.simulate(ctx.plan, demand, slices, lending=False, **common)
    reduction = scheduler.sla_violation_reduction(m_off, m_on)

    for label, m in (("lending_on", m_on), ("lending_off", m_off)):
        path = ctx.out / f"schedule_{label}.csv"
        _export_schedule_csv(path, m)
        ctx.register(f"schedule_{label}", path)
    cdf_dir = ctx.out
    for i, sl in enumerate(slices):
        try:
            cdf = scheduler.latency_cdf(m_on, i + 1)
        except Exception:
            continue
        path = cdf_dir / f"latency_cdf_{sl.name}.csv"
        metrics.export_curves_csv(path, cdf[:, 0], cdf[:, 1], "latency_ms", "cdf")
        ctx.register(f"latency_cdf_{sl.name}", path)
    ctx.report["scheduler"] = {
        "sla_violated_lending_off": m_off.sla_violated_total,
        "sla_violated_lending_on": m_on.sla_violated_total,
        "violation_reduction_pct": reduction,
        "ens_underserved": m_on.ens_underserved,
    }


def _export_schedule_csv(path: Path, m: scheduler.ScheduleMetrics) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["station", "slice", "t", "served", "queued", "dropped"])
        nt, s1, t_len = m.served.shape
        for n in range(nt):
            for s in range(s1):
                for t in range(t_len):
                    wr.writerow([n, s, t, m.served[n, s, t],
                                 m.queued[n, s, t], m.dropped[n, s, t]])


STAGES = [
    ("dataset", stage_dataset),
    ("normalize", stage_normalize),
    ("train-ae", stage_train_autoencoders),
    ("error-tensors", stage_error_tensors),
    ("train-localizer", stage_train_localizer),
    ("evaluate", stage_evaluate),
    ("detect-classify", stage_detect_classify),
    ("orchestrate", stage_orchestrate),
    ("schedule", stage_schedule),
]


def run_stages(config: PipelineConfig, out_dir: str | Path | None = None,
               upto: str | None = None) -> tuple[dict, RunContext]:
    """Run stages in order up to (and including) ``upto``; returns
    (manifest, context)."""
    stage_names = [name for name, _ in STAGES]
    if upto is not None and upto not in stage_names:
        raise ValueError(f"unknown stage {upto!r}")
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(config, out)
    timings = {}
    for name, fn in STAGES:
        t0 = time.perf_counter()
        try:
            fn(ctx)
        except Exception as exc:
            raise StageError(name, exc) from exc
        timings[name] = round(time.perf_counter() - t0, 3)
        if name == upto:
            break
    manifest = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "artifacts": ctx.artifacts,
        "report": ctx.report,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    # timings are wall-clock noise, kept out of the reproducible manifest
    (out / "timings.json").write_text(json.dumps(timings, indent=2))
    return manifest, ctx


def run_pipeline(config: PipelineConfig, out_dir: str | Path | None = None) -> dict:
    """Run every stage; returns (and writes) the manifest."""
    manifest, _ = run_stages(config, out_dir)
    return manifest
