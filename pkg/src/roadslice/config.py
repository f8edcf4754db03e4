"""Pipeline configuration: INI sections mapped onto typed dataclasses.

Every generator constant, training hyperparameter and scenario knob is
overridable from the config file; unset keys keep the documented defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path

from .generator import SignatureConfig


@dataclass
class TopologyConfig:
    n_stations: int = 24
    spacing_km: float = 2.0
    capacity_prbs: int = 100


@dataclass
class DatasetConfig:
    source: str = "generate"  # or "csv"
    traces_csv: str = ""
    events_csv: str = ""
    n_days: int = 56
    n_events: int = 40
    interval_minutes: float = 15.0
    lookback_minutes: float = 240.0
    train_fraction: float = 0.6
    val_fraction: float = 0.2
    test_fraction: float = 0.2


@dataclass
class EventSamplingConfig:
    min_duration: int = 4
    max_duration: int = 10
    min_gap: int = 20
    radius_km: float = 15.0
    # benign single-station anomalies injected as confounders (not labeled)
    benign_count: int = 400


@dataclass
class Stage1Config:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    patience: int = 10
    val_fraction: float = 0.15
    clip_norm: float = 5.0
    max_windows: int = 0  # 0 = no cap
    cells: str = "128,64"
    workers: int = 2


@dataclass
class Stage2Config:
    epochs: int = 150
    batch_size: int = 32
    lr: float = 1e-4
    pos_neg_ratio: float = 0.25
    train_stride: int = 2  # negative windows subsampled at this stride
    train_baselines: bool = True
    conv_filters: str = "32,16"
    dense: str = "512,256"
    dropout: float = 0.2


@dataclass
class ClassifierConfig:
    threshold: float = 0.5
    debounce: int = 2
    radius_km: float = 10.0
    moderate_upper: float = 2.0


@dataclass
class SlicesConfig:
    # four-slice reference scenario: two throughput-oriented, two low-latency;
    # throughputs sized so the reserved quota carries the nominal rate at the
    # default 100-PRB stations
    names: str = "embb_stream,embb_info,urllc_auto,urllc_tele"
    throughput_mbps: str = "15,15,10,10"
    latency_ms: str = "300,300,10,20"
    tolerance_intervals: str = "4,3,1,1"
    quota_fractions: str = "0.3,0.3,0.2,0.2"


@dataclass
class OrchestratorConfig:
    interval_ms: float = 100.0
    # one PRB carries 500 kbit/s, i.e. 50 kbit per default 100 ms interval
    prb_bits_per_second: float = 500_000.0
    horizon: int = 0  # 0 = minimal (theta + max tolerance + 1)
    sliding_deferral: bool = False
    node_limit: int = 100_000

    def bits_per_prb_per_interval(self) -> float:
        return self.prb_bits_per_second * self.interval_ms / 1000.0


@dataclass
class SchedulerConfig:
    opportunities: int = 1
    utilization: str = "0.8,0.97,0.9,0.9"
    ens_utilization: float = 0.9
    start_hour: float = 8.0
    severe_capacity_mult: float = 0.8


@dataclass
class PipelineConfig:
    seed: int = 7
    out_dir: str = "runs/latest"
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    signatures: SignatureConfig = field(default_factory=SignatureConfig)
    events: EventSamplingConfig = field(default_factory=EventSamplingConfig)
    stage1: Stage1Config = field(default_factory=Stage1Config)
    stage2: Stage2Config = field(default_factory=Stage2Config)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    slices: SlicesConfig = field(default_factory=SlicesConfig)
    orchestrator: OrchestratorConfig = field(default_factory=OrchestratorConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)

    def __post_init__(self):
        total = (self.dataset.train_fraction + self.dataset.val_fraction
                 + self.dataset.test_fraction)
        if abs(total - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """Digest of everything that shapes the results (not the out_dir)."""
        d = self.to_dict()
        d.pop("out_dir", None)
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_SECTION_MAP = {
    "run": None,  # maps onto PipelineConfig's own scalar fields
    "topology": "topology",
    "dataset": "dataset",
    "signatures": "signatures",
    "events": "events",
    "normalization": "dataset",  # training fraction lives on the dataset
    "stage1": "stage1",
    "stage2": "stage2",
    "classifier": "classifier",
    "slices": "slices",
    "orchestrator": "orchestrator",
    "scheduler": "scheduler",
}


def _convert(raw: str, typ) -> object:
    if typ is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if typ is int:
        return int(raw)
    if typ is float:
        return float(raw)
    if typ is str:
        return raw
    if typ == tuple[str, ...]:
        return tuple(x.strip() for x in raw.split(","))
    if typ == tuple[tuple[float, float, float], ...]:
        groups = [g.strip() for g in raw.split(";") if g.strip()]
        return tuple(tuple(float(x) for x in g.split(",")) for g in groups)
    if typ == tuple[float, float, float]:
        return tuple(float(x) for x in raw.split(","))
    if typ == tuple[float, ...]:
        return tuple(float(x) for x in raw.split(","))
    raise ValueError(f"unsupported config field type {typ}")


def _section_overrides(target, section: configparser.SectionProxy) -> dict:
    hints = typing.get_type_hints(type(target))
    valid = {f.name for f in fields(target)}
    overrides = {}
    for key, raw in section.items():
        if key not in valid:
            raise ValueError(f"unknown config key {key!r} in section [{section.name}]")
        overrides[key] = _convert(raw, hints[key])
    return overrides


def load_config(path: str | Path | None = None) -> PipelineConfig:
    config = PipelineConfig()
    if path is None:
        return config
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")
    for section_name in parser.sections():
        if section_name not in _SECTION_MAP:
            raise ValueError(f"unknown config section [{section_name}]")
        target_name = _SECTION_MAP[section_name]
        target = config if target_name is None else getattr(config, target_name)
        overrides = _section_overrides(target, parser[section_name])
        if dataclasses.fields(target) and getattr(type(target), "__dataclass_params__").frozen:
            setattr(config, target_name, dataclasses.replace(target, **overrides))
        else:
            for key, val in overrides.items():
                setattr(target, key, val)
    config.__post_init__()
    return config


def parse_float_list(raw: str) -> list[float]:
    return [float(x) for x in raw.split(",") if x.strip()]


def parse_int_list(raw: str) -> list[int]:
    return [int(x) for x in raw.split(",") if x.strip()]


def parse_str_list(raw: str) -> list[str]:
    return [x.strip() for x in raw.split(",") if x.strip()]
