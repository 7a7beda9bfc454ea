"""Run configuration: plain key=value files with CLI-flag overrides.

Every field maps 1:1 to a CLI flag (``label_window_min`` ->
``--label-window-min``); the environment variable RECEPTIVA_SEED overrides
the seed last. A run is keyed by the hash of its canonical configuration,
so reruns land in the same directory and must reproduce it byte for byte.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import MISSING, dataclass, fields
from pathlib import Path

from .synth import AffectProcess, CohortSpec

SEED_ENV_VAR = "RECEPTIVA_SEED"
VALID_LABEL_WINDOWS = (5.0, 30.0, 60.0, 120.0)
VALID_MODELS = ("baseline", "forest", "net")
VALID_GRIDS = ("none", "small", "paper")


@dataclass(frozen=True)
class RunConfig:
    # pipeline
    data_dir: str = ""
    out_dir: str = "out"
    seg_len_s: float = 60.0
    overlap_s: float = 30.0
    historic_spans_min: tuple[float, ...] = (5.0, 30.0, 60.0)
    label_window_min: float = 30.0
    pca_variance: float = 0.99
    sigma_cutoff: float = 6.0
    model: str = "forest"
    grid: str = "none"
    seed: int = 7
    test_frac: float = 0.3
    workers: int = 0
    # net training
    net_epochs: int = 200
    net_batch: int = 32
    net_step: float = 1e-3
    # forest defaults used when grid == "none"
    forest_trees: int = 60
    forest_depth: int = 3
    forest_leaf: int = 2
    forest_split: int = 2
    forest_features: str = "sqrt"
    # synthetic cohort
    participants: int = 10
    days: int = 5
    ema_per_day: int = 10
    gap_min_min: float = 15.0
    gap_max_min: float = 90.0
    affect_mean: float = 26.4
    affect_sd: float = 11.1
    reversion_min: float = 150.0
    diurnal_amplitude: float = 0.0
    coupling_slope: float = -0.25
    hr_affect_gain: float = 0.5
    response_rate: float = 0.79
    wear_start_h: float = 8.0
    wear_end_h: float = 20.0
    ecg_hz: float = 128.0
    eda_hz: float = 4.0
    st_hz: float = 1.0
    acc_hz: float = 32.0
    bias_eval_days: int = 1
    bias_eval_stride: int = 1

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"config field {name!r} invalid: {why}")

        if not 0 <= self.overlap_s < self.seg_len_s:
            bad("overlap_s", "must satisfy 0 <= overlap_s < seg_len_s")
        for name in (
            "seg_len_s", "pca_variance", "sigma_cutoff", "test_frac",
            "net_epochs", "net_batch", "net_step", "forest_trees",
            "forest_leaf", "forest_split", "participants", "days",
            "ema_per_day", "gap_min_min", "gap_max_min", "affect_sd",
            "hr_affect_gain", "response_rate", "ecg_hz", "eda_hz", "st_hz",
            "acc_hz", "bias_eval_days", "bias_eval_stride", "reversion_min",
        ):
            if getattr(self, name) <= 0:
                bad(name, "must be positive")
        if any(s <= 0 for s in self.historic_spans_min):
            bad("historic_spans_min", "spans must be positive")
        if self.label_window_min not in VALID_LABEL_WINDOWS:
            bad("label_window_min", f"must be one of {VALID_LABEL_WINDOWS}")
        if self.model not in VALID_MODELS:
            bad("model", f"must be one of {VALID_MODELS}")
        if self.grid not in VALID_GRIDS:
            bad("grid", f"must be one of {VALID_GRIDS}")
        if not 0 < self.test_frac < 1:
            bad("test_frac", "must lie in (0, 1)")
        if not 0 < self.pca_variance <= 1:
            bad("pca_variance", "must lie in (0, 1]")
        if self.bias_eval_days >= self.days:
            bad("bias_eval_days", "must leave at least one training day")
        if self.wear_end_h <= self.wear_start_h:
            bad("wear_end_h", "wear window must be non-empty")

    @property
    def historic_spans_s(self) -> tuple[float, ...]:
        return tuple(60.0 * m for m in self.historic_spans_min)

    def cohort_spec(self) -> CohortSpec:
        return CohortSpec(
            n_participants=self.participants,
            days=self.days,
            ema_per_day=self.ema_per_day,
            gap_bounds_min=(self.gap_min_min, self.gap_max_min),
            affect=AffectProcess(
                mean=self.affect_mean,
                sd=self.affect_sd,
                reversion_min=self.reversion_min,
                diurnal_amplitude=self.diurnal_amplitude,
            ),
            coupling_slope=self.coupling_slope,
            hr_affect_gain=self.hr_affect_gain,
            response_rate=self.response_rate,
            wear_start_h=self.wear_start_h,
            wear_end_h=self.wear_end_h,
            ecg_hz=self.ecg_hz,
            eda_hz=self.eda_hz,
            st_hz=self.st_hz,
            acc_hz=self.acc_hz,
            seed=self.seed,
        )


class ConfigError(ValueError):
    pass


def _parse_value(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            if not raw:
                return ()
            return tuple(float(part) for part in raw.split(","))
        return raw
    except ValueError as exc:
        raise ConfigError(f"config field {name!r} invalid: {exc}") from exc


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then file values, then explicit overrides, then the seed
    environment variable."""
    defaults = {}
    for f in fields(RunConfig):
        defaults[f.name] = f.default if f.default is not MISSING else f.default_factory()
    values = dict(defaults)
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, raw = stripped.split("=", 1)
            key = key.strip()
            if key not in defaults:
                raise ConfigError(f"config field {key!r} unknown")
            values[key] = _parse_value(key, raw, defaults[key])
    for key, raw in (overrides or {}).items():
        if key not in defaults:
            raise ConfigError(f"config field {key!r} unknown")
        values[key] = (
            _parse_value(key, raw, defaults[key]) if isinstance(raw, str) else raw
        )
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        values["seed"] = int(env_seed)
    config = RunConfig(**values)
    config.validate()
    return config



def config_dict(config: RunConfig) -> dict[str, str]:
    out = {}
    for f in fields(config):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            out[f.name] = ",".join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            out[f.name] = repr(value)
        else:
            out[f.name] = str(value)
    return out


def config_hash(config: RunConfig) -> str:
    canonical = "\n".join(f"{k}={v}" for k, v in sorted(config_dict(config).items()))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]
