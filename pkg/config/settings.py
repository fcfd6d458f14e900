"""Pipeline configuration.

Values are resolved in increasing priority: dataclass defaults, a flat TOML
file (``--config`` or ``AFP_CONFIG``), ``AFP_*`` environment variables (a
``.env`` file in the working directory is loaded first), then CLI flags.
"""

import logging
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from dotenv import load_dotenv

from nnet.training import TrainConfig
from synth.generator import SynthSpec
from utils.errors import ConfigError

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
ENV_PREFIX = "AFP_"
ENV_KEYS = ("seed", "log_level")


@dataclass(frozen=True)
class PipelineConfig:
    # sampling
    window: int = 32
    stride: int = 8
    tow_count: int = 8
    tow_width: int = 21
    # model and training
    latent_dim: int = 16
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    holdout_fraction: float = 0.1
    latent_sweep: tuple = (2, 16, 128)
    # localization
    scales: tuple = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0)
    response_floor: float = 0.3
    # synthetic corpus
    width: int = 256
    height: int = 256
    n_train: int = 42
    n_defect: int = 2
    n_clean_test: int = 2
    defects_per_scan: int = 3
    seed: int = 0
    log_level: str = "INFO"

    def __post_init__(self):
        problems = []
        if self.window < 8 or self.window % 8:
            problems.append(f"window must be a positive multiple of 8, got {self.window}")
        if self.window > min(self.width, self.height):
            problems.append(f"window {self.window} exceeds image {self.width}x{self.height}")
        if self.stride < 1:
            problems.append(f"stride must be >= 1, got {self.stride}")
        if self.tow_count < 1 or self.tow_width < 1:
            problems.append("tow_count and tow_width must be positive")
        if self.latent_dim < 1 or any(d < 1 for d in self.latent_sweep):
            problems.append("latent dimensions must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            problems.append("epochs and batch_size must be positive")
        if not 0.0 < self.holdout_fraction < 1.0:
            problems.append(f"holdout_fraction must be in (0, 1), got {self.holdout_fraction}")
        if not self.scales or any(s < 0.5 for s in self.scales) or list(self.scales) != sorted(set(self.scales)):
            problems.append(f"scales must be strictly ascending and >= 0.5, got {list(self.scales)}")
        if self.response_floor < 0:
            problems.append(f"response_floor must be >= 0, got {self.response_floor}")
        if self.log_level not in LOG_LEVELS:
            problems.append(f"log_level must be one of {LOG_LEVELS}, got {self.log_level!r}")
        if problems:
            raise ConfigError("; ".join(problems), stage="config")

    def train_config(self, seed=None):
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            seed=self.seed if seed is None else seed,
        )

    def synth_spec(self):
        return SynthSpec(
            width=self.width,
            height=self.height,
            tow_count=self.tow_count,
            tow_width=self.tow_width,
            seed=self.seed,
        )

    def to_dict(self):
        data = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in data.items()}


FIELD_TYPES = {f.name: type(f.default) for f in fields(PipelineConfig)}


def _coerce(key, value):
    """Check a raw TOML/env/CLI value against the field's default type."""
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}", stage="config")
    kind = FIELD_TYPES[key]
    try:
        if kind is tuple:
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            item = type(getattr(PipelineConfig, key)[0])
            return tuple(item(v) for v in value)
        if isinstance(value, bool):
            raise TypeError("booleans are not numbers")
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise TypeError(f"{value} is not an integer")
            return int(value)
        if kind is float:
            return float(value)
        return str(value).upper() if key == "log_level" else str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config key {key!r}: {e}", stage="config") from None


def read_config_file(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist", stage="config")
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}", stage="config") from None
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: config is flat, found tables {nested}", stage="config")
    logging.info("Read config file %s.", path)
    return {k: _coerce(k, v) for k, v in data.items()}


def read_env(environ=None):
    environ = os.environ if environ is None else environ
    values = {}
    for key in ENV_KEYS:
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw not in (None, ""):
            values[key] = _coerce(key, raw)
    return values


def load_config(path=None, overrides=None, environ=None):
    """Resolve the effective configuration; None-valued overrides are ignored."""
    if environ is None:
        load_dotenv()
        environ = os.environ
    path = path or environ.get(ENV_PREFIX + "CONFIG")

    values = {}
    if path:
        values.update(read_config_file(path))
    values.update(read_env(environ))
    values.update({k: _coerce(k, v) for k, v in (overrides or {}).items() if v is not None})
    return replace(PipelineConfig(), **values) if values else PipelineConfig()
