"""Configuration dataclasses and strict config-file resolution.

Resolution order is defaults < config file < command-line flags. Unknown
keys in a config file are fatal (ConfigError), not warnings, so a typo'd
ablation knob can never silently run with defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class DataConfig:
    """Synthetic benchmark generation parameters."""

    n_domain1: int = 1000
    n_domain2: int = 1000
    n_paired: int = 100
    image_size: int = 64
    num_classes: int = 4
    seed: int = 0

    def validate(self) -> None:
        if self.image_size % 8 != 0 or self.image_size <= 0:
            raise ConfigError(f"image_size must be a positive multiple of 8, got {self.image_size}")
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.n_domain1 < 1 or self.n_domain2 < 1:
            raise ConfigError("domain counts must be >= 1")
        if self.n_paired > min(self.n_domain1, self.n_domain2):
            raise ConfigError(
                f"n_paired={self.n_paired} exceeds min(n_domain1, n_domain2)="
                f"{min(self.n_domain1, self.n_domain2)}"
            )
        if self.n_paired < 0:
            raise ConfigError("n_paired must be >= 0")


@dataclass
class TrainConfig:
    """Optimizer, schedule, loss-weight, and backbone-size settings.

    Epoch defaults are desk-scale versions of the reference schedule
    (200 VAE-GAN / 400 translator epochs at batch 80 on full datasets);
    steps_* overrides, when set, bound the number of generator steps
    directly regardless of dataset size.
    """

    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 16
    epochs_vaegan: int = 24
    epochs_translator: int = 240
    steps_vaegan: int | None = None
    steps_translator: int | None = None
    lambda_f: float = 60.0
    lambda_fm: float = 10.0
    seed: int = 0
    mode: str = "full"
    latent_channels: int = 64
    base_channels: int = 32
    translator_kind: str = "resblocks"
    translator_blocks: int = 9
    fc_layers: int = 5
    fc_width: int = 256
    disc_scales: int = 2
    head_gain: float = 3.0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lambda_f < 0 or self.lambda_fm < 0:
            raise ConfigError("loss weights must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.mode not in ("full", "l1_only", "feat_adv"):
            raise ConfigError(f"unknown translation loss mode: {self.mode!r}")
        if self.translator_kind not in ("resblocks", "fc"):
            raise ConfigError(f"unknown translator kind: {self.translator_kind!r}")
        for name in ("epochs_vaegan", "epochs_translator"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("steps_vaegan", "steps_translator"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be >= 1 when set")


@dataclass
class RunConfig:
    """Flat merged view of data + train + evaluation/ablation options.

    This is what the CLI resolves from file and flags; sub-configs are
    projected out with data_config() / train_config().
    """

    # data
    n_domain1: int = 1000
    n_domain2: int = 1000
    n_paired: int = 100
    image_size: int = 64
    num_classes: int = 4
    # optimizer / schedule
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 16
    epochs_vaegan: int = 24
    epochs_translator: int = 240
    steps_vaegan: int | None = None
    steps_translator: int | None = None
    # loss weights and mode
    lambda_f: float = 60.0
    lambda_fm: float = 10.0
    mode: str = "full"
    # backbone sizes
    latent_channels: int = 64
    base_channels: int = 32
    translator_kind: str = "resblocks"
    translator_blocks: int = 9
    fc_layers: int = 5
    fc_width: int = 256
    disc_scales: int = 2
    head_gain: float = 3.0
    # shared
    seed: int = 0
    # evaluation / ablation
    n_test: int = 100
    ablation_methods: list[str] = field(default_factory=lambda: ["FT+U&P", "FT w/o U", "IT+P"])
    ablation_fractions: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.5, 1.0])
    ablation_modes: list[str] = field(default_factory=lambda: ["full"])
    ablation_seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    jobs: int = 1
    # stochastic translation
    num_samples: int = 1
    sigma: float = 1.0

    def data_config(self) -> DataConfig:
        cfg = DataConfig(
            n_domain1=self.n_domain1,
            n_domain2=self.n_domain2,
            n_paired=self.n_paired,
            image_size=self.image_size,
            num_classes=self.num_classes,
            seed=self.seed,
        )
        cfg.validate()
        return cfg

    def train_config(self, seed: int | None = None) -> TrainConfig:
        cfg = TrainConfig(
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            batch_size=self.batch_size,
            epochs_vaegan=self.epochs_vaegan,
            epochs_translator=self.epochs_translator,
            steps_vaegan=self.steps_vaegan,
            steps_translator=self.steps_translator,
            lambda_f=self.lambda_f,
            lambda_fm=self.lambda_fm,
            seed=self.seed if seed is None else seed,
            mode=self.mode,
            latent_channels=self.latent_channels,
            base_channels=self.base_channels,
            translator_kind=self.translator_kind,
            translator_blocks=self.translator_blocks,
            fc_layers=self.fc_layers,
            fc_width=self.fc_width,
            disc_scales=self.disc_scales,
            head_gain=self.head_gain,
        )
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}

_LIST_FIELDS = {"ablation_methods", "ablation_fractions", "ablation_modes", "ablation_seeds"}
_OPTIONAL_INT_FIELDS = {"steps_vaegan", "steps_translator"}
_STR_FIELDS = {"mode", "translator_kind"}


def _coerce(key: str, value):
    """Check/convert one config value to its declared field type."""
    if key in _LIST_FIELDS:
        if not isinstance(value, list):
            raise ConfigError(f"config key '{key}' expects a list, got {type(value).__name__}")
        return list(value)
    if key in _OPTIONAL_INT_FIELDS:
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key '{key}' expects an integer or null, got {value!r}")
        return value
    if key in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"config key '{key}' expects a string, got {value!r}")
        return value
    default = getattr(RunConfig(), key)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"config key '{key}' expects a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key '{key}' expects an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key '{key}' expects a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"config key '{key}' expects a string, got {value!r}")
        return value
    raise ConfigError(f"config key '{key}' has unsupported type")


def resolve_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, a JSON config file, and flag overrides into a RunConfig.

    Unknown keys (in either source) raise ConfigError naming the key.
    """
    cfg = RunConfig()
    merged: dict = {}
    if path is not None:
        raw = Path(path).read_text()
        try:
            file_values = json.loads(raw) if raw.strip() else {}
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(file_values, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        merged.update(file_values)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    for key, value in merged.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key: '{key}'")
        setattr(cfg, key, _coerce(key, value))
    cfg.data_config()
    cfg.train_config()
    if cfg.n_test < 1:
        raise ConfigError("n_test must be >= 1")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg.num_samples < 1:
        raise ConfigError("num_samples must be >= 1")
    if cfg.sigma < 0:
        raise ConfigError("sigma must be >= 0")
    return cfg


def config_hash(cfg: RunConfig | dict) -> str:
    """Stable digest of a resolved config; stamped into every artifact."""
    d = cfg.to_dict() if isinstance(cfg, RunConfig) else cfg
    canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
