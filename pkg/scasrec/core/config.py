"""Configuration management for SCASRec."""

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from scasrec.core.errors import ConfigError
from scasrec.core.schema import FAMILIARITY_LEVELS, TIME_BUCKETS
from scasrec.utils.fingerprint import generate_fingerprint

try:
    import tomli
except ImportError:
    try:
        import tomllib as tomli  # Python 3.11+
    except ImportError:
        tomli = None

SEED_ENV_VAR = "SCASREC_SEED"
CONFIG_FILE_NAME = "scasrec.toml"


def default_seed() -> int:
    """Default seed, overridable through the SCASREC_SEED environment variable."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from e


class _Section(BaseModel):
    """Base for config sections: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class WorldConfig(_Section):
    """Synthetic route world and dataset generation settings."""

    grid_width: int = Field(default=12, ge=2)
    grid_height: int = Field(default=12, ge=2)
    samples: int = Field(default=20000, ge=0)
    test_samples: int = Field(default=2000, ge=0)
    candidates: int = Field(default=10, ge=1)
    history_length: int = Field(default=8, ge=0)
    users: int = Field(default=200, ge=1)
    noise: float = Field(default=0.0, ge=0.0, le=1.0)
    deviation: float = Field(default=0.1, ge=0.0, lt=1.0)
    route_width: int = Field(default=62, ge=16)
    scene_width: int = Field(default=10, ge=9)
    history_width: int = Field(default=31, ge=2)
    choice_noise: float = Field(default=1.0, ge=0.0)
    jitter: float = Field(default=0.3, ge=0.0)
    seed: int = Field(default_factory=default_seed)
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _history_fits(self) -> "WorldConfig":
        if self.history_width <= self.scene_width:
            raise ValueError(
                f"history_width ({self.history_width}) must exceed scene_width "
                f"({self.scene_width}) to hold selected-route features"
            )
        return self


class ModelConfig(_Section):
    """Network widths and architectural switches."""

    width: int = Field(default=32, ge=2)
    scene_dim: int = Field(default=8, ge=1)
    embed_dim: int = Field(default=4, ge=1)
    hidden: int = Field(default=32, ge=1)
    history_mode: str = Field(default="sigmoid")
    keep_start: bool = True
    time_buckets: int = Field(default=TIME_BUCKETS, ge=2)
    familiarity_levels: int = Field(default=FAMILIARITY_LEVELS, ge=2)
    init_scale: float = Field(default=1.0, gt=0.0)

    @field_validator("width")
    @classmethod
    def _even_width(cls, value: int) -> int:
        if value % 2:
            raise ValueError(f"model width must be even, got {value}")
        return value

    @field_validator("history_mode")
    @classmethod
    def _known_mode(cls, value: str) -> str:
        if value not in ("sigmoid", "softmax"):
            raise ValueError(f"history_mode must be 'sigmoid' or 'softmax', got {value!r}")
        return value


class TrainConfig(_Section):
    """Training regime, optimizer and reward settings."""

    batch_size: int = Field(default=128, ge=1)
    learning_rate: float = Field(default=0.001, gt=0.0)
    epochs: int = Field(default=3, ge=1)
    max_steps: Optional[int] = Field(default=None, ge=1)
    t_max: Optional[int] = Field(default=None, ge=1)
    beta: float = Field(default=0.04, ge=0.0, le=1.0)
    eta: float = Field(default=1e-4, gt=0.0)
    alpha_init: float = Field(default=0.1, ge=0.0)
    discount: float = Field(default=0.5, gt=0.0, le=1.0)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    seed: int = Field(default_factory=default_seed)
    rl: bool = False
    rl_baseline: bool = False
    disable_scr: bool = False
    disable_eor: bool = False
    scr_after_append: bool = False
    reward_floor: Optional[float] = Field(default=None, gt=0.0)
    loss_sum: bool = False
    eval_every: int = Field(default=50, ge=1)
    eval_limit: Optional[int] = Field(default=None, ge=1)

    def resolve_t_max(self, n_candidates: int) -> int:
        """Maximum decode steps for a sample with ``n_candidates`` routes."""
        cap = self.t_max if self.t_max is not None else 10
        return max(1, min(n_candidates, cap))


class EvalConfig(_Section):
    """Offline evaluation settings."""

    methods: List[str] = Field(default_factory=lambda: ["scasrec", "dnn", "mmr", "dpp"])
    ks: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    truncate_to_model_len: bool = False
    mmr_lambda: float = Field(default=0.5, ge=0.0, le=1.0)
    dpp_k: Optional[int] = Field(default=None, ge=1)
    baseline_epochs: int = Field(default=3, ge=1)
    alpha: Optional[float] = Field(default=None, ge=0.0)
    seed: int = Field(default_factory=default_seed)

    @field_validator("methods")
    @classmethod
    def _known_methods(cls, value: List[str]) -> List[str]:
        known = {"scasrec", "dnn", "mmr", "dpp", "oracle", "random"}
        unknown = [m for m in value if m not in known]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {sorted(known)}")
        return value

    @field_validator("ks")
    @classmethod
    def _positive_ks(cls, value: List[int]) -> List[int]:
        if not value or any(k < 1 for k in value):
            raise ValueError(f"K values must be >= 1, got {value}")
        return sorted(set(value))


class RunConfig(_Section):
    """Effective configuration of one command invocation."""

    world: WorldConfig = Field(default_factory=WorldConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    data: Optional[Path] = None
    eval_data: Optional[Path] = None
    out: Optional[Path] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """
        Build a validated config from a plain dictionary.

        Raises:
            ConfigError: On unknown keys or invalid values
        """
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(_describe_validation(e)) from e

    @classmethod
    def load(cls, config_path: Optional[Path] = None) -> "RunConfig":
        """
        Load configuration from file.

        Args:
            config_path: Path to config file (None = search for scasrec.toml)

        Returns:
            RunConfig instance
        """
        if config_path is None:
            current = Path.cwd()
            for parent in [current] + list(current.parents):
                candidate = parent / CONFIG_FILE_NAME
                if candidate.exists():
                    config_path = candidate
                    break
            if config_path is None:
                return cls()
        elif not Path(config_path).exists():
            raise ConfigError(f"config file not found: {config_path}")

        if tomli is None:
            raise ConfigError(
                "tomli is required to load config files",
                action="pip install tomli",
            )

        try:
            with open(config_path, "rb") as f:
                data = tomli.load(f)
        except Exception as e:
            raise ConfigError(f"Failed to load config from {config_path}: {e}") from e

        unknown = [k for k in data if k != "scasrec"]
        if unknown:
            raise ConfigError(f"unknown top-level tables in {config_path}: {unknown}")
        return cls.from_dict(data.get("scasrec", {}))

    def with_overrides(self, section: Optional[str] = None, **values: Any) -> "RunConfig":
        """
        Return a copy with non-None values replaced (CLI flags win over file values).

        Args:
            section: Sub-section name ("world", "model", "train", "eval") or None for top level
            **values: Field values; None entries are ignored

        Returns:
            New validated RunConfig
        """
        data = self.model_dump()
        target = data if section is None else data[section]
        for key, value in values.items():
            if value is not None:
                target[key] = value
        return RunConfig.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to a JSON-compatible dictionary."""
        return self.model_dump(mode="json")

    def fingerprint(self) -> str:
        """Stable digest of the effective configuration."""
        return generate_fingerprint(self.to_dict())

    def header_json(self) -> str:
        """Compact JSON of the effective config for output headers."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _describe_validation(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item.get("loc", ()))
        parts.append(f"{location or '<root>'}: {item.get('msg')}")
    return "invalid configuration: " + "; ".join(parts)


def create_default_config(output_path: Path) -> None:
    """Create a default configuration file."""
    config_content = """# SCASRec Configuration

[scasrec.world]
grid_width = 12
grid_height = 12
samples = 20000
test_samples = 2000
candidates = 10        # N_max
history_length = 8     # M
users = 200
noise = 0.0            # fraction of misclick samples (beta_true)
deviation = 0.1        # fraction of trajectory edges replaced by detours
route_width = 62
scene_width = 10
history_width = 31

[scasrec.model]
width = 32             # F, must be even
scene_dim = 8
embed_dim = 4
hidden = 32
history_mode = "sigmoid"  # or "softmax"
keep_start = true

[scasrec.train]
batch_size = 128
learning_rate = 0.001
epochs = 3
beta = 0.04            # target noise ratio for alpha adaptation
eta = 0.0001
alpha_init = 0.1
discount = 0.5         # RL discount lambda
# t_max = 10
rl = false
disable_scr = false
disable_eor = false
scr_after_append = false
loss_sum = false
eval_every = 50

[scasrec.eval]
methods = ["scasrec", "dnn", "mmr", "dpp"]
ks = [1, 2, 3, 4, 5]
truncate_to_model_len = false
mmr_lambda = 0.5
"""
    with open(output_path, "w", encoding="utf-8") as f:
        f.write(config_content)
