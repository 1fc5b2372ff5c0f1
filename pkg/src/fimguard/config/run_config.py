"""
Run Configuration - Building Block: RunConfig

Purpose:
    The JSON document that fully determines a CLI run, validated with
    pydantic (unknown keys rejected in every section), plus dotted-path
    overrides applied to the raw document before validation.

Input Data:
    - JSON file with sections data, model, train, attacks, eval, output, execution
    - overrides "section.key=value"; values parsed with yaml.safe_load,
      integer segments index lists ("attacks.0.epsilon=2")

Output Data:
    - RunConfig; resolved_dump() is written next to every run's outputs

Example:
    >>> cfg = load_run_config("config/run_synthetic.json", ["train.mu=0.022"])
    >>> cfg.train.mu
    0.022
"""

import copy
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..attacks.registry import AttackConfig
from ..errors import ConfigError
from ..training.trainer import TrainConfig
from .settings import settings

RESOLVED_NAME = "resolved-config.json"


class SyntheticConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    num_classes: int = Field(default=3, ge=2)
    per_class: int = Field(default=100, ge=1)
    test_per_class: int = Field(default=30, ge=1)
    dim: int = Field(default=16, ge=1)
    seed: int = 0
    noise: float = Field(default=0.05, ge=0.0)


class DataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: Literal["mnist", "synthetic"] = "mnist"
    data_dir: Optional[str] = None
    train_limit: Optional[int] = Field(default_factory=lambda: settings.train_limit, ge=1)
    test_limit: Optional[int] = Field(default_factory=lambda: settings.test_limit, ge=1)
    synthetic: SyntheticConfig = Field(default_factory=SyntheticConfig)

    @property
    def resolved_data_dir(self) -> str:
        return self.data_dir or settings.data_dir


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    arch: Literal["convnet", "mlp"] = "convnet"
    hidden_dims: List[int] = Field(default_factory=list)
    seed: int = 0

    @field_validator("hidden_dims")
    @classmethod
    def validate_dims(cls, v: List[int]) -> List[int]:
        if any(d < 1 for d in v):
            raise ValueError("hidden dims must be positive")
        return v


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    modes: List[Literal["curve", "distance", "transfer", "snapshot"]] = Field(
        default_factory=lambda: ["curve"]
    )
    curve_samples: int = Field(default=500, ge=1)
    distance_samples: int = Field(default=200, ge=1)
    transfer_samples: int = Field(default=200, ge=1)
    snapshot_samples: int = Field(default=5, ge=1)
    verify_samples: int = Field(default=10, ge=1)
    attack_samples: int = Field(default=100, ge=1)
    epsilon_grid: List[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0, 6.0])


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: Optional[str] = None
    dump_adversarial: bool = False

    @property
    def resolved_directory(self) -> str:
        return self.directory or settings.output_dir


class ExecutionConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    threads: Optional[int] = Field(default=None, ge=1)

    @property
    def resolved_threads(self) -> int:
        return self.threads or settings.threads


class RunConfig(BaseModel):
    """Complete, validated run configuration."""

    model_config = ConfigDict(extra="forbid")

    data: DataConfig = Field(default_factory=DataConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    attacks: List[AttackConfig] = Field(default_factory=list)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    execution: ExecutionConfig = Field(default_factory=ExecutionConfig)

    def attack(self, name: str) -> AttackConfig:
        """The configured attack called ``name``, else a default config for it."""
        key = name.strip().lower()
        for attack in self.attacks:
            if attack.name == key:
                return attack
        try:
            return AttackConfig(name=key)
        except ValidationError as exc:
            raise ConfigError(_first_message(exc)) from exc

    def with_attack(self, attack: AttackConfig) -> "RunConfig":
        """Copy whose attack list holds ``attack`` in place of its namesake (appended if new)."""
        attacks = [a for a in self.attacks if a.name != attack.name]
        position = next((i for i, a in enumerate(self.attacks) if a.name == attack.name), len(attacks))
        attacks.insert(position, attack)
        return self.model_copy(update={"attacks": attacks})

    def resolved(self, output_dir: Optional[Union[str, Path]] = None,
                 threads: Optional[int] = None) -> "RunConfig":
        """
        Copy with every settings-derived default written in: data directory,
        output directory and thread count. Reloading the copy reproduces the run
        without the environment that produced it.
        """
        return self.model_copy(update={
            "data": self.data.model_copy(update={"data_dir": self.data.resolved_data_dir}),
            "output": self.output.model_copy(update={
                "directory": str(output_dir) if output_dir is not None else self.output.resolved_directory,
            }),
            "execution": self.execution.model_copy(update={
                "threads": threads or self.execution.resolved_threads,
            }),
        })

    def resolved_dump(self, output_dir: Optional[Union[str, Path]] = None,
                      threads: Optional[int] = None) -> str:
        return json.dumps(self.resolved(output_dir, threads).model_dump(mode="json"),
                          indent=2, sort_keys=True)

    def write_resolved(self, out_dir: Union[str, Path], threads: Optional[int] = None) -> Path:
        """Write resolved-config.json into ``out_dir``, recording it as the output directory."""
        path = Path(out_dir) / RESOLVED_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.resolved_dump(out_dir, threads))
        return path


def parse_override(text: str) -> Tuple[List[str], Any]:
    """'a.b.0.c=value' -> (['a', 'b', '0', 'c'], typed value)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    path = [part for part in key.strip().split(".") if part]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value of override {text!r}: {exc}") from exc
    return path, value


def apply_overrides(document: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Return a copy of ``document`` with every override applied in order."""
    doc = copy.deepcopy(document)
    for text in overrides:
        path, value = parse_override(text)
        node: Any = doc
        for i, part in enumerate(path):
            last = i == len(path) - 1
            if isinstance(node, list):
                if not part.isdigit() or int(part) >= len(node):
                    raise ConfigError(f"override {text!r}: no list element {part!r}")
                if last:
                    node[int(part)] = value
                else:
                    node = node[int(part)]
            elif isinstance(node, dict):
                if last:
                    node[part] = value
                else:
                    node = node.setdefault(part, {})
            else:
                raise ConfigError(f"override {text!r}: {'.'.join(path[:i])} is not a section")
    return doc


def _first_message(exc: ValidationError) -> str:
    errors = exc.errors()
    if not errors:
        return str(exc)
    first = errors[0]
    where = ".".join(str(p) for p in first.get("loc", ()))
    return f"{where}: {first.get('msg')}" if where else str(first.get("msg"))


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Sequence[str] = ()) -> RunConfig:
    """
    Read, override and validate a run configuration.

    ``path=None`` starts from an empty document (all defaults).

    Raises:
        ConfigError: unreadable file, invalid JSON, bad override or
            validation failure
    """
    document: Dict[str, Any] = {}
    if path is not None:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(document, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
    document = apply_overrides(document, overrides)
    try:
        return RunConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigError(f"invalid run config: {_first_message(exc)}") from exc
