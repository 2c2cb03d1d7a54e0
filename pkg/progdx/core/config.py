# progdx - Progressive single- to multi-modality sub-type diagnosis
# Copyright (C) 2026 progdx contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""Training configuration loading and validation.

A config file has four optional sections; missing keys take the defaults:

    [train]      learning_rate, epochs, batch_size, seed, ...
    [model]      dimensions (see ModelConfig)
    [policy]     theta or thresholds, penalties, gate_penalty_on_correct
    [ablation]   no_disentangle, no_alignment, no_progressive, no_fusion
    [loss]       alignment, orthogonal, mi (weights of the auxiliary terms)

Files ending in .json use the same structure.
"""

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import toml

from progdx.core.exceptions import ConfigNotFoundError, ConfigParseError, ConfigurationError
from progdx.core.metrics import SCORE_SOURCES
from progdx.core.model import AblationFlags, ModelConfig
from progdx.core.progressive import LossWeights, PolicyConfig
from progdx.core.textualize import check_template_id

SECTIONS = ("train", "model", "policy", "ablation", "loss")


@dataclass
class TrainConfig:
    """Everything a training run depends on."""

    learning_rate: float = 1e-4
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    momentum: float = 0.0
    max_grad_norm: float = 1.0
    num_threads: int = 1
    template_id: int = 3
    rotation: int = 0
    score_source: str = "decision"
    guideline_corpus: str | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    loss: LossWeights = field(default_factory=LossWeights)

    def validate(self) -> None:
        """Raise ConfigurationError on the first invalid value."""
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate", f"must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigurationError("epochs", f"must be at least 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ConfigurationError("batch_size", f"must be at least 2, got {self.batch_size}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError("momentum", f"must lie in [0, 1), got {self.momentum}")
        if self.max_grad_norm < 0:
            raise ConfigurationError(
                "max_grad_norm", f"must be non-negative (0 disables clipping), got {self.max_grad_norm}"
            )
        if self.num_threads < 1:
            raise ConfigurationError("num_threads", f"must be at least 1, got {self.num_threads}")
        if self.score_source not in SCORE_SOURCES:
            raise ConfigurationError("score_source", f"must be one of {SCORE_SOURCES}")
        if not 0 <= self.rotation < 5:
            raise ConfigurationError("rotation", f"must lie in [0, 4], got {self.rotation}")
        check_template_id(self.template_id)
        self.model.validate()
        self.policy.validate()
        self.loss.validate()

    @property
    def effective_policy(self) -> PolicyConfig:
        """Policy with the progressive classifier disabled under the no_progressive ablation."""
        if self.ablation.no_progressive:
            return replace(self.policy, progressive=False)
        return self.policy

    def to_dict(self) -> dict[str, Any]:
        train = {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if f.name not in SECTIONS and getattr(self, f.name) is not None
        }
        return {
            "train": train,
            "model": {k: v for k, v in self.model.to_dict().items() if v is not None},
            "policy": self.policy.to_dict(),
            "ablation": self.ablation.to_dict(),
            "loss": self.loss.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrainConfig":
        """Create a validated TrainConfig from the sectioned structure.

        Raises:
            ConfigurationError: If a section or key is unknown or a value is invalid
        """
        unknown_sections = set(data) - set(SECTIONS)
        if unknown_sections:
            raise ConfigurationError("config", f"unknown sections {sorted(unknown_sections)}")

        train = dict(data.get("train", {}))
        known = {f.name for f in fields(cls)} - set(SECTIONS)
        unknown = set(train) - known
        if unknown:
            raise ConfigurationError("train", f"unknown keys {sorted(unknown)}")

        try:
            config = cls(
                **train,
                model=ModelConfig.from_dict(data.get("model", {})),
                policy=PolicyConfig.from_dict(data.get("policy", {})),
                ablation=AblationFlags.from_dict(data.get("ablation", {})),
                loss=LossWeights.from_dict(data.get("loss", {})),
            )
        except TypeError as e:
            raise ConfigurationError("config", str(e)) from e
        config.validate()
        return config


def read_config_file(path: Path) -> dict[str, Any]:
    """Parse a TOML file, or a JSON file by suffix.

    Raises:
        ConfigNotFoundError: If the file does not exist
        ConfigParseError: If the file is not valid TOML/JSON
    """
    if not path.exists():
        raise ConfigNotFoundError(str(path))
    try:
        if path.suffix == ".json":
            data = json.loads(path.read_text())
        else:
            data = toml.load(path)
    except (toml.TomlDecodeError, json.JSONDecodeError) as e:
        raise ConfigParseError(str(path), str(e)) from e
    if not isinstance(data, dict):
        raise ConfigParseError(str(path), "top level must be a table")
    return data


def load_train_config(path: Path) -> TrainConfig:
    """Load and validate a training config file.

    A [synth] section, if present, is ignored here so one file can describe
    both the cohort and the run.

    Raises:
        ConfigNotFoundError: If the file does not exist
        ConfigParseError: If the file cannot be parsed
        ConfigurationError: If a value is invalid
    """
    data = read_config_file(path)
    data.pop("synth", None)
    return TrainConfig.from_dict(data)
