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

"""Synthetic cohort generator standing in for the licensed clinical datasets.

The generating process follows the guideline structure:
- the sub-type is drawn from the class priors
- a clinical phenotype (amnestic for typical AD, non-amnestic for atypical AD,
  none otherwise) shows in the tabular fields and in MRI atrophy patterns
- in-vivo evidence (every AD sub-type, not normal controls) shows strongly in
  PET, weakly in MRI and most weakly in the tabular fields

Pre-clinical AD and normal controls therefore differ mainly in PET, so part of
the cohort can only be resolved at stage 3.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import toml

from progdx.core.cohort import CDR_LEVELS, SubjectRecord, SubType, TabularRecord
from progdx.core.exceptions import ConfigNotFoundError, ConfigParseError, ConfigurationError

# Default availability mirrors the tabular / +MRI / +PET subject counts of the
# original cohort (8280 / 4842 / 2336).
DEFAULT_AVAILABILITY: tuple[float, float, float] = (1.0, 4842 / 8280, 2336 / 8280)

_CDR_CUTS = (0.5, 1.2, 2.0, 2.8)


@dataclass
class SynthConfig:
    """Parameters of the synthetic cohort."""

    n_subjects: int = 2000
    class_priors: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    volume_shape: tuple[int, int, int] = (16, 16, 16)
    signal_tabular: float = 1.0
    signal_mri: float = 1.0
    signal_pet: float = 1.0
    missing_rate: float = 0.1
    availability: tuple[float, float, float] = field(default=DEFAULT_AVAILABILITY)
    noise_std: float = 1.0

    def validate(self) -> None:
        """Check every parameter range.

        Raises:
            ConfigurationError: On the first invalid value
        """
        if self.n_subjects <= 0:
            raise ConfigurationError("n_subjects", f"must be positive, got {self.n_subjects}")
        if len(self.volume_shape) != 3 or any(s <= 0 for s in self.volume_shape):
            raise ConfigurationError("volume_shape", f"needs three positive sizes, got {self.volume_shape}")
        if len(self.class_priors) != len(SubType):
            raise ConfigurationError("class_priors", f"needs {len(SubType)} values")
        if any(not 0.0 <= p <= 1.0 for p in self.class_priors) or not np.isclose(
            sum(self.class_priors), 1.0, atol=1e-6
        ):
            raise ConfigurationError("class_priors", f"must lie in [0, 1] and sum to 1, got {self.class_priors}")
        for name in ("signal_tabular", "signal_mri", "signal_pet"):
            if getattr(self, name) < 0:
                raise ConfigurationError(name, "must be non-negative")
        if self.noise_std <= 0:
            raise ConfigurationError("noise_std", "must be positive")
        if not 0.0 <= self.missing_rate <= 1.0:
            raise ConfigurationError("missing_rate", f"must lie in [0, 1], got {self.missing_rate}")
        if len(self.availability) != 3 or any(not 0.0 <= a <= 1.0 for a in self.availability):
            raise ConfigurationError("availability", f"needs three fractions in [0, 1], got {self.availability}")
        tab, mri, pet = self.availability
        if not tab >= mri >= pet:
            raise ConfigurationError(
                "availability", "fractions must be nested: tabular >= MRI >= PET"
            )

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in data.items()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SynthConfig":
        """Create a validated SynthConfig; missing keys take defaults.

        Raises:
            ConfigurationError: If a key is unknown or a value is out of range
        """
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError("synth", f"unknown keys {sorted(unknown)}")
        values = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        config = cls(**values)
        config.validate()
        return config


def load_synth_config(path: Path) -> SynthConfig:
    """Load a [synth] section from a TOML or JSON file.

    Raises:
        ConfigNotFoundError: If the file does not exist
        ConfigParseError: If the file cannot be parsed
        ConfigurationError: If a value is out of range
    """
    if not path.exists():
        raise ConfigNotFoundError(str(path))
    try:
        data = json.loads(path.read_text()) if path.suffix == ".json" else toml.load(path)
    except (toml.TomlDecodeError, json.JSONDecodeError) as e:
        raise ConfigParseError(str(path), str(e)) from e
    return SynthConfig.from_dict(data.get("synth", {}))


def _blob(shape: tuple[int, int, int], center: tuple[float, float, float], sigma: float) -> npt.NDArray[np.float32]:
    axes = [np.linspace(-1.0, 1.0, n) for n in shape]
    zz, yy, xx = np.meshgrid(*axes, indexing="ij")
    dist2 = (zz - center[0]) ** 2 + (yy - center[1]) ** 2 + (xx - center[2]) ** 2
    pattern = np.exp(-dist2 / (2.0 * sigma**2))
    return (pattern / pattern.max()).astype(np.float32)


@dataclass(frozen=True)
class _Patterns:
    memory: npt.NDArray[np.float32]
    posterior: npt.NDArray[np.float32]
    amyloid: npt.NDArray[np.float32]

    @classmethod
    def for_shape(cls, shape: tuple[int, int, int]) -> "_Patterns":
        return cls(
            memory=_blob(shape, (-0.4, 0.0, -0.3), 0.35),
            posterior=_blob(shape, (0.5, 0.0, 0.5), 0.35),
            amyloid=_blob(shape, (0.0, 0.4, 0.0), 0.5),
        )


def _dementia_level(score: float) -> float:
    return CDR_LEVELS[int(np.searchsorted(_CDR_CUTS, score, side="right"))]


def _sigmoid(x: float) -> float:
    return float(1.0 / (1.0 + np.exp(-x)))


def _tabular(
    rng: np.random.Generator, subtype: SubType, cfg: SynthConfig
) -> TabularRecord:
    s = cfg.signal_tabular
    clinical = float(subtype in (SubType.TYPICAL_AD, SubType.ATYPICAL_AD))
    atypical = float(subtype == SubType.ATYPICAL_AD)
    in_vivo = float(subtype != SubType.NORMAL_CONTROL)

    z = rng.standard_normal(5)
    age = int(np.clip(round(72 + s * (4.0 * clinical - 3.0 * atypical + 1.5 * in_vivo) + 6.0 * z[0]), 50, 95))
    education = int(np.clip(round(15 - s * 1.5 * clinical + 3.0 * z[1]), 0, 25))
    gender = "female" if rng.random() < 0.5 else "male"
    flags = {
        name: bool(rng.random() < _sigmoid(base + s * 0.25 * in_vivo))
        for name, base in (
            ("heart_attack", -2.0),
            ("hypertension", -0.4),
            ("stroke", -2.5),
            ("alcohol_abuse", -2.2),
            ("psychiatric_disorder", -1.8),
        )
    }
    blood_test = round(float(1.0 + s * 0.4 * in_vivo + 0.5 * z[2]), 4)
    dementia_score = s * (1.5 * clinical + 0.5 * atypical + 0.2 * in_vivo) + 0.6 * z[3]
    values: dict[str, Any] = {
        "age": age,
        "education": education,
        "gender": gender,
        **flags,
        "blood_test": blood_test,
        "dementia_level": _dementia_level(float(dementia_score)),
    }

    missing = rng.random(len(values)) < cfg.missing_rate
    present = {k: v for (k, v), gone in zip(values.items(), missing, strict=True) if not gone}
    if not present:
        present = {"age": age}
    return TabularRecord(**present)


def _volumes(
    rng: np.random.Generator, subtype: SubType, tier: int, cfg: SynthConfig, patterns: _Patterns
) -> tuple[npt.NDArray[np.float32] | None, npt.NDArray[np.float32] | None]:
    typical = float(subtype == SubType.TYPICAL_AD)
    atypical = float(subtype == SubType.ATYPICAL_AD)
    in_vivo = float(subtype != SubType.NORMAL_CONTROL)

    mri = pet = None
    if tier >= 2:
        noise = rng.standard_normal(cfg.volume_shape, dtype=np.float32) * cfg.noise_std
        atrophy = typical * patterns.memory + atypical * patterns.posterior + 0.3 * in_vivo * patterns.amyloid
        mri = (noise - cfg.signal_mri * atrophy).astype(np.float32)
    if tier >= 3:
        noise = rng.standard_normal(cfg.volume_shape, dtype=np.float32) * cfg.noise_std
        uptake = 1.5 * in_vivo * patterns.amyloid + 0.5 * (
            typical * patterns.memory + atypical * patterns.posterior
        )
        pet = (noise + cfg.signal_pet * uptake).astype(np.float32)
    return mri, pet


def synthesize_cohort(cfg: SynthConfig, seed: int) -> list[SubjectRecord]:
    """Generate a deterministic synthetic cohort.

    Args:
        cfg: Cohort parameters
        seed: Seed of the single random generator used for everything

    Returns:
        Records ordered by id. Subjects outside the tabular availability
        fraction carry no data and are not emitted.

    Raises:
        ConfigurationError: If cfg is invalid
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    n = cfg.n_subjects

    labels = rng.choice(len(SubType), size=n, p=np.asarray(cfg.class_priors, dtype=np.float64))
    n_tab, n_mri, n_pet = (int(round(a * n)) for a in cfg.availability)
    n_mri = min(n_mri, n_tab)
    n_pet = min(n_pet, n_mri)

    tiers = np.zeros(n, dtype=np.int64)
    order = rng.permutation(n)
    tiers[order[:n_pet]] = 3
    tiers[order[n_pet:n_mri]] = 2
    tiers[order[n_mri:n_tab]] = 1

    patterns = _Patterns.for_shape(cfg.volume_shape)
    records: list[SubjectRecord] = []
    for i in range(n):
        if tiers[i] == 0:
            continue
        subtype = SubType(int(labels[i]))
        tabular = _tabular(rng, subtype, cfg)
        mri, pet = _volumes(rng, subtype, int(tiers[i]), cfg, patterns)
        records.append(
            SubjectRecord(id=f"S{i:05d}", label=subtype, tabular=tabular, mri=mri, pet=pet)
        )
    return records
