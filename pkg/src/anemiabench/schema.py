"""Dataset schema: feature declarations and their JSON serialization.

A schema lists every categorical feature with its ordered levels, the
reference level used for encoding and odds ratios, and the imputation
rule. The schema file is the single source of truth for which features
enter the pipeline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

FEATURE_KINDS = ("ordinal", "one_hot", "binary")
IMPUTE_MODES = ("none", "median", "mode")

DEFAULT_MISSING_TOKENS = ("", "NA", ".")


@dataclass(frozen=True)
class AnemiaThresholds:
    """Hemoglobin cut-offs (g/dL) separating anemia severities.

    ``no_anemia_min`` is the boundary for the binary outcome: below it a
    child counts as anemic, at or above it as not anemic.
    """

    no_anemia_min: float = 11.0
    mild_min: float = 10.0
    moderate_min: float = 7.0

    def __post_init__(self):
        if not (0 < self.moderate_min < self.mild_min < self.no_anemia_min):
            raise ConfigError(
                "thresholds must satisfy 0 < moderate < mild < no-anemia, got "
                f"{self.moderate_min}, {self.mild_min}, {self.no_anemia_min}"
            )


@dataclass(frozen=True)
class FeatureSpec:
    """One categorical feature: its levels, encoding kind, and imputation."""

    name: str
    kind: str
    levels: tuple[str, ...]
    reference_level: str
    impute: str = "none"
    cap: float | None = None

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ConfigError(f"{self.name}: unknown kind {self.kind!r}")
        if self.impute not in IMPUTE_MODES:
            raise ConfigError(f"{self.name}: unknown impute mode {self.impute!r}")
        if not self.levels:
            raise ConfigError(f"{self.name}: levels must be non-empty")
        if len(set(self.levels)) != len(self.levels):
            raise ConfigError(f"{self.name}: duplicate levels")
        if self.reference_level not in self.levels:
            raise ConfigError(
                f"{self.name}: reference level {self.reference_level!r} "
                "not among levels"
            )
        if self.kind == "binary" and len(self.levels) != 2:
            raise ConfigError(
                f"{self.name}: binary feature needs exactly 2 levels, "
                f"got {len(self.levels)}"
            )
        if self.cap is not None and not math.isfinite(self.cap):
            raise ConfigError(f"{self.name}: cap must be finite")
        object.__setattr__(self, "levels", tuple(self.levels))

    @property
    def numeric_levels(self) -> list[float] | None:
        """Levels parsed as numbers, or None if any level is non-numeric."""
        try:
            return [float(level) for level in self.levels]
        except ValueError:
            return None

    def level_index(self, label: str) -> int:
        return self.levels.index(label)


@dataclass(frozen=True)
class DatasetSchema:
    """All feature specs plus the label column name."""

    features: tuple[FeatureSpec, ...]
    label_name: str
    missing_tokens: tuple[str, ...] = DEFAULT_MISSING_TOKENS

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate feature names in schema")
        if self.label_name in names:
            raise ConfigError("label column must not be listed as a feature")
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "missing_tokens", tuple(self.missing_tokens))

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    def feature(self, name: str) -> FeatureSpec:
        for spec in self.features:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def subset(self, names: list[str]) -> "DatasetSchema":
        """Schema restricted to ``names``, preserving declared order."""
        keep = set(names)
        return DatasetSchema(
            features=tuple(f for f in self.features if f.name in keep),
            label_name=self.label_name,
            missing_tokens=self.missing_tokens,
        )

    def to_dict(self) -> dict:
        return {
            "label_name": self.label_name,
            "missing_tokens": list(self.missing_tokens),
            "features": [
                {
                    "name": f.name,
                    "kind": f.kind,
                    "levels": list(f.levels),
                    "reference_level": f.reference_level,
                    "impute": f.impute,
                    "cap": f.cap,
                }
                for f in self.features
            ],
        }


def schema_from_dict(doc: dict) -> DatasetSchema:
    try:
        features = tuple(
            FeatureSpec(
                name=entry["name"],
                kind=entry["kind"],
                levels=tuple(entry["levels"]),
                reference_level=entry["reference_level"],
                impute=entry.get("impute", "none"),
                cap=entry.get("cap"),
            )
            for entry in doc["features"]
        )
        return DatasetSchema(
            features=features,
            label_name=doc["label_name"],
            missing_tokens=tuple(doc.get("missing_tokens", DEFAULT_MISSING_TOKENS)),
        )
    except KeyError as exc:
        raise ConfigError(f"schema document missing field {exc}") from exc


def load_schema(path: str | Path) -> DatasetSchema:
    with open(path, encoding="utf-8") as fh:
        return schema_from_dict(json.load(fh))


def save_schema(schema: DatasetSchema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(schema.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
