"""Pipeline configuration and its YAML form.

Unknown keys anywhere in the file are errors. Relative paths are resolved
against the directory of the config file.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from ..errors import ValidationError


@dataclass
class DetectorTrainingConfig:
    """Detector training schedule recorded for reference; adapters ignore it."""

    image_size: int = 416
    momentum: float = 0.95
    weight_decay: float = 0.0005
    burn_in: int = 1000
    lr: float = 0.001
    max_batches: int = 6000
    steps: Tuple[int, ...] = (4800, 5400)
    batch: int = 64
    subdivisions: int = 16

    def __post_init__(self):
        self.steps = tuple(int(s) for s in self.steps)
        if self.image_size <= 0 or self.image_size % 32:
            raise ValidationError("detector image_size must be a positive multiple of 32")
        if self.batch % self.subdivisions:
            raise ValidationError("detector batch must be divisible by subdivisions")
        if list(self.steps) != sorted(self.steps) or (self.steps and self.steps[-1] > self.max_batches):
            raise ValidationError("detector steps must be increasing and within max_batches")


@dataclass
class AdapterSpec:
    name: str = "oracle"
    options: Dict[str, Any] = field(default_factory=dict)


@dataclass
class PipelineConfig:
    recognizer: Optional[str] = None
    parser: Optional[str] = None
    corrector: Optional[str] = None
    use_corrector: bool = True
    signboard_detector: AdapterSpec = field(default_factory=AdapterSpec)
    address_detector: AdapterSpec = field(default_factory=AdapterSpec)
    detector_training: DetectorTrainingConfig = field(default_factory=DetectorTrainingConfig)
    iou_threshold: float = 0.5
    beam_width: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValidationError(f"iou_threshold must lie in (0, 1), got {self.iou_threshold}")
        if self.beam_width < 1:
            raise ValidationError("beam_width must be >= 1")

    @property
    def corrector_enabled(self) -> bool:
        return self.use_corrector and self.corrector is not None

    def check_paths(self) -> None:
        """Every referenced checkpoint must exist."""
        needed = [("recognizer", self.recognizer), ("parser", self.parser)]
        if self.use_corrector and self.corrector is not None:
            needed.append(("corrector", self.corrector))
        for name, path in needed:
            if path is None:
                raise ValidationError(f"no {name} checkpoint configured")
            if not Path(path).is_file():
                raise ValidationError(f"{name} checkpoint not found: {path}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["detector_training"]["steps"] = list(self.detector_training.steps)
        return d

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "PipelineConfig":
        d = dict(d or {})
        _reject_unknown(d, cls, "pipeline")
        base = Path(base_dir) if base_dir is not None else None
        for key in ("recognizer", "parser", "corrector"):
            if d.get(key) is not None:
                d[key] = _resolve(d[key], base)
        for key in ("signboard_detector", "address_detector"):
            if key in d:
                spec = dict(d[key] or {})
                _reject_unknown(spec, AdapterSpec, key)
                opts = dict(spec.get("options") or {})
                for k, v in opts.items():
                    if isinstance(v, str) and (k.endswith("_dir") or k.endswith("_path")):
                        opts[k] = _resolve(v, base)
                d[key] = AdapterSpec(spec.get("name", "oracle"), opts)
        if "detector_training" in d:
            dt = dict(d["detector_training"] or {})
            _reject_unknown(dt, DetectorTrainingConfig, "detector_training")
            d["detector_training"] = DetectorTrainingConfig(**dt)
        return cls(**d)

    @classmethod
    def from_yaml(cls, path) -> "PipelineConfig":
        return cls.from_dict(load_yaml(path), Path(path).parent)

    def to_yaml(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True, allow_unicode=True), encoding="utf-8")


def _reject_unknown(d: dict, cls, where: str) -> None:
    unknown = set(d) - {f.name for f in fields(cls)}
    if unknown:
        raise ValidationError(f"unknown {where} config keys: {sorted(unknown)}")


def _resolve(p: str, base: Optional[Path]) -> str:
    path = Path(p)
    if base is not None and not path.is_absolute():
        path = base / path
    return str(path)


def load_yaml(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ValidationError(f"invalid YAML in {path}: {e}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must be a mapping")
    return data
