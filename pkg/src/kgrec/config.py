"""Flat ``key=value`` run configuration."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import DataError, ParseError
from .model import ModelConfig

PATH_KEYS = ("interactions", "triples", "data", "out_dir")
PREP_KEYS = {"min_rating": float, "min_count": int}


@dataclass
class RunConfig:
    interactions: Path | None = None
    triples: Path | None = None
    data: Path | None = None
    out_dir: Path | None = None
    min_rating: float = 4.0
    min_count: int = 5
    model: ModelConfig = field(default_factory=ModelConfig)

    def check_paths(self):
        """Fail early when a referenced input is missing."""
        if self.data is None and (self.interactions is None or self.triples is None):
            raise DataError("config needs either `data` or both `interactions` and `triples`")
        for name in ("interactions", "triples", "data"):
            p = getattr(self, name)
            if p is not None and not p.exists():
                raise DataError(f"{name} path {p} does not exist")


def _convert(key: str, raw: str, typ: type):
    if typ is int:
        return int(raw)
    if typ is float:
        return float(raw)
    return raw


def _parse_lines(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"expected key=value, got {stripped!r}", lineno)
        key, value = (s.strip() for s in stripped.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno)
        yield lineno, key, value


def parse_model_text(text: str) -> ModelConfig:
    types = ModelConfig.field_types()
    values = {}
    for lineno, key, value in _parse_lines(text):
        if key not in types:
            raise ParseError(f"unknown key {key!r}", lineno)
        try:
            values[key] = _convert(key, value, types[key])
        except ValueError:
            raise ParseError(f"cannot parse {key}={value!r}", lineno) from None
    try:
        return ModelConfig(**values)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def apply_overrides(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    types = ModelConfig.field_types()
    model_vals = cfg.model.to_dict()
    for key, value in overrides.items():
        if key in PATH_KEYS:
            setattr(cfg, key, Path(value))
        elif key in PREP_KEYS:
            try:
                setattr(cfg, key, PREP_KEYS[key](value))
            except ValueError:
                raise DataError(f"cannot parse {key}={value!r}") from None
        elif key in types:
            try:
                model_vals[key] = _convert(key, value, types[key])
            except ValueError:
                raise DataError(f"cannot parse {key}={value!r}") from None
        else:
            raise DataError(f"unknown key {key!r}")
    try:
        cfg.model = ModelConfig(**model_vals)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    return cfg


def parse_config(path: str | Path, overrides: dict[str, str] | None = None) -> RunConfig:
    """Read a run config; relative paths resolve against the config file's directory."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    base = path.parent
    types = ModelConfig.field_types()
    cfg = RunConfig()
    model_vals = {}
    for lineno, key, value in _parse_lines(text):
        try:
            if key in PATH_KEYS:
                p = Path(value)
                setattr(cfg, key, p if p.is_absolute() else base / p)
            elif key in PREP_KEYS:
                setattr(cfg, key, PREP_KEYS[key](value))
            elif key in types:
                model_vals[key] = _convert(key, value, types[key])
            else:
                raise ParseError(f"unknown key {key!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"cannot parse {key}={value!r}", lineno) from None
    try:
        cfg.model = ModelConfig(**model_vals)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if overrides:
        apply_overrides(cfg, overrides)
    return cfg
