"""Experiment config files and run manifests.

Configs are INI-style text with ``[train]``, ``[noise]`` and ``[ansatz]``
sections of ``key = value`` lines. Unknown keys are errors so typos surface.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from . import __version__
from .ansatz import Experiment
from .grad import Engine
from .noise import TABLE_S1, NoiseModel
from .train import TrainConfig

BUNDLED = ("mixed_state", "xor")


class ConfigError(ValueError):
    """A config could not be parsed; the message names the line or field."""


_TRAIN_TYPES = {f.name: f.type for f in fields(TrainConfig)}
_ANSATZ_KEYS = {"g_layers": int, "d_layers": int, "rho_r": str}
_NOISE_FLOAT_LISTS = ("t1", "t2star", "f0", "f1")


def _convert(section: str, key: str, raw: str, kind):
    try:
        if kind in (bool, "bool"):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind in (int, "int"):
            return int(raw, 0)
        if kind in (float, "float"):
            text = raw.strip().lower()
            return math.pi * float(text[:-2] or 1) if text.endswith("pi") else float(text)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {getattr(kind, '__name__', kind)}") from exc


def _parser(text: str, source: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        # configparser already reports "line N"
        raise ConfigError(str(exc).replace("\n", " ")) from exc
    unknown = set(cp.sections()) - {"train", "noise", "ansatz"}
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}")
    return cp


def parse_train(cp: configparser.ConfigParser) -> TrainConfig:
    kw: dict[str, Any] = {}
    if cp.has_section("train"):
        for key, raw in cp.items("train"):
            if key not in _TRAIN_TYPES or key in _ANSATZ_KEYS:
                raise ConfigError(f"[train] {key}: unknown field")
            kind = _TRAIN_TYPES[key]
            if key == "experiment":
                try:
                    kw[key] = Experiment(raw.strip())
                except ValueError as exc:
                    raise ConfigError(f"[train] experiment: expected one of {[e.value for e in Experiment]}") from exc
            elif key == "grad_engine":
                try:
                    kw[key] = Engine(raw.strip())
                except ValueError as exc:
                    raise ConfigError(f"[train] grad_engine: unknown engine {raw.strip()!r}") from exc
            else:
                kw[key] = _convert("train", key, raw, kind)
    if cp.has_section("ansatz"):
        for key, raw in cp.items("ansatz"):
            if key not in _ANSATZ_KEYS:
                raise ConfigError(f"[ansatz] {key}: unknown field")
            kw[key] = _convert("ansatz", key, raw, _ANSATZ_KEYS[key])
    try:
        return TrainConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"[train] {exc}") from exc


def parse_noise(cp: configparser.ConfigParser) -> Optional[NoiseModel]:
    """``None`` when noise is off; otherwise a model built from a preset plus overrides."""
    if not cp.has_section("noise"):
        return None
    items = dict(cp.items("noise"))
    preset = items.pop("preset", "off").strip()
    if preset not in ("off", "table-s1", "custom"):
        raise ConfigError(f"[noise] preset: expected off, table-s1 or custom, got {preset!r}")
    base: dict[str, Any] = dict(TABLE_S1) if preset == "table-s1" else {}
    for key, raw in items.items():
        if key in _NOISE_FLOAT_LISTS:
            base[key] = tuple(_convert("noise", key, v, float) for v in raw.split(","))
        elif key == "dd_protected_idle":
            base[key] = _convert("noise", key, raw, bool)
        elif key == "depolarizing":
            base[key] = _convert("noise", key, raw, float)
        else:
            raise ConfigError(f"[noise] {key}: unknown field")
    if preset == "off":
        return None
    if "t1" not in base or "t2star" not in base:
        raise ConfigError("[noise] custom preset needs t1 and t2star")
    try:
        return NoiseModel(**base)
    except ValueError as exc:
        raise ConfigError(f"[noise] {exc}") from exc


def load_config(path) -> tuple[TrainConfig, Optional[NoiseModel]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    cp = _parser(text, str(path))
    return parse_train(cp), parse_noise(cp)


def loads_config(text: str, source: str = "<string>") -> tuple[TrainConfig, Optional[NoiseModel]]:
    cp = _parser(text, source)
    return parse_train(cp), parse_noise(cp)


def bundled_config(name: str) -> str:
    """Text of a config shipped with the package (``mixed_state`` or ``xor``)."""
    if name not in BUNDLED:
        raise KeyError(f"no bundled config {name!r}")
    return resources.files("qgan_forge").joinpath("configs", f"{name}.cfg").read_text()


def noise_to_dict(noise: Optional[NoiseModel]) -> Optional[dict]:
    if noise is None:
        return None
    return {
        "t1": list(noise.t1),
        "t2star": list(noise.t2star),
        "f0": list(noise.f0),
        "f1": list(noise.f1),
        "enabled": noise.enabled,
        "dd_protected_idle": noise.dd_protected_idle,
        "depolarizing": noise.depolarizing,
    }


def noise_from_dict(d: Optional[dict]) -> Optional[NoiseModel]:
    return None if d is None else NoiseModel(**d)


@dataclass
class RunManifest:
    """Everything needed to replay a run: resolved configs, seed, version."""

    subcommand: str
    config_path: Optional[str]
    train: dict
    noise: Optional[dict]
    seed: int
    out_dir: str
    version: str = __version__
    extra: Optional[dict] = None

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.train)

    def noise_model(self) -> Optional[NoiseModel]:
        return noise_from_dict(self.noise)
