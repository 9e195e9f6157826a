"""Strict JSON run configuration.

A config document has the sections ``model``, ``profile``, ``bath``,
``time``, ``grid``, ``options`` and the scalar ``output_dir``; every section
is optional and missing values take the working-point defaults.  Unknown
keys, wrong types and constraint violations raise :class:`ConfigError`
naming the offending key.
"""

from __future__ import annotations

import json
import math
import os
import types
import typing
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .dynamics import BathSpec, TimeGrid
from .model import DecayProfile, ModelParams
from .sweep import METRICS, _resolve_axis
from .wigner import PhaseSpaceGrid

OUTPUT_ENV = "WIGNERDECAY_OUTPUT"
DEFAULT_OUTPUT = "output"


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


@dataclass(frozen=True)
class CommandOptions:
    """Options consumed by individual commands.

    ``times``: Wigner snapshot times (empty means the negativity-optimal
    time).  ``state``: path of a stored oscillator density matrix used by
    ``core-state``, ``fidelity`` and ``qfi`` instead of a fresh run.
    ``preset`` / ``axes``: sweep definition (explicit ``axes`` win).
    ``ancillas``: ancilla count for ``scaling``.
    """

    times: tuple[float, ...] = ()
    variant: str = "fock01"
    dephased: bool = False
    state: str | None = None
    preset: str = "coupling"
    axes: tuple[tuple[str, tuple], ...] = ()
    metric: str = "min_N"
    ancillas: int = 3
    state_every: int = 20
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "axes", tuple((str(n), tuple(v)) for n, v in self.axes))
        if self.variant not in ("fock01", "fock24"):
            raise ValueError(f"variant must be fock01 or fock24, got {self.variant!r}")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.ancillas not in (1, 2, 3):
            raise ValueError(f"ancillas must be 1, 2 or 3, got {self.ancillas!r}")
        if self.state_every < 1:
            raise ValueError("state_every must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def to_dict(self) -> dict:
        return {
            **asdict(self),
            "times": list(self.times),
            "axes": [[n, list(v)] for n, v in self.axes],
        }


_SECTIONS = {
    "model": ModelParams,
    "profile": DecayProfile,
    "bath": BathSpec,
    "time": TimeGrid,
    "grid": PhaseSpaceGrid,
    "options": CommandOptions,
}


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = ModelParams()
    profile: DecayProfile = DecayProfile()
    bath: BathSpec = BathSpec()
    time: TimeGrid = TimeGrid()
    grid: PhaseSpaceGrid | None = None
    options: CommandOptions = CommandOptions()
    output_dir: str | None = None

    @property
    def phase_grid(self) -> PhaseSpaceGrid:
        return self.grid or PhaseSpaceGrid.for_ancillas(self.model.n_ancillas)

    def resolved_output(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "profile": self.profile.to_dict(),
            "bath": self.bath.to_dict(),
            "time": self.time.to_dict(),
            "grid": None if self.grid is None else self.grid.to_dict(),
            "options": self.options.to_dict(),
            "output_dir": self.output_dir,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _check_value(key: str, value, hint):
    """Type-check ``value`` against annotation ``hint``; returns the converted value."""
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        options = typing.get_args(hint)
        if value is None and type(None) in options:
            return None
        errors = []
        for opt in options:
            if opt is type(None):
                continue
            try:
                return _check_value(key, value, opt)
            except ConfigError as exc:
                errors.append(exc)
        raise errors[0]
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {type(value).__name__}")
        if not math.isfinite(value):
            raise ConfigError(f"{key}: must be finite")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {type(value).__name__}")
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {type(value).__name__}")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {type(value).__name__}")
        return value
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {type(value).__name__}")
        args = typing.get_args(hint)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_check_value(f"{key}[{i}]", v, args[0]) for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"{key}: expected {len(args)} entries, got {len(value)}")
        return tuple(_check_value(f"{key}[{i}]", v, a) for i, (v, a) in enumerate(zip(value, args)))
    if hint is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {type(value).__name__}")
        for i, v in enumerate(value):
            if isinstance(v, (dict, list)) or v is None:
                raise ConfigError(f"{key}[{i}]: expected a scalar")
        return tuple(value)
    raise ConfigError(f"{key}: unsupported field type {hint!r}")


def _build_section(name: str, cls, doc) -> object:
    if not isinstance(doc, dict):
        raise ConfigError(f"{name}: expected an object, got {type(doc).__name__}")
    hints = typing.get_type_hints(cls)
    known = {f.name: f for f in fields(cls)}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown key")
    kwargs = {}
    for key, value in doc.items():
        kwargs[key] = _check_value(f"{name}.{key}", value, hints[key])
    try:
        return cls(**kwargs)
    except ValueError as exc:
        # Name the field the constructor complained about when it is identifiable.
        msg = str(exc)
        culprit = next((k for k in [*kwargs, *known] if msg.startswith(k) or f" {k} " in f" {msg} "), None)
        prefix = f"{name}.{culprit}" if culprit else name
        raise ConfigError(f"{prefix}: {msg}") from None


def config_from_dict(doc) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"config: expected a JSON object, got {type(doc).__name__}")
    for key in doc:
        if key not in _SECTIONS and key != "output_dir":
            raise ConfigError(f"{key}: unknown key")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name not in doc:
            continue
        if name == "grid" and doc[name] is None:
            kwargs[name] = None
            continue
        kwargs[name] = _build_section(name, cls, doc[name])
    if "output_dir" in doc:
        kwargs["output_dir"] = _check_value("output_dir", doc["output_dir"], str | None)
    cfg = RunConfig(**kwargs)
    _cross_check(cfg)
    return cfg


def _cross_check(cfg: RunConfig) -> None:
    for i, (name, _) in enumerate(cfg.options.axes):
        try:
            _resolve_axis(name)
        except ValueError as exc:
            raise ConfigError(f"options.axes[{i}]: {exc}") from None


def parse_config(path) -> RunConfig:
    """Read and validate a strict JSON config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {str(path)!r} does not exist")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(doc)


def apply_overrides(doc: dict, assignments) -> dict:
    """Apply ``section.key=value`` assignments to a config document.

    Values are read as JSON when possible (``0.7``, ``true``, ``null``,
    ``[1, 2]``) and as plain strings otherwise.
    """
    doc = json.loads(json.dumps(doc))
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must have the form section.key=value")
        target, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = target.strip().split(".")
        if len(parts) == 1 and parts[0] == "output_dir":
            doc["output_dir"] = value
            continue
        if len(parts) != 2 or parts[0] not in _SECTIONS:
            raise ConfigError(f"{target}: overrides must name section.key with section in {sorted(_SECTIONS)}")
        section, key = parts
        if section == "grid" and doc.get("grid") is None:
            doc["grid"] = {}
        doc.setdefault(section, {})[key] = value
    return doc
