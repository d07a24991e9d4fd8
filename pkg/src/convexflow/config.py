"""Configuration: flat key = value flow configs and TOML harness settings."""

from __future__ import annotations

import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path

from pydantic import ValidationError

from convexflow.errors import InvalidConfig
from convexflow.models import FlowConfig
from convexflow.shapes import parse_shape

logger = logging.getLogger(__name__)

_INT_KEYS = {"n", "k", "resolution", "snapshot_every", "max_steps", "seed"}
_FLOAT_KEYS = {"alpha", "cfl", "tol_conv", "t_max"}
_BOOL_KEYS = {"projection", "strict_monitors"}
_STR_KEYS = {"mu", "constraint", "shape", "out_dir"}
KEYS = tuple(FlowConfig.model_fields)

_TRUE = {"on", "true", "yes", "1"}
_FALSE = {"off", "false", "no", "0"}


def _convert(key: str, raw: str, line: int) -> object:
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise InvalidConfig(f"expected a number, got {raw!r}", line=line, key=key) from None
    if key in _BOOL_KEYS:
        lowered = raw.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise InvalidConfig(f"expected on/off, got {raw!r}", line=line, key=key)
    return raw


def _error_key(error: dict) -> str | None:
    if error.get("loc"):
        return str(error["loc"][0])
    # model-level messages start with the offending key
    words = error.get("msg", "").removeprefix("Value error, ").split()
    return words[0] if words and words[0] in KEYS else None


def parse_config(text: str) -> FlowConfig:
    """Parse ``key = value`` lines (``#`` comments) into a validated FlowConfig.

    Raises InvalidConfig naming the line and key of the first problem.
    """
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        content = raw_line.split("#", 1)[0].strip()
        if not content:
            continue
        key, sep, raw = content.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise InvalidConfig(f"expected key = value, got {content!r}", line=number)
        if key not in KEYS:
            raise InvalidConfig(f"unknown key (expected one of {', '.join(KEYS)})", line=number, key=key)
        if key in values:
            raise InvalidConfig(f"duplicate key (first set on line {lines[key]})", line=number, key=key)
        if not raw:
            raise InvalidConfig("missing value", line=number, key=key)
        values[key] = _convert(key, raw, number)
        lines[key] = number

    try:
        config = FlowConfig(**values)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = _error_key(error)
        message = error["msg"].removeprefix("Value error, ")
        raise InvalidConfig(message, line=lines.get(key), key=key) from None

    try:
        parse_shape(config.shape, config.n)
    except InvalidConfig as exc:
        raise InvalidConfig(str(exc).removeprefix("shape: "), line=lines.get("shape"), key="shape") from None
    return config


def _render_value(value: object) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(config: FlowConfig) -> str:
    """Canonical text form; parse_config(render_config(c)) == c."""
    return "".join(f"{key} = {_render_value(getattr(config, key))}\n" for key in KEYS)


def with_overrides(config: FlowConfig, overrides: dict[str, str]) -> FlowConfig:
    """Re-parse ``config`` with raw string values replaced; dimension defaults follow a new n."""
    values = {key: _render_value(getattr(config, key)) for key in KEYS}
    if "n" in overrides and overrides["n"].strip() != str(config.n):
        for key in ("shape", "resolution"):
            if key not in overrides:
                del values[key]
    values.update(overrides)
    return parse_config("".join(f"{key} = {value}\n" for key, value in values.items()))


def load_flow_config(path: str | Path) -> FlowConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text)


# ── harness settings ─────────────────────────────────────────


@dataclass
class LogSettings:
    level: str = "INFO"
    file: str = "convexflow.log"
    max_bytes: int = 10_485_760  # 10 MB
    backup_count: int = 5


@dataclass
class OutputSettings:
    ledger_file: str = "runs.jsonl"
    timeseries_file: str = "timeseries.csv"
    snapshot_stem: str = "final"
    write_snapshot: bool = True


@dataclass
class VerifySettings:
    resolution_1: int = 64
    resolution_2: int = 12
    t_max: float = 2.0
    seed: int = 0


@dataclass
class Settings:
    log: LogSettings = field(default_factory=LogSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    verify: VerifySettings = field(default_factory=VerifySettings)
    quiet: bool = False


def _apply_section(target: object, data: dict) -> None:
    """Apply dict values to a dataclass, ignoring unknown keys and wrong types."""
    for key, value in data.items():
        if not hasattr(target, key):
            continue
        expected_type = type(getattr(target, key))
        if expected_type is bool and not isinstance(value, bool):
            continue
        try:
            setattr(target, key, expected_type(value))
        except (ValueError, TypeError):
            pass


def load_settings(path: str | Path | None = None) -> Settings:
    """Load harness settings from TOML; a missing file gives the defaults."""
    settings = Settings()
    if path is None:
        return settings
    toml_path = Path(path)
    if not toml_path.exists():
        return settings

    with open(toml_path, "rb") as f:
        data = tomllib.load(f)
    section_map = {
        "log": settings.log,
        "output": settings.output,
        "verify": settings.verify,
    }
    for section_name, section_obj in section_map.items():
        if isinstance(data.get(section_name), dict):
            _apply_section(section_obj, data[section_name])
    if isinstance(data.get("quiet"), bool):
        settings.quiet = data["quiet"]
    return settings
