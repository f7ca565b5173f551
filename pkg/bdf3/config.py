"""Centralised experiment configuration with fail-fast validation.

Usage
-----
    from bdf3 import config

    # once, at CLI startup:
    settings = config.load()   # prints diagnostics, sys.exit(2) on error

    # anywhere else:
    settings = config.get()    # returns cached Settings; raises if not loaded

Sources (later wins): built-in defaults, the YAML file named by
``BDF3_CONFIG``, then the ``BDF3_*`` environment variables.
"""

import logging
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import yaml

# honour a .env file in the working directory (local-dev convenience)
from dotenv import load_dotenv

from bdf3.errors import EXIT_USAGE

load_dotenv()  # no-op when .env doesn't exist


# ── public data class ────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Settings:
    """Immutable defaults shared by every experiment."""

    horizon: float = 1.0  # final time T
    epsilon: float = 0.1  # diffusivity
    grid: int = 32  # Fourier grid size M
    seed: int = 7  # base seed for every random mesh / scan
    log_level: str = "WARNING"


_ENV_KEYS: dict[str, str] = {
    "horizon": "BDF3_HORIZON",
    "epsilon": "BDF3_EPSILON",
    "grid": "BDF3_GRID",
    "seed": "BDF3_SEED",
    "log_level": "BDF3_LOG_LEVEL",
}

_LEVELS = frozenset({"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"})


# ── module-level singleton ───────────────────────────────────────────────────

_settings: Settings | None = None


def _read_yaml(path_raw: str, errors: list[str]) -> dict:
    path = Path(path_raw)
    if not path.is_file():
        errors.append(f"BDF3_CONFIG={path_raw} does not exist or is not a file.")
        return {}
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        errors.append(f"BDF3_CONFIG={path_raw} is not valid YAML: {exc}")
        return {}
    if data is None:
        return {}
    if not isinstance(data, dict):
        errors.append(f"BDF3_CONFIG={path_raw} must hold a mapping of settings.")
        return {}
    known = {f.name for f in fields(Settings)}
    unknown = sorted(set(data) - known)
    if unknown:
        errors.append(f"BDF3_CONFIG has unknown keys: {', '.join(unknown)}.")
    return {k: v for k, v in data.items() if k in known}


def _coerce(raw: dict, errors: list[str]) -> dict:
    """Convert raw values to the field types, collecting every problem."""
    out: dict = {}
    for key, value in raw.items():
        try:
            if key in ("horizon", "epsilon"):
                out[key] = float(value)
            elif key in ("grid", "seed"):
                if isinstance(value, float) and not value.is_integer():
                    raise ValueError(value)
                out[key] = int(value)
            else:
                out[key] = str(value).strip().upper()
        except (TypeError, ValueError):
            errors.append(f"{key}={value!r} is not a valid value.")
    return out


def validate(settings: Settings) -> list[str]:
    """Return human-readable problems with *settings* (empty when valid)."""
    errors: list[str] = []
    if not settings.horizon > 0:
        errors.append(f"horizon={settings.horizon} must be positive.")
    if not settings.epsilon > 0:
        errors.append(f"epsilon={settings.epsilon} must be positive.")
    m = settings.grid
    if m < 8 or m & (m - 1):
        errors.append(f"grid={m} must be a power of two >= 8.")
    if settings.seed < 0:
        errors.append(f"seed={settings.seed} must be non-negative.")
    if settings.log_level not in _LEVELS:
        errors.append(
            f"log_level={settings.log_level} is not one of {sorted(_LEVELS)}."
        )
    return errors


def load() -> Settings:
    """Read YAML + env vars, validate, cache, and return Settings.

    * Prints every problem to stderr and exits with status 2 on failure;
      an experiment must never start from a bad configuration.
    * Idempotent: returns the cached singleton on subsequent calls.
    """
    global _settings
    if _settings is not None:
        return _settings

    errors: list[str] = []
    raw: dict = {}

    # ── BDF3_CONFIG (optional YAML) ──────────────────────────────────────
    yaml_raw = os.environ.get("BDF3_CONFIG", "").strip()
    if yaml_raw:
        raw.update(_read_yaml(yaml_raw, errors))

    # ── BDF3_* env vars ──────────────────────────────────────────────────
    for key, env in _ENV_KEYS.items():
        value = os.environ.get(env, "").strip()
        if value:
            raw[key] = value

    settings = replace(Settings(), **_coerce(raw, errors))
    errors.extend(validate(settings))

    # ── Abort on any error ───────────────────────────────────────────────
    if errors:
        print("\n❌  bdf3 — configuration error\n", file=sys.stderr)
        for e in errors:
            print(f"     • {e}", file=sys.stderr)
        print("", file=sys.stderr)
        sys.exit(EXIT_USAGE)

    _settings = settings
    logging.getLogger(__name__).debug("config loaded: %s", _settings)
    return _settings


def get() -> Settings:
    """Return the already-loaded Settings.  Raises if load() hasn't run."""
    if _settings is None:
        raise RuntimeError("Config not initialised — call config.load() at startup.")
    return _settings
