"""Flat ``key = value`` configuration files, seeded RNG streams and stable JSON output."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterator

import numpy as np


class ConfigError(ValueError):
    """Malformed configuration, plan or bundle file; the message carries the line number."""


def parse_key_values(path: str | Path, *, allow_include: bool = True) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment; ``include = other.cfg`` pulls one level of defaults.

    Keys from the including file override included ones. Nested includes are rejected.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    out: dict[str, str] = {}
    own: dict[str, str] = {}
    for lineno, key, value in _lines(text, path):
        if key == "include":
            if not allow_include:
                raise ConfigError(f"{path}:{lineno}: nested include is not allowed")
            out.update(parse_key_values(path.parent / value, allow_include=False))
        else:
            if key in own:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            own[key] = value
    out.update(own)
    return out


def parse_key_value_text(text: str, source: str = "<string>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, key, value in _lines(text, source):
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _lines(text: str, source) -> Iterator[tuple[int, str, str]]:
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        yield lineno, key, value


def get_float(cfg: dict[str, str], key: str, default: float | None = None) -> float:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(eval_number(cfg[key]))
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {exc}") from exc


def get_int(cfg: dict[str, str], key: str, default: int | None = None) -> int:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected an integer, got {cfg[key]!r}") from exc


def get_bool(cfg: dict[str, str], key: str, default: bool = False) -> bool:
    if key not in cfg:
        return default
    v = cfg[key].lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"key {key!r}: expected a boolean, got {cfg[key]!r}")


def eval_number(text: str) -> float:
    """Parse a float, also accepting ``pi`` multiples such as ``pi/2`` or ``0.5*pi``."""
    t = text.strip().lower().replace(" ", "")
    try:
        return float(t)
    except ValueError:
        pass
    if "pi" in t:
        num, _, den = t.partition("/")
        factor = num.replace("*pi", "").replace("pi*", "").replace("pi", "")
        value = (float(factor) if factor not in ("", "+", "-") else float(factor + "1")) * math.pi
        return value / float(den) if den else value
    raise ValueError(f"not a number: {text!r}")


def parse_float_list(text: str) -> list[float]:
    return [eval_number(t) for t in text.replace(",", " ").split()]


# ---------------------------------------------------------------------------
# Randomness


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based Philox generator for ``(seed, stream)``; streams are independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))


# ---------------------------------------------------------------------------
# JSON


def _float_repr(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(obj: Any) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(to_jsonable(obj), 0)


def _encode(obj: Any, depth: int) -> str:
    pad = "  " * (depth + 1)
    end = "  " * depth
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, depth + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, depth + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, depth + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, float):
        return _float_repr(obj)
    return json.dumps(obj)


def config_hash(cfg: dict[str, Any]) -> str:
    blob = json.dumps(to_jsonable(cfg), sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
