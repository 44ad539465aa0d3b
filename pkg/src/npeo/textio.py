"""Small key-value text format shared by model and simulation spec files.

Lines look like ``name = v1 v2 v3`` with '#' comments; values are
whitespace separated, so scalars and vectors use the same syntax.
"""

from __future__ import annotations

from .errors import ParseError


def read_key_values(path) -> dict[str, list[str]]:
    entries: dict[str, list[str]] = {}
    with open(path) as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected 'key = values', got {line!r}", lineno)
            key, _, rest = line.partition("=")
            key = key.strip()
            values = rest.split()
            if not key or not values:
                raise ParseError(f"expected 'key = values', got {line!r}", lineno)
            if key in entries:
                raise ParseError(f"duplicate key {key!r}", lineno)
            entries[key] = values
    return entries


def take_float(entries: dict[str, list[str]], key: str, default=None) -> float:
    if key not in entries:
        if default is None:
            raise ParseError(f"missing required key {key!r}")
        return default
    values = entries[key]
    if len(values) != 1:
        raise ParseError(f"key {key!r} expects a single value, got {len(values)}")
    try:
        return float(values[0])
    except ValueError:
        raise ParseError(f"key {key!r}: bad number {values[0]!r}") from None


def take_int(entries: dict[str, list[str]], key: str, default=None) -> int:
    value = take_float(entries, key, default)
    if value != int(value):
        raise ParseError(f"key {key!r} expects an integer, got {value}")
    return int(value)


def take_vector(entries: dict[str, list[str]], key: str) -> tuple[float, ...]:
    if key not in entries:
        raise ParseError(f"missing required key {key!r}")
    try:
        return tuple(float(v) for v in entries[key])
    except ValueError:
        raise ParseError(f"key {key!r}: bad number in {entries[key]!r}") from None


def take_flag(entries: dict[str, list[str]], key: str, default: bool = False) -> bool:
    if key not in entries:
        return default
    token = entries[key][0].lower()
    if token in ("1", "true", "yes", "on"):
        return True
    if token in ("0", "false", "no", "off"):
        return False
    raise ParseError(f"key {key!r}: bad flag value {entries[key][0]!r}")
