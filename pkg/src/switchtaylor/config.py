"""Flat key-value run configuration files.

The format is one ``key = value`` assignment per line.  Values are integers,
floats, bare strings, or bracketed arrays of values; nested arrays express
matrices (``generator = [[-1.0, 1.0], [1.0, -1.0]]``).  Blank lines and lines
starting with ``#`` are ignored.  Keys follow identifier rules and may not
repeat.  The format needs no quoting, so bare strings cannot contain
whitespace, brackets, commas, ``=`` or ``#``.

parse and format are mutual inverses on parsed values: formatting a parsed
mapping and parsing it back yields the same keys, types and values.  Floats
are written in shortest round-trip form, so the identity is exact.
"""

from __future__ import annotations

import numbers
import re

from .errors import ConfigError

__all__ = ["parse_config", "format_config", "load_config", "save_config"]

_KEY_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_INT_RE = re.compile(r"[+-]?[0-9]+\Z")
# anything unquoted that cannot be confused with structure
_BARE_RE = re.compile(r"[^\s\[\],=#]+\Z")


def _split_top(text: str, key: str):
    """Split on commas that sit outside any bracket."""
    items = []
    depth = 0
    current = []
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise ConfigError("%s: unbalanced ']' in value" % key)
        if ch == "," and depth == 0:
            items.append("".join(current))
            current = []
        else:
            current.append(ch)
    if depth != 0:
        raise ConfigError("%s: unbalanced '[' in value" % key)
    items.append("".join(current))
    return items


def _parse_value(text: str, key: str):
    text = text.strip()
    if not text:
        raise ConfigError("%s: empty value" % key)
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError("%s: array value must end with ']'" % key)
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(part, key) for part in _split_top(inner, key)]
    if _INT_RE.match(text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        pass
    if _BARE_RE.match(text):
        return text
    raise ConfigError("%s: cannot parse value %r" % (key, text))


def parse_config(text: str) -> dict:
    """Parse config text into an ordered mapping.

    Raises ConfigError naming the offending key or line.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected 'key = value', got %r" % (lineno, raw))
        key, _, value = line.partition("=")
        key = key.strip()
        if not _KEY_RE.match(key):
            raise ConfigError("line %d: invalid config key %r" % (lineno, key))
        if key in out:
            raise ConfigError("%s: duplicate config key" % key)
        out[key] = _parse_value(value, key)
    return out


def _format_value(value, key: str) -> str:
    if isinstance(value, bool):
        raise ConfigError("%s: booleans are not part of the config format" % key)
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return repr(float(value))
    if isinstance(value, str):
        if not _BARE_RE.match(value) or _INT_RE.match(value):
            raise ConfigError("%s: string %r cannot be written unambiguously" % (key, value))
        try:
            float(value)
        except ValueError:
            return value
        raise ConfigError("%s: string %r cannot be written unambiguously" % (key, value))
    if isinstance(value, (list, tuple)):
        return "[%s]" % ", ".join(_format_value(item, key) for item in value)
    raise ConfigError("%s: cannot serialize value of type %s" % (key, type(value).__name__))


def format_config(mapping) -> str:
    """Serialize a mapping back to config text, preserving key order."""
    lines = []
    for key, value in mapping.items():
        if not _KEY_RE.match(str(key)):
            raise ConfigError("invalid config key %r" % (key,))
        lines.append("%s = %s" % (key, _format_value(value, str(key))))
    return "\n".join(lines) + ("\n" if lines else "")


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError("config: cannot read %s (%s)" % (path, exc)) from exc
    return parse_config(text)


def save_config(mapping, path) -> None:
    text = format_config(mapping)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
