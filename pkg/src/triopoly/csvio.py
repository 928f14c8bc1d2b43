"""CSV writers and the key=value run-config format.

Floats are printed with 17 significant digits so every value round-trips
exactly. Booleans print as ``true``/``false`` and missing values as ``nan``.

Config grammar, one entry per line::

    # comment
    key = value

Keys are lowercase identifiers (``[a-z_][a-z0-9_]*``); values run to the end of
the line with surrounding whitespace stripped. Blank lines and ``#`` comments
are ignored. Duplicate keys are an error.
"""

from __future__ import annotations

import io
import math
import re
from pathlib import Path
from typing import Iterable, Mapping

SCAN_HEADER = ("p1", "p2", "class", "s1", "s2", "s3", "s4", "interior")
BIF_HEADER = ("sweep_value", "sample_index", "x", "y", "z", "status", "period")
CURVE_HEADER = ("curve_id", "point_index", "p1", "p2")
ORBIT_HEADER = ("t", "x", "y", "z")
SURFACE_HEADER = ("p1", "p2", "value")

_KEY = re.compile(r"[a-z_][a-z0-9_]*\Z")


class ConfigError(ValueError):
    pass


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(v)


def csv_text(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    # newline="" keeps "\n" on every platform, so files stay byte-identical
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(header, rows))


def dump_config(values: Mapping[str, object]) -> str:
    lines = []
    for key in sorted(values):
        if not _KEY.match(key):
            raise ConfigError(f"invalid config key {key!r}")
        v = values[key]
        # repr is the shortest exact round-trip form, friendlier than 17 digits
        text = repr(v) if isinstance(v, float) and math.isfinite(v) else fmt(v)
        if "\n" in text:
            raise ConfigError(f"value for {key!r} spans lines")
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def parse_config(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if not _KEY.match(key):
            raise ConfigError(f"{source}:{lineno}: invalid key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def read_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def write_config(path, values: Mapping[str, object]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dump_config(values))
