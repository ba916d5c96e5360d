"""Deterministic JSON output and atomic file writes.

Floats are rendered with 17 significant digits so that binary64 values
round-trip exactly and repeated runs produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

__all__ = ["dumps", "atomic_write_text", "format_float"]


def format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"non-finite value {x} cannot be serialized")
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"  # keep 1.0 as 1.0, not 1
    return f"{x:.17g}"


def _render(obj, parts: list, indent: int, cur: int) -> None:
    pad = " " * cur
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, int):
        parts.append(str(obj))
    elif isinstance(obj, float):
        parts.append(format_float(obj))
    elif isinstance(obj, dict):
        if not obj:
            parts.append("{}")
            return
        parts.append("{\n")
        inner = " " * (cur + indent)
        for k, (key, val) in enumerate(obj.items()):
            parts.append(f"{inner}{json.dumps(str(key))}: ")
            _render(val, parts, indent, cur + indent)
            parts.append(",\n" if k < len(obj) - 1 else "\n")
        parts.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            parts.append("[]")
            return
        # scalar lists stay on one line; nested structures get one entry per line
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            parts.append("[")
            for k, v in enumerate(obj):
                _render(v, parts, indent, cur)
                if k < len(obj) - 1:
                    parts.append(", ")
            parts.append("]")
        else:
            parts.append("[\n")
            inner = " " * (cur + indent)
            for k, v in enumerate(obj):
                parts.append(inner)
                _render(v, parts, indent, cur + indent)
                parts.append(",\n" if k < len(obj) - 1 else "\n")
            parts.append(pad + "]")
    else:
        # numpy scalars and similar
        if hasattr(obj, "item"):
            _render(obj.item(), parts, indent, cur)
        else:
            raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps(obj, indent: int = 2) -> str:
    parts: list = []
    _render(obj, parts, indent, 0)
    parts.append("\n")
    return "".join(parts)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
