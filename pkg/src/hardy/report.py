"""Deterministic report and data emission.

JSON reports carry the schema tag "hardy-report/1", sort all keys, and
print floats with 17 significant digits, so identical inputs serialize to
byte-identical files.  Sampled functions go to CSV with the same float
format for external plotting.
"""

from __future__ import annotations

import math
import os

SCHEMA = "hardy-report/1"

__all__ = ["SCHEMA", "render_json", "emit_report", "emit_csv", "exit_code"]


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return f"{x:.17g}"


def _render(obj, indent: int) -> str:
    pad = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return _escape(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for key in sorted(obj, key=str):
            items.append(f'{pad}  {_escape(str(key))}: {_render(obj[key], indent + 1)}')
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_render(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if hasattr(obj, "item"):          # numpy scalars
        return _render(obj.item(), indent)
    if hasattr(obj, "tolist"):        # numpy arrays
        return _render(obj.tolist(), indent)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _escape(s: str) -> str:
    out = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{out}"'


def render_json(payload: dict) -> str:
    body = dict(payload)
    body["schema"] = SCHEMA
    return _render(body, 0) + "\n"


def emit_report(payload: dict, path: str) -> str:
    """Write the report deterministically; returns the path."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_json(payload))
    return path


def emit_csv(path: str, variable: str, xs, values, derivatives=None) -> str:
    """Sampled function as CSV: columns <variable>, value[, derivative]."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        if derivatives is None:
            fh.write(f"{variable},value\n")
            for x, v in zip(xs, values):
                fh.write(f"{x:.17g},{v:.17g}\n")
        else:
            fh.write(f"{variable},value,derivative\n")
            for x, v, d in zip(xs, values, derivatives):
                fh.write(f"{x:.17g},{v:.17g},{d:.17g}\n")
    return path


def exit_code(verdict: str) -> int:
    """Process exit status contract: 0 optimal/pass, 2 not-optimal/fail,
    3 inconclusive (errors exit 1 elsewhere)."""
    if verdict in ("optimal", "pass"):
        return 0
    if verdict == "inconclusive":
        return 3
    return 2
