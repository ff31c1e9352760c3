"""Deterministic text, CSV and JSON rendering with 17 significant digits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return f"{x:.17g}"


def _json(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_, int, float, np.integer, np.floating)):
        return fmt(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json(str(k), indent, 0)}: {_json(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_json(v, indent, 0) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _json(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot render {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _json(obj, indent, 0) + "\n"


@dataclass
class ExperimentReport:
    """What a subcommand produced: a verdict, a JSON document and optional rows."""

    command: str
    passed: bool
    summary: list = field(default_factory=list)
    document: dict = field(default_factory=dict)
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def to_json(self) -> str:
        doc = {"command": self.command, "passed": self.passed, **self.document}
        if self.rows:
            doc["rows"] = [dict(zip(self.columns, r)) for r in self.rows]
        return dumps(doc)

    def to_csv(self) -> str:
        if not self.columns:
            lines = ["key,value"] + [f"{k},{fmt(v) if not isinstance(v, str) else v}"
                                     for k, v in self.document.items()
                                     if not isinstance(v, (dict, list, tuple))]
            return "\n".join(lines) + "\n"
        out = [",".join(self.columns)]
        for r in self.rows:
            out.append(",".join(v if isinstance(v, str) else fmt(v) for v in r))
        return "\n".join(out) + "\n"

    def render(self, form: str) -> str:
        return self.to_csv() if form == "csv" else self.to_json()
