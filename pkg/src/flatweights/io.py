"""Weight and grid-function files.

Two formats, both bit-exact on round trip:

* CSV: first line ``n,L`` (the two integers), then the cell values, one grid
  row per line (a single row for ``n = 1``), each written with 17
  significant digits.
* JSON: ``{"n": 1, "L": 3, "values": [...]}`` with values flat in row-major
  order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FlatWeightsError, SizeMismatch
from .grid import GridFn, GridSpec, Weight


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_csv(f: GridFn) -> str:
    g = f.grid
    lines = [f"{g.n},{g.L}"]
    rows = f.values.reshape(1, -1) if g.n == 1 else f.values
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def dumps_json(f: GridFn) -> str:
    g = f.grid
    return json.dumps({"n": g.n, "L": g.L, "values": [float(v) for v in f.flat()]})


def _parse_csv(text: str) -> tuple[GridSpec, list[float]]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FlatWeightsError("empty grid file")
    try:
        n, L = (int(t) for t in lines[0].split(","))
        values = [float(t) for ln in lines[1:] for t in ln.split(",") if t.strip()]
    except ValueError as exc:
        raise FlatWeightsError(f"malformed grid CSV: {exc}") from exc
    return GridSpec(n, L), values


def _parse_json(text: str) -> tuple[GridSpec, list[float]]:
    try:
        obj = json.loads(text)
        return GridSpec(int(obj["n"]), int(obj["L"])), [float(v) for v in obj["values"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FlatWeightsError(f"malformed grid JSON: {exc}") from exc


def loads(text: str, *, weight: bool = True) -> GridFn:
    """Parse either format, detected from the first non-blank character."""
    stripped = text.lstrip()
    grid, values = _parse_json(text) if stripped.startswith("{") else _parse_csv(text)
    if len(values) != grid.size:
        raise SizeMismatch(f"file declares {grid.size} cells but holds {len(values)}")
    cls = Weight if weight else GridFn
    return cls(grid, np.array(values))


def read(path: str | Path, *, weight: bool = True) -> GridFn:
    return loads(Path(path).read_text(), weight=weight)


def write(f: GridFn, path: str | Path) -> None:
    path = Path(path)
    text = dumps_json(f) if path.suffix.lower() == ".json" else dumps_csv(f)
    path.write_text(text)
