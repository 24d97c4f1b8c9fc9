"""Output locations and deterministic CSV/JSON writers."""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .. import __version__

OUTPUT_ENV = "DYNMANIFOLD_OUTPUT_DIR"


def output_dir(override=None) -> Path:
    """``override``, else ``$DYNMANIFOLD_OUTPUT_DIR``, else ``./output``."""
    path = Path(override or os.environ.get(OUTPUT_ENV) or "output")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return "" if v is None else str(v)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path, doc: dict) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def write_table(path, header, rows, sidecar: dict | None = None) -> list[Path]:
    """Write ``rows`` as CSV (floats in round-trip ``repr`` form) plus ``<path>.json``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    side = write_json(str(path) + ".json", sidecar_doc(sidecar))
    return [path, side]


def sidecar_doc(extra: dict | None) -> dict:
    doc = {"package": "dynmanifold", "version": __version__}
    doc.update(extra or {})
    return doc
