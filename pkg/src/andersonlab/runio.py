"""Deterministic run artifacts: manifests, CSV/JSON writers.

Reports must reproduce byte-for-byte under fixed configuration, so floats are
serialized with repr (shortest round-trip form), JSON keys are sorted, and no
wall-clock information enters any artifact.
"""

import csv
import json
import os
from pathlib import Path

import numpy as np

from . import __version__


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    return obj


def write_json(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(_clean(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def write_csv(rows, fieldnames, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_format(row[k]) for k in fieldnames])
    os.replace(tmp, path)


def _format(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def manifest(command: str, config: dict) -> dict:
    return {
        "command": command,
        "config": _clean(config),
        "versions": {"andersonlab": __version__, "numpy": np.__version__},
    }


def write_manifest(command: str, config: dict, outdir) -> dict:
    m = manifest(command, config)
    write_json(m, Path(outdir) / "manifest.json")
    return m


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("ANDERSONLAB_THREADS", "1")))
    except ValueError:
        return 1
