"""Deterministic number formatting for CSV/JSON outputs (12 significant digits)."""

import json
import math

import numpy as np

DIGITS = 12


def fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, f".{DIGITS}g")


def round_json(obj):
    """Round every float in a JSON-like tree; non-finite values pass through."""
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, float):
        return float(format(obj, f".{DIGITS}g")) if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: round_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [round_json(v) for v in obj]
    return obj


def dump_json(doc, path):
    with open(path, "w") as fh:
        json.dump(round_json(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
