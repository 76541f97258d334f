# scripts/reports.py
import os, json
from fractions import Fraction

import numpy as np
import pandas as pd

DIR_DATA = "data"
DIR_DOCS = "docs"


def ensure_dirs(*dirs):
    for d in dirs:
        if d:
            os.makedirs(d, exist_ok=True)


def _default(obj):
    """json fallback for numpy scalars, complex numbers and exact phases."""
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, pd.DataFrame):
        return obj.to_dict(orient="records")
    return str(obj)


def dumps(payload) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=2, default=_default)


def export_json(payload, path):
    ensure_dirs(os.path.dirname(path))
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2, default=_default)
        f.write("\n")


def append_jsonl(record, path):
    """One experiment per line, full parameter record included."""
    ensure_dirs(os.path.dirname(path))
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record, ensure_ascii=False, sort_keys=True, default=_default) + "\n")


def read_jsonl(path):
    if not os.path.exists(path):
        return []
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def save_csv(df, path, float_format="%.17g"):
    ensure_dirs(os.path.dirname(path))
    df.to_csv(path, index=False, float_format=float_format)


def group_payload(H, kernel_elems, t0, level):
    return {
        "name": H.label,
        "order": len(H),
        "elements": [str(g) for g in H],
        "kernel": [str(g) for g in kernel_elems],
        "t0": None if t0 is None else str(t0),
        "level_set": [str(g) for g in level],
    }
