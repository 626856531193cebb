"""Report serialization: canonical JSON and per-case CSV."""
from __future__ import annotations

import csv
import json
import math

TIMING_FIELDS = ("wall_ms",)


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else ("inf" if obj > 0 else "-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return _clean(obj.item())
    return obj


def to_json(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=1, allow_nan=False) + "\n"


def canonical_bytes(report: dict) -> bytes:
    """JSON bytes without timing fields; equal for equal (config, seed)."""
    body = {k: v for k, v in report.items() if k not in TIMING_FIELDS}
    return to_json(body).encode()


def write_json(report: dict, path) -> None:
    with open(path, "w") as fh:
        fh.write(to_json(report))


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_csv(report: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["case_id", "lhs", "rhs", "ratio"])
        for i, c in enumerate(report.get("cases", [])):
            cid = c.get("inputs", {}).get("case", i)
            wr.writerow([cid, _clean(c.get("lhs")), _clean(c.get("rhs")), _clean(c.get("ratio"))])
