"""Output records and their JSON / CSV serializations."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Optional

from . import __version__

__all__ = ["OutputRecord", "CSV_HEADER", "emit", "render", "parse_csv", "parse_json"]

CSV_HEADER = ("family", "chart", "params", "alpha", "engine", "quantity", "indices", "value", "reference_value", "abs_err")


@dataclass(frozen=True)
class OutputRecord:
    family: str
    chart: str
    params: dict
    alpha: Optional[float]
    engine: str
    quantity: str
    indices: tuple
    value: float
    reference_value: Optional[float] = None
    abs_err: Optional[float] = field(default=None)
    error: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if self.reference_value is None:
            object.__setattr__(self, "abs_err", None)
        else:
            object.__setattr__(self, "abs_err", abs(self.value - self.reference_value))

    @property
    def failed(self) -> bool:
        return self.error is not None


def _num(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def _params_str(params: dict) -> str:
    return ";".join(f"{k}={_num(v) if isinstance(v, float) else v}" for k, v in params.items())


def _json_num(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return None
    return float(v)


def _record_dict(r: OutputRecord) -> dict:
    d = {
        "family": r.family,
        "chart": r.chart,
        "params": {k: _json_num(v) if isinstance(v, float) else v for k, v in r.params.items()},
        "alpha": _json_num(r.alpha),
        "engine": r.engine,
        "quantity": r.quantity,
        "indices": list(r.indices),
        "value": _json_num(r.value),
        "reference_value": _json_num(r.reference_value),
        "abs_err": _json_num(r.abs_err),
    }
    if r.error is not None:
        d["error"] = r.error
    return d


def render(records: Iterable[OutputRecord], fmt: str, meta: dict | None = None) -> str:
    records = list(records)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(
                [
                    r.family,
                    r.chart,
                    _params_str(r.params),
                    _num(r.alpha),
                    r.engine,
                    r.quantity,
                    ";".join(str(i) for i in r.indices),
                    _num(r.value),
                    _num(r.reference_value),
                    _num(r.abs_err),
                ]
            )
        return buf.getvalue()
    if fmt == "json":
        meta = dict(meta or {})
        meta.setdefault("version", __version__)
        meta.setdefault("timestamp", datetime.now(timezone.utc).isoformat(timespec="seconds"))
        doc = {"meta": meta, "records": [_record_dict(r) for r in records]}
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown output format {fmt!r}")


def emit(records: Iterable[OutputRecord], fmt: str, destination=None, meta: dict | None = None) -> None:
    """Write records to a path, a text stream, or standard output."""
    import sys

    text = render(records, fmt, meta)
    if destination is None:
        sys.stdout.write(text)
    elif hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _parse_value(s: str):
    if s == "":
        return None
    try:
        return float(s)
    except ValueError:
        return s


def parse_csv(text: str) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError("missing or unexpected CSV header")
    out = []
    for row in rows[1:]:
        d = dict(zip(CSV_HEADER, row))
        params = {}
        if d["params"]:
            for item in d["params"].split(";"):
                k, v = item.split("=", 1)
                params[k] = _parse_value(v)
        out.append(
            OutputRecord(
                family=d["family"],
                chart=d["chart"],
                params=params,
                alpha=_parse_value(d["alpha"]),
                engine=d["engine"],
                quantity=d["quantity"],
                indices=tuple(int(i) for i in d["indices"].split(";")) if d["indices"] else (),
                value=float(d["value"]) if d["value"] else math.nan,
                reference_value=_parse_value(d["reference_value"]),
            )
        )
    return out


def parse_json(text: str) -> tuple:
    doc = json.loads(text)
    recs = []
    for d in doc["records"]:
        recs.append(
            OutputRecord(
                family=d["family"],
                chart=d["chart"],
                params=d["params"],
                alpha=d["alpha"],
                engine=d["engine"],
                quantity=d["quantity"],
                indices=tuple(d["indices"]),
                value=math.nan if d["value"] is None else d["value"],
                reference_value=d["reference_value"],
                error=d.get("error"),
            )
        )
    return doc["meta"], recs
