"""Binary container and deterministic JSON/CSV emission.

Every array file is one line of JSON header followed by a newline and the
payload: row-major complex values as little-endian f64 pairs (re, im).
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

MAGIC = "rkha-array@1"


def format_float(x: float) -> str:
    """17 significant digits, so every double round-trips exactly."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _emit(obj: Any, indent: int, level: int, out: list[str]) -> None:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," if indent else ", "
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(sep)
            out.append(pad)
            out.append(json.dumps(str(key), ensure_ascii=False) + ": ")
            _emit(obj[key], indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[")
        for i, item in enumerate(seq):
            if i:
                out.append(sep)
            out.append(pad)
            _emit(item, indent, level + 1, out)
        out.append(end + "]")
    elif isinstance(obj, (complex, np.complexfloating)):
        _emit([obj.real, obj.imag], indent, level, out)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    out: list[str] = []
    _emit(obj, indent, 0, out)
    return "".join(out)


def loads(text: str) -> Any:
    return json.loads(text)


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def write_array(path: str | Path, header: dict, values: np.ndarray) -> None:
    header = dict(header)
    header["format"] = MAGIC
    header["shape"] = list(values.shape)
    payload = np.ascontiguousarray(values, dtype="<c16").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(dumps(header, indent=0).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def read_array(path: str | Path) -> tuple[dict, np.ndarray]:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ValueError(f"{path}: missing JSON header line")
    header = json.loads(raw[:nl].decode("utf-8"))
    if header.get("format") != MAGIC:
        raise ValueError(f"{path}: not an {MAGIC} file")
    shape = tuple(header["shape"])
    values = np.frombuffer(raw[nl + 1:], dtype="<c16")
    expected = int(np.prod(shape)) if shape else 1
    if values.size != expected:
        raise ValueError(f"{path}: payload holds {values.size} values, header says {expected}")
    return header, values.reshape(shape).astype(np.complex128)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()
