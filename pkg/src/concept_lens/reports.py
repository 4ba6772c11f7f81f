"""CSV/JSON emission of diagnostic results.

All files are UTF-8 with LF line endings, '.' decimals, ',' separators and
repr-formatted floats, so reruns produce byte-identical output.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .dataset import _atomic_write_bytes
from .diagnostics import ClusteredCoords, JsMatrix, SeparabilityReport


def _write_text(path, text: str) -> None:
    _atomic_write_bytes(Path(path), text.encode("utf-8"))


def write_json(path, payload) -> None:
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def coords_to_csv(cc: ClusteredCoords, path) -> None:
    header = ["content", "style", "replicate"] + [f"c{i + 1}" for i in range(cc.k)]
    rows = [header]
    for i in range(cc.n):
        rows.append([cc.contents[i], cc.styles[i], cc.replicates[i]]
                    + [repr(float(x)) for x in cc.coords[i]])
    _write_text(path, _csv_text(rows))


def js_to_csv(matrix: JsMatrix, path) -> None:
    rows = [["style"] + matrix.labels]
    for i, label in enumerate(matrix.labels):
        rows.append([label] + [repr(float(x)) for x in matrix.values[i]])
    _write_text(path, _csv_text(rows))


def js_to_json(matrix: JsMatrix, path) -> None:
    write_json(path, {
        "labels": matrix.labels,
        "values": [[float(x) for x in row] for row in matrix.values],
        "bins": matrix.bins,
        "smoothing": matrix.smoothing,
    })


def separability_to_json(report: SeparabilityReport, path) -> None:
    write_json(path, report.to_dict())


def nearest_to_json(nearest: dict[str, tuple[str, float]], path) -> None:
    write_json(path, {style: {"nearest": other, "distance": dist}
                      for style, (other, dist) in nearest.items()})


def rank_table_to_json(ranked: list[tuple[str, SeparabilityReport]], path) -> None:
    write_json(path, [
        {"rank": i + 1, "template": template, **report.to_dict()}
        for i, (template, report) in enumerate(ranked)
    ])
