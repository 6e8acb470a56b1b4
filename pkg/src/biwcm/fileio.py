"""Reading and writing graphs and matrices.

Two input layouts are understood:

* edge list CSV with a ``row,col,weight`` header (``row_label,col_label``
  is accepted too, and a missing weight column means weight 1);
* dense TSV with column labels in the header row and row labels in the
  first column.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import GraphError, Mode, WeightedBipartiteGraph


class ParseError(GraphError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def fmt(v: float) -> str:
    """Format a number with 17 significant digits (integers stay integers)."""
    v = float(v)
    if math.isfinite(v) and v == int(v) and abs(v) < 2**53:
        return str(int(v))
    return f"{v:.17g}"


def detect_format(path, fmt_hint: str | None = None) -> str:
    if fmt_hint:
        if fmt_hint not in ("edgelist", "dense"):
            raise ValueError(f"unknown format {fmt_hint!r}")
        return fmt_hint
    suffix = Path(path).suffix.lower()
    return "dense" if suffix in (".tsv", ".tab", ".txt") else "edgelist"


def _number(path, line, text, what):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(path, line, f"cannot parse {what} {text!r}") from None
    if not math.isfinite(v):
        raise ParseError(path, line, f"{what} {text!r} is not finite")
    return v


def _check_value(path, line, v, mode, cell):
    if v < 0:
        raise ParseError(path, line, f"negative weight {v!r} at {cell}")
    if mode is Mode.DISCRETE and v != round(v):
        raise ParseError(path, line, f"non-integer weight {v!r} at {cell} in discrete mode")


def _parse_edgelist(path, mode):
    rows: dict[str, int] = {}
    cols: dict[str, int] = {}
    triples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(path, 1, "empty file")
        header = [h.strip().lower() for h in header]
        if header[:2] not in (["row", "col"], ["row_label", "col_label"]):
            raise ParseError(path, 1, "expected a 'row,col,weight' header")
        has_weight = len(header) > 2 and header[2] == "weight"
        width = 3 if has_weight else 2
        for rec in reader:
            line = reader.line_num
            if not rec or all(not x.strip() for x in rec):
                continue
            if len(rec) < width:
                raise ParseError(path, line, f"expected {width} fields, got {len(rec)}")
            r, c = rec[0].strip(), rec[1].strip()
            if not r or not c:
                raise ParseError(path, line, "empty label")
            v = _number(path, line, rec[2].strip(), "weight") if has_weight else 1.0
            _check_value(path, line, v, mode, f"({r}, {c})")
            rows.setdefault(r, len(rows))
            cols.setdefault(c, len(cols))
            triples.append((rows[r], cols[c], v))
    w = np.zeros((len(rows), len(cols)))
    for i, a, v in triples:
        w[i, a] += v
    return tuple(rows), tuple(cols), w


def _parse_dense(path, mode):
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None:
            raise ParseError(path, 1, "empty file")
        cols = [h.strip() for h in header[1:]]
        row_labels, data = [], []
        for rec in reader:
            line = reader.line_num
            if not rec or all(not x.strip() for x in rec):
                continue
            if len(rec) != len(cols) + 1:
                raise ParseError(path, line, f"expected {len(cols) + 1} fields, got {len(rec)}")
            r = rec[0].strip()
            vals = []
            for c, text in zip(cols, rec[1:]):
                v = _number(path, line, text.strip(), "weight")
                _check_value(path, line, v, mode, f"({r}, {c})")
                vals.append(v)
            row_labels.append(r)
            data.append(vals)
    if not data:
        raise ParseError(path, 2, "no data rows")
    return tuple(row_labels), tuple(cols), np.array(data)


def read_edgelist(path, mode=Mode.CONTINUOUS) -> WeightedBipartiteGraph:
    mode = Mode(mode)
    return WeightedBipartiteGraph(*_parse_edgelist(path, mode), mode)


def read_dense(path, mode=Mode.CONTINUOUS) -> WeightedBipartiteGraph:
    mode = Mode(mode)
    return WeightedBipartiteGraph(*_parse_dense(path, mode), mode)


def read_matrix(path, fmt_hint: str | None = None):
    """``(row_labels, col_labels, matrix)``; unlike ``read_graph`` an all-zero table is fine."""
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such input file: {path}")
    parse = _parse_dense if detect_format(path, fmt_hint) == "dense" else _parse_edgelist
    return parse(path, Mode.CONTINUOUS)


def read_graph(path, mode=Mode.CONTINUOUS, fmt_hint: str | None = None) -> WeightedBipartiteGraph:
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such input file: {path}")
    if detect_format(path, fmt_hint) == "dense":
        return read_dense(path, mode)
    return read_edgelist(path, mode)


def edgelist_csv(g: WeightedBipartiteGraph) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["row", "col", "weight"])
    for i, a in zip(*np.nonzero(g.weights)):
        out.writerow([g.row_labels[i], g.col_labels[a], fmt(g.weights[i, a])])
    return buf.getvalue()


def dense_tsv(matrix, row_labels, col_labels, corner: str = "") -> str:
    buf = io.StringIO()
    out = csv.writer(buf, delimiter="\t", lineterminator="\n")
    out.writerow([corner, *col_labels])
    for lab, row in zip(row_labels, np.asarray(matrix)):
        out.writerow([lab, *(fmt(v) for v in row)])
    return buf.getvalue()


def write_outputs(out_dir, files: Mapping[str, str]) -> list[Path]:
    """Write all files or none.

    Everything goes to temporary files first and is renamed into place only
    once every file has been written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out, prefix=f".{name}.", suffix=".tmp")
            staged.append((tmp, out / name))
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [final for _, final in staged]
