"""CSV ingestion of crowdsourcing datasets and lossless instance files.

Dataset layout::

    answers.csv   worker_id,q1,...,qm        (continuous / categorical)
                  worker_id,rank             (rankings, e.g. ``acbd``)
    truth.csv     q1,...,qm   or   rank      (one data row)

Instance files carry ``#``-prefixed header comments (format version,
domain, k, seed) followed by one CSV row per worker and an optional
``truth`` row.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    CATEGORICAL,
    CONTINUOUS,
    DOMAINS,
    RANKING,
    Instance,
    format_ranking,
    parse_ranking_string,
    to_pairwise,
)
from .errors import FormatVersionError, IngestionError, ParseError, ShapeError

log = logging.getLogger(__name__)

FORMAT_NAME = "proxytd-instance"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class DatasetFile:
    domain: str
    answers: np.ndarray
    truth: Optional[np.ndarray] = None
    k: Optional[int] = None
    worker_ids: tuple = ()
    dropped: int = 0
    questions: tuple = field(default=(), compare=False)

    @property
    def n(self):
        return self.answers.shape[0]

    @property
    def m(self):
        return self.answers.shape[1]

    def to_instance(self) -> Instance:
        if self.domain == RANKING:
            return Instance(RANKING, to_pairwise(self.answers), self.truth,
                            rankings=self.answers)
        return Instance(self.domain, self.answers, self.truth, k=self.k)


def _data_lines(fh):
    """Yield ``(line_number, row)`` for non-comment, non-blank CSV rows."""
    for lineno, line in enumerate(fh, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, next(csv.reader([line]))


def _parse_cell(text, domain, lineno):
    text = text.strip()
    try:
        if domain == CONTINUOUS:
            value = float(text)
            if not np.isfinite(value):
                raise ValueError
            return value
        if domain == CATEGORICAL:
            value = int(text)
            if value < 0:
                raise ValueError
            return value
        return parse_ranking_string(text)
    except (ValueError, ShapeError):
        raise ParseError(f"cannot parse {text!r} as a {domain} answer", lineno) from None


def _read_table(path, domain):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(_data_lines(fh))
    if not rows:
        raise IngestionError(f"{path}: no header row")
    (hline, header), body = rows[0], rows[1:]
    return hline, [h.strip() for h in header], body


def load_dataset(path, domain: str, truth_path=None, k: Optional[int] = None) -> DatasetFile:
    """Read an answers table (and its truth row) into a validated dataset.

    Workers with an empty cell are dropped and the count is logged.
    When ``truth_path`` is None a sibling ``truth.csv`` is used if present.
    """
    if domain not in DOMAINS:
        raise IngestionError(f"unknown domain {domain!r}")
    path = Path(path)
    hline, header, body = _read_table(path, domain)
    if not header or header[0] != "worker_id" or len(header) < 2:
        raise ParseError("header must start with worker_id followed by answer columns", hline)
    if domain == RANKING and header[1:] != ["rank"]:
        raise ParseError("ranking header must be 'worker_id,rank'", hline)
    width = len(header)
    ids, answers, dropped = [], [], 0
    for lineno, row in body:
        if len(row) != width:
            raise ShapeError(f"line {lineno}: expected {width} cells, got {len(row)}")
        if any(not cell.strip() for cell in row[1:]):
            dropped += 1
            continue
        ids.append(row[0].strip())
        cells = [_parse_cell(c, domain, lineno) for c in row[1:]]
        answers.append(cells[0] if domain == RANKING else cells)
    if dropped:
        log.info("dropped %d worker(s) with missing answers from %s", dropped, path)
    if not answers:
        raise IngestionError(f"{path}: no complete worker rows")
    if domain == RANKING:
        sizes = {len(a) for a in answers}
        if len(sizes) != 1:
            raise ShapeError("all rankings must have the same number of candidates")
        A = np.array(answers, dtype=np.int64)
    else:
        A = np.array(answers, dtype=np.float64 if domain == CONTINUOUS else np.int64)

    if truth_path is None and (path.parent / "truth.csv").exists() and path.name != "truth.csv":
        truth_path = path.parent / "truth.csv"
    truth = None
    if truth_path is not None:
        truth = _load_truth(truth_path, domain)
        expected = (A.shape[1],)
        if truth.shape != expected:
            raise ShapeError(f"truth has shape {truth.shape}, answers need {expected}")

    if domain == CATEGORICAL:
        top = int(max(A.max(), -1 if truth is None else truth.max()))
        if k is None:
            k = max(top + 1, 2)
        elif top >= k:
            raise ShapeError(f"label {top} is outside 0..{k - 1}")
    return DatasetFile(domain, A, truth, k if domain == CATEGORICAL else None,
                       tuple(ids), dropped, tuple(header[1:]))


def _load_truth(path, domain):
    hline, header, body = _read_table(path, domain)
    if len(body) != 1:
        raise ParseError("truth file must contain exactly one data row", hline)
    lineno, row = body[0]
    if len(row) != len(header):
        raise ShapeError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
    cells = [_parse_cell(c, domain, lineno) for c in row]
    if domain == RANKING:
        return cells[0]
    return np.array(cells, dtype=np.float64 if domain == CONTINUOUS else np.int64)


# --------------------------------------------------------------------------
# instance files
# --------------------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def dumps_instance(instance: Instance, seed=None) -> str:
    out = io.StringIO()
    out.write(f"# {FORMAT_NAME} v{FORMAT_VERSION}\n")
    out.write(f"# domain: {instance.domain}\n")
    if instance.k is not None:
        out.write(f"# k: {instance.k}\n")
    if instance.domain == RANKING:
        out.write(f"# c: {instance.n_candidates}\n")
    seed = instance.meta.get("seed") if seed is None else seed
    if seed is not None:
        out.write(f"# seed: {seed}\n")
    for key in sorted(instance.meta):
        if key != "seed":
            out.write(f"# meta.{key}: {instance.meta[key]}\n")
    writer = csv.writer(out, lineterminator="\n")
    ranking = instance.domain == RANKING
    cols = ["role", "worker_id", "fault", "phi"] + (["ranking"] if ranking else [])
    writer.writerow(cols + [f"x{j}" for j in range(instance.m)])
    value = _fmt if instance.domain == CONTINUOUS else (lambda v: str(int(v)))
    for i in range(instance.n):
        row = ["worker", i,
               "" if instance.faults is None else _fmt(instance.faults[i]),
               "" if instance.phis is None else _fmt(instance.phis[i])]
        if ranking:
            row.append("" if instance.rankings is None else format_ranking(instance.rankings[i]))
        writer.writerow(row + [value(v) for v in instance.answers[i]])
    if instance.truth is not None:
        row = ["truth", "", "", ""]
        if ranking:
            row.append(format_ranking(instance.truth))
        writer.writerow(row + [value(v) for v in instance.truth_vector])
    return out.getvalue()


def save_instance(instance: Instance, path, seed=None) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        os.makedirs(path.parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_instance(instance, seed))
    return path


def loads_instance(text: str) -> Instance:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(f"# {FORMAT_NAME} "):
        raise FormatVersionError("not an instance file (missing format header)")
    version = lines[0].split()[-1]
    if version != f"v{FORMAT_VERSION}":
        raise FormatVersionError(f"unsupported instance format {version}; expected v{FORMAT_VERSION}")
    header = {}
    meta = {}
    for line in lines[1:]:
        if not line.startswith("#"):
            break
        key, _, val = line[1:].partition(":")
        key, val = key.strip(), val.strip()
        if key.startswith("meta."):
            meta[key[5:]] = val
        else:
            header[key] = val
    domain = header.get("domain")
    if domain not in DOMAINS:
        raise ParseError(f"unknown domain {domain!r}")
    if "seed" in header:
        meta["seed"] = header["seed"]
    rows = list(_data_lines(io.StringIO(text)))
    cols = rows[0][1]
    start = cols.index("x0") if "x0" in cols else len(cols)
    ranking = domain == RANKING
    answers, faults, phis, orders, truth = [], [], [], [], None
    conv = float if domain == CONTINUOUS else int
    for lineno, row in rows[1:]:
        try:
            values = [conv(v) for v in row[start:]]
        except ValueError:
            raise ParseError("malformed value", lineno) from None
        if row[0] == "worker":
            answers.append(values)
            faults.append(row[2])
            phis.append(row[3])
            if ranking:
                orders.append(row[4])
        elif row[0] == "truth":
            truth = parse_ranking_string(row[4]) if ranking else values
        else:
            raise ParseError(f"unknown row role {row[0]!r}", lineno)

    def column(vals):
        if all(v == "" for v in vals):
            return None
        return [float(v) for v in vals]

    rankings = None
    if ranking and all(orders):
        rankings = [parse_ranking_string(o) for o in orders]
    k = int(header["k"]) if "k" in header else None
    return Instance(domain, answers, truth, k=k, faults=column(faults), phis=column(phis),
                    rankings=rankings, meta=meta)


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return loads_instance(fh.read())


def write_fault_csv(path, estimate, empirical=None):
    """``worker_id, f_hat, estimator, u, T`` plus an optional ``empirical_fault``."""
    fields = ["worker_id", "f_hat", "estimator", "u", "T"]
    if empirical is not None:
        fields.append("empirical_fault")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in estimate.to_rows():
            row["f_hat"] = _fmt(row["f_hat"])
            if empirical is not None:
                row["empirical_fault"] = _fmt(empirical[row["worker_id"]])
            writer.writerow(row)
