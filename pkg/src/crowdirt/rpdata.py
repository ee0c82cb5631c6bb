"""Response-pattern data model, grading and file formats.

Cells are stored as an int8 grid: 1 correct, 0 incorrect, -1 missing.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError, IngestionError, ParseError

log = logging.getLogger(__name__)

MISSING = -1
FORMATS = ("dense-csv", "sparse-jsonl")


def _check_unique(ids, what):
    seen = set()
    for x in ids:
        if x in seen:
            raise DomainError(f"duplicate {what} id {x!r}")
        seen.add(x)


@dataclass(frozen=True, eq=False)
class ResponseMatrix:
    subject_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    cells: np.ndarray

    def __post_init__(self):
        subject_ids = tuple(str(s) for s in self.subject_ids)
        item_ids = tuple(str(i) for i in self.item_ids)
        _check_unique(subject_ids, "subject")
        _check_unique(item_ids, "item")
        cells = np.array(self.cells, dtype=np.int8, copy=True)
        if cells.size == 0:
            cells = cells.reshape(len(subject_ids), len(item_ids))
        if cells.shape != (len(subject_ids), len(item_ids)):
            raise DomainError(
                f"cells shape {cells.shape} does not match "
                f"{len(subject_ids)} subjects x {len(item_ids)} items"
            )
        if not np.isin(cells, (MISSING, 0, 1)).all():
            raise DomainError("cells must be 1 (correct), 0 (incorrect) or -1 (missing)")
        cells.flags.writeable = False
        object.__setattr__(self, "subject_ids", subject_ids)
        object.__setattr__(self, "item_ids", item_ids)
        object.__setattr__(self, "cells", cells)

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def observed(self) -> np.ndarray:
        return self.cells != MISSING

    @property
    def correct(self) -> np.ndarray:
        """Float grid with 1.0 at correct cells and 0.0 elsewhere (missing included)."""
        return (self.cells == 1).astype(np.float64)

    def take(self, subjects=None, items=None) -> "ResponseMatrix":
        """Sub-matrix by positional subject/item indices (order preserved as given)."""
        s = np.arange(self.n_subjects) if subjects is None else np.asarray(subjects, dtype=int)
        i = np.arange(self.n_items) if items is None else np.asarray(items, dtype=int)
        return ResponseMatrix(
            tuple(self.subject_ids[k] for k in s),
            tuple(self.item_ids[k] for k in i),
            self.cells[np.ix_(s, i)],
        )

    def __eq__(self, other):
        if not isinstance(other, ResponseMatrix):
            return NotImplemented
        return (
            self.subject_ids == other.subject_ids
            and self.item_ids == other.item_ids
            and np.array_equal(self.cells, other.cells)
        )

    def __repr__(self):
        n_obs = int(self.observed.sum())
        return f"ResponseMatrix({self.n_subjects} subjects x {self.n_items} items, {n_obs} observed)"


@dataclass(frozen=True)
class LabeledOutputs:
    """Raw per-subject predictions plus the gold label of every item.

    ``predictions`` maps ``(subject_id, item_id)`` to a label token; a value of
    ``None`` marks an explicitly missing prediction.
    """

    item_ids: tuple[str, ...]
    gold_labels: Mapping[str, str]
    predictions: Mapping[tuple[str, str], str | None] = field(default_factory=dict)


def grade(raw: LabeledOutputs) -> ResponseMatrix:
    """Grade predictions against gold labels.

    A cell is correct iff the whitespace-trimmed prediction equals the trimmed
    gold token. Subjects are ordered lexicographically so the result does not
    depend on the order predictions were recorded in.
    """
    item_ids = tuple(raw.item_ids)
    _check_unique(item_ids, "item")
    col = {item: k for k, item in enumerate(item_ids)}
    for item in item_ids:
        if item not in raw.gold_labels:
            raise IngestionError(f"no gold label for item {item!r}")
    for subject, item in raw.predictions:
        if item not in col:
            raise IngestionError(f"prediction for unknown item id {item!r} (subject {subject!r})")
    subjects = sorted({s for s, _ in raw.predictions})
    row = {s: k for k, s in enumerate(subjects)}
    cells = np.full((len(subjects), len(item_ids)), MISSING, dtype=np.int8)
    gold = {item: str(raw.gold_labels[item]).strip() for item in item_ids}
    for (subject, item), label in raw.predictions.items():
        if label is None:
            continue
        cells[row[subject], col[item]] = 1 if str(label).strip() == gold[item] else 0
    return ResponseMatrix(tuple(subjects), item_ids, cells)


def prune(m: ResponseMatrix) -> ResponseMatrix:
    """Drop subjects and items without any observed cell, to a fixed point.

    Items and subjects that are all-correct or all-incorrect are kept and only
    logged; the estimators shrink them through their priors.
    """
    subjects = np.arange(m.n_subjects)
    items = np.arange(m.n_items)
    obs = m.observed
    while True:
        sub = obs[np.ix_(subjects, items)]
        keep_s = sub.any(axis=1)
        keep_i = sub.any(axis=0)
        if keep_s.all() and keep_i.all():
            break
        subjects = subjects[keep_s]
        items = items[keep_i]
        if subjects.size == 0 or items.size == 0:
            raise DomainError("matrix fully pruned")
    if subjects.size == 0 or items.size == 0:
        raise DomainError("matrix fully pruned")
    out = m if (subjects.size == m.n_subjects and items.size == m.n_items) else m.take(subjects, items)
    extremes = extreme_responders(out)
    for kind, ids in extremes.items():
        if ids:
            log.info("%d %s retained (shrunk by priors)", len(ids), kind.replace("_", " "))
    return out


def extreme_responders(m: ResponseMatrix) -> dict[str, list[str]]:
    """Ids of subjects/items whose observed cells are all correct or all incorrect."""
    obs = m.observed
    ok = m.cells == 1
    n_obs_s, n_ok_s = obs.sum(axis=1), ok.sum(axis=1)
    n_obs_i, n_ok_i = obs.sum(axis=0), ok.sum(axis=0)
    return {
        "all_correct_subjects": [m.subject_ids[k] for k in np.flatnonzero((n_obs_s > 0) & (n_ok_s == n_obs_s))],
        "all_incorrect_subjects": [m.subject_ids[k] for k in np.flatnonzero((n_obs_s > 0) & (n_ok_s == 0))],
        "all_correct_items": [m.item_ids[k] for k in np.flatnonzero((n_obs_i > 0) & (n_ok_i == n_obs_i))],
        "all_incorrect_items": [m.item_ids[k] for k in np.flatnonzero((n_obs_i > 0) & (n_ok_i == 0))],
    }


def is_pruned(m: ResponseMatrix) -> bool:
    obs = m.observed
    return m.n_subjects > 0 and m.n_items > 0 and bool(obs.any(axis=1).all() and obs.any(axis=0).all())


# --- file formats -----------------------------------------------------------

_TOKENS = {"0": 0, "1": 1, "NA": MISSING}
_TOKEN_OUT = {0: "0", 1: "1", MISSING: "NA"}


def _data_lines(text: str):
    """Yield (line_number, line) skipping '#' header comments and blank lines."""
    for n, line in enumerate(text.split("\n"), start=1):
        if line.endswith("\r"):
            line = line[:-1]
        if not line.strip() or line.startswith("#"):
            continue
        yield n, line


def _parse_dense(text: str, path) -> ResponseMatrix:
    lines = _data_lines(text)
    try:
        n, header = next(lines)
    except StopIteration:
        raise ParseError("no subjects", path=path) from None
    head = header.split(",")
    if head[0] != "subject_id":
        raise ParseError("header must start with 'subject_id'", line=n, path=path)
    item_ids = head[1:]
    seen_items = set()
    for item in item_ids:
        if item in seen_items:
            raise ParseError(f"duplicate item id {item!r}", line=n, path=path)
        seen_items.add(item)
    subject_ids, rows, seen = [], [], set()
    for n, line in lines:
        parts = line.split(",")
        if len(parts) != len(item_ids) + 1:
            raise ParseError(
                f"row has {len(parts) - 1} cells, expected {len(item_ids)}", line=n, path=path
            )
        sid = parts[0]
        if sid in seen:
            raise ParseError(f"duplicate subject id {sid!r}", line=n, path=path)
        seen.add(sid)
        try:
            rows.append([_TOKENS[t] for t in parts[1:]])
        except KeyError as e:
            raise ParseError(f"invalid cell token {e.args[0]!r} (expected 0, 1 or NA)", line=n, path=path) from None
        subject_ids.append(sid)
    if not subject_ids:
        raise ParseError("no subjects", path=path)
    cells = np.array(rows, dtype=np.int8).reshape(len(subject_ids), len(item_ids))
    return ResponseMatrix(tuple(subject_ids), tuple(item_ids), cells)


def _parse_sparse(text: str, path) -> ResponseMatrix:
    subjects: dict[str, int] = {}
    items: dict[str, int] = {}
    records = []
    seen = set()
    for n, line in _data_lines(text):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON ({e.msg})", line=n, path=path) from None
        if not isinstance(rec, dict) or not {"subject", "item", "correct"} <= rec.keys():
            raise ParseError("record needs 'subject', 'item' and 'correct'", line=n, path=path)
        s, i, c = str(rec["subject"]), str(rec["item"]), rec["correct"]
        if c is not None and not isinstance(c, bool):
            raise ParseError(f"'correct' must be true, false or null, got {c!r}", line=n, path=path)
        if (s, i) in seen:
            raise ParseError(f"duplicate cell ({s!r}, {i!r})", line=n, path=path)
        seen.add((s, i))
        subjects.setdefault(s, len(subjects))
        items.setdefault(i, len(items))
        records.append((subjects[s], items[i], c))
    if not subjects:
        raise ParseError("no subjects", path=path)
    cells = np.full((len(subjects), len(items)), MISSING, dtype=np.int8)
    for r, k, c in records:
        if c is not None:
            cells[r, k] = int(c)
    return ResponseMatrix(tuple(subjects), tuple(items), cells)


def load_matrix(path: str | PathLike, format: str = "dense-csv") -> ResponseMatrix:
    """Read a response matrix, preserving file order of subjects and items.

    Lines starting with ``#`` are treated as header comments and skipped.
    """
    if format not in FORMATS:
        raise DomainError(f"unknown matrix format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DomainError(f"no such file: {path}") from None
    if format == "dense-csv":
        return _parse_dense(text, path)
    return _parse_sparse(text, path)


def format_dense(m: ResponseMatrix) -> str:
    out = ["subject_id," + ",".join(m.item_ids)]
    for sid, row in zip(m.subject_ids, m.cells):
        out.append(sid + "," + ",".join(_TOKEN_OUT[int(c)] for c in row))
    return "\n".join(out) + "\n"


def _sparse_order(m: ResponseMatrix) -> Iterable[tuple[int, int]]:
    # A leading diagonal of cells introduces subjects and items in their
    # original order; explicit nulls stand in for missing diagonal cells.
    J, I = m.shape
    lead = [(min(k, J - 1), min(k, I - 1)) for k in range(max(J, I))]
    yield from lead
    taken = set(lead)
    for r in range(J):
        for c in range(I):
            if (r, c) not in taken and m.cells[r, c] != MISSING:
                yield r, c


def format_sparse(m: ResponseMatrix) -> str:
    lines = []
    for r, c in _sparse_order(m):
        v = int(m.cells[r, c])
        rec = {"subject": m.subject_ids[r], "item": m.item_ids[c], "correct": None if v == MISSING else bool(v)}
        lines.append(json.dumps(rec, ensure_ascii=False))
    return "\n".join(lines) + "\n"


def format_matrix(m: ResponseMatrix, format: str = "dense-csv") -> str:
    if format == "dense-csv":
        return format_dense(m)
    if format == "sparse-jsonl":
        return format_sparse(m)
    raise DomainError(f"unknown matrix format {format!r}; expected one of {FORMATS}")


def save_matrix(m: ResponseMatrix, path: str | PathLike, format: str = "dense-csv", header: str = "") -> None:
    from .params import atomic_write

    atomic_write(path, header + format_matrix(m, format))


def load_labeled_outputs(predictions_path, gold_path) -> LabeledOutputs:
    """Read predictions JSONL (subject, item, label) and gold JSONL (item, gold)."""
    gold: dict[str, str] = {}
    item_ids = []
    for n, line in _data_lines(Path(gold_path).read_text(encoding="utf-8")):
        try:
            rec = json.loads(line)
            item, token = str(rec["item"]), rec["gold"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ParseError("gold record needs 'item' and 'gold'", line=n, path=gold_path) from None
        if item in gold:
            raise ParseError(f"duplicate gold label for item {item!r}", line=n, path=gold_path)
        gold[item] = str(token)
        item_ids.append(item)
    preds: dict[tuple[str, str], str | None] = {}
    for n, line in _data_lines(Path(predictions_path).read_text(encoding="utf-8")):
        try:
            rec = json.loads(line)
            key, token = (str(rec["subject"]), str(rec["item"])), rec["label"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ParseError("prediction record needs 'subject', 'item' and 'label'", line=n, path=predictions_path) from None
        if key in preds:
            raise ParseError(f"duplicate prediction for subject {key[0]!r}, item {key[1]!r}", line=n, path=predictions_path)
        if key[1] not in gold:
            raise IngestionError(f"{predictions_path}:{n}: unknown item id {key[1]!r}")
        preds[key] = None if token is None else str(token)
    return LabeledOutputs(tuple(item_ids), gold, preds)
