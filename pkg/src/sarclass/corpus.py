"""Labeled commit-message datasets: loading, filtering, sampling, partitioning."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)


class Label(str, Enum):
    SAR = "SAR"
    NON_SAR = "NON_SAR"
    INTERNAL_QA = "INTERNAL_QA"
    EXTERNAL_QA = "EXTERNAL_QA"
    CODE_SMELL = "CODE_SMELL"

    def __str__(self) -> str:
        return self.value


class Task(str, Enum):
    BINARY = "binary"
    MULTICLASS = "multiclass"

    @property
    def labels(self) -> tuple[Label, ...]:
        return TASK_LABELS[self]

    @property
    def positive(self) -> Label | None:
        return Label.SAR if self is Task.BINARY else None

    def __str__(self) -> str:
        return self.value


TASK_LABELS = {
    Task.BINARY: (Label.SAR, Label.NON_SAR),
    Task.MULTICLASS: (Label.INTERNAL_QA, Label.EXTERNAL_QA, Label.CODE_SMELL),
}


def task_of(label: Label) -> Task:
    return Task.BINARY if label in TASK_LABELS[Task.BINARY] else Task.MULTICLASS


def parse_label(text: str) -> Label:
    try:
        return Label(text.strip().upper())
    except ValueError:
        raise DataError(f"unknown label {text!r}") from None


@dataclass(frozen=True)
class Commit:
    id: str
    message: str
    label: Label | None = None
    source: str | None = None

    def to_record(self) -> dict:
        rec = {"id": self.id, "message": self.message,
               "label": None if self.label is None else self.label.value}
        if self.source is not None:
            rec["source"] = self.source
        return rec


@dataclass(frozen=True)
class Dataset:
    task: Task | None
    commits: tuple[Commit, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "commits", tuple(self.commits))
        seen = set()
        for c in self.commits:
            if not c.id:
                raise DataError("commit id must be non-empty")
            if c.id in seen:
                raise DataError(f"duplicate id {c.id!r}")
            seen.add(c.id)
            if c.label is not None:
                if self.task is None:
                    raise DataError("labeled commit in a dataset without a task")
                if c.label not in self.task.labels:
                    raise DataError(f"label {c.label} does not belong to task {self.task}")

    def __len__(self) -> int:
        return len(self.commits)

    def __iter__(self):
        return iter(self.commits)

    def __getitem__(self, i):
        return self.commits[i]

    @property
    def messages(self) -> list[str]:
        return [c.message for c in self.commits]

    @property
    def labels(self) -> list[Label | None]:
        return [c.label for c in self.commits]

    def subset(self, indices: Iterable[int]) -> Dataset:
        return Dataset(self.task, tuple(self.commits[i] for i in indices))

    def class_counts(self) -> dict[Label, int]:
        counts = Counter(c.label for c in self.commits if c.label is not None)
        labels = self.task.labels if self.task else ()
        return {lab: counts.get(lab, 0) for lab in labels}

    def to_jsonl(self) -> str:
        lines = [json.dumps({"task": None if self.task is None else self.task.value})]
        lines += [json.dumps(c.to_record(), ensure_ascii=False) for c in self.commits]
        return "\n".join(lines) + "\n"


REJECT_TOO_SHORT = "TOO_SHORT"
REJECT_EMPTY = "EMPTY"
REJECT_DUPLICATE_ID = "DUPLICATE_ID"


@dataclass(frozen=True)
class FilterOutcome:
    kept: Dataset
    rejected: tuple[tuple[Commit, str], ...] = field(default=())

    def report(self) -> dict:
        return {
            "kept": len(self.kept),
            "rejected": [{"id": c.id, "message": c.message, "reason": r} for c, r in self.rejected],
        }


def _infer_task(commits: Sequence[Commit], declared: Task | None) -> Task | None:
    tasks = {task_of(c.label) for c in commits if c.label is not None}
    if len(tasks) > 1:
        raise DataError("mixed task labels")
    if declared is not None:
        if tasks and tasks != {declared}:
            raise DataError(f"labels do not match declared task {declared}")
        return declared
    return tasks.pop() if tasks else None


def _commit_from_record(rec: dict, where: str) -> Commit:
    if not isinstance(rec, dict) or "id" not in rec or "message" not in rec:
        raise DataError(f"{where}: record needs 'id' and 'message'")
    if not isinstance(rec["message"], str):
        raise DataError(f"{where}: message must be a string")
    label = rec.get("label")
    try:
        label = parse_label(label) if label not in (None, "") else None
    except DataError as exc:
        raise DataError(f"{where}: {exc}") from None
    return Commit(str(rec["id"]), rec["message"], label, rec.get("source"))


def _check_ids(commits: Sequence[Commit], where: Sequence[str]) -> None:
    seen = {}
    for c, w in zip(commits, where):
        if c.id in seen:
            raise DataError(f"{w}: duplicate id {c.id!r} (first at {seen[c.id]})")
        seen[c.id] = w


def parse_jsonl(text: str) -> Dataset:
    declared = None
    commits, where = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        if isinstance(rec, dict) and "task" in rec and "id" not in rec:
            if commits or declared is not None:
                raise DataError(f"line {lineno}: task header must be the first record")
            if rec["task"] is not None:
                try:
                    declared = Task(rec["task"])
                except ValueError:
                    raise DataError(f"line {lineno}: unknown task {rec['task']!r}") from None
            continue
        commits.append(_commit_from_record(rec, f"line {lineno}"))
        where.append(f"line {lineno}")
    _check_ids(commits, where)
    return Dataset(_infer_task(commits, declared), tuple(commits))


def parse_csv(text: str) -> Dataset:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return Dataset(None, ())
    missing = {"id", "message"} - set(reader.fieldnames)
    if missing:
        raise DataError(f"CSV header lacks columns {sorted(missing)}")
    commits, where = [], []
    for row in reader:
        w = f"line {reader.line_num}"
        commits.append(_commit_from_record(row, w))
        where.append(w)
    _check_ids(commits, where)
    return Dataset(_infer_task(commits, None), tuple(commits))


def load_dataset(path: str | Path, format: str | None = None) -> Dataset:
    """Read a JSONL (optional ``{"task": ...}`` header line) or CSV dataset."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    fmt = format or ("csv" if path.suffix.lower() == ".csv" else "jsonl")
    text = path.read_text(encoding="utf-8")
    if fmt == "jsonl":
        return parse_jsonl(text)
    if fmt == "csv":
        return parse_csv(text)
    raise DataError(f"unknown dataset format {fmt!r}")


def save_dataset(d: Dataset, path: str | Path) -> None:
    Path(path).write_text(d.to_jsonl(), encoding="utf-8")


def ingest_git_log(stream: str | bytes) -> Dataset:
    """Parse ``git log --pretty=format:%H%x1f%B%x00`` output into an unlabeled dataset."""
    if isinstance(stream, bytes):
        text = stream.decode("utf-8", errors="replace")
        if "�" in text:
            log.warning("git log stream contained non-UTF-8 bytes; replaced")
    else:
        text = stream
    records = text.split("\x00")
    tail = records.pop()
    if tail.strip():
        raise DataError(f"record {len(records) + 1}: truncated (no terminating NUL)")
    commits = []
    for n, rec in enumerate(records, 1):
        rec = rec.lstrip("\n")
        if "\x1f" not in rec:
            raise DataError(f"record {n}: missing field separator")
        sha, message = rec.split("\x1f", 1)
        sha = sha.strip()
        if not sha:
            raise DataError(f"record {n}: empty sha")
        commits.append(Commit(sha, message.strip("\n"), None, sha))
    _check_ids(commits, [f"record {i}" for i in range(1, len(commits) + 1)])
    return Dataset(None, tuple(commits))


def apply_filters(d: Dataset, min_chars: int = 7) -> FilterOutcome:
    if min_chars < 1:
        raise ValueError("min_chars must be >= 1")
    kept, rejected, seen = [], [], set()
    for c in d.commits:
        body = c.message.strip()
        if c.id in seen:
            rejected.append((c, REJECT_DUPLICATE_ID))
        elif not body:
            rejected.append((c, REJECT_EMPTY))
        elif len(body) < min_chars:
            rejected.append((c, REJECT_TOO_SHORT))
        else:
            kept.append(c)
            seen.add(c.id)
    return FilterOutcome(Dataset(d.task, tuple(kept)), tuple(rejected))


def _indices_by_class(d: Dataset) -> dict[Label, list[int]]:
    if d.task is None:
        raise DataError("dataset has no task; cannot stratify")
    groups: dict[Label, list[int]] = {lab: [] for lab in d.task.labels}
    for i, c in enumerate(d.commits):
        if c.label is None:
            raise DataError(f"commit {c.id!r} is unlabeled; cannot stratify")
        groups[c.label].append(i)
    return groups


def stratified_sample(d: Dataset, n_per_class: int, seed: int) -> Dataset:
    """Keep exactly ``n_per_class`` commits of every class, in original order.

    Draws use numpy's PCG64 generator seeded with ``seed``.
    """
    if n_per_class < 0:
        raise ValueError("n_per_class must be >= 0")
    groups = _indices_by_class(d)
    short = {lab: len(ix) for lab, ix in groups.items() if len(ix) < n_per_class}
    if short:
        detail = ", ".join(f"{lab}: {n} available" for lab, n in short.items())
        raise DataError(f"class starvation for n_per_class={n_per_class} ({detail})")
    rng = np.random.default_rng(seed)
    chosen = []
    for lab in d.task.labels:
        ix = np.asarray(groups[lab], dtype=np.int64)
        chosen.extend(rng.choice(ix, size=n_per_class, replace=False).tolist())
    return d.subset(sorted(chosen))


def stratified_kfold(d: Dataset, k: int, seed: int) -> list[list[int]]:
    """Partition indices into ``k`` folds with per-class counts within one of each other.

    Each class is shuffled and dealt round-robin; dealing continues from the fold
    where the previous class stopped so overall fold sizes also stay balanced.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    groups = _indices_by_class(d)
    smallest = min(groups.items(), key=lambda kv: len(kv[1]))
    if len(smallest[1]) < k:
        raise DataError(f"k={k} exceeds size of class {smallest[0]} ({len(smallest[1])})")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for lab in d.task.labels:
        for i in rng.permutation(groups[lab]).tolist():
            folds[pos % k].append(i)
            pos += 1
    return [sorted(f) for f in folds]


def relabel(d: Dataset, labels: Sequence[Label | None]) -> Dataset:
    return Dataset(d.task, tuple(replace(c, label=l) for c, l in zip(d.commits, labels)))
