"""Domain model for digitizer handwriting studies.

A study is a set of participants (two cohorts, AD and HC) and one recording
per (participant, task). A recording is the raw pen time series: timestamp,
x/y position in tablet units, and tip pressure, sampled while the pen is on
the sheet or hovering within the tablet's sensing range. Six copy tasks are
fixed, two per word category (regular word, non-regular word, non-word).

File formats
------------
Recording CSV  : header ``t_ms,x,y,pressure[,status]``, one row per sample,
                 ``status`` in {air, paper} when present, else derived from
                 pressure. One file per (participant, task), named
                 ``<participant_id>_task<k>.csv``.
Participant CSV: header ``id,cohort,sex,age,work,education`` with cohort in
                 {AD, HC}, sex in {F, M}, work in {intellectual, manual}.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError


class Cohort(str, Enum):
    AD = "AD"
    HC = "HC"


class TraitKind(str, Enum):
    ON_PAPER = "OnPaper"
    IN_AIR = "InAir"


#: task id -> (category, word); the six copy tasks are fixed by protocol.
TASKS = {
    1: ("RW", "pane"),
    2: ("RW", "mela"),
    3: ("NRW", "prosciutto"),
    4: ("NRW", "ciliegia"),
    5: ("NW", "taganaccio"),
    6: ("NW", "lonfo"),
}

#: category -> (task id, task id), in task order.
CATEGORIES = {
    "RW": (1, 2),
    "NRW": (3, 4),
    "NW": (5, 6),
}


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    category: str
    word: str

    def __post_init__(self):
        expected = TASKS.get(self.task_id)
        if expected is None:
            raise ValidationError(f"task_id must be 1..6, got {self.task_id}")
        if (self.category, self.word) != expected:
            raise ValidationError(
                f"task {self.task_id} is {expected}, got ({self.category!r}, {self.word!r})"
            )

    @classmethod
    def for_task(cls, task_id: int) -> "TaskSpec":
        category, word = TASKS[task_id]
        return cls(task_id, category, word)


@dataclass(frozen=True)
class Participant:
    id: str
    cohort: Cohort
    sex: str  # 'F' | 'M'
    age: int
    work: str  # 'intellectual' | 'manual'
    education: int  # years

    def __post_init__(self):
        if self.sex not in ("F", "M"):
            raise ValidationError(f"sex must be F or M, got {self.sex!r}")
        if self.work not in ("intellectual", "manual"):
            raise ValidationError(f"work must be intellectual or manual, got {self.work!r}")
        if self.age <= 0:
            raise ValidationError(f"age must be positive, got {self.age}")
        if self.education < 0:
            raise ValidationError(f"education must be >= 0, got {self.education}")


@dataclass(frozen=True)
class PenSample:
    t: float  # milliseconds
    x: float
    y: float
    pressure: float
    status: TraitKind


class Recording:
    """A validated pen time series for one (participant, task).

    Samples are stored as column arrays; ``status`` is True where the pen
    is on paper. Timestamps are real milliseconds and strictly increasing.
    """

    def __init__(self, participant_id, task_id, t, x, y, pressure,
                 status=None, nominal_rate=200.0, pressure_epsilon=0.0):
        self.participant_id = str(participant_id)
        self.task_id = int(task_id)
        self.nominal_rate = float(nominal_rate)
        self.t = np.asarray(t, dtype=float)
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.pressure = np.asarray(pressure, dtype=float)
        if status is None:
            # devices report zero pressure while hovering; epsilon accommodates
            # hardware that leaks small nonzero values in air
            self.status = self.pressure > pressure_epsilon
        else:
            self.status = np.asarray(status, dtype=bool)
        self._validate()

    def _validate(self):
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.pressure) == len(self.status) == n):
            raise ValidationError("sample columns have inconsistent lengths")
        if n < 2:
            raise ValidationError(f"recording needs at least 2 samples, got {n}")
        if np.any(self.t < 0):
            raise ValidationError("negative timestamp")
        if np.any(np.diff(self.t) <= 0):
            i = int(np.argmax(np.diff(self.t) <= 0))
            raise ValidationError(
                f"non-monotone timestamp at sample {i + 1} "
                f"(t={self.t[i + 1]:g} after t={self.t[i]:g})"
            )
        if np.any(self.pressure < 0):
            raise ValidationError("negative pressure")
        if not self.status.any():
            raise ValidationError("recording has no on-paper sample")

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (
            self.participant_id == other.participant_id
            and self.task_id == other.task_id
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.pressure, other.pressure)
            and np.array_equal(self.status, other.status)
        )

    @property
    def samples(self) -> list[PenSample]:
        kinds = [TraitKind.ON_PAPER if s else TraitKind.IN_AIR for s in self.status]
        return [
            PenSample(float(t), float(x), float(y), float(p), k)
            for t, x, y, p, k in zip(self.t, self.x, self.y, self.pressure, kinds)
        ]


STATUS_LABELS = {TraitKind.ON_PAPER: "paper", TraitKind.IN_AIR: "air"}
_LABEL_STATUS = {"paper": True, "air": False}


def load_recording(path, participant_id=None, task_id=None,
                   nominal_rate=200.0, pressure_epsilon=0.0) -> Recording:
    """Load one recording CSV.

    ``participant_id`` / ``task_id`` default to parsing the
    ``<participant_id>_task<k>.csv`` filename convention. When the optional
    ``status`` column is absent, on-paper status is derived from
    ``pressure > pressure_epsilon``.
    """
    path = Path(path)
    if participant_id is None or task_id is None:
        stem = path.stem
        if "_task" not in stem:
            raise ParseError(f"{path.name}: cannot infer participant/task from filename")
        pid, _, tk = stem.rpartition("_task")
        try:
            task_id = int(tk)
        except ValueError:
            raise ParseError(f"{path.name}: bad task number {tk!r}") from None
        participant_id = pid

    t, x, y, pressure, status = [], [], [], [], []
    have_status = False
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path.name}: empty file") from None
        header = [h.strip() for h in header]
        if header[:4] != ["t_ms", "x", "y", "pressure"]:
            raise ParseError(f"{path.name}: bad header {header!r}")
        have_status = len(header) == 5 and header[4] == "status"
        if len(header) > 4 and not have_status:
            raise ParseError(f"{path.name}: bad header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path.name}: line {lineno}: expected "
                                 f"{len(header)} fields, got {len(row)}")
            try:
                t.append(float(row[0]))
                x.append(float(row[1]))
                y.append(float(row[2]))
                pressure.append(float(row[3]))
            except ValueError as exc:
                raise ParseError(f"{path.name}: line {lineno}: {exc}") from None
            if have_status:
                label = row[4].strip()
                if label not in _LABEL_STATUS:
                    raise ParseError(f"{path.name}: line {lineno}: "
                                     f"status must be air or paper, got {label!r}")
                status.append(_LABEL_STATUS[label])
    if not t:
        raise ValidationError(f"{path.name}: no samples")
    try:
        return Recording(
            participant_id, task_id, t, x, y, pressure,
            status=status if have_status else None,
            nominal_rate=nominal_rate, pressure_epsilon=pressure_epsilon,
        )
    except ValidationError as exc:
        raise ValidationError(f"{path.name}: {exc}") from None


def write_recording(recording: Recording, path) -> None:
    """Write a recording in the canonical CSV format (always with status)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t_ms", "x", "y", "pressure", "status"])
        for i in range(len(recording)):
            writer.writerow([
                repr(float(recording.t[i])),
                repr(float(recording.x[i])),
                repr(float(recording.y[i])),
                repr(float(recording.pressure[i])),
                "paper" if recording.status[i] else "air",
            ])


def recording_filename(participant_id: str, task_id: int) -> str:
    return f"{participant_id}_task{task_id}.csv"


def load_participants(path) -> list[Participant]:
    path = Path(path)
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path.name}: empty file") from None
        if [h.strip() for h in header] != ["id", "cohort", "sex", "age", "work", "education"]:
            raise ParseError(f"{path.name}: bad header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise ParseError(f"{path.name}: line {lineno}: expected 6 fields, got {len(row)}")
            try:
                out.append(Participant(
                    id=row[0].strip(),
                    cohort=Cohort(row[1].strip()),
                    sex=row[2].strip(),
                    age=int(row[3]),
                    work=row[4].strip(),
                    education=int(row[5]),
                ))
            except (ValueError, ValidationError) as exc:
                raise ParseError(f"{path.name}: line {lineno}: {exc}") from None
    return out


def write_participants(participants: Iterable[Participant], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "cohort", "sex", "age", "work", "education"])
        for p in participants:
            writer.writerow([p.id, p.cohort.value, p.sex, p.age, p.work, p.education])


@dataclass
class ValidationReport:
    """Outcome of cross-checking recordings against participant metadata."""

    issues: list[tuple[str, str]] = field(default_factory=list)  # (kind, detail)
    cohort_counts: dict[str, int] = field(default_factory=dict)
    n_recordings: int = 0

    @property
    def ok(self) -> bool:
        return not self.issues

    def describe(self) -> str:
        lines = [f"recordings: {self.n_recordings}",
                 "cohorts: " + ", ".join(f"{k}={v}" for k, v in sorted(self.cohort_counts.items()))]
        if self.issues:
            lines.append(f"issues ({len(self.issues)}):")
            lines += [f"  [{kind}] {detail}" for kind, detail in self.issues]
        else:
            lines.append("issues: none")
        return "\n".join(lines)


def validate_study(recordings: Sequence[Recording],
                   participants: Sequence[Participant]) -> ValidationReport:
    """Report dangling participant references, duplicate (participant, task)
    pairs, and per-cohort participant counts. Order-insensitive."""
    report = ValidationReport(n_recordings=len(recordings))
    known = {p.id for p in participants}
    if len(known) != len(list(participants)):
        seen = set()
        for p in participants:
            if p.id in seen:
                report.issues.append(("duplicate", f"participant id {p.id!r} repeated"))
            seen.add(p.id)
    for cohort in Cohort:
        report.cohort_counts[cohort.value] = sum(1 for p in participants if p.cohort is cohort)
    pairs = {}
    for r in recordings:
        if r.participant_id not in known:
            report.issues.append(
                ("dangling reference",
                 f"recording ({r.participant_id!r}, task {r.task_id}) references unknown participant"))
        key = (r.participant_id, r.task_id)
        pairs[key] = pairs.get(key, 0) + 1
    for (pid, task_id), count in pairs.items():
        if count > 1:
            report.issues.append(
                ("duplicate", f"({pid!r}, task {task_id}) appears {count} times"))
    report.issues.sort()
    return report


def load_study(study_dir) -> tuple[list[Participant], list[Recording]]:
    """Load ``participants.csv`` plus every ``*_task<k>.csv`` under a directory."""
    study_dir = Path(study_dir)
    participants = load_participants(study_dir / "participants.csv")
    recordings = []
    for path in sorted(study_dir.glob("*_task*.csv")):
        recordings.append(load_recording(path))
    return participants, recordings
