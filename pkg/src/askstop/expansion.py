"""Person-period expansion of question timelines into asker visit rows.

The asker is assumed to check the question every ``interval_hours`` after
each answer arrives.  Every check that does not close the question becomes a
row with ``closed = 0``; the closure itself becomes the final row of the
question with ``closed = 1`` at the exact close time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .eventlog import EventLog, QuestionRecord

# grid visits closer than this to the next event collapse onto it
SNAP_HOURS = 1e-6

OBS_COLUMNS = ("question_id", "n", "l", "w", "closed")


@dataclass(frozen=True)
class VisitObservation:
    question_id: str
    n: int
    l: float
    w: float
    closed: int


@dataclass
class VisitTable:
    """Column-oriented visit rows, in question-then-time order."""

    question_ids: list[str]
    qindex: np.ndarray
    n: np.ndarray
    l: np.ndarray
    w: np.ndarray
    closed: np.ndarray

    def __len__(self) -> int:
        return len(self.n)

    def __iter__(self) -> Iterator[VisitObservation]:
        for q, n, l, w, c in zip(self.qindex, self.n, self.l, self.w, self.closed):
            yield VisitObservation(self.question_ids[q], int(n), float(l), float(w), int(c))

    def to_list(self) -> list[VisitObservation]:
        return list(self)


def grid_visit_counts(gaps: np.ndarray, interval_hours: float) -> np.ndarray:
    """Number of j >= 1 with ``j * interval`` strictly before each gap (after snapping)."""
    gaps = np.asarray(gaps, dtype=float)
    limit = gaps - SNAP_HOURS
    m = np.maximum(np.ceil(limit / interval_hours) - 1, 0).astype(np.int64)
    # ceil() on a rounded quotient can be off by one either way
    while True:
        up = (m + 1) * interval_hours < limit
        if not up.any():
            break
        m[up] += 1
    while True:
        down = (m > 0) & (m * interval_hours >= limit)
        if not down.any():
            break
        m[down] -= 1
    return m


def _timeline_arrays(record: QuestionRecord):
    close = record.close_offset_hours
    a = np.array([x for x in record.answer_offsets_hours if x <= close])
    prev = np.concatenate(([0.0], a[:-1]))
    nxt = np.concatenate((a[1:], [close]))
    return a - prev, nxt - a


def grid_close_steps(gaps: np.ndarray, interval_hours: float) -> np.ndarray:
    """Index j >= 1 of the first grid visit at or after each closure."""
    j = np.maximum(np.ceil((np.asarray(gaps, dtype=float) - SNAP_HOURS) / interval_hours), 1).astype(np.int64)
    low = (j > 1) & ((j - 1) * interval_hours >= gaps - SNAP_HOURS)
    j[low] -= 1
    return j


def expand_table(
    event_log: EventLog | Sequence[QuestionRecord],
    interval_hours: float = 1.0,
    close_rule: str = "exact",
) -> VisitTable:
    """Column-oriented version of :func:`expand_visits`.

    ``close_rule="exact"`` keeps the closing row at the recorded close time.
    ``close_rule="grid"`` moves it to the first grid visit at or after the
    close time, so every row of a question lies on the visit grid.
    """
    if not interval_hours > 0:
        raise ValueError("interval_hours must be positive")
    if close_rule not in ("exact", "grid"):
        raise ValueError(f"unknown close_rule {close_rule!r}")
    records = event_log.records if isinstance(event_log, EventLog) else list(event_log)
    ids = [r.question_id for r in records]
    if not records:
        empty_f = np.empty(0)
        empty_i = np.empty(0, dtype=np.int64)
        return VisitTable(ids, empty_i, empty_i, empty_f, empty_f, empty_i)

    ls, gs, ks = [], [], []
    for rec in records:
        l, g = _timeline_arrays(rec)
        ls.append(l)
        gs.append(g)
        ks.append(len(l))
    l_all = np.concatenate(ls)
    g_all = np.concatenate(gs)
    counts = np.array(ks)
    q_all = np.repeat(np.arange(len(records)), counts)
    starts = np.cumsum(counts) - counts
    n_all = np.arange(len(l_all)) - np.repeat(starts, counts) + 1

    m = grid_visit_counts(g_all, interval_hours)
    last = starts + counts - 1
    close_w = g_all[last]
    if close_rule == "grid":
        jc = grid_close_steps(close_w, interval_hours)
        m[last] = jc - 1
        close_w = jc * interval_hours
    total = int(m.sum())
    src = np.repeat(np.arange(len(m)), m)
    j = np.arange(total) - np.repeat(np.cumsum(m) - m, m) + 1

    q = np.concatenate((q_all[src], q_all[last]))
    n = np.concatenate((n_all[src], n_all[last]))
    l = np.concatenate((l_all[src], l_all[last]))
    w = np.concatenate((j * interval_hours, close_w))
    closed = np.concatenate((np.zeros(total, dtype=np.int64), np.ones(len(records), dtype=np.int64)))

    order = np.lexsort((closed, n, q))
    return VisitTable(ids, q[order], n[order], l[order], w[order], closed[order])


def expand_visits(
    event_log: EventLog | Sequence[QuestionRecord], interval_hours: float = 1.0, close_rule: str = "exact"
) -> list[VisitObservation]:
    """Expand every question into its chronologically ordered visit observations."""
    return expand_table(event_log, interval_hours, close_rule).to_list()


def design_matrix(observations: VisitTable | Sequence[VisitObservation]) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``[1, n, l, w]`` and the closed indicator, in input order."""
    if isinstance(observations, VisitTable):
        if len(observations) == 0:
            raise ValueError("no observations")
        n, l, w, y = observations.n, observations.l, observations.w, observations.closed
    else:
        if len(observations) == 0:
            raise ValueError("no observations")
        n = np.array([o.n for o in observations], dtype=float)
        l = np.array([o.l for o in observations], dtype=float)
        w = np.array([o.w for o in observations], dtype=float)
        y = np.array([o.closed for o in observations])
    X = np.column_stack((np.ones(len(n)), n, l, w)).astype(float)
    return X, np.asarray(y, dtype=float)


def write_observations(observations: VisitTable | Sequence[VisitObservation], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, delimiter="\t", lineterminator="\n")
        out.writerow(OBS_COLUMNS)
        for o in observations:
            out.writerow((o.question_id, o.n, repr(float(o.l)), repr(float(o.w)), o.closed))
    return path


def read_observations(path: str | Path) -> list[VisitObservation]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = csv.DictReader(fh, delimiter="\t")
        return [
            VisitObservation(r["question_id"], int(r["n"]), float(r["l"]), float(r["w"]), int(r["closed"]))
            for r in rows
        ]
