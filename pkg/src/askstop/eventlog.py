"""Question/answer timelines: data model, line-delimited I/O and censoring filters.

All times are offsets in hours from the moment the question was posted.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

log = logging.getLogger(__name__)

TIE_NUDGE_HOURS = 1e-9
FLOAT_FORMAT = ".9g"


class LogFormatError(ValueError):
    """A log line could not be parsed or violates a record invariant."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class QuestionRecord:
    question_id: str
    answer_offsets_hours: tuple[float, ...]
    close_offset_hours: float
    extra: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "answer_offsets_hours", tuple(float(a) for a in self.answer_offsets_hours))
        object.__setattr__(self, "close_offset_hours", float(self.close_offset_hours))
        validate_record(self)

    @property
    def total_answers(self) -> int:
        return derive_close_stats(self)[0]

    @property
    def elapsed_time_hours(self) -> float:
        return derive_close_stats(self)[1]


def validate_record(rec: QuestionRecord) -> None:
    answers = rec.answer_offsets_hours
    close = rec.close_offset_hours
    if not math.isfinite(close) or close <= 0:
        raise LogFormatError(f"question {rec.question_id!r}: close must be finite and positive, got {close}")
    for a in answers:
        if not math.isfinite(a) or a < 0:
            raise LogFormatError(f"question {rec.question_id!r}: answer offsets must be finite and >= 0")
    if any(b <= a for a, b in zip(answers, answers[1:])):
        raise LogFormatError(f"question {rec.question_id!r}: answer offsets must be strictly increasing")
    if not answers or answers[0] > close:
        raise LogFormatError(f"question {rec.question_id!r}: close precedes first answer")


@dataclass
class EventLog:
    records: list[QuestionRecord]
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.question_id in seen:
                raise LogFormatError(f"duplicate question_id {rec.question_id!r}")
            seen.add(rec.question_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def derive_close_stats(record: QuestionRecord) -> tuple[int, float, float]:
    """Return (TotalAnswers, ElapsedTime, open hours) for one record.

    An answer arriving at the closure instant counts toward TotalAnswers.
    """
    close = record.close_offset_hours
    received = [a for a in record.answer_offsets_hours if a <= close]
    return len(received), close - received[-1], close


def normalize_answers(
    answers: Iterable[float], close: float, sort_on_ingest: bool = False
) -> tuple[list[float], dict[str, int]]:
    """Clean a raw answer list: ordering, post-closure drops and tie nudging.

    Returns the cleaned offsets and counters of what was changed.
    """
    answers = [float(a) for a in answers]
    flags = {"sorted": 0, "dropped_after_close": 0, "ties_nudged": 0}
    if any(b < a for a, b in zip(answers, answers[1:])):
        if not sort_on_ingest:
            raise LogFormatError("answer offsets are not in increasing order (pass sort_on_ingest to normalize)")
        answers.sort()
        flags["sorted"] = 1
    kept = [a for a in answers if a <= close]
    flags["dropped_after_close"] = len(answers) - len(kept)
    # an answer at the post instant or tied with its predecessor gets nudged so l > 0
    prev = 0.0
    for i, a in enumerate(kept):
        if a <= prev and (i > 0 or a == 0.0):
            kept[i] = prev + TIE_NUDGE_HOURS
            flags["ties_nudged"] += 1
        prev = kept[i]
    return kept, flags


def parse_record(obj: dict[str, Any], sort_on_ingest: bool = False, line: int | None = None):
    try:
        qid = obj["question_id"]
        raw_answers = obj["answers"]
        close = float(obj["close"])
    except (KeyError, TypeError, ValueError) as exc:
        raise LogFormatError(f"missing or malformed field: {exc}", line) from None
    if not isinstance(qid, str):
        raise LogFormatError("question_id must be a string", line)
    if not isinstance(raw_answers, list):
        raise LogFormatError("answers must be a list", line)
    try:
        answers, flags = normalize_answers(raw_answers, close, sort_on_ingest)
        if answers and answers[-1] > close:
            # a nudged tie at the closure instant drags closure along with it
            close = answers[-1]
        extra = {k: v for k, v in obj.items() if k not in ("question_id", "answers", "close")}
        rec = QuestionRecord(qid, tuple(answers), close, extra)
    except LogFormatError as exc:
        raise LogFormatError(str(exc), line) from None
    except (TypeError, ValueError) as exc:
        raise LogFormatError(f"malformed numeric field: {exc}", line) from None
    return rec, flags


def meta_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def load_log(path: str | Path, format: str = "jsonl", sort_on_ingest: bool = False) -> EventLog:
    """Read and validate a line-delimited log.

    Each non-blank line holds ``{"question_id": str, "answers": [...], "close": float}``.
    A sidecar ``<path>.meta.json`` is merged into ``meta`` when present.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported log format {format!r}")
    path = Path(path)
    records = []
    totals = {"sorted": 0, "dropped_after_close": 0, "ties_nudged": 0}
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise LogFormatError(f"invalid JSON: {exc.msg}", lineno) from None
            if not isinstance(obj, dict):
                raise LogFormatError("record must be a JSON object", lineno)
            rec, flags = parse_record(obj, sort_on_ingest, lineno)
            if rec.question_id in seen:
                raise LogFormatError(
                    f"duplicate question_id {rec.question_id!r} (first seen on line {seen[rec.question_id]})", lineno
                )
            seen[rec.question_id] = lineno
            for k, v in flags.items():
                totals[k] += v
            records.append(rec)

    if totals["dropped_after_close"]:
        log.warning("%s: dropped %d answers arriving after closure", path, totals["dropped_after_close"])
    meta: dict[str, Any] = {}
    mp = meta_path(path)
    if mp.exists():
        meta.update(json.loads(mp.read_text(encoding="utf-8")))
    meta["source"] = str(path)
    meta["ingest"] = totals
    return EventLog(records, meta)


def format_float(x: float) -> str:
    return format(x, FLOAT_FORMAT)


def dump_record(rec: QuestionRecord) -> str:
    # hand-built so floats carry the canonical 9-significant-digit form
    parts = [
        f'"question_id": {json.dumps(rec.question_id)}',
        '"answers": [' + ", ".join(format_float(a) for a in rec.answer_offsets_hours) + "]",
        f'"close": {format_float(rec.close_offset_hours)}',
    ]
    for k, v in rec.extra.items():
        parts.append(f"{json.dumps(k)}: {json.dumps(v, sort_keys=True)}")
    return "{" + ", ".join(parts) + "}"


def save_log(event_log: EventLog, path: str | Path, write_meta: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in event_log.records:
            fh.write(dump_record(rec) + "\n")
    if write_meta and event_log.meta:
        meta = {k: v for k, v in event_log.meta.items() if k not in ("source", "ingest")}
        meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def filter_open_duration(event_log: EventLog, max_hours: float = 100.0) -> tuple[EventLog, int]:
    """Keep records closed strictly before ``max_hours``; return the log and removed count."""
    if not math.isfinite(max_hours):
        raise ValueError("max_hours must be finite")
    kept = [r for r in event_log.records if r.close_offset_hours < max_hours]
    return EventLog(kept, dict(event_log.meta)), len(event_log.records) - len(kept)


def filter_max_answers(event_log: EventLog, max_answers: int) -> tuple[EventLog, int]:
    """Keep records with fewer than ``max_answers`` answers at closure."""
    kept = [r for r in event_log.records if r.total_answers < max_answers]
    return EventLog(kept, dict(event_log.meta)), len(event_log.records) - len(kept)
