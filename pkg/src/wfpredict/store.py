"""Append-only JSONL log of task execution records, plus series downsampling."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Callable, Iterator, List

from .domain import DomainError, MetricSeries, TaskExecutionRecord


class StoreError(ValueError):
    """Malformed monitoring input or log usage error."""


class CorruptLogError(StoreError):
    """Trailing entry of the log could not be decoded.

    Complete records before the corruption were already delivered;
    `delivered` carries their count.
    """

    def __init__(self, path, delivered: int, detail: str):
        super().__init__(f"corrupt trailing entry in {path} after {delivered} records: {detail}")
        self.delivered = delivered


class RecordLog:
    """Append-only store of TaskExecutionRecords, one JSON object per line.

    Re-opening a log yields the same records in the same order. Single
    writer; replay snapshots the current length and never observes a
    partial append.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._count = sum(1 for _ in self._raw_lines()) if self.path.exists() else 0

    def _raw_lines(self) -> Iterator[str]:
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line:
                    yield line

    @property
    def count(self) -> int:
        return self._count

    def ingest(self, record: TaskExecutionRecord) -> int:
        """Append a record, returning its strictly increasing sequence number."""
        if not isinstance(record, TaskExecutionRecord):
            raise StoreError(f"expected TaskExecutionRecord, got {type(record).__name__}")
        line = json.dumps(record.to_dict())
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        seq = self._count
        self._count += 1
        return seq

    def records(self) -> Iterator[TaskExecutionRecord]:
        """Iterate records in arrival order; raises CorruptLogError on a bad tail."""
        if not self.path.exists():
            return
        delivered = 0
        snapshot = self._count
        for line in self._raw_lines():
            if delivered >= snapshot:
                break
            try:
                obj = json.loads(line)
                rec = TaskExecutionRecord.from_dict(obj)
            except (json.JSONDecodeError, KeyError, DomainError, TypeError) as exc:
                raise CorruptLogError(self.path, delivered, str(exc))
            yield rec
            delivered += 1

    def replay(self, sink: Callable[[TaskExecutionRecord], None]) -> int:
        """Deliver every record exactly once, in arrival order. Returns the count."""
        n = 0
        for rec in self.records():
            sink(rec)
            n += 1
        return n

    def read_all(self) -> List[TaskExecutionRecord]:
        return list(self.records())


def downsample(s: MetricSeries, target_tau: int) -> MetricSeries:
    """Aggregate a series to a coarser interval by windowed arithmetic means.

    target_tau must be an integer multiple of the input interval; a trailing
    partial window is averaged over its actual members.
    """
    if target_tau < 1:
        raise StoreError(f"target_tau must be >= 1, got {target_tau}")
    if target_tau % s.interval_seconds != 0:
        raise StoreError(
            f"target_tau {target_tau} is not a multiple of interval {s.interval_seconds}"
        )
    width = target_tau // s.interval_seconds
    if width == 1:
        return s
    out = []
    for start in range(0, len(s.values), width):
        window = s.values[start:start + width]
        out.append(sum(window) / len(window))
    return MetricSeries(metric=s.metric, interval_seconds=target_tau, values=tuple(out))
