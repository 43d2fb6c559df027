"""Append-only annotation journal with deterministic replay.

One JSON document per line, strictly increasing sequence numbers. The
journal is the source of truth: materialized state (exports, plan
progress) is always reproducible by replaying it from the start, which
is also how the service recovers after a crash.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from ..errors import DataError

EVENT_ANNOTATION = "annotation"
EVENT_GROUPS = "groups"
EVENT_CLAIM = "claim"
EVENT_DISCARD = "discard"

EVENT_TYPES = (EVENT_ANNOTATION, EVENT_GROUPS, EVENT_CLAIM, EVENT_DISCARD)


class JournalCorruptionError(DataError):
    """Journal unreadable past ``last_valid_seq``."""

    def __init__(self, path, last_valid_seq: int, detail: str):
        self.last_valid_seq = last_valid_seq
        super().__init__(f"{path}: corrupt journal after seq {last_valid_seq}: {detail}")


@dataclass(frozen=True)
class JournalEvent:
    seq: int
    ts: float
    type: str
    annotator_id: str
    dataset_id: str
    image_id: str
    agent_uuid: str | None = None
    payload: dict | None = None
    provenance: str = "annotator"

    def to_obj(self) -> dict:
        return {
            "seq": self.seq,
            "ts": self.ts,
            "type": self.type,
            "annotator_id": self.annotator_id,
            "dataset_id": self.dataset_id,
            "image_id": self.image_id,
            "agent_uuid": self.agent_uuid,
            "payload": self.payload,
            "provenance": self.provenance,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "JournalEvent":
        return cls(
            seq=obj["seq"],
            ts=obj["ts"],
            type=obj["type"],
            annotator_id=obj["annotator_id"],
            dataset_id=obj["dataset_id"],
            image_id=obj["image_id"],
            agent_uuid=obj.get("agent_uuid"),
            payload=obj.get("payload"),
            provenance=obj.get("provenance", "annotator"),
        )


class Journal:
    """Append-only event log bound to one dataset. Not thread-safe by
    itself: the owning service serializes all writes."""

    def __init__(self, path: str | Path, fsync: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fsync = fsync
        self._next_seq = 1
        if self.path.exists():
            for event in self.replay():
                self._next_seq = event.seq + 1
        self._fh = self.path.open("a", encoding="utf-8")

    def append(
        self,
        type: str,
        annotator_id: str,
        dataset_id: str,
        image_id: str,
        agent_uuid: str | None = None,
        payload: dict | None = None,
        provenance: str = "annotator",
    ) -> JournalEvent:
        if type not in EVENT_TYPES:
            raise DataError(f"unknown journal event type {type!r}")
        event = JournalEvent(
            seq=self._next_seq,
            ts=time.time(),
            type=type,
            annotator_id=annotator_id,
            dataset_id=dataset_id,
            image_id=image_id,
            agent_uuid=agent_uuid,
            payload=payload,
            provenance=provenance,
        )
        self._fh.write(json.dumps(event.to_obj(), ensure_ascii=False, separators=(",", ":")))
        self._fh.write("\n")
        self._fh.flush()
        if self._fsync:
            os.fsync(self._fh.fileno())
        self._next_seq += 1
        return event

    @property
    def last_seq(self) -> int:
        return self._next_seq - 1

    def replay(self) -> Iterator[JournalEvent]:
        """Yield all events in order, failing on the first corrupt line."""
        if not self.path.exists():
            return
        last_valid = 0
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    event = JournalEvent.from_obj(obj)
                except (json.JSONDecodeError, KeyError) as exc:
                    raise JournalCorruptionError(self.path, last_valid, str(exc))
                if event.seq != last_valid + 1:
                    raise JournalCorruptionError(
                        self.path, last_valid, f"sequence jump to {event.seq}"
                    )
                last_valid = event.seq
                yield event

    def close(self) -> None:
        self._fh.close()
