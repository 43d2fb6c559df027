"""Ingest manifests: what went in, what came out, and a provenance hash."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class IngestManifest:
    """Ledger of one ingestion run.

    ``class_counts`` counts emitted agents per source class; ``dropped``
    counts rows that were deliberately not emitted, per class. Together
    they account for every input row, so nothing is dropped silently.
    """

    dataset_id: str
    resolution: tuple[int, int] | None = None
    split_counts: dict[str, dict[str, int]] = field(default_factory=dict)
    class_counts: dict[str, int] = field(default_factory=dict)
    dropped: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    provenance_hash: str = ""

    @property
    def total_agents(self) -> int:
        return sum(self.class_counts.values())

    @property
    def total_images(self) -> int:
        return sum(c["images"] for c in self.split_counts.values())

    def count_image(self, split: str, n_agents: int) -> None:
        entry = self.split_counts.setdefault(split, {"images": 0, "agents": 0})
        entry["images"] += 1
        entry["agents"] += n_agents

    def count_agent(self, source_class: str) -> None:
        self.class_counts[source_class] = self.class_counts.get(source_class, 0) + 1

    def count_dropped(self, source_class: str) -> None:
        self.dropped[source_class] = self.dropped.get(source_class, 0) + 1

    def to_obj(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "resolution": list(self.resolution) if self.resolution else None,
            "split_counts": self.split_counts,
            "class_counts": dict(sorted(self.class_counts.items())),
            "dropped": dict(sorted(self.dropped.items())),
            "total_images": self.total_images,
            "total_agents": self.total_agents,
            "warnings": self.warnings,
            "provenance_hash": self.provenance_hash,
        }

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_obj(), indent=2) + "\n", encoding="utf-8")


def provenance_hash(paths: list[Path]) -> str:
    """SHA-256 over the sorted input files' names and bytes."""
    digest = hashlib.sha256()
    for path in sorted(paths):
        digest.update(path.name.encode("utf-8"))
        digest.update(path.read_bytes())
    return digest.hexdigest()
