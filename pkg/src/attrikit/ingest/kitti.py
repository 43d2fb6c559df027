"""Parser for the KITTI object-detection label format.

One whitespace-delimited text file per image: class, truncation,
occlusion, alpha, four corner bbox coordinates, then 3D fields we do not
use. Person classes map to person-kind agents, vehicle classes to
vehicle-kind agents; "DontCare" and "Misc" rows are dropped and counted.
"""

from __future__ import annotations

import uuid as uuid_mod
from pathlib import Path

from ..errors import DataError
from ..model import PERSON, VEHICLE, BoundingBox, CanonicalAgent, CanonicalImage
from .manifest import IngestManifest, provenance_hash

PERSON_CLASSES = {"Pedestrian", "Person_sitting", "Cyclist"}
VEHICLE_CLASSES = {"Car", "Van", "Truck", "Tram"}
DROPPED_CLASSES = {"DontCare", "Misc"}

DEFAULT_RESOLUTION = (1240, 376)

UUID_NAMESPACE = uuid_mod.uuid5(uuid_mod.NAMESPACE_URL, "attrikit")


class KittiRowError(DataError):
    """A malformed label row, located by file and line."""


def _parse_row(parts: list[str], path: Path, lineno: int) -> tuple[str, BoundingBox, dict]:
    if len(parts) < 15:
        raise KittiRowError(f"{path}:{lineno}: expected >= 15 fields, got {len(parts)}")
    source_class = parts[0]
    try:
        truncated = float(parts[1])
        occluded = int(float(parts[2]))
        alpha = float(parts[3])
        x_min, y_min, x_max, y_max = (float(v) for v in parts[4:8])
    except ValueError as exc:
        raise KittiRowError(f"{path}:{lineno}: {exc}") from exc
    bbox = BoundingBox(x_min, y_min, x_max, y_max)
    tags = {"truncated": truncated, "occluded": occluded, "alpha": alpha}
    return source_class, bbox, tags


def _clamp(bbox: BoundingBox, width: int, height: int) -> BoundingBox:
    return BoundingBox(
        x_min=min(max(bbox.x_min, 0.0), float(width)),
        y_min=min(max(bbox.y_min, 0.0), float(height)),
        x_max=min(max(bbox.x_max, 0.0), float(width)),
        y_max=min(max(bbox.y_max, 0.0), float(height)),
    )


def ingest_kitti(
    label_dir: str | Path,
    image_dir: str | Path | None = None,
    resolution: tuple[int, int] = DEFAULT_RESOLUTION,
    split: str = "train",
    dataset_id: str = "kitti",
) -> tuple[list[CanonicalImage], IngestManifest]:
    """Parse a directory of KITTI label files into canonical images."""
    label_dir = Path(label_dir)
    label_files = sorted(label_dir.glob("*.txt"))
    if not label_files:
        raise DataError(f"no .txt label files under {label_dir}")
    width, height = resolution
    manifest = IngestManifest(dataset_id=dataset_id, resolution=resolution)
    manifest.provenance_hash = provenance_hash(label_files)

    images = []
    for path in label_files:
        image_id = path.stem
        agents = []
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            source_class, bbox, tags = _parse_row(line.split(), path, lineno)
            if source_class in DROPPED_CLASSES:
                manifest.count_dropped(source_class)
                continue
            if source_class in PERSON_CLASSES:
                kind = PERSON
            elif source_class in VEHICLE_CLASSES:
                kind = VEHICLE
            else:
                manifest.count_dropped(source_class)
                manifest.warnings.append(f"{path.name}:{lineno}: unmapped class {source_class!r}")
                continue
            bbox = _clamp(bbox, width, height)
            if bbox.area() <= 0:
                raise KittiRowError(f"{path}:{lineno}: box degenerate after clamping")
            index = len(agents)
            agents.append(
                CanonicalAgent(
                    agent_image_id=index,
                    uuid=str(uuid_mod.uuid5(UUID_NAMESPACE, f"{dataset_id}/{image_id}/{index}")),
                    bbox=bbox,
                    identity=source_class,
                    sandbox_tags={"agent_kind": kind, **tags},
                )
            )
            manifest.count_agent(source_class)

        file_path = f"{image_id}.png"
        path_unresolved = False
        if image_dir is not None:
            candidate = Path(image_dir) / f"{image_id}.png"
            file_path = str(candidate)
            if not candidate.exists():
                path_unresolved = True
                manifest.warnings.append(f"{image_id}: image file missing at {candidate}")
        images.append(
            CanonicalImage(
                image_id=image_id,
                source_dataset=dataset_id,
                split=split,
                file_path=file_path,
                width=width,
                height=height,
                agents=tuple(agents),
                path_unresolved=path_unresolved,
            )
        )
        manifest.count_image(split, len(agents))
    return images, manifest
