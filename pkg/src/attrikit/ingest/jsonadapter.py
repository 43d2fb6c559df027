"""Config-driven adapter for JSON-based source label files.

Covers datasets whose labels come as JSON: one document per image or one
document carrying a list of images. The config names the keys to read,
the bbox convention, the class map and (optionally) the instance-token
and sequence keys, so a new dataset needs a config file, not code.
"""

from __future__ import annotations

import json
import uuid as uuid_mod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from ..errors import ConfigError, DataError
from ..model import PERSON, VEHICLE, BoundingBox, CanonicalAgent, CanonicalImage
from .kitti import UUID_NAMESPACE
from .manifest import IngestManifest, provenance_hash

UNMAPPED_POLICIES = ("drop", "keep", "fail")


@dataclass(frozen=True)
class AdapterConfig:
    """Mapping from one JSON label layout to canonical fields."""

    dataset_id: str
    agent_kind: str  # person | vehicle | both (then class_map must give kinds)
    document: str = "image"  # "image": one image per file; "image_list": a list
    images_key: str | None = None
    image_id_key: str | None = None  # None: derive from file stem (plus index for lists)
    file_path_key: str | None = None
    width_key: str | None = None
    height_key: str | None = None
    default_resolution: tuple[int, int] = (1920, 1080)
    split_key: str | None = None
    default_split: str = "train"
    sequence_key: str | None = None
    key_frame_key: str | None = None
    agents_key: str = "annotations"
    class_key: str = "identity"
    bbox_format: str = "xyxy"  # or "xywh"
    bbox_keys: tuple[str, str, str, str] = ("x_min", "y_min", "x_max", "y_max")
    instance_key: str | None = None
    class_map: Mapping[str, object] = field(default_factory=dict)
    unmapped_class: str = "drop"

    def __post_init__(self):
        if self.bbox_format not in ("xyxy", "xywh"):
            raise ConfigError(f"bbox_format must be xyxy or xywh, got {self.bbox_format!r}")
        if self.unmapped_class not in UNMAPPED_POLICIES:
            raise ConfigError(f"unmapped_class must be one of {UNMAPPED_POLICIES}")
        if self.agent_kind not in (PERSON, VEHICLE, "both"):
            raise ConfigError("agent_kind must be person, vehicle or both")
        if self.document not in ("image", "image_list"):
            raise ConfigError("document must be image or image_list")

    @classmethod
    def from_obj(cls, obj: Mapping) -> "AdapterConfig":
        kwargs = dict(obj)
        if "bbox_keys" in kwargs:
            kwargs["bbox_keys"] = tuple(kwargs["bbox_keys"])
        if "default_resolution" in kwargs:
            kwargs["default_resolution"] = tuple(kwargs["default_resolution"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad adapter config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "AdapterConfig":
        try:
            return cls.from_obj(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed adapter config: {exc}") from exc

    def resolve_class(self, source_class: str) -> tuple[str, str] | None:
        """(identity, kind) for a mapped class, None for unmapped."""
        entry = self.class_map.get(source_class)
        if entry is None:
            return None
        if isinstance(entry, str):
            if self.agent_kind == "both":
                raise ConfigError(
                    f"class {source_class!r}: agent_kind 'both' needs per-class kinds"
                )
            return entry, self.agent_kind
        identity = entry.get("identity", source_class)
        kind = entry.get("kind", self.agent_kind)
        if kind not in (PERSON, VEHICLE):
            raise ConfigError(f"class {source_class!r}: bad kind {kind!r}")
        return identity, kind


def _corner_bbox(obj: Mapping, config: AdapterConfig, where: str) -> BoundingBox:
    values = []
    for key in config.bbox_keys:
        if key not in obj:
            raise DataError(f"{where}: missing bbox key {key!r}")
        values.append(float(obj[key]))
    a, b, c, d = values
    if config.bbox_format == "xywh":
        return BoundingBox(a, b, a + c, b + d)
    return BoundingBox(a, b, c, d)


def _image_from_obj(
    obj: Mapping,
    config: AdapterConfig,
    fallback_id: str,
    manifest: IngestManifest,
    where: str,
) -> CanonicalImage:
    image_id = str(obj[config.image_id_key]) if config.image_id_key else fallback_id
    width, height = config.default_resolution
    if config.width_key and config.width_key in obj:
        width = int(obj[config.width_key])
    if config.height_key and config.height_key in obj:
        height = int(obj[config.height_key])
    split = config.default_split
    if config.split_key and config.split_key in obj:
        split = str(obj[config.split_key])
    sequence_id = None
    key_frame = False
    if config.sequence_key and obj.get(config.sequence_key) is not None:
        sequence_id = str(obj[config.sequence_key])
        key_frame = bool(obj.get(config.key_frame_key, False)) if config.key_frame_key else False
    raw_agents = obj.get(config.agents_key, [])
    if not isinstance(raw_agents, list):
        raise DataError(f"{where}: {config.agents_key!r} is not a list")

    agents = []
    for i, raw in enumerate(raw_agents):
        source_class = str(raw.get(config.class_key, ""))
        resolved = config.resolve_class(source_class)
        if resolved is None:
            if config.unmapped_class == "fail":
                raise DataError(f"{where}: unmapped class {source_class!r}")
            if config.unmapped_class == "drop":
                manifest.count_dropped(source_class or "<missing>")
                continue
            if config.agent_kind == "both":
                raise ConfigError("unmapped_class 'keep' needs a single agent_kind")
            resolved = (source_class, config.agent_kind)
        identity, kind = resolved
        bbox = _corner_bbox(raw, config, f"{where}: agent {i}")
        token = raw.get(config.instance_key) if config.instance_key else None
        if token is not None:
            uuid = str(uuid_mod.uuid5(UUID_NAMESPACE, f"{config.dataset_id}/instance/{token}"))
        else:
            uuid = str(
                uuid_mod.uuid5(UUID_NAMESPACE, f"{config.dataset_id}/{image_id}/{len(agents)}")
            )
        sandbox = {
            key: value
            for key, value in raw.items()
            if key not in (config.class_key, *config.bbox_keys)
        }
        sandbox["agent_kind"] = kind
        agents.append(
            CanonicalAgent(
                agent_image_id=len(agents),
                uuid=uuid,
                bbox=bbox,
                identity=identity,
                sandbox_tags=sandbox,
            )
        )
        manifest.count_agent(source_class)

    file_path = str(obj.get(config.file_path_key, f"{image_id}.png")) if config.file_path_key \
        else f"{image_id}.png"
    manifest.count_image(split, len(agents))
    return CanonicalImage(
        image_id=image_id,
        source_dataset=config.dataset_id,
        split=split,
        file_path=file_path,
        width=width,
        height=height,
        agents=tuple(agents),
        sequence_id=sequence_id,
        key_frame=key_frame,
    )


def ingest_json_dataset(
    config: AdapterConfig, files: Sequence[str | Path]
) -> tuple[list[CanonicalImage], IngestManifest]:
    """Parse JSON label files into canonical images per the adapter config."""
    paths = [Path(f) for f in files]
    if not paths:
        raise DataError("no input files")
    manifest = IngestManifest(dataset_id=config.dataset_id,
                              resolution=config.default_resolution)
    manifest.provenance_hash = provenance_hash(paths)
    images = []
    for path in sorted(paths):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed JSON: {exc}") from exc
        if config.document == "image":
            images.append(_image_from_obj(doc, config, path.stem, manifest, str(path)))
        else:
            items = doc if config.images_key is None else doc.get(config.images_key)
            if not isinstance(items, list):
                raise DataError(f"{path}: expected a list of images")
            for i, obj in enumerate(items):
                images.append(
                    _image_from_obj(obj, config, f"{path.stem}_{i}", manifest, f"{path}[{i}]")
                )
    return images, manifest
