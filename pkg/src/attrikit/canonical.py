"""The canonical on-disk JSON format all modules exchange.

One document per image. Top level: an ``image_meta`` block, a ``groups``
list and an ``agents`` list; each agent splits its attributes into
``annotated_attributes`` (produced here) and ``sandbox_tags`` (carried
over from the source dataset) and may nest ``sub_entities``.

Serialization is deterministic: fixed key order, UTF-8, no timestamps.
``parse_canonical(serialize_canonical(x)) == x`` for every valid image.
Datasets are stored either as one ``.json`` file per image or as one
``.jsonl`` file per dataset; both are supported everywhere.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError
from .model import (
    PROVENANCE_ANNOTATOR,
    BoundingBox,
    CanonicalAgent,
    CanonicalImage,
    Group,
    PersonAttributes,
    VehicleAttributes,
    validate_image,
)

_AGENT_KEYS = {
    "agent_image_id",
    "uuid",
    "bbox",
    "identity",
    "error_in_labelling",
    "annotated_attributes",
    "sandbox_tags",
    "sub_entities",
}


class CanonicalError(DataError):
    """Base class for canonical-format errors."""


class CanonicalDecodeError(CanonicalError):
    """The input is not well-formed JSON."""


class CanonicalSchemaError(CanonicalError):
    """The JSON does not match the canonical schema; names the path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class CanonicalInvariantError(CanonicalError):
    """The document is schema-valid but violates a model invariant."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


def attributes_to_obj(attrs: PersonAttributes | VehicleAttributes) -> dict:
    if isinstance(attrs, PersonAttributes):
        obj: dict = {
            "kind": "person",
            "age": attrs.age,
            "sex": attrs.sex,
            "skin": attrs.skin,
            "means_of_transport": attrs.means_of_transport,
            "group_id": attrs.group_id,
        }
        if attrs.unknown_confidence:
            obj["unknown_confidence"] = {
                k: attrs.unknown_confidence[k] for k in sorted(attrs.unknown_confidence)
            }
    else:
        obj = {
            "kind": "vehicle",
            "vehicle_type": attrs.vehicle_type,
            "colour": attrs.colour,
            "car_type": attrs.car_type,
        }
    if attrs.provenance != PROVENANCE_ANNOTATOR:
        obj["provenance"] = attrs.provenance
    return obj


def _agent_to_obj(agent: CanonicalAgent) -> dict:
    return {
        "agent_image_id": agent.agent_image_id,
        "uuid": agent.uuid,
        "bbox": {
            "x_min": agent.bbox.x_min,
            "y_min": agent.bbox.y_min,
            "x_max": agent.bbox.x_max,
            "y_max": agent.bbox.y_max,
        },
        "identity": agent.identity,
        "error_in_labelling": agent.error_in_labelling,
        "annotated_attributes": (
            None if agent.attributes is None else attributes_to_obj(agent.attributes)
        ),
        "sandbox_tags": dict(agent.sandbox_tags),
        "sub_entities": [_agent_to_obj(sub) for sub in agent.sub_entities],
    }


def image_to_obj(image: CanonicalImage) -> dict:
    meta = {
        "image_id": image.image_id,
        "source_dataset": image.source_dataset,
        "split": image.split,
        "file_path": image.file_path,
        "resolution": {"width": image.width, "height": image.height},
        "annotator_id": image.annotator_id,
        "discard_flag": image.discard_flag,
    }
    if image.sequence_id is not None:
        meta["sequence_id"] = image.sequence_id
    if image.key_frame:
        meta["key_frame"] = True
    if image.path_unresolved:
        meta["path_unresolved"] = True
    return {
        "image_meta": meta,
        "groups": [{"group_id": g.group_id, "members": list(g.members)} for g in image.groups],
        "agents": [_agent_to_obj(a) for a in image.agents],
    }


def serialize_canonical(image: CanonicalImage) -> bytes:
    """Serialize one image to canonical JSON bytes; rejects invalid records."""
    violations = validate_image(image)
    if violations:
        raise CanonicalInvariantError(violations)
    return (json.dumps(image_to_obj(image), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _require(obj: dict, key: str, types, path: str):
    if key not in obj:
        raise CanonicalSchemaError(f"{path}.{key}", "missing")
    value = obj[key]
    if types is not None and not isinstance(value, types):
        raise CanonicalSchemaError(f"{path}.{key}", f"expected {types}, got {type(value).__name__}")
    # JSON has no int/float split we care about, but bool is an int subtype.
    if types in (int, float) and isinstance(value, bool):
        raise CanonicalSchemaError(f"{path}.{key}", "expected a number, got a bool")
    return value


def _number(obj: dict, key: str, path: str) -> float:
    value = _require(obj, key, None, path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CanonicalSchemaError(f"{path}.{key}", "expected a number")
    return float(value)


def attributes_from_obj(obj: dict, path: str = "annotated_attributes"):
    kind = _require(obj, "kind", str, path)
    provenance = obj.get("provenance", PROVENANCE_ANNOTATOR)
    if not isinstance(provenance, str):
        raise CanonicalSchemaError(f"{path}.provenance", "expected a string")
    if kind == "person":
        confidence = obj.get("unknown_confidence", {})
        if not isinstance(confidence, dict):
            raise CanonicalSchemaError(f"{path}.unknown_confidence", "expected an object")
        group_id = obj.get("group_id")
        if group_id is not None and not isinstance(group_id, str):
            raise CanonicalSchemaError(f"{path}.group_id", "expected a string or null")
        return PersonAttributes(
            age=_require(obj, "age", str, path),
            sex=_require(obj, "sex", str, path),
            skin=_require(obj, "skin", str, path),
            means_of_transport=_require(obj, "means_of_transport", str, path),
            group_id=group_id,
            unknown_confidence=dict(confidence),
            provenance=provenance,
        )
    if kind == "vehicle":
        return VehicleAttributes(
            vehicle_type=_require(obj, "vehicle_type", str, path),
            colour=_require(obj, "colour", str, path),
            car_type=_require(obj, "car_type", str, path),
            provenance=provenance,
        )
    raise CanonicalSchemaError(f"{path}.kind", f"unknown kind {kind!r}")


def _agent_from_obj(obj: dict, path: str) -> CanonicalAgent:
    if not isinstance(obj, dict):
        raise CanonicalSchemaError(path, "expected an object")
    bbox_obj = _require(obj, "bbox", dict, path)
    bbox = BoundingBox(
        x_min=_number(bbox_obj, "x_min", f"{path}.bbox"),
        y_min=_number(bbox_obj, "y_min", f"{path}.bbox"),
        x_max=_number(bbox_obj, "x_max", f"{path}.bbox"),
        y_max=_number(bbox_obj, "y_max", f"{path}.bbox"),
    )
    attrs_obj = obj.get("annotated_attributes")
    attributes = None
    if attrs_obj is not None:
        if not isinstance(attrs_obj, dict):
            raise CanonicalSchemaError(f"{path}.annotated_attributes", "expected object or null")
        attributes = attributes_from_obj(attrs_obj, f"{path}.annotated_attributes")
    sandbox = obj.get("sandbox_tags", {})
    if not isinstance(sandbox, dict):
        raise CanonicalSchemaError(f"{path}.sandbox_tags", "expected an object")
    sandbox = dict(sandbox)
    # Extra keys are not an error: they are preserved as sandbox tags.
    for key, value in obj.items():
        if key not in _AGENT_KEYS:
            sandbox.setdefault(key, value)
    subs = obj.get("sub_entities", [])
    if not isinstance(subs, list):
        raise CanonicalSchemaError(f"{path}.sub_entities", "expected a list")
    agent_image_id = _require(obj, "agent_image_id", int, path)
    error_flag = obj.get("error_in_labelling", False)
    if not isinstance(error_flag, bool):
        raise CanonicalSchemaError(f"{path}.error_in_labelling", "expected a bool")
    return CanonicalAgent(
        agent_image_id=agent_image_id,
        uuid=_require(obj, "uuid", str, path),
        bbox=bbox,
        identity=_require(obj, "identity", str, path),
        attributes=attributes,
        sandbox_tags=sandbox,
        sub_entities=tuple(
            _agent_from_obj(s, f"{path}.sub_entities[{i}]") for i, s in enumerate(subs)
        ),
        error_in_labelling=error_flag,
    )


def image_from_obj(obj: dict) -> CanonicalImage:
    if not isinstance(obj, dict):
        raise CanonicalSchemaError("$", "expected a top-level object")
    meta = _require(obj, "image_meta", dict, "$")
    resolution = _require(meta, "resolution", dict, "$.image_meta")
    annotator = meta.get("annotator_id")
    if annotator is not None and not isinstance(annotator, str):
        raise CanonicalSchemaError("$.image_meta.annotator_id", "expected a string or null")
    groups_obj = obj.get("groups", [])
    if not isinstance(groups_obj, list):
        raise CanonicalSchemaError("$.groups", "expected a list")
    groups = []
    for i, g in enumerate(groups_obj):
        if not isinstance(g, dict):
            raise CanonicalSchemaError(f"$.groups[{i}]", "expected an object")
        members = _require(g, "members", list, f"$.groups[{i}]")
        if not all(isinstance(m, int) and not isinstance(m, bool) for m in members):
            raise CanonicalSchemaError(f"$.groups[{i}].members", "expected integer ids")
        groups.append(Group(group_id=_require(g, "group_id", str, f"$.groups[{i}]"),
                            members=tuple(members)))
    agents_obj = _require(obj, "agents", list, "$")
    sequence_id = meta.get("sequence_id")
    if sequence_id is not None and not isinstance(sequence_id, str):
        raise CanonicalSchemaError("$.image_meta.sequence_id", "expected a string or null")
    image = CanonicalImage(
        image_id=_require(meta, "image_id", str, "$.image_meta"),
        source_dataset=_require(meta, "source_dataset", str, "$.image_meta"),
        split=_require(meta, "split", str, "$.image_meta"),
        file_path=_require(meta, "file_path", str, "$.image_meta"),
        width=_require(resolution, "width", int, "$.image_meta.resolution"),
        height=_require(resolution, "height", int, "$.image_meta.resolution"),
        annotator_id=annotator,
        discard_flag=bool(meta.get("discard_flag", False)),
        agents=tuple(_agent_from_obj(a, f"$.agents[{i}]") for i, a in enumerate(agents_obj)),
        groups=tuple(groups),
        sequence_id=sequence_id,
        key_frame=bool(meta.get("key_frame", False)),
        path_unresolved=bool(meta.get("path_unresolved", False)),
    )
    violations = validate_image(image)
    if violations:
        raise CanonicalInvariantError(violations)
    return image


def parse_canonical(data: bytes | str) -> CanonicalImage:
    """Parse one canonical JSON document; exact inverse of the serializer.

    Raises CanonicalDecodeError for malformed JSON, CanonicalSchemaError
    (naming the path) for shape problems and CanonicalInvariantError for
    model invariant violations.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise CanonicalDecodeError(f"malformed JSON: {exc}") from exc
    return image_from_obj(obj)


def write_dataset_jsonl(images: Iterable[CanonicalImage], path: str | Path) -> int:
    """Write a dataset as one compact JSON document per line. Returns count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8") as fh:
        for image in images:
            violations = validate_image(image)
            if violations:
                raise CanonicalInvariantError(violations)
            fh.write(json.dumps(image_to_obj(image), ensure_ascii=False,
                                separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


def read_dataset_jsonl(path: str | Path) -> Iterator[CanonicalImage]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CanonicalDecodeError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            yield image_from_obj(obj)


def write_dataset_dir(images: Iterable[CanonicalImage], dirpath: str | Path) -> int:
    """Write a dataset as one pretty-printed JSON file per image."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    n = 0
    for image in images:
        (dirpath / f"{image.image_id}.json").write_bytes(serialize_canonical(image))
        n += 1
    return n


def read_dataset(path: str | Path) -> list[CanonicalImage]:
    """Read a dataset from a .jsonl file or a directory of .json files."""
    path = Path(path)
    if path.is_dir():
        return [parse_canonical(p.read_bytes()) for p in sorted(path.glob("*.json"))]
    return list(read_dataset_jsonl(path))
