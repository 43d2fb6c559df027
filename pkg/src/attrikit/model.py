"""Canonical records and attribute taxonomies for road-agent annotation.

Everything in this module is a plain value type: frozen dataclasses plus
pure validation functions. Updates go through :func:`dataclasses.replace`,
never in-place mutation, so records are safe to share between threads and
to freeze into test fixtures.

Label alphabets are module-level tuples. Their order is the canonical
display order and the deterministic tie-break order wherever one is
needed (majority votes, report columns, SVG palettes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union

AGE = ("adult", "kid", "unknown")
SEX = ("male", "female", "unknown")
SKIN = ("light", "dark", "unknown")
MEANS_OF_TRANSPORT = ("pedestrian", "bicycle", "pmd", "wheelchair", "unknown")
VEHICLE_TYPE = ("car", "motorcycle", "van", "truck", "bus", "other", "unknown")
COLOUR = ("black", "white", "grey", "blue", "red", "yellow", "green", "other", "unknown")
CAR_TYPE = ("small", "medium", "large", "pickup", "convertible", "other", "unknown")

UNKNOWN = "unknown"
QUALIFIERS = ("clear", "not_clear")
SPLITS = ("train", "val", "test")

PERSON = "person"
VEHICLE = "vehicle"

PERSON_FIELDS: dict[str, tuple[str, ...]] = {
    "age": AGE,
    "sex": SEX,
    "skin": SKIN,
    "means_of_transport": MEANS_OF_TRANSPORT,
}
VEHICLE_FIELDS: dict[str, tuple[str, ...]] = {
    "vehicle_type": VEHICLE_TYPE,
    "colour": COLOUR,
    "car_type": CAR_TYPE,
}

# Provenance of an annotated attribute set.
PROVENANCE_ANNOTATOR = "annotator"
PROVENANCE_PROPAGATED = "propagated"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates, origin top-left, corner form."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def width(self) -> float:
        return self.x_max - self.x_min

    def height(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class PersonAttributes:
    """Annotated attributes of a person-kind agent.

    ``unknown_confidence`` qualifies fields whose value is "unknown" with
    how confidently the annotator declined ("clear": definitely not
    identifiable, "not_clear": hesitant). It maps field name to qualifier
    and may only name fields that actually hold "unknown".
    """

    age: str = UNKNOWN
    sex: str = UNKNOWN
    skin: str = UNKNOWN
    means_of_transport: str = UNKNOWN
    group_id: str | None = None
    unknown_confidence: Mapping[str, str] = field(default_factory=dict)
    provenance: str = PROVENANCE_ANNOTATOR

    @property
    def kind(self) -> str:
        return PERSON


@dataclass(frozen=True)
class VehicleAttributes:
    """Annotated attributes of a vehicle-kind agent.

    ``car_type`` is a sub-type of the "car" vehicle type and must stay
    "unknown" for any other vehicle type.
    """

    vehicle_type: str = UNKNOWN
    colour: str = UNKNOWN
    car_type: str = UNKNOWN
    provenance: str = PROVENANCE_ANNOTATOR

    @property
    def kind(self) -> str:
        return VEHICLE


Attributes = Union[PersonAttributes, VehicleAttributes]


@dataclass(frozen=True)
class CanonicalAgent:
    """One agent (person or vehicle) on one image.

    ``agent_image_id`` indexes the agent within its image; ``uuid`` is
    globally unique within a dataset and stable across frames when the
    source provides instance identity. ``sandbox_tags`` carries attributes
    that came with the source dataset, untouched.
    """

    agent_image_id: int
    uuid: str
    bbox: BoundingBox
    identity: str
    attributes: Attributes | None = None
    sandbox_tags: Mapping[str, object] = field(default_factory=dict)
    sub_entities: tuple["CanonicalAgent", ...] = ()
    error_in_labelling: bool = False


@dataclass(frozen=True)
class Group:
    """A declared group of person agents on one image, by agent_image_id."""

    group_id: str
    members: tuple[int, ...]


@dataclass(frozen=True)
class CanonicalImage:
    """One image record in the canonical interchange format."""

    image_id: str
    source_dataset: str
    split: str
    file_path: str
    width: int
    height: int
    annotator_id: str | None = None
    discard_flag: bool = False
    agents: tuple[CanonicalAgent, ...] = ()
    groups: tuple[Group, ...] = ()
    sequence_id: str | None = None
    key_frame: bool = False
    path_unresolved: bool = False

    def agent_by_uuid(self, uuid: str) -> CanonicalAgent | None:
        for agent in self.agents:
            if agent.uuid == uuid:
                return agent
        return None


def agent_kind(agent: CanonicalAgent) -> str | None:
    """Kind of an agent: from its attributes, else from the ingest tag."""
    if agent.attributes is not None:
        return agent.attributes.kind
    tag = agent.sandbox_tags.get("agent_kind")
    return tag if tag in (PERSON, VEHICLE) else None


def iter_agents(image: CanonicalImage) -> Iterator[tuple[str, CanonicalAgent]]:
    """Yield (path, agent) for all agents including nested sub-entities."""
    stack = [(f"agents[{i}]", a) for i, a in enumerate(image.agents)]
    stack.reverse()
    while stack:
        path, agent = stack.pop()
        yield path, agent
        for j, sub in reversed(list(enumerate(agent.sub_entities))):
            stack.append((f"{path}.sub_entities[{j}]", sub))


def validate_bbox(bbox: BoundingBox, width: int, height: int) -> list[str]:
    problems = []
    if not (bbox.x_max > bbox.x_min and bbox.y_max > bbox.y_min):
        problems.append("bbox: degenerate box, requires x_max > x_min and y_max > y_min")
    if bbox.x_min < 0 or bbox.y_min < 0 or bbox.x_max > width or bbox.y_max > height:
        problems.append(f"bbox: coordinates outside image resolution {width}x{height}")
    return problems


def _validate_person(attrs: PersonAttributes, agent: CanonicalAgent) -> list[str]:
    problems = []
    for name, alphabet in PERSON_FIELDS.items():
        value = getattr(attrs, name)
        if value not in alphabet:
            problems.append(f"{name}: label {value!r} not in alphabet {alphabet}")
    for name, qualifier in attrs.unknown_confidence.items():
        if name not in PERSON_FIELDS:
            problems.append(f"unknown_confidence: {name!r} is not an attribute field")
            continue
        if getattr(attrs, name) != UNKNOWN:
            problems.append(f"unknown_confidence: field {name!r} is not 'unknown'")
        if qualifier not in QUALIFIERS:
            problems.append(f"unknown_confidence: qualifier {qualifier!r} not in {QUALIFIERS}")
    if agent.error_in_labelling:
        for name in PERSON_FIELDS:
            if getattr(attrs, name) != UNKNOWN:
                problems.append(f"{name}: must be 'unknown' when error_in_labelling is set")
    return problems


def _validate_vehicle(attrs: VehicleAttributes, agent: CanonicalAgent) -> list[str]:
    problems = []
    for name, alphabet in VEHICLE_FIELDS.items():
        value = getattr(attrs, name)
        if value not in alphabet:
            problems.append(f"{name}: label {value!r} not in alphabet {alphabet}")
    if attrs.vehicle_type != "car" and attrs.car_type != UNKNOWN:
        problems.append("car_type: requires vehicle_type 'car'")
    if agent.error_in_labelling:
        for name in VEHICLE_FIELDS:
            if getattr(attrs, name) != UNKNOWN:
                problems.append(f"{name}: must be 'unknown' when error_in_labelling is set")
    return problems


def validate_attribute_set(
    agent: CanonicalAgent,
    kind: str,
    image: CanonicalImage | None = None,
) -> list[str]:
    """All guideline rules violated by the agent's annotated attributes.

    An empty list means ok. With ``image`` given, group references are
    checked against the groups declared on that image.
    """
    attrs = agent.attributes
    if attrs is None:
        return ["attributes: agent has no annotated attributes"]
    if attrs.kind != kind:
        return [f"attributes: expected kind {kind!r}, got {attrs.kind!r}"]
    if isinstance(attrs, PersonAttributes):
        problems = _validate_person(attrs, agent)
        if attrs.group_id is not None and image is not None:
            declared = {g.group_id: g for g in image.groups}
            group = declared.get(attrs.group_id)
            if group is None:
                problems.append(f"group_id: {attrs.group_id!r} not declared on image")
            elif agent.agent_image_id not in group.members:
                problems.append(
                    f"group_id: agent {agent.agent_image_id} not a member of {attrs.group_id!r}"
                )
        return problems
    return _validate_vehicle(attrs, agent)


def validate_image(image: CanonicalImage) -> list[str]:
    """All invariant violations of a canonical image record."""
    problems = []
    if image.split not in SPLITS:
        problems.append(f"split: {image.split!r} not in {SPLITS}")
    if image.width <= 0 or image.height <= 0:
        problems.append("resolution: width and height must be positive")

    seen_ids: set[int] = set()
    seen_uuids: set[str] = set()
    kinds: dict[int, str | None] = {}
    for path, agent in iter_agents(image):
        if agent.agent_image_id in seen_ids:
            problems.append(f"{path}: duplicate agent_image_id {agent.agent_image_id}")
        seen_ids.add(agent.agent_image_id)
        if agent.uuid in seen_uuids:
            problems.append(f"{path}: duplicate uuid {agent.uuid!r}")
        seen_uuids.add(agent.uuid)
        kinds[agent.agent_image_id] = agent_kind(agent)
        for msg in validate_bbox(agent.bbox, image.width, image.height):
            problems.append(f"{path}.{msg}")
        if agent.attributes is not None:
            # Group references are checked once, against the membership map below.
            for msg in validate_attribute_set(agent, agent.attributes.kind, image=None):
                problems.append(f"{path}.{msg}")

    membership: dict[int, str] = {}
    for group in image.groups:
        if len(group.members) < 2:
            problems.append(f"groups[{group.group_id}]: needs at least 2 members")
        if len(set(group.members)) != len(group.members):
            problems.append(f"groups[{group.group_id}]: repeated member")
        for member in group.members:
            if member not in seen_ids:
                problems.append(f"groups[{group.group_id}]: member {member} not on image")
            elif kinds.get(member) == VEHICLE:
                problems.append(f"groups[{group.group_id}]: member {member} is not a person")
            if member in membership:
                problems.append(
                    f"groups[{group.group_id}]: member {member} already in {membership[member]!r}"
                )
            membership[member] = group.group_id

    for path, agent in iter_agents(image):
        attrs = agent.attributes
        if not isinstance(attrs, PersonAttributes):
            continue
        declared = membership.get(agent.agent_image_id)
        if attrs.group_id is not None and declared != attrs.group_id:
            problems.append(f"{path}.group_id: {attrs.group_id!r} does not match image groups")
        elif attrs.group_id is None and declared is not None:
            problems.append(f"{path}.group_id: member of {declared!r} but holds no back-reference")
    return problems
