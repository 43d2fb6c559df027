"""Dataset annotation service: the single writer behind the HTTP API.

One `DatasetService` owns one dataset: its canonical images, its
allocation plan and its journal. Every mutation goes through one lock
and is journaled before it is applied, so replaying the journal from an
empty state reproduces exports byte for byte; startup recovery is
exactly that replay.
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from ..allocation import AllocationPlan, PlanState
from ..canonical import (
    CanonicalError,
    attributes_from_obj,
    attributes_to_obj,
    write_dataset_jsonl,
)
from ..errors import DataError
from ..model import (
    PERSON,
    CanonicalAgent,
    CanonicalImage,
    Group,
    PersonAttributes,
    agent_kind,
    validate_attribute_set,
)
from .grouping import GroupParams, propose_groups
from .journal import (
    EVENT_ANNOTATION,
    EVENT_CLAIM,
    EVENT_DISCARD,
    EVENT_GROUPS,
    Journal,
    JournalEvent,
)


class ServiceError(DataError):
    """Rejected request; carries field-level details for the API layer."""

    def __init__(self, message: str, details: list[str] | None = None, code: str = "invalid"):
        super().__init__(message)
        self.details = details or []
        self.code = code


class SessionError(ServiceError):
    def __init__(self, message: str):
        super().__init__(message, code="session")


@dataclass(frozen=True)
class Session:
    token: str
    annotator_id: str
    dataset_id: str


@dataclass(frozen=True)
class StoredAnnotation:
    attributes: object  # PersonAttributes | VehicleAttributes
    error_in_labelling: bool = False


class DatasetService:
    """All annotation state and operations for one dataset."""

    def __init__(
        self,
        dataset_id: str,
        images: Iterable[CanonicalImage],
        plan: AllocationPlan,
        journal: Journal,
        group_params: GroupParams = GroupParams(),
    ):
        self.dataset_id = dataset_id
        self.group_params = group_params
        self._images: dict[str, CanonicalImage] = {i.image_id: i for i in images}
        self._plan = plan
        self._state = PlanState(plan)
        self._journal = journal
        self._lock = threading.RLock()
        self._sessions: dict[str, Session] = {}

        self._pool_ids = {i for i, _ in plan.inter_pool} | {i for i, _ in plan.exclusive_pool}
        self._inter_ids = {i for i, _ in plan.inter_pool}
        self._eligible: dict[str, tuple[str, ...]] = {}
        for image_id in self._pool_ids:
            image = self._images.get(image_id)
            if image is None:
                raise DataError(f"plan references unknown image {image_id!r}")
            self._eligible[image_id] = tuple(
                a.uuid for a in image.agents if plan.filter_config.eligible(a)
            )
        self._sequences: dict[str, list[str]] = {}
        for image in self._images.values():
            if image.sequence_id is not None:
                self._sequences.setdefault(image.sequence_id, []).append(image.image_id)
        for frames in self._sequences.values():
            frames.sort()

        # Materialized state, rebuilt from the journal.
        self._annotations: dict[tuple[str, str, str], StoredAnnotation] = {}
        self._groups: dict[tuple[str, str], tuple[Group, ...]] = {}
        self._discarded: set[str] = set()
        self._completed_marker: set[tuple[str, str]] = set()
        for event in self._journal.replay():
            self._apply(event)

    # -- read-only accessors -------------------------------------------------

    def image_record(self, image_id: str) -> CanonicalImage | None:
        return self._images.get(image_id)

    def exclusive_claims(self) -> dict[str, str]:
        """image_id -> owning annotator, for every claimed exclusive image."""
        return self._state.claims()

    def annotation_keys(self) -> list[tuple[str, str, str]]:
        """(annotator, image_id, agent_uuid) for every stored annotation."""
        with self._lock:
            return list(self._annotations)

    # -- sessions ----------------------------------------------------------

    def start_session(self, annotator_id: str) -> dict:
        with self._lock:
            if annotator_id not in self._plan.annotator_ids:
                raise SessionError(f"annotator {annotator_id!r} not registered for dataset")
            token = secrets.token_hex(16)
            self._sessions[token] = Session(token, annotator_id, self.dataset_id)
            return {"token": token, "progress": self._state.progress(annotator_id)}

    def _session(self, token: str) -> Session:
        session = self._sessions.get(token)
        if session is None:
            raise SessionError("unknown or stale session token")
        return session

    def progress(self, token: str) -> dict:
        with self._lock:
            return self._state.progress(self._session(token).annotator_id)

    # -- task delivery -----------------------------------------------------

    def _current_task(self, annotator_id: str) -> str | None:
        """Current image for the annotator, claiming and skipping as needed."""
        while True:
            ref = self._state.next_image(annotator_id)
            if ref is None:
                return None
            if ref.newly_claimed:
                self._journal.append(
                    EVENT_CLAIM, annotator_id, self.dataset_id, ref.image_id
                )
            if ref.image_id in self._discarded:
                self._state.record_image_complete(annotator_id, ref.image_id, skipped=True)
                continue
            return ref.image_id

    def effective_groups(self, annotator_id: str, image_id: str) -> tuple[Group, ...]:
        """Stored group edits for the image, else the automatic proposal."""
        stored = self._groups.get((annotator_id, image_id))
        if stored is not None:
            return stored
        image = self._images[image_id]
        eligible = set(self._eligible.get(image_id, ()))
        return propose_groups(
            [a for a in image.agents if a.uuid in eligible], self.group_params
        )

    def get_task(self, token: str) -> dict:
        with self._lock:
            session = self._session(token)
            image_id = self._current_task(session.annotator_id)
            progress = self._state.progress(session.annotator_id)
            if image_id is None:
                return {"status": "done", "progress": progress}
            image = self._images[image_id]
            eligible = set(self._eligible[image_id])
            agents = []
            for agent in image.agents:
                if agent.uuid not in eligible:
                    continue
                stored = self._annotations.get((session.annotator_id, image_id, agent.uuid))
                agents.append({
                    "agent_image_id": agent.agent_image_id,
                    "uuid": agent.uuid,
                    "kind": agent_kind(agent),
                    "identity": agent.identity,
                    "bbox": {
                        "x_min": agent.bbox.x_min, "y_min": agent.bbox.y_min,
                        "x_max": agent.bbox.x_max, "y_max": agent.bbox.y_max,
                    },
                    "annotated": None if stored is None else attributes_to_obj(stored.attributes),
                    "error_in_labelling": stored.error_in_labelling if stored else False,
                })
            groups = self.effective_groups(session.annotator_id, image_id)
            return {
                "status": "ok",
                "dataset_id": self.dataset_id,
                "image": {
                    "image_id": image.image_id,
                    "file_path": image.file_path,
                    "image_url": f"/images/{self.dataset_id}/{image.image_id}",
                    "width": image.width,
                    "height": image.height,
                    "sequence_id": image.sequence_id,
                    "key_frame": image.key_frame,
                },
                "agents": agents,
                "groups": [{"group_id": g.group_id, "members": list(g.members)} for g in groups],
                "progress": progress,
            }

    # -- group editing -----------------------------------------------------

    def propose_for_image(self, image_id: str) -> tuple[Group, ...]:
        with self._lock:
            if image_id not in self._images:
                raise ServiceError(f"unknown image {image_id!r}", code="not_found")
            image = self._images[image_id]
            eligible = set(self._eligible.get(image_id, ()))
            return propose_groups(
                [a for a in image.agents if a.uuid in eligible], self.group_params
            )

    def _validate_groups(self, image_id: str, groups: tuple[Group, ...]) -> None:
        image = self._images[image_id]
        eligible = set(self._eligible.get(image_id, ()))
        by_id = {a.agent_image_id: a for a in image.agents if a.uuid in eligible}
        seen: dict[int, str] = {}
        ids: set[str] = set()
        problems = []
        for group in groups:
            if group.group_id in ids:
                problems.append(f"groups: duplicate group id {group.group_id!r}")
            ids.add(group.group_id)
            if len(group.members) < 2:
                problems.append(f"groups[{group.group_id}]: needs at least 2 members")
            for member in group.members:
                agent = by_id.get(member)
                if agent is None:
                    problems.append(f"groups[{group.group_id}]: member {member} not eligible")
                elif agent_kind(agent) != PERSON:
                    problems.append(f"groups[{group.group_id}]: member {member} not a person")
                if member in seen:
                    problems.append(
                        f"groups[{group.group_id}]: member {member} already in {seen[member]!r}"
                    )
                seen[member] = group.group_id
        if problems:
            raise ServiceError("invalid group assignment", details=problems)

    def set_groups(self, token: str, image_id: str, groups_obj: list[dict]) -> dict:
        with self._lock:
            session = self._session(token)
            self._touchable(session.annotator_id, image_id)
            groups = tuple(
                Group(group_id=str(g["group_id"]), members=tuple(int(m) for m in g["members"]))
                for g in groups_obj
            )
            self._validate_groups(image_id, groups)
            event = self._journal.append(
                EVENT_GROUPS,
                session.annotator_id,
                self.dataset_id,
                image_id,
                payload={"groups": [
                    {"group_id": g.group_id, "members": list(g.members)} for g in groups
                ]},
            )
            self._apply(event)
            return {"status": "ok", "groups": [
                {"group_id": g.group_id, "members": list(g.members)} for g in groups
            ]}

    # -- annotation submission ----------------------------------------------

    def _touchable(self, annotator_id: str, image_id: str) -> None:
        """The annotator may write to an image they currently hold or have held."""
        if image_id not in self._pool_ids:
            raise ServiceError(f"image {image_id!r} is not part of the work plan")
        current = self._state.peek_current(annotator_id)
        if current is not None and current.image_id == image_id:
            return
        if (annotator_id, image_id) in self._completed_marker:
            return
        if self._state.claims().get(image_id) == annotator_id:
            return
        if self._state.has_completed(annotator_id, image_id):
            return
        raise ServiceError(
            f"image {image_id!r} is not assigned to {annotator_id!r}", code="not_assigned"
        )

    def submit_annotation(
        self,
        token: str,
        agent_uuid: str,
        attributes_obj: dict,
        image_id: str | None = None,
        error_in_labelling: bool = False,
        groups_obj: list[dict] | None = None,
    ) -> dict:
        with self._lock:
            session = self._session(token)
            annotator = session.annotator_id
            if image_id is None:
                image_id = self._current_task(annotator)
                if image_id is None:
                    raise ServiceError("dataset complete; nothing to annotate", code="done")
            self._touchable(annotator, image_id)
            image = self._images[image_id]
            if agent_uuid not in self._eligible.get(image_id, ()):
                raise ServiceError(
                    f"agent {agent_uuid!r} is not an active agent of image {image_id!r}"
                )
            if groups_obj is not None:
                self.set_groups(token, image_id, groups_obj)

            try:
                attrs = attributes_from_obj(dict(attributes_obj), "attributes")
            except CanonicalError as exc:
                raise ServiceError(str(exc), details=[str(exc)]) from exc

            agent = image.agent_by_uuid(agent_uuid)
            kind = agent_kind(agent)
            if kind is not None and attrs.kind != kind:
                raise ServiceError(
                    f"agent is {kind}, payload is {attrs.kind}", details=["attributes.kind"]
                )
            if isinstance(attrs, PersonAttributes):
                attrs = self._reconcile_group_id(annotator, image_id, agent, attrs)
            candidate = replace(
                agent, attributes=attrs, error_in_labelling=error_in_labelling
            )
            problems = validate_attribute_set(candidate, attrs.kind)
            if problems:
                raise ServiceError("attribute validation failed", details=problems)

            event = self._journal.append(
                EVENT_ANNOTATION,
                annotator,
                self.dataset_id,
                image_id,
                agent_uuid=agent_uuid,
                payload={
                    "attributes": attributes_to_obj(attrs),
                    "error_in_labelling": error_in_labelling,
                },
            )
            self._apply(event)
            propagated = self._propagate_from(annotator, image_id, agent_uuid)
            complete = (annotator, image_id) in self._completed_marker
            return {
                "status": "ok",
                "image_complete": complete,
                "propagated": propagated,
                "progress": self._state.progress(annotator),
            }

    def _reconcile_group_id(
        self,
        annotator: str,
        image_id: str,
        agent: CanonicalAgent,
        attrs: PersonAttributes,
    ) -> PersonAttributes:
        """Fill or check the group back-reference against effective groups."""
        groups = self.effective_groups(annotator, image_id)
        declared = None
        for group in groups:
            if agent.agent_image_id in group.members:
                declared = group.group_id
                break
        if attrs.group_id is not None and attrs.group_id != declared:
            raise ServiceError(
                f"group_id {attrs.group_id!r} does not match image groups",
                details=["attributes.group_id"],
            )
        return replace(attrs, group_id=declared)

    # -- propagation ---------------------------------------------------------

    def _propagate_from(self, annotator: str, image_id: str, agent_uuid: str) -> int:
        image = self._images[image_id]
        if image.sequence_id is None or not image.key_frame:
            return 0
        return self._propagate(annotator, image, agent_uuid)

    def propagate_sequence(self, token: str, key_image_id: str, agent_uuid: str) -> int:
        """Copy the annotator's key-frame annotation along the sequence."""
        with self._lock:
            session = self._session(token)
            image = self._images.get(key_image_id)
            if image is None:
                raise ServiceError(f"unknown image {key_image_id!r}", code="not_found")
            stored = self._annotations.get((session.annotator_id, key_image_id, agent_uuid))
            if stored is None:
                raise ServiceError("key frame agent not annotated yet")
            if image.sequence_id is None or not image.key_frame:
                return 0
            return self._propagate(session.annotator_id, image, agent_uuid)

    def _propagate(self, annotator: str, key_image: CanonicalImage, agent_uuid: str) -> int:
        stored = self._annotations.get((annotator, key_image.image_id, agent_uuid))
        if stored is None:
            return 0
        count = 0
        payload = {
            "attributes": attributes_to_obj(replace(stored.attributes, provenance="propagated")),
            "error_in_labelling": stored.error_in_labelling,
        }
        for frame_id in self._sequences.get(key_image.sequence_id, []):
            if frame_id == key_image.image_id:
                continue
            frame = self._images[frame_id]
            if frame.agent_by_uuid(agent_uuid) is None:
                continue
            event = self._journal.append(
                EVENT_ANNOTATION,
                annotator,
                self.dataset_id,
                frame_id,
                agent_uuid=agent_uuid,
                payload=payload,
                provenance="propagated",
            )
            self._apply(event)
            count += 1
        return count

    # -- image flagging ------------------------------------------------------

    def flag_image(self, token: str, image_id: str, reason: str = "") -> dict:
        """Mark an image as mislabelled at the source; excluded everywhere."""
        with self._lock:
            session = self._session(token)
            if image_id not in self._images:
                raise ServiceError(f"unknown image {image_id!r}", code="not_found")
            event = self._journal.append(
                EVENT_DISCARD,
                session.annotator_id,
                self.dataset_id,
                image_id,
                payload={"reason": reason},
            )
            self._apply(event)
            return {"status": "ok", "progress": self._state.progress(session.annotator_id)}

    # -- event application (live and replay) ---------------------------------

    def _apply(self, event: JournalEvent) -> None:
        if event.type == EVENT_CLAIM:
            self._state.apply_claim(event.annotator_id, event.image_id)
        elif event.type == EVENT_GROUPS:
            groups = tuple(
                Group(group_id=g["group_id"], members=tuple(g["members"]))
                for g in event.payload["groups"]
            )
            self._groups[(event.annotator_id, event.image_id)] = groups
        elif event.type == EVENT_DISCARD:
            self._discarded.add(event.image_id)
            if event.image_id in self._pool_ids:
                self._state.mark_discarded(event.image_id)
                self._state.record_image_complete(
                    event.annotator_id, event.image_id, skipped=True
                )
                self._completed_marker.add((event.annotator_id, event.image_id))
        elif event.type == EVENT_ANNOTATION:
            attrs = attributes_from_obj(dict(event.payload["attributes"]), "attributes")
            self._annotations[(event.annotator_id, event.image_id, event.agent_uuid)] = (
                StoredAnnotation(
                    attributes=attrs,
                    error_in_labelling=bool(event.payload.get("error_in_labelling", False)),
                )
            )
            if event.image_id in self._pool_ids:
                eligible = self._eligible[event.image_id]
                done = all(
                    (event.annotator_id, event.image_id, uuid) in self._annotations
                    for uuid in eligible
                )
                if done and (event.annotator_id, event.image_id) not in self._completed_marker:
                    self._completed_marker.add((event.annotator_id, event.image_id))
                    self._state.record_image_complete(event.annotator_id, event.image_id)

    # -- export ----------------------------------------------------------------

    def _materialize(self, image_id: str, annotator: str) -> CanonicalImage:
        """The image as annotated by one annotator."""
        image = self._images[image_id]
        groups = self.effective_groups(annotator, image_id)
        member_of = {m: g.group_id for g in groups for m in g.members}
        agents = []
        for agent in image.agents:
            stored = self._annotations.get((annotator, image_id, agent.uuid))
            if stored is None:
                agents.append(agent)
                continue
            attrs = stored.attributes
            if isinstance(attrs, PersonAttributes):
                declared = member_of.get(agent.agent_image_id)
                attrs = replace(attrs, group_id=declared)
            agents.append(
                replace(
                    agent,
                    attributes=attrs,
                    error_in_labelling=stored.error_in_labelling,
                )
            )
        return replace(
            image,
            annotator_id=annotator,
            discard_flag=image.discard_flag or image_id in self._discarded,
            agents=tuple(agents),
            groups=groups,
        )

    def _final_source(self, image_id: str) -> str | None:
        """Which annotator's record represents an image in the final export."""
        claims = self._state.claims()
        if image_id in claims:
            return claims[image_id]
        raters = sorted({
            annotator
            for (annotator, img, _uuid) in self._annotations
            if img == image_id
        })
        return raters[0] if raters else None

    def export(self, out_dir: str | Path) -> dict:
        """Materialize final and per-rater canonical files. Deterministic."""
        out = Path(out_dir)
        with self._lock:
            touched = sorted({img for (_a, img, _u) in self._annotations} | self._discarded)
            final_images = []
            for image_id in touched:
                source = self._final_source(image_id)
                if source is None:
                    source_image = self._images[image_id]
                    final_images.append(replace(source_image, discard_flag=True))
                    continue
                final_images.append(self._materialize(image_id, source))
            (out / "raters").mkdir(parents=True, exist_ok=True)
            write_dataset_jsonl(final_images, out / "final.jsonl")
            per_rater_counts = {}
            for annotator in self._plan.annotator_ids:
                rater_images = []
                for image_id, _n in self._plan.inter_pool:
                    has_any = any(
                        (annotator, image_id, uuid) in self._annotations
                        for uuid in self._eligible[image_id]
                    )
                    if has_any:
                        rater_images.append(self._materialize(image_id, annotator))
                write_dataset_jsonl(rater_images, out / "raters" / f"{annotator}.jsonl")
                per_rater_counts[annotator] = len(rater_images)
            manifest = {
                "dataset_id": self.dataset_id,
                "journal_last_seq": self._journal.last_seq,
                "final_images": len(final_images),
                "annotated_agents": len({
                    (img, uuid) for (_a, img, uuid) in self._annotations
                }),
                "inter_pool_images": len(self._plan.inter_pool),
                "per_rater_inter_images": per_rater_counts,
                "discarded_images": sorted(self._discarded),
            }
            (out / "export_manifest.json").write_text(
                json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
            )
            return manifest
