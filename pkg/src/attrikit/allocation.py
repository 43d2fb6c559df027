"""Work allocation: area filtering, goals, control pool and claims.

A plan splits the eligible images of a dataset into a small control pool,
annotated by every annotator until each has covered a fixed share of the
dataset goal, and an exclusive pool whose images are claimed by exactly
one annotator. The switch between pools is invisible to annotators: the
scheduler simply keeps handing out the next image.
"""

from __future__ import annotations

import json
import math
import random
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, DataError
from .model import PERSON, VEHICLE, CanonicalImage, agent_kind

INTER_POOL = "inter"
EXCLUSIVE_POOL = "exclusive"

DEFAULT_FRACTION = 0.06
DEFAULT_PERSON_MIN_AREA = 6000.0
DEFAULT_VEHICLE_MIN_AREA = 8000.0


@dataclass(frozen=True)
class FilterConfig:
    """Minimum bounding-box areas, in squared pixels, per agent kind."""

    person_min_area: float = DEFAULT_PERSON_MIN_AREA
    vehicle_min_area: float = DEFAULT_VEHICLE_MIN_AREA
    inclusive: bool = True

    def __post_init__(self):
        if self.person_min_area <= 0 or self.vehicle_min_area <= 0:
            raise ConfigError("area thresholds must be positive")

    def eligible(self, agent) -> bool:
        kind = agent_kind(agent)
        if kind == PERSON:
            threshold = self.person_min_area
        elif kind == VEHICLE:
            threshold = self.vehicle_min_area
        else:
            return False
        area = agent.bbox.area()
        return area >= threshold if self.inclusive else area > threshold

    def to_obj(self) -> dict:
        return {
            "person_min_area": self.person_min_area,
            "vehicle_min_area": self.vehicle_min_area,
            "inclusive": self.inclusive,
        }

    @classmethod
    def from_obj(cls, obj: Mapping) -> "FilterConfig":
        return cls(
            person_min_area=obj.get("person_min_area", DEFAULT_PERSON_MIN_AREA),
            vehicle_min_area=obj.get("vehicle_min_area", DEFAULT_VEHICLE_MIN_AREA),
            inclusive=obj.get("inclusive", True),
        )


@dataclass(frozen=True)
class EligibleImage:
    image_id: str
    split: str
    agent_uuids: tuple[str, ...]

    @property
    def n_agents(self) -> int:
        return len(self.agent_uuids)


def filter_by_area(
    images: Iterable[CanonicalImage], config: FilterConfig
) -> list[EligibleImage]:
    """Index of images with at least one agent passing the area filter.

    Discarded images are excluded, as are non-key frames of sequences
    (those are only ever filled in by propagation from their key frame).
    Sub-entities do not count toward eligibility.
    """
    index = []
    for image in images:
        if image.discard_flag:
            continue
        if image.sequence_id is not None and not image.key_frame:
            continue
        uuids = tuple(a.uuid for a in image.agents if config.eligible(a))
        if uuids:
            index.append(EligibleImage(image.image_id, image.split, uuids))
    return index


def compute_quota(goal: int, annotators: int, fraction: float = DEFAULT_FRACTION) -> int:
    """Per-annotator control quota: the fraction of the goal, rounded up."""
    if annotators < 2:
        raise ConfigError("inter-rater agreement needs at least 2 annotators")
    if goal < 0:
        raise ConfigError("goal must be non-negative")
    if not (0 < fraction < 1):
        raise ConfigError("fraction must be in (0, 1)")
    return math.ceil(fraction * goal)


class AllocationError(DataError):
    """Goal not achievable with the eligible agents; carries coverage."""

    def __init__(self, goal: int, eligible: int):
        self.goal = goal
        self.eligible = eligible
        self.coverage = eligible / goal if goal else 1.0
        super().__init__(
            f"goal {goal} exceeds {eligible} eligible agents "
            f"(max achievable coverage {100 * self.coverage:.1f}%)"
        )


@dataclass(frozen=True)
class AllocationPlan:
    """Immutable description of one dataset's work split.

    Pools are ordered (image_id, eligible agent count) lists. Progress is
    tracked separately (PlanState); the plan itself never changes after
    construction and is a pure function of its inputs.
    """

    dataset_id: str
    goal: int
    annotator_ids: tuple[str, ...]
    fraction: float
    quota: int
    seed: int
    filter_config: FilterConfig
    inter_pool: tuple[tuple[str, int], ...]
    exclusive_pool: tuple[tuple[str, int], ...]

    @property
    def inter_agents(self) -> int:
        return sum(n for _, n in self.inter_pool)

    def to_obj(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "goal": self.goal,
            "annotator_ids": list(self.annotator_ids),
            "fraction": self.fraction,
            "quota": self.quota,
            "seed": self.seed,
            "filter_config": self.filter_config.to_obj(),
            "inter_pool": [[i, n] for i, n in self.inter_pool],
            "exclusive_pool": [[i, n] for i, n in self.exclusive_pool],
        }

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_obj(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_obj(cls, obj: Mapping) -> "AllocationPlan":
        return cls(
            dataset_id=obj["dataset_id"],
            goal=obj["goal"],
            annotator_ids=tuple(obj["annotator_ids"]),
            fraction=obj["fraction"],
            quota=obj["quota"],
            seed=obj["seed"],
            filter_config=FilterConfig.from_obj(obj.get("filter_config", {})),
            inter_pool=tuple((i, n) for i, n in obj["inter_pool"]),
            exclusive_pool=tuple((i, n) for i, n in obj["exclusive_pool"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "AllocationPlan":
        return cls.from_obj(json.loads(Path(path).read_text(encoding="utf-8")))


def _apportion(quota: int, weights: Sequence[int]) -> list[int]:
    """Largest-remainder apportionment of quota over integer weights."""
    total = sum(weights)
    if total == 0 or quota == 0:
        return [0] * len(weights)
    raw = [quota * w / total for w in weights]
    floors = [math.floor(r) for r in raw]
    leftover = quota - sum(floors)
    order = sorted(range(len(weights)), key=lambda i: (-(raw[i] - floors[i]), i))
    for i in order[:leftover]:
        floors[i] += 1
    return floors


def build_plan(
    dataset_id: str,
    eligible: Sequence[EligibleImage],
    goal: int,
    annotator_ids: Sequence[str],
    fraction: float = DEFAULT_FRACTION,
    seed: int = 0,
    filter_config: FilterConfig = FilterConfig(),
) -> AllocationPlan:
    """Build a plan: seeded, split-stratified control pool plus remainder.

    The control pool is the smallest image prefix, proportionally drawn
    from each split's seeded shuffle, whose eligible-agent count reaches
    the per-annotator quota. Deterministic in (eligible, goal, ids, seed).
    """
    annotator_ids = tuple(annotator_ids)
    quota = compute_quota(goal, len(annotator_ids), fraction)
    total_eligible = sum(e.n_agents for e in eligible)
    if goal > total_eligible:
        raise AllocationError(goal, total_eligible)

    rng = random.Random(seed)
    by_split: dict[str, list[EligibleImage]] = {}
    for entry in sorted(eligible, key=lambda e: e.image_id):
        by_split.setdefault(entry.split, []).append(entry)
    splits = sorted(by_split)
    for split in splits:
        rng.shuffle(by_split[split])

    split_weights = [sum(e.n_agents for e in by_split[s]) for s in splits]
    targets = _apportion(quota, split_weights)

    inter: list[EligibleImage] = []
    remainders: list[EligibleImage] = []
    for split, target in zip(splits, targets):
        count = 0
        queue = by_split[split]
        take = 0
        while take < len(queue) and count < target:
            count += queue[take].n_agents
            take += 1
        inter.extend(queue[:take])
        remainders.extend(queue[take:])
    # Rounding can leave the pool short of the quota; top up from the rest.
    short = quota - sum(e.n_agents for e in inter)
    while short > 0 and remainders:
        entry = remainders.pop(0)
        inter.append(entry)
        short -= entry.n_agents

    rng.shuffle(remainders)
    return AllocationPlan(
        dataset_id=dataset_id,
        goal=goal,
        annotator_ids=annotator_ids,
        fraction=fraction,
        quota=quota,
        seed=seed,
        filter_config=filter_config,
        inter_pool=tuple((e.image_id, e.n_agents) for e in inter),
        exclusive_pool=tuple((e.image_id, e.n_agents) for e in remainders),
    )


@dataclass(frozen=True)
class TaskRef:
    image_id: str
    pool: str
    newly_claimed: bool = False


@dataclass
class AnnotatorProgress:
    inter_done_agents: int = 0
    inter_cursor: int = 0
    exclusive_done_agents: int = 0
    images_done: int = 0


class PlanState:
    """Mutable scheduling state over an immutable plan.

    All mutation is funneled through one internal lock so claims behave
    as atomic check-and-set even when used without the service's own
    serialization. Counters only ever grow.
    """

    def __init__(self, plan: AllocationPlan):
        self.plan = plan
        self._lock = threading.Lock()
        self._progress = {a: AnnotatorProgress() for a in plan.annotator_ids}
        self._inter_agents = dict(plan.inter_pool)
        self._exclusive_agents = dict(plan.exclusive_pool)
        self._exclusive_order = [image_id for image_id, _ in plan.exclusive_pool]
        self._claims: dict[str, str] = {}
        self._completed: set[tuple[str, str]] = set()
        self._inter_completed_once: set[str] = set()
        self._distinct_done = 0
        self._skipped: dict[str, set[str]] = {a: set() for a in plan.annotator_ids}

    def _check_annotator(self, annotator: str) -> None:
        if annotator not in self._progress:
            raise ConfigError(f"annotator {annotator!r} not registered in plan")

    @property
    def distinct_agents_done(self) -> int:
        return self._distinct_done

    def goal_met(self) -> bool:
        return self._distinct_done >= self.plan.goal

    def claims(self) -> dict[str, str]:
        with self._lock:
            return dict(self._claims)

    def peek_current(self, annotator: str) -> TaskRef | None:
        """The annotator's current unfinished image, without claiming."""
        self._check_annotator(annotator)
        with self._lock:
            progress = self._progress[annotator]
            pool = self.plan.inter_pool
            cursor = progress.inter_cursor
            while progress.inter_done_agents < self.plan.quota and cursor < len(pool):
                image_id = pool[cursor][0]
                if image_id in self._skipped[annotator]:
                    cursor += 1
                    continue
                return TaskRef(image_id, INTER_POOL)
            for image_id, owner in self._claims.items():
                if (owner == annotator
                        and (annotator, image_id) not in self._completed
                        and image_id not in self._skipped[annotator]):
                    return TaskRef(image_id, EXCLUSIVE_POOL)
            return None

    def has_completed(self, annotator: str, image_id: str) -> bool:
        with self._lock:
            return (annotator, image_id) in self._completed

    def next_image(self, annotator: str) -> TaskRef | None:
        """The annotator's next image, claiming an exclusive one if needed.

        Returns the current unfinished image when one is already assigned,
        so repeated calls without completion are stable. None means done.
        """
        self._check_annotator(annotator)
        with self._lock:
            progress = self._progress[annotator]
            pool = self.plan.inter_pool
            while progress.inter_done_agents < self.plan.quota and progress.inter_cursor < len(pool):
                image_id = pool[progress.inter_cursor][0]
                if image_id in self._skipped[annotator]:
                    progress.inter_cursor += 1
                    continue
                return TaskRef(image_id, INTER_POOL)
            claimed = [
                image_id
                for image_id, owner in self._claims.items()
                if owner == annotator and (annotator, image_id) not in self._completed
                and image_id not in self._skipped[annotator]
            ]
            if claimed:
                return TaskRef(claimed[0], EXCLUSIVE_POOL)
            if self.goal_met():
                return None
            while self._exclusive_order:
                image_id = self._exclusive_order[0]
                if image_id in self._claims:
                    self._exclusive_order.pop(0)
                    continue
                self._exclusive_order.pop(0)
                self._claims[image_id] = annotator
                return TaskRef(image_id, EXCLUSIVE_POOL, newly_claimed=True)
            return None

    def apply_claim(self, annotator: str, image_id: str) -> None:
        """Re-apply a journaled claim during replay."""
        self._check_annotator(annotator)
        with self._lock:
            owner = self._claims.get(image_id)
            if owner is not None and owner != annotator:
                raise DataError(f"image {image_id!r} already claimed by {owner!r}")
            self._claims[image_id] = annotator
            if image_id in self._exclusive_order:
                self._exclusive_order.remove(image_id)

    def record_image_complete(self, annotator: str, image_id: str, skipped: bool = False) -> None:
        """Advance counters when the annotator finished (or skipped) an image."""
        self._check_annotator(annotator)
        with self._lock:
            key = (annotator, image_id)
            if key in self._completed:
                return
            self._completed.add(key)
            if skipped:
                self._skipped[annotator].add(image_id)
            progress = self._progress[annotator]
            progress.images_done += 1
            if image_id in self._inter_agents:
                agents = 0 if skipped else self._inter_agents[image_id]
                progress.inter_done_agents += agents
                pool_ids = [i for i, _ in self.plan.inter_pool]
                if (progress.inter_cursor < len(pool_ids)
                        and pool_ids[progress.inter_cursor] == image_id):
                    progress.inter_cursor += 1
                if image_id not in self._inter_completed_once and not skipped:
                    self._inter_completed_once.add(image_id)
                    self._distinct_done += agents
            elif image_id in self._exclusive_agents:
                agents = 0 if skipped else self._exclusive_agents[image_id]
                progress.exclusive_done_agents += agents
                self._distinct_done += agents
            else:
                raise DataError(f"image {image_id!r} is not in any pool")

    def mark_discarded(self, image_id: str) -> None:
        """A discarded image stops being offered to anyone."""
        with self._lock:
            for annotator in self._skipped:
                self._skipped[annotator].add(image_id)
            if image_id in self._exclusive_order:
                self._exclusive_order.remove(image_id)

    def progress(self, annotator: str) -> dict:
        self._check_annotator(annotator)
        with self._lock:
            progress = self._progress[annotator]
            return {
                "annotator_id": annotator,
                "inter_done": progress.inter_done_agents,
                "inter_quota": self.plan.quota,
                "exclusive_done": progress.exclusive_done_agents,
                "agents_done": progress.inter_done_agents + progress.exclusive_done_agents,
                "images_done": progress.images_done,
                "dataset_goal": self.plan.goal,
                "dataset_agents_done": self._distinct_done,
                "dataset_done": self._distinct_done >= self.plan.goal,
            }
