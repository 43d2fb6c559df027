"""Deterministic synthetic datasets for tests and end-to-end simulation.

Generated agents carry a ground-truth attribute assignment under
``sandbox_tags["truth"]``; virtual annotators read it back and perturb it
with a configured disagreement rate. Same seed, same bytes.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from ..errors import ConfigError
from ..model import PERSON, VEHICLE, BoundingBox, CanonicalAgent, CanonicalImage
from .manifest import IngestManifest

# Skewed ground-truth label weights, roughly shaped like street scenes.
_PERSON_WEIGHTS = {
    "age": (("adult", 0.90), ("kid", 0.04), ("unknown", 0.06)),
    "sex": (("male", 0.50), ("female", 0.34), ("unknown", 0.16)),
    "skin": (("light", 0.70), ("dark", 0.10), ("unknown", 0.20)),
    "means_of_transport": (
        ("pedestrian", 0.82), ("bicycle", 0.12), ("pmd", 0.02),
        ("wheelchair", 0.01), ("unknown", 0.03),
    ),
}
_VEHICLE_WEIGHTS = {
    "vehicle_type": (
        ("car", 0.75), ("truck", 0.07), ("bus", 0.03), ("van", 0.05),
        ("motorcycle", 0.03), ("other", 0.02), ("unknown", 0.05),
    ),
    "colour": (
        ("black", 0.25), ("white", 0.22), ("grey", 0.21), ("blue", 0.08),
        ("red", 0.08), ("yellow", 0.04), ("green", 0.02), ("other", 0.03),
        ("unknown", 0.07),
    ),
    "car_type": (
        ("small", 0.10), ("medium", 0.30), ("large", 0.40), ("pickup", 0.05),
        ("convertible", 0.03), ("other", 0.05), ("unknown", 0.07),
    ),
}
_ASPECT = {PERSON: 0.4, VEHICLE: 1.4}  # width / height


@dataclass(frozen=True)
class SizeDistribution:
    """Uniform bbox-area range in squared pixels."""

    min_area: float = 6500.0
    max_area: float = 40000.0

    def __post_init__(self):
        if not (0 < self.min_area <= self.max_area):
            raise ConfigError("need 0 < min_area <= max_area")


def _weighted(rng: random.Random, weights) -> str:
    labels = [l for l, _ in weights]
    probs = [p for _, p in weights]
    return rng.choices(labels, weights=probs, k=1)[0]


def _truth(rng: random.Random, kind: str) -> dict[str, str]:
    weights = _PERSON_WEIGHTS if kind == PERSON else _VEHICLE_WEIGHTS
    truth = {name: _weighted(rng, table) for name, table in weights.items()}
    if kind == VEHICLE and truth["vehicle_type"] != "car":
        truth["car_type"] = "unknown"
    return truth


def _box(rng: random.Random, kind: str, size: SizeDistribution,
         width: int, height: int, near: BoundingBox | None = None) -> BoundingBox:
    aspect = _ASPECT[kind]
    max_fit = min((height - 2.0) ** 2 * aspect, (width - 2.0) ** 2 / aspect)
    area = min(rng.uniform(size.min_area, size.max_area), max_fit)
    box_h = math.sqrt(area / aspect)
    box_w = area / box_h
    if near is not None:
        # Neighbouring box: overlapping or nearly so, similar height.
        x = min(max(near.x_max - rng.uniform(0, 0.4) * box_w, 0.0), width - box_w - 1)
        y = min(max(near.y_min + rng.uniform(-0.1, 0.1) * box_h, 0.0), height - box_h - 1)
    else:
        x = rng.uniform(0, width - box_w - 1)
        y = rng.uniform(0, height - box_h - 1)
    return BoundingBox(round(x, 2), round(y, 2), round(x + box_w, 2), round(y + box_h, 2))


def generate_fixture_dataset(
    seed: int,
    n_images: int,
    agent_kind: str = PERSON,
    size_distribution: SizeDistribution | None = None,
    mean_agents: float = 3.0,
    resolution: tuple[int, int] = (1920, 1080),
    dataset_id: str = "fixture",
    split: str = "train",
    cluster_probability: float = 0.25,
    sequences: bool = False,
    sequence_length: int = 3,
) -> tuple[list[CanonicalImage], IngestManifest]:
    """Generate a deterministic synthetic canonical dataset.

    With ``sequences`` enabled, images come in runs sharing a sequence id;
    the first frame is the key frame and later frames repeat its agents
    (same uuids, jittered boxes), which is what attribute propagation
    needs to have something to copy to.
    """
    if agent_kind not in (PERSON, VEHICLE, "both"):
        raise ConfigError("agent_kind must be person, vehicle or both")
    size = size_distribution or SizeDistribution()
    rng = random.Random(seed)
    width, height = resolution
    manifest = IngestManifest(dataset_id=dataset_id, resolution=resolution)
    manifest.provenance_hash = f"seed:{seed}"

    images: list[CanonicalImage] = []
    image_index = 0
    uuid_counter = 0
    while image_index < n_images:
        run_length = min(sequence_length, n_images - image_index) if sequences else 1
        sequence_id = f"seq{image_index:05d}" if sequences else None
        spread = max(1, int(round(2 * mean_agents - 1)))
        n_agents = rng.randint(1, spread)
        agents: list[CanonicalAgent] = []
        for i in range(n_agents):
            kind = agent_kind if agent_kind != "both" else (PERSON, VEHICLE)[rng.randint(0, 1)]
            near = None
            if agents and kind == PERSON and rng.random() < cluster_probability:
                near = agents[-1].bbox
            bbox = _box(rng, kind, size, width, height, near=near)
            identity = "Pedestrian" if kind == PERSON else "Car"
            agents.append(
                CanonicalAgent(
                    agent_image_id=i,
                    uuid=f"fx-{seed}-{uuid_counter + i}",
                    bbox=bbox,
                    identity=identity,
                    sandbox_tags={"agent_kind": kind, "truth": _truth(rng, kind)},
                )
            )
        uuid_counter += n_agents

        for frame in range(run_length):
            image_id = f"{dataset_id}_{image_index:05d}"
            frame_agents = agents
            if frame > 0:
                # Follower frame: same agents, slightly shifted boxes.
                frame_agents = [
                    CanonicalAgent(
                        agent_image_id=a.agent_image_id,
                        uuid=a.uuid,
                        bbox=_jitter(rng, a.bbox, width, height),
                        identity=a.identity,
                        sandbox_tags=dict(a.sandbox_tags),
                    )
                    for a in agents
                ]
            images.append(
                CanonicalImage(
                    image_id=image_id,
                    source_dataset=dataset_id,
                    split=split,
                    file_path=f"images/{image_id}.png",
                    width=width,
                    height=height,
                    agents=tuple(frame_agents),
                    sequence_id=sequence_id,
                    key_frame=(frame == 0) if sequences else False,
                )
            )
            manifest.count_image(split, len(frame_agents))
            for agent in frame_agents:
                manifest.count_agent(agent.identity)
            image_index += 1
    return images, manifest


def _jitter(rng: random.Random, bbox: BoundingBox, width: int, height: int) -> BoundingBox:
    dx = rng.uniform(-5.0, 5.0)
    dy = rng.uniform(-3.0, 3.0)
    dx = min(max(dx, -bbox.x_min), width - bbox.x_max)
    dy = min(max(dy, -bbox.y_min), height - bbox.y_max)
    return BoundingBox(
        round(bbox.x_min + dx, 2), round(bbox.y_min + dy, 2),
        round(bbox.x_max + dx, 2), round(bbox.y_max + dy, 2),
    )
