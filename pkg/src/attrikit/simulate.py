"""End-to-end simulation: virtual annotators driving the full pipeline.

Generates a fixture dataset, builds a plan, runs K virtual annotators
through the annotation service (optionally concurrently), exports, then
verifies the run: exclusive claims are disjoint, journal replay
reproduces the export byte-identically, and the measured per-attribute
disagreement matches the injected rate.

Disagreement injection works at item level so the disagreement share is
directly the injected probability: for each (agent, attribute), with
probability ``disagree`` exactly one rater deviates to a label different
from the ground truth (a soft "unknown, not clear" with probability
``soft_rate``); otherwise every rater reports the truth. Person fixtures
keep attributes independent; vehicle fixtures couple car_type to
vehicle_type, so the rate guarantee there covers only the independent
fields.
"""

from __future__ import annotations

import json
import math
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .agreement import agreement_report
from .agreement import write_report as write_agreement_report
from .allocation import FilterConfig, build_plan, filter_by_area
from .canonical import read_dataset, write_dataset_jsonl
from .errors import ConfigError, DataError
from .ingest import generate_fixture_dataset
from .ingest.fixtures import SizeDistribution
from .model import PERSON, PERSON_FIELDS, UNKNOWN, VEHICLE_FIELDS, CanonicalImage
from .service import DatasetService, Journal

INJECTED_FIELDS = {
    PERSON: tuple(PERSON_FIELDS),
    "vehicle": tuple(VEHICLE_FIELDS),
}
# Fields whose disagreement rate is guaranteed to equal the injection rate.
MEASURED_FIELDS = {
    PERSON: tuple(PERSON_FIELDS),
    "vehicle": ("vehicle_type", "colour"),
}


@dataclass
class SimulationResult:
    out_dir: Path
    annotators: tuple[str, ...]
    items: int
    disagree: float
    n_inter_items: int
    pd_measured: dict[str, float | None]
    pd_interval: tuple[float, float]
    claims_disjoint: bool
    replay_identical: bool
    files_compared: list[str] = field(default_factory=list)

    def pd_within_interval(self) -> bool:
        low, high = self.pd_interval
        kind_fields = self.pd_measured
        return all(
            value is not None and low <= value <= high for value in kind_fields.values()
        )

    def to_obj(self) -> dict:
        return {
            "annotators": list(self.annotators),
            "items": self.items,
            "disagree": self.disagree,
            "n_inter_items": self.n_inter_items,
            "pd_measured": self.pd_measured,
            "pd_interval_99": list(self.pd_interval),
            "pd_within_interval": self.pd_within_interval(),
            "claims_disjoint": self.claims_disjoint,
            "replay_identical": self.replay_identical,
        }


def _deviant_label(rng: random.Random, alphabet, truth: str, soft_rate: float):
    """A label different from truth; soft deviations go to unknown/not_clear."""
    if truth != UNKNOWN and rng.random() < soft_rate:
        return UNKNOWN, "not_clear"
    hard = [label for label in alphabet if label not in (truth, UNKNOWN)]
    if not hard:
        return UNKNOWN, "not_clear"
    return rng.choice(hard), None


def _build_injections(
    images: list[CanonicalImage],
    annotators: tuple[str, ...],
    disagree: float,
    soft_rate: float,
    seed: int,
) -> dict[tuple[str, str], tuple[str, str, str | None]]:
    """(agent uuid, field) -> (deviating annotator, label, qualifier)."""
    rng = random.Random(f"{seed}:inject")
    injections = {}
    for image in sorted(images, key=lambda i: i.image_id):
        if image.sequence_id is not None and not image.key_frame:
            continue
        for agent in image.agents:
            kind = agent.sandbox_tags.get("agent_kind")
            truth = agent.sandbox_tags.get("truth", {})
            fields = INJECTED_FIELDS.get(kind, ())
            alphabets = PERSON_FIELDS if kind == PERSON else VEHICLE_FIELDS
            for name in fields:
                if rng.random() < disagree:
                    rater = annotators[rng.randrange(len(annotators))]
                    label, qualifier = _deviant_label(
                        rng, alphabets[name], truth[name], soft_rate
                    )
                    injections[(agent.uuid, name)] = (rater, label, qualifier)
    return injections


def _payload_for(agent_task: dict, annotator: str, truth: dict, injections) -> dict:
    kind = agent_task["kind"]
    payload = {"kind": kind}
    qualifiers = {}
    for name in INJECTED_FIELDS[kind]:
        label = truth[name]
        injected = injections.get((agent_task["uuid"], name))
        if injected is not None and injected[0] == annotator:
            label = injected[1]
            if injected[2] is not None:
                qualifiers[name] = injected[2]
        if label == UNKNOWN and name not in qualifiers:
            qualifiers[name] = "clear"
        payload[name] = label
    if kind == "vehicle" and payload["vehicle_type"] != "car":
        payload["car_type"] = UNKNOWN
        qualifiers.pop("car_type", None)
    if kind == PERSON and qualifiers:
        payload["unknown_confidence"] = qualifiers
    if kind == "vehicle":
        payload.pop("unknown_confidence", None)
    return payload


def _drive_annotator(service: DatasetService, annotator: str, truths: dict, injections) -> None:
    token = service.start_session(annotator)["token"]
    while True:
        task = service.get_task(token)
        if task["status"] != "ok":
            return
        image_id = task["image"]["image_id"]
        for agent_task in task["agents"]:
            payload = _payload_for(
                agent_task, annotator, truths[agent_task["uuid"]], injections
            )
            service.submit_annotation(
                token, agent_task["uuid"], payload, image_id=image_id
            )


def _binomial_interval_99(p: float, n: int) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    z = 2.5758293035489004  # 99% two-sided normal quantile
    half = z * math.sqrt(p * (1.0 - p) / n)
    return (max(0.0, p - half), min(1.0, p + half))


def run_simulation(
    out_dir: str | Path,
    annotators: int = 5,
    items: int = 200,
    disagree: float = 0.1,
    soft_rate: float = 0.0,
    seed: int = 7,
    agent_kind: str = PERSON,
    mean_agents: float = 3.0,
    fraction: float = 0.06,
    concurrent: bool = True,
) -> SimulationResult:
    """Run the whole pipeline against virtual annotators and verify it."""
    if annotators < 2:
        raise ConfigError("need at least 2 annotators")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    annotator_ids = tuple(f"sim{i + 1}" for i in range(annotators))

    # Fixture areas sit above both thresholds so every agent is eligible.
    n_images = max(1, math.ceil(items / mean_agents))
    while True:
        images, _ = generate_fixture_dataset(
            seed=seed, n_images=n_images, agent_kind=agent_kind,
            size_distribution=SizeDistribution(min_area=8100.0, max_area=40000.0),
            mean_agents=mean_agents,
        )
        eligible = filter_by_area(images, FilterConfig())
        if sum(e.n_agents for e in eligible) >= items:
            break
        n_images = math.ceil(n_images * 1.2) + 1

    write_dataset_jsonl(images, out / "fixtures.jsonl")
    plan = build_plan(
        "sim", eligible, goal=items, annotator_ids=annotator_ids,
        fraction=fraction, seed=seed,
    )
    plan.save(out / "plan.json")

    journal = Journal(out / "journal.jsonl")
    service = DatasetService("sim", images, plan, journal)
    truths = {
        agent.uuid: agent.sandbox_tags["truth"]
        for image in images
        for agent in image.agents
    }
    injections = _build_injections(images, annotator_ids, disagree, soft_rate, seed)

    if concurrent:
        threads = [
            threading.Thread(
                target=_drive_annotator, args=(service, a, truths, injections)
            )
            for a in annotator_ids
        ]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
    else:
        for annotator in annotator_ids:
            _drive_annotator(service, annotator, truths, injections)

    service.export(out / "export")

    # Replay verification: a fresh service over the same journal must
    # materialize the same bytes.
    replayed = DatasetService("sim", images, plan, Journal(out / "journal.jsonl"))
    replayed.export(out / "export_replay")
    compared = ["final.jsonl", "export_manifest.json"] + [
        f"raters/{a}.jsonl" for a in annotator_ids
    ]
    replay_identical = all(
        (out / "export" / name).read_bytes() == (out / "export_replay" / name).read_bytes()
        for name in compared
    )

    claims = service.exclusive_claims()
    exclusive_ids = {i for i, _ in plan.exclusive_pool}
    owners_ok = set(claims) <= exclusive_ids
    rater_map: dict[str, set[str]] = {}
    for (annotator, image_id, _uuid) in service.annotation_keys():
        rater_map.setdefault(image_id, set()).add(annotator)
    claims_disjoint = owners_ok and all(
        rater_map.get(image_id, {owner}) == {owner} for image_id, owner in claims.items()
    )

    rater_images = {
        annotator: {
            image.image_id: image
            for image in read_dataset(out / "export" / "raters" / f"{annotator}.jsonl")
        }
        for annotator in annotator_ids
    }
    report = agreement_report({"sim": rater_images})
    write_agreement_report(report, out / "agreement")

    measured_fields = MEASURED_FIELDS[agent_kind]
    pd_measured = {name: report.pd_pooled.get(name) for name in measured_fields}
    n_inter = min(
        report.items_by_dataset.get("sim", {}).get(name, 0) for name in measured_fields
    )
    result = SimulationResult(
        out_dir=out,
        annotators=annotator_ids,
        items=items,
        disagree=disagree,
        n_inter_items=n_inter,
        pd_measured=pd_measured,
        pd_interval=_binomial_interval_99(disagree, n_inter),
        claims_disjoint=claims_disjoint,
        replay_identical=replay_identical,
        files_compared=compared,
    )
    (out / "summary.json").write_text(
        json.dumps(result.to_obj(), indent=2) + "\n", encoding="utf-8"
    )
    if not claims_disjoint:
        raise DataError("simulation violated exclusive-pool disjointness")
    if not replay_identical:
        raise DataError("journal replay did not reproduce the export")
    return result
