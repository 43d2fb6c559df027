"""Capture real server payloads into a fixture for the frontend tests.

Runs the backend in-process over a 20-image synthetic dataset and records
the exact /meta document and the sequence of /task payloads one annotator
sees while completing the dataset, crossing the control-pool transition
on the way. The frontend's fake server replays these verbatim.

Usage: python3 frontend/scripts/generate_fixtures.py [out.json]
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

from attrikit.allocation import FilterConfig, build_plan, filter_by_area
from attrikit.ingest import generate_fixture_dataset
from attrikit.ingest.fixtures import SizeDistribution
from attrikit.model import PERSON_FIELDS, QUALIFIERS, VEHICLE_FIELDS
from attrikit.service import DatasetService, Journal


def truth_payload(image, uuid):
    agent = image.agent_by_uuid(uuid)
    truth = dict(agent.sandbox_tags["truth"])
    kind = agent.sandbox_tags["agent_kind"]
    payload = {"kind": kind, **truth}
    if kind == "vehicle" and payload["vehicle_type"] != "car":
        payload["car_type"] = "unknown"
    if kind == "person":
        qualifiers = {k: "clear" for k, v in truth.items() if v == "unknown"}
        if qualifiers:
            payload["unknown_confidence"] = qualifiers
    return payload


def main(out_path: str) -> None:
    images, _ = generate_fixture_dataset(
        seed=20, n_images=20, agent_kind="person", mean_agents=3.0,
        size_distribution=SizeDistribution(min_area=8100.0, max_area=30000.0),
        cluster_probability=0.45,
    )
    eligible = filter_by_area(images, FilterConfig())
    goal = sum(e.n_agents for e in eligible)
    plan = build_plan("uifix", eligible, goal=goal,
                      annotator_ids=("driver", "other"), seed=20)
    with tempfile.TemporaryDirectory() as tmp:
        service = DatasetService("uifix", images, plan, Journal(Path(tmp) / "j.jsonl"))
        token = service.start_session("driver")["token"]
        by_id = {i.image_id: i for i in images}
        tasks = []
        while True:
            task = service.get_task(token)
            tasks.append(task)
            if task["status"] != "ok":
                break
            image = by_id[task["image"]["image_id"]]
            for agent in task["agents"]:
                service.submit_annotation(
                    token, agent["uuid"], truth_payload(image, agent["uuid"]),
                    image_id=task["image"]["image_id"],
                )
    inter_ids = [i for i, _ in plan.inter_pool]
    fixture = {
        "meta": {
            "datasets": ["uifix"],
            "alphabets": {
                "person": {k: list(v) for k, v in PERSON_FIELDS.items()},
                "vehicle": {k: list(v) for k, v in VEHICLE_FIELDS.items()},
            },
            "unknown_qualifiers": list(QUALIFIERS),
        },
        "dataset_id": "uifix",
        "quota": plan.quota,
        "inter_pool": inter_ids,
        "tasks": tasks,
    }
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    Path(out_path).write_text(json.dumps(fixture, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out_path}: {len(tasks) - 1} tasks + done, quota {plan.quota}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "frontend/test/fixtures/tasks_20.json")
