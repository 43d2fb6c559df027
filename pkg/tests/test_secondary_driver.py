"""Secondary acceptance: an automated driver completes a 20-image fixture
dataset over the real HTTP API exactly the way the frontend does, then the
resulting export is pushed through the primary analytics checks.

The browser-level behaviours themselves (canvas, keyboard, submit gate)
are covered by the frontend's own vitest suite against payloads captured
from this same backend; this driver exercises the identical wire protocol
end to end, headlessly.
"""

from __future__ import annotations

import json
import time

import pytest
from fastapi.testclient import TestClient

from attrikit.agreement import agreement_report, fleiss_kappa, percentage_of_disagreement
from attrikit.allocation import FilterConfig, build_plan, filter_by_area
from attrikit.canonical import read_dataset
from attrikit.ingest import generate_fixture_dataset
from attrikit.ingest.fixtures import SizeDistribution
from attrikit.model import UNKNOWN
from attrikit.service import DatasetService, Journal
from attrikit.service.api import ServiceRegistry, create_app
from conftest import record_acceptance
from oracles import bf_fleiss, bf_non_unanimous_fraction

ANNOTATORS = tuple(f"ui{i}" for i in range(1, 6))


def fixture_service(tmp_path, journal_name="journal.jsonl"):
    images, _ = generate_fixture_dataset(
        seed=31, n_images=20, agent_kind="person", mean_agents=3.0,
        size_distribution=SizeDistribution(min_area=8100.0, max_area=30000.0),
        cluster_probability=0.4,
    )
    eligible = filter_by_area(images, FilterConfig())
    goal = sum(e.n_agents for e in eligible)
    plan = build_plan("uifix", eligible, goal=goal, annotator_ids=ANNOTATORS, seed=31)
    journal = Journal(tmp_path / journal_name)
    return images, plan, DatasetService("uifix", images, plan, journal)


def label_for(meta, agent, field, salt):
    """Deterministic label choice, mirroring the frontend driver."""
    alphabet = meta["alphabets"][agent["kind"]][field]
    value = salt
    for ch in agent["uuid"] + field:
        value = (value * 31 + ord(ch)) % 9973
    return alphabet[value % len(alphabet)]


def drive_annotator(client, meta, annotator, salt):
    """Complete the dataset as the UI would; returns observed facts."""
    token = client.post("/sessions", json={
        "annotator_id": annotator, "dataset_id": "uifix",
    }).json()["token"]
    shapes = set()
    group_mismatches = 0
    group_edits = 0
    payloads = 0
    rounds = 0
    while True:
        task = client.get("/task", params={"token": token, "dataset": "uifix"}).json()
        shapes.add(tuple(sorted(task.keys())))
        if task["status"] != "ok":
            break
        image_id = task["image"]["image_id"]
        groups = [dict(g) for g in task["groups"]]
        if groups and (rounds % 3 == 0 or group_edits == 0):
            # unlink + relink round trip, as the UI's group editor does
            echo = client.post("/groups", json={
                "dataset_id": "uifix", "token": token, "image_id": image_id,
                "groups": groups,
            })
            assert echo.status_code == 200, echo.text
            group_edits += 1
            served = client.get("/task", params={"token": token, "dataset": "uifix"}).json()
            if served["groups"] != echo.json()["groups"]:
                group_mismatches += 1
        member_of = {m: g["group_id"] for g in groups for m in g["members"]}
        for agent in task["agents"]:
            attributes = {"kind": agent["kind"]}
            qualifiers = {}
            for field in meta["alphabets"][agent["kind"]]:
                label = label_for(meta, agent, field, salt)
                attributes[field] = label
                if label == UNKNOWN:
                    qualifiers[field] = "not_clear" if payloads % 2 else "clear"
            attributes["group_id"] = member_of.get(agent["agent_image_id"])
            if qualifiers:
                attributes["unknown_confidence"] = qualifiers
            response = client.post("/annotations", json={
                "dataset_id": "uifix", "token": token, "image_id": image_id,
                "agent_uuid": agent["uuid"], "attributes": attributes,
            })
            assert response.status_code == 200, response.text
            payloads += 1
        rounds += 1
    return {
        "shapes": shapes,
        "group_edits": group_edits,
        "group_mismatches": group_mismatches,
        "payloads": payloads,
    }


class TestSecondaryAcceptance:
    def test_driver_run_and_analytics(self, tmp_path):
        criterion = "secondary: automated driver completes 20-image fixture end to end"
        started = time.perf_counter()
        images, plan, service = fixture_service(tmp_path)
        app = create_app(ServiceRegistry({"uifix": service}))
        with TestClient(app) as client:
            meta = client.get("/meta").json()
            results = [
                drive_annotator(client, meta, annotator, salt)
                for salt, annotator in enumerate(ANNOTATORS, start=3)
            ]

        # Every payload passed server validation (asserted per call) and
        # the task payload shape never changed across the pool transition.
        for result in results:
            assert result["group_mismatches"] == 0
            ok_shapes = {s for s in result["shapes"] if "image" in s}
            assert len(ok_shapes) == 1
            assert not any("inter" in key or "exclusive" in key
                           for shape in ok_shapes for key in shape)
            assert result["group_edits"] > 0

        # The export must pass the primary analytics checks.
        service.export(tmp_path / "export")
        replayed = DatasetService(
            "uifix", images, plan, Journal(tmp_path / "journal.jsonl")
        )
        replayed.export(tmp_path / "export2")
        assert (tmp_path / "export" / "final.jsonl").read_bytes() == \
            (tmp_path / "export2" / "final.jsonl").read_bytes()

        claims = service.exclusive_claims()
        for image_id, owner in claims.items():
            raters = {a for (a, img, _u) in service.annotation_keys() if img == image_id}
            assert raters == {owner}

        rater_images = {
            annotator: {i.image_id: i
                        for i in read_dataset(tmp_path / "export" / "raters" / f"{annotator}.jsonl")}
            for annotator in ANNOTATORS
        }
        report = agreement_report({"uifix": rater_images})
        allowed = {"5", "4/1", "3/2", "3/1/1", "2/2/1", "2/1/1/1", "1/1/1/1/1"}
        for attribute in ("age", "sex", "skin", "means_of_transport"):
            assert attribute in report.fleiss, attribute
            fleiss_row = report.fleiss[attribute]
            assert fleiss_row["n_items"] > 0
            assert set(report.patterns[attribute]["raw"]) <= allowed
        # Cross-check the exported matrices against the independent oracles.
        from attrikit.agreement import build_matrix

        for attribute in ("age", "means_of_transport"):
            matrix = build_matrix(rater_images, attribute)
            rows = [list(row) for row in matrix.ratings if all(l is not None for l in row)]
            assert rows, attribute
            assert abs(percentage_of_disagreement(matrix)
                       - bf_non_unanimous_fraction(rows)) < 1e-12
            result = fleiss_kappa(matrix)
            p, p_e, _kappa = bf_fleiss(rows)
            assert abs(result.p_bar - p) < 1e-12
            assert abs(result.p_e - p_e) < 1e-12

        elapsed = time.perf_counter() - started
        assert elapsed < 120.0
        record_acceptance(
            criterion, True,
            f"{sum(r['payloads'] for r in results)} payloads, "
            f"{len(claims)} exclusive claims, {elapsed:.1f}s",
        )

    def test_frontend_fixture_matches_served_wire_format(self, tmp_path):
        """The committed frontend fixture stays in sync with the backend."""
        from pathlib import Path

        fixture_path = Path(__file__).parent.parent / "frontend" / "test" / "fixtures" / "tasks_20.json"
        if not fixture_path.exists():
            pytest.skip("frontend fixture not generated")
        fixture = json.loads(fixture_path.read_text())
        _, _, service = fixture_service(tmp_path, journal_name="sync.jsonl")
        app = create_app(ServiceRegistry({"uifix": service}))
        with TestClient(app) as client:
            meta = client.get("/meta").json()
            token = client.post("/sessions", json={
                "annotator_id": "ui1", "dataset_id": "uifix",
            }).json()["token"]
            task = client.get("/task", params={"token": token, "dataset": "uifix"}).json()
        assert fixture["meta"]["alphabets"] == meta["alphabets"]
        assert fixture["meta"]["unknown_qualifiers"] == meta["unknown_qualifiers"]
        ok_task = next(t for t in fixture["tasks"] if t["status"] == "ok")
        assert sorted(ok_task.keys()) == sorted(task.keys())
        assert sorted(ok_task["agents"][0].keys()) == sorted(task["agents"][0].keys())
