"""HTTP surface: the same workflow driven through the FastAPI app."""

import pytest
from fastapi.testclient import TestClient

from attrikit.service.api import ServiceRegistry, create_app
from test_service import build_service, person_payload


@pytest.fixture()
def client(tmp_path):
    service, images, plan = build_service(tmp_path, n_images=14, annotators=("a1", "a2"))
    registry = ServiceRegistry({"fx": service})
    app = create_app(registry)
    with TestClient(app) as test_client:
        yield test_client, service, images, plan


def open_session(client, annotator="a1"):
    response = client.post("/sessions", json={"annotator_id": annotator, "dataset_id": "fx"})
    assert response.status_code == 200
    return response.json()["token"]


class TestSessionsEndpoint:
    def test_start_session(self, client):
        http, *_ = client
        response = http.post("/sessions", json={"annotator_id": "a1", "dataset_id": "fx"})
        body = response.json()
        assert body["progress"]["inter_done"] == 0
        assert body["token"]

    def test_unknown_dataset_404(self, client):
        http, *_ = client
        response = http.post("/sessions", json={"annotator_id": "a1", "dataset_id": "zz"})
        assert response.status_code == 404

    def test_unknown_annotator_401(self, client):
        http, *_ = client
        response = http.post("/sessions", json={"annotator_id": "zz", "dataset_id": "fx"})
        assert response.status_code == 401


class TestMeta:
    def test_alphabets_served(self, client):
        http, *_ = client
        body = http.get("/meta").json()
        assert body["alphabets"]["person"]["age"] == ["adult", "kid", "unknown"]
        assert body["alphabets"]["vehicle"]["colour"][-1] == "unknown"
        assert body["unknown_qualifiers"] == ["clear", "not_clear"]
        assert body["datasets"] == ["fx"]


class TestTaskAndSubmit:
    def test_full_image_cycle(self, client):
        http, *_ = client
        token = open_session(http)
        task = http.get("/task", params={"token": token, "dataset": "fx"}).json()
        assert task["status"] == "ok"
        assert task["agents"]
        for agent in task["agents"]:
            response = http.post("/annotations", json={
                "dataset_id": "fx",
                "token": token,
                "image_id": task["image"]["image_id"],
                "agent_uuid": agent["uuid"],
                "attributes": person_payload(age="adult"),
            })
            assert response.status_code == 200
        progress = http.get("/progress", params={"token": token, "dataset": "fx"}).json()
        assert progress["inter_done"] == len(task["agents"])

    def test_validation_error_payload(self, client):
        http, *_ = client
        token = open_session(http)
        task = http.get("/task", params={"token": token, "dataset": "fx"}).json()
        response = http.post("/annotations", json={
            "dataset_id": "fx",
            "token": token,
            "image_id": task["image"]["image_id"],
            "agent_uuid": task["agents"][0]["uuid"],
            "attributes": {"kind": "person", "age": "adult"},
        })
        assert response.status_code == 422
        body = response.json()
        assert body["error"]["code"] == "invalid"
        assert "missing" in body["error"]["message"]

    def test_group_edit_endpoint(self, client):
        http, service, *_ = client
        token = open_session(http)
        while True:
            task = http.get("/task", params={"token": token, "dataset": "fx"}).json()
            if len(task["agents"]) >= 2:
                break
            for agent in task["agents"]:
                http.post("/annotations", json={
                    "dataset_id": "fx", "token": token,
                    "image_id": task["image"]["image_id"],
                    "agent_uuid": agent["uuid"],
                    "attributes": person_payload(),
                })
        members = [a["agent_image_id"] for a in task["agents"][:2]]
        response = http.post("/groups", json={
            "dataset_id": "fx", "token": token,
            "image_id": task["image"]["image_id"],
            "groups": [{"group_id": "gX", "members": members}],
        })
        assert response.status_code == 200
        again = http.get("/task", params={"token": token, "dataset": "fx"}).json()
        assert again["groups"][0]["group_id"] == "gX"

    def test_flag_endpoint(self, client):
        http, *_ = client
        token = open_session(http)
        task = http.get("/task", params={"token": token, "dataset": "fx"}).json()
        response = http.post("/flags", json={
            "dataset_id": "fx", "token": token,
            "image_id": task["image"]["image_id"], "reason": "mislabelled",
        })
        assert response.status_code == 200
        following = http.get("/task", params={"token": token, "dataset": "fx"}).json()
        assert following["image"]["image_id"] != task["image"]["image_id"]


class TestExportEndpoint:
    def test_export_empty(self, client):
        http, *_ = client
        body = http.get("/export/fx").json()
        assert body["manifest"]["final_images"] == 0
        assert body["final_jsonl"] == ""

    def test_export_after_annotations(self, client):
        http, *_ = client
        token = open_session(http)
        task = http.get("/task", params={"token": token, "dataset": "fx"}).json()
        for agent in task["agents"]:
            http.post("/annotations", json={
                "dataset_id": "fx", "token": token,
                "image_id": task["image"]["image_id"],
                "agent_uuid": agent["uuid"],
                "attributes": person_payload(age="kid"),
            })
        body = http.get("/export/fx").json()
        assert body["manifest"]["final_images"] == 1
        assert '"age":"kid"' in body["final_jsonl"]


class TestImagesEndpoint:
    def test_missing_file_404(self, client):
        http, _, images, _ = client
        response = http.get(f"/images/fx/{images[0].image_id}")
        assert response.status_code == 404

    def test_serves_bytes_when_present(self, tmp_path):
        service, images, plan = build_service(tmp_path, n_images=4, annotators=("a1", "a2"))
        root = tmp_path / "imgroot"
        target = root / images[0].file_path
        target.parent.mkdir(parents=True)
        target.write_bytes(b"\x89PNG fake")
        registry = ServiceRegistry({"fx": service}, {"fx": root})
        with TestClient(create_app(registry)) as http:
            response = http.get(f"/images/fx/{images[0].image_id}")
            assert response.status_code == 200
            assert response.content == b"\x89PNG fake"
