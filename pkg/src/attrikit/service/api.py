"""HTTP+JSON API over dataset services.

Endpoints mirror the annotation workflow: open a session, fetch the next
task, submit per-agent attributes, edit groups, watch progress, pull the
image bytes and the canonical export. Bodies are canonical-format
fragments; errors come back as ``{"error": {code, message, details}}``.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from fastapi import Body, FastAPI, Query
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse

from ..errors import AttrikitError
from ..model import PERSON_FIELDS, QUALIFIERS, VEHICLE_FIELDS
from .state import DatasetService, ServiceError


class ServiceRegistry:
    """The running datasets, by id."""

    def __init__(self, services: dict[str, DatasetService], image_roots: dict[str, Path] | None = None):
        self.services = services
        self.image_roots = image_roots or {}

    def get(self, dataset_id: str) -> DatasetService:
        service = self.services.get(dataset_id)
        if service is None:
            raise ServiceError(f"unknown dataset {dataset_id!r}", code="not_found")
        return service


def _error_response(exc: ServiceError) -> JSONResponse:
    status = {
        "session": 401,
        "not_found": 404,
        "not_assigned": 409,
        "done": 409,
    }.get(exc.code, 422)
    return JSONResponse(
        status_code=status,
        content={"error": {"code": exc.code, "message": str(exc), "details": exc.details}},
    )


def create_app(registry: ServiceRegistry) -> FastAPI:
    app = FastAPI(title="attrikit annotation service", docs_url=None, redoc_url=None)

    @app.exception_handler(ServiceError)
    async def service_error_handler(request, exc: ServiceError):
        return _error_response(exc)

    @app.exception_handler(AttrikitError)
    async def attrikit_error_handler(request, exc: AttrikitError):
        return JSONResponse(
            status_code=422,
            content={"error": {"code": "invalid", "message": str(exc), "details": []}},
        )

    @app.get("/meta")
    def meta():
        return {
            "datasets": sorted(registry.services),
            "alphabets": {
                "person": {k: list(v) for k, v in PERSON_FIELDS.items()},
                "vehicle": {k: list(v) for k, v in VEHICLE_FIELDS.items()},
            },
            "unknown_qualifiers": list(QUALIFIERS),
        }

    @app.post("/sessions")
    def start_session(body: dict = Body(...)):
        service = registry.get(str(body.get("dataset_id", "")))
        return service.start_session(str(body.get("annotator_id", "")))

    @app.get("/task")
    def get_task(token: str = Query(...), dataset: str = Query(...)):
        return registry.get(dataset).get_task(token)

    @app.post("/annotations")
    def submit_annotation(body: dict = Body(...)):
        service = registry.get(str(body.get("dataset_id", "")))
        return service.submit_annotation(
            token=str(body.get("token", "")),
            agent_uuid=str(body.get("agent_uuid", "")),
            attributes_obj=body.get("attributes") or {},
            image_id=body.get("image_id"),
            error_in_labelling=bool(body.get("error_in_labelling", False)),
            groups_obj=body.get("groups"),
        )

    @app.post("/groups")
    def set_groups(body: dict = Body(...)):
        service = registry.get(str(body.get("dataset_id", "")))
        return service.set_groups(
            token=str(body.get("token", "")),
            image_id=str(body.get("image_id", "")),
            groups_obj=body.get("groups") or [],
        )

    @app.post("/flags")
    def flag_image(body: dict = Body(...)):
        service = registry.get(str(body.get("dataset_id", "")))
        return service.flag_image(
            token=str(body.get("token", "")),
            image_id=str(body.get("image_id", "")),
            reason=str(body.get("reason", "")),
        )

    @app.post("/propagations")
    def propagate(body: dict = Body(...)):
        service = registry.get(str(body.get("dataset_id", "")))
        count = service.propagate_sequence(
            token=str(body.get("token", "")),
            key_image_id=str(body.get("image_id", "")),
            agent_uuid=str(body.get("agent_uuid", "")),
        )
        return {"status": "ok", "propagated": count}

    @app.get("/progress")
    def progress(token: str = Query(...), dataset: str = Query(...)):
        return registry.get(dataset).progress(token)

    @app.get("/images/{dataset_id}/{image_id}")
    def image_bytes(dataset_id: str, image_id: str):
        service = registry.get(dataset_id)
        image = service.image_record(image_id)
        if image is None:
            raise ServiceError(f"unknown image {image_id!r}", code="not_found")
        root = registry.image_roots.get(dataset_id)
        path = Path(image.file_path)
        if root is not None and not path.is_absolute():
            path = root / path
        if not path.exists():
            raise ServiceError(f"image file not found: {path}", code="not_found")
        return FileResponse(path)

    @app.get("/export/{dataset_id}")
    def export(dataset_id: str):
        service = registry.get(dataset_id)
        with tempfile.TemporaryDirectory() as tmp:
            manifest = service.export(tmp)
            final = (Path(tmp) / "final.jsonl").read_text(encoding="utf-8")
        return {"manifest": manifest, "final_jsonl": final}

    @app.get("/health")
    def health():
        return PlainTextResponse("ok")

    return app
