"""Dataset ingestion: source label files to canonical records."""

from .fixtures import generate_fixture_dataset
from .jsonadapter import AdapterConfig, ingest_json_dataset
from .kitti import ingest_kitti
from .manifest import IngestManifest

__all__ = [
    "AdapterConfig",
    "IngestManifest",
    "generate_fixture_dataset",
    "ingest_json_dataset",
    "ingest_kitti",
]
