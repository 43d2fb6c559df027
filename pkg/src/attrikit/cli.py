"""Command-line entry point wiring the whole pipeline.

Subcommands: ingest, plan, serve, export, agreement, report, fixtures,
simulate. A JSON config file can predefine anything; flags win over the
file. Exit codes: 0 ok, 2 configuration error, 3 data error; errors are
also emitted as one JSON object on stderr for machine consumption.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import __version__
from .agreement import (
    DEFAULT_ANALYSES,
    UNKNOWN_CLEAR,
    UNKNOWN_NOT_CLEAR,
    AnalysisSpec,
    agreement_report,
    attribute_alphabet,
)
from .agreement import write_report as write_agreement_report
from .allocation import AllocationPlan, FilterConfig, build_plan, filter_by_area
from .bias import distribution_report
from .bias import write_report as write_distribution_report
from .canonical import read_dataset, write_dataset_jsonl
from .errors import AttrikitError, ConfigError, DataError
from .ingest import AdapterConfig, generate_fixture_dataset, ingest_json_dataset, ingest_kitti
from .ingest.fixtures import SizeDistribution
from .model import UNKNOWN
from .service import DatasetService, GroupParams, Journal
from .simulate import run_simulation

EXIT_CONFIG = 2
EXIT_DATA = 3


def _fail(code: int, error: AttrikitError) -> None:
    payload = {"error": {"type": type(error).__name__, "message": str(error)}}
    click.echo(json.dumps(payload), err=True)
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, exc)
        except (DataError, AttrikitError) as exc:
            _fail(EXIT_DATA, exc)

    return wrapper


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed config: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return obj


@click.group()
@click.version_option(__version__)
def main():
    """Attribute annotation workflow for road-scene datasets."""


@main.command()
@click.option("--dataset", "dataset_id", required=True,
              help="Dataset id; 'kitti' uses the built-in text parser.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="Adapter config (required for JSON-based datasets).")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True),
              help="Directory of source label files.")
@click.option("--images", "image_dir", type=click.Path(), default=None,
              help="Directory of image files (optional, for path resolution).")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Output directory for canonical.jsonl and manifest.json.")
@click.option("--split", default="train", show_default=True)
@handle_errors
def ingest(dataset_id, config_path, in_dir, image_dir, out_dir, split):
    """Parse source dataset labels into the canonical format."""
    out = Path(out_dir)
    if dataset_id == "kitti":
        images, manifest = ingest_kitti(in_dir, image_dir=image_dir, split=split)
    else:
        if config_path is None:
            raise ConfigError(f"dataset {dataset_id!r} needs --config (JSON adapter)")
        adapter = AdapterConfig.load(config_path)
        files = sorted(Path(in_dir).glob("*.json"))
        images, manifest = ingest_json_dataset(adapter, files)
    write_dataset_jsonl(images, out / "canonical.jsonl")
    manifest.save(out / "manifest.json")
    click.echo(json.dumps({"images": manifest.total_images,
                           "agents": manifest.total_agents}))


@main.command()
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--images", "n_images", type=int, default=100, show_default=True)
@click.option("--kind", type=click.Choice(["person", "vehicle", "both"]),
              default="person", show_default=True)
@click.option("--mean-agents", type=float, default=3.0, show_default=True)
@click.option("--min-area", type=float, default=6500.0, show_default=True)
@click.option("--max-area", type=float, default=40000.0, show_default=True)
@click.option("--sequences", is_flag=True, help="Generate key-frame sequences.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@handle_errors
def fixtures(seed, n_images, kind, mean_agents, min_area, max_area, sequences, out_dir):
    """Generate a deterministic synthetic dataset for tests and demos."""
    images, manifest = generate_fixture_dataset(
        seed=seed, n_images=n_images, agent_kind=kind, mean_agents=mean_agents,
        size_distribution=SizeDistribution(min_area=min_area, max_area=max_area),
        sequences=sequences,
    )
    out = Path(out_dir)
    write_dataset_jsonl(images, out / "canonical.jsonl")
    manifest.save(out / "manifest.json")
    click.echo(json.dumps({"images": manifest.total_images,
                           "agents": manifest.total_agents}))


@main.command()
@click.option("--dataset", "dataset_id", required=True)
@click.option("--canonical", "canonical_path", required=True, type=click.Path(exists=True),
              help="Canonical dataset (.jsonl file or directory of .json).")
@click.option("--goal", type=int, required=True, help="Final goal in agents.")
@click.option("--annotators", required=True,
              help="Comma-separated annotator ids, or a count (ids a1..aN).")
@click.option("--fraction", type=float, default=0.06, show_default=True,
              help="Share of the goal each annotator labels in the control pool.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--person-min-area", type=float, default=6000.0, show_default=True)
@click.option("--vehicle-min-area", type=float, default=8000.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def plan(dataset_id, canonical_path, goal, annotators, fraction, seed,
         person_min_area, vehicle_min_area, out_path):
    """Build the allocation plan for a canonical dataset."""
    if annotators.isdigit():
        annotator_ids = tuple(f"a{i + 1}" for i in range(int(annotators)))
    else:
        annotator_ids = tuple(a.strip() for a in annotators.split(",") if a.strip())
    config = FilterConfig(person_min_area=person_min_area,
                          vehicle_min_area=vehicle_min_area)
    images = read_dataset(canonical_path)
    eligible = filter_by_area(images, config)
    built = build_plan(dataset_id, eligible, goal=goal, annotator_ids=annotator_ids,
                       fraction=fraction, seed=seed, filter_config=config)
    built.save(out_path)
    click.echo(json.dumps({
        "dataset_id": dataset_id,
        "quota": built.quota,
        "inter_images": len(built.inter_pool),
        "inter_agents": built.inter_agents,
        "exclusive_images": len(built.exclusive_pool),
    }))


def _dataset_service_from_config(entry: dict) -> tuple[str, DatasetService, Path | None]:
    for key in ("dataset_id", "canonical", "plan", "journal"):
        if key not in entry:
            raise ConfigError(f"dataset config needs {key!r}")
    images = read_dataset(entry["canonical"])
    plan_obj = AllocationPlan.load(entry["plan"])
    journal = Journal(entry["journal"])
    params = GroupParams.from_obj(entry.get("group_params", {}))
    service = DatasetService(entry["dataset_id"], images, plan_obj, journal, params)
    root = Path(entry["images_root"]) if entry.get("images_root") else None
    return entry["dataset_id"], service, root


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Run config: {datasets: [{dataset_id, canonical, plan, journal, "
                   "images_root?, group_params?}], host?, port?}.")
@click.option("--host", default=None, help="Override config host.")
@click.option("--port", type=int, default=None, help="Override config port.")
@handle_errors
def serve(config_path, host, port):
    """Host the annotation HTTP API."""
    import uvicorn

    from .service.api import ServiceRegistry, create_app

    config = _load_config(config_path)
    entries = config.get("datasets", [])
    if not entries:
        raise ConfigError("config has no datasets")
    services = {}
    roots = {}
    for entry in entries:
        dataset_id, service, root = _dataset_service_from_config(entry)
        services[dataset_id] = service
        if root is not None:
            roots[dataset_id] = root
    app = create_app(ServiceRegistry(services, roots))
    uvicorn.run(app, host=host or config.get("host", "127.0.0.1"),
                port=port or int(config.get("port", 8321)))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_id", required=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@handle_errors
def export(config_path, dataset_id, out_dir):
    """Materialize canonical exports from a dataset's journal."""
    config = _load_config(config_path)
    entry = next((e for e in config.get("datasets", [])
                  if e.get("dataset_id") == dataset_id), None)
    if entry is None:
        raise ConfigError(f"dataset {dataset_id!r} not in config")
    _, service, _ = _dataset_service_from_config(entry)
    manifest = service.export(Path(out_dir))
    click.echo(json.dumps(manifest))


def _soft_overrides(soft: str | None) -> dict[str, AnalysisSpec] | None:
    if soft is None:
        return None
    tokens = [t.strip() for t in soft.split(",") if t.strip()]
    expansion = {
        UNKNOWN: {UNKNOWN, UNKNOWN_CLEAR},
        "not_clear": {UNKNOWN_NOT_CLEAR},
        "unknown_c": {UNKNOWN_CLEAR},
        "unknown_nc": {UNKNOWN_NOT_CLEAR},
    }
    requested: set[str] = set()
    for token in tokens:
        requested |= expansion.get(token, {token})
    overrides = {}
    for attribute, spec in DEFAULT_ANALYSES.items():
        alphabet = attribute_alphabet(attribute, spec.expand_unknown)
        soft_labels = tuple(label for label in alphabet if label in requested)
        overrides[attribute] = AnalysisSpec(
            attribute=attribute, soft_labels=soft_labels,
            expand_unknown=spec.expand_unknown, m_raw=spec.m_raw,
        )
    return overrides


@main.command()
@click.option("--export", "export_root", required=True, type=click.Path(exists=True),
              help="Export root: either one dataset's export or a directory of them.")
@click.option("--plan", "plan_path", type=click.Path(exists=True), default=None,
              help="Plan file (single-dataset layout only; checks rater ids).")
@click.option("--soft", default=None,
              help="Comma-separated soft labels (default: per-attribute defaults).")
@click.option("--out", "out_dir", required=True, type=click.Path())
@handle_errors
def agreement(export_root, plan_path, soft, out_dir):
    """Compute inter-rater agreement tables from rater exports."""
    root = Path(export_root)
    layouts = []
    if (root / "raters").is_dir():
        layouts.append((root.name, root))
    else:
        layouts.extend(
            (child.name, child) for child in sorted(root.iterdir())
            if (child / "raters").is_dir()
        )
    if not layouts:
        raise DataError(f"no rater exports under {root}")
    expected_raters = None
    if plan_path is not None:
        expected_raters = set(AllocationPlan.load(plan_path).annotator_ids)
    data = {}
    for dataset_id, path in layouts:
        raters = {}
        for rater_file in sorted((path / "raters").glob("*.jsonl")):
            rater = rater_file.stem
            if expected_raters is not None and rater not in expected_raters:
                raise DataError(f"rater {rater!r} not in plan")
            raters[rater] = {i.image_id: i for i in read_dataset(rater_file)}
        data[dataset_id] = raters
    report = agreement_report(data, analyses=_soft_overrides(soft))
    write_agreement_report(report, out_dir)
    click.echo(json.dumps({"datasets": sorted(data),
                           "attributes": sorted(report.fleiss)}))


@main.command()
@click.option("--export", "export_root", required=True, type=click.Path(exists=True))
@click.option("--datasets", default="all", show_default=True,
              help="Comma-separated dataset ids, or 'all'.")
@click.option("--flag-threshold", type=float, default=1.0, show_default=True,
              help="Percentage below which a label is flagged underrepresented.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@handle_errors
def report(export_root, datasets, flag_threshold, out_dir):
    """Compute attribute distribution (bias) tables and charts."""
    root = Path(export_root)
    candidates = []
    if (root / "final.jsonl").exists():
        candidates.append((root.name, root / "final.jsonl"))
    else:
        candidates.extend(
            (child.name, child / "final.jsonl") for child in sorted(root.iterdir())
            if (child / "final.jsonl").exists()
        )
    if datasets != "all":
        wanted = {d.strip() for d in datasets.split(",")}
        candidates = [(name, path) for name, path in candidates if name in wanted]
        missing = wanted - {name for name, _ in candidates}
        if missing:
            raise DataError(f"datasets not found in export: {sorted(missing)}")
    if not candidates:
        raise DataError(f"no final.jsonl exports under {root}")
    images_by_dataset = {name: read_dataset(path) for name, path in candidates}
    built = distribution_report(images_by_dataset, flag_threshold=flag_threshold)
    write_distribution_report(built, out_dir)
    click.echo(json.dumps({"datasets": built.datasets()}))


@main.command()
@click.option("--annotators", type=int, default=5, show_default=True)
@click.option("--items", type=int, default=200, show_default=True,
              help="Dataset goal in agents.")
@click.option("--disagree", type=float, default=0.1, show_default=True,
              help="Per-attribute probability that an item gets a dissenting rater.")
@click.option("--soft-rate", type=float, default=0.0, show_default=True,
              help="Probability that a dissent is a soft 'unknown, not clear'.")
@click.option("--kind", type=click.Choice(["person", "vehicle"]), default="person",
              show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--sequential", is_flag=True, help="Drive annotators one after another.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@handle_errors
def simulate(annotators, items, disagree, soft_rate, kind, seed, sequential, out_dir):
    """Drive virtual annotators end to end and verify the run."""
    result = run_simulation(
        out_dir, annotators=annotators, items=items, disagree=disagree,
        soft_rate=soft_rate, seed=seed, agent_kind=kind, concurrent=not sequential,
    )
    click.echo(json.dumps(result.to_obj()))
    if not result.pd_within_interval():
        raise DataError("measured disagreement outside the 99% interval")


if __name__ == "__main__":
    main()
