"""Attribute distribution (bias) reports over annotated exports.

Counts every alphabet label, including "unknown" and zero-count labels,
per dataset and attribute; percentages are over agents with that
attribute annotated. Output is JSON (full precision), CSV (2 decimals)
and deterministic static SVG charts with underrepresented segments
flagged in their metadata.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataError
from .model import (
    PERSON,
    PERSON_FIELDS,
    VEHICLE,
    VEHICLE_FIELDS,
    CanonicalImage,
    PersonAttributes,
    iter_agents,
)

GROUP_ATTRIBUTE = "group"
GROUP_LABELS = ("group", "no_group")

ATTRIBUTE_ALPHABETS: dict[str, tuple[str, ...]] = {
    **PERSON_FIELDS,
    GROUP_ATTRIBUTE: GROUP_LABELS,
    **VEHICLE_FIELDS,
}
ATTRIBUTE_KIND: dict[str, str] = {
    **{name: PERSON for name in PERSON_FIELDS},
    GROUP_ATTRIBUTE: PERSON,
    **{name: VEHICLE for name in VEHICLE_FIELDS},
}
PERSON_ORDER = ("age", GROUP_ATTRIBUTE, "means_of_transport", "sex", "skin")
VEHICLE_ORDER = ("vehicle_type", "car_type", "colour")
ALL_ATTRIBUTES = PERSON_ORDER + VEHICLE_ORDER

# Stable label palette: position in the alphabet picks the colour.
_PALETTE = (
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2",
    "#edc948", "#b07aa1", "#9c755f", "#bab0ac",
)


@dataclass(frozen=True)
class DistributionSlice:
    """Counts and percentages of one attribute in one dataset."""

    dataset: str
    attribute: str
    counts: dict[str, int]
    total: int
    flag_threshold: float

    @property
    def percentages(self) -> dict[str, float]:
        if self.total == 0:
            return {label: 0.0 for label in self.counts}
        return {label: 100.0 * count / self.total for label, count in self.counts.items()}

    @property
    def underrepresented(self) -> list[str]:
        if self.total == 0:
            return []
        return [
            label for label, pct in self.percentages.items() if pct < self.flag_threshold
        ]

    def to_obj(self) -> dict:
        return {
            "dataset": self.dataset,
            "attribute": self.attribute,
            "total": self.total,
            "counts": self.counts,
            "percentages": self.percentages,
            "underrepresented": self.underrepresented,
        }


@dataclass
class DistributionReport:
    slices: dict[tuple[str, str], DistributionSlice] = field(default_factory=dict)

    def get(self, dataset: str, attribute: str) -> DistributionSlice | None:
        return self.slices.get((dataset, attribute))

    def datasets(self) -> list[str]:
        return sorted({dataset for dataset, _ in self.slices})

    def to_obj(self) -> dict:
        out: dict[str, dict] = {}
        for (dataset, attribute), piece in sorted(self.slices.items()):
            out.setdefault(dataset, {})[attribute] = piece.to_obj()
        return out


def _label_for(attrs, attribute: str) -> str | None:
    if attribute == GROUP_ATTRIBUTE:
        if not isinstance(attrs, PersonAttributes):
            return None
        return "group" if attrs.group_id is not None else "no_group"
    if not hasattr(attrs, attribute):
        return None
    return getattr(attrs, attribute)


def distribution(
    images: Iterable[CanonicalImage],
    dataset: str,
    attribute: str,
    flag_threshold: float = 1.0,
) -> DistributionSlice:
    """Counts of one attribute over all annotated agents of a dataset."""
    alphabet = ATTRIBUTE_ALPHABETS.get(attribute)
    if alphabet is None:
        raise DataError(f"unknown attribute {attribute!r}")
    counts = {label: 0 for label in alphabet}
    total = 0
    kind = ATTRIBUTE_KIND[attribute]
    saw_any = False
    saw_kind = False
    for image in images:
        if image.discard_flag:
            continue
        for _path, agent in iter_agents(image):
            attrs = agent.attributes
            if attrs is None:
                continue
            saw_any = True
            if attrs.kind == kind:
                saw_kind = True
            label = _label_for(attrs, attribute)
            if label is None:
                continue
            counts[label] += 1
            total += 1
    # An export with annotations but none of the right kind means the
    # attribute does not apply to this dataset; an empty export is fine.
    if saw_any and not saw_kind:
        raise DataError(
            f"attribute {attribute!r} not applicable: dataset {dataset!r} has no "
            f"annotated {kind} agents"
        )
    return DistributionSlice(dataset, attribute, counts, total, flag_threshold)


def distribution_report(
    images_by_dataset: Mapping[str, Sequence[CanonicalImage]],
    attributes: Sequence[str] | None = None,
    flag_threshold: float = 1.0,
) -> DistributionReport:
    report = DistributionReport()
    for dataset in sorted(images_by_dataset):
        images = list(images_by_dataset[dataset])
        for attribute in attributes or ALL_ATTRIBUTES:
            try:
                piece = distribution(images, dataset, attribute, flag_threshold)
            except DataError:
                continue  # attribute not applicable to this dataset's kind
            report.slices[(dataset, attribute)] = piece
    return report


def chart_data(report: DistributionReport) -> dict:
    """Stacked-bar series per attribute and pie series per dataset."""
    stacked = {}
    for attribute in ALL_ATTRIBUTES:
        bars = []
        for dataset in report.datasets():
            piece = report.get(dataset, attribute)
            if piece is None:
                continue
            bars.append({
                "dataset": dataset,
                "total": piece.total,
                "segments": [
                    {
                        "label": label,
                        "count": piece.counts[label],
                        "percentage": piece.percentages[label],
                        "flagged": label in piece.underrepresented,
                    }
                    for label in ATTRIBUTE_ALPHABETS[attribute]
                ],
            })
        if bars:
            stacked[attribute] = bars
    pies = []
    totals = {}
    for dataset in report.datasets():
        for attribute in ("age", "vehicle_type"):
            piece = report.get(dataset, attribute)
            if piece is not None:
                totals[dataset] = totals.get(dataset, 0) + piece.total
    if totals:
        grand = sum(totals.values())
        pies = [
            {
                "dataset": dataset,
                "count": count,
                "percentage": 100.0 * count / grand if grand else 0.0,
            }
            for dataset, count in sorted(totals.items())
        ]
    return {"stacked": stacked, "pies": pies}


def _svg_header(width: int, height: int) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<style>text{font-family:sans-serif;font-size:11px}</style>',
    ]


def render_stacked_svg(attribute: str, bars: list[dict]) -> str:
    """One horizontal stacked bar per dataset, segments in label order."""
    alphabet = ATTRIBUTE_ALPHABETS[attribute]
    colors = {label: _PALETTE[i % len(_PALETTE)] for i, label in enumerate(alphabet)}
    bar_h, gap, left, bar_w = 26, 12, 120, 520
    legend_h = 24
    height = len(bars) * (bar_h + gap) + gap + legend_h + 20
    parts = _svg_header(left + bar_w + 40, height)
    parts.append(f'<text x="8" y="16" font-weight="bold">{attribute}</text>')
    y = 28
    for bar in bars:
        parts.append(f'<text x="8" y="{y + bar_h - 9}">{bar["dataset"]}</text>')
        x = float(left)
        for segment in bar["segments"]:
            w = bar_w * segment["percentage"] / 100.0
            flag = ' data-underrepresented="true"' if segment["flagged"] else ""
            parts.append(
                f'<rect x="{x:.2f}" y="{y}" width="{w:.2f}" height="{bar_h}" '
                f'fill="{colors[segment["label"]]}" data-label="{segment["label"]}" '
                f'data-count="{segment["count"]}" '
                f'data-percentage="{segment["percentage"]:.2f}"{flag}/>'
            )
            x += w
        y += bar_h + gap
    x = float(left)
    for label in alphabet:
        parts.append(f'<rect x="{x:.2f}" y="{y}" width="10" height="10" fill="{colors[label]}"/>')
        parts.append(f'<text x="{x + 14:.2f}" y="{y + 9}">{label}</text>')
        x += 14 + 7 * len(label) + 14
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_pie_svg(pies: list[dict]) -> str:
    """Dataset share of annotated agents as one pie."""
    import math

    cx, cy, r = 160, 140, 110
    parts = _svg_header(480, 280)
    parts.append('<text x="8" y="16" font-weight="bold">annotated agents per dataset</text>')
    angle = -90.0
    for i, pie in enumerate(pies):
        sweep = 360.0 * pie["percentage"] / 100.0
        a0 = math.radians(angle)
        a1 = math.radians(angle + sweep)
        x0, y0 = cx + r * math.cos(a0), cy + r * math.sin(a0)
        x1, y1 = cx + r * math.cos(a1), cy + r * math.sin(a1)
        large = 1 if sweep > 180.0 else 0
        colour = _PALETTE[i % len(_PALETTE)]
        if sweep >= 359.999:
            parts.append(f'<circle cx="{cx}" cy="{cy}" r="{r}" fill="{colour}" '
                         f'data-dataset="{pie["dataset"]}"/>')
        else:
            parts.append(
                f'<path d="M{cx},{cy} L{x0:.2f},{y0:.2f} A{r},{r} 0 {large} 1 '
                f'{x1:.2f},{y1:.2f} Z" fill="{colour}" data-dataset="{pie["dataset"]}" '
                f'data-percentage="{pie["percentage"]:.2f}"/>'
            )
        parts.append(
            f'<rect x="300" y="{40 + i * 18}" width="10" height="10" fill="{colour}"/>'
        )
        parts.append(
            f'<text x="316" y="{49 + i * 18}">{pie["dataset"]} '
            f'({pie["percentage"]:.2f}%)</text>'
        )
        angle += sweep
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_report(report: DistributionReport, out_dir: str | Path) -> None:
    """distribution.json / distribution.csv / one SVG per attribute + pie."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "distribution.json").write_text(
        json.dumps(report.to_obj(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    charts = chart_data(report)
    with (out / "distribution.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "attribute", "label", "count", "percentage", "flagged"])
        for (dataset, attribute), piece in sorted(report.slices.items()):
            for label in ATTRIBUTE_ALPHABETS[attribute]:
                writer.writerow([
                    dataset, attribute, label, piece.counts[label],
                    f"{piece.percentages[label]:.2f}",
                    "yes" if label in piece.underrepresented else "no",
                ])
    for attribute, bars in charts["stacked"].items():
        (out / f"stacked_{attribute}.svg").write_text(
            render_stacked_svg(attribute, bars), encoding="utf-8"
        )
    if charts["pies"]:
        (out / "datasets_pie.svg").write_text(render_pie_svg(charts["pies"]), encoding="utf-8")
    (out / "charts.json").write_text(
        json.dumps(charts, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
