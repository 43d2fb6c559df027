"""Inter-rater agreement statistics over categorical rating matrices.

Implements four related measures on an items-by-raters label matrix:

* percentage of disagreement: per rater, the share of items on which that
  rater's label differs from at least one other rater's, averaged over
  raters. For complete matrices this equals the fraction of items not
  labelled unanimously.
* per-item score: ``(sum of squared label multiplicities - N) / (N(N-1))``,
  1 for unanimity, 0 when all raters chose distinct labels.
* Fleiss' kappa: ``(P - Pe) / (1 - Pe)`` where P is the mean per-item
  score and Pe the sum of squared pooled label proportions.
* outcome patterns: the sorted multiplicity signature of each item
  (e.g. 4/1, 3/2) with its tabulated score, before and after removing
  "soft" labels such as "unknown".
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataError
from .model import (
    PERSON_FIELDS,
    UNKNOWN,
    VEHICLE_FIELDS,
    CanonicalImage,
    PersonAttributes,
)

GROUP_ATTRIBUTE = "group"
GROUP_LABELS = ("group", "no_group")

# Labels produced by expanding "unknown" with its confidence qualifier.
UNKNOWN_CLEAR = "unknown_c"
UNKNOWN_NOT_CLEAR = "unknown_nc"


@dataclass(frozen=True)
class RatingMatrix:
    """Categorical ratings for one attribute: items in rows, raters in columns.

    ``None`` marks a missing rating. Items need at least two non-missing
    ratings to enter any statistic.
    """

    attribute: str
    alphabet: tuple[str, ...]
    raters: tuple[str, ...]
    items: tuple[str, ...]
    ratings: tuple[tuple[str | None, ...], ...]

    def __post_init__(self):
        if len(self.raters) < 2:
            raise DataError(f"{self.attribute}: need at least 2 raters")
        if len(self.items) != len(self.ratings):
            raise DataError(f"{self.attribute}: items/ratings length mismatch")
        for row in self.ratings:
            if len(row) != len(self.raters):
                raise DataError(f"{self.attribute}: row width != number of raters")
            for label in row:
                if label is not None and label not in self.alphabet:
                    raise DataError(f"{self.attribute}: label {label!r} not in alphabet")

    def usable_rows(self) -> list[tuple[str | None, ...]]:
        return [row for row in self.ratings if sum(l is not None for l in row) >= 2]


@dataclass(frozen=True)
class PatternOutcome:
    """Sorted multiplicity signature of one item's labels plus its score."""

    signature: tuple[int, ...]
    score: float

    @property
    def key(self) -> str:
        return "/".join(str(n) for n in self.signature)


@dataclass(frozen=True)
class FleissResult:
    p_bar: float
    p_e: float
    kappa: float | None
    n_items: int
    n_excluded: int


def k_score(ratings: Sequence[str | None]) -> float:
    """Per-item agreement from repeated-label counts; needs >= 2 ratings."""
    present = [label for label in ratings if label is not None]
    n = len(present)
    if n < 2:
        raise ValueError("k_score needs at least 2 non-missing ratings")
    square_sum = sum(c * c for c in Counter(present).values())
    return (square_sum - n) / (n * (n - 1))


def classify_pattern(ratings: Sequence[str | None]) -> PatternOutcome:
    present = [label for label in ratings if label is not None]
    if len(present) < 2:
        raise ValueError("classify_pattern needs at least 2 non-missing ratings")
    signature = tuple(sorted(Counter(present).values(), reverse=True))
    return PatternOutcome(signature=signature, score=k_score(ratings))


def percentage_of_disagreement(
    matrix: RatingMatrix,
    soft_labels: Iterable[str] = (),
    soft_weight: float = 1.0,
) -> float | None:
    """Share of rater-item pairs where the rater differs from someone else.

    Computed directly from the per-rater counts: rater n disagrees on an
    item when fewer than all present raters chose n's label. None when no
    item is usable.

    By default every label weighs the same, the pessimistic reading. With
    ``soft_weight`` below 1, a rater's disagreement counts that much less
    when it only involves soft labels: the rater's own label is soft, or
    everyone the rater differs from chose a soft label.
    """
    rows = matrix.usable_rows()
    if not rows:
        return None
    soft = set(soft_labels)
    n_raters = len(matrix.raters)
    disagreements = 0.0
    for row in rows:
        present = [label for label in row if label is not None]
        counts = Counter(present)
        n_present = len(present)
        for label in row:
            if label is None or counts[label] == n_present:
                continue
            differing_only_soft = all(
                other in soft for other in counts if other != label
            )
            if label in soft or differing_only_soft:
                disagreements += soft_weight
            else:
                disagreements += 1.0
    return disagreements / (n_raters * len(rows))


def kappa_from_components(p_bar: float, p_e: float) -> float | None:
    """Chance-corrected agreement from its two components; None when p_e = 1."""
    if p_e >= 1.0:
        return None
    return (p_bar - p_e) / (1.0 - p_e)


def fleiss_kappa(matrix: RatingMatrix) -> FleissResult:
    """Fleiss' kappa over the complete rows of the matrix.

    Rows with any missing rating are excluded entirely (from P and from
    the Pe pooling) and reported in ``n_excluded``. kappa is None when
    every rating carries the same label (p_e = 1).
    """
    complete = [row for row in matrix.ratings if all(label is not None for label in row)]
    n_excluded = len(matrix.ratings) - len(complete)
    if not complete:
        raise DataError(f"{matrix.attribute}: no complete items for Fleiss' kappa")
    p_bar = sum(k_score(row) for row in complete) / len(complete)
    pooled = Counter()
    for row in complete:
        pooled.update(row)
    total = sum(pooled.values())
    p_e = sum((count / total) ** 2 for count in pooled.values())
    return FleissResult(
        p_bar=p_bar,
        p_e=p_e,
        kappa=kappa_from_components(p_bar, p_e),
        n_items=len(complete),
        n_excluded=n_excluded,
    )


def soft_filter(matrix: RatingMatrix, soft_labels: Iterable[str]) -> RatingMatrix:
    """Blank out soft labels and drop items left with fewer than 2 ratings.

    The returned matrix's alphabet is the original minus the soft labels,
    which is also the M that sizes the filtered outcome space.
    """
    soft = set(soft_labels)
    items = []
    rows = []
    for item, row in zip(matrix.items, matrix.ratings):
        filtered = tuple(None if label in soft else label for label in row)
        if sum(label is not None for label in filtered) >= 2:
            items.append(item)
            rows.append(filtered)
    return replace(
        matrix,
        alphabet=tuple(label for label in matrix.alphabet if label not in soft),
        items=tuple(items),
        ratings=tuple(rows),
    )


def outcome_space_size(m: int, n: int) -> int:
    """Number of possible rating outcomes: combinations with replacement."""
    if m < 1 or n < 1:
        raise ValueError("outcome_space_size needs m >= 1 and n >= 1")
    return math.comb(m + n - 1, n)


def pattern_histogram(matrix: RatingMatrix) -> dict[str, int]:
    """Count items per multiplicity signature, most-agreeing first."""
    counts: Counter[tuple[int, ...]] = Counter()
    for row in matrix.usable_rows():
        counts[classify_pattern(row).signature] += 1
    ordered = sorted(counts, key=lambda sig: (-k_score_of_signature(sig), sig))
    return {"/".join(str(n) for n in sig): counts[sig] for sig in ordered}


def k_score_of_signature(signature: Sequence[int]) -> float:
    n = sum(signature)
    return (sum(c * c for c in signature) - n) / (n * (n - 1))


# ---------------------------------------------------------------------------
# Matrix construction from rater-wise canonical exports.

@dataclass(frozen=True)
class AnalysisSpec:
    """How one attribute enters the agreement analysis.

    ``expand_unknown`` splits "unknown" into unknown_c / unknown_nc using
    the confidence qualifier. ``m_raw`` overrides the raw alphabet size
    used for the outcome-space figure when the reporting convention does
    not count every label.
    """

    attribute: str
    soft_labels: tuple[str, ...] = ()
    expand_unknown: bool = False
    m_raw: int | None = None


DEFAULT_ANALYSES: dict[str, AnalysisSpec] = {
    "age": AnalysisSpec("age", soft_labels=(UNKNOWN,)),
    "sex": AnalysisSpec("sex", soft_labels=(UNKNOWN_CLEAR, UNKNOWN_NOT_CLEAR), expand_unknown=True),
    "skin": AnalysisSpec("skin", soft_labels=(UNKNOWN_CLEAR, UNKNOWN_NOT_CLEAR), expand_unknown=True),
    "means_of_transport": AnalysisSpec("means_of_transport", soft_labels=(UNKNOWN,)),
    GROUP_ATTRIBUTE: AnalysisSpec(GROUP_ATTRIBUTE),
    # Outcome-space sizes for vehicles follow the published reporting
    # convention: vehicle_type counts its 6 named types and the filtered
    # pass always removes "unknown" and "other".
    "vehicle_type": AnalysisSpec("vehicle_type", soft_labels=(UNKNOWN, "other"), m_raw=6),
    "colour": AnalysisSpec("colour", soft_labels=(UNKNOWN, "other")),
    "car_type": AnalysisSpec("car_type", soft_labels=(UNKNOWN, "other")),
}

PERSON_ATTRIBUTES = ("age", GROUP_ATTRIBUTE, "means_of_transport", "sex", "skin")
VEHICLE_ATTRIBUTES = ("vehicle_type", "colour", "car_type")
ALL_ATTRIBUTES = PERSON_ATTRIBUTES + VEHICLE_ATTRIBUTES


def attribute_alphabet(attribute: str, expand_unknown: bool = False) -> tuple[str, ...]:
    if attribute == GROUP_ATTRIBUTE:
        return GROUP_LABELS
    base = PERSON_FIELDS.get(attribute) or VEHICLE_FIELDS.get(attribute)
    if base is None:
        raise DataError(f"unknown attribute {attribute!r}")
    if not expand_unknown:
        return base
    expanded = []
    for label in base:
        if label == UNKNOWN:
            expanded.extend([UNKNOWN_CLEAR, UNKNOWN_NOT_CLEAR])
        else:
            expanded.append(label)
    return tuple(expanded)


def label_of(attrs, attribute: str, expand_unknown: bool = False) -> str | None:
    """The rating an attribute set gives for one analysis attribute."""
    if attrs is None:
        return None
    if attribute == GROUP_ATTRIBUTE:
        if not isinstance(attrs, PersonAttributes):
            return None
        return "group" if attrs.group_id is not None else "no_group"
    if not hasattr(attrs, attribute):
        return None
    value = getattr(attrs, attribute)
    if expand_unknown and value == UNKNOWN:
        qualifier = "clear"
        if isinstance(attrs, PersonAttributes):
            qualifier = attrs.unknown_confidence.get(attribute, "clear")
        return UNKNOWN_NOT_CLEAR if qualifier == "not_clear" else UNKNOWN_CLEAR
    return value


def build_matrix(
    rater_images: Mapping[str, Mapping[str, CanonicalImage]],
    attribute: str,
    expand_unknown: bool = False,
    item_filter=None,
) -> RatingMatrix:
    """Assemble the items-by-raters matrix for one attribute.

    ``rater_images`` maps rater id to that rater's canonical images by
    image id. Items are (image_id, agent uuid) pairs over all non-discarded
    images; agents whose kind does not carry the attribute rate as missing.
    """
    raters = tuple(sorted(rater_images))
    item_ids: list[str] = []
    seen: set[str] = set()
    for rater in raters:
        for image_id in sorted(rater_images[rater]):
            image = rater_images[rater][image_id]
            if image.discard_flag:
                continue
            for agent in image.agents:
                key = f"{image_id}::{agent.uuid}"
                if key in seen:
                    continue
                if item_filter is not None and not item_filter(image_id, agent.uuid):
                    continue
                seen.add(key)
                item_ids.append(key)
    rows = []
    kept_items = []
    for key in item_ids:
        image_id, uuid = key.split("::", 1)
        row = []
        for rater in raters:
            image = rater_images[rater].get(image_id)
            agent = image.agent_by_uuid(uuid) if image is not None else None
            row.append(
                None if agent is None else label_of(agent.attributes, attribute, expand_unknown)
            )
        if any(label is not None for label in row):
            kept_items.append(key)
            rows.append(tuple(row))
    return RatingMatrix(
        attribute=attribute,
        alphabet=attribute_alphabet(attribute, expand_unknown),
        raters=raters,
        items=tuple(kept_items),
        ratings=tuple(rows),
    )


# ---------------------------------------------------------------------------
# Full report.

@dataclass
class AgreementReport:
    """PD per attribute and dataset, Fleiss' kappa and outcome patterns."""

    raters: tuple[str, ...]
    pd_by_dataset: dict[str, dict[str, float | None]] = field(default_factory=dict)
    items_by_dataset: dict[str, dict[str, int]] = field(default_factory=dict)
    pd_pooled: dict[str, float | None] = field(default_factory=dict)
    fleiss: dict[str, dict] = field(default_factory=dict)
    patterns: dict[str, dict] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_obj(self) -> dict:
        return {
            "raters": list(self.raters),
            "pd_by_dataset": self.pd_by_dataset,
            "items_by_dataset": self.items_by_dataset,
            "pd_pooled": self.pd_pooled,
            "fleiss": self.fleiss,
            "patterns": self.patterns,
            "diagnostics": self.diagnostics,
        }


def _analysis_for(attribute: str, overrides: Mapping[str, AnalysisSpec] | None) -> AnalysisSpec:
    if overrides and attribute in overrides:
        return overrides[attribute]
    return DEFAULT_ANALYSES.get(attribute, AnalysisSpec(attribute))


def agreement_report(
    rater_images_by_dataset: Mapping[str, Mapping[str, Mapping[str, CanonicalImage]]],
    attributes: Sequence[str] = ALL_ATTRIBUTES,
    analyses: Mapping[str, AnalysisSpec] | None = None,
) -> AgreementReport:
    """Compute the full agreement report over rater-wise exports.

    ``rater_images_by_dataset[dataset][rater][image_id]`` holds that
    rater's annotated canonical images from the shared control pool.
    """
    all_raters: set[str] = set()
    for per_rater in rater_images_by_dataset.values():
        all_raters.update(per_rater)
    report = AgreementReport(raters=tuple(sorted(all_raters)))
    if not rater_images_by_dataset:
        report.diagnostics["empty"] = "no rater exports found"
        return report

    pooled: dict[str, list[RatingMatrix]] = {a: [] for a in attributes}
    for dataset in sorted(rater_images_by_dataset):
        per_rater = rater_images_by_dataset[dataset]
        report.pd_by_dataset[dataset] = {}
        report.items_by_dataset[dataset] = {}
        for attribute in attributes:
            spec = _analysis_for(attribute, analyses)
            matrix = build_matrix(per_rater, attribute, spec.expand_unknown)
            usable = matrix.usable_rows()
            report.items_by_dataset[dataset][attribute] = len(usable)
            report.pd_by_dataset[dataset][attribute] = percentage_of_disagreement(matrix)
            pooled[attribute].append(matrix)

    n_raters = len(report.raters)
    for attribute in attributes:
        spec = _analysis_for(attribute, analyses)
        matrices = pooled[attribute]
        merged = _merge_matrices(matrices, attribute)
        if merged is None or not merged.usable_rows():
            report.diagnostics.setdefault("no_data", []).append(attribute)
            continue
        report.pd_pooled[attribute] = percentage_of_disagreement(merged)
        try:
            result = fleiss_kappa(merged)
            report.fleiss[attribute] = {
                "p": result.p_bar,
                "p_e": result.p_e,
                "kappa": result.kappa,
                "n_items": result.n_items,
                "n_excluded": result.n_excluded,
            }
        except DataError:
            report.fleiss[attribute] = {
                "p": None, "p_e": None, "kappa": None,
                "n_items": 0, "n_excluded": len(merged.ratings),
            }
        m_raw = spec.m_raw if spec.m_raw is not None else len(merged.alphabet)
        filtered = soft_filter(merged, spec.soft_labels)
        m_soft = m_raw - len([s for s in spec.soft_labels if s in merged.alphabet])
        report.patterns[attribute] = {
            "alphabet_size_raw": m_raw,
            "outcome_space_raw": outcome_space_size(m_raw, n_raters) if n_raters else None,
            "raw": pattern_histogram(merged),
            "soft_labels": list(spec.soft_labels),
            "alphabet_size_soft": m_soft,
            "outcome_space_soft": outcome_space_size(m_soft, n_raters) if m_soft >= 1 else None,
            "soft": pattern_histogram(filtered),
            "items_dropped_by_soft_filter": len(merged.ratings) - len(filtered.ratings),
        }
    return report


def _merge_matrices(matrices: list[RatingMatrix], attribute: str) -> RatingMatrix | None:
    matrices = [m for m in matrices if m.items]
    if not matrices:
        return None
    raters = tuple(sorted(set().union(*(m.raters for m in matrices))))
    items: list[str] = []
    rows: list[tuple[str | None, ...]] = []
    for matrix in matrices:
        index = {rater: i for i, rater in enumerate(matrix.raters)}
        for item, row in zip(matrix.items, matrix.ratings):
            items.append(item)
            rows.append(tuple(row[index[r]] if r in index else None for r in raters))
    return RatingMatrix(
        attribute=attribute,
        alphabet=matrices[0].alphabet,
        raters=raters,
        items=tuple(items),
        ratings=tuple(rows),
    )


def write_report(report: AgreementReport, out_dir: str | Path) -> None:
    """Write the report as JSON plus CSV tables mirroring its sections."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "agreement.json").write_text(
        json.dumps(report.to_obj(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    datasets = sorted(report.pd_by_dataset)
    with (out / "pd.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["attribute"] + datasets + ["pooled"])
        attributes = sorted({a for d in report.pd_by_dataset.values() for a in d}
                            | set(report.pd_pooled))
        for attribute in attributes:
            row = [attribute]
            for dataset in datasets:
                value = report.pd_by_dataset.get(dataset, {}).get(attribute)
                row.append("" if value is None else f"{100 * value:.2f}%")
            pooled = report.pd_pooled.get(attribute)
            row.append("" if pooled is None else f"{100 * pooled:.2f}%")
            writer.writerow(row)
    with (out / "fleiss.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["attribute", "P", "P_e", "kappa", "n_items", "n_excluded"])
        for attribute, result in report.fleiss.items():
            writer.writerow([
                attribute,
                _pct(result["p"]), _pct(result["p_e"]), _pct(result["kappa"]),
                result["n_items"], result["n_excluded"],
            ])
    with (out / "patterns.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        signatures = ["5", "4/1", "3/2", "3/1/1", "2/2/1", "2/1/1/1", "1/1/1/1/1"]
        writer.writerow(["attribute", "pass", "outcome_space"] + signatures)
        for attribute, block in report.patterns.items():
            for which, space in (("raw", "outcome_space_raw"), ("soft", "outcome_space_soft")):
                histogram = block[which]
                writer.writerow(
                    [attribute, which, block[space]]
                    + [histogram.get(sig, 0) for sig in signatures]
                )


def _pct(value) -> str:
    return "" if value is None else f"{100 * value:.2f}%"
