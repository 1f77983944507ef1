"""Accuracy harness with the gated three-score rubric.

Each trial earns three binary scores: interpreting the flight condition
(IFC), generated procedure (GP), and index correction (IC). The scores
gate left to right: a wrong condition zeroes GP and IC, a wrong procedure
zeroes IC. Reports keep exact fractional accuracies (so count * n is an
integer, never a rounding artifact) and render percentages only at format
time, to one decimal.

Datasets are JSON Lines, one sample per record with exactly the fields:
id, display, panel, instruction, expected_class, expected_labels,
expected_procedure_id, expected_section, expected_page, error_label.
Error labels are analyst annotations from the dataset; nothing here
auto-diagnoses a failure cause.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .corpus import Manual, Severity
from .errors import VcopError
from .pipeline import (
    InputSetting,
    PerceptionProvider,
    ProcedureResponse,
    ProviderLabelError,
    ProviderTimeoutError,
    ProviderTransportError,
    build_query,
    respond,
)
from .retrieval import Index
from .situation import DisplayKind, FlightCondition, parse_panel_text


class DatasetSyntaxError(VcopError):
    code = "DatasetSyntaxError"

    def __init__(self, record: int, reason: str):
        super().__init__(f"record {record}: {reason}")
        self.record = record


class InconsistentSampleError(VcopError):
    code = "InconsistentSample"

    def __init__(self, sample_id: str, reason: str):
        super().__init__(f"sample {sample_id!r}: {reason}")
        self.sample_id = sample_id


class ErrorStage(Enum):
    IFC = "IFC"
    GP = "GP"
    IC = "IC"


class ErrorCategory(Enum):
    INCOMPLETE_IMAGE_ANALYSIS = "INCOMPLETE_IMAGE_ANALYSIS"
    MISLEADING_INSTRUCTION = "MISLEADING_INSTRUCTION"
    INSUFFICIENT_CONTEXT = "INSUFFICIENT_CONTEXT"
    IMAGE_CLARITY = "IMAGE_CLARITY"
    MODEL_RECOGNITION_ERROR = "MODEL_RECOGNITION_ERROR"
    MODEL_SEARCH_ERROR = "MODEL_SEARCH_ERROR"
    NONEXISTENT_CONTENT = "NONEXISTENT_CONTENT"
    SITUATION_ANALYSIS_ERROR = "SITUATION_ANALYSIS_ERROR"
    UNNUMBERED_SOURCE_FILE = "UNNUMBERED_SOURCE_FILE"
    BROAD_TITLE_ONLY = "BROAD_TITLE_ONLY"


LEGAL_CATEGORIES: Mapping[ErrorStage, frozenset[ErrorCategory]] = {
    ErrorStage.IFC: frozenset(
        {
            ErrorCategory.INCOMPLETE_IMAGE_ANALYSIS,
            ErrorCategory.MISLEADING_INSTRUCTION,
            ErrorCategory.INSUFFICIENT_CONTEXT,
            ErrorCategory.IMAGE_CLARITY,
            ErrorCategory.MODEL_RECOGNITION_ERROR,
        }
    ),
    ErrorStage.GP: frozenset(
        {
            ErrorCategory.MODEL_SEARCH_ERROR,
            ErrorCategory.INSUFFICIENT_CONTEXT,
            ErrorCategory.NONEXISTENT_CONTENT,
            ErrorCategory.SITUATION_ANALYSIS_ERROR,
        }
    ),
    ErrorStage.IC: frozenset(
        {
            ErrorCategory.UNNUMBERED_SOURCE_FILE,
            ErrorCategory.BROAD_TITLE_ONLY,
            ErrorCategory.SITUATION_ANALYSIS_ERROR,
            ErrorCategory.INSUFFICIENT_CONTEXT,
        }
    ),
}


@dataclass(frozen=True)
class ErrorLabel:
    stage: ErrorStage
    category: ErrorCategory

    def __post_init__(self):
        if self.category not in LEGAL_CATEGORIES[self.stage]:
            raise ValueError(
                f"category {self.category.value} is not legal for stage "
                f"{self.stage.value}"
            )


@dataclass(frozen=True)
class TrialScore:
    ifc: int
    gp: int
    ic: int

    def __post_init__(self):
        for name, value in (("ifc", self.ifc), ("gp", self.gp), ("ic", self.ic)):
            if value not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1, got {value!r}")
        if not self.ic <= self.gp <= self.ifc:
            raise ValueError(
                f"gating violated: ic={self.ic} gp={self.gp} ifc={self.ifc}"
            )


@dataclass(frozen=True)
class Sample:
    id: str
    panel: str
    display: DisplayKind
    instruction: str
    expected_condition: FlightCondition
    expected_procedure_id: str | None
    expected_section: str | None
    expected_page: int | None
    error_label: ErrorLabel | None = None

    def __post_init__(self):
        is_normal = self.expected_condition.is_normal
        has_proc = self.expected_procedure_id is not None
        has_index = self.expected_section is not None and self.expected_page is not None
        if is_normal and (has_proc or self.expected_section or self.expected_page):
            raise InconsistentSampleError(
                self.id, "NORMAL sample must not name a procedure or index"
            )
        if not is_normal and not (has_proc and has_index):
            raise InconsistentSampleError(
                self.id, "anomaly sample must name a procedure, section, and page"
            )


@dataclass(frozen=True)
class TrialRecord:
    sample_id: str
    score: TrialScore
    error_label: ErrorLabel | None = None


@dataclass(frozen=True)
class SettingReport:
    setting: InputSetting
    n: int
    ifc_count: int
    gp_count: int
    ic_count: int
    per_trial: tuple[TrialRecord, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("report needs at least one trial")
        if not self.ic_count <= self.gp_count <= self.ifc_count:
            raise ValueError(
                f"aggregate gating violated: {self.ic_count} <= "
                f"{self.gp_count} <= {self.ifc_count} fails"
            )

    @property
    def ifc_acc(self) -> Fraction:
        return Fraction(self.ifc_count, self.n)

    @property
    def gp_acc(self) -> Fraction:
        return Fraction(self.gp_count, self.n)

    @property
    def ic_acc(self) -> Fraction:
        return Fraction(self.ic_count, self.n)


@dataclass(frozen=True)
class ErrorBreakdown:
    stage: ErrorStage
    counts: Mapping[ErrorCategory, int]
    percentages: Mapping[ErrorCategory, Fraction]
    unlabeled: tuple[str, ...]


_DATASET_FIELDS = frozenset(
    {
        "id",
        "display",
        "panel",
        "instruction",
        "expected_class",
        "expected_labels",
        "expected_procedure_id",
        "expected_section",
        "expected_page",
        "error_label",
    }
)


def _parse_error_label(value, record_no: int) -> ErrorLabel | None:
    if value is None:
        return None
    try:
        return ErrorLabel(ErrorStage(value["stage"]), ErrorCategory(value["category"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetSyntaxError(record_no, f"bad error_label: {exc}") from None


def load_dataset(text: str) -> list[Sample]:
    """Parse a JSON Lines dataset; ids must be unique, invariants must hold."""
    samples: list[Sample] = []
    seen: set[str] = set()
    record_no = 0
    for line in text.split("\n"):
        if not line.strip():
            continue
        record_no += 1
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetSyntaxError(record_no, f"bad JSON: {exc}") from None
        if not isinstance(record, dict):
            raise DatasetSyntaxError(record_no, "record must be a JSON object")
        if set(record) != _DATASET_FIELDS:
            missing = _DATASET_FIELDS - set(record)
            extra = set(record) - _DATASET_FIELDS
            raise DatasetSyntaxError(
                record_no, f"field mismatch (missing {sorted(missing)}, "
                f"unexpected {sorted(extra)})"
            )
        try:
            display = DisplayKind(record["display"])
            expected_class = Severity(record["expected_class"])
            labels = tuple(str(lbl) for lbl in record["expected_labels"])
        except (ValueError, TypeError) as exc:
            raise DatasetSyntaxError(record_no, str(exc)) from None
        sample_id = str(record["id"])
        if sample_id in seen:
            raise DatasetSyntaxError(record_no, f"duplicate sample id {sample_id!r}")
        seen.add(sample_id)
        if (expected_class is Severity.NORMAL) != (len(labels) == 0):
            raise InconsistentSampleError(
                sample_id, "labels must be empty exactly for NORMAL samples"
            )
        page = record["expected_page"]
        if page is not None and (not isinstance(page, int) or page < 1):
            raise DatasetSyntaxError(record_no, "expected_page must be positive")
        proc_id = record["expected_procedure_id"]
        section = record["expected_section"]
        samples.append(
            Sample(
                id=sample_id,
                panel=str(record["panel"]),
                display=display,
                instruction=str(record["instruction"]),
                expected_condition=FlightCondition(expected_class, labels),
                expected_procedure_id=None if proc_id is None else str(proc_id),
                expected_section=None if section is None else str(section),
                expected_page=page,
                error_label=_parse_error_label(record["error_label"], record_no),
            )
        )
    return samples


def score_trial(response: ProcedureResponse, sample: Sample) -> TrialScore:
    """Apply the gated rubric to one (response, expected) pair.

    IFC needs the condition class and the full label set to match. GP needs
    the top hit to be the expected procedure (for NORMAL samples: no hits at
    all). IC needs the citation's section and page both right (for NORMAL
    samples it rides on GP).
    """
    expected = sample.expected_condition
    got = response.condition
    ifc = int(
        got.condition_class is expected.condition_class
        and set(got.labels) == set(expected.labels)
    )
    if expected.is_normal:
        gp = ifc * int(not response.hits)
        return TrialScore(ifc=ifc, gp=gp, ic=gp)
    gp = ifc * int(
        bool(response.hits)
        and response.hits[0].procedure_id == sample.expected_procedure_id
    )
    ic = gp * int(
        response.citation is not None
        and response.citation.section_number == sample.expected_section
        and response.citation.page == sample.expected_page
    )
    return TrialScore(ifc=ifc, gp=gp, ic=ic)


_PROVIDER_FAULTS = (ProviderTimeoutError, ProviderTransportError, ProviderLabelError)

_FAULT_LABEL = ErrorLabel(ErrorStage.IFC, ErrorCategory.MODEL_RECOGNITION_ERROR)


def _query_for(sample: Sample, setting: InputSetting):
    if setting is InputSetting.SNAPSHOT_ONLY:
        return build_query(
            setting, snapshot=parse_panel_text(sample.panel, sample.display)
        )
    if setting is InputSetting.SNAPSHOT_PLUS_INSTRUCTION:
        return build_query(
            setting,
            snapshot=parse_panel_text(sample.panel, sample.display),
            instruction=sample.instruction,
        )
    return build_query(
        setting,
        ocr_text=sample.panel,
        display=sample.display,
        instruction=sample.instruction,
    )


def evaluate(
    samples: Sequence[Sample],
    setting: InputSetting,
    provider: PerceptionProvider,
    index: Index,
    corpus: Sequence[Manual],
) -> SettingReport:
    """Run every sample through the pipeline under one input setting.

    Provider faults (timeout, transport, bad labels) are recorded as
    (0,0,0) trials labeled MODEL_RECOGNITION_ERROR rather than raised, so
    one flaky remote call cannot abort a run. Per-sample work is
    independent; aggregation is a commutative sum.
    """
    if not samples:
        raise ValueError("evaluate needs at least one sample")
    trials: list[TrialRecord] = []
    for sample in samples:
        ctx = _query_for(sample, setting)
        try:
            response = respond(ctx, provider, index, corpus)
        except _PROVIDER_FAULTS:
            trials.append(TrialRecord(sample.id, TrialScore(0, 0, 0), _FAULT_LABEL))
            continue
        score = score_trial(response, sample)
        label = sample.error_label if score != TrialScore(1, 1, 1) else None
        trials.append(TrialRecord(sample.id, score, label))
    return _aggregate(setting, trials)


def _aggregate(setting: InputSetting, trials: Sequence[TrialRecord]) -> SettingReport:
    return SettingReport(
        setting=setting,
        n=len(trials),
        ifc_count=sum(t.score.ifc for t in trials),
        gp_count=sum(t.score.gp for t in trials),
        ic_count=sum(t.score.ic for t in trials),
        per_trial=tuple(trials),
    )


def ablation(
    samples: Sequence[Sample],
    settings: Sequence[InputSetting],
    provider: PerceptionProvider,
    index: Index,
    corpus: Sequence[Manual],
) -> list[SettingReport]:
    """One report per requested setting, over identical samples, in order."""
    if not settings:
        raise ValueError("ablation needs at least one setting")
    return [evaluate(samples, s, provider, index, corpus) for s in settings]


def _stage_failures(report: SettingReport, stage: ErrorStage) -> list[TrialRecord]:
    if stage is ErrorStage.IFC:
        return [t for t in report.per_trial if t.score.ifc == 0]
    if stage is ErrorStage.GP:
        return [t for t in report.per_trial if t.score.ifc == 1 and t.score.gp == 0]
    return [t for t in report.per_trial if t.score.gp == 1 and t.score.ic == 0]


def error_breakdown(report: SettingReport, stage: ErrorStage) -> ErrorBreakdown:
    """Count analyst labels over the trials that failed at `stage`.

    Unlabeled failures (or ones labeled for a different stage) are listed by
    sample id and excluded from the percentage denominator, which is why
    labeled percentages always sum to exactly 100.
    """
    failures = _stage_failures(report, stage)
    counts: dict[ErrorCategory, int] = {}
    unlabeled: list[str] = []
    for trial in failures:
        label = trial.error_label
        if label is None or label.stage is not stage:
            unlabeled.append(trial.sample_id)
        else:
            counts[label.category] = counts.get(label.category, 0) + 1
    total = sum(counts.values())
    percentages = {
        category: Fraction(count * 100, total) for category, count in counts.items()
    }
    return ErrorBreakdown(
        stage=stage,
        counts=counts,
        percentages=percentages,
        unlabeled=tuple(unlabeled),
    )


SETTING_DISPLAY_NAMES = {
    InputSetting.SNAPSHOT_ONLY: "Snapshot",
    InputSetting.SNAPSHOT_PLUS_INSTRUCTION: "Snapshot + Instruction",
    InputSetting.OCR_PLUS_INSTRUCTION: "OCR + Instruction",
}


def format_pct(value: Fraction) -> str:
    """Percentage rounded to one decimal; a trailing .0 is dropped (82%,
    not 82.0%). Rounding is exact rational arithmetic, half-to-even at the
    0.05 boundary."""
    tenths = round(value * 1000)
    if tenths % 10 == 0:
        return f"{tenths // 10}%"
    return f"{tenths // 10}.{tenths % 10}%"


def format_pct_2dp(value: Fraction) -> str:
    """Percentage with two decimals, for error-breakdown charts (42.11%)."""
    hundredths = round(value * 100)
    return f"{hundredths // 100}.{hundredths % 100:02d}%"


def render_report_table(reports: Sequence[SettingReport]) -> str:
    """Plain-text accuracy table, one row per setting."""
    header = f"{'Setting':<28}{'IFC GP IC':<18}{'Counts'}"
    lines = [header, "-" * len(header)]
    for report in reports:
        pcts = " ".join(
            format_pct(acc)
            for acc in (report.ifc_acc, report.gp_acc, report.ic_acc)
        )
        counts = (
            f"{report.ifc_count}/{report.n} {report.gp_count}/{report.n} "
            f"{report.ic_count}/{report.n}"
        )
        name = SETTING_DISPLAY_NAMES[report.setting]
        lines.append(f"{name:<28}{pcts:<18}{counts}")
    return "\n".join(lines)


def render_breakdown(breakdown: ErrorBreakdown) -> str:
    lines = [f"{breakdown.stage.value} error breakdown"]
    for category in sorted(breakdown.counts, key=lambda c: (-breakdown.counts[c], c.value)):
        lines.append(
            f"  {category.value:<28}{breakdown.counts[category]:>4}  "
            f"{format_pct_2dp(breakdown.percentages[category])}"
        )
    if breakdown.unlabeled:
        lines.append(f"  unlabeled failures: {', '.join(breakdown.unlabeled)}")
    if not breakdown.counts and not breakdown.unlabeled:
        lines.append("  no failures")
    return "\n".join(lines)


def trial_records_jsonl(reports: Iterable[SettingReport]) -> str:
    """Machine-readable per-trial score stream (one JSON object per line)."""
    lines = []
    for report in reports:
        for trial in report.per_trial:
            record = {
                "id": trial.sample_id,
                "setting": report.setting.value,
                "ifc": trial.score.ifc,
                "gp": trial.score.gp,
                "ic": trial.score.ic,
                "error_label": (
                    {
                        "stage": trial.error_label.stage.value,
                        "category": trial.error_label.category.value,
                    }
                    if trial.error_label
                    else None
                ),
            }
            lines.append(json.dumps(record))
    return "\n".join(lines) + "\n"


def replay_reports(text: str) -> list[SettingReport]:
    """Rebuild SettingReports from a per-trial score stream.

    Records are grouped by setting in order of first appearance, so a replay
    file reproduces its source reports exactly.
    """
    grouped: dict[InputSetting, list[TrialRecord]] = {}
    record_no = 0
    for line in text.split("\n"):
        if not line.strip():
            continue
        record_no += 1
        try:
            record = json.loads(line)
            setting = InputSetting(record["setting"])
            score = TrialScore(record["ifc"], record["gp"], record["ic"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DatasetSyntaxError(record_no, f"bad trial record: {exc}") from None
        except ValueError as exc:
            raise DatasetSyntaxError(record_no, str(exc)) from None
        label = _parse_error_label(record.get("error_label"), record_no)
        grouped.setdefault(setting, []).append(
            TrialRecord(str(record["id"]), score, label)
        )
    return [_aggregate(setting, trials) for setting, trials in grouped.items()]
