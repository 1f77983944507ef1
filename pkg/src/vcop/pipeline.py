"""The interpret -> search -> cite loop across the three input settings.

A query carries either a structured snapshot, a snapshot plus a pilot
instruction, or raw OCR panel text plus an instruction. A perception
provider turns the query into a flight condition; retrieval then always
runs through the local index, and the returned excerpt is a byte-exact
corpus slice with a resolvable citation. Any excerpt text a provider
claims on its own is verified against the corpus and rejected with
GroundingViolation when it is not a real substring.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Protocol, Sequence, runtime_checkable

import httpx

from .corpus import Manual, SourceIndex, verbatim_excerpt
from .errors import VcopError
from .retrieval import Index, RankedHit, search, tokenize
from .situation import (
    ConditionRule,
    DisplayKind,
    FlightCondition,
    InstrumentSnapshot,
    Severity,
    classify,
    parse_panel_text,
    render_panel,
)

# candidates retrieved per query; the top hit supplies excerpt + citation,
# the rest feed the UI's alternatives list
CANDIDATE_HITS = 5

NO_ANOMALY_ADVISORY = "no anomaly detected"


class InputSetting(Enum):
    SNAPSHOT_ONLY = "SNAPSHOT_ONLY"
    SNAPSHOT_PLUS_INSTRUCTION = "SNAPSHOT_PLUS_INSTRUCTION"
    OCR_PLUS_INSTRUCTION = "OCR_PLUS_INSTRUCTION"

    @property
    def wants_instruction(self) -> bool:
        return self is not InputSetting.SNAPSHOT_ONLY

    @property
    def wants_snapshot(self) -> bool:
        return self is not InputSetting.OCR_PLUS_INSTRUCTION


class Phraseology(Enum):
    ECAM_ACTIONS = "ECAM_ACTIONS"
    CLEAR_STATUS = "CLEAR_STATUS"
    FREE_TEXT = "FREE_TEXT"


class MissingInputError(VcopError):
    code = "MissingInput"

    def __init__(self, setting: InputSetting, field: str):
        super().__init__(f"{setting.value} requires {field}")
        self.setting = setting
        self.field = field


class ExtraneousInputError(VcopError):
    code = "ExtraneousInput"

    def __init__(self, setting: InputSetting, field: str):
        super().__init__(f"{setting.value} does not accept {field}")
        self.setting = setting
        self.field = field


class GroundingViolationError(VcopError):
    code = "GroundingViolation"

    def __init__(self, provider: str, excerpt: str):
        preview = excerpt if len(excerpt) <= 60 else excerpt[:57] + "..."
        super().__init__(
            f"provider {provider!r} supplied text that exists nowhere in the "
            f"corpus: {preview!r}"
        )
        self.provider = provider
        self.excerpt = excerpt


class ProviderLabelError(VcopError):
    code = "ProviderLabelError"

    def __init__(self, label: str, detail: str = "not in the condition vocabulary"):
        super().__init__(f"provider label {label!r}: {detail}")
        self.label = label


class ProviderTimeoutError(VcopError):
    code = "Timeout"

    def __init__(self, timeout_ms: int):
        super().__init__(f"provider did not answer within {timeout_ms} ms")
        self.timeout_ms = timeout_ms


class ProviderTransportError(VcopError):
    code = "TransportError"

    def __init__(self, detail: str):
        super().__init__(detail)


@dataclass(frozen=True)
class PilotInstruction:
    text: str
    phraseology_tag: Phraseology | None = None


def tag_phraseology(text: str) -> Phraseology:
    normalized = " ".join(text.lower().split())
    if normalized == "ecam actions":
        return Phraseology.ECAM_ACTIONS
    if normalized == "clear status":
        return Phraseology.CLEAR_STATUS
    return Phraseology.FREE_TEXT


@dataclass(frozen=True)
class QueryContext:
    setting: InputSetting
    snapshot: InstrumentSnapshot | None = None
    ocr_text: str | None = None
    instruction: PilotInstruction | None = None
    display: DisplayKind | None = None


@dataclass(frozen=True)
class PerceptionResult:
    """What a provider saw: the condition, plus any procedure text it chose
    to quote on its own (which respond() must ground-check)."""

    condition: FlightCondition
    claimed_excerpt: str | None = None


@runtime_checkable
class PerceptionProvider(Protocol):
    name: str

    def analyze(self, ctx: QueryContext) -> PerceptionResult: ...


def build_query(
    setting: InputSetting,
    snapshot: InstrumentSnapshot | None = None,
    ocr_text: str | None = None,
    instruction: str | PilotInstruction | None = None,
    display: DisplayKind | None = None,
) -> QueryContext:
    """Assemble a QueryContext, enforcing each setting's presence rules."""
    if setting.wants_snapshot:
        if snapshot is None:
            raise MissingInputError(setting, "snapshot")
        if ocr_text is not None:
            raise ExtraneousInputError(setting, "ocr_text")
        display = snapshot.display
    else:
        if ocr_text is None:
            raise MissingInputError(setting, "ocr_text")
        if snapshot is not None:
            raise ExtraneousInputError(setting, "snapshot")
        if display is None:
            raise MissingInputError(setting, "display")

    pilot_instruction: PilotInstruction | None = None
    if setting.wants_instruction:
        if isinstance(instruction, str):
            instruction = PilotInstruction(instruction)
        if instruction is None or not instruction.text.strip():
            raise MissingInputError(setting, "instruction")
        tag = instruction.phraseology_tag or tag_phraseology(instruction.text)
        pilot_instruction = PilotInstruction(instruction.text, tag)
    elif instruction is not None:
        raise ExtraneousInputError(setting, "instruction")

    return QueryContext(
        setting=setting,
        snapshot=snapshot,
        ocr_text=ocr_text,
        instruction=pilot_instruction,
        display=display,
    )


@dataclass(frozen=True)
class ProcedureResponse:
    condition: FlightCondition
    hits: tuple[RankedHit, ...]
    excerpt: str
    citation: SourceIndex | None
    provider: str
    advisory: str | None = None


class RuleBasedProvider:
    """Deterministic perception: parse the panel if needed, then run the
    condition rules. Pure, so identical queries yield identical results."""

    def __init__(self, rules: Sequence[ConditionRule]):
        self.rules = list(rules)
        self.name = "rule-based"

    def analyze(self, ctx: QueryContext) -> PerceptionResult:
        snapshot = ctx.snapshot
        if snapshot is None:
            snapshot = parse_panel_text(ctx.ocr_text or "", ctx.display)
        return PerceptionResult(classify(snapshot, self.rules))


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    timeout_ms: int = 10000
    token_env: str = "VCOP_PROVIDER_TOKEN"


class ExternalProvider:
    """Adapter for a remote multimodal endpoint.

    The request carries the panel text, display kind, instruction, and the
    allowed label vocabulary; the reply's first line must be
    `CLASS LABEL1 LABEL2 ...`. Unknown labels are rejected outright --
    mapping them to the nearest vocabulary entry is forbidden. Reply lines
    after the first are treated as provider-quoted procedure text and are
    ground-checked downstream.
    """

    def __init__(self, config: EndpointConfig, vocabulary: Iterable[str]):
        self.config = config
        self.vocabulary = frozenset(vocabulary)
        self.name = f"external:{config.base_url}"

    def _panel_text(self, ctx: QueryContext) -> str:
        if ctx.ocr_text is not None:
            return ctx.ocr_text
        return render_panel(ctx.snapshot)

    def analyze(self, ctx: QueryContext) -> PerceptionResult:
        body = {
            "panel": self._panel_text(ctx),
            "display": ctx.display.value if ctx.display else None,
            "instruction": ctx.instruction.text if ctx.instruction else None,
            "vocabulary": sorted(self.vocabulary),
        }
        headers = {}
        token = os.environ.get(self.config.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            reply = httpx.post(
                self.config.base_url,
                json=body,
                headers=headers,
                timeout=self.config.timeout_ms / 1000.0,
            )
            reply.raise_for_status()
        except httpx.TimeoutException:
            raise ProviderTimeoutError(self.config.timeout_ms) from None
        except httpx.HTTPError as exc:
            raise ProviderTransportError(str(exc)) from None
        return self._parse_reply(reply.text)

    def _parse_reply(self, text: str) -> PerceptionResult:
        lines = text.split("\n")
        while lines and not lines[0].strip():
            lines.pop(0)
        if not lines:
            raise ProviderTransportError("provider returned an empty reply")
        head = lines[0].split()
        try:
            condition_class = Severity(head[0])
        except ValueError:
            raise ProviderLabelError(head[0], "unknown condition class") from None
        labels = head[1:]
        for label in labels:
            if label not in self.vocabulary:
                raise ProviderLabelError(label)
        if condition_class is Severity.NORMAL and labels:
            raise ProviderLabelError(labels[0], "NORMAL reply cannot carry labels")
        if condition_class is not Severity.NORMAL and not labels:
            raise ProviderLabelError(head[0], "anomaly reply carries no labels")
        claimed = "\n".join(lines[1:]).strip() or None
        condition = FlightCondition(
            condition_class, tuple(sorted(set(labels))), matched_rules=()
        )
        return PerceptionResult(condition, claimed_excerpt=claimed)


def _is_corpus_substring(corpus: Sequence[Manual], text: str) -> bool:
    return any(text in manual.source_text for manual in corpus)


def build_query_terms(ctx: QueryContext, condition: FlightCondition) -> list[str]:
    """Instruction tokens plus tokens of every condition label, in order."""
    terms: list[str] = []
    if ctx.instruction is not None:
        terms.extend(tokenize(ctx.instruction.text))
    for label in condition.labels:
        terms.extend(tokenize(label))
    return terms


def respond(
    ctx: QueryContext,
    provider: PerceptionProvider,
    index: Index,
    corpus: Sequence[Manual],
) -> ProcedureResponse:
    """Interpret the query, search the corpus, and cite the top hit verbatim."""
    try:
        result = provider.analyze(ctx)
    except VcopError as exc:
        exc.provider = provider.name
        raise
    if result.claimed_excerpt is not None and not _is_corpus_substring(
        corpus, result.claimed_excerpt
    ):
        raise GroundingViolationError(provider.name, result.claimed_excerpt)

    condition = result.condition
    if condition.is_normal:
        return ProcedureResponse(
            condition=condition,
            hits=(),
            excerpt="",
            citation=None,
            provider=provider.name,
            advisory=NO_ANOMALY_ADVISORY,
        )

    terms = build_query_terms(ctx, condition)
    hits = tuple(search(index, terms, condition.labels, k=CANDIDATE_HITS))
    if not hits:
        return ProcedureResponse(
            condition=condition,
            hits=(),
            excerpt="",
            citation=None,
            provider=provider.name,
            advisory="no matching procedure in corpus",
        )
    top = hits[0]
    excerpt = verbatim_excerpt(corpus, top.source)
    return ProcedureResponse(
        condition=condition,
        hits=hits,
        excerpt=excerpt,
        citation=top.source,
        provider=provider.name,
    )
