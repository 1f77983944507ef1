"""Cockpit display state and its classification into a flight condition.

A panel dump is line-oriented OCR-style text: `NAME=VALUE UNIT` parameters,
warning lines optionally prefixed `!` (red) or `*` (amber), and `#FLAG NAME`
flags. Unparseable lines never fail the parse; they land in the snapshot's
errata list, mirroring how OCR noise degrades rather than crashes.

Rules are one per line:

    RULE <id> <priority> [DISPLAY=<kind>] [WARN~"<substring>"]
        [PARAM <name> <op> <value> <unit>] => <CLASS> <LABEL>

classify() evaluates every rule, takes the most severe class among matches,
and is a pure function of its inputs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .corpus import Severity
from .errors import VcopError


class DisplayKind(Enum):
    ENGINE_WARNING = "ENGINE_WARNING"
    PRIMARY_FLIGHT = "PRIMARY_FLIGHT"
    SYSTEMS = "SYSTEMS"


class WarningSeverity(Enum):
    ADVISORY = "ADVISORY"
    CAUTION_AMBER = "CAUTION_AMBER"
    WARNING_RED = "WARNING_RED"


_SEVERITY_RANK = {Severity.NORMAL: 0, Severity.NON_NORMAL: 1, Severity.EMERGENCY: 2}
_LABEL_RE = re.compile(r"^[A-Z0-9_]+$")
_NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")


class UnitMismatchError(VcopError):
    code = "UnitMismatch"

    def __init__(self, rule_id: str, parameter: str, rule_unit: str, panel_unit: str):
        super().__init__(
            f"rule {rule_id!r} compares {parameter} in {rule_unit!r}, "
            f"panel reports {panel_unit!r}"
        )
        self.rule_id = rule_id
        self.parameter = parameter


class RuleSyntaxError(VcopError):
    code = "RuleSyntaxError"

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class DuplicateRuleIdError(VcopError):
    code = "DuplicateRuleId"

    def __init__(self, rule_id: str):
        super().__init__(f"duplicate rule id {rule_id!r}")
        self.rule_id = rule_id


@dataclass(frozen=True)
class WarningMessage:
    text: str
    severity: WarningSeverity


@dataclass(frozen=True)
class Parameter:
    value: float
    unit: str


@dataclass(frozen=True)
class PanelErratum:
    """One panel-dump line that could not be interpreted."""

    code = "PanelSyntaxError"

    line: int
    text: str
    reason: str


@dataclass(frozen=True)
class InstrumentSnapshot:
    display: DisplayKind
    parameters: Mapping[str, Parameter]
    warnings: tuple[WarningMessage, ...]
    flags: frozenset[str] = frozenset()
    errata: tuple[PanelErratum, ...] = ()


class Comparator(Enum):
    LT = "<"
    LE = "<="
    EQ = "="
    GE = ">="
    GT = ">"

    def holds(self, value: float, threshold: float) -> bool:
        if self is Comparator.LT:
            return value < threshold
        if self is Comparator.LE:
            return value <= threshold
        if self is Comparator.EQ:
            return value == threshold
        if self is Comparator.GE:
            return value >= threshold
        return value > threshold


@dataclass(frozen=True)
class ParameterPredicate:
    name: str
    comparator: Comparator
    threshold: float
    unit: str


@dataclass(frozen=True)
class ConditionRule:
    id: str
    priority: int
    display: DisplayKind | None
    warning_pattern: str | None
    parameter_predicate: ParameterPredicate | None
    emitted_label: str
    emitted_class: Severity

    def __post_init__(self):
        if self.warning_pattern is None and self.parameter_predicate is None:
            raise ValueError(f"rule {self.id!r} has neither WARN nor PARAM clause")
        if self.emitted_class is Severity.NORMAL:
            raise ValueError(f"rule {self.id!r} cannot emit NORMAL")
        if not _LABEL_RE.match(self.emitted_label):
            raise ValueError(f"rule {self.id!r} label must be UPPER_SNAKE")


@dataclass(frozen=True)
class FlightCondition:
    condition_class: Severity
    labels: tuple[str, ...]
    matched_rules: tuple[str, ...] = ()

    def __post_init__(self):
        if (self.condition_class is Severity.NORMAL) != (len(self.labels) == 0):
            raise ValueError("labels must be empty exactly when class is NORMAL")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")

    @property
    def is_normal(self) -> bool:
        return self.condition_class is Severity.NORMAL


NORMAL_CONDITION = FlightCondition(Severity.NORMAL, (), ())


def _rule_matches(rule: ConditionRule, snapshot: InstrumentSnapshot) -> bool:
    if rule.display is not None and rule.display is not snapshot.display:
        return False
    if rule.warning_pattern is not None:
        if not any(rule.warning_pattern in w.text for w in snapshot.warnings):
            return False
    pred = rule.parameter_predicate
    if pred is not None:
        param = snapshot.parameters.get(pred.name)
        if param is None:
            return False
        if param.unit != pred.unit:
            raise UnitMismatchError(rule.id, pred.name, pred.unit, param.unit)
        if not pred.comparator.holds(param.value, pred.threshold):
            return False
    return True


def classify(
    snapshot: InstrumentSnapshot, rules: Sequence[ConditionRule]
) -> FlightCondition:
    """Evaluate every rule against the snapshot and fold the matches.

    The class is the most severe emitted class among matching rules
    (EMERGENCY > NON_NORMAL), NORMAL when nothing matches. Labels are
    deduplicated and ordered by rule priority descending, then code
    ascending. Unit mismatches are hard errors, never silent coercions.
    """
    ids = [r.id for r in rules]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise DuplicateRuleIdError(dup)

    matches = [r for r in rules if _rule_matches(r, snapshot)]
    if not matches:
        return NORMAL_CONDITION
    most_severe = max(matches, key=lambda r: _SEVERITY_RANK[r.emitted_class])
    label_priority: dict[str, int] = {}
    for rule in matches:
        prev = label_priority.get(rule.emitted_label)
        if prev is None or rule.priority > prev:
            label_priority[rule.emitted_label] = rule.priority
    labels = tuple(
        sorted(label_priority, key=lambda lbl: (-label_priority[lbl], lbl))
    )
    matched_rules = tuple(
        r.id for r in sorted(matches, key=lambda r: (-r.priority, r.id))
    )
    return FlightCondition(most_severe.emitted_class, labels, matched_rules)


def rule_vocabulary(rules: Iterable[ConditionRule]) -> frozenset[str]:
    """The condition labels a perception provider is allowed to emit."""
    return frozenset(r.emitted_label for r in rules)


_PRINTABLE_ASCII = re.compile(r"^[\x20-\x7e]+$")


def parse_panel_text(ocr_text: str, display: DisplayKind) -> InstrumentSnapshot:
    """Parse a panel dump into a snapshot; bad lines go to errata, never raise."""
    parameters: dict[str, Parameter] = {}
    warnings: list[WarningMessage] = []
    flags: set[str] = set()
    errata: list[PanelErratum] = []

    for line_no, raw in enumerate(ocr_text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue

        def degrade(reason: str) -> None:
            errata.append(PanelErratum(line_no, raw, reason))

        if line.startswith("#"):
            head, _, rest = line.partition(" ")
            name = rest.strip()
            if head != "#FLAG" or not _NAME_RE.match(name):
                degrade("expected '#FLAG NAME'")
            else:
                flags.add(name.upper())
            continue
        if "=" in line:
            name, _, rest = line.partition("=")
            name = name.strip().upper()
            fields = rest.split()
            if not name or not _NAME_RE.match(name) or len(fields) < 2:
                degrade("expected 'NAME=VALUE UNIT'")
                continue
            try:
                value = float(fields[0])
            except ValueError:
                degrade(f"value {fields[0]!r} is not a number")
                continue
            if name in parameters:
                degrade(f"duplicate parameter {name}")
                continue
            parameters[name] = Parameter(value, " ".join(fields[1:]))
            continue
        severity = WarningSeverity.ADVISORY
        text = line
        if line.startswith("!"):
            severity = WarningSeverity.WARNING_RED
            text = line[1:].strip()
        elif line.startswith("*"):
            severity = WarningSeverity.CAUTION_AMBER
            text = line[1:].strip()
        text = text.upper()
        if not text or not _PRINTABLE_ASCII.match(text) or not any(
            ch.isalnum() for ch in text
        ):
            degrade("unreadable warning text")
            continue
        warnings.append(WarningMessage(text, severity))

    return InstrumentSnapshot(
        display=display,
        parameters=parameters,
        warnings=tuple(warnings),
        flags=frozenset(flags),
        errata=tuple(errata),
    )


_WARNING_PREFIX = {
    WarningSeverity.WARNING_RED: "! ",
    WarningSeverity.CAUTION_AMBER: "* ",
    WarningSeverity.ADVISORY: "",
}


def render_panel(snapshot: InstrumentSnapshot) -> str:
    """Serialize a snapshot back into panel-dump text (errata are dropped)."""
    lines = [
        f"{name}={param.value:g} {param.unit}"
        for name, param in snapshot.parameters.items()
    ]
    lines.extend(
        _WARNING_PREFIX[w.severity] + w.text for w in snapshot.warnings
    )
    lines.extend(f"#FLAG {flag}" for flag in sorted(snapshot.flags))
    return "\n".join(lines)


_RULE_RE = re.compile(
    r"^RULE\s+(?P<id>\S+)\s+(?P<priority>-?\d+)\s+"
    r"(?:DISPLAY=(?P<display>\S+)\s+)?"
    r'(?:WARN~"(?P<pattern>[^"]+)"\s+)?'
    r"(?:PARAM\s+(?P<pname>\S+)\s+(?P<op><=|>=|<|>|=)\s+"
    r"(?P<threshold>-?\d+(?:\.\d+)?)\s+(?P<unit>\S+)\s+)?"
    r"=>\s+(?P<class>NON_NORMAL|EMERGENCY)\s+(?P<label>\S+)$"
)


def load_rules(text: str) -> list[ConditionRule]:
    """Parse a rule file; rules keep file order, ids must be unique."""
    rules: list[ConditionRule] = []
    seen: set[str] = set()
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        m = _RULE_RE.match(line)
        if not m:
            raise RuleSyntaxError(line_no, f"unparseable rule line {line!r}")
        if m.group("pattern") is None and m.group("pname") is None:
            raise RuleSyntaxError(line_no, "rule needs a WARN or PARAM clause")
        rule_id = m.group("id")
        if rule_id in seen:
            raise DuplicateRuleIdError(rule_id)
        seen.add(rule_id)
        display = None
        if m.group("display") is not None:
            try:
                display = DisplayKind(m.group("display"))
            except ValueError:
                raise RuleSyntaxError(
                    line_no, f"unknown display kind {m.group('display')!r}"
                ) from None
        predicate = None
        if m.group("pname") is not None:
            predicate = ParameterPredicate(
                name=m.group("pname").upper(),
                comparator=Comparator(m.group("op")),
                threshold=float(m.group("threshold")),
                unit=m.group("unit"),
            )
        label = m.group("label")
        if not _LABEL_RE.match(label):
            raise RuleSyntaxError(line_no, f"label {label!r} must be UPPER_SNAKE")
        try:
            rules.append(
                ConditionRule(
                    id=rule_id,
                    priority=int(m.group("priority")),
                    display=display,
                    warning_pattern=m.group("pattern"),
                    parameter_predicate=predicate,
                    emitted_label=label,
                    emitted_class=Severity(m.group("class")),
                )
            )
        except ValueError as exc:
            raise RuleSyntaxError(line_no, str(exc)) from None
    return rules
