"""Quick-reference-handbook corpus: parse QRH markup into a citable document
model, render it back canonically, and serve byte-exact excerpts by index.

The markup is line-oriented, one directive per line:

    #MANUAL <id> <title...>            required first content line
    #CHAPTER <n> <title...>
    #SECTION <c.s> <title...> @<page>
    #PROCEDURE <id> <SEVERITY> <title...>
    #TAGS <TAG1>, <TAG2>, ...
    <challenge> .......... <response>  step; two leading spaces per nesting level
    #IF <guard text> / #ENDIF          guarded step block (no nesting of #IF)
    #END                               closes a procedure

Blank lines are ignored, `//` starts a comment line. Every parsed procedure
records the [line_start, line_end] span of its block (the #PROCEDURE line
through the last line before #END) so citations resolve to the original text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

from .errors import VcopError


class Severity(Enum):
    NORMAL = "NORMAL"
    NON_NORMAL = "NON_NORMAL"
    EMERGENCY = "EMERGENCY"


# one space, ten dots, one space; fixed regardless of challenge width
STEP_SEPARATOR = " .......... "

_TAG_RE = re.compile(r"^[A-Z0-9_]+$")
_SECTION_RE = re.compile(r"^(\d+)\.(\d+)$")


class ManualSyntaxError(VcopError):
    code = "SyntaxError"

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateIdError(VcopError):
    code = "DuplicateId"

    def __init__(self, procedure_id: str):
        super().__init__(f"duplicate procedure id {procedure_id!r}")
        self.procedure_id = procedure_id


class PageOrderError(VcopError):
    code = "PageOrderError"

    def __init__(self, section: str, page: int, previous: int):
        super().__init__(
            f"section {section} at page {page} decreases from page {previous}"
        )
        self.section = section


class MissingIndexError(VcopError):
    code = "MissingIndex"

    def __init__(self, procedure_id: str, line: int):
        super().__init__(
            f"line {line}: procedure {procedure_id!r} has no section/page home"
        )
        self.procedure_id = procedure_id
        self.line = line


class UnresolvedIndexError(VcopError):
    code = "UnresolvedIndex"

    def __init__(self, reason: str):
        super().__init__(reason)


@dataclass(frozen=True)
class SourceIndex:
    """Exact location of a procedure block inside its source document."""

    manual_id: str
    section_number: str
    page: int
    line_start: int
    line_end: int

    def __post_init__(self):
        if self.line_start < 1 or self.line_end < self.line_start:
            raise ValueError(f"bad line span [{self.line_start}, {self.line_end}]")


@dataclass(frozen=True)
class ChecklistStep:
    ordinal: int
    challenge: str
    response: str
    nesting: int = 0
    guard: str | None = None


@dataclass(frozen=True)
class Procedure:
    id: str
    title: str
    severity: Severity
    condition_tags: frozenset[str]
    steps: tuple[ChecklistStep, ...]
    # positional metadata, not content: excluded from model equality
    source: SourceIndex = field(compare=False)


@dataclass(frozen=True)
class Section:
    number: str
    title: str
    page: int
    procedures: tuple[Procedure, ...]


@dataclass(frozen=True)
class Chapter:
    number: int
    title: str
    sections: tuple[Section, ...]


@dataclass(frozen=True)
class Manual:
    id: str
    title: str
    chapters: tuple[Chapter, ...]
    # original markup this manual was parsed from; excerpts slice it
    source_text: str = field(compare=False, repr=False, default="")

    def procedures(self) -> Iterator[Procedure]:
        for chapter in self.chapters:
            for section in chapter.sections:
                yield from section.procedures

    def section_numbers(self) -> set[str]:
        return {s.number for c in self.chapters for s in c.sections}


@dataclass(frozen=True)
class Finding:
    """One corpus-validation defect. Findings are data, not failures."""

    code: str
    subject: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def ok(self) -> bool:
        return not self.findings


def _split_directive(line: str) -> tuple[str, str]:
    stripped = line.strip()
    head, _, rest = stripped.partition(" ")
    return head, rest.strip()


class _ManualParser:
    """Single-pass state machine over the markup lines."""

    def __init__(self, text: str):
        self.lines = text.split("\n")
        self.manual_id: str | None = None
        self.manual_title = ""
        self.chapters: list[dict] = []
        self.seen_ids: set[str] = set()
        self.last_page: int | None = None
        # open-procedure state
        self.proc: dict | None = None
        self.guard: str | None = None

    def fail(self, line_no: int, reason: str) -> ManualSyntaxError:
        return ManualSyntaxError(line_no, reason)

    def parse(self) -> Manual:
        for line_no, raw in enumerate(self.lines, start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("//"):
                continue
            if self.manual_id is None:
                if not stripped.startswith("#MANUAL "):
                    raise self.fail(line_no, "missing #MANUAL header")
                self._header(line_no, raw)
            elif stripped.startswith("#"):
                self._directive(line_no, raw)
            else:
                self._step_line(line_no, raw)
        if self.manual_id is None:
            raise self.fail(1, "missing #MANUAL header")
        if self.proc is not None:
            raise self.fail(len(self.lines), "unterminated procedure (missing #END)")
        return self._build()

    def _header(self, line_no: int, raw: str) -> None:
        _, rest = _split_directive(raw)
        if not rest:
            raise self.fail(line_no, "#MANUAL needs an id and a title")
        manual_id, _, title = rest.partition(" ")
        if not title.strip():
            raise self.fail(line_no, "#MANUAL needs a title after the id")
        self.manual_id = manual_id
        self.manual_title = title.strip()

    def _directive(self, line_no: int, raw: str) -> None:
        head, rest = _split_directive(raw)
        if head == "#MANUAL":
            raise self.fail(line_no, "duplicate #MANUAL header")
        if head == "#CHAPTER":
            self._chapter(line_no, rest)
        elif head == "#SECTION":
            self._section(line_no, raw.strip())
        elif head == "#PROCEDURE":
            self._procedure(line_no, rest)
        elif head == "#TAGS":
            self._tags(line_no, rest)
        elif head == "#IF":
            self._open_guard(line_no, rest)
        elif head == "#ENDIF":
            self._close_guard(line_no)
        elif head == "#END":
            self._end_procedure(line_no)
        else:
            raise self.fail(line_no, f"unknown directive {head}")

    def _require_closed_procedure(self, line_no: int, directive: str) -> None:
        if self.proc is not None:
            raise self.fail(line_no, f"{directive} inside an open procedure")

    def _chapter(self, line_no: int, rest: str) -> None:
        self._require_closed_procedure(line_no, "#CHAPTER")
        number_text, _, title = rest.partition(" ")
        if not number_text.isdigit() or int(number_text) < 1:
            raise self.fail(line_no, "#CHAPTER needs a positive integer number")
        if not title.strip():
            raise self.fail(line_no, "#CHAPTER needs a title")
        number = int(number_text)
        if self.chapters and number <= self.chapters[-1]["number"]:
            raise self.fail(
                line_no,
                f"chapter {number} does not increase from {self.chapters[-1]['number']}",
            )
        self.chapters.append({"number": number, "title": title.strip(), "sections": []})

    def _section(self, line_no: int, stripped: str) -> None:
        self._require_closed_procedure(line_no, "#SECTION")
        if not self.chapters:
            raise self.fail(line_no, "#SECTION before any #CHAPTER")
        m = re.match(r"^#SECTION\s+(\S+)\s+(.*?)\s+@(\d+)$", stripped)
        if not m:
            raise self.fail(line_no, "#SECTION needs '<c.s> <title> @<page>'")
        number, title, page_text = m.group(1), m.group(2), m.group(3)
        sm = _SECTION_RE.match(number)
        if not sm or int(sm.group(1)) < 1 or int(sm.group(2)) < 1:
            raise self.fail(line_no, f"bad section number {number!r}")
        chapter = self.chapters[-1]
        if int(sm.group(1)) != chapter["number"]:
            raise self.fail(
                line_no,
                f"section {number} does not carry chapter prefix {chapter['number']}",
            )
        if chapter["sections"]:
            prev = _SECTION_RE.match(chapter["sections"][-1]["number"])
            if int(sm.group(2)) <= int(prev.group(2)):
                raise self.fail(line_no, f"section {number} does not increase")
        page = int(page_text)
        if page < 1:
            raise self.fail(line_no, "page must be positive")
        if self.last_page is not None and page < self.last_page:
            raise PageOrderError(number, page, self.last_page)
        self.last_page = page
        chapter["sections"].append(
            {"number": number, "title": title, "page": page, "procedures": []}
        )

    def _procedure(self, line_no: int, rest: str) -> None:
        self._require_closed_procedure(line_no, "#PROCEDURE")
        parts = rest.split(None, 2)
        if len(parts) < 3:
            raise self.fail(line_no, "#PROCEDURE needs '<id> <severity> <title>'")
        proc_id, severity_text, title = parts
        if not self.chapters or not self.chapters[-1]["sections"]:
            raise MissingIndexError(proc_id, line_no)
        try:
            severity = Severity(severity_text)
        except ValueError:
            raise self.fail(line_no, f"unknown severity {severity_text!r}") from None
        if proc_id in self.seen_ids:
            raise DuplicateIdError(proc_id)
        self.seen_ids.add(proc_id)
        self.proc = {
            "id": proc_id,
            "title": title.strip(),
            "severity": severity,
            "tags": set(),
            "steps": [],
            "line_start": line_no,
            "line_end": line_no,
        }

    def _require_open_procedure(self, line_no: int, what: str) -> dict:
        if self.proc is None:
            raise self.fail(line_no, f"{what} outside a procedure")
        return self.proc

    def _tags(self, line_no: int, rest: str) -> None:
        proc = self._require_open_procedure(line_no, "#TAGS")
        tags = [t.strip().upper() for t in rest.split(",") if t.strip()]
        if not tags:
            raise self.fail(line_no, "#TAGS needs at least one tag")
        for tag in tags:
            if not _TAG_RE.match(tag):
                raise self.fail(line_no, f"bad condition tag {tag!r}")
        proc["tags"].update(tags)
        proc["line_end"] = line_no

    def _open_guard(self, line_no: int, rest: str) -> None:
        proc = self._require_open_procedure(line_no, "#IF")
        if self.guard is not None:
            raise self.fail(line_no, "#IF blocks do not nest")
        if not rest:
            raise self.fail(line_no, "#IF needs a guard condition")
        self.guard = rest
        proc["line_end"] = line_no

    def _close_guard(self, line_no: int) -> None:
        proc = self._require_open_procedure(line_no, "#ENDIF")
        if self.guard is None:
            raise self.fail(line_no, "#ENDIF without #IF")
        self.guard = None
        proc["line_end"] = line_no

    def _step_line(self, line_no: int, raw: str) -> None:
        proc = self._require_open_procedure(line_no, "step line")
        body = raw.rstrip()
        indent = len(body) - len(body.lstrip(" "))
        if indent % 2 != 0:
            raise self.fail(line_no, "step indent must be two spaces per level")
        nesting = indent // 2
        steps = proc["steps"]
        if not steps and nesting != 0:
            raise self.fail(line_no, "first step must be at nesting 0")
        if steps and nesting > steps[-1].nesting + 1:
            raise self.fail(line_no, "step nesting jumps more than one level")
        content = body.lstrip(" ")
        challenge, sep, response = content.partition(STEP_SEPARATOR)
        if not sep or not challenge.strip() or not response.strip():
            raise self.fail(
                line_no, "step needs '<challenge> .......... <response>'"
            )
        steps.append(
            ChecklistStep(
                ordinal=len(steps) + 1,
                challenge=challenge.strip(),
                response=response.strip(),
                nesting=nesting,
                guard=self.guard,
            )
        )
        proc["line_end"] = line_no

    def _end_procedure(self, line_no: int) -> None:
        proc = self._require_open_procedure(line_no, "#END")
        if self.guard is not None:
            raise self.fail(line_no, "unclosed #IF at #END")
        if not proc["steps"]:
            raise self.fail(line_no, f"procedure {proc['id']!r} has no steps")
        if not proc["tags"]:
            raise self.fail(line_no, f"procedure {proc['id']!r} has no #TAGS")
        self.chapters[-1]["sections"][-1]["procedures"].append(proc)
        self.proc = None

    def _build(self) -> Manual:
        chapters = []
        for ch in self.chapters:
            sections = []
            for sec in ch["sections"]:
                procedures = tuple(
                    Procedure(
                        id=p["id"],
                        title=p["title"],
                        severity=p["severity"],
                        condition_tags=frozenset(p["tags"]),
                        steps=tuple(p["steps"]),
                        source=SourceIndex(
                            manual_id=self.manual_id,
                            section_number=sec["number"],
                            page=sec["page"],
                            line_start=p["line_start"],
                            line_end=p["line_end"],
                        ),
                    )
                    for p in sec["procedures"]
                )
                sections.append(
                    Section(sec["number"], sec["title"], sec["page"], procedures)
                )
            chapters.append(Chapter(ch["number"], ch["title"], tuple(sections)))
        return Manual(
            id=self.manual_id,
            title=self.manual_title,
            chapters=tuple(chapters),
            source_text="\n".join(self.lines),
        )


def parse_manual(text: str) -> Manual:
    """Parse one QRH markup document into an immutable Manual."""
    return _ManualParser(text).parse()


def render_step(step: ChecklistStep) -> str:
    return "  " * step.nesting + step.challenge + STEP_SEPARATOR + step.response


def render_procedure(procedure: Procedure) -> str:
    """Emit the canonical markup block for one procedure (incl. #END)."""
    lines = [
        f"#PROCEDURE {procedure.id} {procedure.severity.value} {procedure.title}",
        "#TAGS " + ", ".join(sorted(procedure.condition_tags)),
    ]
    open_guard: str | None = None
    for step in procedure.steps:
        if step.guard != open_guard:
            if open_guard is not None:
                lines.append("#ENDIF")
            if step.guard is not None:
                lines.append(f"#IF {step.guard}")
            open_guard = step.guard
        lines.append(render_step(step))
    if open_guard is not None:
        lines.append("#ENDIF")
    lines.append("#END")
    return "\n".join(lines)


def render_manual(manual: Manual) -> str:
    """Emit the whole manual in canonical markup (parseable by parse_manual)."""
    parts = [f"#MANUAL {manual.id} {manual.title}"]
    for chapter in manual.chapters:
        parts.append("")
        parts.append(f"#CHAPTER {chapter.number} {chapter.title}")
        for section in chapter.sections:
            parts.append("")
            parts.append(f"#SECTION {section.number} {section.title} @{section.page}")
            for procedure in section.procedures:
                parts.append("")
                parts.append(render_procedure(procedure))
    return "\n".join(parts) + "\n"


def verbatim_excerpt(corpus: Iterable[Manual], index: SourceIndex) -> str:
    """Return exactly the source lines [line_start, line_end] named by `index`.

    The result is byte-identical to the corresponding slice of the manual's
    original markup. Raises UnresolvedIndexError when the manual, section, or
    line span does not exist.
    """
    manual = next((m for m in corpus if m.id == index.manual_id), None)
    if manual is None:
        raise UnresolvedIndexError(f"no manual {index.manual_id!r} in corpus")
    if index.section_number not in manual.section_numbers():
        raise UnresolvedIndexError(
            f"no section {index.section_number} in manual {manual.id!r}"
        )
    lines = manual.source_text.split("\n")
    if index.line_end > len(lines):
        raise UnresolvedIndexError(
            f"line span [{index.line_start}, {index.line_end}] beyond "
            f"{len(lines)}-line document"
        )
    return "\n".join(lines[index.line_start - 1 : index.line_end])


def find_procedure(corpus: Iterable[Manual], procedure_id: str) -> Procedure | None:
    for manual in corpus:
        for procedure in manual.procedures():
            if procedure.id == procedure_id:
                return procedure
    return None


def validate_corpus(corpus: Iterable[Manual]) -> ValidationReport:
    """Re-check every corpus invariant; the report is empty iff all hold.

    Parsed manuals satisfy these by construction, but corpora can also be
    assembled programmatically, so everything is re-verified here.
    """
    manuals = list(corpus)
    findings: list[Finding] = []
    seen_manual_ids: set[str] = set()
    seen_proc_ids: set[str] = set()

    for manual in manuals:
        if not manual.id:
            findings.append(Finding("DuplicateManualId", "", "manual id is empty"))
        elif manual.id in seen_manual_ids:
            findings.append(
                Finding("DuplicateManualId", manual.id, "manual id reused in corpus")
            )
        seen_manual_ids.add(manual.id)

        last_chapter = 0
        last_page = 0
        for chapter in manual.chapters:
            if chapter.number <= last_chapter:
                findings.append(
                    Finding(
                        "ChapterOrder",
                        f"{manual.id}:{chapter.number}",
                        "chapter numbers must strictly increase",
                    )
                )
            last_chapter = chapter.number
            last_section = 0
            for section in chapter.sections:
                sm = _SECTION_RE.match(section.number)
                if not sm or int(sm.group(1)) != chapter.number:
                    findings.append(
                        Finding(
                            "SectionNumber",
                            f"{manual.id}:{section.number}",
                            f"section number must be '{chapter.number}.<s>'",
                        )
                    )
                elif int(sm.group(2)) <= last_section:
                    findings.append(
                        Finding(
                            "SectionOrder",
                            f"{manual.id}:{section.number}",
                            "section numbers must strictly increase in a chapter",
                        )
                    )
                if sm:
                    last_section = int(sm.group(2))
                if section.page < last_page:
                    findings.append(
                        Finding(
                            "PageOrder",
                            f"{manual.id}:{section.number}",
                            f"page {section.page} decreases from {last_page}",
                        )
                    )
                last_page = max(last_page, section.page)
                if not section.procedures:
                    findings.append(
                        Finding(
                            "UnreachableSection",
                            f"{manual.id}:{section.number}",
                            "section holds no procedures",
                        )
                    )
                for procedure in section.procedures:
                    findings.extend(_validate_procedure(manual, section, procedure))
                    if procedure.id in seen_proc_ids:
                        findings.append(
                            Finding(
                                "DuplicateId",
                                procedure.id,
                                "procedure id reused in corpus",
                            )
                        )
                    seen_proc_ids.add(procedure.id)
    return ValidationReport(tuple(findings))


def _validate_procedure(
    manual: Manual, section: Section, procedure: Procedure
) -> list[Finding]:
    findings = []
    if not procedure.condition_tags:
        findings.append(
            Finding("EmptyTags", procedure.id, "procedure has no condition tags")
        )
    for tag in procedure.condition_tags:
        if not _TAG_RE.match(tag):
            findings.append(
                Finding("BadTag", procedure.id, f"tag {tag!r} is not UPPER_SNAKE")
            )
    if not procedure.steps:
        findings.append(Finding("EmptySteps", procedure.id, "procedure has no steps"))
    src = procedure.source
    if src.manual_id != manual.id or src.section_number != section.number:
        findings.append(
            Finding(
                "UnresolvedIndex",
                procedure.id,
                f"source points at {src.manual_id}:{src.section_number}, "
                f"procedure lives in {manual.id}:{section.number}",
            )
        )
    elif manual.source_text and src.line_end > len(manual.source_text.split("\n")):
        findings.append(
            Finding("UnresolvedIndex", procedure.id, "source span beyond document end")
        )
    return findings
