"""HTTP service over the query pipeline and evaluation harness.

All state except sessions is immutable and loaded at startup; /api/query is
pure. Sessions hold a scenario, the instruction/response transcript, and
which checklist steps the pilot has checked off, keyed by session id and
mutated under a per-session lock. Error bodies always carry the module
error code: {"code": ..., "detail": ...}.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .bundled import load_bundled_samples
from .config import Runtime
from .corpus import (
    Manual,
    Procedure,
    SourceIndex,
    UnresolvedIndexError,
    find_procedure,
    render_procedure,
    verbatim_excerpt,
)
from .errors import VcopError
from .evaluation import (
    Sample,
    SettingReport,
    ablation,
    load_dataset,
    render_report_table,
)
from .pipeline import (
    InputSetting,
    ProcedureResponse,
    build_query,
    respond,
)
from .situation import DisplayKind, FlightCondition, parse_panel_text


class UnknownSessionError(VcopError):
    code = "UnknownSession"

    def __init__(self, session_id: str):
        super().__init__(f"no session {session_id!r}")


class UnknownScenarioError(VcopError):
    code = "UnknownScenario"

    def __init__(self, scenario_id: str):
        super().__init__(f"no scenario {scenario_id!r}")


class UnknownProcedureRefError(VcopError):
    code = "UnknownProcedure"

    def __init__(self, detail: str):
        super().__init__(detail)


_STATUS_BY_CODE = {
    "Error": 422,
    "MissingInput": 422,
    "ExtraneousInput": 422,
    "SyntaxError": 422,
    "RuleSyntaxError": 422,
    "DatasetSyntaxError": 422,
    "InconsistentSample": 422,
    "DuplicateId": 422,
    "DuplicateRuleId": 422,
    "PageOrderError": 422,
    "MissingIndex": 422,
    "ConfigError": 422,
    "EmptyCorpus": 422,
    "UnknownProcedure": 404,
    "UnknownSession": 404,
    "UnknownScenario": 404,
    "UnresolvedIndex": 404,
    "GroundingViolation": 502,
    "ProviderLabelError": 502,
    "TransportError": 502,
    "Timeout": 504,
}


# --- wire-format serialization ----------------------------------------------


def source_to_dict(source: SourceIndex) -> dict:
    return {
        "manual_id": source.manual_id,
        "section_number": source.section_number,
        "page": source.page,
        "line_start": source.line_start,
        "line_end": source.line_end,
    }


def condition_to_dict(condition: FlightCondition) -> dict:
    return {
        "class": condition.condition_class.value,
        "labels": list(condition.labels),
        "matched_rules": list(condition.matched_rules),
    }


def response_to_dict(response: ProcedureResponse) -> dict:
    return {
        "condition": condition_to_dict(response.condition),
        "hits": [
            {
                "procedure_id": h.procedure_id,
                "score": h.score,
                "source": source_to_dict(h.source),
            }
            for h in response.hits
        ],
        "excerpt": response.excerpt,
        "citation": source_to_dict(response.citation) if response.citation else None,
        "provider": response.provider,
        "advisory": response.advisory,
    }


def procedure_to_dict(procedure: Procedure, corpus: list[Manual]) -> dict:
    return {
        "id": procedure.id,
        "title": procedure.title,
        "severity": procedure.severity.value,
        "condition_tags": sorted(procedure.condition_tags),
        "steps": [
            {
                "ordinal": s.ordinal,
                "challenge": s.challenge,
                "response": s.response,
                "nesting": s.nesting,
                "guard": s.guard,
            }
            for s in procedure.steps
        ],
        "source": source_to_dict(procedure.source),
        "text": render_procedure(procedure),
        "excerpt": verbatim_excerpt(corpus, procedure.source),
    }


# --- sessions -----------------------------------------------------------------


@dataclass
class Session:
    session_id: str
    scenario_id: str | None
    panel: str
    display: DisplayKind
    transcript: list[tuple[str, ProcedureResponse]] = field(default_factory=list)
    checked_steps: set[tuple[str, int]] = field(default_factory=set)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def procedures_in_transcript(self) -> set[str]:
        return {
            hit.procedure_id for _, response in self.transcript for hit in response.hits
        }

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "scenario_id": self.scenario_id,
            "display": self.display.value,
            "panel": self.panel,
            "transcript": [
                {"instruction": text, "response": response_to_dict(resp)}
                for text, resp in self.transcript
            ],
            "checked_steps": [
                {"procedure_id": pid, "ordinal": ordinal}
                for pid, ordinal in sorted(self.checked_steps)
            ],
        }


class SessionStore:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, scenario_id: str | None, panel: str, display: DisplayKind) -> Session:
        session = Session(
            session_id=uuid.uuid4().hex,
            scenario_id=scenario_id,
            panel=panel,
            display=display,
        )
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(session_id)
        return session


# --- request bodies -----------------------------------------------------------


class QueryBody(BaseModel):
    setting: str | None = None
    panel: str
    display: str
    instruction: str | None = None


class SessionBody(BaseModel):
    scenario_id: str | None = None
    panel: str | None = None
    display: str | None = None


class InstructionBody(BaseModel):
    text: str


class CheckBody(BaseModel):
    procedure_id: str
    ordinal: int


class EvaluateBody(BaseModel):
    dataset: str | None = None
    dataset_path: str | None = None
    settings: list[str] | None = None


def _parse_enum(enum_cls, value: str, field_name: str):
    try:
        return enum_cls(value.upper())
    except ValueError:
        raise VcopError(f"bad {field_name} {value!r}") from None


def create_app(runtime: Runtime) -> FastAPI:
    app = FastAPI(title="vcop", version="0.1.0")
    sessions = SessionStore()
    scenarios: dict[str, Sample] = {s.id: s for s in load_bundled_samples()}

    @app.exception_handler(VcopError)
    async def vcop_error_handler(_: Request, exc: VcopError):
        return JSONResponse(
            status_code=_STATUS_BY_CODE.get(exc.code, 500),
            content={"code": exc.code, "detail": str(exc)},
        )

    def run_query(
        setting: InputSetting, panel: str, display: DisplayKind, instruction: str | None
    ) -> ProcedureResponse:
        if setting is InputSetting.OCR_PLUS_INSTRUCTION:
            ctx = build_query(
                setting, ocr_text=panel, display=display, instruction=instruction
            )
        else:
            snapshot = parse_panel_text(panel, display)
            ctx = build_query(setting, snapshot=snapshot, instruction=instruction)
        return respond(ctx, runtime.provider, runtime.index, runtime.corpus)

    @app.post("/api/query")
    def api_query(body: QueryBody):
        setting = (
            _parse_enum(InputSetting, body.setting, "setting")
            if body.setting
            else runtime.config.default_setting
        )
        display = _parse_enum(DisplayKind, body.display, "display")
        response = run_query(setting, body.panel, display, body.instruction)
        return response_to_dict(response)

    @app.get("/api/manuals")
    def api_manuals():
        return [
            {
                "id": manual.id,
                "title": manual.title,
                "chapters": [
                    {
                        "number": chapter.number,
                        "title": chapter.title,
                        "sections": [
                            {
                                "number": section.number,
                                "title": section.title,
                                "page": section.page,
                                "procedure_ids": [p.id for p in section.procedures],
                            }
                            for section in chapter.sections
                        ],
                    }
                    for chapter in manual.chapters
                ],
            }
            for manual in runtime.corpus
        ]

    @app.get("/api/procedures/{procedure_id}")
    def api_procedure(procedure_id: str):
        procedure = find_procedure(runtime.corpus, procedure_id)
        if procedure is None:
            raise UnknownProcedureRefError(f"no procedure {procedure_id!r}")
        return procedure_to_dict(procedure, runtime.corpus)

    @app.get("/api/scenarios")
    def api_scenarios():
        return [
            {
                "id": sample.id,
                "display": sample.display.value,
                "panel": sample.panel,
                "instruction": sample.instruction,
            }
            for sample in scenarios.values()
        ]

    @app.post("/api/sessions")
    def api_create_session(body: SessionBody):
        if body.scenario_id is not None:
            sample = scenarios.get(body.scenario_id)
            if sample is None:
                raise UnknownScenarioError(body.scenario_id)
            session = sessions.create(sample.id, sample.panel, sample.display)
        elif body.panel is not None and body.display is not None:
            display = _parse_enum(DisplayKind, body.display, "display")
            session = sessions.create(None, body.panel, display)
        else:
            raise VcopError("session needs scenario_id or panel + display")
        return {"session_id": session.session_id}

    @app.get("/api/sessions/{session_id}")
    def api_get_session(session_id: str):
        session = sessions.get(session_id)
        with session.lock:
            return session.to_dict()

    @app.post("/api/sessions/{session_id}/instruction")
    def api_session_instruction(session_id: str, body: InstructionBody):
        session = sessions.get(session_id)
        response = run_query(
            InputSetting.SNAPSHOT_PLUS_INSTRUCTION,
            session.panel,
            session.display,
            body.text,
        )
        with session.lock:
            session.transcript.append((body.text, response))
        return response_to_dict(response)

    @app.post("/api/sessions/{session_id}/check")
    def api_session_check(session_id: str, body: CheckBody):
        session = sessions.get(session_id)
        with session.lock:
            if body.procedure_id not in session.procedures_in_transcript():
                return JSONResponse(
                    status_code=409,
                    content={
                        "code": "UnknownProcedure",
                        "detail": f"procedure {body.procedure_id!r} is not in "
                        "this session's transcript",
                    },
                )
            procedure = find_procedure(runtime.corpus, body.procedure_id)
            if procedure is None or not 1 <= body.ordinal <= len(procedure.steps):
                return JSONResponse(
                    status_code=409,
                    content={
                        "code": "UnresolvedIndex",
                        "detail": f"procedure {body.procedure_id!r} has no step "
                        f"ordinal {body.ordinal}",
                    },
                )
            key = (body.procedure_id, body.ordinal)
            if key in session.checked_steps:
                session.checked_steps.discard(key)
                checked = False
            else:
                session.checked_steps.add(key)
                checked = True
            return {
                "procedure_id": body.procedure_id,
                "ordinal": body.ordinal,
                "checked": checked,
                "checked_steps": [
                    {"procedure_id": pid, "ordinal": o}
                    for pid, o in sorted(session.checked_steps)
                ],
            }

    @app.post("/api/evaluate")
    def api_evaluate(body: EvaluateBody):
        if body.dataset is not None:
            samples = load_dataset(body.dataset)
        elif body.dataset_path is not None:
            try:
                with open(body.dataset_path, encoding="utf-8") as fh:
                    samples = load_dataset(fh.read())
            except OSError as exc:
                raise VcopError(f"cannot read dataset: {exc}") from None
        else:
            samples = list(scenarios.values())
        settings = (
            [_parse_enum(InputSetting, s, "setting") for s in body.settings]
            if body.settings
            else list(InputSetting)
        )
        reports = ablation(
            samples, settings, runtime.provider, runtime.index, runtime.corpus
        )
        return {
            "reports": [report_to_dict(r) for r in reports],
            "table": render_report_table(reports),
        }

    return app


def report_to_dict(report: SettingReport) -> dict:
    return {
        "setting": report.setting.value,
        "n": report.n,
        "ifc": {"count": report.ifc_count, "accuracy": float(report.ifc_acc)},
        "gp": {"count": report.gp_count, "accuracy": float(report.gp_acc)},
        "ic": {"count": report.ic_count, "accuracy": float(report.ic_acc)},
        "per_trial": [
            {
                "id": t.sample_id,
                "ifc": t.score.ifc,
                "gp": t.score.gp,
                "ic": t.score.ic,
                "error_label": (
                    {
                        "stage": t.error_label.stage.value,
                        "category": t.error_label.category.value,
                    }
                    if t.error_label
                    else None
                ),
            }
            for t in report.per_trial
        ],
    }
