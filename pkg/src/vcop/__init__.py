"""Quick-access flight procedures engine.

Parses a quick-reference-handbook corpus into a citable document model,
classifies instrument-panel state into flight conditions with a rule
engine, retrieves the applicable checklist with exact section/page
citations, and scores the whole loop with a gated three-stage accuracy
rubric.
"""

from .corpus import (
    ChecklistStep,
    Chapter,
    Manual,
    Procedure,
    Section,
    Severity,
    SourceIndex,
    ValidationReport,
    parse_manual,
    render_manual,
    render_procedure,
    validate_corpus,
    verbatim_excerpt,
)
from .evaluation import (
    ErrorBreakdown,
    ErrorCategory,
    ErrorLabel,
    ErrorStage,
    Sample,
    SettingReport,
    TrialScore,
    ablation,
    error_breakdown,
    evaluate,
    load_dataset,
    score_trial,
)
from .pipeline import (
    ExternalProvider,
    InputSetting,
    PilotInstruction,
    ProcedureResponse,
    QueryContext,
    RuleBasedProvider,
    build_query,
    respond,
)
from .retrieval import Index, RankParams, RankedHit, build_index, search, tokenize
from .situation import (
    ConditionRule,
    DisplayKind,
    FlightCondition,
    InstrumentSnapshot,
    WarningMessage,
    WarningSeverity,
    classify,
    load_rules,
    parse_panel_text,
)

__version__ = "0.1.0"

__all__ = [
    "ChecklistStep",
    "Chapter",
    "ConditionRule",
    "DisplayKind",
    "ErrorBreakdown",
    "ErrorCategory",
    "ErrorLabel",
    "ErrorStage",
    "ExternalProvider",
    "FlightCondition",
    "Index",
    "InputSetting",
    "InstrumentSnapshot",
    "Manual",
    "PilotInstruction",
    "Procedure",
    "ProcedureResponse",
    "QueryContext",
    "RankParams",
    "RankedHit",
    "RuleBasedProvider",
    "Sample",
    "Section",
    "SettingReport",
    "Severity",
    "SourceIndex",
    "TrialScore",
    "ValidationReport",
    "WarningMessage",
    "WarningSeverity",
    "ablation",
    "build_index",
    "build_query",
    "classify",
    "error_breakdown",
    "evaluate",
    "load_dataset",
    "load_rules",
    "parse_manual",
    "parse_panel_text",
    "render_manual",
    "render_procedure",
    "respond",
    "score_trial",
    "search",
    "tokenize",
    "validate_corpus",
    "verbatim_excerpt",
]
