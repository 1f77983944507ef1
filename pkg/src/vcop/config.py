"""Application configuration and runtime assembly shared by the CLI and
the HTTP service. Corpus, rules, and index are loaded once and treated as
immutable afterwards."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from . import bundled
from .corpus import Manual, parse_manual, validate_corpus
from .errors import VcopError
from .pipeline import (
    EndpointConfig,
    ExternalProvider,
    InputSetting,
    PerceptionProvider,
    RuleBasedProvider,
)
from .retrieval import Index, build_index
from .situation import ConditionRule, load_rules, rule_vocabulary


class ConfigError(VcopError):
    code = "ConfigError"


class ProviderKind(Enum):
    RULE_BASED = "RULE_BASED"
    EXTERNAL = "EXTERNAL"


@dataclass(frozen=True)
class AppConfig:
    corpus_paths: tuple[str, ...] = ()
    rules_path: str | None = None
    provider: ProviderKind = ProviderKind.RULE_BASED
    endpoint: EndpointConfig | None = None
    port: int = 8000
    default_setting: InputSetting = InputSetting.SNAPSHOT_PLUS_INSTRUCTION

    def __post_init__(self):
        if self.provider is ProviderKind.EXTERNAL and self.endpoint is None:
            raise ConfigError("EXTERNAL provider requires an endpoint config")
        if not 1 <= self.port <= 65535:
            raise ConfigError(f"port {self.port} outside [1, 65535]")


def load_app_config(path: str | Path) -> AppConfig:
    """Read a JSON config file; omitted fields fall back to bundled data."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    endpoint = None
    if raw.get("endpoint") is not None:
        ep = raw["endpoint"]
        try:
            endpoint = EndpointConfig(
                base_url=ep["base_url"],
                timeout_ms=int(ep.get("timeout_ms", 10000)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad endpoint config: {exc}") from None
    try:
        return AppConfig(
            corpus_paths=tuple(raw.get("corpus_paths", ())),
            rules_path=raw.get("rules_path"),
            provider=ProviderKind(raw.get("provider", "RULE_BASED")),
            endpoint=endpoint,
            port=int(raw.get("port", 8000)),
            default_setting=InputSetting(
                raw.get("default_setting", "SNAPSHOT_PLUS_INSTRUCTION")
            ),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class Runtime:
    """Everything a query needs, loaded once at startup."""

    config: AppConfig
    corpus: list[Manual]
    rules: list[ConditionRule]
    index: Index
    provider: PerceptionProvider = field(repr=False)


def build_runtime(config: AppConfig) -> Runtime:
    """Load corpus + rules per config (bundled data when paths omitted),
    validate, index, and wire the configured perception provider."""
    if config.corpus_paths:
        corpus = [
            parse_manual(Path(p).read_text(encoding="utf-8"))
            for p in config.corpus_paths
        ]
    else:
        corpus = bundled.load_bundled_corpus()
    report = validate_corpus(corpus)
    if not report.ok:
        first = report.findings[0]
        raise ConfigError(
            f"corpus failed validation ({len(report.findings)} findings; "
            f"first: {first.code} {first.subject}: {first.detail})"
        )
    if config.rules_path:
        rules = load_rules(Path(config.rules_path).read_text(encoding="utf-8"))
    else:
        rules = bundled.load_bundled_rules()
    index = build_index(corpus)
    if config.provider is ProviderKind.EXTERNAL:
        provider: PerceptionProvider = ExternalProvider(
            config.endpoint, rule_vocabulary(rules)
        )
    else:
        provider = RuleBasedProvider(rules)
    return Runtime(
        config=config, corpus=corpus, rules=rules, index=index, provider=provider
    )
