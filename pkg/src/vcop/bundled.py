"""Access to the data files shipped inside the package: two synthetic
manuals, the condition rules that cover them, a 50-sample evaluation
dataset, and the per-trial replay fixtures."""

from __future__ import annotations

from importlib import resources

from .corpus import Manual, parse_manual
from .evaluation import Sample, load_dataset
from .situation import ConditionRule, load_rules

MANUAL_FILES = ("qrh_a320.qrh", "sop_a320.qrh")
RULES_FILE = "conditions.rules"
DATASET_FILE = "dataset.jsonl"
REPLAY_FILES = {
    "preliminary": "replay_preliminary.jsonl",
    "formal": "replay_formal.jsonl",
}


def read_data_file(name: str) -> str:
    return resources.files("vcop.data").joinpath(name).read_text(encoding="utf-8")


def load_bundled_corpus() -> list[Manual]:
    return [parse_manual(read_data_file(name)) for name in MANUAL_FILES]


def load_bundled_rules() -> list[ConditionRule]:
    return load_rules(read_data_file(RULES_FILE))


def load_bundled_samples() -> list[Sample]:
    return load_dataset(read_data_file(DATASET_FILE))


def read_replay_fixture(name: str) -> str:
    if name not in REPLAY_FILES:
        raise KeyError(f"no replay fixture {name!r} (have {sorted(REPLAY_FILES)})")
    return read_data_file(REPLAY_FILES[name])
