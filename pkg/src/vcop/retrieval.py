"""Keyword retrieval over the procedure corpus: an immutable inverted index
scored with BM25 (k1=1.2, b=0.75) plus an additive boost per matched
condition tag, so warning codes rank procedures even with zero term overlap.

No stemming and no stopwords: aviation vocabulary is mostly abbreviations
(ENG, HYD, ELEC) where stemming only adds risk. Ranking is a total order
(score descending, procedure id ascending) so results are reproducible.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import Manual, Procedure, SourceIndex, validate_corpus
from .errors import VcopError

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class UnknownProcedureError(VcopError):
    code = "UnknownProcedure"

    def __init__(self, procedure_id: str):
        super().__init__(f"procedure {procedure_id!r} is not indexed")
        self.procedure_id = procedure_id


class EmptyCorpusError(VcopError):
    code = "EmptyCorpus"

    def __init__(self):
        super().__init__("cannot index an empty corpus (doc_count must be positive)")


class DuplicateDocError(VcopError):
    code = "DuplicateId"

    def __init__(self, detail: str):
        super().__init__(detail)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on every non-alphanumeric character.

    Digits are kept ("ENG 1 FAIL" -> ["eng", "1", "fail"]), empty fragments
    are dropped, and underscores split ("ENG_1_FAIL" tokenizes the same way).
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class RankParams:
    k1: float = 1.2
    b: float = 0.75
    tag_boost: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.k1) and self.k1 >= 0):
            raise ValueError("k1 must be finite and non-negative")
        if not (math.isfinite(self.b) and 0 <= self.b <= 1):
            raise ValueError("b must be in [0, 1]")
        if not (math.isfinite(self.tag_boost) and self.tag_boost >= 0):
            raise ValueError("tag_boost must be finite and non-negative")


@dataclass(frozen=True)
class TokenizedDoc:
    procedure_id: str
    terms: Mapping[str, int]
    tags: frozenset[str]
    tag_terms: frozenset[str]
    length: int


@dataclass(frozen=True)
class RankedHit:
    procedure_id: str
    score: float
    source: SourceIndex


def tokenize_procedure(procedure: Procedure) -> TokenizedDoc:
    """Token stream over title + condition tags + step challenge/response."""
    tokens = tokenize(procedure.title)
    tag_terms: set[str] = set()
    for tag in sorted(procedure.condition_tags):
        tag_tokens = tokenize(tag)
        tokens.extend(tag_tokens)
        tag_terms.update(tag_tokens)
    for step in procedure.steps:
        tokens.extend(tokenize(step.challenge))
        tokens.extend(tokenize(step.response))
    counts: dict[str, int] = {}
    for token in tokens:
        counts[token] = counts.get(token, 0) + 1
    return TokenizedDoc(
        procedure_id=procedure.id,
        terms=counts,
        tags=frozenset(procedure.condition_tags),
        tag_terms=frozenset(tag_terms),
        length=len(tokens),
    )


@dataclass(frozen=True)
class Index:
    """Immutable inverted index; rebuild from the corpus to change anything."""

    postings: Mapping[str, tuple[tuple[str, int], ...]]
    doc_lengths: Mapping[str, int]
    avg_doc_length: float
    doc_count: int
    params: RankParams
    doc_tags: Mapping[str, frozenset[str]]
    sources: Mapping[str, SourceIndex]
    idf: Mapping[str, float]

    def _term_weight(self, term: str, tf: int, procedure_id: str) -> float:
        k1, b = self.params.k1, self.params.b
        dl = self.doc_lengths[procedure_id]
        norm = k1 * (1 - b + b * dl / self.avg_doc_length)
        return self.idf[term] * (tf * (k1 + 1)) / (tf + norm)


def build_index(corpus: Iterable[Manual], params: RankParams = RankParams()) -> Index:
    """Index every procedure in the corpus.

    The corpus must be free of duplicate-id findings; duplicates raise, other
    validation findings are the caller's concern (see validate_corpus).
    """
    manuals = list(corpus)
    dup = [
        f
        for f in validate_corpus(manuals).findings
        if f.code in ("DuplicateId", "DuplicateManualId")
    ]
    if dup:
        raise DuplicateDocError(f"{dup[0].subject!r}: {dup[0].detail}")

    docs = [tokenize_procedure(p) for m in manuals for p in m.procedures()]
    if not docs:
        raise EmptyCorpusError()

    postings: dict[str, list[tuple[str, int]]] = {}
    for doc in docs:
        for term, tf in doc.terms.items():
            postings.setdefault(term, []).append((doc.procedure_id, tf))
    for term in postings:
        postings[term].sort()

    doc_count = len(docs)
    doc_lengths = {d.procedure_id: d.length for d in docs}
    avg_doc_length = sum(doc_lengths.values()) / doc_count
    idf = {
        term: math.log((doc_count - len(plist) + 0.5) / (len(plist) + 0.5) + 1.0)
        for term, plist in postings.items()
    }
    sources = {
        p.id: p.source for m in manuals for p in m.procedures()
    }
    return Index(
        postings={t: tuple(pl) for t, pl in postings.items()},
        doc_lengths=doc_lengths,
        avg_doc_length=avg_doc_length,
        doc_count=doc_count,
        params=params,
        doc_tags={d.procedure_id: d.tags for d in docs},
        sources=sources,
        idf=idf,
    )


def score(
    index: Index,
    query_terms: Sequence[str],
    query_tags: Iterable[str],
    procedure_id: str,
) -> float:
    """BM25 total for one procedure plus tag_boost per matched condition tag."""
    if procedure_id not in index.doc_lengths:
        raise UnknownProcedureError(procedure_id)
    total = 0.0
    for term in query_terms:
        for pid, tf in index.postings.get(term, ()):
            if pid == procedure_id:
                total += index._term_weight(term, tf, procedure_id)
                break
    matched = len(frozenset(query_tags) & index.doc_tags[procedure_id])
    total += index.params.tag_boost * matched
    return total


def search(
    index: Index,
    query_terms: Sequence[str],
    query_tags: Iterable[str],
    k: int,
) -> list[RankedHit]:
    """Top-k hits by (score descending, procedure id ascending), zero scores
    excluded. Accumulation order matches score() exactly, so the brute-force
    score-every-document oracle agrees bit for bit.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    totals: dict[str, float] = {}
    for term in query_terms:
        for pid, tf in index.postings.get(term, ()):
            totals[pid] = totals.get(pid, 0.0) + index._term_weight(term, tf, pid)
    tags = frozenset(query_tags)
    if tags:
        boost = index.params.tag_boost
        for pid, doc_tags in index.doc_tags.items():
            matched = len(tags & doc_tags)
            if matched:
                totals[pid] = totals.get(pid, 0.0) + boost * matched
    ranked = sorted(
        ((pid, s) for pid, s in totals.items() if s > 0.0),
        key=lambda item: (-item[1], item[0]),
    )
    return [
        RankedHit(pid, s, index.sources[pid]) for pid, s in ranked[:k]
    ]
