"""Mapping summary sentences to the article sentences that fed them.

The mapper ranks every article sentence against each summary sentence by
TF-IDF cosine (default) or ROUGE-1 F1 and keeps the top-N indices.  TF-IDF
models are fit per article over that article's sentences, with raw term
frequency and smoothed idf, so scores are reproducible without any corpus
state.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from relpara.corpus import Article, Sentence
from relpara.metrics import rouge_n, tokenize

__all__ = [
    "MapperMode",
    "TfidfModel",
    "RelevanceMap",
    "fit_tfidf",
    "similarity",
    "map_summary",
    "select_nonrelevant",
]

MAPPER_KINDS = ("tfidf-cosine", "rouge1-f1")


@dataclass(frozen=True)
class MapperMode:
    kind: str = "tfidf-cosine"
    top_n: int = 1

    def __post_init__(self) -> None:
        if self.kind not in MAPPER_KINDS:
            raise ValueError(f"unknown mapper kind {self.kind!r}; expected one of {MAPPER_KINDS}")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")


@dataclass(frozen=True)
class TfidfModel:
    """Vocabulary plus smoothed idf weights: idf(t) = ln((1+N)/(1+df(t))) + 1."""

    vocabulary: dict[str, int]
    idf: np.ndarray
    doc_count: int

    def vector(self, tokens: Sequence[str]) -> np.ndarray:
        """L2-normalized tf-idf vector; out-of-vocabulary tokens weigh 0."""
        weights = np.zeros(len(self.vocabulary))
        for token in tokens:
            col = self.vocabulary.get(token)
            if col is not None:
                weights[col] += self.idf[col]
        norm = np.linalg.norm(weights)
        if norm > 0:
            weights /= norm
        return weights


@dataclass(frozen=True)
class RelevanceMap:
    """Per-summary-sentence ranked article indices and their deduplicated union."""

    article_id: str
    entries: tuple[tuple[int, tuple[int, ...]], ...]
    index_set: tuple[int, ...]

    def __post_init__(self) -> None:
        union = set()
        for _, ranked in self.entries:
            if len(set(ranked)) != len(ranked):
                raise ValueError("ranked indices must be distinct within an entry")
            union.update(ranked)
        if union != set(self.index_set):
            raise ValueError("index_set must equal the union of entry indices")

    def to_dict(self) -> dict:
        return {
            "article_id": self.article_id,
            "entries": [[sidx, list(ranked)] for sidx, ranked in self.entries],
            "index_set": list(self.index_set),
        }


def fit_tfidf(documents: Sequence[Sequence[str]]) -> TfidfModel:
    """Fit vocabulary and idf over tokenized documents (here: one article's sentences)."""
    if not documents:
        raise ValueError("cannot fit tf-idf on an empty corpus")
    doc_count = len(documents)
    df: dict[str, int] = {}
    for doc in documents:
        for token in set(doc):
            df[token] = df.get(token, 0) + 1
    vocabulary = {token: i for i, token in enumerate(sorted(df))}
    idf = np.empty(len(vocabulary))
    for token, col in vocabulary.items():
        idf[col] = math.log((1 + doc_count) / (1 + df[token])) + 1.0
    return TfidfModel(vocabulary, idf, doc_count)


def similarity(
    mode: MapperMode,
    a: "Sentence | str",
    b: "Sentence | str",
    model: Optional[TfidfModel] = None,
) -> float:
    """Similarity in [0, 1] between two sentences under the given mapper kind."""
    text_a = a.text if isinstance(a, Sentence) else a
    text_b = b.text if isinstance(b, Sentence) else b
    if mode.kind == "rouge1-f1":
        return rouge_n(tokenize(text_a), tokenize(text_b), 1).f1
    if model is None:
        model = fit_tfidf([tokenize(text_a), tokenize(text_b)])
    va = model.vector(tokenize(text_a))
    vb = model.vector(tokenize(text_b))
    return float(min(1.0, max(0.0, va @ vb)))


def map_summary(
    article: Article,
    summary: Sequence[Sentence],
    mode: MapperMode,
    model: Optional[TfidfModel] = None,
) -> RelevanceMap:
    """Rank article sentences for each summary sentence and keep the top-N.

    Ranking is by descending similarity with ties broken by the lower article
    index; the map is fully deterministic for fixed inputs.
    """
    if not summary:
        raise ValueError("summary must contain at least one sentence")
    article_tokens = [tokenize(s.text) for s in article.sentences]
    keep = min(mode.top_n, len(article.sentences))

    if mode.kind == "tfidf-cosine":
        if model is None:
            model = fit_tfidf(article_tokens)
        matrix = np.stack([model.vector(toks) for toks in article_tokens])

    entries = []
    union: set[int] = set()
    for sent in summary:
        if mode.kind == "tfidf-cosine":
            scores = matrix @ model.vector(tokenize(sent.text))
        else:
            summary_tokens = tokenize(sent.text)
            scores = [rouge_n(toks, summary_tokens, 1).f1 for toks in article_tokens]
        ranked = sorted(range(len(article.sentences)), key=lambda j: (-scores[j], j))[:keep]
        entries.append((sent.index, tuple(ranked)))
        union.update(ranked)
    return RelevanceMap(article.id, tuple(entries), tuple(sorted(union)))


def select_nonrelevant(
    article: Article,
    relmap: RelevanceMap,
    count: Optional[int] = None,
    seed: int = 0,
) -> list[int]:
    """Uniform seeded sample (without replacement) of indices outside the map.

    ``count`` defaults to the size of the relevance index set, mirroring how
    many sentences the relevant plan would have paraphrased.
    """
    excluded = set(relmap.index_set)
    complement = [i for i in range(len(article.sentences)) if i not in excluded]
    if count is None:
        count = len(relmap.index_set)
    if count < 0:
        raise ValueError("count must be >= 0")
    if count > len(complement):
        raise ValueError(
            f"cannot sample {count} non-relevant sentences; only "
            f"{len(complement)} article sentences lie outside the relevance set"
        )
    return random.Random(seed).sample(complement, count)
