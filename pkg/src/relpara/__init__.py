"""relpara: measure how robust zero-shot LLM summarizers are to relevance paraphrasing.

The harness maps gold-summary sentences back to the article sentences that
contributed most to them, paraphrases exactly those sentences, re-summarizes,
and quantifies the metric deltas between the original and perturbed corpora.
"""

from relpara.corpus import (
    Article,
    Dataset,
    DatasetProfile,
    GoldSummary,
    Sentence,
    dataset_profile,
    load_dataset,
    segment_sentences,
)
from relpara.relevance import (
    MapperMode,
    RelevanceMap,
    TfidfModel,
    fit_tfidf,
    map_summary,
    select_nonrelevant,
    similarity,
)

__version__ = "0.1.0"

__all__ = [
    "Article",
    "Dataset",
    "DatasetProfile",
    "GoldSummary",
    "MapperMode",
    "RelevanceMap",
    "Sentence",
    "TfidfModel",
    "dataset_profile",
    "fit_tfidf",
    "load_dataset",
    "map_summary",
    "segment_sentences",
    "select_nonrelevant",
    "similarity",
]
