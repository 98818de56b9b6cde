"""Build minimally perturbed corpora by paraphrasing mapped sentences.

For each article/gold-summary pair the mapper selects the contributing
article sentences, the paraphraser rewrites exactly those, and the rewritten
sentences are substituted in place.  Ablation plans swap the selection rule
(random non-relevant sentences) or skip paraphrasing entirely (identity and
repeat-prompting baselines).  Any refusal excludes the whole article from
both corpora.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from relpara.corpus import Article, Dataset, GoldSummary, Sentence, normalize_text
from relpara.llm import (
    Backend,
    GenerationConfig,
    LlmError,
    MockBackend,
    bounded_map,
    complete,
    derive_seed,
    detect_refusal,
    render_paraphrase_prompt,
)
from relpara.relevance import MapperMode, map_summary, select_nonrelevant

__all__ = [
    "PLAN_MODES",
    "PerturbationPlan",
    "PerturbedArticle",
    "ExclusionLog",
    "AbortThresholdExceeded",
    "apply_replacements",
    "build_perturbed_corpus",
    "filter_excluded",
    "paraphrase_fidelity",
    "rouge1_scorer",
    "sidecar_scorer",
]

PLAN_MODES = ("relevant", "nonrelevant-random", "identity", "none-repeat")

# Above this exclusion fraction the metric comparison is no longer meaningful.
ABORT_EXCLUSION_FRACTION = 0.5


@dataclass(frozen=True)
class PerturbationPlan:
    mode: str = "relevant"
    top_n_paraphrase: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in PLAN_MODES:
            raise ValueError(f"unknown plan mode {self.mode!r}; expected one of {PLAN_MODES}")
        if self.top_n_paraphrase < 1:
            raise ValueError("top_n_paraphrase must be >= 1")


@dataclass(frozen=True)
class PerturbedArticle:
    """An article with some sentences replaced, plus substitution provenance."""

    article_id: str
    sentences: tuple[Sentence, ...]
    substitutions: tuple[tuple[int, str, str], ...]

    @property
    def id(self) -> str:
        return self.article_id

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)


@dataclass
class ExclusionLog:
    excluded_ids: list[str] = field(default_factory=list)
    reasons: dict[str, str] = field(default_factory=dict)
    refusal_rate: float = 0.0

    def to_dict(self) -> dict:
        return {
            "excluded_ids": list(self.excluded_ids),
            "reasons": dict(self.reasons),
            "refusal_rate": self.refusal_rate,
        }


class AbortThresholdExceeded(RuntimeError):
    """More than half the corpus was excluded; comparisons would be invalid."""

    def __init__(self, excluded: int, total: int, log: ExclusionLog):
        super().__init__(
            f"{excluded} of {total} articles excluded; aborting above the "
            f"{ABORT_EXCLUSION_FRACTION:.0%} threshold"
        )
        self.log = log


def apply_replacements(article: Article, replacements: Mapping[int, str]) -> PerturbedArticle:
    """Substitute paraphrased text at the given sentence indices."""
    for index in replacements:
        if not 0 <= index < len(article.sentences):
            raise ValueError(
                f"replacement index {index} out of range for article "
                f"{article.id!r} with {len(article.sentences)} sentences"
            )
    sentences = []
    substitutions = []
    for sent in article.sentences:
        if sent.index in replacements:
            new_text = normalize_text(replacements[sent.index])
            sentences.append(Sentence(sent.index, new_text))
            substitutions.append((sent.index, sent.text, new_text))
        else:
            sentences.append(sent)
    return PerturbedArticle(article.id, tuple(sentences), tuple(substitutions))


@dataclass
class _ArticleOutcome:
    perturbed: Optional[PerturbedArticle]
    reason: Optional[str]
    attempted: int
    refused: int


def _perturb_one(
    article: Article,
    gold: GoldSummary,
    plan: PerturbationPlan,
    mapper: MapperMode,
    paraphraser: "Backend | MockBackend",
    config: GenerationConfig,
) -> _ArticleOutcome:
    if plan.mode in ("identity", "none-repeat"):
        untouched = PerturbedArticle(article.id, article.sentences, ())
        return _ArticleOutcome(untouched, None, 0, 0)

    effective = MapperMode(mapper.kind, plan.top_n_paraphrase)
    relmap = map_summary(article, gold.sentences, effective)
    if plan.mode == "relevant":
        targets = sorted(relmap.index_set)
    else:
        picked = select_nonrelevant(
            article,
            relmap,
            count=len(relmap.index_set),
            seed=derive_seed(plan.seed, article.id, "nonrelevant"),
        )
        targets = sorted(picked)

    replacements: dict[int, str] = {}
    attempted = 0
    for index in targets:
        prompt = render_paraphrase_prompt(article.sentences[index])
        attempted += 1
        try:
            text = complete(paraphraser, prompt, config)
        except LlmError:
            return _ArticleOutcome(None, "transport", attempted, 0)
        if detect_refusal(text):
            return _ArticleOutcome(None, "refusal", attempted, 1)
        replacements[index] = text
    return _ArticleOutcome(apply_replacements(article, replacements), None, attempted, 0)


def build_perturbed_corpus(
    dataset: Dataset,
    plan: PerturbationPlan,
    mapper: MapperMode,
    paraphraser: "Backend | MockBackend",
    config: GenerationConfig,
    max_in_flight: int = 4,
) -> tuple[list[tuple[PerturbedArticle, GoldSummary]], ExclusionLog]:
    """Run the perturbation plan over a whole dataset.

    Returns the surviving perturbed pairs (ascending article-id order) and an
    exclusion log covering refusals and transport failures.  Raises
    :class:`AbortThresholdExceeded` when more than half the articles drop out.
    """
    if not dataset.pairs:
        raise ValueError("dataset has no pairs")
    golds = {article.id: gold for article, gold in dataset.pairs}

    def work(pair: tuple[Article, GoldSummary]) -> _ArticleOutcome:
        article, gold = pair
        return _perturb_one(article, gold, plan, mapper, paraphraser, config)

    keyed = [(article.id, (article, gold)) for article, gold in dataset.pairs]
    outcomes = bounded_map(work, keyed, max_in_flight=max_in_flight)

    log = ExclusionLog()
    perturbed_pairs = []
    attempted_total = 0
    refused_total = 0
    for article_id, outcome in outcomes:
        attempted_total += outcome.attempted
        refused_total += outcome.refused
        if outcome.perturbed is None:
            log.excluded_ids.append(article_id)
            log.reasons[article_id] = outcome.reason or "unknown"
        else:
            perturbed_pairs.append((outcome.perturbed, golds[article_id]))
    log.refusal_rate = refused_total / attempted_total if attempted_total else 0.0

    if len(log.excluded_ids) > ABORT_EXCLUSION_FRACTION * len(dataset.pairs):
        raise AbortThresholdExceeded(len(log.excluded_ids), len(dataset.pairs), log)
    return perturbed_pairs, log


def filter_excluded(
    dataset: Dataset, log: ExclusionLog
) -> list[tuple[Article, GoldSummary]]:
    """Original pairs minus the excluded ids, in ascending article-id order."""
    excluded = set(log.excluded_ids)
    kept = [(a, g) for a, g in dataset.pairs if a.id not in excluded]
    return sorted(kept, key=lambda pair: pair[0].id)


def paraphrase_fidelity(
    substitutions: Sequence[tuple[str, str]],
    scorer: Callable[[str, str], float],
) -> float:
    """Mean scorer value over (original, paraphrase) pairs."""
    if not substitutions:
        raise ValueError("no substitutions to score")
    return sum(scorer(orig, para) for orig, para in substitutions) / len(substitutions)


def rouge1_scorer(original: str, paraphrase: str) -> float:
    """ROUGE-1 F1 fidelity scorer (cheap stand-in for the BertScore sidecar)."""
    from relpara.metrics import rouge_n, tokenize

    return rouge_n(tokenize(paraphrase), tokenize(original), 1).f1


def sidecar_scorer(endpoint: str) -> Callable[[str, str], float]:
    """Fidelity scorer backed by the BertScore sidecar wire contract."""
    from relpara.metrics import bertscore

    def scorer(original: str, paraphrase: str) -> float:
        return bertscore([(paraphrase, original)], endpoint)[0][2]

    return scorer
