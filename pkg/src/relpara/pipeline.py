"""End-to-end experiment runner: load, map, perturb, summarize, evaluate, report.

Every intermediate corpus is persisted into the run directory so individual
stages can be resumed, and a manifest records the config hash, seed, and
backend ids.  With deterministic mock backends the emitted report.json is
byte-identical across runs and in-flight limits.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from relpara.analysis import (
    PositionHistogram,
    ReportBundle,
    emit_report,
    histogram_divergence,
    position_distribution,
)
from relpara.corpus import Dataset, GoldSummary, load_dataset
from relpara.llm import (
    Backend,
    ExtractiveSummarizer,
    GenerationConfig,
    MockBackend,
    ParsedSummary,
    PromptTemplate,
    ReversalParaphraser,
    StaticBackend,
    bounded_map,
    complete,
    derive_seed,
    make_plain_template,
    make_numbered_template,
    parse_summary,
    render_summary_prompt,
)
from relpara.metrics import MetricOptions, change_report, evaluate_corpus
from relpara.perturb import (
    AbortThresholdExceeded,
    PerturbationPlan,
    PerturbedArticle,
    build_perturbed_corpus,
    filter_excluded,
)
from relpara.relevance import MapperMode, map_summary

__all__ = [
    "RunConfig",
    "PipelineError",
    "run_experiment",
    "mock_summarizer",
    "mock_paraphraser",
    "mock_judge",
]


class PipelineError(RuntimeError):
    """A stage failed; partial outputs stay in the run directory."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


@contextmanager
def _stage(name: str):
    try:
        yield
    except (AbortThresholdExceeded, PipelineError):
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


def mock_summarizer() -> ExtractiveSummarizer:
    return ExtractiveSummarizer()


def mock_paraphraser() -> ReversalParaphraser:
    return ReversalParaphraser()


def mock_judge() -> StaticBackend:
    return StaticBackend("80, 10, 5, 3, 2", name="mock-judge")


@dataclass
class RunConfig:
    """Everything one experiment run depends on."""

    dataset_path: str
    out_dir: str
    dataset_name: Optional[str] = None
    target_summary_len: Optional[int] = None
    summarizer: "Backend | MockBackend" = field(default_factory=mock_summarizer)
    paraphraser: "Backend | MockBackend" = field(default_factory=mock_paraphraser)
    judge: "Backend | MockBackend | None" = None
    summarizer_config: GenerationConfig = field(default_factory=GenerationConfig)
    paraphraser_config: GenerationConfig = field(default_factory=GenerationConfig)
    judge_config: GenerationConfig = field(
        default_factory=lambda: GenerationConfig(temperature=0.0, max_tokens=64)
    )
    plan: PerturbationPlan = field(default_factory=PerturbationPlan)
    mapper: MapperMode = field(default_factory=MapperMode)
    rouge1: bool = True
    rouge2: bool = True
    rougeL: bool = True
    bertscore_endpoint: Optional[str] = None
    geval: bool = False
    seed: int = 0
    max_in_flight: int = 4
    limit: Optional[int] = None
    template_style: str = "numbered"
    bins: int = 10

    def metric_options(self) -> MetricOptions:
        return MetricOptions(
            rouge1=self.rouge1,
            rouge2=self.rouge2,
            rougeL=self.rougeL,
            bertscore_endpoint=self.bertscore_endpoint or None,
            geval_judge=self.judge if self.geval else None,
            geval_config=self.judge_config if self.geval else None,
        )

    def to_config_dict(self) -> dict:
        """JSON-friendly view of every field; feeds the manifest config hash."""

        def describe_backend(backend) -> Optional[dict]:
            if backend is None:
                return None
            if isinstance(backend, MockBackend):
                return {"mock": backend.name}
            return dataclasses.asdict(backend)

        return {
            "dataset_path": self.dataset_path,
            "out_dir": self.out_dir,
            "dataset_name": self.dataset_name,
            "target_summary_len": self.target_summary_len,
            "summarizer": describe_backend(self.summarizer),
            "paraphraser": describe_backend(self.paraphraser),
            "judge": describe_backend(self.judge),
            "summarizer_config": dataclasses.asdict(self.summarizer_config),
            "paraphraser_config": dataclasses.asdict(self.paraphraser_config),
            "judge_config": dataclasses.asdict(self.judge_config),
            "plan": dataclasses.asdict(self.plan),
            "mapper": dataclasses.asdict(self.mapper),
            "rouge1": self.rouge1,
            "rouge2": self.rouge2,
            "rougeL": self.rougeL,
            "bertscore_endpoint": self.bertscore_endpoint,
            "geval": self.geval,
            "seed": self.seed,
            "max_in_flight": self.max_in_flight,
            "limit": self.limit,
            "template_style": self.template_style,
            "bins": self.bins,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_config_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def summary_template(style: str, n: int) -> PromptTemplate:
    if style == "numbered":
        return make_numbered_template(n)
    if style == "plain":
        return make_plain_template(n)
    raise ValueError(f"unknown template style {style!r}")


def _write_jsonl(path: Path, rows: Sequence[dict]) -> None:
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def persist_perturbed(path: Path, pairs: Sequence[tuple[PerturbedArticle, GoldSummary]]) -> None:
    rows = [
        {
            "id": perturbed.article_id,
            "article": perturbed.text,
            "summary": gold.text,
            "substitutions": [list(sub) for sub in perturbed.substitutions],
        }
        for perturbed, gold in pairs
    ]
    _write_jsonl(path, rows)


def persist_summaries(path: Path, summaries: Sequence[tuple[str, ParsedSummary]]) -> None:
    rows = [
        {
            "id": summary_id,
            "sentences": [s.text for s in parsed.sentences],
            "raw": parsed.raw,
            "truncated": parsed.truncated,
        }
        for summary_id, parsed in summaries
    ]
    _write_jsonl(path, rows)


def summarize_corpus(
    articles: Sequence,
    backend: "Backend | MockBackend",
    config: GenerationConfig,
    template: PromptTemplate,
    seed: int,
    call_kind: str,
    max_in_flight: int = 4,
) -> list[tuple[str, ParsedSummary]]:
    """Prompt, complete, and parse one summary per article (id-ordered)."""
    if template.n_sentences is None:
        raise ValueError("summarization template needs n_sentences")

    def work(article) -> ParsedSummary:
        prompt = render_summary_prompt(article, template)
        text = complete(backend, prompt, config)
        return parse_summary(text, template.n_sentences, derive_seed(seed, article.id, call_kind))

    keyed = [(a.id, a) for a in articles]
    return bounded_map(work, keyed, max_in_flight=max_in_flight)


def run_experiment(config: RunConfig) -> ReportBundle:
    """Execute the full perturb-and-compare pipeline described by ``config``."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started_at = datetime.now(timezone.utc).isoformat()

    with _stage("load"):
        dataset = load_dataset(
            config.dataset_path,
            name=config.dataset_name,
            target_override=config.target_summary_len,
        ).limit(config.limit)
        (out_dir / "profile.json").write_text(
            json.dumps(dataset.profile.to_dict(), indent=2) + "\n", encoding="utf-8"
        )

    with _stage("map"):
        audit_mode = MapperMode(config.mapper.kind, config.plan.top_n_paraphrase)
        relmaps = [
            map_summary(article, gold.sentences, audit_mode).to_dict()
            for article, gold in dataset.pairs
        ]
        _write_jsonl(out_dir / "relmaps.jsonl", relmaps)

    with _stage("perturb"):
        perturbed_pairs, exclusions = build_perturbed_corpus(
            dataset,
            config.plan,
            config.mapper,
            config.paraphraser,
            config.paraphraser_config,
            max_in_flight=config.max_in_flight,
        )
        persist_perturbed(out_dir / "perturbed.jsonl", perturbed_pairs)
        (out_dir / "exclusions.json").write_text(
            json.dumps(exclusions.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    original_pairs = filter_excluded(dataset, exclusions)
    template = summary_template(config.template_style, dataset.profile.target_summary_len)

    with _stage("summarize-original"):
        original_summaries = summarize_corpus(
            [a for a, _ in original_pairs],
            config.summarizer,
            config.summarizer_config,
            template,
            config.seed,
            "summarize-original",
            config.max_in_flight,
        )
        persist_summaries(out_dir / "summaries_original.jsonl", original_summaries)

    with _stage("summarize-perturbed"):
        if config.plan.mode == "none-repeat":
            perturbed_articles: list = [a for a, _ in original_pairs]
        else:
            perturbed_articles = [p for p, _ in perturbed_pairs]
        perturbed_summaries = summarize_corpus(
            perturbed_articles,
            config.summarizer,
            config.summarizer_config,
            template,
            config.seed,
            "summarize-perturbed",
            config.max_in_flight,
        )
        persist_summaries(out_dir / "summaries_perturbed.jsonl", perturbed_summaries)

    with _stage("evaluate"):
        options = config.metric_options()
        golds_original = [g for _, g in original_pairs]
        golds_perturbed = [g for _, g in perturbed_pairs]
        original_report = evaluate_corpus(
            golds_original,
            original_summaries,
            options,
            dataset=dataset.name,
            backend=getattr(config.summarizer, "name", "unknown"),
            articles=[a for a, _ in original_pairs],
        )
        perturbed_report = evaluate_corpus(
            golds_perturbed,
            perturbed_summaries,
            options,
            dataset=dataset.name,
            backend=getattr(config.summarizer, "name", "unknown"),
            articles=perturbed_articles,
        )
        change = change_report(original_report, perturbed_report)

    with _stage("analyze"):
        hist_original = position_distribution(
            [a for a, _ in original_pairs], original_summaries, config.mapper, config.bins
        )
        hist_perturbed = position_distribution(
            perturbed_articles, perturbed_summaries, config.mapper, config.bins
        )

    bundle = ReportBundle(
        original=original_report,
        perturbed=perturbed_report,
        change=change,
        histograms=(hist_original, hist_perturbed),
        exclusions=exclusions,
    )

    with _stage("report"):
        emit_report(bundle, out_dir)
        finished_at = datetime.now(timezone.utc).isoformat()
        manifest = {
            "config_hash": config.config_hash(),
            "config": config.to_config_dict(),
            "seed": config.seed,
            "backends": {
                "summarizer": getattr(config.summarizer, "model_id", "mock"),
                "paraphraser": getattr(config.paraphraser, "model_id", "mock"),
                "judge": getattr(config.judge, "model_id", None) if config.judge else None,
            },
            "started_at": started_at,
            "finished_at": finished_at,
            "n_pairs_loaded": len(dataset.pairs),
            "n_pairs_evaluated": len(original_pairs),
            "refusal_rate": exclusions.refusal_rate,
            "histogram_divergence": histogram_divergence(hist_original, hist_perturbed),
        }
        (out_dir / "run_manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    return bundle
