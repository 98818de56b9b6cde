"""Evaluation metrics: exact ROUGE kernels, sidecar BertScore client, G-Eval.

ROUGE here uses no stemming and no stopword removal; tokenization is the
single shared rule (lowercase, split on non-alphanumeric) that the relevance
mapper also uses, so the two subsystems always agree on token identity.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import requests

from relpara import llm
from relpara.corpus import Article, GoldSummary

__all__ = [
    "RougeScore",
    "MetricOptions",
    "MetricReport",
    "ChangeReport",
    "SidecarError",
    "SidecarProtocolError",
    "tokenize",
    "rouge_n",
    "rouge_l",
    "bertscore",
    "sidecar_health",
    "geval",
    "performance_change",
    "evaluate_corpus",
    "change_report",
]

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters, dropping empties."""
    return _TOKEN_RE.findall(text.lower())


class SidecarError(RuntimeError):
    """BertScore sidecar unreachable or returned an error status."""


class SidecarProtocolError(SidecarError):
    """Sidecar response violated the wire contract."""


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


def _prf(overlap: float, n_candidate: int, n_reference: int) -> RougeScore:
    p = overlap / n_candidate if n_candidate else 0.0
    r = overlap / n_reference if n_reference else 0.0
    f1 = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
    return RougeScore(p, r, f1)


def _ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    """ROUGE-N over token lists with clipped n-gram multiset overlap."""
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    cand = Counter(_ngrams(candidate, n))
    ref = Counter(_ngrams(reference, n))
    overlap = sum(min(count, ref[gram]) for gram, count in cand.items())
    return _prf(overlap, sum(cand.values()), sum(ref.values()))


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """ROUGE-L: precision/recall of the longest common subsequence length."""
    m, n = len(candidate), len(reference)
    if m == 0 or n == 0:
        return _prf(0.0, m, n)
    # Single-row LCS DP keeps memory at O(min side).
    if m < n:
        short, long_ = candidate, reference
    else:
        short, long_ = reference, candidate
    row = [0] * (len(short) + 1)
    for tok in long_:
        prev_diag = 0
        for j, stok in enumerate(short, start=1):
            prev_row = row[j]
            if tok == stok:
                row[j] = prev_diag + 1
            elif row[j - 1] > row[j]:
                row[j] = row[j - 1]
            prev_diag = prev_row
    lcs = row[len(short)]
    return _prf(float(lcs), m, n)


def performance_change(old: float, new: float) -> float:
    """Relative change in percent between two metric values."""
    if old == 0:
        raise ValueError("performance change undefined for old value 0")
    return (new - old) / old * 100.0


def bertscore(
    pairs: Sequence[tuple[str, str]],
    endpoint: str,
    batch_size: int = 32,
    timeout: float = 60.0,
) -> list[tuple[float, float, float]]:
    """Score (candidate, reference) pairs via the sidecar wire contract.

    Pairs are POSTed to ``{endpoint}/v1/score`` in batches; the returned
    (p, r, f1) triples are in input order.  Raises :class:`SidecarError`
    when the service is unreachable and :class:`SidecarProtocolError` when
    the response shape does not match the request.
    """
    url = endpoint.rstrip("/") + "/v1/score"
    out: list[tuple[float, float, float]] = []
    for start in range(0, len(pairs), batch_size):
        batch = pairs[start : start + batch_size]
        body = {"pairs": [{"candidate": c, "reference": r} for c, r in batch]}
        try:
            resp = requests.post(url, json=body, timeout=timeout)
        except requests.RequestException as exc:
            raise SidecarError(f"sidecar unreachable at {url}: {exc}") from exc
        if resp.status_code != 200:
            raise SidecarError(f"sidecar returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            scores = resp.json()["scores"]
        except (ValueError, KeyError) as exc:
            raise SidecarProtocolError(f"malformed sidecar response: {exc}") from exc
        if len(scores) != len(batch):
            raise SidecarProtocolError(
                f"sidecar returned {len(scores)} scores for {len(batch)} pairs"
            )
        for entry in scores:
            if "error" in entry:
                raise SidecarError(f"sidecar rejected a pair: {entry['error']}")
            out.append((float(entry["p"]), float(entry["r"]), float(entry["f1"])))
    return out


def sidecar_health(endpoint: str, timeout: float = 10.0) -> dict:
    """GET {endpoint}/healthz; returns the parsed body (includes model id)."""
    url = endpoint.rstrip("/") + "/healthz"
    try:
        resp = requests.get(url, timeout=timeout)
    except requests.RequestException as exc:
        raise SidecarError(f"sidecar unreachable at {url}: {exc}") from exc
    if resp.status_code != 200:
        raise SidecarError(f"sidecar health check returned HTTP {resp.status_code}")
    return resp.json()


_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")


def geval(
    article: Article,
    summary: str,
    judge: "llm.Backend | llm.MockBackend",
    config: Optional["llm.GenerationConfig"] = None,
) -> float:
    """LLM-as-judge quality score in [1, 5].

    The judge is asked for five percent likelihoods for scores 5 down to 1.
    If the five numbers do not sum to 100 +/- 1 they are rescaled to sum
    100 before the weighted mean is taken.
    """
    config = config or llm.GenerationConfig(temperature=0.0, max_tokens=64)
    prompt = llm.render_geval_prompt(article.text, summary)
    completion = llm.complete(judge, prompt, config)
    numbers = [float(tok) for tok in _NUMBER_RE.findall(completion)]
    if len(numbers) != 5:
        raise ValueError(
            f"expected exactly 5 numbers in judge output, found {len(numbers)}: "
            f"{completion[:120]!r}"
        )
    total = sum(numbers)
    if total <= 0:
        raise ValueError("judge output percentages sum to zero")
    if abs(total - 100.0) > 1.0:
        numbers = [x * 100.0 / total for x in numbers]
    return sum(score * pct for score, pct in zip((5, 4, 3, 2, 1), numbers)) / 100.0


@dataclass(frozen=True)
class MetricOptions:
    """Which metrics to compute when evaluating a corpus."""

    rouge1: bool = True
    rouge2: bool = True
    rougeL: bool = True
    bertscore_endpoint: Optional[str] = None
    geval_judge: Optional[object] = None
    geval_config: Optional[object] = None
    bertscore_batch_size: int = 32


@dataclass(frozen=True)
class MetricReport:
    """Macro-averaged metric means over an evaluated corpus."""

    dataset: str
    backend: str
    n_pairs: int
    rouge1_f1: Optional[float] = None
    rouge2_f1: Optional[float] = None
    rougeL_f1: Optional[float] = None
    bertscore_f1: Optional[float] = None
    geval: Optional[float] = None

    METRIC_FIELDS = ("rouge1_f1", "rouge2_f1", "rougeL_f1", "bertscore_f1", "geval")

    def metric_means(self) -> dict[str, float]:
        """Enabled metrics only, in canonical order."""
        out = {}
        for name in self.METRIC_FIELDS:
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    def to_dict(self) -> dict:
        d = {"dataset": self.dataset, "backend": self.backend, "n_pairs": self.n_pairs}
        d.update(self.metric_means())
        return d


@dataclass(frozen=True)
class ChangeReport:
    """Relative change in percent per metric between two reports."""

    original: MetricReport
    perturbed: MetricReport
    changes: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "changes": dict(self.changes),
            "original": self.original.to_dict(),
            "perturbed": self.perturbed.to_dict(),
        }


def change_report(original: MetricReport, perturbed: MetricReport) -> ChangeReport:
    """Pair two reports and compute (new - old) / old * 100 per shared metric."""
    changes = {}
    old_means = original.metric_means()
    new_means = perturbed.metric_means()
    for name in MetricReport.METRIC_FIELDS:
        if name in old_means and name in new_means:
            changes[name] = performance_change(old_means[name], new_means[name])
    return ChangeReport(original, perturbed, changes)


def evaluate_corpus(
    gold: Sequence[GoldSummary],
    generated: Sequence[tuple[str, "llm.ParsedSummary"]],
    options: MetricOptions = MetricOptions(),
    dataset: str = "",
    backend: str = "",
    articles: Optional[Sequence[Article]] = None,
) -> MetricReport:
    """Macro-average the enabled metrics over id-aligned summary pairs.

    ``generated`` pairs each article id with its parsed model summary;
    candidates and references are the sentence lists joined with single
    spaces.  G-Eval additionally needs the source ``articles`` (same order).
    """
    if len(gold) != len(generated):
        raise ValueError(f"gold has {len(gold)} items, generated has {len(generated)}")
    for g, (gen_id, _) in zip(gold, generated):
        if g.article_id != gen_id:
            raise ValueError(f"id misalignment: gold {g.article_id!r} vs generated {gen_id!r}")
    if options.geval_judge is not None:
        if articles is None or len(articles) != len(gold):
            raise ValueError("geval requires source articles aligned with gold summaries")

    candidates = [" ".join(s.text for s in parsed.sentences) for _, parsed in generated]
    references = [g.text for g in gold]
    n = len(gold)

    sums: dict[str, float] = {}

    def _accumulate(name: str, value: float) -> None:
        sums[name] = sums.get(name, 0.0) + value

    for cand_text, ref_text in zip(candidates, references):
        cand = tokenize(cand_text)
        ref = tokenize(ref_text)
        if options.rouge1:
            _accumulate("rouge1_f1", rouge_n(cand, ref, 1).f1)
        if options.rouge2:
            _accumulate("rouge2_f1", rouge_n(cand, ref, 2).f1)
        if options.rougeL:
            _accumulate("rougeL_f1", rouge_l(cand, ref).f1)

    means: dict[str, Optional[float]] = {k: v / n for k, v in sums.items()}

    if options.bertscore_endpoint:
        scores = bertscore(
            list(zip(candidates, references)),
            options.bertscore_endpoint,
            batch_size=options.bertscore_batch_size,
        )
        means["bertscore_f1"] = sum(f1 for _, _, f1 in scores) / n

    if options.geval_judge is not None:
        total = 0.0
        for article, cand_text in zip(articles, candidates):
            total += geval(article, cand_text, options.geval_judge, options.geval_config)
        means["geval"] = total / n

    return MetricReport(
        dataset=dataset,
        backend=backend,
        n_pairs=n,
        rouge1_f1=means.get("rouge1_f1"),
        rouge2_f1=means.get("rouge2_f1"),
        rougeL_f1=means.get("rougeL_f1"),
        bertscore_f1=means.get("bertscore_f1"),
        geval=means.get("geval"),
    )
