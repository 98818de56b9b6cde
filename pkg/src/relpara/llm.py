"""Prompt construction, chat-completion transport, and deterministic mocks.

All backends speak the OpenAI-style chat-completions wire protocol, so one
client serves GPT-class models, Llama-class inference servers, and the
in-process mocks used by golden tests.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, TypeVar

import requests

from relpara.corpus import Sentence, normalize_text, segment_sentences

__all__ = [
    "Backend",
    "GenerationConfig",
    "PromptTemplate",
    "ParsedSummary",
    "LlmError",
    "TransportError",
    "ProtocolError",
    "ParseError",
    "TransportStats",
    "MockBackend",
    "ScriptedBackend",
    "StaticBackend",
    "ExtractiveSummarizer",
    "ReversalParaphraser",
    "PARAPHRASE_TEMPLATE",
    "GEVAL_TEMPLATE",
    "make_numbered_template",
    "make_plain_template",
    "render_paraphrase_prompt",
    "render_summary_prompt",
    "render_geval_prompt",
    "complete",
    "detect_refusal",
    "parse_summary",
    "derive_seed",
    "bounded_map",
]

API_KEY_ENV_DEFAULT = "RELPARA_API_KEY"
BASE_URL_OVERRIDE_ENV = "RELPARA_BASE_URL"


class LlmError(RuntimeError):
    pass


class TransportError(LlmError):
    """Retries exhausted or the request could not be issued."""


class ProtocolError(LlmError):
    """Response body did not match the chat-completions schema."""


class ParseError(LlmError):
    """Completion contained no extractable summary sentences."""


@dataclass(frozen=True)
class Backend:
    """An OpenAI-compatible chat-completions endpoint."""

    name: str
    base_url: str
    model_id: str
    api_key_env: str = API_KEY_ENV_DEFAULT
    max_retries: int = 3
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if "://" not in self.base_url:
            raise ValueError(f"base_url must be absolute, got {self.base_url!r}")


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float = 1.0
    max_tokens: int = 512
    seed_hint: Optional[int] = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    n_sentences: Optional[int] = None


@dataclass(frozen=True)
class ParsedSummary:
    """Sentences recovered from a summarization completion."""

    sentences: tuple[Sentence, ...]
    raw: str
    truncated: bool

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

PARAPHRASE_TEMPLATE = PromptTemplate(
    template_id="paraphrase",
    body=(
        "You are a helpful assistant that is an expert in paraphrasing sentences. "
        "Paraphrase the sentence I will provide. Please respond with just the "
        "paraphrased version of the sentence. Here is the sentence: {Sentence}"
    ),
)

GEVAL_TEMPLATE = PromptTemplate(
    template_id="geval",
    body=(
        "You will be given one summary written for an article. Your task is to "
        "rate the summary based on the following criteria: "
        "Output format: PERCENTAGE, PERCENTAGE, PERCENTAGE, PERCENTAGE, PERCENTAGE\n"
        "\n"
        "Evaluation Criteria:\n"
        "1. Read the news article carefully and identify the main topic and key points.\n"
        "2. Read the summary and compare it to the news article. Check if the summary "
        "covers the main topic and key points of the news article, and if it resents "
        "them in a clear and logical order.\n"
        "3. Rate the summary with 5 percentages, where each one represents how likely "
        "the summary is going to get a score from 1 to 5. For example, if you think the "
        "summary is 80% likely to get a score of 5, 10% likely to get a score of 4, 5% "
        "likely to get a score of 3, 3% likely to get a score of 2, and 1% likely to "
        "get a score of 1, you should rate the summary as 80, 10, 5, 3, 2.\n"
        "\n"
        "Here is the article: {Article}\n"
        "\n"
        "Here is the summary: {Summary}"
    ),
)

_ORDINALS = (
    "First", "Second", "Third", "Fourth", "Fifth",
    "Sixth", "Seventh", "Eighth", "Ninth", "Tenth",
)


def _exemplar_lines(n: int) -> str:
    lines = []
    for i in range(n):
        word = _ORDINALS[i] if i < len(_ORDINALS) else f"Next ({i + 1}th)"
        lines.append(f"{i + 1}. {word} sentence")
    return "\n".join(lines)


def make_numbered_template(n: int, template_id: Optional[str] = None) -> PromptTemplate:
    """Summary prompt asking for ``n`` sentences in a numbered list."""
    if n < 1:
        raise ValueError("n must be >= 1")
    noun = "sentence" if n == 1 else "sentences"
    body = (
        f"For the following article: {{Article}}. Return a summary comprising of "
        f"{n} {noun}. With each sentence in a numbered list format.\n"
        f"For example:\n{_exemplar_lines(n)}"
    )
    return PromptTemplate(template_id or f"numbered-{n}", body, n_sentences=n)


def make_plain_template(n: int, template_id: Optional[str] = None) -> PromptTemplate:
    """Bare instruction variant used for models that ignore list formatting."""
    if n < 1:
        raise ValueError("n must be >= 1")
    body = f"Generate a {n} sentence summary for the given article. Article: {{Article}}."
    return PromptTemplate(template_id or f"plain-{n}", body, n_sentences=n)


def render_paraphrase_prompt(sentence: "Sentence | str") -> str:
    """Substitute the sentence into the paraphrase prompt (single pass)."""
    text = sentence.text if isinstance(sentence, Sentence) else str(sentence)
    if not text.strip():
        raise ValueError("cannot render a paraphrase prompt for an empty sentence")
    return PARAPHRASE_TEMPLATE.body.replace("{Sentence}", text.strip(), 1)


def render_summary_prompt(article, template: PromptTemplate) -> str:
    """Substitute the space-joined article into a summarization template."""
    if "{Article}" not in template.body:
        raise ValueError(f"template {template.template_id!r} lacks an {{Article}} placeholder")
    text = " ".join(s.text for s in article.sentences)
    return template.body.replace("{Article}", text, 1)


def render_geval_prompt(article_text: str, summary_text: str) -> str:
    body = GEVAL_TEMPLATE.body.replace("{Article}", article_text, 1)
    return body.replace("{Summary}", summary_text, 1)


# ---------------------------------------------------------------------------
# Deterministic mock backends
# ---------------------------------------------------------------------------


class MockBackend:
    """In-process backend; ``complete`` dispatches here instead of HTTP."""

    name = "mock"
    model_id = "mock"
    max_retries = 0

    def respond(self, prompt: str) -> str:
        raise NotImplementedError


class ScriptedBackend(MockBackend):
    """Replays a fixed list of responses in order (thread-safe)."""

    def __init__(self, responses: Sequence[str], name: str = "scripted"):
        self.name = name
        self._responses = list(responses)
        self._cursor = 0
        self._lock = threading.Lock()

    def respond(self, prompt: str) -> str:
        with self._lock:
            if self._cursor >= len(self._responses):
                raise TransportError(f"scripted backend {self.name!r} exhausted")
            text = self._responses[self._cursor]
            self._cursor += 1
            return text


class StaticBackend(MockBackend):
    """Always returns the same completion; handy as a mock judge."""

    def __init__(self, text: str, name: str = "static"):
        self.name = name
        self._text = text

    def respond(self, prompt: str) -> str:
        return self._text


class ExtractiveSummarizer(MockBackend):
    """Returns the first n article sentences as a numbered list.

    Recovers the article text and requested sentence count from the numbered
    summary prompt, so downstream behavior is a pure function of the prompt.
    """

    name = "mock-extractive"

    _ARTICLE_PREFIX = "For the following article: "
    _COUNT_MARKER = ". Return a summary comprising of "

    def respond(self, prompt: str) -> str:
        start = prompt.find(self._ARTICLE_PREFIX)
        marker = prompt.rfind(self._COUNT_MARKER)
        if start < 0 or marker < 0:
            raise ValueError("extractive mock requires the numbered summary prompt")
        article_text = prompt[start + len(self._ARTICLE_PREFIX) : marker]
        n = int(prompt[marker + len(self._COUNT_MARKER) :].split()[0])
        sentences = segment_sentences(article_text)[:n]
        return "\n".join(f"{i + 1}. {s.text}" for i, s in enumerate(sentences))


class ReversalParaphraser(MockBackend):
    """Reverses word order, keeping any terminal punctuation in place."""

    name = "mock-reversal"

    _SENTENCE_MARKER = "Here is the sentence: "

    def respond(self, prompt: str) -> str:
        start = prompt.find(self._SENTENCE_MARKER)
        if start < 0:
            raise ValueError("reversal mock requires the paraphrase prompt")
        sentence = prompt[start + len(self._SENTENCE_MARKER) :].strip()
        body = sentence.rstrip(".!?")
        tail = sentence[len(body) :]
        return " ".join(reversed(body.split())) + tail


# ---------------------------------------------------------------------------
# Transport
# ---------------------------------------------------------------------------


@dataclass
class TransportStats:
    calls: int = 0
    retries: int = 0


Transport = Callable[[str, dict, dict, float], tuple[int, str]]


def _requests_transport(url: str, payload: dict, headers: dict, timeout: float) -> tuple[int, str]:
    resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    return resp.status_code, resp.text


def complete(
    backend: "Backend | MockBackend",
    prompt: str,
    config: GenerationConfig,
    transport: Optional[Transport] = None,
    stats: Optional[TransportStats] = None,
    sleeper: Callable[[float], None] = time.sleep,
) -> str:
    """Return the assistant message for ``prompt``.

    Transport failures and HTTP 429/5xx are retried with exponential backoff
    (base 1s, factor 2, plus jitter) up to ``backend.max_retries`` times;
    other statuses and malformed bodies fail immediately.
    """
    if stats is not None:
        stats.calls += 1
    if isinstance(backend, MockBackend):
        return backend.respond(prompt)

    api_key = os.environ.get(backend.api_key_env, "")
    if not api_key:
        raise TransportError(
            f"backend {backend.name!r} needs an API key in ${backend.api_key_env}"
        )
    base_url = os.environ.get(BASE_URL_OVERRIDE_ENV) or backend.base_url
    url = base_url.rstrip("/") + "/v1/chat/completions"
    payload = {
        "model": backend.model_id,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }
    headers = {"Authorization": f"Bearer {api_key}"}
    send = transport or _requests_transport
    rng = random.Random()

    last_failure = "no attempt made"
    for attempt in range(backend.max_retries + 1):
        try:
            status, body = send(url, payload, headers, backend.timeout)
        except requests.RequestException as exc:
            status, body = None, ""
            last_failure = f"transport error: {exc}"
        else:
            if status == 200:
                try:
                    data = json.loads(body)
                    return data["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise ProtocolError(f"malformed completion body: {exc}") from exc
            last_failure = f"HTTP {status}"
            if not (status == 429 or status >= 500):
                raise TransportError(f"backend {backend.name!r} failed: {last_failure}")
        if attempt == backend.max_retries:
            break
        if stats is not None:
            stats.retries += 1
        delay = (2.0**attempt) * (1.0 + 0.25 * rng.random())
        sleeper(delay)
    raise TransportError(
        f"backend {backend.name!r} failed after {backend.max_retries} retries; "
        f"last: {last_failure}"
    )


# ---------------------------------------------------------------------------
# Output handling
# ---------------------------------------------------------------------------

_REFUSAL_MARKERS = ("i cannot", "i can't", "i am not able", "i'm not able", "as an ai")
_REFUSAL_WINDOW = 120

_LIST_ITEM_RE = re.compile(r"^\s*(?:\d+\.|-)\s+(\S.*?)\s*$")


def detect_refusal(completion: str) -> bool:
    """True when the completion is empty or opens with a refusal marker."""
    if not completion.strip():
        return True
    head = completion[:_REFUSAL_WINDOW].lower()
    return any(marker in head for marker in _REFUSAL_MARKERS)


def parse_summary(completion: str, n_required: int, seed: int) -> ParsedSummary:
    """Extract summary sentences from a completion.

    Numbered or dash-bulleted lines are the primary extraction rule; when a
    model ignored the list format entirely, the whole completion is segmented
    instead.  Overlong outputs are down-sampled uniformly (seeded) to
    ``n_required`` sentences with their original order restored.
    """
    if n_required < 1:
        raise ValueError("n_required must be >= 1")
    texts: list[str] = []
    for line in completion.splitlines():
        match = _LIST_ITEM_RE.match(line)
        if match:
            texts.append(normalize_text(match.group(1)))
    if not texts:
        texts = [s.text for s in segment_sentences(completion)]
    if not texts:
        raise ParseError("completion contained no extractable sentences")
    truncated = False
    if len(texts) > n_required:
        rng = random.Random(seed)
        keep = sorted(rng.sample(range(len(texts)), n_required))
        texts = [texts[i] for i in keep]
        truncated = True
    sentences = tuple(Sentence(i, t) for i, t in enumerate(texts))
    return ParsedSummary(sentences=sentences, raw=completion, truncated=truncated)


# ---------------------------------------------------------------------------
# Determinism helpers
# ---------------------------------------------------------------------------


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from the given parts (platform-independent)."""
    digest = hashlib.blake2b(":".join(str(p) for p in parts).encode("utf-8"), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


K = TypeVar("K")
V = TypeVar("V")
R = TypeVar("R")


def bounded_map(
    fn: Callable[[V], R],
    items: Iterable[tuple[K, V]],
    max_in_flight: int = 4,
) -> list[tuple[K, R]]:
    """Apply ``fn`` with at most ``max_in_flight`` concurrent calls.

    Results are committed in ascending key order so the in-flight bound can
    never change what a run emits.
    """
    items = list(items)
    if max_in_flight <= 1 or len(items) <= 1:
        results = [(key, fn(value)) for key, value in items]
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            futures = {pool.submit(fn, value): key for key, value in items}
            results = [(futures[fut], fut.result()) for fut in as_completed(futures)]
    return sorted(results, key=lambda kv: kv[0])
