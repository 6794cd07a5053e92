"""Uniform adapter over external sentiment-analysis backends.

Two wire dialects are supported, plus a deterministic offline mock:

* ``twinword-style`` -- a flat JSON object ``{"type", "score", "ratio",
  "keywords": [{"word", "score"}, ...]}``.  The raw score lives on a
  ``[-1, 1]`` scale and is used as the normalized score directly.  Polarity
  is *negative* iff ``raw < -0.05`` and *positive* iff ``raw > 0.05``;
  scores in the closed band between the two thresholds are *neutral*.
* ``azure-style`` -- a document-batch response whose sentiment section
  contains ``{"documents": [..., {"score": s}, ...]}``.  The raw score
  lives on a ``[0, 1]`` scale (0 = fully negative, 1 = fully positive) and
  normalizes as ``2*raw - 1``.  Polarity is *negative* below the cut
  (default ``0.5``, the scale midpoint), *positive* above it, and
  *neutral* exactly at the cut.  The cut is configurable because the
  upstream service never documents one.
* ``mock`` -- no network at all.  Known example sentences return canned
  response bodies; any other text is scored from a small keyword-valence
  table.  The synthesized twinword-style bodies follow the same arithmetic
  the canned examples exhibit: the overall score is the mean of the
  keyword scores and the ratio is ``sum(scores) / sum(abs(scores))``.

Results are cached per ``(backend name, text hash)`` so a repeated
analysis never touches the network, and outbound calls go through a
token-bucket rate limiter (default 5 requests/second) because the real
services throttle aggressively.

``evaluate_sentiment`` compares a backend's *negative* polarity against
manual ``is_abusive`` labels and returns a ``ConfusionMatrix``; neutral
results are excluded from the tally but reported in ``excluded``.
"""

from __future__ import annotations

import hashlib
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import requests

from .metrics import ConfusionMatrix, confusion_from_flags

__all__ = [
    "AuthError",
    "BackendConfig",
    "BackendUnavailable",
    "HttpTransport",
    "KIND_AZURE",
    "KIND_MOCK",
    "KIND_TWINWORD",
    "MalformedResponse",
    "MockTransport",
    "NEGATIVE",
    "NEUTRAL",
    "POSITIVE",
    "SentimentClient",
    "SentimentError",
    "SentimentResult",
    "TokenBucket",
    "azure_polarity",
    "evaluate_sentiment",
    "load_backend_config",
    "mock_client",
    "parse_azure_body",
    "parse_twinword_body",
    "twinword_polarity",
]

KIND_TWINWORD = "twinword-style"
KIND_AZURE = "azure-style"
KIND_MOCK = "mock"
_KINDS = (KIND_TWINWORD, KIND_AZURE, KIND_MOCK)
_SCALES = (KIND_TWINWORD, KIND_AZURE)

POSITIVE = "positive"
NEGATIVE = "negative"
NEUTRAL = "neutral"
_POLARITIES = (POSITIVE, NEGATIVE, NEUTRAL)

#: Strict thresholds for the [-1, 1] scale; the closed band between them
#: is neutral.
TWINWORD_NEGATIVE_BELOW = -0.05
TWINWORD_POSITIVE_ABOVE = 0.05

#: Default positive/negative cut for the [0, 1] scale (its midpoint).
AZURE_DEFAULT_CUT = 0.5

DEFAULT_RATE_PER_SECOND = 5.0


class SentimentError(Exception):
    """Base class for backend failures; ``retryable`` hints whether a
    caller may usefully try again."""

    def __init__(self, message: str, *, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class BackendUnavailable(SentimentError):
    """Network failure, throttling, or a server-side error."""

    def __init__(self, message: str, *, retryable: bool = True):
        super().__init__(message, retryable=retryable)


class AuthError(SentimentError):
    """Missing or rejected credentials; retrying will not help."""

    def __init__(self, message: str, *, retryable: bool = False):
        super().__init__(message, retryable=retryable)


class MalformedResponse(SentimentError):
    """The backend answered, but not in the shape this adapter expects."""

    def __init__(self, message: str, *, retryable: bool = False):
        super().__init__(message, retryable=retryable)


@dataclass(frozen=True)
class BackendConfig:
    """Connection settings for one sentiment backend.

    ``key_env`` names the environment variable holding the API key; the
    key itself is never stored in configuration.  ``style`` selects which
    wire dialect a ``mock`` backend imitates and is ignored otherwise.
    """

    name: str
    kind: str
    endpoint: str = ""
    key_env: str = ""
    style: str = KIND_TWINWORD

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("backend name must be non-empty")
        if self.kind not in _KINDS:
            raise ValueError(
                f"unknown backend kind {self.kind!r}; expected one of {_KINDS}"
            )
        if self.style not in _SCALES:
            raise ValueError(
                f"unknown mock style {self.style!r}; expected one of {_SCALES}"
            )

    @property
    def scale(self) -> str:
        """The wire dialect this backend speaks (mock resolves to its style)."""
        return self.style if self.kind == KIND_MOCK else self.kind


@dataclass(frozen=True)
class SentimentResult:
    """One analyzed text: the backend-native ``raw_score``, the shared
    ``normalized`` score on ``[-1, 1]``, the derived polarity, and any
    scored keywords the backend reported."""

    backend: str
    raw_score: float
    normalized: float
    polarity: str
    keywords: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        if self.polarity not in _POLARITIES:
            raise ValueError(f"unknown polarity {self.polarity!r}")
        if not -1.0 <= self.normalized <= 1.0:
            raise ValueError(
                f"normalized score {self.normalized!r} outside [-1, 1]"
            )

    @property
    def percent(self) -> int:
        """The normalized score rendered on a 0-100 display scale."""
        return round((self.normalized + 1.0) * 50.0)


def twinword_polarity(raw: float) -> str:
    """Polarity for a [-1, 1] raw score; thresholds are strict, so the
    boundary values themselves are neutral."""
    if raw < TWINWORD_NEGATIVE_BELOW:
        return NEGATIVE
    if raw > TWINWORD_POSITIVE_ABOVE:
        return POSITIVE
    return NEUTRAL


def azure_polarity(raw: float, cut: float = AZURE_DEFAULT_CUT) -> str:
    """Polarity for a [0, 1] raw score; exactly-at-the-cut is neutral."""
    if raw < cut:
        return NEGATIVE
    if raw > cut:
        return POSITIVE
    return NEUTRAL


def _require_score(value: object, low: float, high: float, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedResponse(f"{where}: score is not a number: {value!r}")
    score = float(value)
    if math.isnan(score) or not low <= score <= high:
        raise MalformedResponse(
            f"{where}: score {score!r} outside [{low}, {high}]"
        )
    return score


def parse_twinword_body(body: object) -> tuple[float, tuple[tuple[str, float], ...]]:
    """Extract ``(raw_score, keywords)`` from a flat twinword-style body.

    Unknown extra fields are ignored; a missing or out-of-range score, or
    a keyword entry without ``word``/``score``, is a ``MalformedResponse``.
    """
    if not isinstance(body, Mapping):
        raise MalformedResponse("twinword-style body is not a JSON object")
    if "score" not in body:
        raise MalformedResponse("twinword-style body has no 'score' field")
    raw = _require_score(body["score"], -1.0, 1.0, "twinword-style body")
    keywords: list[tuple[str, float]] = []
    entries = body.get("keywords", [])
    if not isinstance(entries, Sequence) or isinstance(entries, (str, bytes)):
        raise MalformedResponse("twinword-style 'keywords' is not a list")
    for entry in entries:
        if not isinstance(entry, Mapping) or "word" not in entry or "score" not in entry:
            raise MalformedResponse(
                f"twinword-style keyword entry malformed: {entry!r}"
            )
        word = entry["word"]
        if not isinstance(word, str):
            raise MalformedResponse(
                f"twinword-style keyword word is not a string: {word!r}"
            )
        keywords.append(
            (word, _require_score(entry["score"], -1.0, 1.0, f"keyword {word!r}"))
        )
    return raw, tuple(keywords)


def parse_azure_body(body: object) -> float:
    """Extract the raw [0, 1] score from an azure-style body.

    Accepts either the bare sentiment section ``{"documents": [...]}`` or a
    full response with the section nested under ``"sentiment"``.  The score
    may sit in any entry of ``documents`` (responses split the id and the
    score across separate entries).
    """
    if not isinstance(body, Mapping):
        raise MalformedResponse("azure-style body is not a JSON object")
    section = body.get("sentiment", body)
    if not isinstance(section, Mapping):
        raise MalformedResponse("azure-style 'sentiment' section is not an object")
    documents = section.get("documents")
    if not isinstance(documents, Sequence) or isinstance(documents, (str, bytes)):
        raise MalformedResponse("azure-style body has no 'documents' list")
    for entry in documents:
        if isinstance(entry, Mapping) and "score" in entry:
            return _require_score(entry["score"], 0.0, 1.0, "azure-style document")
    raise MalformedResponse("azure-style 'documents' contains no score")


class TokenBucket:
    """Blocking token-bucket rate limiter, safe for concurrent use.

    The bucket starts full (allowing an initial burst of ``capacity``
    calls) and refills continuously at ``rate`` tokens per second;
    ``acquire`` sleeps just long enough to cover any deficit.
    """

    def __init__(
        self,
        rate: float = DEFAULT_RATE_PER_SECOND,
        capacity: float | None = None,
        *,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self._rate = float(rate)
        self._capacity = float(capacity) if capacity is not None else max(1.0, self._rate)
        if self._capacity < 1.0:
            raise ValueError("capacity must be at least 1")
        self._clock = clock
        self._sleep = sleep
        self._tokens = self._capacity
        self._stamp = clock()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        """Take one token, sleeping if none is available.  Returns the
        time slept, which is handy for tests and diagnostics."""
        with self._lock:
            now = self._clock()
            self._tokens = min(
                self._capacity, self._tokens + (now - self._stamp) * self._rate
            )
            self._stamp = now
            self._tokens -= 1.0
            wait = -self._tokens / self._rate if self._tokens < 0 else 0.0
        if wait > 0:
            self._sleep(wait)
        return wait


# --- Mock backend ---------------------------------------------------------

#: Word valences used when the mock sees a sentence it has no canned
#: response for.  The first three entries reuse the keyword scores from
#: the canned bodies so overlapping vocabulary stays consistent.
MOCK_VALENCE: Mapping[str, float] = {
    "love": 0.917220858,
    "hate": -0.918459669,
    "whole": 0.152059727,
    "amazing": 0.8,
    "awesome": 0.85,
    "awful": -0.8,
    "bad": -0.5,
    "best": 0.8,
    "garbage": -0.6,
    "good": 0.6,
    "great": 0.75,
    "happy": 0.7,
    "idiot": -0.75,
    "loser": -0.7,
    "nice": 0.5,
    "noob": -0.5,
    "perfect": 0.8,
    "stupid": -0.7,
    "suck": -0.6,
    "sucks": -0.6,
    "terrible": -0.8,
    "thanks": 0.45,
    "trash": -0.6,
    "useless": -0.65,
    "worst": -0.85,
}

_MOCK_WORD = re.compile(r"[a-z0-9']+")

#: Canned twinword-style bodies for the example sentences, verbatim
#: including fields the parser ignores.
_TWINWORD_CANNED: Mapping[str, Mapping[str, object]] = {
    "I love ice cream!": {
        "type": "positive",
        "score": 0.917220858,
        "ratio": 1,
        "keywords": [{"word": "love", "score": 0.917220858}],
        "version": "4.0.0",
        "author": "twinword inc.",
        "email": "feedback@twinword.com",
        "result_code": "200",
        "result_msg": "Success",
    },
    "I hate the whole team": {
        "type": "negative",
        "score": -0.383199971,
        "ratio": -0.71591411128435,
        "keywords": [
            {"word": "whole", "score": 0.152059727},
            {"word": "hate", "score": -0.918459669},
        ],
        "version": "4.0.0",
        "author": "twinword inc.",
        "email": "feedback@twinword.com",
        "result_code": "200",
        "result_msg": "Success",
    },
}

#: Canned azure-style document scores for the example sentences.
_AZURE_CANNED: Mapping[str, float] = {
    "I love ice cream": 0.877212041746438,
    "I hate the whole team": 0.0478871469511812,
}


def _mock_keywords(text: str) -> list[tuple[str, float]]:
    seen: dict[str, float] = {}
    for word in _MOCK_WORD.findall(text.casefold()):
        if word in MOCK_VALENCE and word not in seen:
            seen[word] = MOCK_VALENCE[word]
    return list(seen.items())


class MockTransport:
    """Deterministic offline transport that fabricates wire bodies.

    Responses go through the same parsers as real ones, so the mock
    exercises the full adapter path without any network or credentials.
    ``calls`` counts invocations, which lets tests verify the cache.
    """

    def __init__(self, style: str = KIND_TWINWORD):
        if style not in _SCALES:
            raise ValueError(
                f"unknown mock style {style!r}; expected one of {_SCALES}"
            )
        self.style = style
        self.calls = 0

    def __call__(self, config: BackendConfig, text: str) -> Mapping[str, object]:
        self.calls += 1
        if self.style == KIND_TWINWORD:
            return self._twinword_body(text)
        return self._azure_body(text)

    @staticmethod
    def _twinword_body(text: str) -> Mapping[str, object]:
        canned = _TWINWORD_CANNED.get(text)
        if canned is not None:
            return canned
        keywords = _mock_keywords(text)
        scores = [score for _, score in keywords]
        raw = sum(scores) / len(scores) if scores else 0.0
        magnitude = sum(abs(score) for score in scores)
        ratio = sum(scores) / magnitude if magnitude else 0.0
        return {
            "type": twinword_polarity(raw),
            "score": raw,
            "ratio": ratio,
            "keywords": [
                {"word": word, "score": score} for word, score in keywords
            ],
        }

    @staticmethod
    def _azure_body(text: str) -> Mapping[str, object]:
        raw = _AZURE_CANNED.get(text)
        if raw is None:
            keywords = _mock_keywords(text)
            scores = [score for _, score in keywords]
            valence = sum(scores) / len(scores) if scores else 0.0
            raw = min(1.0, max(0.0, (valence + 1.0) / 2.0))
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        doc_id = "-".join(
            (digest[:8], digest[8:12], digest[12:16], digest[16:20], digest[20:32])
        )
        return {
            "sentiment": {
                "documents": [{"id": doc_id}, {"score": raw}],
                "errors": [],
            }
        }


# --- HTTP transport -------------------------------------------------------


class HttpTransport:
    """requests-based transport for real twinword-style and azure-style
    endpoints.  Maps HTTP failures onto the adapter's error taxonomy:
    connection problems, 429 and 5xx are retryable ``BackendUnavailable``;
    401/403 is ``AuthError``; anything else unexpected is
    ``MalformedResponse``."""

    def __init__(self, timeout: float = 10.0, session: object | None = None):
        self._timeout = timeout
        self._session = session if session is not None else requests.Session()

    def __call__(self, config: BackendConfig, text: str) -> object:
        if not config.endpoint:
            raise BackendUnavailable(
                f"backend {config.name!r} has no endpoint configured",
                retryable=False,
            )
        key = os.environ.get(config.key_env, "") if config.key_env else ""
        if config.key_env and not key:
            raise AuthError(
                f"backend {config.name!r}: environment variable "
                f"{config.key_env} is not set"
            )
        if config.scale == KIND_TWINWORD:
            kwargs = {
                "data": {"text": text},
                "headers": {"X-Api-Key": key} if key else {},
            }
        else:
            kwargs = {
                "json": {"documents": [{"id": "1", "language": "en", "text": text}]},
                "headers": {"Ocp-Apim-Subscription-Key": key} if key else {},
            }
        try:
            response = self._session.post(
                config.endpoint, timeout=self._timeout, **kwargs
            )
        except requests.RequestException as exc:
            raise BackendUnavailable(
                f"backend {config.name!r} unreachable: {exc}"
            ) from exc
        status = getattr(response, "status_code", 0)
        if status in (401, 403):
            raise AuthError(f"backend {config.name!r} rejected credentials ({status})")
        if status == 429 or status >= 500:
            raise BackendUnavailable(f"backend {config.name!r} returned HTTP {status}")
        if status != 200:
            raise MalformedResponse(
                f"backend {config.name!r} returned unexpected HTTP {status}"
            )
        try:
            return response.json()
        except ValueError as exc:
            raise MalformedResponse(
                f"backend {config.name!r} response body is not JSON"
            ) from exc


# --- Client ---------------------------------------------------------------


class SentimentClient:
    """Analyze texts through one configured backend.

    The client owns a thread-safe result cache keyed by
    ``(backend name, sha256(text))`` and a token-bucket rate limiter.
    Mock backends skip rate limiting by default (there is no service to
    protect); pass ``rate_limiter`` explicitly to override either way.
    """

    def __init__(
        self,
        config: BackendConfig,
        *,
        transport: Callable[[BackendConfig, str], object] | None = None,
        rate_limiter: TokenBucket | None = None,
        azure_cut: float = AZURE_DEFAULT_CUT,
    ):
        self.config = config
        if transport is None:
            if config.kind == KIND_MOCK:
                transport = MockTransport(config.style)
            else:
                transport = HttpTransport()
        self._transport = transport
        if rate_limiter is None and config.kind != KIND_MOCK:
            rate_limiter = TokenBucket(DEFAULT_RATE_PER_SECOND)
        self._bucket = rate_limiter
        if not 0.0 < azure_cut < 1.0:
            raise ValueError("azure_cut must lie strictly inside (0, 1)")
        self._azure_cut = azure_cut
        self._cache: dict[tuple[str, str], SentimentResult] = {}
        self._cache_lock = threading.Lock()

    def analyze(self, text: str) -> SentimentResult:
        """Analyze one text, consulting the cache first."""
        if not text or not text.strip():
            raise ValueError("text must be non-empty")
        key = (self.config.name, hashlib.sha256(text.encode("utf-8")).hexdigest())
        with self._cache_lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        if self._bucket is not None:
            self._bucket.acquire()
        body = self._transport(self.config, text)
        result = self._result_from_body(body)
        with self._cache_lock:
            self._cache[key] = result
        return result

    def _result_from_body(self, body: object) -> SentimentResult:
        if self.config.scale == KIND_TWINWORD:
            raw, keywords = parse_twinword_body(body)
            return SentimentResult(
                backend=self.config.name,
                raw_score=raw,
                normalized=raw,
                polarity=twinword_polarity(raw),
                keywords=keywords,
            )
        raw = parse_azure_body(body)
        return SentimentResult(
            backend=self.config.name,
            raw_score=raw,
            normalized=2.0 * raw - 1.0,
            polarity=azure_polarity(raw, self._azure_cut),
            keywords=(),
        )


def mock_client(style: str = KIND_TWINWORD, *, name: str | None = None) -> SentimentClient:
    """A ready-to-use offline client speaking the given wire dialect."""
    config = BackendConfig(
        name=name or f"mock-{style}", kind=KIND_MOCK, style=style
    )
    return SentimentClient(config)


_CONFIG_KEYS = {"name", "kind", "endpoint", "key_env", "style"}


def load_backend_config(path: str) -> BackendConfig:
    """Read a backend config file: ``key = value`` lines, ``#`` comments.

    Recognized keys: ``name``, ``kind``, ``endpoint``, ``key_env``,
    ``style`` (mock dialect).  ``name`` and ``kind`` are required.
    """
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            key, sep, value = stripped.partition("=")
            key = key.strip()
            if not sep or key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unrecognized line {line!r}")
            values[key] = value.strip()
    for required in ("name", "kind"):
        if not values.get(required):
            raise ValueError(f"{path}: missing required key {required!r}")
    return BackendConfig(**values)


def evaluate_sentiment(store, client: SentimentClient) -> ConfusionMatrix:
    """Compare a backend against manual abuse labels.

    For every stored message whose manual ``is_abusive`` label is
    resolved, the reference flag is that label and the candidate flag is
    whether the backend judged the text *negative*.  Neutral results are
    excluded from the matrix and counted in ``excluded``.  Raises
    ``NoOverlap`` when nothing remains.
    """
    reference: list[bool] = []
    candidate: list[bool] = []
    excluded = 0
    for row in store.iter_messages():
        truth = row.manual_labels.get("is_abusive")
        if truth is None:
            continue
        result = client.analyze(row.text)
        if result.polarity == NEUTRAL:
            excluded += 1
            continue
        reference.append(truth)
        candidate.append(result.polarity == NEGATIVE)
    return confusion_from_flags(
        reference,
        candidate,
        attribute="is_abusive",
        systems=("manual", client.config.name),
        excluded=excluded,
    )
