"""Sentiment adapter tests.

The canned mock bodies (and the scores inside them) are the frozen
reference points: results must reproduce them bit-for-bit.  Threshold
boundaries are asserted strictly neutral, the cache must make repeat
lookups free, and the confusion-matrix comparison must reproduce the
published diagnostic odds ratios when fed matching cell counts.
"""

import math

import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st

from chatmine.labels import ALL_UNKNOWN, LabelSet
from chatmine.metrics import NoOverlap, dor
from chatmine.sentiment import (
    AZURE_DEFAULT_CUT,
    AuthError,
    BackendConfig,
    BackendUnavailable,
    HttpTransport,
    KIND_AZURE,
    KIND_MOCK,
    KIND_TWINWORD,
    MalformedResponse,
    MockTransport,
    NEGATIVE,
    NEUTRAL,
    POSITIVE,
    SentimentClient,
    SentimentResult,
    TokenBucket,
    azure_polarity,
    evaluate_sentiment,
    load_backend_config,
    mock_client,
    parse_azure_body,
    parse_twinword_body,
    twinword_polarity,
)

# --- polarity thresholds ---------------------------------------------------


@pytest.mark.parametrize(
    "raw,expected",
    [
        (-1.0, NEGATIVE),
        (-0.0500001, NEGATIVE),
        (-0.05, NEUTRAL),  # boundary value itself is neutral
        (0.0, NEUTRAL),
        (0.05, NEUTRAL),  # boundary value itself is neutral
        (0.0500001, POSITIVE),
        (1.0, POSITIVE),
    ],
)
def test_twinword_polarity_thresholds_are_strict(raw, expected):
    assert twinword_polarity(raw) == expected


@pytest.mark.parametrize(
    "raw,expected",
    [
        (0.0, NEGATIVE),
        (0.4999999, NEGATIVE),
        (0.5, NEUTRAL),  # exactly at the cut
        (0.5000001, POSITIVE),
        (1.0, POSITIVE),
    ],
)
def test_azure_polarity_midpoint_cut(raw, expected):
    assert azure_polarity(raw) == expected


def test_azure_polarity_custom_cut():
    assert azure_polarity(0.4, cut=0.3) == POSITIVE
    assert azure_polarity(0.3, cut=0.3) == NEUTRAL
    assert azure_polarity(0.2, cut=0.3) == NEGATIVE


# --- canned example sentences ----------------------------------------------


def test_twinword_mock_love_ice_cream():
    client = mock_client(KIND_TWINWORD)
    result = client.analyze("I love ice cream!")
    assert result.raw_score == 0.917220858
    assert result.normalized == 0.917220858
    assert result.polarity == POSITIVE
    assert result.keywords == (("love", 0.917220858),)
    assert result.backend == "mock-twinword-style"


def test_twinword_mock_hate_whole_team():
    client = mock_client(KIND_TWINWORD)
    result = client.analyze("I hate the whole team")
    assert result.raw_score == -0.383199971
    assert result.polarity == NEGATIVE
    assert result.keywords == (
        ("whole", 0.152059727),
        ("hate", -0.918459669),
    )


def test_azure_mock_love_ice_cream_reports_88_percent():
    client = mock_client(KIND_AZURE)
    result = client.analyze("I love ice cream")
    assert result.raw_score == 0.877212041746438
    assert result.normalized == 2 * 0.877212041746438 - 1
    assert result.polarity == POSITIVE
    assert result.percent == 88
    assert result.keywords == ()


def test_azure_mock_hate_whole_team_reports_5_percent():
    client = mock_client(KIND_AZURE)
    result = client.analyze("I hate the whole team")
    assert result.raw_score == 0.0478871469511812
    assert result.polarity == NEGATIVE
    assert result.percent == 5


def test_mock_synthesis_from_valence_table():
    # Non-canned text: score is the mean of matched keyword valences.
    client = mock_client(KIND_TWINWORD)
    result = client.analyze("this team is useless garbage")
    assert result.keywords == (("useless", -0.65), ("garbage", -0.6))
    assert result.raw_score == pytest.approx((-0.65 - 0.6) / 2)
    assert result.polarity == NEGATIVE


def test_mock_unknown_words_are_neutral_in_both_dialects():
    assert mock_client(KIND_TWINWORD).analyze("qwerty zxcvb").polarity == NEUTRAL
    azure = mock_client(KIND_AZURE).analyze("qwerty zxcvb")
    assert azure.raw_score == 0.5
    assert azure.polarity == NEUTRAL


def test_mock_dialects_agree_on_direction():
    for text in ("I love this", "I hate this"):
        tw = mock_client(KIND_TWINWORD).analyze(text)
        az = mock_client(KIND_AZURE).analyze(text)
        assert tw.polarity == az.polarity


# --- wire-body parsing ------------------------------------------------------


def test_parse_twinword_tolerates_extra_fields():
    raw, keywords = parse_twinword_body(
        {"score": 0.25, "keywords": [], "version": "4.0.0", "result_msg": "Success"}
    )
    assert raw == 0.25
    assert keywords == ()


@pytest.mark.parametrize(
    "body",
    [
        "not an object",
        {},  # no score
        {"score": "high"},
        {"score": True},  # booleans are not scores
        {"score": 1.5},  # outside [-1, 1]
        {"score": float("nan")},
        {"score": 0.1, "keywords": "love"},
        {"score": 0.1, "keywords": [{"word": "love"}]},  # keyword missing score
        {"score": 0.1, "keywords": [{"score": 0.5}]},  # keyword missing word
        {"score": 0.1, "keywords": [{"word": 7, "score": 0.5}]},
    ],
)
def test_parse_twinword_rejects_malformed(body):
    with pytest.raises(MalformedResponse) as info:
        parse_twinword_body(body)
    assert info.value.retryable is False


def test_parse_azure_accepts_bare_and_nested_sections():
    nested = {
        "sentiment": {"documents": [{"id": "abc"}, {"score": 0.75}], "errors": []}
    }
    bare = {"documents": [{"id": "abc", "score": 0.75}]}
    assert parse_azure_body(nested) == 0.75
    assert parse_azure_body(bare) == 0.75


@pytest.mark.parametrize(
    "body",
    [
        42,
        {},  # no documents
        {"documents": "nope"},
        {"documents": [{"id": "only-an-id"}]},  # no score anywhere
        {"documents": [{"score": -0.2}]},  # outside [0, 1]
        {"documents": [{"score": 1.0000001}]},
        {"sentiment": "nope"},
    ],
)
def test_parse_azure_rejects_malformed(body):
    with pytest.raises(MalformedResponse):
        parse_azure_body(body)


# --- result type ------------------------------------------------------------


def test_result_validation():
    with pytest.raises(ValueError):
        SentimentResult(backend="b", raw_score=0.0, normalized=0.0, polarity="meh")
    with pytest.raises(ValueError):
        SentimentResult(backend="b", raw_score=2.0, normalized=2.0, polarity=POSITIVE)


def test_percent_spans_display_scale():
    make = lambda n: SentimentResult(
        backend="b", raw_score=n, normalized=n, polarity=NEUTRAL
    )
    assert make(-1.0).percent == 0
    assert make(0.0).percent == 50
    assert make(1.0).percent == 100


# --- configuration -----------------------------------------------------------


def test_backend_config_validation():
    with pytest.raises(ValueError):
        BackendConfig(name="", kind=KIND_MOCK)
    with pytest.raises(ValueError):
        BackendConfig(name="x", kind="carrier-pigeon")
    with pytest.raises(ValueError):
        BackendConfig(name="x", kind=KIND_MOCK, style="mock")
    assert BackendConfig(name="x", kind=KIND_MOCK, style=KIND_AZURE).scale == KIND_AZURE
    assert BackendConfig(name="x", kind=KIND_AZURE).scale == KIND_AZURE


def test_load_backend_config(tmp_path):
    path = tmp_path / "backend.conf"
    path.write_text(
        "# production scorer\n"
        "name = prod-scorer\n"
        "kind = azure-style\n"
        "endpoint = https://example.invalid/v1/sentiment\n"
        "key_env = SENTIMENT_KEY\n"
    )
    config = load_backend_config(str(path))
    assert config.name == "prod-scorer"
    assert config.kind == KIND_AZURE
    assert config.endpoint == "https://example.invalid/v1/sentiment"
    assert config.key_env == "SENTIMENT_KEY"


def test_load_backend_config_mock_style(tmp_path):
    path = tmp_path / "mock.conf"
    path.write_text("name = offline\nkind = mock\nstyle = azure-style\n")
    assert load_backend_config(str(path)).scale == KIND_AZURE


@pytest.mark.parametrize(
    "text",
    [
        "name = x\n",  # kind missing
        "kind = mock\n",  # name missing
        "name = x\nkind = mock\nflavour = vanilla\n",  # unknown key
        "name = x\nkind = mock\nno equals sign\n",
    ],
)
def test_load_backend_config_rejects_bad_files(tmp_path, text):
    path = tmp_path / "bad.conf"
    path.write_text(text)
    with pytest.raises(ValueError):
        load_backend_config(str(path))


# --- cache and rate limiting --------------------------------------------------


def test_cache_second_analyze_performs_zero_backend_calls():
    transport = MockTransport(KIND_TWINWORD)
    client = SentimentClient(
        BackendConfig(name="cached", kind=KIND_MOCK), transport=transport
    )
    first = client.analyze("I hate the whole team")
    second = client.analyze("I hate the whole team")
    assert transport.calls == 1
    assert first == second


def test_cache_is_keyed_by_text():
    transport = MockTransport(KIND_TWINWORD)
    client = SentimentClient(
        BackendConfig(name="cached", kind=KIND_MOCK), transport=transport
    )
    client.analyze("one text")
    client.analyze("another text")
    client.analyze("one text")
    assert transport.calls == 2


def test_analyze_rejects_blank_text():
    client = mock_client()
    with pytest.raises(ValueError):
        client.analyze("")
    with pytest.raises(ValueError):
        client.analyze("   ")


class FakeTimer:
    """Deterministic clock whose sleep() advances it."""

    def __init__(self):
        self.now = 0.0
        self.slept = []

    def clock(self):
        return self.now

    def sleep(self, seconds):
        self.slept.append(seconds)
        self.now += seconds


def test_token_bucket_allows_burst_then_paces():
    timer = FakeTimer()
    bucket = TokenBucket(rate=5.0, capacity=5.0, clock=timer.clock, sleep=timer.sleep)
    waits = [bucket.acquire() for _ in range(5)]
    assert waits == [0.0] * 5  # initial burst rides on a full bucket
    assert bucket.acquire() == pytest.approx(0.2)  # then one token per 1/5 s
    assert bucket.acquire() == pytest.approx(0.2)
    assert timer.slept == [pytest.approx(0.2), pytest.approx(0.2)]


def test_token_bucket_refills_while_idle():
    timer = FakeTimer()
    bucket = TokenBucket(rate=5.0, capacity=5.0, clock=timer.clock, sleep=timer.sleep)
    for _ in range(5):
        bucket.acquire()
    timer.now += 10.0  # long idle period refills to capacity, no further
    waits = [bucket.acquire() for _ in range(5)]
    assert waits == [0.0] * 5
    assert bucket.acquire() == pytest.approx(0.2)


def test_token_bucket_validation():
    with pytest.raises(ValueError):
        TokenBucket(rate=0)
    with pytest.raises(ValueError):
        TokenBucket(rate=5, capacity=0.25)


def test_client_rate_limits_backend_calls():
    timer = FakeTimer()
    transport = MockTransport(KIND_TWINWORD)
    client = SentimentClient(
        BackendConfig(name="paced", kind=KIND_MOCK),
        transport=transport,
        rate_limiter=TokenBucket(
            rate=5.0, capacity=5.0, clock=timer.clock, sleep=timer.sleep
        ),
    )
    for i in range(6):
        client.analyze(f"text number {i}")
    assert transport.calls == 6
    assert timer.slept == [pytest.approx(0.2)]  # only the sixth call waited
    # Cache hits never touch the bucket.
    client.analyze("text number 0")
    assert timer.slept == [pytest.approx(0.2)]


def test_mock_client_skips_rate_limiting_by_default():
    client = mock_client(KIND_TWINWORD)
    assert client._bucket is None
    for i in range(20):  # would take ~3 s if throttled
        client.analyze(f"untimed {i}")


# --- HTTP transport -----------------------------------------------------------


class FakeResponse:
    def __init__(self, status_code, payload=None, bad_json=False):
        self.status_code = status_code
        self._payload = payload
        self._bad_json = bad_json

    def json(self):
        if self._bad_json:
            raise ValueError("not json")
        return self._payload


class FakeSession:
    def __init__(self, response=None, error=None):
        self.response = response
        self.error = error
        self.requests = []

    def post(self, url, **kwargs):
        self.requests.append((url, kwargs))
        if self.error is not None:
            raise self.error
        return self.response


TWINWORD_HTTP = BackendConfig(
    name="tw", kind=KIND_TWINWORD, endpoint="https://example.invalid/analyze"
)
AZURE_HTTP = BackendConfig(
    name="az", kind=KIND_AZURE, endpoint="https://example.invalid/sentiment"
)


def test_http_transport_posts_dialect_shaped_requests():
    session = FakeSession(FakeResponse(200, {"score": 0.2, "keywords": []}))
    transport = HttpTransport(session=session)
    assert transport(TWINWORD_HTTP, "hello")["score"] == 0.2
    url, kwargs = session.requests[0]
    assert url == TWINWORD_HTTP.endpoint
    assert kwargs["data"] == {"text": "hello"}

    session = FakeSession(FakeResponse(200, {"documents": [{"score": 0.9}]}))
    HttpTransport(session=session)(AZURE_HTTP, "hello")
    _, kwargs = session.requests[0]
    assert kwargs["json"]["documents"][0]["text"] == "hello"


def test_http_transport_sends_key_from_environment(monkeypatch):
    monkeypatch.setenv("TW_KEY", "sekrit")
    config = BackendConfig(
        name="tw",
        kind=KIND_TWINWORD,
        endpoint="https://example.invalid/analyze",
        key_env="TW_KEY",
    )
    session = FakeSession(FakeResponse(200, {"score": 0.0}))
    HttpTransport(session=session)(config, "hi")
    _, kwargs = session.requests[0]
    assert kwargs["headers"] == {"X-Api-Key": "sekrit"}


def test_http_transport_missing_key_is_auth_error(monkeypatch):
    monkeypatch.delenv("TW_KEY", raising=False)
    config = BackendConfig(
        name="tw",
        kind=KIND_TWINWORD,
        endpoint="https://example.invalid/analyze",
        key_env="TW_KEY",
    )
    with pytest.raises(AuthError) as info:
        HttpTransport(session=FakeSession())(config, "hi")
    assert info.value.retryable is False


def test_http_transport_error_taxonomy():
    def call(response=None, error=None):
        HttpTransport(session=FakeSession(response, error))(TWINWORD_HTTP, "hi")

    with pytest.raises(AuthError):
        call(FakeResponse(401))
    with pytest.raises(AuthError):
        call(FakeResponse(403))
    with pytest.raises(BackendUnavailable) as info:
        call(FakeResponse(429))
    assert info.value.retryable is True
    with pytest.raises(BackendUnavailable):
        call(FakeResponse(503))
    with pytest.raises(MalformedResponse):
        call(FakeResponse(404))
    with pytest.raises(MalformedResponse):
        call(FakeResponse(200, bad_json=True))
    with pytest.raises(BackendUnavailable) as info:
        call(error=requests.ConnectionError("unplugged"))
    assert info.value.retryable is True


def test_http_transport_requires_endpoint():
    config = BackendConfig(name="tw", kind=KIND_TWINWORD)
    with pytest.raises(BackendUnavailable) as info:
        HttpTransport(session=FakeSession())(config, "hi")
    assert info.value.retryable is False


def test_client_over_http_transport_parses_and_caches():
    session = FakeSession(
        FakeResponse(200, {"score": -0.6, "keywords": [{"word": "hate", "score": -0.6}]})
    )
    client = SentimentClient(
        TWINWORD_HTTP,
        transport=HttpTransport(session=session),
        rate_limiter=TokenBucket(rate=1000),
    )
    result = client.analyze("so much hate")
    assert result.polarity == NEGATIVE
    assert result.keywords == (("hate", -0.6),)
    client.analyze("so much hate")
    assert len(session.requests) == 1


# --- evaluation against manual labels ------------------------------------------


class FakeRow:
    def __init__(self, text, is_abusive):
        self.text = text
        self.manual_labels = (
            ALL_UNKNOWN
            if is_abusive is None
            else ALL_UNKNOWN.with_value("is_abusive", is_abusive)
        )


class FakeStore:
    def __init__(self, rows):
        self._rows = rows

    def iter_messages(self):
        return iter(self._rows)


def test_evaluate_sentiment_counts_cells_and_exclusions():
    rows = [
        FakeRow("I hate this", True),  # tp: abusive, judged negative
        FakeRow("I hate this", True),  # tp (cache hit)
        FakeRow("I love this", True),  # fn: abusive, judged positive
        FakeRow("I hate this", False),  # fp
        FakeRow("I love this", False),  # tn
        FakeRow("I love this", False),  # tn
        FakeRow("plain words", False),  # neutral: excluded
        FakeRow("whatever", None),  # unresolved: skipped entirely
    ]
    matrix = evaluate_sentiment(FakeStore(rows), mock_client(KIND_TWINWORD))
    assert (matrix.tp, matrix.tn, matrix.fp, matrix.fn) == (2, 2, 1, 1)
    assert matrix.excluded == 1
    assert matrix.attribute == "is_abusive"
    assert matrix.systems == ("manual", "mock-twinword-style")


def _rows_for_cells(tp, tn, fp, fn):
    rows = []
    rows += [FakeRow("I hate this", True) for _ in range(tp)]
    rows += [FakeRow("I love this", True) for _ in range(fn)]
    rows += [FakeRow("I hate this", False) for _ in range(fp)]
    rows += [FakeRow("I love this", False) for _ in range(tn)]
    return rows


def test_evaluate_reproduces_published_manual_vs_twinword_ratio():
    # Published manual-vs-twinword comparison cells: 309/1592/127/1279.
    store = FakeStore(_rows_for_cells(tp=309, tn=1592, fp=1279, fn=127))
    matrix = evaluate_sentiment(store, mock_client(KIND_TWINWORD))
    assert (matrix.tp, matrix.tn, matrix.fp, matrix.fn) == (309, 1592, 1279, 127)
    assert matrix.total == 3307
    ratio = dor(matrix)
    assert math.isclose(ratio, 3.0285, rel_tol=5e-4)
    assert round(ratio) == 3  # the figure the comparison is quoted at


def test_evaluate_reproduces_published_manual_vs_azure_ratio():
    # Published manual-vs-azure comparison cells: 156/204/33/145.
    store = FakeStore(_rows_for_cells(tp=156, tn=204, fp=145, fn=33))
    matrix = evaluate_sentiment(store, mock_client(KIND_AZURE))
    assert (matrix.tp, matrix.tn, matrix.fp, matrix.fn) == (156, 204, 145, 33)
    ratio = dor(matrix)
    assert math.isclose(ratio, 6.6508, rel_tol=5e-4)


def test_evaluate_all_neutral_raises_no_overlap():
    rows = [FakeRow("plain words", True), FakeRow("more plain words", False)]
    with pytest.raises(NoOverlap):
        evaluate_sentiment(FakeStore(rows), mock_client(KIND_TWINWORD))


def test_evaluate_no_resolved_labels_raises_no_overlap():
    rows = [FakeRow("I hate this", None)]
    with pytest.raises(NoOverlap):
        evaluate_sentiment(FakeStore(rows), mock_client(KIND_TWINWORD))


# --- invariants -----------------------------------------------------------------


@given(
    a=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    b=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
)
def test_azure_normalization_is_monotone(a, b):
    if a > b:
        a, b = b, a
    norm_a, norm_b = 2 * a - 1, 2 * b - 1
    assert norm_a <= norm_b
    # Strictness can be lost to float rounding only for near-identical
    # inputs; above that granularity the ordering must be strict.
    if b - a > 1e-9:
        assert norm_a < norm_b


@given(raw=st.floats(min_value=-1.0, max_value=1.0, allow_nan=False))
def test_twinword_adapter_totality(raw):
    client = SentimentClient(
        BackendConfig(name="prop", kind=KIND_TWINWORD, endpoint="x"),
        transport=lambda config, text: {"score": raw, "keywords": []},
        rate_limiter=TokenBucket(rate=1e9),
    )
    result = client.analyze(f"raw={raw!r}")
    assert result.polarity in (POSITIVE, NEGATIVE, NEUTRAL)
    assert result.polarity == twinword_polarity(raw)
    assert result.normalized == raw


@settings(max_examples=60)
@given(raw=st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
def test_azure_adapter_totality_and_percent(raw):
    client = SentimentClient(
        BackendConfig(name="prop", kind=KIND_AZURE, endpoint="x"),
        transport=lambda config, text: {"documents": [{"score": raw}]},
        rate_limiter=TokenBucket(rate=1e9),
    )
    result = client.analyze(f"raw={raw!r}")
    assert result.polarity == azure_polarity(raw, AZURE_DEFAULT_CUT)
    assert -1.0 <= result.normalized <= 1.0
    assert 0 <= result.percent <= 100
    # Within half a display unit of the raw scale; exact ties may resolve
    # either way because (2*raw - 1) + 1 re-rounds.
    assert abs(result.percent - raw * 100) <= 0.5 + 1e-9
