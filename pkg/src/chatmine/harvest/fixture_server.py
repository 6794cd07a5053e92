"""Local HTTP stand-in for the replay listing site and the stats API.

Serves three route families from one port:

* ``GET /listing?page=N``       — HTML pages of anchor links (1-based)
* ``GET /replays/<name>``       — replay file bytes, generated on demand
* ``GET /account/info?…``       — WG-style JSON statistics envelope

Every request is appended to a monotonic-clocked log so tests can check
request spacing and batching.  Failure injection knobs (per-URL status
overrides, one-shot 429s on the stats route) make the unhappy paths
reproducible without real network trouble.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from ..replay import DEFAULT_TEST_KEY, FixtureChat, FixtureDeath, FixturePlayer, FixtureSpec, encode_fixture

__all__ = [
    "FixtureCorpus",
    "corpus_from_manifest",
    "ReplayFixtureServer",
    "RequestRecord",
    "generate_corpus",
]

_CHAT_LINES = (
    "gg wp all",
    "push B now",
    "nice shot",
    "you stupid noob",
    "worst team ever",
    "care arty",
    "go go go",
    "what a useless idiot",
    "well played",
    "report this noob team",
)


@dataclass(frozen=True)
class RequestRecord:
    at: float  # monotonic seconds
    method: str
    path: str  # path with query string


@dataclass
class FixtureCorpus:
    """Everything the server offers: page layout, replay specs, player stats."""

    pages: list[list[str]]  # page index -> replay names listed there
    specs: dict[str, FixtureSpec]  # replay name -> fixture spec
    stats: dict[int, dict]  # account_id -> {"battles", "xp", "wins"}
    key: bytes = DEFAULT_TEST_KEY

    def all_names(self) -> list[str]:
        return [name for page in self.pages for name in page]


def generate_corpus(
    seed: int,
    pages: int,
    links_per_page: int,
    *,
    pool_size: int = 40,
    key: bytes = DEFAULT_TEST_KEY,
) -> FixtureCorpus:
    """Deterministic corpus: same arguments, same replay bytes and stats."""
    if pool_size < 8:
        raise ValueError("pool_size must be at least 8 (matches sample up to 8 players)")
    rng = random.Random(seed)
    accounts = [700000001 + i for i in range(pool_size)]
    stats = {
        account_id: {
            "battles": rng.randint(50, 40_000),
            "xp": rng.randint(10_000, 3_000_000),
            "wins": 0,
        }
        for account_id in accounts
    }
    for entry in stats.values():
        entry["wins"] = rng.randint(0, entry["battles"])

    page_layout: list[list[str]] = []
    specs: dict[str, FixtureSpec] = {}
    for page in range(pages):
        names: list[str] = []
        for slot in range(links_per_page):
            match_id = f"gen-{seed}-{page + 1}-{slot + 1}"
            participants = rng.sample(accounts, k=rng.randint(4, 8))
            players = tuple(
                FixturePlayer(a, f"Gen{a}", team=1 + (i % 2))
                for i, a in enumerate(participants)
            )
            chats = tuple(
                FixtureChat(
                    float(rng.randint(0, 890)) + slot / 16.0,
                    rng.choice(participants),
                    rng.choice(_CHAT_LINES),
                )
                for _ in range(rng.randint(2, 6))
            )
            deaths = tuple(
                FixtureDeath(float(rng.randint(0, 890)), victim)
                for victim in rng.sample(participants, k=rng.randint(0, 3))
            )
            name = f"{match_id}.wotreplay"
            specs[name] = FixtureSpec(match_id, players, chats, deaths)
            names.append(name)
        page_layout.append(names)
    return FixtureCorpus(pages=page_layout, specs=specs, stats=stats, key=key)


def corpus_from_manifest(manifest: dict) -> FixtureCorpus:
    """Build a generated corpus from a manifest mapping.

    Recognized keys (all optional): ``seed``, ``pages``, ``links_per_page``,
    ``pool_size``.  Anything else is ignored so manifests can carry
    server-level settings like ``app_id`` alongside.
    """
    return generate_corpus(
        seed=int(manifest.get("seed", 1)),
        pages=int(manifest.get("pages", 3)),
        links_per_page=int(manifest.get("links_per_page", 20)),
        pool_size=int(manifest.get("pool_size", 40)),
    )


@dataclass
class _ServerState:
    corpus: FixtureCorpus
    app_id: str
    requests: list[RequestRecord] = field(default_factory=list)
    broken_replays: dict[str, int] = field(default_factory=dict)  # name -> status
    stats_429_remaining: int = 0
    stats_retry_after: float = 0.0
    lock: threading.Lock = field(default_factory=threading.Lock)
    blob_cache: dict[str, bytes] = field(default_factory=dict)

    def record(self, method: str, path: str) -> None:
        with self.lock:
            self.requests.append(RequestRecord(time.monotonic(), method, path))

    def blob_for(self, name: str) -> bytes | None:
        spec = self.corpus.specs.get(name)
        if spec is None:
            return None
        with self.lock:
            blob = self.blob_cache.get(name)
            if blob is None:
                blob = encode_fixture(spec, key=self.corpus.key)
                self.blob_cache[name] = blob
            return blob

    def take_stats_429(self) -> bool:
        with self.lock:
            if self.stats_429_remaining > 0:
                self.stats_429_remaining -= 1
                return True
            return False


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    # Headers and body go out in separate writes; without TCP_NODELAY the
    # Nagle/delayed-ACK interaction stalls every response ~40ms on loopback.
    disable_nagle_algorithm = True
    server: "ReplayFixtureServer"

    def log_message(self, format: str, *args) -> None:  # noqa: A002 - stdlib name
        pass

    def _send(self, status: int, body: bytes, content_type: str, headers: dict | None = None) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        for name, value in (headers or {}).items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, payload: dict, status: int = 200, headers: dict | None = None) -> None:
        self._send(status, json.dumps(payload).encode("utf-8"), "application/json", headers)

    def do_GET(self) -> None:  # noqa: N802 - stdlib naming
        state = self.server.state
        state.record("GET", self.path)
        parts = urlsplit(self.path)
        query = parse_qs(parts.query)
        if parts.path == "/listing":
            self._listing(state, query)
        elif parts.path.startswith("/replays/"):
            self._replay(state, parts.path[len("/replays/"):])
        elif parts.path == "/account/info":
            self._stats(state, query)
        else:
            self._send(404, b"not found", "text/plain")

    def _listing(self, state: _ServerState, query: dict) -> None:
        try:
            page = int(query.get("page", ["0"])[0])
        except ValueError:
            page = 0
        pages = state.corpus.pages
        if not 1 <= page <= len(pages):
            self._send(404, b"no such page", "text/plain")
            return
        rows = "\n".join(
            f'<li><a href="/replays/{name}">{name}</a> '
            f'<a href="/detail/{name}.html">details</a></li>'
            for name in pages[page - 1]
        )
        nav = f'<a href="/listing?page={page + 1}">next</a>' if page < len(pages) else ""
        body = (
            "<html><head><title>replay listing</title></head><body>"
            f'<h1>Page {page}</h1><a href="/about">about</a><ul>{rows}</ul>{nav}'
            "</body></html>"
        ).encode("utf-8")
        self._send(200, body, "text/html; charset=utf-8")

    def _replay(self, state: _ServerState, name: str) -> None:
        forced = state.broken_replays.get(name)
        if forced is not None:
            self._send(forced, b"injected failure", "text/plain")
            return
        blob = state.blob_for(name)
        if blob is None:
            self._send(404, b"no such replay", "text/plain")
            return
        self._send(200, blob, "application/octet-stream")

    def _stats(self, state: _ServerState, query: dict) -> None:
        if state.take_stats_429():
            self._send(
                429, b"slow down", "text/plain",
                {"Retry-After": str(state.stats_retry_after)},
            )
            return
        app_id = query.get("application_id", [""])[0]
        if app_id != state.app_id:
            self._send_json(
                {"status": "error",
                 "error": {"code": 407, "message": "INVALID_APPLICATION_ID"}}
            )
            return
        raw_ids = query.get("account_id", [""])[0]
        data: dict[str, dict | None] = {}
        for token in filter(None, raw_ids.split(",")):
            try:
                account_id = int(token)
            except ValueError:
                data[token] = None
                continue
            entry = state.corpus.stats.get(account_id)
            data[str(account_id)] = (
                {"statistics": {"all": dict(entry)}} if entry is not None else None
            )
        self._send_json({"status": "ok", "data": data})


class ReplayFixtureServer(ThreadingHTTPServer):
    """In-process fixture server; use as a context manager in tests."""

    daemon_threads = True

    def __init__(
        self,
        corpus: FixtureCorpus,
        app_id: str = "fixture-app-id",
        host: str = "127.0.0.1",
        port: int = 0,
    ) -> None:
        super().__init__((host, port), _Handler)
        self.state = _ServerState(corpus=corpus, app_id=app_id)
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "ReplayFixtureServer":
        self._thread.start()
        return self

    def requests_to(self, path_prefix: str) -> list[RequestRecord]:
        with self.state.lock:
            return [r for r in self.state.requests if r.path.startswith(path_prefix)]

    def close(self) -> None:
        self.shutdown()
        super().server_close()
        self._thread.join(timeout=5.0)

    def __enter__(self) -> "ReplayFixtureServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.close()
