from .batch import BatchPolicy, BatchReport, HostPacer, run_batch
from .crawler import (
    DEFAULT_LINK_PATTERN,
    FetchError,
    ParseError,
    ReplayLink,
    crawl_listing,
    listing_page_url,
)
from .fixture_server import (
    FixtureCorpus,
    corpus_from_manifest,
    ReplayFixtureServer,
    RequestRecord,
    generate_corpus,
)
from .wgapi import (
    MAX_IDS_PER_REQUEST,
    AuthError,
    PlayerSnapshot,
    RateLimited,
    SnapshotBatch,
    fetch_player_stats,
)

__all__ = [
    "AuthError",
    "BatchPolicy",
    "BatchReport",
    "DEFAULT_LINK_PATTERN",
    "FetchError",
    "FixtureCorpus",
    "HostPacer",
    "MAX_IDS_PER_REQUEST",
    "ParseError",
    "PlayerSnapshot",
    "RateLimited",
    "ReplayFixtureServer",
    "ReplayLink",
    "RequestRecord",
    "SnapshotBatch",
    "corpus_from_manifest",
    "crawl_listing",
    "fetch_player_stats",
    "generate_corpus",
    "listing_page_url",
    "run_batch",
]
