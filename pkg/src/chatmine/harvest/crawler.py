"""Listing-site crawler: walk numbered listing pages, collect download links.

Link extraction is a URL-pattern match over anchor hrefs rather than
site-specific DOM walking, so a markup reshuffle that keeps the link
URLs intact does not break the crawl.  A page that fetches but contains
no anchors at all is treated as unrecognized markup and aborts the
crawl; a page that merely fails to fetch is logged and skipped.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from urllib.parse import urljoin

import requests

from ..util import utc_now_iso

__all__ = [
    "DEFAULT_LINK_PATTERN",
    "FetchError",
    "ParseError",
    "ReplayLink",
    "crawl_listing",
    "listing_page_url",
]

log = logging.getLogger(__name__)

DEFAULT_LINK_PATTERN = re.compile(r"\.wotreplay$")

_TIMEOUT_S = 30.0


class FetchError(RuntimeError):
    """A listing page could not be retrieved."""


class ParseError(ValueError):
    """A listing page fetched fine but its markup was unrecognizable."""


@dataclass(frozen=True)
class ReplayLink:
    url: str
    listing_page: int
    discovered_at: str = field(default_factory=utc_now_iso)


class _AnchorCollector(HTMLParser):
    def __init__(self) -> None:
        super().__init__()
        self.hrefs: list[str] = []
        self.anchor_count = 0

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag != "a":
            return
        self.anchor_count += 1
        for name, value in attrs:
            if name == "href" and value:
                self.hrefs.append(value)


def listing_page_url(base_url: str, page: int) -> str:
    return f"{base_url.rstrip('/')}/listing?page={page}"


def extract_links(page_html: str, page_url: str, pattern: re.Pattern) -> list[str]:
    """Absolute URLs of anchors on the page whose target matches ``pattern``.

    Raises ParseError when the page contains no anchors at all — a listing
    page without links means the site layout changed underneath us.
    """
    collector = _AnchorCollector()
    collector.feed(page_html)
    collector.close()
    if collector.anchor_count == 0:
        raise ParseError(f"no anchors found on {page_url}")
    return [
        urljoin(page_url, href)
        for href in collector.hrefs
        if pattern.search(urljoin(page_url, href))
    ]


def crawl_listing(
    base_url: str,
    page_range: tuple[int, int],
    *,
    store=None,
    link_pattern: re.Pattern = DEFAULT_LINK_PATTERN,
    session: requests.Session | None = None,
    pacer=None,
) -> list[ReplayLink]:
    """Collect replay download links from listing pages ``first..last``
    (inclusive), deduplicated in discovery order.

    Links whose URL the store has already harvested are excluded.  Pages
    that fail to fetch are logged and skipped; a page with unrecognizable
    markup raises ParseError.
    """
    first, last = page_range
    http = session if session is not None else requests.Session()
    links: list[ReplayLink] = []
    seen: set[str] = set()
    for page in range(first, last + 1):
        page_url = listing_page_url(base_url, page)
        if pacer is not None:
            pacer.wait(page_url)
        try:
            response = http.get(page_url, timeout=_TIMEOUT_S)
            if response.status_code != 200:
                raise FetchError(f"{page_url} returned {response.status_code}")
            body = response.text
        except requests.RequestException as exc:
            log.warning("skipping listing page %s: %s", page_url, exc)
            continue
        except FetchError as exc:
            log.warning("skipping listing page: %s", exc)
            continue
        for url in extract_links(body, page_url, link_pattern):
            if url not in seen:
                seen.add(url)
                links.append(ReplayLink(url=url, listing_page=page))
    if store is not None:
        unseen = set(store.filter_unseen(link.url for link in links))
        links = [link for link in links if link.url in unseen]
    return links
