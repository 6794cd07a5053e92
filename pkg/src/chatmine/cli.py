"""Command-line entry points.

Every subcommand exits nonzero on error and prints a single JSON document
to stdout when given ``--json``.  The database location comes from
``--db`` or the ``DB_PATH`` environment variable; the replay key comes
from ``REPLAY_KEY_HEX`` (hex-encoded, 16 bytes) and falls back to the
all-zeros-through-fifteen test key that the bundled fixtures use.
"""

from __future__ import annotations

import csv
import io
import json
import re
import sys

import click

from .analytics import (
    DEFAULT_BIN_WIDTH_S,
    DEFAULT_XP_BUCKET,
    NoLabeledData,
    death_delta,
    death_delta_csv,
    experience_rates,
    experience_rates_csv,
)
from .classify import Classifier, ENGINE_MODES, MODE_BOUNDARY, default_lexicons, load_lexicon_dir
from .classify import classify_corpus as run_classifier
from .harvest import AuthError, BatchPolicy, RateLimited, ReplayFixtureServer, corpus_from_manifest, run_batch
from .metrics import NoOverlap, UndefinedMetric, ZeroDenominator, dor, evaluation_report, f_score
from .replay import DEFAULT_TEST_KEY
from .sentiment import (
    KIND_AZURE,
    KIND_TWINWORD,
    SentimentClient,
    SentimentError,
    evaluate_sentiment,
    load_backend_config,
    mock_client,
)
from .service import DEFAULT_BIND_ADDR, parse_bind_addr, serve_forever
from .store import ChatStore, ExportIO, EXPORT_FORMATS

_PAGES_RE = re.compile(r"^(\d+)\.\.(\d+)$")


def _db_option(f):
    return click.option(
        "--db", "db_path", envvar="DB_PATH", default="chatmine.db", show_default=True,
        help="SQLite database path (env: DB_PATH).",
    )(f)


def _json_option(f):
    return click.option(
        "--json", "as_json", is_flag=True, help="Print one machine-readable JSON document."
    )(f)


def _emit(as_json: bool, payload: dict, human: list[str]) -> None:
    if as_json:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        for line in human:
            click.echo(line)


def _replay_key() -> bytes:
    import os

    raw = os.environ.get("REPLAY_KEY_HEX", "")
    if not raw:
        return DEFAULT_TEST_KEY
    try:
        key = bytes.fromhex(raw)
    except ValueError:
        raise click.UsageError("REPLAY_KEY_HEX is not valid hex")
    if len(key) != 16:
        raise click.UsageError(f"REPLAY_KEY_HEX must encode 16 bytes, got {len(key)}")
    return key


def _parse_pages(value: str) -> tuple[int, int]:
    match = _PAGES_RE.match(value)
    if not match:
        raise click.UsageError(f"--pages must look like A..B, got {value!r}")
    return int(match.group(1)), int(match.group(2))


@click.group()
def main() -> None:
    """Replay chat harvesting, classification, scoring, and annotation."""


@main.command("fixture-serve")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON manifest: seed, pages, links_per_page, pool_size, app_id, bind.")
@click.option("--bind", "bind_addr", default=None,
              help="host:port to listen on (overrides manifest; port 0 picks a free one).")
@_json_option
def fixture_serve(manifest_path: str, bind_addr: str | None, as_json: bool) -> None:
    """Serve listing pages, replay files, and a stats endpoint for local runs."""
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    try:
        corpus = corpus_from_manifest(manifest)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    host, port = parse_bind_addr(bind_addr or manifest.get("bind", "127.0.0.1:0"))
    app_id = manifest.get("app_id", "fixture-app-id")
    server = ReplayFixtureServer(corpus, app_id=app_id, host=host, port=port)
    links = len(corpus.all_names())
    _emit(
        as_json,
        {"base_url": server.base_url, "pages": len(corpus.pages),
         "links": links, "app_id": app_id},
        [f"serving {links} replay links on {server.base_url} "
         f"({len(corpus.pages)} listing pages)"],
    )
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


@main.command()
@click.option("--base-url", required=True, help="Listing site root.")
@click.option("--pages", default="1..1", show_default=True, help="Inclusive page range A..B.")
@click.option("--limit", default=1000, show_default=True, type=click.IntRange(min=1),
              help="Maximum new files this run.")
@click.option("--delay-ms", default=250, show_default=True, type=click.IntRange(min=0),
              help="Minimum gap between requests to the same host.")
@click.option("--parallel", default=4, show_default=True, type=click.IntRange(min=1),
              help="Concurrent downloads.")
@click.option("--api-base", default=None, help="Stats API root (default: --base-url).")
@click.option("--app-id", envvar="WG_APP_ID", default="fixture-app-id", show_default=True,
              help="Stats API application id (env: WG_APP_ID).")
@click.option("--realm", default="EU", show_default=True)
@_db_option
@_json_option
def harvest(base_url: str, pages: str, limit: int, delay_ms: int, parallel: int,
            api_base: str | None, app_id: str, realm: str, db_path: str, as_json: bool) -> None:
    """Crawl the listing, download new replays, ingest them, snapshot players."""
    page_range = _parse_pages(pages)
    policy = BatchPolicy(
        max_files_per_run=limit, request_delay_ms=delay_ms, max_parallel_downloads=parallel
    )
    store = ChatStore(db_path)
    try:
        report = run_batch(
            store, policy,
            base_url=base_url, pages=page_range,
            api_base=api_base or base_url, app_id=app_id,
            key=_replay_key(), realm=realm,
        )
    except (AuthError, RateLimited) as exc:
        raise click.ClickException(str(exc))
    finally:
        store.close()
    _emit(
        as_json,
        {"links_seen": report.links_seen, "downloaded": report.downloaded,
         "decoded": report.decoded, "failed": report.failed, "aborted": report.aborted},
        [str(report)],
    )
    if report.aborted:
        raise SystemExit(1)


@main.command()
@click.option("--lexicon-dir", default=None, type=click.Path(exists=True, file_okay=False),
              help="Directory of <name>.txt lexicons (default: bundled seed lexicons).")
@click.option("--mode", type=click.Choice(ENGINE_MODES), default=MODE_BOUNDARY,
              show_default=True, help="Term matching style.")
@_db_option
@_json_option
def classify(lexicon_dir: str | None, mode: str, db_path: str, as_json: bool) -> None:
    """Write keyword-rule labels onto every stored message."""
    try:
        lexicons = load_lexicon_dir(lexicon_dir) if lexicon_dir else default_lexicons()
        classifier = Classifier(lexicons, mode=mode)
    except (OSError, ValueError) as exc:
        raise click.ClickException(str(exc))
    store = ChatStore(db_path)
    try:
        counts = run_classifier(store, classifier)
        total = store.message_count()
    finally:
        store.close()
    _emit(
        as_json,
        {"messages": total, "true_counts": counts, "mode": mode},
        [f"classified {total} message(s) [{mode}]"]
        + [f"  {attr}: {n}" for attr, n in counts.items()],
    )


@main.command()
@click.option("--labels", "label_source", type=click.Choice(("manual", "auto", "merged")),
              default="merged", show_default=True, help="Label source for scoring.")
@_db_option
@_json_option
def score(label_source: str, db_path: str, as_json: bool) -> None:
    """Recompute per-message scores and write them back to the store."""
    store = ChatStore(db_path)
    try:
        matches = store.rescore_all(label_source)
    finally:
        store.close()
    _emit(
        as_json,
        {"rescored_matches": matches, "labels": label_source},
        [f"rescored {matches} match(es) from {label_source} labels"],
    )


def _report_rows(report: dict) -> list[dict]:
    rows = []
    sections = list(report.get("attributes", {}).items())
    if "cs_vs_pcs" in report:
        sections.append(("cs_vs_pcs", report["cs_vs_pcs"]))
    for name, entry in sections:
        if "error" in entry:
            rows.append({"attribute": name, "error": entry["error"]})
            continue
        cells = entry["cells"]
        rows.append({
            "attribute": name,
            "tp": cells["tp"], "tn": cells["tn"], "fp": cells["fp"], "fn": cells["fn"],
            "excluded": entry.get("excluded", 0), "total": entry.get("total", 0),
            "dor": entry.get("dor"), "f_score": entry.get("f_score"),
        })
    return rows


def _write_report(report: dict, out_path: str) -> None:
    if out_path.endswith(".json"):
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return
    if out_path.endswith(".csv"):
        columns = ("attribute", "tp", "tn", "fp", "fn", "excluded", "total", "dor", "f_score", "error")
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=columns, restval="", lineterminator="\n")
        writer.writeheader()
        for row in _report_rows(report):
            writer.writerow(row)
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buffer.getvalue())
        return
    raise click.UsageError("--out must end in .json or .csv")


def _sentiment_report(store, config_path: str | None, style: str) -> dict:
    if config_path:
        client = SentimentClient(load_backend_config(config_path))
    else:
        client = mock_client(style)
    matrix = evaluate_sentiment(store, client)
    entry: dict = {
        "cells": matrix.cells(), "excluded": matrix.excluded, "total": matrix.total,
        "systems": list(matrix.systems),
    }
    try:
        entry["dor"] = dor(matrix)
    except ZeroDenominator:
        entry["dor"] = None
        entry["dor_error"] = "zero-denominator"
    try:
        entry["f_score"] = f_score(matrix)
    except UndefinedMetric:
        entry["f_score"] = None
    return {"attributes": {"is_abusive": entry}, "message_count": store.message_count()}


@main.command()
@click.option("--against", type=click.Choice(("manual",)), default="manual", show_default=True,
              help="Reference labels.")
@click.option("--candidate", type=click.Choice(("sac", "sentiment")), default="sac",
              show_default=True, help="System under evaluation.")
@click.option("--backend-config", "backend_config", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Sentiment backend config (key = value lines); default: built-in mock.")
@click.option("--style", type=click.Choice((KIND_TWINWORD, KIND_AZURE)), default=KIND_TWINWORD,
              show_default=True, help="Mock dialect when no backend config is given.")
@click.option("--out", "out_path", default=None,
              help="Also write the report to this .json or .csv file.")
@_db_option
@_json_option
def evaluate(against: str, candidate: str, backend_config: str | None, style: str,
             out_path: str | None, db_path: str, as_json: bool) -> None:
    """Compare automatic labels (or a sentiment backend) to manual labels."""
    store = ChatStore(db_path)
    try:
        if candidate == "sac":
            report = evaluation_report(store)
        else:
            report = _sentiment_report(store, backend_config, style)
    except (NoOverlap, SentimentError, ValueError) as exc:
        raise click.ClickException(str(exc))
    finally:
        store.close()
    if out_path:
        _write_report(report, out_path)
    human = []
    for row in _report_rows(report):
        if "error" in row:
            human.append(f"{row['attribute']}: {row['error']}")
        else:
            human.append(
                f"{row['attribute']}: tp={row['tp']} tn={row['tn']} fp={row['fp']} "
                f"fn={row['fn']} dor={row['dor']} f={row['f_score']}"
            )
    _emit(as_json, report, human)


@main.group()
def analyze() -> None:
    """Descriptive analyses over labeled messages."""


@analyze.command("death-delta")
@click.option("--bin-s", "bin_s", default=DEFAULT_BIN_WIDTH_S, show_default=True, type=float,
              help="Histogram bin width in seconds.")
@click.option("--out", "out_path", default=None, help="Write the histogram CSV here.")
@_db_option
@_json_option
def analyze_death_delta(bin_s: float, out_path: str | None, db_path: str, as_json: bool) -> None:
    """Histogram abusive-message timing against the author's first death."""
    store = ChatStore(db_path)
    try:
        histogram = death_delta(store, bin_width=bin_s)
    except (NoLabeledData, ValueError) as exc:
        raise click.ClickException(str(exc))
    finally:
        store.close()
    if out_path:
        with open(out_path, "wb") as fh:
            fh.write(death_delta_csv(histogram))
    _emit(
        as_json,
        {
            "bin_width_s": histogram.bin_width,
            "bins": [{"bin_low_s": low, "count": count} for low, count in histogram.bins],
            "pct_after_death": histogram.pct_after_death,
            "n_messages": histogram.n_messages,
            "no_death_messages": histogram.no_death_messages,
            "out": out_path,
        },
        [
            f"{histogram.n_messages} abusive message(s) by authors who died; "
            f"{histogram.pct_after_death:.1%} after the first death "
            f"({histogram.no_death_messages} by authors who never died)"
        ]
        + [f"  [{low:>8.1f}s, +{histogram.bin_width:.0f}s): {count}"
           for low, count in histogram.bins],
    )


@analyze.command("xp-rate")
@click.option("--bucket", default=DEFAULT_XP_BUCKET, show_default=True,
              type=click.IntRange(min=1), help="Experience bucket width.")
@click.option("--out", "out_path", default=None, help="Write the rate table CSV here.")
@_db_option
@_json_option
def analyze_xp_rate(bucket: int, out_path: str | None, db_path: str, as_json: bool) -> None:
    """Abusive messages per distinct player, bucketed by experience."""
    store = ChatStore(db_path)
    try:
        table = experience_rates(store, bucket_width=bucket)
    except (NoLabeledData, ValueError) as exc:
        raise click.ClickException(str(exc))
    finally:
        store.close()
    if out_path:
        with open(out_path, "wb") as fh:
            fh.write(experience_rates_csv(table))
    _emit(
        as_json,
        {
            "bucket_width": table.bucket_width,
            "rows": [
                {"bucket_low_xp": row.bucket_low, "abusive": row.abusive_count,
                 "players": row.player_count, "rate": row.rate}
                for row in table.rows
            ],
            "skipped_messages": table.skipped_messages,
            "out": out_path,
        },
        [f"{len(table.rows)} bucket(s), {table.skipped_messages} message(s) without a snapshot"]
        + [f"  {row.bucket_low:>9}: {row.abusive_count} abusive / {row.player_count} "
           f"player(s) = {row.rate:.3f}" for row in table.rows],
    )


@main.command()
@click.option("--format", "fmt", type=click.Choice(EXPORT_FORMATS), default="csv",
              show_default=True)
@click.option("--out", "out_path", required=True, help="Destination file.")
@_db_option
@_json_option
def export(fmt: str, out_path: str, db_path: str, as_json: bool) -> None:
    """Write the anonymized labeled corpus to a file."""
    store = ChatStore(db_path)
    try:
        size = store.export_to_path(out_path, fmt)
    except (ExportIO, ValueError) as exc:
        raise click.ClickException(str(exc))
    finally:
        store.close()
    _emit(
        as_json,
        {"path": out_path, "bytes": size, "format": fmt},
        [f"wrote {size} byte(s) of {fmt} to {out_path}"],
    )


@main.command()
@click.option("--bind", "bind_addr", envvar="BIND_ADDR", default=DEFAULT_BIND_ADDR,
              show_default=True, help="host:port to listen on (env: BIND_ADDR).")
@click.option("--ui-dir", default=None, type=click.Path(file_okay=False),
              help="Directory with the built annotation UI to serve at /.")
@_db_option
def serve(bind_addr: str, ui_dir: str | None, db_path: str) -> None:
    """Run the annotation HTTP service."""
    try:
        parse_bind_addr(bind_addr)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    store = ChatStore(db_path)
    try:
        serve_forever(store, bind_addr, ui_dir=ui_dir)
    finally:
        store.close()


if __name__ == "__main__":
    main()
