"""End-to-end checks for the command-line interface."""

import csv
import json
import select
import subprocess
import sys

import pytest
from click.testing import CliRunner

from chatmine.cli import main
from chatmine.harvest import ReplayFixtureServer, generate_corpus
from chatmine.store import ChatStore

from store_helpers import FixtureChat, FixtureDeath, FixturePlayer, ingest_match, labels

ANN = FixturePlayer(500123401, "AnnTheTank", team=1)
BOB = FixturePlayer(500123402, "Bobcat", team=2)


def run(*args, env=None, expect=0):
    result = CliRunner().invoke(main, args, env=env)
    assert result.exit_code == expect, f"exit {result.exit_code}: {result.output}"
    return result


def run_json(*args, env=None, expect=0):
    result = run(*args, "--json", env=env, expect=expect)
    return json.loads(result.output.splitlines()[0])


@pytest.fixture
def seeded_db(tmp_path):
    path = str(tmp_path / "cli.db")
    store = ChatStore(path)
    ingest_match(
        store, "m-1", [ANN, BOB],
        chats=[FixtureChat(10.0, ANN.account_id, "you stupid noob"),
               FixtureChat(20.0, BOB.account_id, "gg wp")],
    )
    store.close()
    return path


def test_classify_reports_per_attribute_counts(seeded_db):
    payload = run_json("classify", "--db", seeded_db)
    assert payload == {
        "messages": 2,
        "mode": "boundary",
        "true_counts": {
            "is_abusive": 0, "is_positive": 1, "is_negative": 1,
            "has_bad_language": 0, "is_racist": 0, "noob_related": 1,
            "specific_target": 0, "filtered_text": 0,
        },
    }


def test_classify_honors_db_path_env_var(seeded_db):
    payload = run_json("classify", env={"DB_PATH": seeded_db})
    assert payload["messages"] == 2


def test_classify_with_custom_lexicon_dir(seeded_db, tmp_path):
    lexicon_dir = tmp_path / "lexicons"
    lexicon_dir.mkdir()
    terms = {"swears": "zort", "racist": "zorg", "noob": "zorp",
             "positive": "zorq", "negative": "stupid"}
    for role, term in terms.items():
        (lexicon_dir / f"{role}.txt").write_text(term + "\n", encoding="utf-8")
    payload = run_json("classify", "--db", seeded_db, "--lexicon-dir", str(lexicon_dir))
    counts = payload["true_counts"]
    assert counts["is_negative"] == 1
    assert counts["noob_related"] == 0
    assert counts["is_positive"] == 0


def test_classify_rejects_empty_lexicon(seeded_db, tmp_path):
    lexicon_dir = tmp_path / "lexicons"
    lexicon_dir.mkdir()
    for role in ("swears", "racist", "noob", "positive", "negative"):
        (lexicon_dir / f"{role}.txt").write_text("# nothing here\n", encoding="utf-8")
    result = CliRunner().invoke(
        main, ("classify", "--db", seeded_db, "--lexicon-dir", str(lexicon_dir))
    )
    assert result.exit_code != 0
    assert "no terms" in result.output


def test_score_recomputes_from_auto_labels(seeded_db):
    run("classify", "--db", seeded_db)
    payload = run_json("score", "--db", seeded_db, "--labels", "auto")
    assert payload == {"rescored_matches": 1, "labels": "auto"}
    store = ChatStore(seeded_db)
    try:
        by_text = {row.text: row.cs for row in store.iter_messages("m-1")}
    finally:
        store.close()
    assert by_text == {"you stupid noob": 2, "gg wp": -1}


def test_export_writes_anonymized_csv(seeded_db, tmp_path):
    out = tmp_path / "corpus.csv"
    payload = run_json("export", "--db", seeded_db, "--format", "csv", "--out", str(out))
    content = out.read_text(encoding="utf-8")
    assert payload == {"path": str(out), "bytes": len(content.encode("utf-8")), "format": "csv"}
    header = content.splitlines()[0]
    assert header == (
        "match_id,player_guid,clock,text,is_abusive,is_positive,is_negative,"
        "has_bad_language,is_racist,noob_related,specific_target,filtered_text,cs,pcs"
    )
    assert "AnnTheTank" not in content
    assert "Bobcat" not in content


def test_export_to_missing_directory_fails(seeded_db, tmp_path):
    result = CliRunner().invoke(
        main, ("export", "--db", seeded_db, "--out", str(tmp_path / "nope" / "x.csv"))
    )
    assert result.exit_code != 0
    assert "Error" in result.output


def test_evaluate_sac_reports_confusion_cells(seeded_db, tmp_path):
    run("classify", "--db", seeded_db)
    run("score", "--db", seeded_db)
    store = ChatStore(seeded_db)
    try:
        store.set_manual_labels("m-1:0", labels(is_negative=True), annotator_id="t")
        store.set_manual_labels("m-1:1", labels(is_negative=False), annotator_id="t")
    finally:
        store.close()
    json_out = tmp_path / "report.json"
    csv_out = tmp_path / "report.csv"
    payload = run_json("evaluate", "--db", seeded_db, "--out", str(json_out))
    entry = payload["attributes"]["is_negative"]
    assert entry["cells"] == {"tp": 1, "tn": 1, "fp": 0, "fn": 0}
    assert payload["cs_vs_pcs"]["cells"] == {"tp": 1, "tn": 1, "fp": 0, "fn": 0}
    assert json.loads(json_out.read_text(encoding="utf-8")) == payload

    run("evaluate", "--db", seeded_db, "--out", str(csv_out))
    with open(csv_out, newline="", encoding="utf-8") as fh:
        rows = {row["attribute"]: row for row in csv.DictReader(fh)}
    assert rows["is_negative"]["tp"] == "1"
    assert rows["cs_vs_pcs"]["tn"] == "1"


def test_evaluate_sentiment_against_manual_abuse(tmp_path):
    db = str(tmp_path / "senti.db")
    store = ChatStore(db)
    rows = ingest_match(
        store, "m-1", [ANN, BOB],
        chats=[FixtureChat(10.0, ANN.account_id, "you are a useless idiot"),
               FixtureChat(20.0, BOB.account_id, "nice game thanks"),
               FixtureChat(30.0, ANN.account_id, "nice"),
               FixtureChat(40.0, BOB.account_id, "the map is big")],
    )
    manual = {rows[0].message_id: True, rows[1].message_id: False,
              rows[2].message_id: True, rows[3].message_id: False}
    for message_id, value in manual.items():
        store.set_manual_labels(message_id, labels(is_abusive=value), annotator_id="t")
    store.close()
    payload = run_json("evaluate", "--db", db, "--candidate", "sentiment")
    entry = payload["attributes"]["is_abusive"]
    assert entry["cells"] == {"tp": 1, "tn": 1, "fp": 0, "fn": 1}
    assert entry["excluded"] == 1
    assert entry["dor"] is None and entry["dor_error"] == "zero-denominator"
    assert entry["f_score"] == pytest.approx(2 / 3)


def test_analyze_death_delta_outputs_histogram(tmp_path):
    db = str(tmp_path / "delta.db")
    store = ChatStore(db)
    rows = ingest_match(
        store, "m-1", [ANN, BOB],
        chats=[FixtureChat(50.0, ANN.account_id, "early rage"),
               FixtureChat(130.0, ANN.account_id, "late rage")],
        deaths=[FixtureDeath(100.0, ANN.account_id)],
    )
    for row in rows:
        store.set_manual_labels(row.message_id, labels(is_abusive=True), annotator_id="t")
    store.close()
    out = tmp_path / "hist.csv"
    payload = run_json("analyze", "death-delta", "--db", db, "--bin-s", "30", "--out", str(out))
    assert payload["pct_after_death"] == pytest.approx(0.5)
    assert payload["bins"] == [
        {"bin_low_s": -60.0, "count": 1},
        {"bin_low_s": 30.0, "count": 1},
    ]
    assert out.read_text(encoding="utf-8").splitlines() == [
        "bin_low_s,count", "-60.0,1", "30.0,1",
    ]


def test_analyze_death_delta_without_labels_fails(tmp_path):
    db = str(tmp_path / "empty.db")
    ChatStore(db).close()
    result = CliRunner().invoke(main, ("analyze", "death-delta", "--db", db))
    assert result.exit_code != 0
    assert "Error" in result.output


def test_analyze_xp_rate_outputs_rate_table(tmp_path):
    db = str(tmp_path / "xp.db")
    store = ChatStore(db)
    rows = ingest_match(
        store, "m-1", [ANN, BOB],
        chats=[FixtureChat(10.0, ANN.account_id, "seething")],
    )
    store.set_manual_labels(rows[0].message_id, labels(is_abusive=True), annotator_id="t")
    store.add_snapshot(ANN.account_id, battles=500, experience_total=1_200_000,
                       win_rate=0.5, match_id="m-1")
    store.close()
    out = tmp_path / "rates.csv"
    payload = run_json("analyze", "xp-rate", "--db", db, "--out", str(out))
    assert payload["rows"] == [
        {"bucket_low_xp": 1_000_000, "abusive": 1, "players": 1, "rate": 1.0}
    ]
    assert payload["skipped_messages"] == 0
    assert out.read_text(encoding="utf-8").splitlines() == [
        "bucket_low_xp,abusive,players,rate", "1000000,1,1,1.0",
    ]


def test_harvest_ingests_fixture_corpus_and_is_idempotent(tmp_path):
    db = str(tmp_path / "harvest.db")
    corpus = generate_corpus(seed=5, pages=2, links_per_page=6)
    with ReplayFixtureServer(corpus) as server:
        args = ("harvest", "--base-url", server.base_url, "--pages", "1..2",
                "--delay-ms", "0", "--parallel", "8", "--db", db)
        payload = run_json(*args)
        assert payload == {"aborted": False, "decoded": 12, "downloaded": 12,
                           "failed": 0, "links_seen": 12}
        again = run_json(*args)
        assert again == {"aborted": False, "decoded": 0, "downloaded": 0,
                         "failed": 0, "links_seen": 0}
    store = ChatStore(db)
    try:
        assert store.message_count() > 0
        assert len(store.iter_snapshots()) > 0
    finally:
        store.close()


def test_harvest_exits_nonzero_when_aborted(tmp_path):
    db = str(tmp_path / "abort.db")
    corpus = generate_corpus(seed=9, pages=1, links_per_page=25)
    with ReplayFixtureServer(corpus) as server:
        server.state.broken_replays = {name: 404 for name in corpus.all_names()}
        payload = run_json(
            "harvest", "--base-url", server.base_url, "--pages", "1..1",
            "--delay-ms", "0", "--parallel", "4", "--db", db,
            expect=1,
        )
    assert payload["aborted"] is True
    assert payload["downloaded"] == 0
    assert payload["failed"] == payload["links_seen"] == 20


def test_harvest_rejects_bad_page_syntax(tmp_path):
    result = CliRunner().invoke(
        main, ("harvest", "--base-url", "http://127.0.0.1:1", "--pages", "nope",
               "--db", str(tmp_path / "x.db"))
    )
    assert result.exit_code == 2
    assert "A..B" in result.output


def test_harvest_rejects_bad_replay_key(tmp_path):
    base = ("harvest", "--base-url", "http://127.0.0.1:1", "--db", str(tmp_path / "x.db"))
    not_hex = CliRunner().invoke(main, base, env={"REPLAY_KEY_HEX": "zz"})
    assert not_hex.exit_code == 2
    assert "not valid hex" in not_hex.output
    wrong_len = CliRunner().invoke(main, base, env={"REPLAY_KEY_HEX": "00" * 8})
    assert wrong_len.exit_code == 2
    assert "16 bytes" in wrong_len.output


def test_serve_rejects_bad_bind_address(tmp_path):
    result = CliRunner().invoke(
        main, ("serve", "--bind", "nonsense", "--db", str(tmp_path / "x.db"))
    )
    assert result.exit_code == 2
    assert "bind" in result.output.lower()


def _read_line_with_deadline(stream, timeout_s=20.0):
    ready, _, _ = select.select([stream], [], [], timeout_s)
    assert ready, "fixture server printed nothing before the deadline"
    return stream.readline()


def test_fixture_serve_subprocess_smoke(tmp_path):
    manifest = tmp_path / "manifest.json"
    manifest.write_text(
        json.dumps({"seed": 3, "pages": 1, "links_per_page": 4}), encoding="utf-8"
    )
    proc = subprocess.Popen(
        [sys.executable, "-m", "chatmine.cli", "fixture-serve",
         "--manifest", str(manifest), "--json"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    try:
        line = _read_line_with_deadline(proc.stdout)
        payload = json.loads(line)
        assert payload["pages"] == 1 and payload["links"] == 4
        import urllib.request

        with urllib.request.urlopen(payload["base_url"] + "/listing?page=1", timeout=10) as resp:
            body = resp.read().decode("utf-8")
        assert body.count(".wotreplay<") == 4
    finally:
        proc.terminate()
        proc.wait(timeout=10)
