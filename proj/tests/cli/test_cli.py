import json
import os
import subprocess
import time
import urllib.request

import pytest

BIN = os.environ.get("IDTE_BIN", "build/idte")


def run(*args, check=None):
    proc = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True, timeout=600)
    if check is not None:
        assert proc.returncode == check, proc.stderr
    return proc


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "corpus.jsonl"
    run("--seed", 5, "gen-corpus", "--out", path, "--n", 120, "--obfuscation-rate", 0.3, check=0)
    return path


def test_help_exits_zero():
    proc = run("--help", check=0)
    assert "gen-corpus" in proc.stdout and "serve" in proc.stdout


def test_usage_errors_exit_two(tmp_path):
    assert run("bogus-command").returncode == 2
    assert run("gen-corpus", "--out", tmp_path / "x.jsonl", "--no-such-flag").returncode == 2
    assert run("train").returncode == 2


def test_gen_corpus_is_reproducible(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run("--seed", 9, "gen-corpus", "--out", a, "--n", 50, check=0)
    run("--seed", 9, "gen-corpus", "--out", b, "--n", 50, check=0)
    assert a.read_bytes() == b.read_bytes()
    rows = [json.loads(line) for line in a.read_text().splitlines()]
    assert len(rows) == 50
    assert all(len(r["labels"]) == 10 for r in rows)
    assert all(r["labels"][0] == int(not any(r["labels"][1:])) for r in rows)


def test_train_then_eval(corpus, tmp_path):
    model = tmp_path / "model.bin"
    report = tmp_path / "report.json"
    history = tmp_path / "history.json"
    run("train", "--data", corpus, "--out", model, "--epochs", 2, "--lr", 1e-3, "--d-model", 16, "--heads", 2,
        "--layers", 1, "--ff-dim", 16, "--max-seq", 32, "--history", history, check=0)
    assert model.read_bytes()[:5] == b"IDTE\x01"
    assert len(json.loads(history.read_text())["epochs"]) == 2
    run("eval", "--data", corpus, "--model", model, "--report", report, check=0)
    rep = json.loads(report.read_text())
    for key in ("subset_accuracy", "hamming_loss", "micro_precision", "micro_recall", "micro_f1",
                "macro_precision", "macro_recall", "macro_f1"):
        assert 0.0 <= rep[key] <= 1.0
    assert len(rep["labels"]) == 10


def test_eval_missing_model_names_path(corpus, tmp_path):
    missing = tmp_path / "missing.bin"
    proc = run("eval", "--data", corpus, "--model", missing)
    assert proc.returncode == 1
    assert str(missing) in proc.stderr


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 4, "gen-corpus": {"n": 30, "obfuscation_rate": 0.5}}))
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run("--config", cfg, "gen-corpus", "--out", a, check=0)
    run("--config", cfg, "gen-corpus", "--out", b, "--n", 12, check=0)
    assert len(a.read_text().splitlines()) == 30
    assert len(b.read_text().splitlines()) == 12
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"gen-corpus": {"not_a_flag": 1}}))
    assert run("--config", bad, "gen-corpus", "--out", tmp_path / "c.jsonl").returncode == 2


def test_crawl_and_graph(tmp_path):
    platform = tmp_path / "platform.json"
    run("--seed", 2, "gen-platform", "--out", platform, "--users", 300, "--dealers", 30, "--posts", 2000, check=0)
    posts, summary = tmp_path / "posts.jsonl", tmp_path / "summary.json"
    run("crawl-sim", "--platform", platform, "--threshold", 30, "--out", posts, "--summary", summary, check=0)
    s = json.loads(summary.read_text())
    assert s["stop_reason"] in ("threshold", "exhausted", "max_iterations")
    assert s["collected"] == sum(1 for line in posts.read_text().splitlines() if json.loads(line)["kind"] == "post")
    graph = tmp_path / "graph.json"
    run("graph", "--data", posts, "--out", graph, check=0)
    g = json.loads(graph.read_text())
    assert g["nodes"] and {"tag", "degree", "clustering", "betweenness", "community"} <= set(g["nodes"][0])


def test_serve_round_trip(corpus, tmp_path):
    store = tmp_path / "store.jsonl"
    port = 18000 + os.getpid() % 1000
    proc = subprocess.Popen([BIN, "serve", "--items", str(corpus), "--store", str(store), "--port", str(port)],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    try:
        base = f"http://127.0.0.1:{port}"
        for _ in range(100):
            try:
                urllib.request.urlopen(base + "/api/health", timeout=1)
                break
            except OSError:
                time.sleep(0.05)
        item = json.load(urllib.request.urlopen(base + "/api/posts/next?annotator=ann"))
        body = json.dumps({"idte_id": item["id"], "annotator_id": "ann", "hashtag_labels": ["lsd"],
                           "image_labels": [], "comment_labels": []}).encode()
        req = urllib.request.Request(base + "/api/annotations", data=body, headers={"Content-Type": "application/json"})
        resp = urllib.request.urlopen(req)
        assert resp.status == 201
        exported = urllib.request.urlopen(base + "/api/export").read().decode()
        assert json.loads(exported.splitlines()[0])["id"] == item["id"]
    finally:
        proc.terminate()
        proc.wait(timeout=10)
    assert proc.returncode == 0
    out_corpus, out_adj = tmp_path / "export.jsonl", tmp_path / "adj.jsonl"
    run("serve", "--items", corpus, "--store", store, "--export", out_corpus, "--adjudication", out_adj, check=0)
    assert len(out_corpus.read_text().splitlines()) == 1
