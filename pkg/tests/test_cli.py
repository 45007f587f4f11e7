import json
import re

import pytest

from tsalign.cli import main


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    cfg = root / "desk.ini"
    cfg.write_text("[corpus]\nuts = 20\nmts_shape = 10\nmts_local = 10\nlength_max = 256\n")
    out = root / "out"
    assert main(["generate", "--config", str(cfg), "--out", str(out)]) == 0
    return root, cfg, out


def test_taxonomy(capsys):
    assert main(["taxonomy", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["counts"] == {"trend": 4, "season": 7, "noise": 3, "local": 19}
    assert data["catalog_size"] == 567


def test_generate_counts_and_rerun(desk, tmp_path):
    root, cfg, out = desk
    manifest = json.loads((out / "alignment.manifest.json").read_text())
    assert manifest["total"] == 40
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "alignment.jsonl").read_bytes() == (out / "alignment.jsonl").read_bytes()


def test_generate_bad_key(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[corpus]\nutz = 3\n")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "corpus.utz" in capsys.readouterr().err


def test_eval_oracle_and_tools(desk):
    root, cfg, out = desk
    corpus = str(out / "alignment.jsonl")
    assert main(["eval", "--corpus", corpus, "--oracle", "--out", str(out)]) == 0
    csv_text = (out / "report-oracle.csv").read_text()
    assert re.search(r"^Categorical F1,\d+,1\.000000$", csv_text, re.MULTILINE)
    scores = {}
    for acc in ("0.9", "1.0"):
        assert main(["eval", "--corpus", corpus, "--tools", f"acc={acc}", "--seed", "3", "--out", str(out)]) == 0
        rep = json.loads((out / f"report-tools-{float(acc):g}.json").read_text())
        scores[acc] = rep["summary"]["categorical_f1"]
    assert scores["0.9"] <= scores["1.0"] == 1.0
    assert main(["eval", "--corpus", corpus, "--tools", "acc=2", "--out", str(out)]) == 2


def test_eval_all_fail_exit_6(desk, monkeypatch):
    root, cfg, out = desk
    corpus = str(out / "alignment.jsonl")
    endpoint = root / "ep.ini"
    endpoint.write_text("[generator]\nurl = http://127.0.0.1:9/v1/chat\nmodel = m\ntimeout = 0.5\n"
                        "[eval]\nin_flight_limit = 8\n")
    assert main(["eval", "--config", str(endpoint), "--corpus", corpus, "--out", str(out)]) == 6


def test_evolve_mock_deterministic(desk, tmp_path):
    root, cfg, out = desk
    corpus = str(out / "alignment.jsonl")
    args = ["evolve", "--corpus", corpus, "--mock", "--limit", "10", "--rounds", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "evolved.jsonl").read_bytes()
    assert a and a == (tmp_path / "b" / "evolved.jsonl").read_bytes()


def test_evolve_errors(desk, tmp_path):
    root, cfg, out = desk
    assert main(["evolve", "--corpus", str(tmp_path / "missing.jsonl"), "--mock"]) == 3
    assert main(["evolve", "--corpus", str(out / "alignment.jsonl"), "--out", str(tmp_path)]) == 5


def test_plot(desk, tmp_path):
    root, cfg, out = desk
    corpus = out / "alignment.jsonl"
    records = [json.loads(l) for l in corpus.read_text().splitlines()]
    rec = next(r for r in records if any(
        f["kind"] == "upward spike" for s in r["series"] for f in s["pool"]["fluctuations"]))
    assert main(["plot", "--corpus", str(corpus), "--id", rec["id"], "--out", str(tmp_path)]) == 0
    svg = (tmp_path / f"{rec['id']}.svg").read_text()
    assert svg.count("<polyline") == len(rec["series"])
    spikes = [f["position"] for s in rec["series"] for f in s["pool"]["fluctuations"] if f["kind"] == "upward spike"]
    shaded = [(int(a), int(b)) for a, b in re.findall(r'data-start="(\d+)" data-end="(\d+)"', svg)]
    assert all(any(a <= pos < b for a, b in shaded) for pos in spikes)
    assert (tmp_path / f"{rec['id']}-0.csv").read_text().startswith("t,value\n")
    assert main(["plot", "--corpus", str(corpus), "--id", "nope", "--out", str(tmp_path)]) == 3
