import json

import numpy as np
import pytest

from semtrack.ingest import dump_frame_records
from semtrack.embed import tokenize
from synth import planted_stream

_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): exit criterion, reported in summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _ACCEPTANCE.append((marker.args[0], report.outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, duration in _ACCEPTANCE:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  ({duration:.2f}s)")


@pytest.fixture
def cli_files(tmp_path):
    """Planted corpus written out in every input format the CLI reads."""
    frames, emb, queries = planted_stream(seed=3)
    paths = {name: tmp_path / name for name in
             ("frames.jsonl", "sentences.jsonl", "words.txt", "gt.json")}
    with open(paths["frames.jsonl"], "w") as fh:
        dump_frame_records(frames, fh)
    with open(paths["sentences.jsonl"], "w") as fh:
        for caption, vec in emb.sidecar.entries.items():
            fh.write(json.dumps({"caption": caption, "vec": vec.tolist()}) + "\n")
    rng = np.random.default_rng(0)
    vocab = sorted({tok for caption in emb.sidecar.entries for tok in tokenize(caption)})
    with open(paths["words.txt"], "w") as fh:
        fh.write(f"{len(vocab)} 8\n")
        for tok in vocab:
            fh.write(tok + " " + " ".join(f"{v:.6f}" for v in rng.normal(size=8)) + "\n")
    doc = {"queries": [{"id": q.query_id, "text": q.query_text,
                        "segments": [{"start": s.start_frame, "end": s.end_frame}
                                     for s in q.segments]} for q in queries]}
    paths["gt.json"].write_text(json.dumps(doc))
    return paths


MIXED_GTS = [(0, 34), (60, 79), (100, 129)]
MIXED_PROPOSALS = [(15, 49), (75, 94), (200, 210), (110, 139)]


@pytest.fixture
def mixed_files(tmp_path):
    """Three ground truths, four proposals with IoUs 0.4, 1/7, 0 and 0.5."""
    tracks = {"config": {}, "tracks": [
        {"id": i, "rep_caption": "a man riding a horse", "rep_vec": [1.0, 0.0],
         "start": s, "end": e,
         "obs": [{"frame": s, "x": 0, "y": 0, "w": 1, "h": 1,
                  "caption": "a man riding a horse", "sim": 1.0, "kind": "matched"}]}
        for i, (s, e) in enumerate(MIXED_PROPOSALS)]}
    paths = {"tracks": tmp_path / "mixed_tracks.json", "gt": tmp_path / "mixed_gt.json",
             "sentences": tmp_path / "mixed_sentences.jsonl"}
    paths["tracks"].write_text(json.dumps(tracks))
    paths["gt"].write_text(json.dumps({"queries": [
        {"id": "mixed", "text": "a man riding a horse",
         "segments": [{"start": s, "end": e} for s, e in MIXED_GTS]}]}))
    paths["sentences"].write_text(json.dumps({"caption": "a man riding a horse",
                                              "vec": [1.0, 0.0]}) + "\n")
    return paths
