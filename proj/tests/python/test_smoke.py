import json
import os
from pathlib import Path

import pytest

import hyperscene as hs

FIXTURES = Path(os.environ.get("HYPERSCENE_FIXTURES", Path(__file__).resolve().parents[1] / "fixtures"))
SCENE = FIXTURES / "scenes" / "kitchen_small.json"
GOLDEN = FIXTURES / "golden"
CORPUS = FIXTURES / "eval_corpus"


def build_enriched():
    scene = hs.load_scene(SCENE)
    return hs.enrich(hs.build_hypergraph(scene))


def test_scene_to_hypergraph():
    scene = hs.load_scene(SCENE)
    assert scene.num_objects == 6
    graph = hs.build_hypergraph(scene)
    assert graph.areas == [[0, 1, 2], [3, 4], [5]]
    inc = graph.incidence()
    assert len(inc) == 6 and all(sum(row) == 1 for row in inc)


def test_enriched_matches_golden():
    enriched = build_enriched()
    assert enriched.to_json() == (GOLDEN / "kitchen_small.graph.json").read_text()
    assert hs.export_xml(enriched) == (GOLDEN / "kitchen_small.graph.xml").read_text()
    assert hs.assemble_prompt(enriched) == (GOLDEN / "kitchen_small.prompt.txt").read_text()


def test_replay_transcript():
    graph = hs.build_hypergraph(hs.load_scene(SCENE))
    enriched = hs.enrich(graph, annotator="replay", transcript=str(FIXTURES / "kitchen_small.transcript.jsonl"))
    assert enriched.area_labels == ["Kitchen Area", "Lounge Area", "Lounge Area"]


def test_train_is_deterministic():
    enriched = build_enriched()
    a = hs.train(enriched, steps=20, seed=0)
    b = hs.train(enriched, steps=20, seed=0)
    assert a["params"] == b["params"]
    assert len(a["trace"]) == 20
    assert a["trace_csv"] == (GOLDEN / "kitchen_small.trace.csv").read_text()


def test_train_rejects_bad_option():
    with pytest.raises(ValueError):
        hs.train(build_enriched(), steps=1, tau_n=0.0)
    with pytest.raises(ValueError):
        hs.train(build_enriched(), bogus=1)


def test_grad_check():
    report = hs.grad_check(trials=5)
    assert report["max_relative_error"] < 1e-5


def test_evaluate_plan_corpus():
    s2 = [(CORPUS / d / "s2.json").read_text() for d in ("plans", "envs", "golds")]
    r = hs.evaluate_plan(*s2)
    assert r == {"executability": 0.5, "lcs": pytest.approx(0.6), "correct": False}


def test_lcs_score():
    plan = json.dumps({"plan": [{"verb": "GOTO", "args": ["table"]}, {"verb": "PICKUP", "args": ["apple"]}]})
    gold = json.dumps({"plan": [{"verb": "GOTO", "args": ["table"]}]})
    assert hs.lcs_score(plan, gold) == pytest.approx(0.5)


def test_errors_map_to_python():
    with pytest.raises(OSError):
        hs.load_scene(FIXTURES / "does_not_exist.json")
    with pytest.raises(ValueError, match="duplicate id"):
        hs.load_scene(FIXTURES / "scenes" / "duplicate_id.json")
