import csv
import json

import numpy as np
import pytest

from scquery.errors import InvalidInput, InvalidParams
from scquery.harness import (
    RESULT_FIELDS,
    ExperimentConfig,
    emit_results,
    gram_error,
    ingest_labels,
    plot_histogram,
    plot_sweep,
    replay,
    results_csv,
    run_sweep,
    run_trial,
    summarize,
    write_count_table,
    write_genre_corpus,
)
from scquery.model import gram

SMOKE = dict(n=300, k=6, delta=2, p=0.5, q=0.0, sigma=1.0, s_size=120)


def test_config_from_yaml_and_json(tmp_path):
    y = tmp_path / "c.yaml"
    y.write_text("scenario: quantized-uniform\nn: [200, 300]\nk: 6\nq: [0.0, 0.1]\ntrials: 2\nseed: 4\n")
    c = ExperimentConfig.from_file(y)
    assert c.n == [200, 300] and c.k == [6] and c.trials == 2
    assert len(c.grid()) == 4
    assert c.grid()[1]["q"] == 0.1
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"scenario": "direct-uniform", "n": 100}))
    assert ExperimentConfig.from_file(j).n == [100]


def test_config_rejections():
    with pytest.raises(InvalidParams):
        ExperimentConfig.from_mapping({"scenario": "direct-uniform", "colour": 1})
    with pytest.raises(InvalidParams):
        ExperimentConfig(scenario="nope")
    with pytest.raises(InvalidParams):
        ExperimentConfig(scenario="direct-uniform", n=[])
    with pytest.raises(InvalidParams):
        ExperimentConfig(scenario="direct-uniform", trials=0)


def test_gram_error():
    G = np.array([[2, 1, 0], [1, 2, 1], [0, 1, 2]])
    assert gram_error(G, G) == 0
    H = G.copy()
    H[0, 2] = H[2, 0] = 1
    assert gram_error(H, G) == 2
    H[1, 1] = 7
    assert gram_error(H, G) == 2
    with pytest.raises(InvalidInput):
        gram_error(G, np.eye(2))


def test_smoke_trial_matches_ledger():
    r = run_trial("quantized-uniform", SMOKE, 0, 0, 0)
    assert r.queries == r.queries_expected == 120 * 119 // 2 + 120 * 180
    assert r.success == (r.gram_error == 0)


@pytest.mark.parametrize(
    "scenario",
    ["direct-disjoint", "direct-uniform", "direct-iid", "quantized-iid", "unknown-q", "dithered", "worstcase"],
)
def test_every_scenario_produces_a_record(scenario):
    point = dict(SMOKE, s_size="auto", k=4, delta=2)
    r = run_trial(scenario, point, 1, 0, 0)
    assert r.scenario == scenario
    assert r.success == (r.failure == "" and r.gram_error == 0)
    if r.queries_expected is not None:
        assert r.queries == r.queries_expected


def test_sweep_is_reproducible_and_order_stable():
    cfg = ExperimentConfig(scenario="quantized-uniform", n=[200], k=[6], q=[0.0, 0.1], s_size=[100], trials=2, seed=3)
    a = results_csv(run_sweep(cfg))
    b = results_csv(run_sweep(cfg))
    cfg.workers = 2
    c = results_csv(run_sweep(cfg))
    assert a == b == c
    rows = list(csv.DictReader(a.splitlines()))
    assert [(r["point"], r["trial"]) for r in rows] == [("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")]
    assert "wall_time" not in rows[0]


def test_emission_formats(tmp_path):
    recs = [run_trial("direct-uniform", dict(SMOKE, s_size="auto"), 0, 0, 0)]
    text = emit_results(recs, tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == text
    assert text.splitlines()[0].split(",") == [f for f in RESULT_FIELDS if f != "wall_time"]
    data = json.loads(emit_results(recs, None, "json", timing=True))
    assert data[0]["scenario"] == "direct-uniform" and "wall_time" in data[0]
    with pytest.raises(InvalidParams):
        emit_results(recs, None, "xml")
    s = summarize(recs)
    assert s["trials"] == 1 and s["successes"] == 1


def test_count_table(tmp_path):
    rec, ctx, result, _ = run_trial("quantized-uniform", dict(SMOKE, n=100, s_size=60), 0, 0, 0, keep=True)
    path = tmp_path / "counts.csv"
    write_count_table(result, gram(ctx.truth), path)
    rows = list(csv.DictReader(path.open()))
    assert list(rows[0]) == ["i", "j", "count", "true_ell", "inferred_ell"]
    assert len(rows) == 60 * 59 // 2 + 60 * 40


def test_svg_output(tmp_path):
    recs = list(run_sweep(ExperimentConfig(scenario="direct-uniform", n=[100], s_size=[20, 40], trials=1)))
    plot_sweep(recs, "s_size", "gram_error", tmp_path / "a.svg")
    plot_histogram(np.arange(50), tmp_path / "b.svg")
    for name in ("a.svg", "b.svg"):
        assert "<svg" in (tmp_path / name).read_text()


def test_replay_reproduces_trial(tmp_path):
    rec, ctx, result, _ = run_trial("quantized-uniform", SMOKE, 5, 0, 0, keep=True, log_dir=str(tmp_path))
    summary, again, _ = replay(tmp_path / "trial-0-0.log", "quantized-uniform", SMOKE, 5, 0, 0, truth=ctx.truth)
    assert np.array_equal(again.similarity, result.similarity)
    assert summary["queries"] == rec.queries
    assert summary["gram_error"] == rec.gram_error


def _write(path, rows, header="element_id,label"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


def test_ingest_toy_file(tmp_path):
    rows = ["1,drama", "1,comedy", "2,drama", "3,comedy", "4,horror", "5,horror", "5,drama", "6,comedy",
            "7,drama", "7,comedy", "7,horror"]
    truth, stats = ingest_labels(_write(tmp_path / "m.csv", rows), 2)
    assert truth.entries.shape == (6, 3)
    assert stats["labels"] == ["comedy", "drama", "horror"]
    assert stats["elements"] == ["1", "2", "3", "4", "5", "6"]
    assert stats["exclusive"] == {"comedy": 2, "drama": 1, "horror": 1}
    assert stats["alpha"] == pytest.approx(1 / 6)
    assert "warning" not in stats
    only = ingest_labels(_write(tmp_path / "m.csv", rows), 2, labels=["drama"])[0]
    assert only.entries.shape == (4, 1)


def test_ingest_zero_separation_warns(tmp_path):
    rows = ["a,x", "a,z", "b,y", "b,z", "c,x", "d,y"]
    _, stats = ingest_labels(_write(tmp_path / "m.csv", rows), 2)
    assert stats["alpha"] == 0 and "warning" in stats


def test_ingest_errors(tmp_path):
    with pytest.raises(InvalidInput):
        ingest_labels(_write(tmp_path / "a.csv", ["1,x"], header="id,genre"), 2)
    with pytest.raises(InvalidInput):
        ingest_labels(_write(tmp_path / "b.csv", ["1,x,y"]), 2)
    with pytest.raises(InvalidInput):
        ingest_labels(_write(tmp_path / "c.csv", ["1,x", "1,y", "1,z"]), 2)


def test_genre_corpus_round_trip(tmp_path):
    path = tmp_path / "genres.csv"
    planted = write_genre_corpus(path, n=800, k=4, alpha=0.02, seed=2)
    truth, stats = ingest_labels(path, 2)
    assert np.array_equal(truth.entries, planted.entries)
    assert stats["alpha"] > 0.02


def test_dataset_sweep_uses_fixed_truth(tmp_path):
    path = tmp_path / "genres.csv"
    write_genre_corpus(path, n=600, k=4, alpha=0.03, seed=1)
    cfg = ExperimentConfig(scenario="worstcase", n=[600], k=[4], delta=[2], s_size=[300], trials=2,
                           dataset=str(path))
    recs = list(run_sweep(cfg))
    assert all(r.n == 600 and r.k == 4 for r in recs)
    assert all(r.success for r in recs)
