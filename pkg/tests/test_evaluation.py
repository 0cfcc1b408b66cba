import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from kgcondense.evaluation import (
    INVALID,
    Artifacts,
    CandidateSet,
    Metrics,
    PredictionRecord,
    ZeroShotLeakError,
    argmax_first,
    check_zero_shot,
    mask_relations,
    micro_prf,
    normalize_relation,
    predict_relation,
    read_predictions,
    score_complex,
    score_distmult,
    score_transe,
    write_metrics,
    write_predictions,
)
from kgcondense.kg import ConfigError, DatasetSplit, Triple

vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=4, max_size=4)


@settings(max_examples=100)
@given(vec, vec, vec)
def test_scorers_match_loops(h, r, t):
    assert abs(score_transe(h, r, t) - oracles.transe_loop(h, r, t)) <= 1e-12 * max(1.0, abs(score_transe(h, r, t)))
    scale = max(1.0, sum(abs(a * b * c) for a, b, c in zip(h, r, t)))
    assert abs(score_distmult(h, r, t) - oracles.distmult_loop(h, r, t)) <= 1e-12 * scale
    assert abs(score_complex(h, r, t) - oracles.complex_loop(h, r, t)) <= 1e-12 * scale * 4


@settings(max_examples=100)
@given(vec, vec, vec)
def test_complex_with_zero_imaginary_is_distmult(h, r, t):
    z = [0.0] * 4
    assert score_complex(h + z, r + z, t + z) == score_distmult(h, r, t)


def test_scorer_errors():
    with pytest.raises(ValueError):
        score_complex([1, 2, 3], [1, 2, 3], [1, 2, 3])
    with pytest.raises(ValueError):
        score_transe([1, 2], [1], [1, 2])


def test_normalization_and_argmax():
    assert normalize_relation("  Capital   Of\n") == "capital_of"
    assert argmax_first([1.0, 3.0, 3.0, 2.0]) == 1


ENTS = ["h", "t"]
RELS = ["r0", "r1", "r2"]


def table_embed(table):
    return lambda text: np.asarray(table[text], dtype=float)


def test_transe_constructed_maximum():
    rng = np.random.default_rng(0)
    hits = 0
    for trial in range(50):
        table = {name: rng.standard_normal(6) for name in ENTS + RELS}
        gold = int(rng.integers(3))
        table["t"] = table["h"] + table[RELS[gold]]
        pred, score = predict_relation((0, 1), CandidateSet((0, 1), [0, 1, 2]), "baseline-transe",
                                       Artifacts(embed=table_embed(table)), ENTS, RELS)
        hits += pred == gold and score == 0.0
    assert hits == 50


def test_candidate_order_does_not_matter_and_ties_go_low():
    table = {"h": [1.0, 0.0], "t": [1.0, 0.0], "r0": [0.0, 1.0], "r1": [0.0, 1.0], "r2": [0.0, -1.0]}
    art = Artifacts(embed=table_embed(table))
    a = predict_relation((0, 1), CandidateSet((0, 1), [2, 1, 0]), "baseline-distmult", art, ENTS, RELS)
    b = predict_relation((0, 1), CandidateSet((0, 1), [0, 1, 2]), "baseline-distmult", art, ENTS, RELS)
    assert a == b and a[0] == 0


def test_single_candidate_short_circuits():
    pred, score = predict_relation((0, 1), CandidateSet((0, 1), [2]), "llm-generation", Artifacts(), ENTS, RELS)
    assert pred == 2 and np.isnan(score)


def test_embedding_similarity_and_scale_invariance():
    rng = np.random.default_rng(1)
    table = {name: rng.standard_normal(5) for name in RELS}
    g = table["r1"] * 3.0 + 0.01
    for factor in (1.0, 7.5):
        scaled = {k: v * factor for k, v in table.items()}
        art = Artifacts(embed=table_embed(scaled), graph_vectors={(0, 1): g})
        pred, _ = predict_relation((0, 1), CandidateSet((0, 1), [0, 1, 2]), "embedding-similarity", art, ENTS, RELS)
        assert pred == 1
    with pytest.raises(ConfigError):
        predict_relation((0, 1), CandidateSet((0, 1), [0, 1]), "embedding-similarity",
                         Artifacts(embed=table_embed(table)), ENTS, RELS)


def test_distmult_argmax_survives_positive_scaling():
    rng = np.random.default_rng(2)
    for _ in range(20):
        table = {name: rng.standard_normal(4) for name in ENTS + RELS}
        base = predict_relation((0, 1), CandidateSet((0, 1), [0, 1, 2]), "baseline-distmult",
                                Artifacts(embed=table_embed(table)), ENTS, RELS)[0]
        scaled = {k: (v * 3.3 if k in RELS else v) for k, v in table.items()}
        assert predict_relation((0, 1), CandidateSet((0, 1), [0, 1, 2]), "baseline-distmult",
                                Artifacts(embed=table_embed(scaled)), ENTS, RELS)[0] == base


def test_transe_argmax_survives_joint_translation():
    rng = np.random.default_rng(3)
    for _ in range(20):
        table = {name: rng.standard_normal(4) for name in ENTS + RELS}
        base = predict_relation((0, 1), CandidateSet((0, 1), [0, 1, 2]), "baseline-transe",
                                Artifacts(embed=table_embed(table)), ENTS, RELS)[0]
        shift = rng.standard_normal(4)
        moved = {k: (v + shift if k in ENTS else v) for k, v in table.items()}
        assert predict_relation((0, 1), CandidateSet((0, 1), [0, 1, 2]), "baseline-transe",
                                Artifacts(embed=table_embed(moved)), ENTS, RELS)[0] == base


def test_generation_matching():
    art = Artifacts(generate=lambda s, t: "  R1 ")
    assert predict_relation((0, 1), CandidateSet((0, 1), [0, 1]), "llm-generation", art, ENTS, RELS)[0] == 1
    art = Artifacts(generate=lambda s, t: "something else")
    assert predict_relation((0, 1), CandidateSet((0, 1), [0, 1]), "llm-generation", art, ENTS, RELS)[0] == INVALID
    with pytest.raises(ConfigError):
        predict_relation((0, 1), CandidateSet((0, 1), [0, 1]), "llm-generation", Artifacts(), ENTS, RELS)
    with pytest.raises(ConfigError):
        predict_relation((0, 1), CandidateSet((0, 1), [0, 1]), "oracle", Artifacts(), ENTS, RELS)
    with pytest.raises(ValueError):
        CandidateSet((0, 1), [])


@settings(max_examples=100)
@given(st.lists(st.sampled_from(["a", "b", "c", None]), min_size=1, max_size=50), st.integers(0, 1000))
def test_micro_scores_are_equal(preds, seed):
    rng = np.random.default_rng(seed)
    recs = [PredictionRecord("h", "t", str(rng.choice(["a", "b", "c"])), p, "x") for p in preds]
    m = micro_prf(recs)
    assert m.precision == m.recall == m.f1 and m.n == len(recs)
    assert m.f1 == sum(r.correct for r in recs) / len(recs)


def test_micro_needs_records():
    with pytest.raises(ValueError):
        micro_prf([])


def test_invalid_generation_counts_wrong():
    recs = [PredictionRecord("h", "t", "a", None, "llm-generation"), PredictionRecord("h", "t", "a", "a", "x")]
    assert micro_prf(recs) == Metrics(0.5, 0.5, 0.5, 2)


def toy_split():
    train = [Triple(f"e{i}", f"r{i % 4}", f"e{i + 1}") for i in range(12)]
    test = [Triple("x", f"r{i}", "y") for i in range(4)]
    return DatasetSplit(train=train, test=test)


def test_mask_fraction_zero_is_identity():
    split = toy_split()
    masked, names = mask_relations(split, 0.0, seed=1)
    assert names == [] and masked.train == split.train


def test_mask_half_removes_two_relations():
    split = toy_split()
    masked, names = mask_relations(split, 0.5, seed=1)
    assert len(names) == 2
    left = {t.relation for t in masked.train}
    assert left == {"r0", "r1", "r2", "r3"} - set(names)
    again, names2 = mask_relations(split, 0.5, seed=1)
    assert names2 == names and again.train == masked.train
    with pytest.raises(ValueError):
        mask_relations(split, 1.0, seed=1)


@pytest.mark.parametrize("fraction,expected", [(0.3, 2), (0.25, 1), (0.1, 1), (0.75, 3)])
def test_mask_count_is_ceiling(fraction, expected):
    assert len(mask_relations(toy_split(), fraction, seed=0)[1]) == expected


def test_zero_shot_check():
    check_zero_shot(["a", "b"], ["c"])
    with pytest.raises(ZeroShotLeakError, match="b"):
        check_zero_shot(["a", "b"], ["b", "c"])


def test_prediction_and_metric_files_roundtrip(tmp_path):
    recs = [PredictionRecord("h, 1", "t", "a", None, "llm-generation"),
            PredictionRecord("h", "t", "a", "a", "baseline-transe", -0.125)]
    write_predictions(recs, tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "head,tail,gold,predicted,source,score"
    back = read_predictions(tmp_path / "p.csv")
    assert back[1] == recs[1] and back[0].predicted is None and back[0].head == "h, 1"
    write_metrics(micro_prf(recs), tmp_path / "m.json")
    import json

    assert json.loads((tmp_path / "m.json").read_text()) == {"precision": 0.5, "recall": 0.5, "f1": 0.5, "n": 2}
