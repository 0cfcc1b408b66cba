import math

import numpy as np
import pytest

import oracles
from kgcondense.condensed import build_condensed_graph
from kgcondense.embedding import SeededEmbedder, embed_edge, embed_segment
from kgcondense.encoder import (
    EncoderParams,
    TrainConfig,
    _batches,
    all_paths_embedding,
    batch_loss_and_grads,
    condensed_features,
    contrastive_loss,
    cosine_matrix,
    encode_condensed_graph,
    encode_condensed_path,
    encode_features,
    gradient_check,
    train_on_features,
)
from kgcondense.transition import enumerate_paths, extract_transition_graph, textualize_path


def random_batch(rng, B=4, d=3, rows=(1, 5)):
    return [(rng.standard_normal((rng.integers(*rows), 3 * d)), rng.standard_normal(d)) for _ in range(B)]


def test_params_file_roundtrip(tmp_path):
    p = EncoderParams.init(5, 7, seed=3)
    f = tmp_path / "params.bin"
    p.save(f)
    q = EncoderParams.load(f)
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), q.arrays()))
    assert f.read_bytes()[:4] == b"KGCE"
    f.write_bytes(f.read_bytes() + b"\0")
    with pytest.raises(ValueError):
        EncoderParams.load(f)
    f.write_bytes(b"NOPE" + b"\0" * 20)
    with pytest.raises(ValueError):
        EncoderParams.load(f)


def test_params_shape_validation():
    with pytest.raises(ValueError):
        EncoderParams(np.zeros((4, 7)), np.zeros(4), np.zeros((2, 4)), np.zeros(2))
    with pytest.raises(ValueError):
        EncoderParams(np.zeros((4, 6)), np.zeros(4), np.zeros((3, 4)), np.zeros(2))


def test_single_path_matches_loop_network():
    rng = np.random.default_rng(0)
    p = EncoderParams.init(4, 6, seed=1)
    p.b1[:] = rng.standard_normal(6)
    p.b2[:] = rng.standard_normal(4)
    parts = [rng.standard_normal(4) for _ in range(3)]
    expected = oracles.mlp_rows(p.W1, p.b1, p.W2, p.b2, [np.concatenate(parts)])[0]
    assert np.allclose(encode_condensed_path(p, *parts), expected, atol=1e-12, rtol=0)
    with pytest.raises(ValueError):
        encode_condensed_path(p, parts[0], parts[1], np.zeros(3))


def test_mean_equals_loop_mean_and_is_order_free():
    rng = np.random.default_rng(1)
    p = EncoderParams.init(3, 8, seed=2)
    X = rng.standard_normal((9, 9))
    expected = oracles.mlp_rows(p.W1, p.b1, p.W2, p.b2, X).mean(axis=0)
    got = encode_features(p, X)
    assert np.max(np.abs(got - expected)) <= 1e-12
    assert np.max(np.abs(encode_features(p, X[rng.permutation(9)]) - got)) <= 1e-9
    assert np.array_equal(encode_features(p, X[:0]), np.zeros(3))


def test_diamond_condensed_embedding(diamond):
    kg, s, t = diamond
    emb = SeededEmbedder(8)
    p = EncoderParams.init(8, 16, seed=0)
    cg = build_condensed_graph(extract_transition_graph(kg, s, t, 2))
    got = encode_condensed_graph(p, cg, emb, kg)
    per_edge = [
        encode_condensed_path(p, embed_segment(emb, cp.prefix, kg), embed_edge(emb, cp.via, kg),
                              embed_segment(emb, cp.suffix, kg))
        for cp in cg
    ]
    assert len(per_edge) == 4
    assert np.max(np.abs(got.vector - sum(per_edge) / 4)) <= 1e-12
    assert got.kind == "condensed" and not got.empty
    assert condensed_features(cg, kg, emb).shape == (4, 24)


def test_empty_graph_embedding_is_flagged():
    from kgcondense.kg import KnowledgeGraph

    kg = KnowledgeGraph.from_triples([("s", "r", "a"), ("t", "r", "a")])
    cg = build_condensed_graph(extract_transition_graph(kg, 0, kg.entity_id("t"), 2))
    g = encode_condensed_graph(EncoderParams.init(4, 4), cg, SeededEmbedder(4), kg)
    assert g.empty and np.array_equal(g.vector, np.zeros(4))


def test_diamond_all_paths_embedding(diamond):
    kg, s, t = diamond
    emb = SeededEmbedder(8)
    paths = enumerate_paths(extract_transition_graph(kg, s, t, 2)).paths
    got = all_paths_embedding(emb, paths, kg)
    a, b = (emb.embed_text(textualize_path(p, kg)) for p in paths)
    assert np.max(np.abs(got.vector - (a + b) / 2)) <= 1e-12
    assert got.pair == (s, t)
    assert all_paths_embedding(emb, [], kg, pair=(s, t)).empty


def test_contrastive_loss_matches_loop():
    rng = np.random.default_rng(3)
    hb, h = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
    for tau in (0.07, 0.5, 1.0):
        loss, _ = contrastive_loss(hb, h, tau)
        assert abs(loss - oracles.info_nce_loop(hb, h, tau)) <= 1e-10


def test_contrastive_loss_uninformative_batch():
    v = np.ones((3, 4))
    assert abs(contrastive_loss(v, v)[0] - math.log(3)) <= 1e-12
    with pytest.raises(ValueError):
        contrastive_loss(v[:1], v[:1])
    with pytest.raises(ValueError):
        contrastive_loss(v, v[:, :2])


def test_contrastive_grad_finite_difference():
    rng = np.random.default_rng(4)
    hb, h = rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
    _, G = contrastive_loss(hb, h, 0.3)
    num = np.zeros_like(hb)
    for idx in np.ndindex(*hb.shape):
        up, down = hb.copy(), hb.copy()
        up[idx] += 1e-6
        down[idx] -= 1e-6
        num[idx] = (contrastive_loss(up, h, 0.3)[0] - contrastive_loss(down, h, 0.3)[0]) / 2e-6
    assert np.max(np.abs(G - num)) < 1e-7


def test_cosine_matrix():
    A = np.array([[1.0, 0.0], [0.0, 2.0]])
    assert np.allclose(cosine_matrix(A, A), np.eye(2))


def test_gradient_check_and_self_test():
    rng = np.random.default_rng(5)
    p = EncoderParams.init(3, 5, seed=6)
    batch = random_batch(rng)
    assert gradient_check(p, batch) <= 1e-4
    assert abs(gradient_check(p, batch, scale=2.0) - 1.0) < 1e-3


def test_batches_fold_singleton():
    parts = _batches(np.arange(5), 2)
    assert [list(x) for x in parts] == [[0, 1], [2, 3, 4]]
    assert [list(x) for x in _batches(np.arange(4), 2)] == [[0, 1], [2, 3]]


def test_train_config_validation():
    for bad in (dict(learning_rate=-1), dict(temperature=0), dict(batch_size=1), dict(epochs=-1),
                dict(optimizer="rmsprop")):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def _data(seed=7, n=12, d=4):
    rng = np.random.default_rng(seed)
    return [(rng.standard_normal((rng.integers(1, 4), 3 * d)), rng.standard_normal(d)) for _ in range(n)]


def test_zero_learning_rate_leaves_params_untouched():
    start = EncoderParams.init(4, 8, seed=1)
    for opt in ("adam", "sgd"):
        res = train_on_features(TrainConfig(learning_rate=0.0, epochs=3, batch_size=4, optimizer=opt),
                                _data(), 4, params=start.copy())
        assert all(np.array_equal(a, b) for a, b in zip(res.params.arrays(), start.arrays()))


def test_training_is_deterministic(tmp_path):
    cfg = TrainConfig(epochs=5, batch_size=4)
    a = train_on_features(cfg, _data(), 4)
    b = train_on_features(cfg, _data(), 4)
    assert a.losses == b.losses and a.batch_losses == b.batch_losses
    a.write_loss_csv(tmp_path / "a.csv")
    b.write_loss_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "epoch,loss"


def test_training_lowers_loss():
    res = train_on_features(TrainConfig(epochs=60, batch_size=4, learning_rate=1e-2), _data(), 4)
    assert res.losses[-1] < res.losses[0]


def test_training_needs_two_pairs():
    with pytest.raises(ValueError):
        train_on_features(TrainConfig(), _data(n=1), 4)


def test_grads_accumulate_over_batch():
    rng = np.random.default_rng(8)
    p = EncoderParams.init(3, 4, seed=0)
    batch = random_batch(rng, B=3)
    loss, grads = batch_loss_and_grads(p, batch, 0.07)
    assert np.isfinite(loss) and [g.shape for g in grads] == [a.shape for a in p.arrays()]
