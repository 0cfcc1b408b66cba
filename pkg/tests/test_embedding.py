import numpy as np
import pytest

from kgcondense.embedding import (
    EmbedderConfig,
    EmbeddingLookupError,
    HttpEmbedder,
    SeededEmbedder,
    TableEmbedder,
    TransportError,
    embed_edge,
    embed_segment,
    embed_text,
    make_embedder,
)
from kgcondense.transition import Path
from stub_server import StubService


def test_seeded_is_deterministic_and_unit():
    a = SeededEmbedder(32, seed=7).embed_text("the relationship between x and y is born_in")
    b = embed_text(EmbedderConfig(dim=32, seed=7), "the relationship between x and y is born_in")
    assert np.array_equal(a, b)
    assert abs(np.linalg.norm(a) - 1.0) < 1e-12
    c = SeededEmbedder(32, seed=8).embed_text("the relationship between x and y is born_in")
    assert not np.allclose(a, c)


def test_seeded_commas_split_tokens():
    emb = SeededEmbedder(16)
    assert np.array_equal(emb.embed_text("a b, c"), emb.embed_text("a b c"))


def test_seeded_shared_tokens_are_closer():
    emb = SeededEmbedder(256)
    base = emb.embed_text("alpha beta gamma")
    near = emb.embed_text("alpha beta delta")
    far = emb.embed_text("epsilon zeta eta")
    assert base @ near > base @ far


def test_empty_text_rejected():
    with pytest.raises(ValueError):
        SeededEmbedder(8).embed_text("")
    with pytest.raises(ValueError):
        SeededEmbedder(8).embed_text(" , ")


def test_cached_vectors_are_read_only():
    emb = SeededEmbedder(8)
    v = emb.embed_text("x")
    with pytest.raises(ValueError):
        v[0] = 1.0
    assert emb.embed_text("x") is v


def test_config_validation():
    with pytest.raises(ValueError):
        EmbedderConfig(backend="magic")
    with pytest.raises(ValueError):
        EmbedderConfig(dim=0)
    with pytest.raises(ValueError):
        EmbedderConfig(backend="file-table")
    with pytest.raises(ValueError):
        EmbedderConfig(backend="http-service")


def test_table_backend(tmp_path):
    f = tmp_path / "table.tsv"
    f.write_text("born in\t1,0,0\nlives in\t0,1,0\n", encoding="utf-8")
    emb = make_embedder(EmbedderConfig(backend="file-table", dim=3, table_path=str(f)))
    assert isinstance(emb, TableEmbedder)
    assert emb.embed_text("lives in").tolist() == [0.0, 1.0, 0.0]
    with pytest.raises(EmbeddingLookupError):
        emb.embed_text("unknown")
    (tmp_path / "bad.tsv").write_text("x\t1,2\n", encoding="utf-8")
    with pytest.raises(ValueError):
        TableEmbedder(tmp_path / "bad.tsv", 3)


def test_shape_contract_enforced(tmp_path):
    class Wrong(SeededEmbedder):
        def _embed(self, text):
            return np.zeros(self.dim + 1)

    with pytest.raises(ValueError):
        Wrong(4).embed_text("x")


def test_http_backend_roundtrip():
    with StubService(embed=lambda body: {"vector": [float(len(body["text"])), 0.0]}) as svc:
        emb = make_embedder(EmbedderConfig(backend="http-service", dim=2, endpoint=svc.url))
        assert isinstance(emb, HttpEmbedder)
        assert emb.embed_text("abc").tolist() == [3.0, 0.0]
        emb.embed_text("abc")
        assert svc.requests == [("/embed", {"text": "abc"})]


def test_http_retries_then_succeeds():
    with StubService(embed=lambda body: {"vector": [1.0]}) as svc:
        svc.fail_next = 1
        assert HttpEmbedder(svc.url, 1, retries=1).embed_text("x").tolist() == [1.0]
        svc.fail_next = 2
        with pytest.raises(TransportError) as err:
            HttpEmbedder(svc.url, 1, retries=1).embed_text("y")
        assert err.value.retries == 1


def test_http_malformed_and_refused():
    with StubService(embed=lambda body: {"nope": 1}) as svc:
        with pytest.raises(TransportError):
            HttpEmbedder(svc.url, 1).embed_text("x")
    with pytest.raises(TransportError):
        HttpEmbedder("http://127.0.0.1:9", 1, timeout=1).embed_text("x")


def test_segment_and_edge(diamond):
    kg, s, t = diamond
    emb = SeededEmbedder(16)
    assert np.array_equal(embed_segment(emb, Path((t,), ()), kg), np.zeros(16))
    a = kg.entity_id("a")
    seg = embed_segment(emb, Path((s, a), (0,)), kg)
    assert np.array_equal(seg, embed_edge(emb, (s, 0, a), kg))
    assert np.array_equal(seg, emb.embed_text("the relationship between s and a is r"))
