"""Per-pair orchestration shared by the CLI: condensed embeddings and split evaluation."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .condensed import build_condensed_graph
from .embedding import Embedder, EmbedderConfig, make_embedder
from .encoder import EncoderParams, GraphEmbedding, encode_condensed_graph
from .evaluation import (
    INVALID,
    Artifacts,
    CandidateSet,
    PredictionRecord,
    check_zero_shot,
    predict_relation,
)
from .kg import ConfigError, DatasetSplit, KnowledgeGraph
from .transition import DEFAULT_K, extract_transition_graph

log = logging.getLogger(__name__)

_STATE: dict = {}


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def condensed_embedding(kg: KnowledgeGraph, triple, params: EncoderParams, embedder: Embedder,
                        k: int = DEFAULT_K, backend=None) -> GraphEmbedding:
    """h-bar for one ``(s, r, t)`` id triple with its own gold edge hidden (``r=None`` hides nothing)."""
    s, r, t = triple
    exclude = None if r is None else (s, r, t)
    tg = extract_transition_graph(kg, s, t, k, exclude=exclude, backend=backend)
    cg = build_condensed_graph(tg, backend=backend)
    return encode_condensed_graph(params, cg, embedder, kg)


def _init_worker(kg, params, emb_cfg, k, backend):
    _STATE.update(kg=kg, params=params, embedder=make_embedder(emb_cfg), k=k, backend=backend)


def _worker(chunk):
    st = _STATE
    return [condensed_embedding(st["kg"], tr, st["params"], st["embedder"], st["k"], st["backend"]) for tr in chunk]


def condensed_embeddings(kg: KnowledgeGraph, triples: Sequence, params: EncoderParams, emb_cfg: EmbedderConfig,
                         k: int = DEFAULT_K, jobs: int = 1, backend=None,
                         embedder: Embedder | None = None) -> list[GraphEmbedding]:
    """h-bar for many triples; order of the result follows ``triples`` for any ``jobs``."""
    triples = list(triples)
    if jobs <= 1 or len(triples) < 2:
        emb = embedder if embedder is not None else make_embedder(emb_cfg)
        return [condensed_embedding(kg, tr, params, emb, k, backend) for tr in triples]
    chunk = max(1, -(-len(triples) // (4 * jobs)))
    chunks = [triples[i:i + chunk] for i in range(0, len(triples), chunk)]
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(kg, params, emb_cfg, k, backend)) as ex:
        return [g for part in ex.map(_worker, chunks) for g in part]


def split_test_triples(split: DatasetSplit) -> list[tuple[int, int, int]]:
    kg = split.kg
    return [(kg.entity_id(h), kg.relation_id(r), kg.entity_id(t)) for h, r, t in split.test]


def evaluate_split(
    split: DatasetSplit,
    scorer: str,
    emb_cfg: EmbedderConfig,
    params: EncoderParams | None = None,
    train_relations: Sequence[str] | None = None,
    candidates: dict[tuple[str, str], list[str]] | None = None,
    generate: Callable[[str, str], str] | None = None,
    k: int = DEFAULT_K,
    jobs: int = 1,
    backend=None,
) -> list[PredictionRecord]:
    """One prediction per test triple.

    Candidates default to the whole relation vocabulary of the split;
    ``candidates`` overrides per ``(head, tail)`` name pair. When
    ``train_relations`` is given, any overlap with the split's relation
    vocabulary aborts the run.
    """
    kg = split.kg
    if train_relations is not None:
        check_zero_shot(train_relations, list(kg.relations))
    elif scorer == "embedding-similarity":
        raise ConfigError("embedding-similarity needs the encoder's training relation vocabulary")
    triples = split_test_triples(split)
    embedder = make_embedder(emb_cfg)
    artifacts = Artifacts(embed=embedder.embed_text)
    if scorer == "embedding-similarity":
        if params is None:
            raise ConfigError("embedding-similarity needs trained encoder parameters")
        vecs = condensed_embeddings(kg, triples, params, emb_cfg, k, jobs, backend, embedder=embedder)
        artifacts.graph_vectors = {(s, t): g.vector for (s, _, t), g in zip(triples, vecs)}
    if scorer == "llm-generation":
        if generate is None:
            raise ConfigError("llm-generation needs a generation endpoint")
        artifacts.generate = lambda s, t: generate(kg.entities[s], kg.entities[t])
    all_rels = list(range(kg.num_relations))
    records = []
    for (s, r, t) in triples:
        names = (kg.entities[s], kg.entities[t])
        cand = all_rels
        if candidates is not None and names in candidates:
            cand = [kg.relation_id(x) for x in candidates[names]]
        pred, score = predict_relation((s, t), CandidateSet((s, t), cand), scorer, artifacts,
                                       kg.entities, kg.relations)
        records.append(PredictionRecord(
            names[0], names[1], kg.relations[r],
            None if pred == INVALID else kg.relations[pred], scorer, float(score),
        ))
    return records


def graph_vectors_array(vecs: Sequence[GraphEmbedding]) -> np.ndarray:
    return np.stack([g.vector for g in vecs]) if vecs else np.zeros((0, 0))
