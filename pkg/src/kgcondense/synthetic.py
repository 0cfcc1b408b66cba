"""Seeded synthetic graphs: G(n, p) digraphs, layered benchmark graphs, toy relational KGs."""
from __future__ import annotations

import numpy as np

from .kg import KnowledgeGraph, Triple


def gnp_digraph(n: int, p: float, seed: int, num_relations: int = 1, self_loops: bool = False) -> KnowledgeGraph:
    """Directed Erdős–Rényi graph; each present arc gets a uniform random relation.

    Entities are named ``"0" .. "n-1"`` and interned in that order, so entity
    id ``i`` is node ``i`` (isolated nodes included).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < p
    if not self_loops:
        np.fill_diagonal(mask, False)
    u, v = np.nonzero(mask)
    r = rng.integers(0, num_relations, size=len(u))
    return _indexed_graph(n, num_relations, u, r, v)


def _indexed_graph(n, num_relations, u, r, v) -> KnowledgeGraph:
    from .kg import Vocab

    ents = Vocab(str(i) for i in range(n))
    rels = Vocab(f"r{i}" for i in range(num_relations))
    return KnowledgeGraph(ents, rels, u, r, v)


def layered_digraph(num_edges: int, width: int = 100, seed: int = 0, distractors: int = 0) -> tuple[KnowledgeGraph, int, int]:
    """Four-hop layered graph whose whole edge set is the (s, t, 4) transition graph.

    Layout ``s -> L1 -> L2 -> L3 -> t`` with ``width`` nodes per layer. ``s``
    feeds all of L1, all of L3 feeds ``t``, a perfect matching guarantees
    every middle node lies on a path, and the remaining budget is split
    evenly between L1->L2 and L2->L3 as uniform G(n, M) samples. Optional
    ``distractors`` arcs hang off L1 into dead-end nodes and never survive
    the distance filter. Returns ``(kg, s, t)``.
    """
    middle = num_edges - 2 * width
    if middle < 2 * width or middle % 2:
        raise ValueError(f"num_edges={num_edges} incompatible with width={width}")
    per_layer = middle // 2
    if per_layer > width * width:
        raise ValueError("too many edges for the layer width")
    rng = np.random.default_rng(seed)
    s, t = 0, 1
    L1 = np.arange(2, 2 + width)
    L2 = L1 + width
    L3 = L2 + width
    us, vs = [np.full(width, s), L3], [L1, np.full(width, t)]
    for A, B in ((L1, L2), (L2, L3)):
        # matching occupies the diagonal cells; sample the rest without replacement
        off_diag = np.array([i * width + j for i in range(width) for j in range(width) if i != j])
        extra = rng.choice(off_diag, size=per_layer - width, replace=False)
        cells = np.concatenate([np.arange(width) * (width + 1), extra])
        us.append(A[cells // width])
        vs.append(B[cells % width])
    n = 2 + 3 * width
    if distractors:
        dead = np.arange(n, n + distractors)
        us.append(rng.choice(L1, size=distractors))
        vs.append(dead)
        n += distractors
    u = np.concatenate(us)
    v = np.concatenate(vs)
    return _indexed_graph(n, 1, u, np.zeros(len(u), dtype=np.int64), v), s, t


def toy_relational_triples(
    num_pairs: int,
    num_relations: int = 5,
    relation_prefix: str = "rel",
    entity_prefix: str = "e",
    seed: int = 0,
    hubs: int = 3,
    noise_paths: int = 1,
):
    """Toy KG where a pair's gold relation recurs along its connecting paths.

    Each pair ``(s, t)`` with gold ``g`` gets the direct edge ``s -g-> t``
    (hidden during path search), ``hubs`` two-hop detours ``s -g-> m -g-> t``
    and ``noise_paths`` detours with random relations. Returns
    ``(triples, gold)`` where ``gold`` lists the ``(s, g, t)`` string triples.
    """
    rng = np.random.default_rng(seed)
    rels = [f"{relation_prefix}_{i}" for i in range(num_relations)]
    triples, gold = [], []
    nid = 0

    def fresh():
        nonlocal nid
        nid += 1
        return f"{entity_prefix}{nid - 1}"

    for i in range(num_pairs):
        g = rels[i % num_relations] if i < num_relations else rels[int(rng.integers(num_relations))]
        s, t = fresh(), fresh()
        gold.append(Triple(s, g, t))
        triples.append(Triple(s, g, t))
        for _ in range(hubs):
            m = fresh()
            triples += [Triple(s, g, m), Triple(m, g, t)]
        for _ in range(noise_paths):
            m = fresh()
            a, b = rng.integers(num_relations, size=2)
            triples += [Triple(s, rels[a], m), Triple(m, rels[b], t)]
    return triples, gold
