"""(s, t)-transition graphs: extraction, exhaustive path enumeration, textualization."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .kg import KnowledgeGraph, _csr

DEFAULT_K = 4
DEFAULT_CAP = 100_000


@dataclass(frozen=True)
class Path:
    """A walk ``v0 -r0-> v1 ... -> vj`` stored as parallel node/relation tuples.

    A zero-length path (a single node) is how empty segments are represented.
    """

    nodes: tuple[int, ...]
    relations: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.nodes) != len(self.relations) + 1:
            raise ValueError(
                f"path needs len(nodes) == len(relations) + 1, got {len(self.nodes)} and {len(self.relations)}"
            )

    @classmethod
    def from_steps(cls, steps: Sequence[int]) -> "Path":
        """Build from the alternating form ``[v0, r0, v1, ..., vj]``."""
        if len(steps) % 2 != 1:
            raise ValueError("steps must alternate node, relation, ..., node")
        return cls(tuple(int(x) for x in steps[0::2]), tuple(int(x) for x in steps[1::2]))

    @property
    def steps(self) -> tuple[int, ...]:
        out = [self.nodes[0]]
        for r, v in zip(self.relations, self.nodes[1:]):
            out += [r, v]
        return tuple(out)

    @property
    def length(self) -> int:
        return len(self.relations)

    def __len__(self) -> int:
        return self.length

    @property
    def source(self) -> int:
        return self.nodes[0]

    @property
    def target(self) -> int:
        return self.nodes[-1]

    def edges(self) -> list[tuple[int, int, int]]:
        return list(zip(self.nodes[:-1], self.relations, self.nodes[1:]))

    def is_simple(self) -> bool:
        return len(set(self.nodes)) == len(self.nodes)


@dataclass(eq=False)
class TransitionGraph:
    """Edges lying on some ``source -> target`` walk of at most ``k`` hops.

    ``edge_u/edge_r/edge_v`` hold global ids sorted by ``(u, v, r)``;
    ``nodes`` is sorted ascending, so local indices preserve id order.
    """

    source: int
    target: int
    k: int
    edge_u: np.ndarray
    edge_r: np.ndarray
    edge_v: np.ndarray
    dist_from_source: dict[int, int] = field(default_factory=dict)
    dist_to_target: dict[int, int] = field(default_factory=dict)

    @cached_property
    def nodes(self) -> np.ndarray:
        if not len(self.edge_u):
            return np.array(sorted({self.source, self.target}), dtype=np.int64)
        return np.unique(np.concatenate([self.edge_u, self.edge_v, [self.source, self.target]]))

    @property
    def num_edges(self) -> int:
        return len(self.edge_u)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def __len__(self) -> int:
        return self.num_edges

    def is_empty(self) -> bool:
        return self.num_edges == 0

    @property
    def edges(self) -> list[tuple[int, int, int]]:
        return list(zip(self.edge_u.tolist(), self.edge_r.tolist(), self.edge_v.tolist()))

    def edge_set(self) -> set[tuple[int, int, int]]:
        return set(self.edges)

    def local(self, node: int) -> int:
        i = int(np.searchsorted(self.nodes, node))
        if i >= len(self.nodes) or self.nodes[i] != node:
            raise KeyError(f"node {node} is not in the transition graph")
        return i

    @cached_property
    def local_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.searchsorted(self.nodes, self.edge_u).astype(np.int64),
            self.edge_r,
            np.searchsorted(self.nodes, self.edge_v).astype(np.int64),
        )

    @cached_property
    def forward_csr(self):
        lu, lr, lv = self.local_edges
        return _csr(lu, lr, lv, self.num_nodes)

    @cached_property
    def reverse_csr(self):
        lu, lr, lv = self.local_edges
        return _csr(lv, lr, lu, self.num_nodes)

    @cached_property
    def local_dist_to_target(self) -> np.ndarray:
        return np.array([self.dist_to_target.get(int(x), -1) for x in self.nodes], dtype=np.int64)


def _check_ids(kg: KnowledgeGraph, *nodes: int) -> None:
    for x in nodes:
        kg._check_entity(x)


def extract_transition_graph(
    kg: KnowledgeGraph,
    s: int,
    t: int,
    k: int = DEFAULT_K,
    exclude: tuple[int, int, int] | None = None,
    backend=None,
) -> TransitionGraph:
    """Keep every edge ``(u, r, v)`` with ``d(s, u) + 1 + d(v, t) <= k``.

    ``exclude`` names one ``(head, relation, tail)`` edge that is neither
    traversed nor kept, used to hide the gold edge of an evaluation pair.
    """
    _check_ids(kg, s, t)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if s == t:
        raise ValueError("source and target must differ")
    kn = kernels.get(backend)
    bh, br, bt = exclude if exclude is not None else (-1, -1, -1)
    ds = kn.bfs_distances(*kg.fwd, s, k, bh, br, bt)
    dt = kn.bfs_distances(*kg.rev, t, k, bt, br, bh)
    eu, er, ev = kn.filter_edges(*kg.fwd, ds, dt, k, bh, br, bt)
    tg = TransitionGraph(s, t, k, eu, er, ev)
    nodes = tg.nodes.tolist()
    tg.dist_from_source = {x: int(ds[x]) for x in nodes}
    tg.dist_to_target = {x: int(dt[x]) for x in nodes}
    return tg


class Enumeration(NamedTuple):
    paths: list[Path]
    truncated: bool


def enumerate_paths(tg: TransitionGraph, cap: int = DEFAULT_CAP, backend=None) -> Enumeration:
    """All simple ``s -> t`` paths of length ``<= k`` inside ``tg``, DFS order."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    if tg.is_empty():
        return Enumeration([], False)
    kn = kernels.get(backend)
    found, truncated = kn.enumerate_paths(
        *tg.forward_csr, tg.local(tg.source), tg.local(tg.target), tg.k,
        tg.local_dist_to_target, cap,
    )
    ids = tg.nodes.tolist()
    paths = [Path(tuple(ids[x] for x in ns), tuple(int(r) for r in rs)) for ns, rs in found]
    return Enumeration(paths, bool(truncated))


def count_paths(tg: TransitionGraph, cap: int = DEFAULT_CAP, backend=None) -> tuple[int, bool]:
    """``(count, truncated)`` for the same traversal as :func:`enumerate_paths`."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    if tg.is_empty():
        return 0, False
    kn = kernels.get(backend)
    count, truncated = kn.count_paths(
        *tg.forward_csr, tg.local(tg.source), tg.local(tg.target), tg.k,
        tg.local_dist_to_target, cap,
    )
    return int(count), bool(truncated)


def textualize_path(p: Path, kg: KnowledgeGraph) -> str:
    ents, rels = kg.entities, kg.relations
    return ", ".join(
        f"the relationship between {ents[u]} and {ents[v]} is {rels[r]}" for u, r, v in p.edges()
    )


def write_transition_graph(tg: TransitionGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{tg.source} {tg.target} {tg.k}\n")
        for u, r, v in tg.edges:
            fh.write(f"{u}\t{r}\t{v}\n")


def read_transition_graph(path, backend=None) -> TransitionGraph:
    """Inverse of :func:`write_transition_graph`; distances are recomputed inside the edge set."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: bad header, expected 's t k'")
        s, t, k = (int(x) for x in header)
        rows = [tuple(int(x) for x in line.split("\t")) for line in fh if line.strip()]
    arr = np.array(rows, dtype=np.int64).reshape(-1, 3)
    order = np.lexsort((arr[:, 1], arr[:, 2], arr[:, 0]))
    arr = arr[order]
    tg = TransitionGraph(s, t, k, arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy())
    kn = kernels.get(backend)
    ls, lt = tg.local(s), tg.local(t)
    ds = kn.bfs_distances(*tg.forward_csr, ls, tg.num_nodes)
    dt = kn.bfs_distances(*tg.reverse_csr, lt, tg.num_nodes)
    ids = tg.nodes.tolist()
    tg.dist_from_source = {x: int(ds[i]) for i, x in enumerate(ids)}
    tg.dist_to_target = {x: int(dt[i]) for i, x in enumerate(ids)}
    return tg
