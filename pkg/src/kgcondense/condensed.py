"""Condensed transition graphs: one shortest-path-stitched walk per edge."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .transition import DEFAULT_CAP, Path, TransitionGraph, count_paths

FROM_SOURCE = "from-source"
TO_TARGET = "to-target"
STRATEGIES = ("shortest", "fattest")


@dataclass
class ShortestPathTree:
    """BFS tree over a transition graph, keyed by global entity id.

    For ``to-target`` trees the parent of a node is its next hop towards
    the root, i.e. edges point ``node -> parent``.
    """

    root: int
    direction: str
    parent: dict[int, tuple[int, int] | None]
    depth: dict[int, int]

    def path_to(self, node: int) -> Path:
        """Tree path between the root and ``node``, oriented along edge direction."""
        if node not in self.depth:
            raise KeyError(f"node {node} not reached from {self.root}")
        nodes, rels = [node], []
        x = node
        while self.parent[x] is not None:
            x, r = self.parent[x]
            nodes.append(x)
            rels.append(r)
        if self.direction == FROM_SOURCE:
            return Path(tuple(reversed(nodes)), tuple(reversed(rels)))
        return Path(tuple(nodes), tuple(rels))


class _Trees(NamedTuple):
    depth_s: np.ndarray
    par_s: np.ndarray
    prel_s: np.ndarray
    depth_t: np.ndarray
    par_t: np.ndarray
    prel_t: np.ndarray


def _local_tree(tg: TransitionGraph, root: int, direction: str, kn):
    if direction == FROM_SOURCE:
        csr = tg.forward_csr
    elif direction == TO_TARGET:
        csr = tg.reverse_csr
    else:
        raise ValueError(f"direction must be {FROM_SOURCE!r} or {TO_TARGET!r}, got {direction!r}")
    return kn.bfs_tree(*csr, tg.local(root))


def shortest_path_tree(tg: TransitionGraph, root: int, direction: str = FROM_SOURCE, backend=None) -> ShortestPathTree:
    """BFS tree inside ``tg``; ties go to the smallest parent id, then relation id."""
    kn = kernels.get(backend)
    depth, parent, prel = _local_tree(tg, root, direction, kn)
    ids = tg.nodes.tolist()
    par_map: dict[int, tuple[int, int] | None] = {}
    depth_map: dict[int, int] = {}
    for i, d in enumerate(depth.tolist()):
        if d < 0:
            continue
        depth_map[ids[i]] = d
        par_map[ids[i]] = None if parent[i] < 0 else (ids[int(parent[i])], int(prel[i]))
    return ShortestPathTree(root, direction, par_map, depth_map)


@dataclass(frozen=True)
class CondensedPath:
    via: tuple[int, int, int]
    prefix: Path
    suffix: Path

    @property
    def total_length(self) -> int:
        return self.prefix.length + 1 + self.suffix.length

    def walk(self) -> Path:
        """``prefix + via-edge + suffix`` as one path (may revisit nodes)."""
        u, r, v = self.via
        return Path(self.prefix.nodes + self.suffix.nodes, self.prefix.relations + (r,) + self.suffix.relations)


class CondensedGraph:
    """Flattened condensed paths for every transition-graph edge.

    Segments live in offset-indexed int arrays produced by the condense
    kernel; :attr:`paths` materialises :class:`CondensedPath` objects on
    first access.
    """

    def __init__(self, tg: TransitionGraph, arrays=None):
        self.source = tg.source
        self.target = tg.target
        self.k = tg.k
        self.tg = tg
        m = tg.num_edges
        if arrays is None:
            z = np.zeros(0, dtype=np.int64)
            arrays = (np.zeros(m + 1, dtype=np.int64), z, z, np.zeros(m + 1, dtype=np.int64), z, z)
        self.pre_off, self.pre_nodes, self.pre_rels, self.suf_off, self.suf_nodes, self.suf_rels = arrays

    def __len__(self) -> int:
        return self.tg.num_edges

    def is_empty(self) -> bool:
        return len(self) == 0

    def _segment(self, i: int, off, nodes, rels, ids) -> Path:
        a, b = int(off[i]), int(off[i + 1])
        return Path(tuple(ids[x] for x in nodes[a + i:b + i + 1].tolist()), tuple(rels[a:b].tolist()))

    @cached_property
    def paths(self) -> list[CondensedPath]:
        ids = self.tg.nodes.tolist()
        out = []
        for i, via in enumerate(self.tg.edges):
            out.append(CondensedPath(
                via,
                self._segment(i, self.pre_off, self.pre_nodes, self.pre_rels, ids),
                self._segment(i, self.suf_off, self.suf_nodes, self.suf_rels, ids),
            ))
        return out

    def __iter__(self):
        return iter(self.paths)

    def __getitem__(self, i: int) -> CondensedPath:
        return self.paths[i]

    def via_edges(self) -> set[tuple[int, int, int]]:
        return set(self.tg.edges)

    def edge_union(self) -> set[tuple[int, int, int]]:
        """Every edge appearing anywhere in any condensed path."""
        out = set()
        for cp in self.paths:
            out.update(cp.walk().edges())
        return out

    def total_lengths(self) -> np.ndarray:
        return np.diff(self.pre_off) + 1 + np.diff(self.suf_off)


def build_condensed_graph(tg: TransitionGraph, strategy: str = "shortest", backend=None) -> CondensedGraph:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown segment strategy {strategy!r}")
    if strategy == "fattest":
        raise NotImplementedError("fattest-path segments need an edge capacity, which is not defined")
    if tg.is_empty():
        return CondensedGraph(tg)
    kn = kernels.get(backend)
    depth_s, par_s, prel_s = _local_tree(tg, tg.source, FROM_SOURCE, kn)
    depth_t, par_t, prel_t = _local_tree(tg, tg.target, TO_TARGET, kn)
    lu, lr, lv = tg.local_edges
    arrays = kn.condense(lu, lr, lv, par_s, prel_s, depth_s, par_t, prel_t, depth_t)
    return CondensedGraph(tg, arrays)


@dataclass(frozen=True)
class CoverageStats:
    edge_coverage: float
    oracle_edge_coverage: float
    decomposable: tuple[bool, ...]

    @property
    def all_decomposable(self) -> bool:
        return all(self.decomposable)


def coverage_report(tg: TransitionGraph, cg: CondensedGraph, oracle_paths: Sequence[Path]) -> CoverageStats:
    """How much of the transition graph and of the oracle paths the condensed graph touches.

    A path is decomposable when each of its edges is the via-edge of some
    condensed path.
    """
    if (cg.source, cg.target, cg.k) != (tg.source, tg.target, tg.k):
        raise ValueError("condensed graph and transition graph disagree on (s, t, k)")
    for p in oracle_paths:
        if p.source != tg.source or p.target != tg.target or p.length > tg.k:
            raise ValueError(f"oracle path {p.steps} does not match (s, t, k) = ({tg.source}, {tg.target}, {tg.k})")
    tg_edges = tg.edge_set()
    via = cg.via_edges()
    union = cg.edge_union()
    edge_cov = len(tg_edges & via) / len(tg_edges) if tg_edges else 1.0
    oracle_edges = {e for p in oracle_paths for e in p.edges()}
    oracle_cov = len(oracle_edges & union) / len(oracle_edges) if oracle_edges else 1.0
    decomp = tuple(all(e in via for e in p.edges()) for p in oracle_paths)
    return CoverageStats(edge_cov, oracle_cov, decomp)


class PathCounts(NamedTuple):
    enumerated: int
    condensed: int
    ratio: float
    truncated: bool


def path_count_stats(tg: TransitionGraph, cg: CondensedGraph, cap: int = DEFAULT_CAP, backend=None) -> PathCounts:
    """Enumerated simple-path count (capped) against the condensed-path count."""
    enumerated, truncated = count_paths(tg, cap, backend=backend) if not tg.is_empty() else (0, False)
    condensed = len(cg)
    ratio = enumerated / condensed if condensed else float("nan")
    return PathCounts(enumerated, condensed, ratio, truncated)


def write_condensed_graph(cg: CondensedGraph, path) -> None:
    """One line per condensed path: ``via<TAB>u r v<TAB>prefix-steps<TAB>suffix-steps``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {cg.source} {cg.target} {cg.k}\n")
        for cp in cg.paths:
            fh.write(
                "via\t{}\t{}\t{}\n".format(
                    " ".join(map(str, cp.via)),
                    " ".join(map(str, cp.prefix.steps)),
                    " ".join(map(str, cp.suffix.steps)),
                )
            )


def read_condensed_paths(path) -> tuple[tuple[int, int, int], list[CondensedPath]]:
    """Parse a file from :func:`write_condensed_graph` into ``((s, t, k), paths)``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing '# s t k' header")
        s, t, k = (int(x) for x in header[1:].split())
        out = []
        for line in fh:
            if not line.strip():
                continue
            tag, via, pre, suf = line.rstrip("\n").split("\t")
            if tag != "via":
                raise ValueError(f"{path}: unexpected record {tag!r}")
            out.append(CondensedPath(
                tuple(int(x) for x in via.split()),
                Path.from_steps([int(x) for x in pre.split()]),
                Path.from_steps([int(x) for x in suf.split()]),
            ))
    return (s, t, k), out
