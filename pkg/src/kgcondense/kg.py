"""Triple loading, string interning and CSR adjacency."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

log = logging.getLogger(__name__)


class KGError(Exception):
    """Base class for knowledge-graph errors."""


class TripleParseError(KGError):
    def __init__(self, path, lineno, line, reason):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {reason}: {line!r}")


class ConfigError(KGError):
    """Missing or inconsistent input configuration."""


class Triple(NamedTuple):
    head: object
    relation: object
    tail: object


class Vocab:
    """Dense interned string table; ids in first-appearance order."""

    def __init__(self, items: Iterable[str] = ()):
        self._to_id: dict[str, int] = {}
        self._items: list[str] = []
        for it in items:
            self.add(it)

    def add(self, item: str) -> int:
        idx = self._to_id.get(item)
        if idx is None:
            idx = len(self._items)
            self._to_id[item] = idx
            self._items.append(item)
        return idx

    def id(self, item: str) -> int:
        try:
            return self._to_id[item]
        except KeyError:
            raise KeyError(f"unknown name {item!r}") from None

    def get(self, item: str, default=None):
        return self._to_id.get(item, default)

    def __getitem__(self, idx: int) -> str:
        return self._items[idx]

    def __contains__(self, item) -> bool:
        return item in self._to_id

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self._items == other._items

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, item in enumerate(self._items):
                fh.write(f"{i}\t{item}\n")


def _csr(src: np.ndarray, rel: np.ndarray, dst: np.ndarray, n: int):
    # rows by src, each row sorted by (dst, rel)
    order = np.lexsort((rel, dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, np.ascontiguousarray(dst[order]), np.ascontiguousarray(rel[order])


class KnowledgeGraph:
    """Immutable directed multi-relational graph over interned ids.

    Forward and reverse adjacency are CSR arrays; each row is sorted by
    ``(neighbour id, relation id)``.
    """

    def __init__(self, entities: Vocab, relations: Vocab, heads, rels, tails):
        self.entities = entities
        self.relations = relations
        h = np.asarray(heads, dtype=np.int64)
        r = np.asarray(rels, dtype=np.int64)
        t = np.asarray(tails, dtype=np.int64)
        if len(h):
            # dedup exact duplicates, keep first-appearance order
            _, first = np.unique(np.stack([h, r, t], axis=1), axis=0, return_index=True)
            keep = np.sort(first)
            h, r, t = h[keep], r[keep], t[keep]
        self.heads, self.rels, self.tails = h, r, t
        n = len(entities)
        self.fwd = _csr(h, r, t, n)
        self.rev = _csr(t, r, h, n)
        self._edge_set: frozenset | None = None

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence[str]]) -> "KnowledgeGraph":
        ents, rels = Vocab(), Vocab()
        hs, rs, ts = [], [], []
        for h, r, t in triples:
            hs.append(ents.add(h))
            rs.append(rels.add(r))
            ts.append(ents.add(t))
        return cls(ents, rels, hs, rs, ts)

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    @property
    def num_triples(self) -> int:
        return len(self.heads)

    def __len__(self) -> int:
        return self.num_triples

    def __repr__(self) -> str:
        return (
            f"KnowledgeGraph(entities={self.num_entities}, "
            f"relations={self.num_relations}, triples={self.num_triples})"
        )

    def _check_entity(self, node: int) -> None:
        if not (isinstance(node, (int, np.integer)) and 0 <= node < self.num_entities):
            raise KeyError(f"invalid entity id {node!r}")

    def neighbors(self, node: int, direction: str = "forward") -> list[tuple[int, int]]:
        """Sorted ``(relation id, entity id)`` pairs adjacent to ``node``."""
        self._check_entity(node)
        if direction == "forward":
            indptr, nbr, rel = self.fwd
        elif direction == "reverse":
            indptr, nbr, rel = self.rev
        else:
            raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
        lo, hi = indptr[node], indptr[node + 1]
        return list(zip(rel[lo:hi].tolist(), nbr[lo:hi].tolist()))

    def has_edge(self, head: int, relation: int, tail: int) -> bool:
        if self._edge_set is None:
            self._edge_set = frozenset(
                zip(self.heads.tolist(), self.rels.tolist(), self.tails.tolist())
            )
        return (head, relation, tail) in self._edge_set

    def triples(self) -> list[Triple]:
        return [Triple(*x) for x in zip(self.heads.tolist(), self.rels.tolist(), self.tails.tolist())]

    def entity_id(self, name: str) -> int:
        return self.entities.id(name)

    def relation_id(self, name: str) -> int:
        return self.relations.id(name)

    def dump_vocab(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        self.entities.dump(os.path.join(directory, "entities.tsv"))
        self.relations.dump(os.path.join(directory, "relations.tsv"))


def read_triples(path) -> list[Triple]:
    """Parse a ``head<TAB>relation<TAB>tail`` file into string triples.

    Blank lines and lines starting with ``#`` are skipped. Duplicates are
    kept here; :class:`KnowledgeGraph` drops them.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise TripleParseError(path, lineno, line, f"expected 3 tab-separated fields, got {len(parts)}")
            if not all(p.strip() for p in parts):
                raise TripleParseError(path, lineno, line, "empty field")
            out.append(Triple(*(p.strip() for p in parts)))
    return out


def load_triples(path, format: str = "tsv") -> KnowledgeGraph:
    if format != "tsv":
        raise ValueError(f"unsupported triple format {format!r}")
    triples = read_triples(path)
    kg = KnowledgeGraph.from_triples(triples)
    log.info(
        "loaded %s: %d entities, %d relations, %d triples (%d duplicate lines dropped)",
        path, kg.num_entities, kg.num_relations, kg.num_triples, len(triples) - kg.num_triples,
    )
    return kg


@dataclass
class DatasetSplit:
    """String-level train/dev/test triples.

    ``kg`` holds edges from the train portion only, so evaluation pairs
    never see edges that exist only in dev/test. Its vocabularies still
    cover every split (train names first), which gives test pairs and
    candidate relations ids in the same space.
    """

    train: list[Triple]
    dev: list[Triple] = field(default_factory=list)
    test: list[Triple] = field(default_factory=list)
    _kg: KnowledgeGraph | None = field(default=None, repr=False, compare=False)

    @property
    def kg(self) -> KnowledgeGraph:
        if self._kg is None:
            ents, rels = Vocab(), Vocab()
            hs, rs, ts = [], [], []
            for h, r, t in self.train:
                hs.append(ents.add(h))
                rs.append(rels.add(r))
                ts.append(ents.add(t))
            for h, r, t in self.dev + self.test:
                ents.add(h)
                rels.add(r)
                ents.add(t)
            self._kg = KnowledgeGraph(ents, rels, hs, rs, ts)
        return self._kg

    def sizes(self) -> dict[str, int]:
        return {"train": len(self.train), "dev": len(self.dev), "test": len(self.test)}

    def test_relations(self) -> list[str]:
        return list(dict.fromkeys(t.relation for t in self.test))


def load_split(train, dev=None, test=None) -> DatasetSplit:
    if test is None or not os.path.exists(test):
        raise ConfigError(f"test file missing: {test!r}")
    if not os.path.exists(train):
        raise ConfigError(f"train file missing: {train!r}")
    if os.path.realpath(train) == os.path.realpath(test):
        log.warning("train and test are the same file (%s): evaluation pairs leak into the search graph", train)
    dev_triples = read_triples(dev) if dev is not None and os.path.exists(dev) else []
    split = DatasetSplit(
        train=read_triples(train),
        dev=dev_triples,
        test=read_triples(test),
    )
    log.info("split sizes: %s", split.sizes())
    return split
