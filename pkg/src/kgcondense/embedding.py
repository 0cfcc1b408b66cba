"""Text-embedding backends for path, edge and relation texts."""
from __future__ import annotations

import hashlib
import json
import logging
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kg import KnowledgeGraph
from .transition import Path, textualize_path

log = logging.getLogger(__name__)

BACKENDS = ("deterministic-seeded", "file-table", "http-service")


class EmbeddingLookupError(KeyError):
    pass


class TransportError(RuntimeError):
    def __init__(self, message, retries=0):
        self.retries = retries
        super().__init__(f"{message} (after {retries} retries)")


@dataclass(frozen=True)
class EmbedderConfig:
    backend: str = "deterministic-seeded"
    dim: int = 64
    seed: int = 42
    table_path: str | None = None
    endpoint: str | None = None
    timeout: float = 10.0
    retries: int = 0

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown embedder backend {self.backend!r}; choose from {BACKENDS}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.backend == "file-table" and not self.table_path:
            raise ValueError("file-table backend needs table_path")
        if self.backend == "http-service" and not self.endpoint:
            raise ValueError("http-service backend needs endpoint")


class Embedder:
    """Base class: caches ``text -> vector`` and enforces the dimension contract."""

    def __init__(self, dim: int):
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def _embed(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def embed_text(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        vec = self._cache.get(text)
        if vec is None:
            vec = np.asarray(self._embed(text), dtype=np.float64)
            if vec.shape != (self.dim,):
                raise ValueError(f"embedder returned shape {vec.shape}, expected ({self.dim},)")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"non-finite embedding for {text!r}")
            vec.flags.writeable = False
            self._cache[text] = vec
        return vec

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim))
        for i, t in enumerate(texts):
            out[i] = self.embed_text(t)
        return out

    def zeros(self) -> np.ndarray:
        return np.zeros(self.dim)


class SeededEmbedder(Embedder):
    """Whitespace tokens -> hashed random unit vectors -> mean -> unit norm.

    Commas count as whitespace so that clause-final relation names match
    the bare relation name. Pure function of ``(seed, dim, text)``; unrelated texts come out nearly
    orthogonal, shared tokens pull vectors together.
    """

    def __init__(self, dim: int = 64, seed: int = 42):
        super().__init__(dim)
        self.seed = seed
        self._tokens: dict[str, np.ndarray] = {}

    def token_vector(self, token: str) -> np.ndarray:
        vec = self._tokens.get(token)
        if vec is None:
            digest = hashlib.blake2b(
                token.encode("utf-8"), digest_size=8, key=str(self.seed).encode("ascii")
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vec = rng.standard_normal(self.dim)
            vec /= np.linalg.norm(vec)
            self._tokens[token] = vec
        return vec

    def _embed(self, text):
        tokens = text.replace(",", " ").split()
        if not tokens:
            raise ValueError(f"text {text!r} has no tokens")
        acc = np.zeros(self.dim)
        for tok in tokens:
            acc += self.token_vector(tok)
        norm = np.linalg.norm(acc)
        # opposite tokens can cancel exactly; fall back to the first token
        return acc / norm if norm > 0 else self.token_vector(tokens[0]).copy()


class TableEmbedder(Embedder):
    """Exact-string lookup in a ``text<TAB>v1,v2,...`` file."""

    def __init__(self, path, dim: int):
        super().__init__(dim)
        self.table: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                text, sep, values = line.rpartition("\t")
                if not sep:
                    raise ValueError(f"{path}:{lineno}: expected text<TAB>vector")
                vec = np.array([float(x) for x in values.split(",")])
                if vec.shape != (dim,):
                    raise ValueError(f"{path}:{lineno}: vector has {vec.size} entries, expected {dim}")
                self.table[text] = vec

    def _embed(self, text):
        try:
            return self.table[text]
        except KeyError:
            raise EmbeddingLookupError(f"no table entry for {text!r}") from None


class HttpEmbedder(Embedder):
    """``POST {endpoint}/embed`` with ``{"text": ...}``; expects ``{"vector": [...]}``."""

    def __init__(self, endpoint: str, dim: int, timeout: float = 10.0, retries: int = 0):
        super().__init__(dim)
        self.url = endpoint.rstrip("/") + "/embed"
        self.timeout = timeout
        self.retries = retries

    def _embed(self, text):
        body = post_json(self.url, {"text": text}, self.timeout, self.retries)
        try:
            return body["vector"]
        except (KeyError, TypeError):
            raise TransportError(f"malformed response from {self.url}: {body!r}", self.retries) from None


def post_json(url: str, payload: dict, timeout: float, retries: int = 0) -> dict:
    data = json.dumps(payload).encode("utf-8")
    attempt = 0
    while True:
        req = urllib.request.Request(url, data=data, headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                raw = resp.read().decode("utf-8")
            log.debug("POST %s -> %s", url, raw)
            return json.loads(raw)
        except (urllib.error.URLError, TimeoutError, OSError, json.JSONDecodeError) as exc:
            if attempt >= retries:
                raise TransportError(f"POST {url} failed: {exc}", attempt) from exc
            attempt += 1
            time.sleep(min(0.1 * 2 ** attempt, 2.0))


def make_embedder(cfg: EmbedderConfig) -> Embedder:
    if cfg.backend == "deterministic-seeded":
        return SeededEmbedder(cfg.dim, cfg.seed)
    if cfg.backend == "file-table":
        return TableEmbedder(cfg.table_path, cfg.dim)
    return HttpEmbedder(cfg.endpoint, cfg.dim, cfg.timeout, cfg.retries)


def embed_text(cfg_or_embedder, text: str) -> np.ndarray:
    emb = cfg_or_embedder if isinstance(cfg_or_embedder, Embedder) else make_embedder(cfg_or_embedder)
    return emb.embed_text(text)


def embed_segment(embedder: Embedder, segment: Path, kg: KnowledgeGraph) -> np.ndarray:
    """Embed the textualized segment; a zero-length segment maps to the zero vector."""
    if segment.length == 0:
        return embedder.zeros()
    return embedder.embed_text(textualize_path(segment, kg))


def embed_edge(embedder: Embedder, edge: tuple[int, int, int], kg: KnowledgeGraph) -> np.ndarray:
    u, r, v = edge
    return embedder.embed_text(
        f"the relationship between {kg.entities[u]} and {kg.entities[v]} is {kg.relations[r]}"
    )
