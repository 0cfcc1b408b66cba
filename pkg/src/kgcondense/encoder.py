"""Condensed-graph encoder (CGE) and graph-centric contrastive training.

The encoder is a two-layer ReLU network ``3d -> hidden -> d`` applied to
each condensed path's ``[prefix | edge | suffix]`` embedding, averaged
over all condensed paths of a pair. Gradients are written out by hand.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .condensed import CondensedGraph
from .embedding import Embedder, embed_edge, embed_segment
from .kg import KnowledgeGraph
from .transition import Path, textualize_path

log = logging.getLogger(__name__)

NORM_EPS = 1e-12
PARAMS_MAGIC = b"KGCE"
PARAMS_VERSION = 1


@dataclass
class EncoderParams:
    W1: np.ndarray  # (hidden, 3d)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (d, hidden)
    b2: np.ndarray  # (d,)

    NAMES = ("W1", "b1", "W2", "b2")

    def __post_init__(self):
        h, d3 = self.W1.shape
        if d3 % 3:
            raise ValueError(f"W1 must have 3*d columns, got {d3}")
        d = d3 // 3
        if self.b1.shape != (h,) or self.W2.shape != (d, h) or self.b2.shape != (d,):
            raise ValueError(
                f"inconsistent shapes W1{self.W1.shape} b1{self.b1.shape} W2{self.W2.shape} b2{self.b2.shape}"
            )

    @property
    def dim(self) -> int:
        return self.W2.shape[0]

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    @classmethod
    def init(cls, dim: int, hidden: int, seed: int = 42) -> "EncoderParams":
        rng = np.random.default_rng(seed)
        return cls(
            rng.standard_normal((hidden, 3 * dim)) * np.sqrt(2.0 / (3 * dim)),
            np.zeros(hidden),
            rng.standard_normal((dim, hidden)) * np.sqrt(1.0 / hidden),
            np.zeros(dim),
        )

    @classmethod
    def zeros(cls, dim: int, hidden: int) -> "EncoderParams":
        return cls(np.zeros((hidden, 3 * dim)), np.zeros(hidden), np.zeros((dim, hidden)), np.zeros(dim))

    def arrays(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def copy(self) -> "EncoderParams":
        return EncoderParams(*(a.copy() for a in self.arrays()))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def save(self, path) -> None:
        """Binary layout: magic, u16 version, u32 d, u32 hidden, then W1 b1 W2 b2 as row-major <f8."""
        with open(path, "wb") as fh:
            fh.write(PARAMS_MAGIC)
            fh.write(struct.pack("<HII", PARAMS_VERSION, self.dim, self.hidden))
            for a in self.arrays():
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "EncoderParams":
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[:4] != PARAMS_MAGIC:
            raise ValueError(f"{path}: not an encoder params file")
        version, d, h = struct.unpack_from("<HII", blob, 4)
        if version != PARAMS_VERSION:
            raise ValueError(f"{path}: unsupported params version {version}")
        shapes = [(h, 3 * d), (h,), (d, h), (d,)]
        off = 4 + struct.calcsize("<HII")
        arrs = []
        for shape in shapes:
            count = int(np.prod(shape))
            arrs.append(np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(shape).astype(np.float64))
            off += 8 * count
        if off != len(blob):
            raise ValueError(f"{path}: trailing bytes in params file")
        return cls(*arrs)


@dataclass
class GraphEmbedding:
    vector: np.ndarray
    pair: tuple[int, int]
    kind: str  # "condensed" or "all-paths"
    empty: bool = False


def _check_dim(params: EncoderParams, *vecs):
    for v in vecs:
        if np.shape(v) != (params.dim,):
            raise ValueError(f"expected vector of shape ({params.dim},), got {np.shape(v)}")


def encode_condensed_path(params: EncoderParams, h_su, h_uv, h_vt) -> np.ndarray:
    _check_dim(params, h_su, h_uv, h_vt)
    x = np.concatenate([h_su, h_uv, h_vt])
    return params.W2 @ np.maximum(params.W1 @ x + params.b1, 0.0) + params.b2


def condensed_features(cg: CondensedGraph, kg: KnowledgeGraph, embedder: Embedder) -> np.ndarray:
    """``(m, 3d)`` matrix of ``[prefix | edge | suffix]`` embeddings, one row per condensed path."""
    d = embedder.dim
    X = np.empty((len(cg), 3 * d))
    for i, cp in enumerate(cg.paths):
        X[i, :d] = embed_segment(embedder, cp.prefix, kg)
        X[i, d:2 * d] = embed_edge(embedder, cp.via, kg)
        X[i, 2 * d:] = embed_segment(embedder, cp.suffix, kg)
    return X


def _forward(params: EncoderParams, X: np.ndarray):
    Z = X @ params.W1.T + params.b1
    H = np.maximum(Z, 0.0)
    # mean over rows commutes with the affine output layer
    a = H.T.copy().sum(axis=1) / X.shape[0]
    return params.W2 @ a + params.b2, (X, Z, a)


def encode_features(params: EncoderParams, X: np.ndarray) -> np.ndarray:
    if X.shape[0] == 0:
        return np.zeros(params.dim)
    return _forward(params, X)[0]


def encode_condensed_graph(params: EncoderParams, cg: CondensedGraph, embedder: Embedder, kg: KnowledgeGraph) -> GraphEmbedding:
    """Mean CGE output over the condensed paths; empty graphs give a flagged zero vector."""
    pair = (cg.source, cg.target)
    if cg.is_empty():
        return GraphEmbedding(np.zeros(params.dim), pair, "condensed", empty=True)
    X = condensed_features(cg, kg, embedder)
    return GraphEmbedding(encode_features(params, X), pair, "condensed")


def all_paths_embedding(embedder: Embedder, paths: Sequence[Path], kg: KnowledgeGraph, pair=None) -> GraphEmbedding:
    if pair is None:
        pair = (paths[0].source, paths[0].target) if paths else (-1, -1)
    if not paths:
        return GraphEmbedding(embedder.zeros(), pair, "all-paths", empty=True)
    M = embedder.embed_many([textualize_path(p, kg) for p in paths])
    return GraphEmbedding(M.T.copy().sum(axis=1) / len(paths), pair, "all-paths")


def _unit(A: np.ndarray):
    norms = np.maximum(np.linalg.norm(A, axis=1), NORM_EPS)
    return A / norms[:, None], norms


def cosine_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return _unit(A)[0] @ _unit(B)[0].T


def contrastive_loss(hbar: np.ndarray, h: np.ndarray, tau: float = 0.07):
    """In-batch softmax contrastive loss of condensed vs all-paths embeddings.

    Row ``i`` treats ``h[i]`` as the positive for ``hbar[i]`` and every other
    ``h[j]`` as a negative. Returns ``(loss, d loss / d hbar)``.
    """
    hbar = np.asarray(hbar, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    B = hbar.shape[0]
    if B < 2:
        raise ValueError("contrastive loss needs at least 2 pairs")
    if hbar.shape != h.shape:
        raise ValueError(f"shape mismatch {hbar.shape} vs {h.shape}")
    U, n_u = _unit(hbar)
    W, _ = _unit(h)
    C = U @ W.T
    S = C / tau
    S_max = S.max(axis=1, keepdims=True)
    E = np.exp(S - S_max)
    Z = E.sum(axis=1, keepdims=True)
    loss = float(np.mean(np.log(Z[:, 0]) + S_max[:, 0] - np.diag(S)))
    P = E / Z
    P[np.diag_indices(B)] -= 1.0
    P /= B * tau  # dL/dC
    # d cos(a, w) / da = (w - cos * a_hat) / |a|; the norm floor freezes the radial term
    G = P @ W - (P * C).sum(axis=1, keepdims=True) * U
    floored = n_u <= NORM_EPS
    if np.any(floored):
        G[floored] = (P @ W)[floored]
    return loss, G / n_u[:, None]


def _backward(params: EncoderParams, cache, g: np.ndarray, grads: list[np.ndarray]) -> None:
    X, Z, a = cache
    grads[2] += np.outer(g, a)
    grads[3] += g
    da = params.W2.T @ g
    dZ = (Z > 0) * (da / X.shape[0])
    grads[0] += dZ.T @ X
    grads[1] += dZ.sum(axis=0)


def batch_loss_and_grads(params: EncoderParams, batch: Sequence[tuple[np.ndarray, np.ndarray]], tau: float):
    """Loss and parameter gradients for ``[(features, target), ...]``."""
    outs, caches = [], []
    for X, _ in batch:
        hb, cache = _forward(params, X)
        outs.append(hb)
        caches.append(cache)
    targets = np.stack([t for _, t in batch])
    loss, G = contrastive_loss(np.stack(outs), targets, tau)
    grads = [np.zeros_like(a) for a in params.arrays()]
    for g, cache in zip(G, caches):
        _backward(params, cache, g, grads)
    return loss, grads


def batch_loss(params: EncoderParams, batch, tau: float) -> float:
    hb = np.stack([_forward(params, X)[0] for X, _ in batch])
    return contrastive_loss(hb, np.stack([t for _, t in batch]), tau)[0]


def gradient_check(params: EncoderParams, batch, tau: float = 0.07, step: float = 1e-5, scale: float = 1.0) -> float:
    """Largest per-tensor relative error of analytic vs central-difference gradients.

    Error for a tensor is ``|g_analytic - g_numeric| / |g_numeric|`` in the
    Frobenius norm (0 when both vanish). ``scale`` multiplies the analytic
    gradient and exists to self-test the checker.
    """
    _, grads = batch_loss_and_grads(params, batch, tau)
    worst = 0.0
    probe = params.copy()
    for arr, g in zip(probe.arrays(), grads):
        num = np.zeros_like(arr)
        flat = arr.reshape(-1)
        nflat = num.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            up = batch_loss(probe, batch, tau)
            flat[i] = old - step
            down = batch_loss(probe, batch, tau)
            flat[i] = old
            nflat[i] = (up - down) / (2 * step)
        diff = np.linalg.norm(scale * g - num)
        ref = np.linalg.norm(num)
        err = 0.0 if diff == 0.0 else diff / max(ref, NORM_EPS)
        worst = max(worst, err)
    return float(worst)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 16
    temperature: float = 0.07
    seed: int = 42
    optimizer: str = "adam"
    hidden: int = 128

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 for in-batch negatives")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")


class Adam:
    def __init__(self, params: EncoderParams, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]
        self.t = 0

    def step(self, params: EncoderParams, grads) -> None:
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for a, g, m, v in zip(params.arrays(), grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            a -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, params: EncoderParams, lr: float):
        self.lr = lr

    def step(self, params: EncoderParams, grads) -> None:
        for a, g in zip(params.arrays(), grads):
            a -= self.lr * g


@dataclass
class TrainResult:
    """Final parameters plus per-epoch loss traces.

    ``losses`` is the training-set loss measured after each epoch on a
    fixed sequential batching, so it is comparable across epochs;
    ``batch_losses`` is the mean of the shuffled minibatch losses seen
    during the epoch.
    """

    params: EncoderParams
    losses: list[float] = field(default_factory=list)
    batch_losses: list[float] = field(default_factory=list)

    def write_loss_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,loss\n")
            for i, loss in enumerate(self.losses, 1):
                fh.write(f"{i},{loss!r}\n")


def _batches(order: np.ndarray, size: int) -> list[np.ndarray]:
    out = [order[i:i + size] for i in range(0, len(order), size)]
    # a trailing singleton has no negatives; fold it into the previous batch
    if len(out) > 1 and len(out[-1]) < 2:
        last = out.pop()
        out[-1] = np.concatenate([out[-1], last])
    return out


def train_on_features(cfg: TrainConfig, data: Sequence[tuple[np.ndarray, np.ndarray]], dim: int,
                      params: EncoderParams | None = None) -> TrainResult:
    """Mini-batch training over precomputed ``(features, all-paths target)`` pairs."""
    data = [(X, t) for X, t in data if X.shape[0] > 0]
    if len(data) < 2:
        raise ValueError(f"need at least 2 pairs with non-empty transition graphs, got {len(data)}")
    if len(data) < cfg.batch_size:
        log.warning("only %d trainable pairs for batch size %d; using full batches", len(data), cfg.batch_size)
    if params is None:
        params = EncoderParams.init(dim, cfg.hidden, cfg.seed)
    opt = Adam(params, cfg.learning_rate) if cfg.optimizer == "adam" else SGD(params, cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult(params)
    fixed = [[data[i] for i in idx] for idx in _batches(np.arange(len(data)), cfg.batch_size)]
    for epoch in range(cfg.epochs):
        total = 0.0
        batches = _batches(rng.permutation(len(data)), cfg.batch_size)
        for idx in batches:
            loss, grads = batch_loss_and_grads(params, [data[i] for i in idx], cfg.temperature)
            opt.step(params, grads)
            total += loss
        result.batch_losses.append(total / len(batches))
        result.losses.append(sum(batch_loss(params, b, cfg.temperature) for b in fixed) / len(fixed))
        if (epoch + 1) % 50 == 0:
            log.info("epoch %d loss %.6f", epoch + 1, result.losses[-1])
    return result


def pair_training_data(pairs: Iterable, kg: KnowledgeGraph, embedder: Embedder, k: int = 4, cap: int = 100_000,
                       backend=None) -> list[tuple[tuple[int, int], np.ndarray, np.ndarray]]:
    """Features and all-paths targets for each ``(s, t)`` or ``(s, r, t)`` pair.

    With a relation given, that edge is hidden from path search. Pairs
    without any ``s -> t`` connection are skipped.
    """
    from .condensed import build_condensed_graph
    from .transition import enumerate_paths, extract_transition_graph

    out = []
    for item in pairs:
        if len(item) == 3:
            s, r, t = item
            exclude = (s, r, t)
        else:
            s, t = item
            exclude = None
        tg = extract_transition_graph(kg, s, t, k, exclude=exclude, backend=backend)
        if tg.is_empty():
            continue
        cg = build_condensed_graph(tg, backend=backend)
        paths = enumerate_paths(tg, cap, backend=backend).paths
        if not paths:
            continue
        X = condensed_features(cg, kg, embedder)
        target = all_paths_embedding(embedder, paths, kg, pair=(s, t)).vector
        out.append(((s, t), X, target))
    return out


def train_encoder(cfg: TrainConfig, pairs, kg: KnowledgeGraph, embedder: Embedder, k: int = 4,
                  cap: int = 100_000, backend=None) -> TrainResult:
    data = pair_training_data(pairs, kg, embedder, k, cap, backend)
    if not data:
        raise ValueError("no trainable pairs: every transition graph is empty")
    return train_on_features(cfg, [(X, t) for _, X, t in data], embedder.dim)
