"""Prefix projection, prompt assembly, prefix export and the generation client."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embedding import TransportError, post_json
from .encoder import GraphEmbedding
from .kg import ConfigError, KnowledgeGraph
from .transition import Path, textualize_path

log = logging.getLogger(__name__)

CANDIDATES_PLACEHOLDER = "{candidates}"
DEFAULT_INSTRUCTION = (
    "Predict the relationship between the head entity and the tail entity. "
    "Answer with exactly one relation from this list: {candidates}."
)
DEFAULT_MAX_CHARS = 4096


def query_sentence(s_name: str, t_name: str) -> str:
    return f"what is the relationship between {s_name} and {t_name} ?"


@dataclass
class PrefixProjection:
    """Linear map from a ``d``-vector to ``l`` prefix rows of width ``d_llm``."""

    W: np.ndarray  # (l * d_llm, d)
    l: int
    d_llm: int

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("prefix length l must be >= 1")
        if self.W.ndim != 2 or self.W.shape[0] != self.l * self.d_llm:
            raise ValueError(f"W has shape {self.W.shape}, expected ({self.l * self.d_llm}, d)")

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    @classmethod
    def init(cls, dim: int, l: int, d_llm: int, seed: int = 42) -> "PrefixProjection":
        """Seeded random map with orthonormal columns (or rows, when ``l * d_llm < d``)."""
        rng = np.random.default_rng(seed)
        out = l * d_llm
        A = rng.standard_normal((max(out, dim), min(out, dim)))
        Q, R = np.linalg.qr(A)
        Q = Q * np.sign(np.diag(R))  # fix the QR sign ambiguity
        W = Q if out >= dim else Q.T
        return cls(np.ascontiguousarray(W), l, d_llm)

    @classmethod
    def identity(cls, dim: int) -> "PrefixProjection":
        return cls(np.eye(dim), 1, dim)


def project_to_prefix(proj: PrefixProjection, h) -> np.ndarray:
    vec = h.vector if isinstance(h, GraphEmbedding) else np.asarray(h, dtype=np.float64)
    if vec.shape != (proj.dim,):
        raise ValueError(f"embedding has shape {vec.shape}, projection expects ({proj.dim},)")
    return (proj.W @ vec).reshape(proj.l, proj.d_llm)


@dataclass
class PromptBundle:
    prefix: np.ndarray  # (l, d_llm)
    instruction: str
    query: str
    pair: tuple[str, str]

    def to_json(self) -> dict:
        return {
            "pair": {"head": self.pair[0], "tail": self.pair[1]},
            "l": int(self.prefix.shape[0]),
            "dim": int(self.prefix.shape[1]),
            "vectors": [[float(x) for x in row] for row in self.prefix],
            "instruction": self.instruction,
            "query": self.query,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PromptBundle":
        prefix = np.array(doc["vectors"], dtype=np.float64).reshape(doc["l"], doc["dim"])
        return cls(prefix, doc["instruction"], doc["query"], (doc["pair"]["head"], doc["pair"]["tail"]))


def render_instruction(template: str, candidates: Sequence[str]) -> str:
    if CANDIDATES_PLACEHOLDER not in template:
        raise ConfigError(f"instruction template lacks the {CANDIDATES_PLACEHOLDER} placeholder")
    if not candidates:
        raise ConfigError("candidate relation list is empty")
    return template.replace(CANDIDATES_PLACEHOLDER, ", ".join(candidates))


def assemble_prompt(prefix: np.ndarray, template: str, s_name: str, t_name: str,
                    candidates: Sequence[str]) -> PromptBundle:
    if not s_name or not t_name:
        raise ValueError("entity names must be non-empty")
    return PromptBundle(
        np.asarray(prefix, dtype=np.float64),
        render_instruction(template, candidates),
        query_sentence(s_name, t_name),
        (s_name, t_name),
    )


def assemble_hard_prompt(paths: Sequence[Path], kg: KnowledgeGraph, template: str, s_name: str, t_name: str,
                         candidates: Sequence[str], max_chars: int = DEFAULT_MAX_CHARS) -> tuple[str, bool]:
    """Path descriptions, then instruction and query, cut to ``max_chars``.

    Returns ``(prompt, truncated)``.
    """
    parts = [textualize_path(p, kg) + "." for p in paths]
    parts.append(render_instruction(template, candidates))
    parts.append(query_sentence(s_name, t_name))
    text = "\n".join(parts)
    if len(text) > max_chars:
        return text[:max_chars], True
    return text, False


def export_prefix(bundle: PromptBundle, path) -> None:
    # json writes floats via repr, the shortest round-tripping decimal
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle.to_json(), fh, ensure_ascii=False)
        fh.write("\n")


def load_prefix(path) -> PromptBundle:
    with open(path, encoding="utf-8") as fh:
        return PromptBundle.from_json(json.load(fh))


def llm_generate(endpoint: str, prompt, timeout: float = 30.0, retries: int = 0) -> str:
    """POST to ``{endpoint}/generate`` and return the raw completion text.

    ``prompt`` is either a hard-prompt string or a :class:`PromptBundle`.
    """
    if not endpoint:
        raise ConfigError("no generation endpoint configured")
    if isinstance(prompt, PromptBundle):
        doc = prompt.to_json()
        payload = {"prefix": doc["vectors"], "instruction": doc["instruction"], "query": doc["query"]}
    else:
        payload = {"prompt": str(prompt)}
    url = endpoint.rstrip("/") + "/generate"
    body = post_json(url, payload, timeout, retries)
    log.info("generation response from %s: %r", url, body)
    if not isinstance(body, dict) or not isinstance(body.get("text"), str):
        raise TransportError(f"malformed response from {url}: {body!r}", retries)
    return body["text"]
