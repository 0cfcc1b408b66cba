"""Zero-shot relation prediction, baseline scorers, micro metrics and relation masking."""
from __future__ import annotations

import csv
import json
import math
import random
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .encoder import NORM_EPS
from .kg import ConfigError, DatasetSplit

INVALID = -1
SCORERS = ("embedding-similarity", "llm-generation", "baseline-transe", "baseline-distmult", "baseline-complex")


class ZeroShotLeakError(ValueError):
    """Training and evaluation relation vocabularies overlap."""


def _pair(e_h, e_r, e_t):
    e_h, e_r, e_t = (np.asarray(x, dtype=np.float64) for x in (e_h, e_r, e_t))
    if not (e_h.shape == e_r.shape == e_t.shape) or e_h.ndim != 1:
        raise ValueError(f"score inputs must be equal-length vectors, got {e_h.shape}, {e_r.shape}, {e_t.shape}")
    return e_h, e_r, e_t


def score_transe(e_h, e_r, e_t) -> float:
    e_h, e_r, e_t = _pair(e_h, e_r, e_t)
    return -float(np.linalg.norm(e_h + e_r - e_t))


def score_distmult(e_h, e_r, e_t) -> float:
    e_h, e_r, e_t = _pair(e_h, e_r, e_t)
    return float(np.sum(e_h * e_r * e_t))


def score_complex(e_h, e_r, e_t) -> float:
    """``Re(<h, r, conj(t)>)`` with vectors laid out as ``[real | imaginary]``."""
    e_h, e_r, e_t = _pair(e_h, e_r, e_t)
    if e_h.size % 2:
        raise ValueError(f"ComplEx needs an even dimension, got {e_h.size}")
    c = e_h.size // 2
    hr, hi, rr, ri, tr, ti = e_h[:c], e_h[c:], e_r[:c], e_r[c:], e_t[:c], e_t[c:]
    # real arithmetic, so zero imaginary halves reduce to the DistMult sum exactly
    return float(np.sum(hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr))


BASELINE_SCORE = {
    "baseline-transe": score_transe,
    "baseline-distmult": score_distmult,
    "baseline-complex": score_complex,
}


@dataclass
class CandidateSet:
    pair: tuple[int, int]
    relations: list[int]

    def __post_init__(self):
        if not self.relations:
            raise ValueError("candidate set is empty")


@dataclass
class PredictionRecord:
    head: str
    tail: str
    gold: str
    predicted: str | None  # None is the invalid marker
    source: str
    score: float = float("nan")

    @property
    def correct(self) -> bool:
        return self.predicted is not None and self.predicted == self.gold


def normalize_relation(text: str) -> str:
    """Lowercase, trim, collapse whitespace, spaces to underscores."""
    return re.sub(r"\s+", " ", text.strip().lower()).replace(" ", "_")


def argmax_first(scores: Sequence[float]) -> int:
    """Index of the maximum; ties resolve to the earliest index."""
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


@dataclass
class Artifacts:
    """What a scorer may need: embedding function, per-pair graph vectors, generator."""

    embed: Callable[[str], np.ndarray] | None = None
    graph_vectors: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    generate: Callable[[int, int], str] | None = None


def predict_relation(
    pair: tuple[int, int],
    candidates: CandidateSet,
    scorer: str,
    artifacts: Artifacts,
    entity_names: Sequence[str],
    relation_names: Sequence[str],
) -> tuple[int, float]:
    """Pick a relation id from ``candidates`` (``INVALID`` for unmatched generations).

    Candidates are visited in ascending relation id, so score ties go to
    the smallest id. Returns ``(relation id, score)``.
    """
    if scorer not in SCORERS:
        raise ConfigError(f"unknown scorer {scorer!r}")
    rels = sorted(candidates.relations)
    s, t = pair
    if len(rels) == 1:
        return rels[0], float("nan")
    if scorer == "llm-generation":
        if artifacts.generate is None:
            raise ConfigError("llm-generation scorer needs a generation endpoint")
        text = normalize_relation(artifacts.generate(s, t))
        for r in rels:
            if normalize_relation(relation_names[r]) == text:
                return r, 1.0
        return INVALID, float("nan")
    if artifacts.embed is None:
        raise ConfigError(f"{scorer} scorer needs an embedding backend")
    if scorer == "embedding-similarity":
        if pair not in artifacts.graph_vectors:
            raise ConfigError(f"no condensed-graph embedding for pair {pair}")
        g = artifacts.graph_vectors[pair]
        gn = g / max(np.linalg.norm(g), NORM_EPS)
        scores = []
        for r in rels:
            e = artifacts.embed(relation_names[r])
            scores.append(float(gn @ (e / max(np.linalg.norm(e), NORM_EPS))))
    else:
        fn = BASELINE_SCORE[scorer]
        e_h = artifacts.embed(entity_names[s])
        e_t = artifacts.embed(entity_names[t])
        scores = [fn(e_h, artifacts.embed(relation_names[r]), e_t) for r in rels]
    i = argmax_first(scores)
    return rels[i], scores[i]


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    n: int

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "n": self.n}


def micro_prf(records: Sequence[PredictionRecord]) -> Metrics:
    """Micro-averaged scores; invalid generations count as wrong predictions.

    Computed from integer counts, so with one prediction per instance the
    three values are bitwise equal.
    """
    if not records:
        raise ValueError("no prediction records")
    tp = sum(r.correct for r in records)
    n_pred = len(records)
    n_gold = len(records)
    p = tp / n_pred
    rcl = tp / n_gold
    f1 = 2 * tp / (n_pred + n_gold)
    return Metrics(p, rcl, f1, len(records))


def _ceil_fraction(fraction: float, n: int) -> int:
    # 0.3 * 10 is 3.0000000000000004 in binary floating point
    return math.ceil(round(fraction * n, 9))


def mask_relations(split: DatasetSplit, fraction: float, seed: int) -> tuple[DatasetSplit, list[str]]:
    """Drop train triples of ``ceil(fraction * |R_test|)`` test relations.

    The masked relations are drawn by a seeded shuffle of the test relation
    set in order of first appearance. Returns ``(masked split, masked relations)``.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"mask fraction must lie in [0, 1), got {fraction}")
    rels = split.test_relations()
    count = _ceil_fraction(fraction, len(rels))
    order = list(rels)
    random.Random(seed).shuffle(order)
    masked = sorted(order[:count], key=rels.index)
    drop = set(masked)
    new = DatasetSplit(
        train=[t for t in split.train if t.relation not in drop],
        dev=list(split.dev),
        test=list(split.test),
    )
    return new, masked


def check_zero_shot(train_relations: Iterable[str], eval_relations: Iterable[str]) -> None:
    overlap = sorted(set(train_relations) & set(eval_relations))
    if overlap:
        shown = ", ".join(overlap[:10]) + (" ..." if len(overlap) > 10 else "")
        raise ZeroShotLeakError(f"{len(overlap)} relation(s) shared by training and evaluation graphs: {shown}")


PREDICTION_FIELDS = ["head", "tail", "gold", "predicted", "source", "score"]


def write_predictions(records: Sequence[PredictionRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_FIELDS)
        for r in records:
            w.writerow([r.head, r.tail, r.gold, "" if r.predicted is None else r.predicted, r.source, repr(r.score)])


def read_predictions(path) -> list[PredictionRecord]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(PredictionRecord(
                row["head"], row["tail"], row["gold"], row["predicted"] or None, row["source"], float(row["score"])
            ))
    return out


def write_metrics(m: Metrics, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(m.to_json(), fh, indent=2)
        fh.write("\n")
