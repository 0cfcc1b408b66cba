"""Condensation wall-clock versus transition-graph size, for each kernel backend."""
from __future__ import annotations

import timeit
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .condensed import build_condensed_graph
from .synthetic import layered_digraph
from .transition import DEFAULT_CAP, TransitionGraph, count_paths, extract_transition_graph

DEFAULT_SIZES = (1000, 2000, 4000, 8000)


@dataclass
class BenchRow:
    backend: str
    m: int
    seconds: float
    enumerated: int
    truncated: bool


@dataclass
class LinearFit:
    backend: str
    slope: float
    intercept: float
    r2: float


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares ``y = a * x + b``; returns ``(a, b, R^2)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a, b = np.polyfit(x, y, 1)
    resid = y - (a * x + b)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


def _fresh(tg: TransitionGraph) -> TransitionGraph:
    # cached CSR/local views must be rebuilt inside the timed region
    return TransitionGraph(tg.source, tg.target, tg.k, tg.edge_u, tg.edge_r, tg.edge_v,
                           tg.dist_from_source, tg.dist_to_target)


def time_condensation(tg: TransitionGraph, backend, repeats: int = 15, min_total: float = 0.02) -> float:
    """Best per-call seconds of :func:`build_condensed_graph` on a cold copy of ``tg``."""
    kn = kernels.get(backend)
    stmt = lambda: build_condensed_graph(_fresh(tg), backend=kn)  # noqa: E731
    timer = timeit.Timer(stmt)
    number = 1
    while timer.timeit(number) < min_total:
        number *= 2
    return min(timer.repeat(repeats, number)) / number


def bench_graphs(sizes=DEFAULT_SIZES, width: int = 100, seed: int = 0, k: int = 4):
    out = []
    for m in sizes:
        kg, s, t = layered_digraph(m, width=width, seed=seed, distractors=m // 10)
        tg = extract_transition_graph(kg, s, t, k)
        if tg.num_edges != m:
            raise AssertionError(f"layered graph produced {tg.num_edges} transition edges, wanted {m}")
        out.append(tg)
    return out


def run_bench(sizes=DEFAULT_SIZES, backends=None, width: int = 100, seed: int = 0, cap: int = DEFAULT_CAP,
              repeats: int = 15, k: int = 4):
    """Time condensation per size and backend; count enumerated paths up to ``cap``.

    Returns ``(rows, fits)``.
    """
    backends = list(backends) if backends else sorted(kernels.BACKENDS, reverse=True)
    graphs = bench_graphs(sizes, width, seed, k)
    enum = [count_paths(tg, cap) for tg in graphs]
    rows, fits = [], []
    for name in backends:
        kn = kernels.get(name)
        build_condensed_graph(_fresh(graphs[-1]), backend=kn)  # warmup
        times = []
        for tg, (count, trunc) in zip(graphs, enum):
            sec = time_condensation(tg, kn, repeats)
            times.append(sec)
            rows.append(BenchRow(kn.NAME, tg.num_edges, sec, count, trunc))
        a, b, r2 = linear_fit([tg.num_edges for tg in graphs], times)
        fits.append(LinearFit(kn.NAME, a, b, r2))
    return rows, fits


def write_bench(rows, fits, csv_path, json_path) -> None:
    import json

    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("backend,m,seconds,enumerated,truncated\n")
        for r in rows:
            fh.write(f"{r.backend},{r.m},{r.seconds!r},{r.enumerated},{int(r.truncated)}\n")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump({"fits": [asdict(f) for f in fits], "rows": [asdict(r) for r in rows]}, fh, indent=2)
        fh.write("\n")
