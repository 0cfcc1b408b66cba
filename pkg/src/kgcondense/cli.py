"""``kgcondense`` command line: config-driven subcommands over the whole pipeline."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bench import DEFAULT_SIZES, run_bench, write_bench
from .condensed import build_condensed_graph, path_count_stats, write_condensed_graph
from .embedding import BACKENDS as EMBED_BACKENDS
from .embedding import EmbedderConfig, TransportError, make_embedder
from .encoder import EncoderParams, TrainConfig, train_encoder
from .evaluation import SCORERS, ZeroShotLeakError, mask_relations, micro_prf, write_metrics, write_predictions
from .kg import ConfigError, DatasetSplit, KGError, Triple, Vocab, load_split, read_triples
from .pipeline import condensed_embedding, condensed_embeddings, default_jobs, evaluate_split
from .prompt import (
    DEFAULT_INSTRUCTION,
    PrefixProjection,
    assemble_hard_prompt,
    assemble_prompt,
    export_prefix,
    llm_generate,
    project_to_prefix,
)
from .synthetic import toy_relational_triples
from .transition import DEFAULT_CAP, DEFAULT_K, enumerate_paths, extract_transition_graph, write_transition_graph

log = logging.getLogger("kgcondense")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_TRANSPORT = 4
EXIT_LEAK = 5


@dataclass
class RunConfig:
    train: str | None = None
    dev: str | None = None
    test: str | None = None
    pairs: str | None = None
    candidates: str | None = None
    model: str | None = None
    out: str = "run"
    k: int = DEFAULT_K
    cap: int = DEFAULT_CAP
    seed: int = 42
    jobs: int | None = None
    kernel: str = "auto"
    scorer: str = "embedding-similarity"
    mask: float = 0.0
    embedder: str = "deterministic-seeded"
    dim: int = 64
    table: str | None = None
    endpoint: str | None = None
    timeout: float = 10.0
    retries: int = 0
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 16
    temperature: float = 0.07
    hidden: int = 128
    max_pairs: int = 1024
    l: int = 10
    d_llm: int | None = None
    instruction: str = DEFAULT_INSTRUCTION
    bench_sizes: list[int] = field(default_factory=lambda: list(DEFAULT_SIZES))
    bench_width: int = 100
    bench_repeats: int = 15

    def validate(self) -> "RunConfig":
        checks = [
            (self.k >= 1, f"k must be >= 1, got {self.k}"),
            (self.cap >= 1, f"cap must be >= 1, got {self.cap}"),
            (self.jobs is None or self.jobs >= 1, f"jobs must be >= 1, got {self.jobs}"),
            (self.kernel == "auto" or self.kernel in kernels.BACKENDS,
             f"kernel must be 'auto' or one of {sorted(kernels.BACKENDS)}, got {self.kernel!r}"),
            (self.scorer in SCORERS, f"scorer must be one of {SCORERS}, got {self.scorer!r}"),
            (0.0 <= self.mask < 1.0, f"mask must lie in [0, 1), got {self.mask}"),
            (self.embedder in EMBED_BACKENDS, f"embedder must be one of {EMBED_BACKENDS}, got {self.embedder!r}"),
            (self.dim >= 1, f"dim must be >= 1, got {self.dim}"),
            (self.l >= 1, f"l must be >= 1, got {self.l}"),
            (self.d_llm is None or self.d_llm >= 1, f"d_llm must be >= 1, got {self.d_llm}"),
            (self.max_pairs >= 2, f"max_pairs must be >= 2, got {self.max_pairs}"),
            (bool(self.bench_sizes) and all(m >= 1 for m in self.bench_sizes), "bench_sizes must be positive"),
            (self.bench_repeats >= 1, "bench_repeats must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        try:
            self.embedder_config()
            self.train_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    @property
    def backend(self):
        return None if self.kernel == "auto" else self.kernel

    def resolved_jobs(self) -> int:
        return self.jobs if self.jobs is not None else default_jobs()

    def embedder_config(self) -> EmbedderConfig:
        return EmbedderConfig(self.embedder, self.dim, self.seed, self.table, self.endpoint, self.timeout, self.retries)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.epochs, self.batch_size, self.temperature, self.seed,
                           hidden=self.hidden)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    data = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    data.update({key: val for key, val in overrides.items() if val is not None})
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def prepare_out(cfg: RunConfig) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(cfg.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return cfg.out


def _need(value, flag):
    if not value:
        raise ConfigError(f"{flag} is required for this command")
    return value


def _split(cfg: RunConfig, need_test: bool = True) -> DatasetSplit:
    train = _need(cfg.train, "--train")
    if need_test:
        split = load_split(train, cfg.dev, _need(cfg.test, "--test"))
    else:
        if not os.path.exists(train):
            raise ConfigError(f"train file missing: {train!r}")
        split = DatasetSplit(
            train=read_triples(train),
            dev=read_triples(cfg.dev) if cfg.dev else [],
            test=read_triples(cfg.test) if cfg.test else [],
        )
    if cfg.mask > 0:
        split, masked = mask_relations(split, cfg.mask, cfg.seed)
        log.info("masked %d relation type(s) from train: %s", len(masked), ", ".join(masked))
    return split


def _read_rows(path: str, min_fields: int) -> list[list[str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < min_fields:
                raise KGError(f"{path}:{lineno}: expected at least {min_fields} tab-separated fields")
            rows.append(parts)
    return rows


def _pairs(cfg: RunConfig, split: DatasetSplit) -> list[tuple[int, int | None, int]]:
    """Id triples to process: ``--pairs`` rows (no relation) or the test triples."""
    kg = split.kg
    if cfg.pairs:
        return [(kg.entity_id(h), None, kg.entity_id(t)) for h, t, *_ in _read_rows(cfg.pairs, 2)]
    if split.test:
        return [(kg.entity_id(h), kg.relation_id(r), kg.entity_id(t)) for h, r, t in split.test]
    raise ConfigError("no pairs to process: give --pairs or --test")


def _candidates(cfg: RunConfig) -> dict[tuple[str, str], list[str]] | None:
    if not cfg.candidates:
        return None
    return {(row[0], row[1]): row[2:] for row in _read_rows(cfg.candidates, 3)}


def _tg(kg, s, r, t, cfg):
    exclude = (s, r, t) if r is not None else None
    return extract_transition_graph(kg, s, t, cfg.k, exclude=exclude, backend=cfg.backend)


def _load_model(cfg: RunConfig) -> tuple[EncoderParams, list[str]]:
    model = _need(cfg.model, "--model")
    params_path = os.path.join(model, "params.bin")
    rel_path = os.path.join(model, "relations.tsv")
    if not os.path.exists(params_path) or not os.path.exists(rel_path):
        raise ConfigError(f"{model} is not a trained model directory (needs params.bin and relations.tsv)")
    params = EncoderParams.load(params_path)
    if params.dim != cfg.dim:
        raise ConfigError(f"model was trained with dim {params.dim}, config has dim {cfg.dim}")
    with open(rel_path, encoding="utf-8") as fh:
        relations = [line.rstrip("\n").split("\t", 1)[1] for line in fh if line.strip()]
    return params, relations


def _say(msg: str) -> None:
    print(msg, flush=True)


def cmd_ingest(cfg: RunConfig) -> int:
    split = _split(cfg, need_test=False)
    out = prepare_out(cfg)
    kg = split.kg
    kg.dump_vocab(out)
    summary = {**split.sizes(), "entities": kg.num_entities, "relations": kg.num_relations,
               "graph_triples": kg.num_triples}
    with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    _say(" ".join(f"{key}={val}" for key, val in summary.items()))
    return EXIT_OK


def _index_writer(path, header):
    fh = open(path, "w", encoding="utf-8", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    return fh, w


def cmd_extract(cfg: RunConfig) -> int:
    split = _split(cfg, need_test=False)
    out = prepare_out(cfg)
    kg = split.kg
    os.makedirs(os.path.join(out, "tg"), exist_ok=True)
    fh, w = _index_writer(os.path.join(out, "index.csv"), ["index", "head", "tail", "nodes", "edges", "file"])
    with fh:
        for i, (s, r, t) in enumerate(_pairs(cfg, split)):
            tg = _tg(kg, s, r, t, cfg)
            name = os.path.join("tg", f"{i:05d}.tsv")
            write_transition_graph(tg, os.path.join(out, name))
            w.writerow([i, kg.entities[s], kg.entities[t], tg.num_nodes if not tg.is_empty() else 0,
                        tg.num_edges, name])
            _say(f"{kg.entities[s]} -> {kg.entities[t]}: edges={tg.num_edges}")
    return EXIT_OK


def cmd_condense(cfg: RunConfig) -> int:
    split = _split(cfg, need_test=False)
    out = prepare_out(cfg)
    kg = split.kg
    os.makedirs(os.path.join(out, "cg"), exist_ok=True)
    fh, w = _index_writer(os.path.join(out, "index.csv"), ["index", "head", "tail", "condensed", "file"])
    with fh:
        for i, (s, r, t) in enumerate(_pairs(cfg, split)):
            cg = build_condensed_graph(_tg(kg, s, r, t, cfg), backend=cfg.backend)
            name = os.path.join("cg", f"{i:05d}.tsv")
            write_condensed_graph(cg, os.path.join(out, name))
            w.writerow([i, kg.entities[s], kg.entities[t], len(cg), name])
            _say(f"{kg.entities[s]} -> {kg.entities[t]}: condensed={len(cg)}")
    return EXIT_OK


def cmd_stats(cfg: RunConfig) -> int:
    split = _split(cfg, need_test=False)
    out = prepare_out(cfg)
    kg = split.kg
    rows = []
    fh, w = _index_writer(os.path.join(out, "stats.csv"),
                          ["head", "tail", "edges", "enumerated", "condensed", "ratio", "truncated"])
    with fh:
        for s, r, t in _pairs(cfg, split):
            tg = _tg(kg, s, r, t, cfg)
            cg = build_condensed_graph(tg, backend=cfg.backend)
            pc = path_count_stats(tg, cg, cfg.cap, backend=cfg.backend)
            rows.append(pc)
            w.writerow([kg.entities[s], kg.entities[t], tg.num_edges, pc.enumerated, pc.condensed,
                        repr(pc.ratio), int(pc.truncated)])
            flag = " (truncated)" if pc.truncated else ""
            _say(f"{kg.entities[s]} -> {kg.entities[t]}: enumerated={pc.enumerated} "
                 f"condensed={pc.condensed}{flag}")
    mean_enum = float(np.mean([p.enumerated for p in rows]))
    mean_cond = float(np.mean([p.condensed for p in rows]))
    summary = {"pairs": len(rows), "mean_enumerated": mean_enum, "mean_condensed": mean_cond,
               "truncated": sum(p.truncated for p in rows)}
    with open(os.path.join(out, "stats.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    _say(f"mean enumerated={mean_enum:.2f} condensed={mean_cond:.2f} over {len(rows)} pair(s)")
    return EXIT_OK


def _training_pairs(cfg: RunConfig, split: DatasetSplit) -> list[tuple[int, int, int]]:
    kg = split.kg
    source = split.test if split.test else split.train
    pairs = [(kg.entity_id(h), kg.relation_id(r), kg.entity_id(t)) for h, r, t in source]
    if len(pairs) > cfg.max_pairs:
        keep = np.sort(np.random.default_rng(cfg.seed).choice(len(pairs), cfg.max_pairs, replace=False))
        pairs = [pairs[i] for i in keep]
    return pairs


def cmd_train(cfg: RunConfig) -> int:
    split = _split(cfg, need_test=False)
    out = prepare_out(cfg)
    kg = split.kg
    pairs = _training_pairs(cfg, split)
    embedder = make_embedder(cfg.embedder_config())
    result = train_encoder(cfg.train_config(), pairs, kg, embedder, cfg.k, cfg.cap, cfg.backend)
    result.params.save(os.path.join(out, "params.bin"))
    result.write_loss_csv(os.path.join(out, "loss.csv"))
    Vocab(kg.relations).dump(os.path.join(out, "relations.tsv"))
    first = result.losses[0] if result.losses else float("nan")
    last = result.losses[-1] if result.losses else float("nan")
    _say(f"trained on {len(pairs)} pair(s), {cfg.epochs} epoch(s): loss {first:.6f} -> {last:.6f}")
    return EXIT_OK


def cmd_embed(cfg: RunConfig) -> int:
    split = _split(cfg, need_test=False)
    params, _ = _load_model(cfg)
    out = prepare_out(cfg)
    kg = split.kg
    pairs = _pairs(cfg, split)
    embedder = make_embedder(cfg.embedder_config())
    vecs = condensed_embeddings(kg, pairs, params, cfg.embedder_config(), cfg.k, cfg.resolved_jobs(),
                                cfg.backend, embedder=embedder)
    proj = PrefixProjection.init(cfg.dim, cfg.l, cfg.d_llm or cfg.dim, cfg.seed)
    cands = _candidates(cfg) or {}
    os.makedirs(os.path.join(out, "prefix"), exist_ok=True)
    fh, w = _index_writer(os.path.join(out, "embeddings.csv"),
                          ["index", "head", "tail", "empty"] + [f"v{j}" for j in range(cfg.dim)])
    with fh:
        for i, ((s, _, t), g) in enumerate(zip(pairs, vecs)):
            names = (kg.entities[s], kg.entities[t])
            rels = cands.get(names, list(kg.relations))
            bundle = assemble_prompt(project_to_prefix(proj, g), cfg.instruction, *names, rels)
            export_prefix(bundle, os.path.join(out, "prefix", f"{i:05d}.json"))
            w.writerow([i, *names, int(g.empty)] + [repr(float(x)) for x in g.vector])
    _say(f"exported {len(pairs)} prefix file(s) with l={cfg.l}")
    return EXIT_OK


def _generator(cfg: RunConfig, kg, params):
    """Generation callback for the llm-generation scorer, by entity names."""
    endpoint = _need(cfg.endpoint, "--endpoint")
    embedder = make_embedder(cfg.embedder_config())
    proj = PrefixProjection.init(cfg.dim, cfg.l, cfg.d_llm or cfg.dim, cfg.seed) if params is not None else None
    rels = list(kg.relations)

    def generate(s_name: str, t_name: str) -> str:
        s, t = kg.entity_id(s_name), kg.entity_id(t_name)
        if params is not None:
            g = condensed_embedding(kg, (s, None, t), params, embedder, cfg.k, cfg.backend)
            prompt = assemble_prompt(project_to_prefix(proj, g), cfg.instruction, s_name, t_name, rels)
        else:
            tg = extract_transition_graph(kg, s, t, cfg.k, backend=cfg.backend)
            paths = enumerate_paths(tg, cfg.cap, backend=cfg.backend).paths
            prompt, _ = assemble_hard_prompt(paths, kg, cfg.instruction, s_name, t_name, rels)
        return llm_generate(endpoint, prompt, cfg.timeout, cfg.retries)

    return generate


def _predict(cfg: RunConfig):
    split = _split(cfg)
    params, train_rels = (None, None)
    if cfg.model:
        params, train_rels = _load_model(cfg)
    elif cfg.scorer == "embedding-similarity":
        raise ConfigError("embedding-similarity needs --model (a directory written by 'train')")
    generate = _generator(cfg, split.kg, params) if cfg.scorer == "llm-generation" else None
    records = evaluate_split(split, cfg.scorer, cfg.embedder_config(), params, train_rels, _candidates(cfg),
                             generate, cfg.k, cfg.resolved_jobs(), cfg.backend)
    return records


def cmd_predict(cfg: RunConfig) -> int:
    records = _predict(cfg)
    out = prepare_out(cfg)
    write_predictions(records, os.path.join(out, "predictions.csv"))
    _say(f"wrote {len(records)} prediction(s) with scorer {cfg.scorer}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig) -> int:
    records = _predict(cfg)
    out = prepare_out(cfg)
    write_predictions(records, os.path.join(out, "predictions.csv"))
    metrics = micro_prf(records)
    write_metrics(metrics, os.path.join(out, "metrics.json"))
    _say(f"precision={metrics.precision:.4f} recall={metrics.recall:.4f} f1={metrics.f1:.4f} n={metrics.n}")
    return EXIT_OK


def cmd_bench(cfg: RunConfig) -> int:
    out = prepare_out(cfg)
    backends = None if cfg.kernel == "auto" else [cfg.kernel]
    rows, fits = run_bench(cfg.bench_sizes, backends, cfg.bench_width, cfg.seed, cfg.cap, cfg.bench_repeats, cfg.k)
    write_bench(rows, fits, os.path.join(out, "bench.csv"), os.path.join(out, "bench.json"))
    for r in rows:
        flag = "+ (truncated)" if r.truncated else ""
        _say(f"{r.backend:7s} m={r.m:<7d} seconds={r.seconds:.6f} enumerated={r.enumerated}{flag}")
    for f in fits:
        _say(f"{f.backend:7s} fit seconds = {f.slope:.3e} * m + {f.intercept:.3e}  R^2={f.r2:.4f}")
    return EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    """Write two toy splits with disjoint relation vocabularies plus the diamond graph."""
    out = prepare_out(cfg)
    for name, prefix, seed_off, n in (("source", "alpha", 0, 32), ("target", "beta", 1, 40)):
        triples, gold = toy_relational_triples(n, relation_prefix=prefix, entity_prefix=prefix[0],
                                               seed=cfg.seed + seed_off)
        gold_set = set(gold)
        d = os.path.join(out, name)
        os.makedirs(d, exist_ok=True)
        _write_triples(os.path.join(d, "train.tsv"), [x for x in triples if x not in gold_set])
        _write_triples(os.path.join(d, "test.tsv"), gold)
    _write_triples(os.path.join(out, "diamond.tsv"), [
        Triple("s", "r", "a"), Triple("a", "r", "t"), Triple("s", "r", "b"), Triple("b", "r", "t"),
        Triple("a", "r", "c"),
    ])
    with open(os.path.join(out, "diamond_pairs.tsv"), "w", encoding="utf-8") as fh:
        fh.write("s\tt\n")
    _say(f"wrote toy datasets under {out}")
    return EXIT_OK


def _write_triples(path, triples) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for h, r, t in triples:
            fh.write(f"{h}\t{r}\t{t}\n")


COMMANDS = {
    "ingest": (cmd_ingest, "load a split, intern names, write vocabularies"),
    "extract": (cmd_extract, "write the k-hop transition graph of each pair"),
    "condense": (cmd_condense, "write the condensed graph of each pair"),
    "stats": (cmd_stats, "enumerated versus condensed path counts per pair"),
    "train": (cmd_train, "train the condensed-graph encoder contrastively"),
    "embed": (cmd_embed, "export soft-prompt prefix vectors per pair"),
    "predict": (cmd_predict, "score candidate relations for each test pair"),
    "eval": (cmd_eval, "predict and report micro precision/recall/F1"),
    "bench": (cmd_bench, "time condensation against transition-graph size"),
    "synth": (cmd_synth, "write seeded toy datasets"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration (flags override --config)")
    g.add_argument("--config", help="JSON file with RunConfig keys")
    g.add_argument("--train")
    g.add_argument("--dev")
    g.add_argument("--test")
    g.add_argument("--pairs", help="TSV of head<TAB>tail name pairs")
    g.add_argument("--candidates", help="TSV of head<TAB>tail<TAB>rel<TAB>rel...")
    g.add_argument("--model", help="directory written by 'train'")
    g.add_argument("--out")
    g.add_argument("--k", type=int)
    g.add_argument("--cap", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--jobs", type=int)
    g.add_argument("--kernel", help="auto, cython or python")
    g.add_argument("--scorer", choices=SCORERS)
    g.add_argument("--mask", type=float)
    g.add_argument("--embedder", choices=EMBED_BACKENDS)
    g.add_argument("--table")
    g.add_argument("--dim", type=int)
    g.add_argument("--endpoint")
    g.add_argument("--epochs", type=int)
    g.add_argument("--l", type=int)
    g.add_argument("--d-llm", dest="d_llm", type=int)
    g.add_argument("--sizes", dest="bench_sizes", type=lambda s: [int(x) for x in s.split(",")],
                   help="comma-separated bench sizes")
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="kgcondense", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    overrides = {key: val for key, val in vars(args).items() if key not in ("command", "config", "verbose")}
    fn = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config, overrides)
        return fn(cfg)
    except ConfigError as exc:
        print(f"kgcondense: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ZeroShotLeakError as exc:
        print(f"kgcondense: zero-shot violation: {exc}", file=sys.stderr)
        return EXIT_LEAK
    except TransportError as exc:
        print(f"kgcondense: transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (KGError, KeyError, OSError) as exc:
        print(f"kgcondense: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"kgcondense: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
