"""Command line interface.

Subcommands: ``search`` (es or ds), ``single`` (one task), ``grid2``
(exhaustive 2-task weight grid), ``theory-check``, ``sbm-gen``, ``eval``.
Configuration comes from built-in defaults, optionally overridden by a
JSON file (``--config``) and dotted-path assignments (``--set a.b=v``).
Exit codes: 0 success, 2 invalid configuration, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from ._kernels import BACKEND
from .encoder import (EncoderConfig, encode, load_checkpoint,
                      save_checkpoint)
from .errors import AutosslError, ConfigError
from .evaluation import (cluster_eval, graph_stats, logistic_probe,
                         make_split, nmi)
from .clustering import kmeans
from .graph import (Graph, homophily, load_graph, save_graph, sbm_generate)
from .rng import RngStream
from .search_ds import DsConfig, run_ds
from .search_es import EsConfig, evaluate_candidate, run_es
from .tasks import TASK_NAMES, TaskConfig
from .theory import builtin_verification_corpus, verify_theorem
from .training import TrainConfig, train_with_weights, make_tasks

DEFAULT_CONFIG = {
    "tasks": {
        "names": list(TASK_NAMES),
        "clu_parts": 10,
        "par_clusters": 10,
        "pairsim_pairs": 2000,
        "pairdis_pairs": 2000,
        "pairdis_cap": 4,
        "dgi_samples": 2000,
    },
    "encoder": {"hidden": 512, "learning_rate": 0.001, "prelu_init": 0.25},
    "train": {"epochs": 1000},
    "es": {
        "rounds": 40,
        "population": 8,
        "sigma0": 0.3,
        "k_clusters": 5,
        "kmeans_restarts": 3,
        "workers": 0,
    },
    "ds": {
        "outer_lr": 0.05,
        "lambda_init": 0.5,
        "k_clusters": 5,
        "eval_interval": 20,
        "two_sigma_sq": 0.001,
        "step_kmeans_restarts": 1,
        "eval_kmeans_restarts": 3,
    },
    "eval": {
        "k_clusters": None,
        "split": [0.1, 0.1, 0.8],
        "l2": 1e-4,
        "probe_max_iter": 2000,
        "interval": 20,
    },
    "sbm": {
        "block_sizes": [50, 50],
        "p_in": 0.2,
        "p_out": 0.05,
        "feature_noise": 0.1,
    },
}


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

def _merge(base: dict, override: dict, prefix: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config field: {prefix}{key}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(
                    f"config field {prefix}{key} must be an object")
            out[key] = _merge(base[key], value, f"{prefix}{key}.")
        else:
            out[key] = value
    return out


def _apply_set(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects path=value, got {assignment!r}")
    path, _, raw = assignment.partition("=")
    keys = path.strip().split(".")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node, dict) or k not in node:
            raise ConfigError(f"unknown config field: {path.strip()}")
        node = node[k]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ConfigError(f"unknown config field: {path.strip()}")
    node[keys[-1]] = value


def _require(condition: bool, field: str, message: str) -> None:
    if not condition:
        raise ConfigError(f"config field {field}: {message}")


def _validate(cfg: dict) -> None:
    t = cfg["tasks"]
    names = t["names"]
    _require(isinstance(names, (list, tuple)) and len(names) > 0,
             "tasks.names", "must be a non-empty list")
    _require(len(set(names)) == len(names), "tasks.names",
             "must not repeat a task")
    for name in names:
        _require(name in TASK_NAMES, "tasks.names",
                 f"unknown task {name!r} (known: {', '.join(TASK_NAMES)})")
    for field in ("clu_parts", "par_clusters", "pairsim_pairs",
                  "pairdis_pairs", "dgi_samples"):
        _require(isinstance(t[field], int) and t[field] >= 1,
                 f"tasks.{field}", "must be a positive integer")
    _require(isinstance(t["pairdis_cap"], int) and t["pairdis_cap"] >= 2,
             "tasks.pairdis_cap", "must be an integer >= 2")

    e = cfg["encoder"]
    _require(isinstance(e["hidden"], int) and e["hidden"] >= 1,
             "encoder.hidden", "must be a positive integer")
    _require(float(e["learning_rate"]) > 0, "encoder.learning_rate",
             "must be positive")

    _require(isinstance(cfg["train"]["epochs"], int)
             and cfg["train"]["epochs"] >= 1,
             "train.epochs", "must be a positive integer")

    es = cfg["es"]
    _require(isinstance(es["rounds"], int) and es["rounds"] >= 1,
             "es.rounds", "must be a positive integer")
    _require(isinstance(es["population"], int) and es["population"] >= 2,
             "es.population", "must be an integer >= 2")
    _require(float(es["sigma0"]) > 0, "es.sigma0", "must be positive")
    _require(isinstance(es["k_clusters"], int) and es["k_clusters"] >= 2,
             "es.k_clusters", "must be an integer >= 2")
    _require(isinstance(es["workers"], int) and es["workers"] >= 0,
             "es.workers", "must be a nonnegative integer")

    ds = cfg["ds"]
    _require(float(ds["outer_lr"]) > 0, "ds.outer_lr", "must be positive")
    _require(0.0 <= float(ds["lambda_init"]) <= 1.0, "ds.lambda_init",
             "must lie in [0, 1]")
    _require(isinstance(ds["k_clusters"], int) and ds["k_clusters"] >= 2,
             "ds.k_clusters", "must be an integer >= 2")
    _require(isinstance(ds["eval_interval"], int)
             and ds["eval_interval"] >= 1,
             "ds.eval_interval", "must be a positive integer")
    _require(float(ds["two_sigma_sq"]) > 0, "ds.two_sigma_sq",
             "must be positive")

    ev = cfg["eval"]
    _require(ev["k_clusters"] is None
             or (isinstance(ev["k_clusters"], int) and ev["k_clusters"] >= 2),
             "eval.k_clusters", "must be null or an integer >= 2")
    split = ev["split"]
    _require(isinstance(split, (list, tuple)) and len(split) == 3
             and all(float(x) >= 0 for x in split)
             and abs(sum(float(x) for x in split) - 1.0) < 1e-9,
             "eval.split", "must be three nonnegative fractions summing to 1")

    s = cfg["sbm"]
    _require(isinstance(s["block_sizes"], (list, tuple))
             and len(s["block_sizes"]) >= 1
             and all(isinstance(b, int) and b > 0 for b in s["block_sizes"]),
             "sbm.block_sizes", "must be a list of positive integers")
    for field in ("p_in", "p_out"):
        _require(0.0 <= float(s[field]) <= 1.0, f"sbm.{field}",
                 "must lie in [0, 1]")
    _require(float(s["feature_noise"]) >= 0, "sbm.feature_noise",
             "must be nonnegative")


def resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a JSON object")
        cfg = _merge(cfg, loaded)
    for assignment in getattr(args, "set", None) or []:
        _apply_set(cfg, assignment)
    # explicit convenience flags take highest precedence
    flag_map = [
        ("rounds", ("es", "rounds")),
        ("population", ("es", "population")),
        ("workers", ("es", "workers")),
        ("epochs", ("train", "epochs")),
        ("hidden", ("encoder", "hidden")),
    ]
    for attr, (section, field) in flag_map:
        value = getattr(args, attr, None)
        if value is not None:
            cfg[section][field] = value
    _validate(cfg)
    return cfg


def _build_train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        epochs=cfg["train"]["epochs"],
        encoder=EncoderConfig(
            hidden=cfg["encoder"]["hidden"],
            learning_rate=float(cfg["encoder"]["learning_rate"]),
            prelu_init=float(cfg["encoder"]["prelu_init"]),
        ),
        tasks=TaskConfig(
            names=tuple(cfg["tasks"]["names"]),
            clu_parts=cfg["tasks"]["clu_parts"],
            par_clusters=cfg["tasks"]["par_clusters"],
            pairsim_pairs=cfg["tasks"]["pairsim_pairs"],
            pairdis_pairs=cfg["tasks"]["pairdis_pairs"],
            pairdis_cap=cfg["tasks"]["pairdis_cap"],
            dgi_samples=cfg["tasks"]["dgi_samples"],
        ),
    )


def _build_es_config(cfg: dict) -> EsConfig:
    es = cfg["es"]
    return EsConfig(rounds=es["rounds"], population=es["population"],
                    sigma0=float(es["sigma0"]), k_clusters=es["k_clusters"],
                    kmeans_restarts=es["kmeans_restarts"],
                    workers=es["workers"])


def _build_ds_config(cfg: dict) -> DsConfig:
    ds = cfg["ds"]
    return DsConfig(outer_lr=float(ds["outer_lr"]),
                    lambda_init=float(ds["lambda_init"]),
                    k_clusters=ds["k_clusters"],
                    eval_interval=ds["eval_interval"],
                    two_sigma_sq=float(ds["two_sigma_sq"]),
                    step_kmeans_restarts=ds["step_kmeans_restarts"],
                    eval_kmeans_restarts=ds["eval_kmeans_restarts"])


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


class TrajectoryWriter:
    """CSV stream flushed row by row, so crashes keep partial progress."""

    def __init__(self, path, task_names):
        self.path = Path(path)
        self.fh = open(self.path, "w")
        cols = (["iter"] + [f"lambda_{n}" for n in task_names]
                + ["objective", "pseudo_homophily", "nmi", "acc", "ms"])
        self.fh.write(",".join(cols) + "\n")
        self.fh.flush()
        self.rows = 0

    def row(self, iteration, lambdas, objective, ph=None, score=None,
            acc=None, ms=0):
        fields = ([str(int(iteration))] + [_fmt(x) for x in lambdas]
                  + [_fmt(objective), _fmt(ph), _fmt(score), _fmt(acc),
                     str(int(ms))])
        self.fh.write(",".join(fields) + "\n")
        self.fh.flush()
        self.rows += 1

    def close(self):
        self.fh.close()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if math.isnan(x) else x
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_summary(out_dir: Path, payload: dict) -> None:
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _final_metrics(graph: Graph, encoder, cfg: dict, rng: RngStream):
    """Probe accuracy and cluster NMI of a trained encoder, when labels
    exist. Returns a dict merged into the summary."""
    if encoder is None:
        return {}
    z = encode(graph, encoder)
    out = {}
    k = cfg["eval"]["k_clusters"]
    if graph.labels is not None:
        out["nmi"] = cluster_eval(z, graph.labels, rng.child(0), k=k)
        split = make_split(graph.num_nodes, rng.child(1),
                           tuple(float(x) for x in cfg["eval"]["split"]))
        probe = logistic_probe(z, graph.labels, split,
                               l2=float(cfg["eval"]["l2"]),
                               max_iter=cfg["eval"]["probe_max_iter"])
        out["accuracy"] = probe.accuracy
        out["probe_converged"] = probe.converged
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _prepare_run(args, need_graph=True):
    cfg = resolve_config(args)
    out_dir = Path(args.out) if getattr(args, "out", None) else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    graph = load_graph(args.graph) if need_graph else None
    rng = RngStream(args.seed)
    return cfg, out_dir, graph, rng


def cmd_search(args) -> int:
    cfg, out_dir, graph, rng = _prepare_run(args)
    train_cfg = _build_train_config(cfg)
    task_names = train_cfg.tasks.names
    tasks = make_tasks(graph, train_cfg.tasks, rng.child(100))
    writer = TrajectoryWriter(out_dir / "trajectory.csv", task_names)
    t_start = time.perf_counter()

    if args.algo == "es":
        es_cfg = _build_es_config(cfg)

        def on_rec(rec):
            writer.row(rec.generation * es_cfg.population + rec.candidate,
                       rec.weights, rec.fitness, ph=rec.fitness,
                       score=rec.nmi, ms=rec.ms)

        result = run_es(graph, tasks, es_cfg, train_cfg, rng.child(101),
                        on_record=on_rec)
        best_weights = result.best_weights
        best_ph = result.best_fitness
        best_encoder = result.best_encoder
        extra = {"generations": result.generations}
    else:
        ds_cfg = _build_ds_config(cfg)

        def on_rec(rec):
            writer.row(rec.iteration, rec.weights, rec.smooth_loss,
                       ph=rec.pseudo_homophily, score=rec.nmi, ms=rec.ms)

        result = run_ds(graph, tasks, ds_cfg, train_cfg, rng.child(101),
                        on_record=on_rec)
        best_weights = result.final_weights
        best_ph = result.best_pseudo_homophily
        best_encoder = result.best_encoder
        extra = {"best_iteration": result.best_iteration,
                 "final_weights": dict(zip(task_names,
                                           result.final_weights))}
    t_search = time.perf_counter() - t_start

    metrics = _final_metrics(graph, best_encoder, cfg, rng.child(102))
    t_eval = time.perf_counter() - t_start - t_search
    if best_encoder is not None:
        save_checkpoint(out_dir / "checkpoint.npz", best_encoder)

    summary = {
        "command": "search",
        "algo": args.algo,
        "seed": args.seed,
        "backend": BACKEND,
        "graph": graph_stats(graph),
        "tasks": list(task_names),
        "best": {"weights": dict(zip(task_names, best_weights)),
                 "pseudo_homophily": best_ph, **metrics},
        "timings_s": {"search": round(t_search, 3),
                      "final_eval": round(t_eval, 3),
                      "total": round(t_search + t_eval, 3)},
        "trajectory_rows": writer.rows,
        **extra,
    }
    _write_summary(out_dir, summary)
    writer.close()
    print(f"search[{args.algo}] best pseudo-homophily {best_ph:.4f} "
          f"({writer.rows} rows) -> {out_dir}")
    return 0


def cmd_single(args) -> int:
    cfg, out_dir, graph, rng = _prepare_run(args)
    cfg["tasks"]["names"] = [args.task]
    _validate(cfg)
    train_cfg = _build_train_config(cfg)
    tasks = make_tasks(graph, train_cfg.tasks, rng.child(100))
    writer = TrajectoryWriter(out_dir / "trajectory.csv", (args.task,))
    t_start = time.perf_counter()

    # mirrors evaluate_candidate's stream layout so that a grid2 cell at
    # weight (1, 0) reproduces this run exactly
    run_rng = rng.child(5)
    fitness, score, encoder = evaluate_candidate(
        graph, tasks, np.ones(1), train_cfg, cfg["es"]["k_clusters"],
        cfg["es"]["kmeans_restarts"], run_rng)
    t_train = time.perf_counter() - t_start
    writer.row(0, [1.0], fitness, ph=fitness, score=score,
               ms=int(1000 * t_train))

    metrics = _final_metrics(graph, encoder, cfg, rng.child(102))
    t_eval = time.perf_counter() - t_start - t_train
    if encoder is not None:
        save_checkpoint(out_dir / "checkpoint.npz", encoder)
    summary = {
        "command": "single",
        "task": args.task,
        "seed": args.seed,
        "backend": BACKEND,
        "graph": graph_stats(graph),
        "best": {"weights": {args.task: 1.0},
                 "pseudo_homophily": fitness, **metrics},
        "timings_s": {"search": round(t_train, 3),
                      "final_eval": round(t_eval, 3),
                      "total": round(t_train + t_eval, 3)},
        "trajectory_rows": writer.rows,
    }
    _write_summary(out_dir, summary)
    writer.close()
    print(f"single[{args.task}] pseudo-homophily {fitness:.4f} -> {out_dir}")
    return 0


def cmd_grid2(args) -> int:
    cfg, out_dir, graph, rng = _prepare_run(args)
    pair = [s.strip() for s in args.tasks.split(",")]
    if len(pair) != 2 or pair[0] == pair[1]:
        raise ConfigError(f"--tasks needs two distinct task names, "
                          f"got {args.tasks!r}")
    cfg["tasks"]["names"] = pair
    _validate(cfg)
    if args.steps < 2:
        raise ConfigError(f"--steps must be >= 2, got {args.steps}")
    train_cfg = _build_train_config(cfg)
    tasks = make_tasks(graph, train_cfg.tasks, rng.child(100))
    values = np.linspace(0.0, 1.0, args.steps)

    t_start = time.perf_counter()
    best = {"pseudo_homophily": -np.inf}
    path = out_dir / "heatmap.csv"
    with open(path, "w") as fh:
        fh.write(f"w_{pair[0]},w_{pair[1]},pseudo_homophily,nmi\n")
        fh.flush()
        for wa in values:
            for wb in values:
                # every cell restarts from the same stream: cells differ
                # only in their weights
                fitness, score, _ = evaluate_candidate(
                    graph, tasks, np.array([wa, wb]), train_cfg,
                    cfg["es"]["k_clusters"], cfg["es"]["kmeans_restarts"],
                    rng.child(5))
                fh.write(f"{_fmt(wa)},{_fmt(wb)},{_fmt(fitness)},"
                         f"{_fmt(score)}\n")
                fh.flush()
                if fitness > best["pseudo_homophily"]:
                    best = {"weights": {pair[0]: wa, pair[1]: wb},
                            "pseudo_homophily": fitness,
                            "nmi": score}
    summary = {
        "command": "grid2",
        "tasks": pair,
        "steps": args.steps,
        "seed": args.seed,
        "backend": BACKEND,
        "graph": graph_stats(graph),
        "best": best,
        "timings_s": {"total": round(time.perf_counter() - t_start, 3)},
    }
    _write_summary(out_dir, summary)
    print(f"grid2[{pair[0]},{pair[1]}] best pseudo-homophily "
          f"{best['pseudo_homophily']:.4f} -> {out_dir}")
    return 0


def cmd_theory_check(args) -> int:
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    if args.graph:
        graph = load_graph(args.graph)
        if graph.labels is None:
            raise ConfigError("theory-check needs labels.txt in the graph "
                              "directory")
        corpus = [(Path(args.graph).name, graph)]
    else:
        corpus = builtin_verification_corpus()
    reports = []
    failures = 0
    for name, graph in corpus:
        report = verify_theorem(graph, name=name)
        reports.append(report)
        failures += report["violations"] + (0 if report["monotone"] else 1)
        gap = report["min_gap"]
        print(f"{name}: checked={report['num_checked']} "
              f"violations={report['violations']} "
              f"min_gap={'n/a' if gap is None else f'{gap:.6f}'} "
              f"monotone={report['monotone']}")
    if out_dir is not None:
        with open(out_dir / "theory_report.json", "w") as fh:
            json.dump(_jsonable(reports), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if failures:
        print(f"FAILED: {failures} violation(s)", file=sys.stderr)
        return 3
    return 0


def cmd_sbm_gen(args) -> int:
    cfg = resolve_config(args)
    s = cfg["sbm"]
    if args.blocks:
        try:
            s["block_sizes"] = [int(x) for x in args.blocks.split(",")]
        except ValueError:
            raise ConfigError(f"--blocks must be comma-separated integers, "
                              f"got {args.blocks!r}")
    if args.p_in is not None:
        s["p_in"] = args.p_in
    if args.p_out is not None:
        s["p_out"] = args.p_out
    if args.noise is not None:
        s["feature_noise"] = args.noise
    _validate(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph = sbm_generate(s["block_sizes"], float(s["p_in"]),
                         float(s["p_out"]), float(s["feature_noise"]),
                         RngStream(args.seed))
    save_graph(out_dir, graph)
    meta = {
        "generator": "sbm",
        "seed": args.seed,
        "params": s,
        "stats": graph_stats(graph),
    }
    with open(out_dir / "meta.json", "w") as fh:
        json.dump(_jsonable(meta), fh, indent=2, sort_keys=True)
        fh.write("\n")
    h = meta["stats"].get("homophily")
    print(f"sbm-gen: {graph.num_nodes} nodes, {graph.num_edges} edges"
          + (f", homophily {h:.4f}" if h is not None else "")
          + f" -> {out_dir}")
    return 0


def cmd_eval(args) -> int:
    cfg, out_dir, graph, rng = _prepare_run(args)
    report = {"command": "eval", "graph": graph_stats(graph),
              "backend": BACKEND, "seed": args.seed}
    if args.checkpoint:
        ckpt = Path(args.checkpoint)
        if not ckpt.is_file():
            raise ConfigError(f"checkpoint not found: {ckpt}")
        encoder = load_checkpoint(ckpt)
        z = encode(graph, encoder)
        k = cfg["eval"]["k_clusters"] or cfg["es"]["k_clusters"]
        cluster = kmeans(z, k, rng.child(0),
                         restarts=cfg["es"]["kmeans_restarts"])
        report["pseudo_homophily"] = homophily(graph, cluster.hard_labels)
        report.update(_final_metrics(graph, encoder, cfg, rng.child(102)))
    payload = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    if out_dir is not None:
        (out_dir / "eval.json").write_text(payload + "\n")
    print(payload)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p, graph=True, out_required=True):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", metavar="PATH=VALUE",
                   help="override one config field, e.g. --set es.rounds=5")
    p.add_argument("--seed", type=int, default=0)
    if graph:
        p.add_argument("--graph", required=True,
                       help="graph directory (edges.tsv, features.csv, "
                            "optional labels.txt)")
    p.add_argument("--out", required=out_required,
                   help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autossl",
        description="Search for task-weight combinations that maximize "
                    "pseudo-homophily of a graph encoder.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="run the full weight search")
    _add_common(p)
    p.add_argument("--algo", choices=("es", "ds"), default="es")
    p.add_argument("--rounds", type=int, help="es generations")
    p.add_argument("--population", type=int, help="es population size")
    p.add_argument("--workers", type=int, help="parallel es evaluations")
    p.add_argument("--epochs", type=int, help="inner training steps")
    p.add_argument("--hidden", type=int, help="encoder width")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("single", help="train one task at weight 1.0")
    _add_common(p)
    p.add_argument("--task", required=True, choices=TASK_NAMES)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", type=int)
    p.set_defaults(func=cmd_single)

    p = sub.add_parser("grid2", help="exhaustive 2-task weight grid")
    _add_common(p)
    p.add_argument("--tasks", required=True, metavar="A,B",
                   help="two comma-separated task names")
    p.add_argument("--steps", type=int, default=5,
                   help="grid resolution per axis")
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", type=int)
    p.set_defaults(func=cmd_grid2)

    p = sub.add_parser("theory-check",
                       help="brute-force the agreement bound on small graphs")
    p.add_argument("--graph", help="optional labeled graph directory "
                                   "(defaults to the built-in corpus)")
    p.add_argument("--out", help="where to write theory_report.json")
    p.set_defaults(func=cmd_theory_check)

    p = sub.add_parser("sbm-gen", help="generate a stochastic block model "
                                       "graph directory")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", metavar="PATH=VALUE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blocks", help="comma-separated block sizes")
    p.add_argument("--p-in", dest="p_in", type=float)
    p.add_argument("--p-out", dest="p_out", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sbm_gen)

    p = sub.add_parser("eval", help="statistics / metrics for a graph "
                                    "(optionally with a checkpoint)")
    _add_common(p, out_required=False)
    p.add_argument("--checkpoint", help="checkpoint.npz from a search")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (AutosslError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
