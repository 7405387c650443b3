"""Evolutionary search over task weights with a small CMA-ES.

Each generation samples a population of weight vectors from the current
search distribution (clipped to the unit box), trains a fresh encoder per
candidate, scores it by the homophily of its k-means clustering, and
updates the distribution from the fitness ranking. The CMA-ES update
follows the standard (mu/mu_w, lambda) formulation with cumulative step
size adaptation and rank-one plus rank-mu covariance updates.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clustering import kmeans
from .encoder import EncoderState, encode
from .errors import ConfigError, NumericError
from .evaluation import nmi
from .graph import Graph, homophily
from .rng import RngStream
from .tasks import PretextTask
from .training import TrainConfig, train_with_weights


class CmaEs:
    """Minimal CMA-ES in numpy, maximizing, box-constrained to [lo, hi].

    ``ask`` draws one population; ``tell`` consumes the candidates it
    returned together with their fitnesses. A generation where every
    fitness ties (no ranking signal) leaves the mean and covariance
    untouched and only decays the evolution paths.
    """

    def __init__(self, x0, sigma0: float, popsize: int, rng: RngStream,
                 lo: float = 0.0, hi: float = 1.0):
        x0 = np.asarray(x0, dtype=np.float64)
        if popsize < 2:
            raise ConfigError(f"population must be >= 2, got {popsize}")
        if sigma0 <= 0:
            raise ConfigError(f"sigma0 must be positive, got {sigma0}")
        n = x0.shape[0]
        self.n = n
        self.popsize = popsize
        self.mean = x0.copy()
        self.sigma = float(sigma0)
        self.lo, self.hi = lo, hi
        self.rng = rng

        self.mu = popsize // 2
        w = np.log(popsize / 2 + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / float((self.weights ** 2).sum())
        self.cc = (4 + self.mueff / n) / (n + 4 + 2 * self.mueff / n)
        self.cs = (self.mueff + 2) / (n + self.mueff + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(1 - self.c1,
                       2 * (self.mueff - 2 + 1 / self.mueff)
                       / ((n + 2) ** 2 + self.mueff))
        self.damps = 2 * self.mueff / popsize + 0.3 + self.cs

        self.path_sigma = np.zeros(n)
        self.path_cov = np.zeros(n)
        self.cov = np.eye(n)
        self.generation = 0

    def _decomposition(self):
        self.cov = (self.cov + self.cov.T) / 2.0
        evals, evecs = np.linalg.eigh(self.cov)
        floor = max(float(evals.max()), 1e-30) * 1e-14
        if evals.min() < floor:  # repair a numerically broken covariance
            evals = np.maximum(evals, floor)
            self.cov = (evecs * evals[None, :]) @ evecs.T
        return evals, evecs

    def ask(self) -> np.ndarray:
        evals, evecs = self._decomposition()
        transform = evecs * np.sqrt(evals)[None, :]
        z = self.rng.standard_normal((self.popsize, self.n))
        cands = self.mean[None, :] + self.sigma * z @ transform.T
        np.clip(cands, self.lo, self.hi, out=cands)
        return cands

    def tell(self, candidates: np.ndarray, fitnesses) -> None:
        fitnesses = np.asarray(fitnesses, dtype=np.float64)
        if candidates.shape != (self.popsize, self.n) or \
                fitnesses.shape != (self.popsize,):
            raise ConfigError("tell: shapes do not match the population")
        self.generation += 1
        evals, evecs = self._decomposition()

        if np.all(fitnesses == fitnesses[0]):
            self.path_sigma = (1 - self.cs) * self.path_sigma
            self.path_cov = (1 - self.cc) * self.path_cov
            norm2 = float((self.path_sigma ** 2).sum())
            self.sigma *= np.exp(min(1.0, (self.cs / self.damps)
                                     * (norm2 / self.n - 1) / 2))
            return

        order = np.argsort(-fitnesses, kind="stable")
        elite = candidates[order[:self.mu]]
        old_mean = self.mean.copy()
        self.mean = self.weights @ elite
        y = (self.mean - old_mean) / self.sigma

        inv_sqrt = (evecs / np.sqrt(evals)[None, :]) @ evecs.T
        self.path_sigma = ((1 - self.cs) * self.path_sigma
                           + np.sqrt(self.cs * (2 - self.cs) * self.mueff)
                           * (inv_sqrt @ y))
        norm2 = float((self.path_sigma ** 2).sum())
        hsig = (norm2 / self.n
                / (1 - (1 - self.cs) ** (2 * self.generation))) < 2 + 4 / (self.n + 1)
        self.path_cov = ((1 - self.cc) * self.path_cov
                         + hsig * np.sqrt(self.cc * (2 - self.cc) * self.mueff) * y)

        ys = (elite - old_mean[None, :]) / self.sigma
        c1a = self.c1 * (1 - (1 - float(hsig) ** 2) * self.cc * (2 - self.cc))
        rank_mu = (ys.T * self.weights) @ ys
        self.cov = ((1 - c1a - self.cmu) * self.cov
                    + self.c1 * np.outer(self.path_cov, self.path_cov)
                    + self.cmu * rank_mu)
        self.sigma *= np.exp(min(1.0, (self.cs / self.damps)
                                 * (norm2 / self.n - 1) / 2))


# ---------------------------------------------------------------------------
# candidate evaluation and the search loop
# ---------------------------------------------------------------------------

@dataclass
class EsConfig:
    rounds: int = 40
    population: int = 8
    sigma0: float = 0.3
    k_clusters: int = 5
    kmeans_restarts: int = 3
    workers: int = 0           # 0 or 1 = sequential


@dataclass(eq=False)
class EsRecord:
    generation: int
    candidate: int
    weights: np.ndarray
    fitness: float
    nmi: float    # nan when the graph has no ground-truth labels
    ms: int


@dataclass(eq=False)
class EsResult:
    records: list
    best_weights: np.ndarray
    best_fitness: float
    best_nmi: float
    best_encoder: EncoderState | None
    generations: int


def evaluate_candidate(graph: Graph, tasks: list[PretextTask], weights,
                       train_cfg: TrainConfig, k_clusters: int,
                       kmeans_restarts: int, rng: RngStream):
    """Train one encoder at fixed weights; return (fitness, nmi, encoder).

    A run that diverges (non-finite loss or embeddings) scores -inf so the
    optimizer ranks it last instead of crashing the search.
    """
    try:
        model = train_with_weights(graph, tasks, weights, train_cfg,
                                   rng.child(0))
        z = encode(graph, model.encoder)
        if not np.all(np.isfinite(z)):
            return -np.inf, np.nan, None
        cluster = kmeans(z, k_clusters, rng.child(1),
                         restarts=kmeans_restarts)
        fitness = homophily(graph, cluster.hard_labels)
        score = nmi(cluster.hard_labels, graph.labels) \
            if graph.labels is not None else np.nan
        return fitness, score, model.encoder
    except NumericError:
        return -np.inf, np.nan, None


def _evaluate_by_key(args):
    graph, tasks, weights, train_cfg, k, restarts, seed, key = args
    return evaluate_candidate(graph, tasks, weights, train_cfg, k, restarts,
                              RngStream(seed, key))


def run_es(graph: Graph, tasks: list[PretextTask], es_cfg: EsConfig,
           train_cfg: TrainConfig, rng: RngStream,
           on_record=None) -> EsResult:
    """Full evolutionary search. Deterministic in ``rng`` regardless of
    ``workers``: every candidate evaluation gets a stream keyed by
    (generation, candidate index), not by scheduling order."""
    n_tasks = len(tasks)
    optimizer = CmaEs(np.full(n_tasks, 0.5), es_cfg.sigma0,
                      es_cfg.population, rng.child(0))
    records: list[EsRecord] = []
    best = EsResult(records, np.full(n_tasks, 0.5), -np.inf, np.nan, None, 0)

    pool = None
    if es_cfg.workers and es_cfg.workers > 1:
        pool = ProcessPoolExecutor(max_workers=es_cfg.workers)
    try:
        for gen in range(es_cfg.rounds):
            candidates = optimizer.ask()
            started = time.perf_counter()
            arg_list = [
                (graph, tasks, candidates[i], train_cfg, es_cfg.k_clusters,
                 es_cfg.kmeans_restarts, rng.seed, rng.key + (1, gen, i))
                for i in range(es_cfg.population)
            ]
            if pool is not None:
                outcomes = list(pool.map(_evaluate_by_key, arg_list))
            else:
                outcomes = [_evaluate_by_key(a) for a in arg_list]
            elapsed_ms = int(1000 * (time.perf_counter() - started)
                             / es_cfg.population)
            fitnesses = np.array([o[0] for o in outcomes])
            for i, (fitness, score, enc) in enumerate(outcomes):
                rec = EsRecord(gen, i, candidates[i].copy(), float(fitness),
                               float(score), elapsed_ms)
                records.append(rec)
                if on_record is not None:
                    on_record(rec)
                if fitness > best.best_fitness:
                    best.best_fitness = float(fitness)
                    best.best_weights = candidates[i].copy()
                    best.best_nmi = float(score)
                    best.best_encoder = enc
            optimizer.tell(candidates, np.where(np.isfinite(fitnesses),
                                                fitnesses, -np.inf))
            best.generations = gen + 1
    finally:
        if pool is not None:
            pool.shutdown()
    return best
