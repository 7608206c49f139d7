"""Restoration path search: ITS-MPGA and the shortest-path tree baseline.

A chromosome is a priority permutation over all branches plus one
link-inclusion bit per branch.  Improved topological sorting (ITS) turns it
into a connectivity-respecting restoration order by repeatedly restoring the
highest-priority branch on the frontier of the energized network.

The genetic search keeps several subpopulations that evolve independently
and exchange their best members around a ring.  Fitness is the objective of
the decoded timeline.  The cheap state checks are run for every candidate;
the AC-DC power flow is solved only for candidates about to enter the top
ranks of a subpopulation, and every scheme reported as best has passed it.
"""

from __future__ import annotations

import heapq
import logging
import math
import os
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid_model import GridModel
from .simulate import (
    InfeasibleScheme,
    RestorationScheme,
    SchemeError,
    StepCache,
    Timeline,
    Unreachable,
    simulate,
    trajectory,
    verify_power_flow,
)

__all__ = [
    "NoFeasibleScheme",
    "GaConfig",
    "Chromosome",
    "GenerationRecord",
    "Evaluator",
    "its_repair",
    "random_chromosome",
    "order_crossover",
    "mpga_optimize",
    "dijkstra_baseline",
    "resolve_sources",
]

log = logging.getLogger(__name__)


class NoFeasibleScheme(RuntimeError):
    pass


@dataclass(frozen=True)
class GaConfig:
    """Settings of the multi-population genetic algorithm.

    Crossover probability decays linearly from ``crossover_start`` to
    ``crossover_end`` over the run; mutation probability rises from
    ``mutation_start`` to ``mutation_end``.
    """

    subpopulations: int = 6
    subpop_size: int = 10
    max_generations: int = 200
    migration_rate: float = 0.2
    migration_interval: int = 10
    crossover_start: float = 0.9
    crossover_end: float = 0.6
    mutation_start: float = 0.1
    mutation_end: float = 0.3
    include_prob: float = 0.3
    verify_top: int = 1
    rng_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("subpopulations", "subpop_size", "max_generations", "migration_interval", "verify_top", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        for name in ("migration_rate", "crossover_start", "crossover_end", "mutation_start", "mutation_end", "include_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def crossover_rate(self, gen: int) -> float:
        frac = gen / max(self.max_generations - 1, 1)
        return self.crossover_start + (self.crossover_end - self.crossover_start) * frac

    def mutation_rate(self, gen: int) -> float:
        frac = gen / max(self.max_generations - 1, 1)
        return self.mutation_start + (self.mutation_end - self.mutation_start) * frac


@dataclass
class Chromosome:
    priority: np.ndarray  # permutation of branch positions
    include: np.ndarray  # bool per branch position
    scheme: RestorationScheme | None = None
    fitness: float | None = None
    feasible: bool | None = None


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    subpop: int
    best_f: float
    mean_f: float
    feasible_count: int
    global_best_f: float


# --------------------------------------------------------------------------
# repair


def _adjacency(model: GridModel):
    ids = model.branch_ids
    ends = [model.branch(b).endpoints for b in ids]
    inc: dict[int, list[int]] = {}
    for k, (i, j) in enumerate(ends):
        inc.setdefault(i, []).append(k)
        inc.setdefault(j, []).append(k)
    return ids, ends, inc


def _targets(model: GridModel) -> set[int]:
    return set(model.source_nodes)


def its_repair(model: GridModel, priority: Sequence[int], include: Sequence[bool] | None = None) -> RestorationScheme:
    """Decode a priority permutation into a connectivity-respecting scheme.

    Parameters
    ----------
    priority : sequence of int
        Branch ids, highest priority first.  Must be a permutation of the
        model's branch ids.
    include : sequence of bool, optional
        Link-inclusion flag per branch id in ``model.branch_ids`` order.
        Branches closing a loop are restored only when flagged.

    Raises
    ------
    Unreachable
        The network graph does not connect every source to the black-start node.
    """
    ids, ends, inc = _adjacency(model)
    pos = {b: k for k, b in enumerate(ids)}
    if sorted(priority) != sorted(ids):
        raise SchemeError("priority must be a permutation of the branch ids")
    rank = np.empty(len(ids), dtype=np.int64)
    for r, b in enumerate(priority):
        rank[pos[b]] = r
    if include is None:
        include = np.zeros(len(ids), dtype=bool)
    include = np.asarray(include, dtype=bool)

    start = model.black_start.node
    energized = {start}
    remaining = _targets(model) - energized
    done = np.zeros(len(ids), dtype=bool)
    frontier = set(inc.get(start, ()))
    order: list[int] = []
    links: list[int] = []
    while True:
        best = None
        best_rank = None
        for k in frontier:
            i, j = ends[k]
            closing = i in energized and j in energized
            if closing and not include[k]:
                continue
            if not remaining and not closing:
                continue
            if best_rank is None or rank[k] < best_rank:
                best, best_rank = k, rank[k]
        if best is None:
            break
        frontier.discard(best)
        done[best] = True
        order.append(ids[best])
        i, j = ends[best]
        if i in energized and j in energized:
            links.append(ids[best])
            continue
        new = j if i in energized else i
        energized.add(new)
        remaining.discard(new)
        for k in inc.get(new, ()):
            if not done[k]:
                frontier.add(k)
    if remaining:
        raise Unreachable(f"source node(s) {sorted(remaining)} are disconnected from the black-start unit")
    return RestorationScheme(tuple(order), frozenset(links))


def _amend(chrom: Chromosome, scheme: RestorationScheme, ids: tuple[int, ...]) -> None:
    """Write the repaired order back as the leading genes of the priority."""
    pos = {b: k for k, b in enumerate(ids)}
    head = [pos[b] for b in scheme.order]
    used = set(head)
    tail = [g for g in chrom.priority.tolist() if g not in used]
    chrom.priority = np.array(head + tail, dtype=np.int64)


# --------------------------------------------------------------------------
# variation operators


def random_chromosome(n: int, rng: np.random.Generator, include_prob: float) -> Chromosome:
    return Chromosome(rng.permutation(n).astype(np.int64), rng.random(n) < include_prob)


def order_crossover(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Two-point order crossover: keep a segment of ``a``, fill the rest in ``b``'s order."""
    n = len(a)
    i, j = sorted(rng.choice(n + 1, size=2, replace=False))
    child = np.full(n, -1, dtype=np.int64)
    child[i:j] = a[i:j]
    seg = set(a[i:j].tolist())
    fill = [g for g in b.tolist() if g not in seg]
    child[:i] = fill[:i]
    child[j:] = fill[i:]
    return child


def _swap_mutation(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    p = p.copy()
    i, j = rng.choice(len(p), size=2, replace=False)
    p[i], p[j] = p[j], p[i]
    return p


# --------------------------------------------------------------------------
# evaluation


@dataclass
class _Score:
    fitness: float
    cheap_ok: bool
    verified: bool | None = None


class Evaluator:
    """Memoized fitness of restoration schemes for one model.

    ``score`` runs the decoded trajectory with the state-based checks only;
    ``verify`` adds the AC-DC power flow.  Results are cached on the scheme
    key, so an evaluator can be shared between runs on the same model.
    """

    def __init__(self, model: GridModel):
        self.model = model
        self._cache: dict[tuple, _Score] = {}
        self.steps = StepCache()
        self.simulations = 0
        self.verifications = 0

    def score(self, scheme: RestorationScheme) -> _Score:
        key = scheme.key
        hit = self._cache.get(key)
        if hit is None:
            self.simulations += 1
            try:
                tl = trajectory(self.model, scheme, stop_on_violation=True)
                hit = _Score(tl.objective, tl.feasible)
            except (SchemeError, InfeasibleScheme):
                hit = _Score(math.inf, False, False)
            if not hit.cheap_ok:
                hit.verified = False
            self._cache[key] = hit
        return hit

    def seed(self, scheme: RestorationScheme, score: _Score) -> None:
        self._cache.setdefault(scheme.key, score)

    def verify(self, scheme: RestorationScheme) -> bool:
        s = self.score(scheme)
        if s.verified is None:
            self.verifications += 1
            tl = verify_power_flow(
                self.model, trajectory(self.model, scheme), stop_on_violation=True, cache=self.steps
            )
            s.verified = tl.feasible
        return s.verified


def _score_schemes(model: GridModel, schemes: list[RestorationScheme]) -> list[_Score]:
    ev = Evaluator(model)
    return [ev.score(s) for s in schemes]


def _worker_count(config: GaConfig) -> int:
    cap = os.environ.get("BLACKSTART_THREADS")
    workers = config.workers
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, min(workers, os.cpu_count() or 1))


# --------------------------------------------------------------------------
# genetic search


def mpga_optimize(
    model: GridModel,
    config: GaConfig | None = None,
    *,
    evaluator: Evaluator | None = None,
    seeds: Sequence[RestorationScheme] = (),
):
    """Search for the restoration scheme with the lowest objective.

    Parameters
    ----------
    model : GridModel
    config : GaConfig, optional
    evaluator : Evaluator, optional
        Shared fitness cache (must belong to ``model``).
    seeds : sequence of RestorationScheme
        Schemes injected into the first subpopulation at start-up.

    Returns
    -------
    best : RestorationScheme
    timeline : Timeline
        Full simulation of ``best`` including the power-flow checks.
    history : list of GenerationRecord
        One record per subpopulation and generation; generation 0 is the
        initial population.

    Raises
    ------
    NoFeasibleScheme
        No candidate passed every constraint.
    """
    config = config or GaConfig()
    ev = evaluator or Evaluator(model)
    if ev.model is not model:
        raise ValueError("evaluator belongs to a different model")
    ids = model.branch_ids
    n = len(ids)
    size = config.subpop_size
    pos = {b: k for k, b in enumerate(ids)}
    workers = _worker_count(config)
    pool = ProcessPoolExecutor(workers) if workers > 1 else None

    def decode(c: Chromosome) -> None:
        c.scheme = its_repair(model, [ids[g] for g in c.priority], c.include)
        _amend(c, c.scheme, ids)

    def evaluate(batch: list[Chromosome]) -> None:
        for c in batch:
            if c.scheme is None:
                decode(c)
        todo = [c for c in batch if c.fitness is None]
        if pool is not None and len(todo) > 1:
            fresh = {}
            for c in todo:
                fresh.setdefault(c.scheme.key, c.scheme)
            unknown = [s for k, s in fresh.items() if ev._cache.get(k) is None]
            chunks = [unknown[w::workers] for w in range(workers)]
            for chunk, scores in zip(chunks, pool.map(_score_schemes, [model] * workers, chunks)):
                for s, sc in zip(chunk, scores):
                    ev.seed(s, sc)
        for c in todo:
            sc = ev.score(c.scheme)
            c.fitness = sc.fitness
            c.feasible = sc.cheap_ok

    def rank_key(c: Chromosome):
        return (c.fitness, c.scheme.order, tuple(sorted(c.scheme.include_link)))

    def select(cands: list[Chromosome], rng: np.random.Generator) -> list[Chromosome]:
        """Deduplicate, drop infeasible, refill randomly, verify the top ranks."""
        seen = set()
        kept: list[Chromosome] = []
        for c in sorted(cands, key=rank_key):
            k = c.scheme.key
            if k in seen or not c.feasible:
                continue
            seen.add(k)
            kept.append(c)
        attempts = 0
        while True:
            while len(kept) < size and attempts < 20 * size:
                attempts += 1
                c = random_chromosome(n, rng, config.include_prob)
                evaluate([c])
                if c.feasible and c.scheme.key not in seen:
                    seen.add(c.scheme.key)
                    kept.append(c)
            kept.sort(key=rank_key)
            kept = kept[:size]
            failed = {id(c) for c in kept[: config.verify_top] if not ev.verify(c.scheme)}
            if not failed:
                return kept
            kept = [c for c in kept if id(c) not in failed]

    best: Chromosome | None = None

    def consider(pop: list[Chromosome]) -> None:
        nonlocal best
        for c in pop[: config.verify_top]:
            if c.feasible and ev.verify(c.scheme):
                if best is None or rank_key(c) < rank_key(best):
                    best = Chromosome(c.priority.copy(), c.include.copy(), c.scheme, c.fitness, True)

    history: list[GenerationRecord] = []

    def record(generation: int) -> None:
        gbest = best.fitness if best is not None else math.inf
        for sp, pop in enumerate(subpops):
            fits = [c.fitness for c in pop]
            history.append(
                GenerationRecord(
                    generation=generation,
                    subpop=sp,
                    best_f=min(fits) if fits else math.inf,
                    mean_f=float(np.mean(fits)) if fits else math.inf,
                    feasible_count=len(pop),
                    global_best_f=gbest,
                )
            )

    subpops: list[list[Chromosome]] = []
    try:
        for sp in range(config.subpopulations):
            rng = np.random.default_rng([config.rng_seed, 0, sp, 0])
            init = [random_chromosome(n, rng, config.include_prob) for _ in range(size)]
            if sp == 0:
                for k, s in enumerate(seeds[:size]):
                    prio = np.array([pos[b] for b in s.order] + [g for g in range(n) if ids[g] not in set(s.order)])
                    inc = np.array([ids[g] in s.include_link for g in range(n)])
                    init[k] = Chromosome(prio.astype(np.int64), inc)
            evaluate(init)
            subpops.append(select(init, rng))
        for sp, pop in enumerate(subpops):
            consider(pop)
        record(0)

        for gen in range(config.max_generations):
            pc = config.crossover_rate(gen)
            pm = config.mutation_rate(gen)
            for sp in range(config.subpopulations):
                rng = np.random.default_rng([config.rng_seed, gen + 1, sp, 1])
                pop = subpops[sp]
                offspring = []
                while not pop and len(offspring) < size:
                    offspring.append(random_chromosome(n, rng, config.include_prob))
                while len(offspring) < size:
                    a, b = (_tournament(pop, rng) for _ in range(2))
                    if rng.random() < pc:
                        prio = order_crossover(a.priority, b.priority, rng)
                        mask = rng.random(n) < 0.5
                        inc = np.where(mask, a.include, b.include)
                    else:
                        prio, inc = a.priority.copy(), a.include.copy()
                    if rng.random() < pm:
                        prio = _swap_mutation(prio, rng)
                        flip = rng.random(n) < 1.0 / n
                        inc = inc ^ flip
                    offspring.append(Chromosome(prio, inc))
                evaluate(offspring)
                subpops[sp] = select(pop + offspring, rng)
            if config.subpopulations > 1 and (gen + 1) % config.migration_interval == 0:
                _migrate(subpops, config, rank_key)
            for sp, pop in enumerate(subpops):
                consider(pop)
            record(gen + 1)
    finally:
        if pool is not None:
            pool.shutdown()

    if best is None:
        raise NoFeasibleScheme("no restoration scheme satisfied every constraint")
    log.info("best F %.2f after %d simulations, %d power-flow checks", best.fitness, ev.simulations, ev.verifications)
    timeline = simulate(model, best.scheme)
    return best.scheme, timeline, history


def _tournament(pop: list[Chromosome], rng: np.random.Generator) -> Chromosome:
    i, j = rng.integers(len(pop), size=2)
    a, b = pop[i], pop[j]
    return a if (a.fitness, i) <= (b.fitness, j) else b


def _migrate(subpops: list[list[Chromosome]], config: GaConfig, rank_key) -> None:
    """Ring migration: each subpopulation's best replace its neighbour's worst when better."""
    k = math.ceil(config.migration_rate * config.subpop_size)
    if k == 0:
        return
    emigrants = [[_clone(c) for c in pop[:k]] for pop in subpops]
    for sp in range(len(subpops)):
        dest = subpops[(sp + 1) % len(subpops)]
        keys = {c.scheme.key for c in dest}
        for m in emigrants[sp]:
            if m.scheme.key in keys or not dest:
                continue
            worst = dest[-1]
            if rank_key(m) < rank_key(worst):
                dest[-1] = m
                keys.add(m.scheme.key)
                dest.sort(key=rank_key)


def _clone(c: Chromosome) -> Chromosome:
    return Chromosome(c.priority.copy(), c.include.copy(), c.scheme, c.fitness, c.feasible)


# --------------------------------------------------------------------------
# baseline


def resolve_sources(model: GridModel, source_ids: Sequence[int]) -> list[int]:
    """Map generator ids (or the HVDC node id) to the nodes to be energized."""
    nodes = []
    gen_ids = {g.id for g in model.generators}
    for s in source_ids:
        if s in gen_ids:
            nodes.append(model.generator(s).node)
        elif model.hvdc is not None and s == model.hvdc.node:
            nodes.append(s)
        else:
            raise ValueError(f"{s} is neither a generator id nor the HVDC node")
    return nodes


def dijkstra_baseline(model: GridModel, source_order: Sequence[int]) -> RestorationScheme:
    """Tree scheme connecting the sources one after another by shortest paths.

    Each source is joined to the energized network along the path of least
    total restoration time; equal-time paths are broken by the
    lexicographically smallest sequence of branch ids.

    Raises
    ------
    ValueError
        ``source_order`` does not start with the black-start unit or misses a source.
    Unreachable
        A source cannot be reached.
    """
    nodes = resolve_sources(model, source_order)
    if not nodes or nodes[0] != model.black_start.node:
        raise ValueError("source order must start with the black-start unit")
    missing = set(model.source_nodes) - set(nodes)
    if missing:
        raise ValueError(f"source order misses source node(s) {sorted(missing)}")
    _, ends, inc = _adjacency(model)
    ids = model.branch_ids
    energized = {nodes[0]}
    order: list[int] = []
    for target in nodes[1:]:
        if target in energized:
            continue
        heap = [(0.0, (), n) for n in sorted(energized)]
        heapq.heapify(heap)
        settled: set[int] = set()
        path = None
        while heap:
            dist, p, u = heapq.heappop(heap)
            if u in settled:
                continue
            settled.add(u)
            if u == target:
                path = p
                break
            for k in inc.get(u, ()):
                i, j = ends[k]
                v = j if i == u else i
                if v in settled or v in energized:
                    continue
                heapq.heappush(heap, (dist + model.branch(ids[k]).restore_duration, p + (ids[k],), v))
        if path is None:
            raise Unreachable(f"source node {target} cannot be reached")
        for b in path:
            i, j = model.branch(b).endpoints
            energized.update((i, j))
            order.append(b)
    return RestorationScheme(tuple(order), frozenset())
