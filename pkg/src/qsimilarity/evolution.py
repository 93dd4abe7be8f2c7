"""Projection-consistency fitness and the evolutionary search loop.

Selection works on the loss ``alpha * l_qm + beta * delta`` (lower is
better). The reciprocal fitness ``f_obj`` is computed and logged but never
used for ordering, because the reciprocal flips sign and blows up around a
zero loss.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .genome import CircuitGenome, VariationConfig, cnot_count, crossover, depth, mutate, \
    random_genome, structural_distance
from .imaging import ImagePatch
from .qsim import NoiseConfig, ProjectionPoint, readout
from .triplet import NEGATIVE_FIRST, PAIR_ORIENTATIONS, EmbeddingVector, PerturbationConfig, \
    Triplet, embed_pair, fit_to_qubit_budget, sample_triplets

CHECKPOINT_MAGIC = "QSIMCKPT"
CHECKPOINT_VERSION = 1

HISTORY_COLUMNS = ("generation", "individual", "loss", "f_obj", "l_qm_mean", "delta_mean",
                   "depth", "cnot", "front", "crowding")

# stream tags for rng derivation: np.random.default_rng([seed, tag, ...])
_MASTER, _VALIDATION, _BATCH, _EVAL, _VALEVAL = range(5)


@dataclass(frozen=True)
class FitnessConfig:
    alpha: float = 1.0
    beta: float = 1.0
    batch_size: int = 16
    validation_size: int = 32
    epsilon_guard: float = 1e-6
    f_cap: float = 1e6
    pair_orientation: str = NEGATIVE_FIRST
    shots: int = 0
    trajectories: int = 1

    def __post_init__(self):
        for name in ("alpha", "beta", "epsilon_guard", "f_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.batch_size < 1 or self.validation_size < 1:
            raise ValueError("batch_size and validation_size must be >= 1")
        if self.pair_orientation not in PAIR_ORIENTATIONS:
            raise ValueError(f"pair_orientation must be one of {PAIR_ORIENTATIONS}")
        if self.shots < 0:
            raise ValueError("shots must be >= 0 (0 means exact probabilities)")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")


@dataclass(frozen=True)
class EvolutionConfig:
    population: int = 20
    generations: int = 20
    tournament_size: int = 3
    redundancy_threshold: float = 0.15
    elitism: int = 2
    seed: int = 0
    qubits: int = 14

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if not 2 <= self.tournament_size <= self.population:
            raise ValueError("tournament_size must lie in [2, population]")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must lie in [0, population)")
        if not 0.0 <= self.redundancy_threshold <= 1.0:
            raise ValueError("redundancy_threshold must lie in [0, 1]")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.qubits < 4:
            raise ValueError("the fitness readout needs at least 4 qubits")


@dataclass
class FitnessRecord:
    l_qm: float
    delta: float
    loss: float
    f_obj: float
    depth: int
    cnot: int
    pareto_front: Optional[int] = None
    crowding: Optional[float] = None

    @property
    def objectives(self) -> tuple[float, int, int]:
        return (self.loss, self.depth, self.cnot)


# -- fitness -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PreparedTriplet:
    """The two embedded pairs of one triplet: (anchor, positive) and the negative pair."""
    positive_pair: EmbeddingVector
    negative_pair: EmbeddingVector
    anchor_first: bool


def prepare_triplet(t: Triplet, q: int, orientation: str = NEGATIVE_FIRST) -> PreparedTriplet:
    ap = embed_pair(t.anchor, t.positive, q)
    if orientation == NEGATIVE_FIRST:
        return PreparedTriplet(ap, embed_pair(t.negative, t.anchor, q), False)
    return PreparedTriplet(ap, embed_pair(t.anchor, t.negative, q), True)


def _projections(g: CircuitGenome, pt: PreparedTriplet, noise, rng, shots, trajectories=1):
    a_p, p = readout(g, pt.positive_pair, noise, rng, shots, trajectories)
    first, second = readout(g, pt.negative_pair, noise, rng, shots, trajectories)
    if pt.anchor_first:
        return a_p, p, second, first
    return a_p, p, first, second


def pair_projections(g: CircuitGenome, t: Triplet, noise: Optional[NoiseConfig] = None,
                     rng: Optional[np.random.Generator] = None,
                     orientation: str = NEGATIVE_FIRST, shots: int = 0, trajectories: int = 1
                     ) -> tuple[ProjectionPoint, ProjectionPoint, ProjectionPoint, ProjectionPoint]:
    """Return ``(A_p, P, N, A_n)`` from the two circuit runs of one triplet.

    Run 1 embeds the anchor/positive pair and reads A_p from qubits (0, 1)
    and P from qubits (2, 3). Run 2 embeds the negative pair; with the
    default orientation the negative comes first, so N is read from qubits
    (0, 1) and A_n from (2, 3).
    """
    return _projections(g, prepare_triplet(t, g.q, orientation), noise, rng, shots, trajectories)


def triplet_loss(a_p: ProjectionPoint, p: ProjectionPoint, n: ProjectionPoint,
                 a_n: ProjectionPoint) -> tuple[float, float]:
    l_qm = (abs(a_p.x - p.x) + abs(a_p.y - p.y)) - (abs(n.x - a_n.x) + abs(n.y - a_n.y))
    delta = abs(a_p.x - a_n.x) + abs(a_p.y - a_n.y)
    return l_qm, delta


def reciprocal_fitness(loss: float, cfg: FitnessConfig) -> float:
    if abs(loss) < cfg.epsilon_guard:
        return -cfg.f_cap if loss < 0 else cfg.f_cap
    return float(np.clip(1.0 / loss, -cfg.f_cap, cfg.f_cap))


def _fitness_prepared(g, prepared: Sequence[PreparedTriplet], cfg: FitnessConfig,
                      noise, rng) -> FitnessRecord:
    terms = np.array([triplet_loss(*_projections(g, pt, noise, rng, cfg.shots, cfg.trajectories))
                      for pt in prepared])
    l_qm, delta = terms.mean(axis=0)
    loss = float(np.mean(cfg.alpha * terms[:, 0] + cfg.beta * terms[:, 1]))
    return FitnessRecord(float(l_qm), float(delta), loss, reciprocal_fitness(loss, cfg),
                         depth(g), cnot_count(g))


def batch_fitness(g: CircuitGenome, batch: Sequence[Triplet], cfg: FitnessConfig,
                  noise: Optional[NoiseConfig] = None,
                  rng: Optional[np.random.Generator] = None) -> FitnessRecord:
    if not batch:
        raise ValueError("fitness needs a non-empty triplet batch")
    prepared = [prepare_triplet(t, g.q, cfg.pair_orientation) for t in batch]
    return _fitness_prepared(g, prepared, cfg, noise, rng)


# -- non-dominated sorting ------------------------------------------------------

def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def _crowding(objs: list[tuple], front: list[int]) -> dict[int, float]:
    dist = {i: 0.0 for i in front}
    for m in range(len(objs[front[0]])):
        ordered = sorted(front, key=lambda i: (objs[i][m], i))
        lo, hi = objs[ordered[0]][m], objs[ordered[-1]][m]
        dist[ordered[0]] = dist[ordered[-1]] = math.inf
        if hi == lo:
            continue
        for k in range(1, len(ordered) - 1):
            i = ordered[k]
            if dist[i] != math.inf:
                dist[i] += (objs[ordered[k + 1]][m] - objs[ordered[k - 1]][m]) / (hi - lo)
    return dist


def non_dominated_sort(records: Sequence[FitnessRecord]) -> list[FitnessRecord]:
    """Assign Pareto fronts over (loss, depth, cnot) and per-front crowding distance.

    Boundary individuals of each front get an infinite crowding distance.
    """
    objs = [r.objectives for r in records]
    n = len(objs)
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(objs[i], objs[j]):
                dominated_by[i].append(j)
                counts[j] += 1
            elif dominates(objs[j], objs[i]):
                dominated_by[j].append(i)
                counts[i] += 1
    fronts = [0] * n
    crowd = [0.0] * n
    current = [i for i in range(n) if counts[i] == 0]
    rank = 0
    while current:
        for i, d in _crowding(objs, current).items():
            fronts[i], crowd[i] = rank, d
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
        rank += 1
    return [replace(r, pareto_front=fronts[i], crowding=crowd[i]) for i, r in enumerate(records)]


def _rank_key(records: Sequence[FitnessRecord], i: int):
    r = records[i]
    return (r.pareto_front, -r.crowding, r.loss, i)


def tournament_select(population: Sequence[CircuitGenome], records: Sequence[FitnessRecord],
                      cfg: EvolutionConfig, rng: np.random.Generator) -> int:
    """Pick a parent index by tournament with a structural-redundancy guard.

    Within the sampled tournament, of any two entrants closer than
    ``redundancy_threshold`` in structural distance, the worse-ranked one is
    dropped before the winner is chosen by (front, -crowding, loss).
    """
    k = min(cfg.tournament_size, len(population))
    entrants = sorted(int(i) for i in rng.choice(len(population), size=k, replace=False))
    alive = set(entrants)
    if cfg.redundancy_threshold > 0:
        for a_pos, a in enumerate(entrants):
            for b in entrants[a_pos + 1:]:
                if a not in alive or b not in alive:
                    continue
                if structural_distance(population[a], population[b]) < cfg.redundancy_threshold:
                    worse = max(a, b, key=lambda i: _rank_key(records, i))
                    alive.discard(worse)
    return min(alive, key=lambda i: _rank_key(records, i))


# -- evolution loop ----------------------------------------------------------------

@dataclass
class EvolutionHistory:
    generations: list[list[FitnessRecord]] = field(default_factory=list)
    champion_loss: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for gen, records in enumerate(self.generations):
            for i, r in enumerate(records):
                w.writerow([gen, i, repr(r.loss), repr(r.f_obj), repr(r.l_qm), repr(r.delta),
                            r.depth, r.cnot, r.pareto_front, repr(r.crowding)])
        return buf.getvalue()


@dataclass
class EvolutionState:
    generation: int
    population: list[CircuitGenome]
    records: list[FitnessRecord]
    validation_losses: list[float]
    champion: CircuitGenome
    champion_loss: float
    rng_state: dict
    history: EvolutionHistory
    validation_index: list[tuple[int, int]]

    def to_dict(self) -> dict:
        return {
            "generation": self.generation,
            "population": [json.loads(g.to_json()) for g in self.population],
            "records": [asdict(r) for r in self.records],
            "validation_losses": self.validation_losses,
            "champion": json.loads(self.champion.to_json()),
            "champion_loss": self.champion_loss,
            "rng_state": self.rng_state,
            "history": {"generations": [[asdict(r) for r in gen]
                                        for gen in self.history.generations],
                        "champion_loss": self.history.champion_loss},
            "validation_index": [list(p) for p in self.validation_index],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvolutionState":
        genome = lambda x: CircuitGenome.from_json(json.dumps(x))
        return cls(
            generation=d["generation"],
            population=[genome(g) for g in d["population"]],
            records=[FitnessRecord(**r) for r in d["records"]],
            validation_losses=list(d["validation_losses"]),
            champion=genome(d["champion"]),
            champion_loss=d["champion_loss"],
            rng_state=d["rng_state"],
            history=EvolutionHistory(
                [[FitnessRecord(**r) for r in gen] for gen in d["history"]["generations"]],
                list(d["history"]["champion_loss"])),
            validation_index=[tuple(p) for p in d["validation_index"]],
        )

    def __eq__(self, other):
        if not isinstance(other, EvolutionState):
            return NotImplemented
        return _canonical(self.to_dict()) == _canonical(other.to_dict())


def _canonical(d: dict) -> str:
    return json.dumps(d, sort_keys=True)


class CheckpointError(RuntimeError):
    pass


def checkpoint_dumps(state: EvolutionState, meta: Optional[dict] = None) -> bytes:
    body = _canonical({"version": CHECKPOINT_VERSION, "meta": meta or {},
                       "state": state.to_dict()}).encode()
    digest = hashlib.sha256(body).hexdigest()
    return f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION} {digest}\n".encode() + body


def checkpoint_save(state: EvolutionState, path, meta: Optional[dict] = None) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(checkpoint_dumps(state, meta))
    os.replace(tmp, path)


def checkpoint_load(path) -> tuple[EvolutionState, dict]:
    """Load a checkpoint, verifying magic, version and checksum."""
    with open(path, "rb") as fh:
        data = fh.read()
    header, sep, body = data.partition(b"\n")
    parts = header.decode("ascii", "replace").split()
    if not sep or len(parts) != 3 or parts[0] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if parts[1] != str(CHECKPOINT_VERSION):
        raise CheckpointError(f"{path}: checkpoint version {parts[1]}, "
                              f"expected {CHECKPOINT_VERSION}")
    if hashlib.sha256(body).hexdigest() != parts[2]:
        raise CheckpointError(f"{path}: checksum mismatch (truncated or corrupt)")
    try:
        d = json.loads(body)
        return EvolutionState.from_dict(d["state"]), d.get("meta", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint body: {exc}") from exc


def _derived(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng([seed, *path])


class Evolver:
    """Stateful driver for the search; :func:`evolve` is the one-call wrapper.

    Every random draw comes from a stream derived from the master seed, so a
    run is reproducible for any ``jobs`` value and across checkpoint/resume.
    """

    def __init__(self, dataset: Sequence[ImagePatch], fitness_cfg: FitnessConfig,
                 variation_cfg: VariationConfig, evo_cfg: EvolutionConfig,
                 noise: Optional[NoiseConfig] = None,
                 perturbation: PerturbationConfig = PerturbationConfig(), jobs: int = 1):
        if len(dataset) < 2:
            raise ValueError("evolution needs at least two images to form triplets")
        self.fitness_cfg = fitness_cfg
        self.variation_cfg = variation_cfg
        self.cfg = evo_cfg
        self.noise = noise
        self.perturbation = perturbation
        self.jobs = max(1, jobs)
        q = evo_cfg.qubits
        self.dataset = [fit_to_qubit_budget(p, q) for p in dataset]
        triplets, self.validation_index = sample_triplets(
            self.dataset, fitness_cfg.validation_size, perturbation,
            _derived(evo_cfg.seed, _VALIDATION))
        self.validation = self._prepare(triplets)
        self.state: Optional[EvolutionState] = None

    # helpers
    def _prepare(self, triplets):
        return [prepare_triplet(t, self.cfg.qubits, self.fitness_cfg.pair_orientation)
                for t in triplets]

    def _batch(self, gen: int):
        triplets, _ = sample_triplets(self.dataset, self.fitness_cfg.batch_size,
                                      self.perturbation, _derived(self.cfg.seed, _BATCH, gen))
        return self._prepare(triplets)

    def _evaluate(self, genomes, prepared, gen: int, tag: int, offset: int = 0):
        def one(i):
            rng = _derived(self.cfg.seed, tag, gen, offset + i)
            return _fitness_prepared(genomes[i], prepared, self.fitness_cfg, self.noise, rng)
        if self.jobs == 1:
            return [one(i) for i in range(len(genomes))]
        with ThreadPoolExecutor(self.jobs) as pool:
            return list(pool.map(one, range(len(genomes))))

    def _finish(self, gen, population, val_losses, rng, prev: Optional[EvolutionState]):
        records = non_dominated_sort(self._evaluate(population, self._batch(gen), gen, _EVAL))
        if prev is None:
            champion, champ_loss = None, math.inf
            history = EvolutionHistory()
        else:
            champion, champ_loss = prev.champion, prev.champion_loss
            history = EvolutionHistory(list(prev.history.generations),
                                       list(prev.history.champion_loss))
        for g, v in zip(population, val_losses):
            if v < champ_loss:
                champion, champ_loss = g, v
        history.generations.append(records)
        history.champion_loss.append(champ_loss)
        self.state = EvolutionState(gen, list(population), records, list(val_losses), champion,
                                    champ_loss, rng.bit_generator.state, history,
                                    list(self.validation_index))
        return self.state

    def initialize(self) -> EvolutionState:
        rng = _derived(self.cfg.seed, _MASTER)
        population = [random_genome(self.cfg.qubits, self.variation_cfg, rng)
                      for _ in range(self.cfg.population)]
        val = [r.loss for r in self._evaluate(population, self.validation, 0, _VALEVAL)]
        return self._finish(0, population, val, rng, None)

    def step(self) -> EvolutionState:
        prev = self.state
        gen = prev.generation + 1
        rng = np.random.Generator(np.random.PCG64())
        rng.bit_generator.state = prev.rng_state
        pop, recs = prev.population, prev.records
        order = sorted(range(len(pop)), key=lambda i: _rank_key(recs, i))
        elites = order[:self.cfg.elitism]
        offspring = []
        need = self.cfg.population - len(elites)
        while len(offspring) < need:
            a = tournament_select(pop, recs, self.cfg, rng)
            b = tournament_select(pop, recs, self.cfg, rng)
            for child in crossover(pop[a], pop[b], rng, self.variation_cfg.max_gates):
                if len(offspring) < need:
                    offspring.append(mutate(child, self.variation_cfg, rng))
        val = [r.loss for r in self._evaluate(offspring, self.validation, gen, _VALEVAL,
                                              offset=len(elites))]
        population = [pop[i] for i in elites] + offspring
        val_losses = [prev.validation_losses[i] for i in elites] + val
        return self._finish(gen, population, val_losses, rng, prev)

    def resume(self, state: EvolutionState) -> None:
        if [tuple(p) for p in state.validation_index] != [tuple(p) for p in self.validation_index]:
            raise CheckpointError("checkpoint validation batch does not match this configuration")
        self.state = state

    def run(self, stop_after: Optional[int] = None,
            on_generation: Optional[Callable[[EvolutionState], None]] = None) -> EvolutionState:
        """Advance to ``cfg.generations`` (or ``stop_after``), calling the hook each generation."""
        if self.state is None:
            self.initialize()
            if on_generation:
                on_generation(self.state)
        last = self.cfg.generations if stop_after is None else min(stop_after, self.cfg.generations)
        while self.state.generation < last:
            self.step()
            if on_generation:
                on_generation(self.state)
        return self.state


def evolve(dataset, fitness_cfg: FitnessConfig, variation_cfg: VariationConfig,
           evo_cfg: EvolutionConfig, noise: Optional[NoiseConfig] = None,
           perturbation: PerturbationConfig = PerturbationConfig(), jobs: int = 1
           ) -> tuple[CircuitGenome, EvolutionHistory]:
    """Run the full search and return the validation champion and the history."""
    ev = Evolver(dataset, fitness_cfg, variation_cfg, evo_cfg, noise, perturbation, jobs)
    state = ev.run()
    return state.champion, state.history
