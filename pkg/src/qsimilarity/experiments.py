"""Desk-scale experiment protocol shared by the acceptance suite and scripts/.

One run: draw a structured synthetic dataset, split it into train and
held-out halves, evolve on the train half, then score the champion and a
set of equally sized random genomes on the same held-out pairs.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .evaluation import evaluate_pairs, random_baseline_rhos, sample_pairs
from .evolution import EvolutionConfig, EvolutionHistory, FitnessConfig, evolve
from .genome import CircuitGenome, VariationConfig, cnot_count, depth
from .imaging import ImagePatch, patch_distance, synthetic_patches
from .qsim import NoiseConfig
from .triplet import PerturbationConfig, fit_to_qubit_budget


@dataclass(frozen=True)
class DeskConfig:
    qubits: int = 10
    population: int = 10
    generations: int = 10
    n_train: int = 64
    n_heldout: int = 64
    patch_size: int = 16
    eval_pairs: int = 200
    random_genomes: int = 20
    distance_mode: str = "hist"
    matching: str = "role"
    fitness: FitnessConfig = field(default_factory=FitnessConfig)
    variation: VariationConfig = field(default_factory=VariationConfig)
    noise: Optional[NoiseConfig] = None


@dataclass
class DeskResult:
    seed: int
    champion: CircuitGenome
    history: EvolutionHistory
    rho: Optional[float]
    random_rhos: list[float]
    seconds: float

    @property
    def random_mean(self) -> float:
        return float(np.mean(self.random_rhos))

    @property
    def margin(self) -> float:
        return (self.rho if self.rho is not None else 0.0) - self.random_mean

    def summary(self) -> str:
        rho = "undefined" if self.rho is None else f"{self.rho:.3f}"
        return (f"seed {self.seed}: rho {rho} random {self.random_mean:.3f} "
                f"margin {self.margin:+.3f} gates {len(self.champion)} "
                f"depth {depth(self.champion)} cnot {cnot_count(self.champion)} "
                f"val-loss {self.history.champion_loss[-1]:.4f} ({self.seconds:.1f}s)")


def desk_split(seed: int, cfg: DeskConfig) -> tuple[list[ImagePatch], list[ImagePatch]]:
    """Train and held-out patches drawn from one synthetic distribution."""
    rng = np.random.default_rng([seed, 7])
    patches = synthetic_patches(cfg.n_train + cfg.n_heldout, cfg.patch_size, rng)
    return patches[:cfg.n_train], patches[cfg.n_train:]


def desk_run(seed: int, cfg: DeskConfig = DeskConfig()) -> DeskResult:
    train, heldout = desk_split(seed, cfg)
    ecfg = EvolutionConfig(population=cfg.population, generations=cfg.generations,
                           seed=seed, qubits=cfg.qubits)
    start = time.perf_counter()
    champion, history = evolve(train, cfg.fitness, cfg.variation, ecfg, cfg.noise,
                               PerturbationConfig(5.0, seed))
    elapsed = time.perf_counter() - start

    heldout = [fit_to_qubit_budget(p, cfg.qubits) for p in heldout]
    eval_rng = np.random.default_rng([seed, 11])
    pairs = sample_pairs(len(heldout), cfg.eval_pairs, eval_rng)
    dists = [patch_distance(heldout[a], heldout[b], cfg.distance_mode) for a, b in pairs]
    report = evaluate_pairs(champion, heldout, pairs, cfg.distance_mode, cfg.noise, eval_rng,
                            cfg.matching, distances=dists)
    randoms = random_baseline_rhos(cfg.random_genomes, len(champion), cfg.qubits, heldout,
                                   pairs, dists, np.random.default_rng([seed, 13]),
                                   cfg.matching)
    return DeskResult(seed, champion, history, report.rho, randoms, elapsed)
