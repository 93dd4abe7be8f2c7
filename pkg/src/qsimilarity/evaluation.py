"""Swap-based similarity score, rank correlation, and the ladder baseline circuit."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .genome import CircuitGenome, Gate, random_genome, VariationConfig
from .imaging import ImagePatch, patch_distance
from .qsim import NoiseConfig, readout
from .triplet import embed_pair

MATCHING_MODES = ("role", "identity")


class UndefinedCorrelation(ValueError):
    """Raised when a rank correlation is undefined (a constant series)."""


def similarity_score(g: CircuitGenome, img1: ImagePatch, img2: ImagePatch,
                     noise: Optional[NoiseConfig] = None,
                     rng: Optional[np.random.Generator] = None,
                     matching: str = "role", trajectories: int = 1) -> float:
    """Distance between the readouts of the two label-swapped mappings of a pair.

    Mapping 1 interleaves (img1, img2) and mapping 2 (img2, img1); each
    yields an anchor-role point from qubits (0, 1) and a positive-role point
    from qubits (2, 3). ``role`` matching compares like roles across the two
    mappings; ``identity`` matching follows each image across the swap.
    """
    a1, p1 = readout(g, embed_pair(img1, img2, g.q), noise, rng, trajectories=trajectories)
    a2, p2 = readout(g, embed_pair(img2, img1, g.q), noise, rng, trajectories=trajectories)
    if matching == "role":
        pairs = ((a1, a2), (p1, p2))
    elif matching == "identity":
        pairs = ((a1, p2), (p1, a2))
    else:
        raise ValueError(f"matching must be one of {MATCHING_MODES}")
    return sum(abs(u.x - v.x) + abs(u.y - v.y) for u, v in pairs)


def average_ranks(xs: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    x = np.asarray(xs, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman's rho: Pearson correlation of average-rank vectors."""
    if len(xs) != len(ys):
        raise ValueError(f"series lengths differ ({len(xs)} vs {len(ys)})")
    if len(xs) < 2:
        raise ValueError("need at least two observations")
    rx, ry = average_ranks(xs), average_ranks(ys)
    dx, dy = rx - rx.mean(), ry - ry.mean()
    sx, sy = math.sqrt(np.dot(dx, dx)), math.sqrt(np.dot(dy, dy))
    if sx == 0 or sy == 0:
        raise UndefinedCorrelation("correlation is undefined for a constant series")
    return float(np.clip(np.dot(dx, dy) / (sx * sy), -1.0, 1.0))


@dataclass
class SimilarityReport:
    pairs: list[tuple[int, int, float, float]]
    rho: Optional[float]
    config: dict = field(default_factory=dict)

    @property
    def defined(self) -> bool:
        return self.rho is not None

    def to_json(self, genome_file: Optional[str] = None) -> str:
        return json.dumps({
            "genome_file": genome_file,
            "n_pairs": len(self.pairs),
            "distance_mode": self.config.get("distance_mode"),
            "rho": self.rho if self.rho is not None else "undefined",
            "config": self.config,
            "pairs": [{"a": a, "b": b, "s_sim": s, "ed": e} for a, b, s, e in self.pairs],
        }, indent=1)

    def scatter_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ed", "s_sim"])
        for _, _, s, e in self.pairs:
            w.writerow([repr(e), repr(s)])
        return buf.getvalue()


def sample_pairs(n_items: int, n_pairs: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    if n_items < 2:
        raise ValueError("need at least two images to form pairs")
    out = []
    for _ in range(n_pairs):
        a = int(rng.integers(n_items))
        b = int(rng.integers(n_items - 1))
        out.append((a, b + (b >= a)))
    return out


def evaluate_pairs(g: CircuitGenome, dataset: Sequence[ImagePatch],
                   pairs: Sequence[tuple[int, int]], distance_mode: str = "hist",
                   noise: Optional[NoiseConfig] = None,
                   rng: Optional[np.random.Generator] = None, matching: str = "role",
                   bins_per_channel: int = 16,
                   distances: Optional[Sequence[float]] = None,
                   trajectories: int = 1) -> SimilarityReport:
    """Score fixed index pairs; pass ``distances`` to reuse precomputed references."""
    if distances is None:
        distances = [patch_distance(dataset[a], dataset[b], distance_mode, bins_per_channel)
                     for a, b in pairs]
    rows = []
    for (a, b), ed in zip(pairs, distances):
        s = similarity_score(g, dataset[a], dataset[b], noise, rng, matching, trajectories)
        rows.append((a, b, s, float(ed)))
    try:
        rho = spearman([r[2] for r in rows], [r[3] for r in rows])
    except UndefinedCorrelation:
        rho = None
    cfg = {"distance_mode": distance_mode, "ssim_matching": matching,
           "bins_per_channel": bins_per_channel, "noise": None if noise is None else
           [noise.p_bitflip, noise.p_phaseflip, noise.p_depolarizing],
           "trajectories": trajectories}
    return SimilarityReport(rows, rho, cfg)


def evaluate_model(g: CircuitGenome, dataset: Sequence[ImagePatch], n_pairs: int = 1000,
                   distance_mode: str = "hist", noise: Optional[NoiseConfig] = None,
                   rng: Optional[np.random.Generator] = None, matching: str = "role",
                   bins_per_channel: int = 16, trajectories: int = 1) -> SimilarityReport:
    """Correlate the similarity score with the classical distance over random pairs.

    A constant series on either side yields ``rho = None`` (undefined)
    rather than an exception.
    """
    if n_pairs < 2:
        raise ValueError("need at least two pairs")
    if rng is None:
        rng = np.random.default_rng(0)
    pairs = sample_pairs(len(dataset), n_pairs, rng)
    return evaluate_pairs(g, dataset, pairs, distance_mode, noise, rng, matching,
                          bins_per_channel, trajectories=trajectories)


def baseline_template(q: int, layers: int = 4,
                      rng: Optional[np.random.Generator] = None) -> CircuitGenome:
    """Layered ansatz: RX, RY, RZ on every qubit, then a CNOT ladder i -> i+1."""
    if q < 2 or layers < 1:
        raise ValueError("baseline needs q >= 2 and layers >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    gates = []
    for _ in range(layers):
        for w in range(q):
            for kind in ("RX", "RY", "RZ"):
                gates.append(Gate(kind, w, theta=float(rng.uniform(0.0, 2 * math.pi))))
        gates.extend(Gate("CNOT", w + 1, w) for w in range(q - 1))
    return CircuitGenome(q, tuple(gates))


def random_baseline_rhos(n_genomes: int, n_gates: int, q: int, dataset, pairs, distances,
                         rng: np.random.Generator, matching: str = "role") -> list[float]:
    """Rho of ``n_genomes`` random genomes with a fixed gate count.

    Undefined correlations (for example when no gate reaches the readout
    qubits) count as 0, i.e. no association.
    """
    cfg = VariationConfig(min_init_gates=0, max_init_gates=max(n_gates, 0),
                          max_gates=max(n_gates, 1))
    out = []
    for _ in range(n_genomes):
        g = random_genome(q, cfg, rng, n_gates=n_gates)
        rep = evaluate_pairs(g, dataset, pairs, distances=distances, matching=matching)
        out.append(rep.rho if rep.rho is not None else 0.0)
    return out
