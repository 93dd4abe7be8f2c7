"""Check whether a lower triplet loss predicts a higher held-out rho.

Scores a set of random genomes with both the search objective (triplet loss
on a training batch) and the evaluation metric (Spearman rho of the
similarity score against colour-histogram distance on held-out pairs), then
reports the rank correlation between the two. A strongly negative value
means the search objective is a good proxy for the evaluation metric.

    python3 scripts/loss_rho_alignment.py --genomes 60 --matching role
"""
import argparse

import numpy as np

from qsimilarity.evaluation import UndefinedCorrelation, evaluate_pairs, sample_pairs, spearman
from qsimilarity.evolution import FitnessConfig, batch_fitness
from qsimilarity.experiments import DeskConfig, desk_split
from qsimilarity.genome import VariationConfig, random_genome
from qsimilarity.imaging import patch_distance
from qsimilarity.triplet import PerturbationConfig, fit_to_qubit_budget, sample_triplets


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--genomes", type=int, default=60)
    ap.add_argument("--qubits", type=int, default=10)
    ap.add_argument("--triplets", type=int, default=32)
    ap.add_argument("--matching", choices=("role", "identity"), default="role")
    ap.add_argument("--orientation", choices=("negative_first", "anchor_first"),
                    default="negative_first")
    args = ap.parse_args()

    cfg = DeskConfig(qubits=args.qubits, matching=args.matching)
    train, heldout = desk_split(args.seed, cfg)
    train = [fit_to_qubit_budget(p, cfg.qubits) for p in train]
    heldout = [fit_to_qubit_budget(p, cfg.qubits) for p in heldout]
    rng = np.random.default_rng([args.seed, 17])
    batch, _ = sample_triplets(train, args.triplets, PerturbationConfig(5.0), rng)
    pairs = sample_pairs(len(heldout), cfg.eval_pairs, rng)
    dists = [patch_distance(heldout[a], heldout[b], cfg.distance_mode) for a, b in pairs]
    fcfg = FitnessConfig(pair_orientation=args.orientation)

    losses, rhos = [], []
    for _ in range(args.genomes):
        g = random_genome(cfg.qubits, VariationConfig(), rng)
        report = evaluate_pairs(g, heldout, pairs, cfg.distance_mode, matching=args.matching,
                                distances=dists)
        if report.rho is None:
            continue
        losses.append(batch_fitness(g, batch, fcfg).loss)
        rhos.append(report.rho)
    print(f"{len(rhos)} genomes with a defined rho (of {args.genomes})")
    print(f"rho range {min(rhos):.3f} .. {max(rhos):.3f}, mean {np.mean(rhos):.3f}")
    try:
        print(f"spearman(loss, rho) = {spearman(losses, rhos):+.3f}")
    except UndefinedCorrelation:
        print("spearman(loss, rho) undefined")


if __name__ == "__main__":
    main()
