"""Run the desk-scale protocol over several seeds and print one line per seed.

    python3 scripts/desk_experiment.py --seeds 0 1 2 3 4
    python3 scripts/desk_experiment.py --seeds 0 --matching identity --noise 0.045
"""
import argparse

from qsimilarity.evolution import FitnessConfig
from qsimilarity.experiments import DeskConfig, desk_run
from qsimilarity.qsim import NoiseConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--qubits", type=int, default=10)
    ap.add_argument("--population", type=int, default=10)
    ap.add_argument("--generations", type=int, default=10)
    ap.add_argument("--matching", choices=("role", "identity"), default="role")
    ap.add_argument("--orientation", choices=("negative_first", "anchor_first"),
                    default="negative_first")
    ap.add_argument("--noise", type=float, default=0.0,
                    help="composite noise level split evenly over the three channels")
    ap.add_argument("--trajectories", type=int, default=1)
    args = ap.parse_args()

    noise = NoiseConfig.composite(args.noise) if args.noise > 0 else None
    cfg = DeskConfig(qubits=args.qubits, population=args.population,
                     generations=args.generations, matching=args.matching, noise=noise,
                     fitness=FitnessConfig(pair_orientation=args.orientation,
                                           trajectories=args.trajectories))
    results = [desk_run(seed, cfg) for seed in args.seeds]
    for r in results:
        print(r.summary())
    hits = sum(r.rho is not None and r.rho >= 0.3 and r.margin >= 0.1 for r in results)
    print(f"{hits}/{len(results)} seeds with rho >= 0.3 and margin >= 0.1")


if __name__ == "__main__":
    main()
