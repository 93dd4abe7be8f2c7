"""Command-line entry point.

Exit codes: 0 success, 2 usage/config/input error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from . import imaging
from .config import ConfigError, RunConfig, load_config
from .evaluation import baseline_template, evaluate_model, random_baseline_rhos
from .evolution import CheckpointError, EvolutionState, Evolver, checkpoint_load, \
    checkpoint_save
from .genome import CircuitGenome, cnot_count, depth
from .qsim import export_qasm, parse_qasm_subset
from .triplet import fit_to_qubit_budget

log = logging.getLogger("qsimilarity")


class UsageError(Exception):
    """Bad arguments or inputs; maps to exit code 2."""


def _read_genome(path) -> CircuitGenome:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"genome file not found: {p}")
    text = p.read_text()
    try:
        if p.suffix == ".qasm":
            return parse_qasm_subset(text)
        return CircuitGenome.from_json(text)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"cannot read genome {p}: {exc}") from None


def _write_genome(genome: CircuitGenome, path) -> None:
    p = Path(path)
    p.write_text(export_qasm(genome) if p.suffix == ".qasm" else genome.to_json() + "\n")


def _read_dataset(path):
    if not Path(path).is_file():
        raise UsageError(f"dataset cache not found: {path}")
    try:
        return imaging.read_cache(path)
    except imaging.ImageFormatError as exc:
        raise UsageError(str(exc)) from None


def _config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    if not Path(path).is_file():
        raise UsageError(f"config file not found: {path}")
    return load_config(path)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- subcommands -------------------------------------------------------------------

def cmd_ingest(args) -> int:
    try:
        if args.format == "cifar10":
            patches = imaging.load_cifar_binary(args.input)
            if args.patch_size and args.patch_size != imaging.CIFAR_SIDE:
                patches = [imaging.resize(p, args.patch_size, args.patch_size) for p in patches]
        else:
            if not Path(args.input).is_dir():
                raise UsageError(f"not a directory: {args.input}")
            size = args.patch_size or 32
            patches = imaging.load_ppm_dir(args.input, size, size)
    except (imaging.ImageFormatError, OSError) as exc:
        raise UsageError(str(exc)) from None
    if not patches:
        raise UsageError("no input images")
    imaging.write_cache(args.out, patches)
    print(f"wrote {len(patches)} patches of {patches[0].width}x{patches[0].height}x3 to {args.out}")
    return 0


def _checkpoint_dir(run_dir: Path) -> Path:
    return run_dir / "checkpoints"


def _latest_checkpoint(run_dir: Path) -> Path:
    ckpts = sorted(_checkpoint_dir(run_dir).glob("gen_*.ckpt"))
    if not ckpts:
        raise UsageError(f"no checkpoints to resume in {run_dir}")
    return ckpts[-1]


def _write_outputs(run_dir: Path, state: EvolutionState, final: bool) -> None:
    (run_dir / "history.csv").write_text(state.history.to_csv())
    with open(run_dir / "champion.csv", "w") as fh:
        fh.write("generation,validation_loss\n")
        for g, v in enumerate(state.history.champion_loss):
            fh.write(f"{g},{v!r}\n")
    if final:
        best = state.champion
        _write_genome(best, run_dir / "best.genome.json")
        (run_dir / "best.qasm").write_text(export_qasm(best))
        summary = (f"final validation loss {state.champion_loss!r} "
                   f"depth {depth(best)} cnot {cnot_count(best)} gates {len(best)}")
        (run_dir / "summary.txt").write_text(summary + "\n")
        print(summary)


def cmd_evolve(args) -> int:
    run_dir = Path(args.out)
    if args.resume:
        if not (run_dir / "config.ini").is_file():
            raise UsageError(f"{run_dir} is not a run directory")
        cfg = load_config(run_dir / "config.ini")
    else:
        cfg = _config(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides(evolution={"seed": args.seed})
        if args.generations is not None:
            cfg = cfg.with_overrides(evolution={"generations": args.generations})
        if run_dir.exists() and any(run_dir.iterdir()):
            if not args.force:
                raise UsageError(f"run directory {run_dir} exists; use --force or --resume")
            shutil.rmtree(run_dir)
    dataset = _read_dataset(args.dataset)
    digest = _sha256(args.dataset)

    evolver = Evolver(dataset, cfg.fitness_config(), cfg.genome, cfg.evolution_config(),
                      cfg.noise(), cfg.perturbation(), jobs=args.jobs)
    if args.resume:
        ckpt = _latest_checkpoint(run_dir)
        try:
            state, meta = checkpoint_load(ckpt)
        except CheckpointError as exc:
            raise UsageError(str(exc)) from None
        if meta.get("dataset_sha256") != digest:
            raise UsageError("dataset differs from the one this run was started with")
        evolver.resume(state)
        print(f"resuming from {ckpt.name} (generation {state.generation})")
    else:
        _checkpoint_dir(run_dir).mkdir(parents=True)
        (run_dir / "config.ini").write_text(cfg.to_ini())

    every = cfg.evolution.checkpoint_every
    meta = {"dataset_sha256": digest}

    def on_generation(state: EvolutionState) -> None:
        best = state.champion_loss
        log.info("generation %d: champion validation loss %.6g", state.generation, best)
        if state.generation % every == 0 or state.generation == cfg.evolution.generations:
            checkpoint_save(state, _checkpoint_dir(run_dir) / f"gen_{state.generation:04d}.ckpt",
                            meta)

    state = evolver.run(stop_after=args.stop_after, on_generation=on_generation)
    done = state.generation >= cfg.evolution.generations
    _write_outputs(run_dir, state, final=done)
    if not done:
        checkpoint_save(state, _checkpoint_dir(run_dir) / f"gen_{state.generation:04d}.ckpt",
                        meta)
        print(f"stopped after generation {state.generation}; resume with --resume")
    return 0


def cmd_evaluate(args) -> int:
    genome = _read_genome(args.genome)
    cfg = _config(args.config)
    dataset = [fit_to_qubit_budget(p, genome.q) for p in _read_dataset(args.dataset)]
    if len(dataset) < 2:
        raise UsageError("evaluation needs at least two images")
    n_pairs = args.pairs or cfg.eval.n_pairs
    mode = args.distance_mode or cfg.image.distance_mode
    matching = args.matching or cfg.eval.ssim_matching
    seed = cfg.eval.seed if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    report = evaluate_model(genome, dataset, n_pairs, mode, cfg.noise(), rng, matching,
                            cfg.image.bins_per_channel, cfg.qsim.trajectories)
    report.config["seed"] = seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.baseline_genomes:
        pairs = [(a, b) for a, b, _, _ in report.pairs]
        dists = [e for _, _, _, e in report.pairs]
        rhos = random_baseline_rhos(args.baseline_genomes, len(genome), genome.q, dataset,
                                    pairs, dists, np.random.default_rng([seed, 1]), matching)
        report.config["random_baseline_mean_rho"] = float(np.mean(rhos))
        print(f"random baseline mean rho {np.mean(rhos):.6f} over {len(rhos)} genomes")
    (out / "report.json").write_text(report.to_json(str(args.genome)) + "\n")
    (out / "scatter.csv").write_text(report.scatter_csv())
    print(f"rho {report.rho:.6f}" if report.defined else "rho undefined (constant series)")
    return 0


def cmd_export_qasm(args) -> int:
    genome = _read_genome(args.genome)
    text = export_qasm(genome)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_baseline(args) -> int:
    if args.qubits < 2 or args.layers < 1:
        raise UsageError("baseline needs --qubits >= 2 and --layers >= 1")
    genome = baseline_template(args.qubits, args.layers, np.random.default_rng(args.seed))
    _write_genome(genome, args.out)
    print(f"baseline q={args.qubits} layers={args.layers}: "
          f"{len(genome)} gates, depth {depth(genome)}, cnot {cnot_count(genome)}")
    return 0


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsimilarity", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="convert images into a dataset cache")
    s.add_argument("--format", choices=("cifar10", "ppm"), required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--patch-size", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("evolve", help="search for a circuit on a dataset cache")
    s.add_argument("--dataset", required=True)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--generations", type=int)
    s.add_argument("--out", required=True, help="run directory")
    s.add_argument("--force", action="store_true", help="replace an existing run directory")
    s.add_argument("--resume", action="store_true", help="continue from the latest checkpoint")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--stop-after", type=int, default=None, metavar="GEN",
                   help="stop (checkpointed) after this generation")
    s.set_defaults(func=cmd_evolve)

    s = sub.add_parser("evaluate", help="correlate a circuit's similarity score with distance")
    s.add_argument("--genome", required=True)
    s.add_argument("--dataset", required=True)
    s.add_argument("--config")
    s.add_argument("--pairs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--distance-mode", choices=("hist", "pixels"))
    s.add_argument("--matching", choices=("role", "identity"))
    s.add_argument("--baseline-genomes", type=int, default=0,
                   help="also report the mean rho of this many random genomes")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("export-qasm", help="write a genome as OpenQASM 2.0")
    s.add_argument("--genome", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_export_qasm)

    s = sub.add_parser("baseline", help="write the layered ladder template circuit")
    s.add_argument("--qubits", type=int, default=14)
    s.add_argument("--layers", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help=".qasm or .json output path")
    s.set_defaults(func=cmd_baseline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
