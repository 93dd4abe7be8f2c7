"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line (collected into the terminal summary)
before asserting, so a full run prints the whole scorecard even when some
criteria fail.
"""
import math
import time

import numpy as np
import pytest

from conftest import random_gate_list, random_patch
from oracles import brute_spearman, dense_circuit, pairwise_fronts
from qsimilarity.cli import main
from qsimilarity.evaluation import average_ranks, baseline_template, similarity_score, spearman
from qsimilarity.evolution import FitnessRecord, non_dominated_sort
from qsimilarity.experiments import DeskConfig, desk_run
from qsimilarity.genome import CircuitGenome, Gate, cnot_count, depth, motif_report
from qsimilarity.imaging import synthetic_patches, write_cache
from qsimilarity.qsim import NoiseConfig, StateVector, export_qasm, parse_qasm_subset, run_circuit
from qsimilarity.triplet import embed

pytestmark = pytest.mark.acceptance

SEEDS = range(5)


@pytest.fixture(scope="module")
def desk_runs():
    return [desk_run(seed, DeskConfig()) for seed in SEEDS]


def _random_state(rng, q):
    v = rng.normal(size=1 << q) + 1j * rng.normal(size=1 << q)
    return StateVector(q, v / np.linalg.norm(v))


def test_c01_simulator_matches_dense_oracle(criterion):
    rng = np.random.default_rng(101)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(1000):
        q = int(rng.integers(1, 4))
        gates = random_gate_list(rng, q, int(rng.integers(0, 31)))
        s = _random_state(rng, q)
        out = run_circuit(CircuitGenome(q, gates), s).amplitudes
        worst = max(worst, float(np.max(np.abs(out - dense_circuit(q, gates) @ s.amplitudes))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10
    criterion(1, ok, f"max amplitude error {worst:.2e} (<= 1e-10), {elapsed:.1f}s (< 10s)")
    assert ok


def test_c02_unitarity_at_14_qubits(criterion):
    rng = np.random.default_rng(102)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(100):
        s = _random_state(rng, 14)
        out = run_circuit(CircuitGenome(14, random_gate_list(rng, 14, 100)), s)
        worst = max(worst, abs(out.norm() - 1.0))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 60
    criterion(2, ok, f"max norm drift {worst:.2e} (<= 1e-9), {elapsed:.1f}s (< 60s)")
    assert ok


def test_c03_embedding_norm_and_padding(criterion):
    rng = np.random.default_rng(103)
    worst, padding_ok = 0.0, True
    for _ in range(1000):
        n = int(rng.integers(2, 16385))
        q = max(1, math.ceil(math.log2(n)))
        e = embed(rng.normal(size=n), q)
        worst = max(worst, abs(float(np.sum(e.amplitudes ** 2)) - 1.0))
        padding_ok &= not e.amplitudes[n:].any()
    ok = worst <= 1e-12 and padding_ok
    criterion(3, ok, f"max |norm^2 - 1| {worst:.2e} (<= 1e-12), exact zero padding {padding_ok}")
    assert ok


def test_c04_similarity_identities(criterion):
    rng = np.random.default_rng(104)
    q = 7
    worst_self = {"role": 0.0, "identity": 0.0}
    worst_sym = {"role": 0.0, "identity": 0.0}
    for _ in range(200):
        g = CircuitGenome(q, random_gate_list(rng, q, int(rng.integers(1, 40))))
        a, b = random_patch(rng, 4), random_patch(rng, 4)
        for mode in ("role", "identity"):
            worst_self[mode] = max(worst_self[mode], similarity_score(g, a, a, matching=mode))
            worst_sym[mode] = max(worst_sym[mode], abs(similarity_score(g, a, b, matching=mode)
                                                       - similarity_score(g, b, a, matching=mode)))
    ok = all(v <= 1e-9 for v in worst_self.values()) and all(v <= 1e-12
                                                             for v in worst_sym.values())
    detail = ", ".join(f"{m}: S(I,I) max {worst_self[m]:.2e} sym max {worst_sym[m]:.2e}"
                       for m in ("role", "identity"))
    criterion(4, ok, detail + " (limits 1e-9 / 1e-12)")
    assert ok


def test_c05_spearman_oracle(criterion):
    rng = np.random.default_rng(105)
    worst, ranks_invariant, checked = 0.0, True, 0
    while checked < 500:
        n = int(rng.integers(2, 101))
        tied = checked % 2 == 0
        if tied:
            xs, ys = rng.integers(0, 6, n).astype(float), rng.integers(0, 6, n).astype(float)
        else:
            xs, ys = rng.normal(size=n), rng.normal(size=n)
        if len(set(xs)) < 2 or len(set(ys)) < 2:
            continue
        worst = max(worst, abs(spearman(xs, ys) - brute_spearman(xs, ys)))
        for f in (np.exp, lambda v: 2.5 * v - 3.0, np.arctan):
            ranks_invariant &= np.array_equal(average_ranks(f(xs)), average_ranks(xs))
        checked += 1
    ok = worst <= 1e-12 and ranks_invariant
    criterion(5, ok, f"max |rho - oracle| {worst:.2e} (<= 1e-12), "
                     f"rank invariance exact {ranks_invariant}")
    assert ok


def test_c06_non_dominated_sort_oracle(criterion):
    rng = np.random.default_rng(106)
    mismatches = 0
    for _ in range(200):
        records = [FitnessRecord(0.0, 0.0, float(rng.integers(0, 8)) / 4, 0.0,
                                 int(rng.integers(1, 8)), int(rng.integers(0, 5)))
                   for _ in range(20)]
        got = [r.pareto_front for r in non_dominated_sort(records)]
        mismatches += got != pairwise_fronts([r.objectives for r in records])
    ok = mismatches == 0
    criterion(6, ok, f"{mismatches} of 200 populations disagree with the pairwise oracle")
    assert ok


def test_c07_desk_scale_evolution(criterion, desk_runs):
    run = desk_runs[0]
    cl = run.history.champion_loss
    monotone = all(b <= a for a, b in zip(cl, cl[1:]))
    shape_ok = len(cl) == 11 and all(len(g) == 10 for g in run.history.generations)
    ok = monotone and shape_ok and run.seconds < 15 * 60
    criterion(7, ok, f"validation loss non-increasing {monotone} over {len(cl)} entries, "
                     f"{run.seconds:.1f}s (< 900s)")
    assert ok


def test_c08_learned_beats_random(criterion, desk_runs):
    hits = [r.rho is not None and r.rho >= 0.3 and r.margin >= 0.1 for r in desk_runs]
    detail = "; ".join(f"s{r.seed} rho {r.rho if r.rho is None else round(r.rho, 3)} "
                       f"margin {r.margin:+.3f}" for r in desk_runs)
    ok = sum(hits) >= 3
    criterion(8, ok, f"{sum(hits)}/5 seeds with rho >= 0.3 and margin >= 0.1 (need 3): {detail}")
    assert ok


def _landscape_like():
    """26 CNOTs, depth 28, with a CNOT->RX->RY->RZ chain and a 13-way fan-in.

    Moments: fan-in CNOT(k -> 0) for k = 1..13 at 1..13; RX, RY, RZ on qubit 0
    at 14..16; fan-out CNOT(0 -> k) for k = 1..12 at 17..28; CNOT(13 -> 1) at 18.
    """
    gates = [Gate("CNOT", 0, k) for k in range(1, 14)]
    gates += [Gate("RX", 0, theta=0.3), Gate("RY", 0, theta=1.1), Gate("RZ", 0, theta=2.0)]
    gates += [Gate("CNOT", k, 0) for k in range(1, 13)]
    gates += [Gate("CNOT", 1, 13)]
    return CircuitGenome(14, tuple(gates))


def test_c09_resource_accounting(criterion, desk_runs):
    cases = [
        ("empty", CircuitGenome(2, ()), 0, 0),
        ("H,H,CNOT", CircuitGenome(2, (Gate("H", 0), Gate("H", 1), Gate("CNOT", 1, 0))), 2, 1),
        ("5 disjoint CNOTs", CircuitGenome(10, tuple(Gate("CNOT", 2 * k + 1, 2 * k)
                                                     for k in range(5))), 1, 5),
        # layer 1: rotations 1-3, ladder 4-5; layer 2: rotations up to 8, ladder 9-10
        ("ladder q=3 L=2", baseline_template(3, 2), 10, 4),
        ("landscape-like", _landscape_like(), 28, 26),
    ]
    hand_ok = all(depth(g) == d and cnot_count(g) == c for _, g, d, c in cases)
    motifs = motif_report(_landscape_like())
    base14 = cnot_count(baseline_template(14, 4))
    base_desk = cnot_count(baseline_template(DeskConfig().qubits, 4))
    fewer = sum(cnot_count(r.champion) < base_desk for r in desk_runs)
    ok = hand_ok and base14 == 52 and fewer >= 4
    criterion(9, ok, f"hand counts {hand_ok}, chain motifs {motifs['cnot_rx_ry_rz_chain']}, "
                     f"baseline(14,4) cnot {base14}, champions below {base_desk} CNOTs: "
                     f"{fewer}/5 (need 4) {[cnot_count(r.champion) for r in desk_runs]}")
    assert ok


def test_c10_noise_statistics(criterion):
    p, n = 0.045, 10**5
    plus = StateVector(1, np.array([1, 1], dtype=complex) / math.sqrt(2))
    g = CircuitGenome(1, (Gate("RZ", 0, theta=0.0),))
    rng = np.random.default_rng(110)
    noise = NoiseConfig(p_depolarizing=p)
    xs = np.empty(n)
    for i in range(n):
        a = run_circuit(g, plus, noise, rng).amplitudes
        xs[i] = 2 * (np.conj(a[0]) * a[1]).real
    se = xs.std(ddof=1) / math.sqrt(n)
    stat_ok = abs(xs.mean() - (1 - p)) <= 3 * se

    srng = np.random.default_rng(111)
    identical = True
    for _ in range(20):
        s = _random_state(srng, 6)
        circ = CircuitGenome(6, random_gate_list(srng, 6, 40))
        identical &= (run_circuit(circ, s).amplitudes.tobytes()
                      == run_circuit(circ, s, NoiseConfig(), srng).amplitudes.tobytes())
    ok = stat_ok and identical
    criterion(10, ok, f"mean <X> {xs.mean():.5f} vs 0.955 (3 SE = {3 * se:.5f}), "
                      f"zero-noise bit-identical {identical}")
    assert ok


def test_c11_determinism_and_resume(criterion, tmp_path):
    data = tmp_path / "ds.bin"
    write_cache(data, synthetic_patches(32, 16, np.random.default_rng(3)))
    cfg = tmp_path / "run.ini"
    cfg.write_text("[qsim]\nqubits = 10\n[evolution]\npopulation = 10\ngenerations = 6\n")

    def evolve(out, *extra):
        return main(["evolve", "--dataset", str(data), "--config", str(cfg), "--seed", "5",
                     "--out", str(tmp_path / out), *extra])

    codes = [evolve("a"), evolve("b", "--jobs", "4"), evolve("c", "--stop-after", "3")]
    codes.append(main(["evolve", "--dataset", str(data), "--out", str(tmp_path / "c"),
                       "--resume"]))
    same_seed = (tmp_path / "a" / "history.csv").read_bytes() == \
        (tmp_path / "b" / "history.csv").read_bytes()
    files = ("history.csv", "champion.csv", "best.genome.json", "best.qasm", "summary.txt",
             "checkpoints/gen_0006.ckpt")
    resumed = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "c" / f).read_bytes()
                  for f in files)
    ok = codes == [0, 0, 0, 0] and same_seed and resumed
    criterion(11, ok, f"same seed byte-identical history {same_seed}, "
                      f"interrupt+resume byte-identical {resumed}")
    assert ok


def test_c12_qasm_roundtrip(criterion):
    rng = np.random.default_rng(112)
    failures = 0
    for _ in range(500):
        q = int(rng.integers(2, 15))
        gates = random_gate_list(rng, q, int(rng.integers(0, 60)))
        g = CircuitGenome(q, gates)
        back = parse_qasm_subset(export_qasm(g))
        failures += back != g or any(x.theta != y.theta for x, y in zip(back.gates, gates))
    ok = failures == 0
    criterion(12, ok, f"{failures} of 500 genomes changed by export -> parse")
    assert ok
