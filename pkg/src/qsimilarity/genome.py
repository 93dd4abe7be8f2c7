"""Circuit genomes: representation, variation operators, and structure metrics."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .imaging import DimensionError

ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ("RX", "RY", "RZ", "H", "CNOT")
GENOME_SCHEMA = "qsimilarity.genome/1"

_TWO_PI = 2.0 * math.pi
_ANGLE_BUCKET = math.pi / 8


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    control: Optional[int] = None
    theta: Optional[float] = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.target < 0 or (self.control is not None and self.control < 0):
            raise ValueError("qubit indices must be non-negative")
        if self.kind == "CNOT":
            if self.control is None:
                raise ValueError("CNOT needs a control qubit")
            if self.control == self.target:
                raise ValueError("CNOT control and target must differ")
        elif self.control is not None:
            raise ValueError(f"{self.kind} takes no control qubit")
        if (self.theta is not None) != (self.kind in ROTATIONS):
            raise ValueError(f"theta must be given exactly for rotation gates, not {self.kind}")

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.control is None:
            return (self.target,)
        return (self.control, self.target)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "target": self.target}
        if self.control is not None:
            d["control"] = self.control
        if self.theta is not None:
            d["theta"] = self.theta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Gate":
        theta = d.get("theta")
        return cls(d["kind"], int(d["target"]), d.get("control"),
                   None if theta is None else float(theta))


@dataclass(frozen=True)
class CircuitGenome:
    q: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) >= self.q:
                raise ValueError(f"gate {g} addresses a qubit outside 0..{self.q - 1}")

    def __len__(self):
        return len(self.gates)

    def to_json(self) -> str:
        return json.dumps({"schema": GENOME_SCHEMA, "qubits": self.q,
                           "gates": [g.to_dict() for g in self.gates]}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "CircuitGenome":
        d = json.loads(text)
        schema = d.get("schema", GENOME_SCHEMA)
        if schema != GENOME_SCHEMA:
            raise ValueError(f"unsupported genome schema {schema!r}")
        return cls(int(d["qubits"]), tuple(Gate.from_dict(g) for g in d["gates"]))


@dataclass(frozen=True)
class VariationConfig:
    p_add: float = 0.30
    p_remove: float = 0.30
    p_kind_change: float = 0.15
    p_rewire: float = 0.15
    p_angle_jitter: float = 0.5
    angle_jitter_sigma: float = 0.2
    min_init_gates: int = 10
    max_init_gates: int = 40
    max_gates: int = 80

    def __post_init__(self):
        for name in ("p_add", "p_remove", "p_kind_change", "p_rewire", "p_angle_jitter"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.angle_jitter_sigma < 0:
            raise ValueError("angle_jitter_sigma must be >= 0")
        if not 0 <= self.min_init_gates <= self.max_init_gates <= self.max_gates:
            raise ValueError("need 0 <= min_init_gates <= max_init_gates <= max_gates")


# -- random construction ---------------------------------------------------------

def random_gate(q: int, rng: np.random.Generator, kind: Optional[str] = None) -> Gate:
    if kind is None:
        kind = GATE_KINDS[rng.integers(len(GATE_KINDS))]
    if kind == "CNOT":
        control, target = (int(x) for x in rng.choice(q, size=2, replace=False))
        return Gate("CNOT", target, control)
    target = int(rng.integers(q))
    if kind in ROTATIONS:
        return Gate(kind, target, theta=float(rng.uniform(0.0, _TWO_PI)))
    return Gate(kind, target)


def random_genome(q: int, cfg: VariationConfig, rng: np.random.Generator,
                  n_gates: Optional[int] = None) -> CircuitGenome:
    if q < 2:
        raise ValueError("genomes need at least 2 qubits")
    if n_gates is None:
        n_gates = int(rng.integers(cfg.min_init_gates, cfg.max_init_gates + 1))
    return CircuitGenome(q, tuple(random_gate(q, rng) for _ in range(n_gates)))


# -- variation -------------------------------------------------------------------

def _rewire(gate: Gate, q: int, rng) -> Gate:
    if gate.kind == "CNOT":
        control, target = (int(x) for x in rng.choice(q, size=2, replace=False))
        return Gate("CNOT", target, control)
    return Gate(gate.kind, int(rng.integers(q)), theta=gate.theta)


def mutate(g: CircuitGenome, cfg: VariationConfig, rng: np.random.Generator) -> CircuitGenome:
    gates = list(g.gates)
    q = g.q
    if rng.random() < cfg.p_add and len(gates) < cfg.max_gates:
        gates.insert(int(rng.integers(len(gates) + 1)), random_gate(q, rng))
    if rng.random() < cfg.p_remove and gates:
        del gates[int(rng.integers(len(gates)))]
    if rng.random() < cfg.p_kind_change and gates:
        i = int(rng.integers(len(gates)))
        others = [k for k in GATE_KINDS if k != gates[i].kind]
        gates[i] = random_gate(q, rng, others[rng.integers(len(others))])
    if rng.random() < cfg.p_rewire and gates:
        i = int(rng.integers(len(gates)))
        gates[i] = _rewire(gates[i], q, rng)
    if cfg.p_angle_jitter > 0:
        for i, gate in enumerate(gates):
            if gate.theta is not None and rng.random() < cfg.p_angle_jitter:
                theta = gate.theta + float(rng.normal(0.0, cfg.angle_jitter_sigma))
                gates[i] = Gate(gate.kind, gate.target, theta=theta)
    return CircuitGenome(q, tuple(gates[:cfg.max_gates]))


def crossover_at(a: CircuitGenome, b: CircuitGenome, cut_a: int, cut_b: int,
                 max_gates: Optional[int] = None) -> tuple[CircuitGenome, CircuitGenome]:
    if a.q != b.q:
        raise DimensionError(f"cannot cross {a.q}-qubit and {b.q}-qubit genomes")
    c1 = a.gates[:cut_a] + b.gates[cut_b:]
    c2 = b.gates[:cut_b] + a.gates[cut_a:]
    if max_gates is not None:
        c1, c2 = c1[:max_gates], c2[:max_gates]
    return CircuitGenome(a.q, c1), CircuitGenome(a.q, c2)


def crossover(a: CircuitGenome, b: CircuitGenome, rng: np.random.Generator,
              max_gates: Optional[int] = None) -> tuple[CircuitGenome, CircuitGenome]:
    """Single-point crossover with an independent cut point in each parent."""
    if a.q != b.q:
        raise DimensionError(f"cannot cross {a.q}-qubit and {b.q}-qubit genomes")
    cut_a = int(rng.integers(len(a) + 1))
    cut_b = int(rng.integers(len(b) + 1))
    return crossover_at(a, b, cut_a, cut_b, max_gates)


# -- resource metrics ---------------------------------------------------------------

def depth(g: CircuitGenome) -> int:
    """Moments under as-soon-as-possible scheduling; gates sharing a qubit conflict."""
    ready = [0] * g.q
    d = 0
    for gate in g.gates:
        m = max(ready[w] for w in gate.qubits) + 1
        for w in gate.qubits:
            ready[w] = m
        d = max(d, m)
    return d


def cnot_count(g: CircuitGenome) -> int:
    return sum(1 for gate in g.gates if gate.kind == "CNOT")


def gate_token(gate: Gate) -> tuple:
    bucket = None
    if gate.theta is not None:
        bucket = int(math.floor((gate.theta % _TWO_PI) / _ANGLE_BUCKET)) % 16
    return (gate.kind, gate.target, gate.control, bucket)


def _levenshtein(s, t) -> int:
    prev = list(range(len(t) + 1))
    for i, x in enumerate(s, 1):
        cur = [i] + [0] * len(t)
        for j, y in enumerate(t, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def structural_distance(a: CircuitGenome, b: CircuitGenome) -> float:
    """Token edit distance normalised by the longer genome; 0 for identical structure."""
    if a.q != b.q:
        raise DimensionError(f"cannot compare {a.q}-qubit and {b.q}-qubit genomes")
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    ta = [gate_token(g) for g in a.gates]
    tb = [gate_token(g) for g in b.gates]
    return _levenshtein(ta, tb) / longest


CHAIN_MOTIF = ("RX", "RY", "RZ")


def motif_report(g: CircuitGenome) -> dict[str, int]:
    """Count CNOT->RX->RY->RZ chains and per-qubit CNOT fan-in.

    A chain is a CNOT followed, on one of its qubits, by RX, RY, RZ as the
    next three gates acting on that qubit. Fan-in of a qubit is the number
    of distinct control qubits whose CNOTs target it.
    """
    per_qubit: list[list[int]] = [[] for _ in range(g.q)]
    for i, gate in enumerate(g.gates):
        for w in gate.qubits:
            per_qubit[w].append(i)
    chains = 0
    for w, seq in enumerate(per_qubit):
        for k, i in enumerate(seq):
            if g.gates[i].kind != "CNOT":
                continue
            nxt = tuple(g.gates[j].kind for j in seq[k + 1:k + 4])
            if nxt == CHAIN_MOTIF:
                chains += 1
    fan_in: list[set[int]] = [set() for _ in range(g.q)]
    for gate in g.gates:
        if gate.kind == "CNOT":
            fan_in[gate.target].add(gate.control)
    report = {"cnot_rx_ry_rz_chain": chains,
              "max_cnot_fan_in": max((len(s) for s in fan_in), default=0)}
    for w, s in enumerate(fan_in):
        report[f"cnot_fan_in_q{w}"] = len(s)
    return report
