"""Dense state-vector simulation over {RX, RY, RZ, H, CNOT}.

Bit convention: qubit ``k`` is bit ``k`` of the amplitude index, so qubit 0
is the least-significant bit. The same convention is used by the embedding
(interleaving puts the two images on the two values of qubit 0), by the
readout helpers, and by the QASM exporter.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .genome import CircuitGenome, Gate
from .imaging import DimensionError
from .triplet import EmbeddingVector

__all__ = [
    "Gate", "StateVector", "NoiseConfig", "ProjectionPoint", "QasmParseError",
    "apply_gate", "run_circuit", "qubit_one_probability", "qubit_one_probabilities",
    "projection_points", "readout", "export_qasm", "parse_qasm_subset", "gate_matrix",
]

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI = {"X": _X, "Y": _Y, "Z": _Z}


def gate_matrix(kind: str, theta: Optional[float] = None) -> np.ndarray:
    """2x2 unitary of a single-qubit gate kind."""
    if kind == "H":
        return _H
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[complex(c, -s), 0], [0, complex(c, s)]], dtype=complex)
    raise ValueError(f"no single-qubit matrix for {kind!r}")


@dataclass(frozen=True, eq=False)
class StateVector:
    q: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.q,):
            raise DimensionError(f"{self.q} qubits need {1 << self.q} amplitudes")

    @classmethod
    def zero(cls, q: int) -> "StateVector":
        a = np.zeros(1 << q, dtype=complex)
        a[0] = 1.0
        return cls(q, a)

    @classmethod
    def from_embedding(cls, emb: EmbeddingVector) -> "StateVector":
        return cls(emb.q, emb.amplitudes.astype(complex))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class NoiseConfig:
    """Per-gate Pauli noise applied to every qubit a gate touches.

    ``p_depolarizing`` is the probability that the qubit is replaced by the
    maximally mixed state, realised as a uniformly random Pauli from
    {I, X, Y, Z}; this gives <X> = 1 - p on |+>.
    """
    p_bitflip: float = 0.0
    p_phaseflip: float = 0.0
    p_depolarizing: float = 0.0

    def __post_init__(self):
        ps = (self.p_bitflip, self.p_phaseflip, self.p_depolarizing)
        if any(not 0.0 <= p <= 1.0 for p in ps):
            raise ValueError(f"noise probabilities must lie in [0, 1]: {ps}")
        if sum(ps) > 1.0 + 1e-12:
            raise ValueError(f"noise probabilities must sum to <= 1: {ps}")

    @classmethod
    def composite(cls, level: float) -> "NoiseConfig":
        """Split a total noise level equally over the three channel kinds."""
        return cls(level / 3, level / 3, level / 3)

    @property
    def is_zero(self) -> bool:
        return self.p_bitflip == 0 and self.p_phaseflip == 0 and self.p_depolarizing == 0


class EmbeddingCapacityError(ValueError):
    """Raised when a state has too few qubits for the requested readout."""


@dataclass(frozen=True)
class ProjectionPoint:
    x: float
    y: float


# -- kernels ------------------------------------------------------------------

def _apply_1q(amps: np.ndarray, q: int, matrix: np.ndarray, target: int) -> np.ndarray:
    view = amps.reshape(1 << (q - 1 - target), 2, 1 << target)
    return np.einsum("ab,ibj->iaj", matrix, view).reshape(-1)


@lru_cache(maxsize=None)
def _cnot_perm(q: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << q)
    return idx ^ (((idx >> control) & 1) << target)


def _apply_cnot(amps: np.ndarray, q: int, control: int, target: int) -> np.ndarray:
    return amps[_cnot_perm(q, control, target)]


def _apply(amps: np.ndarray, q: int, gate: Gate) -> np.ndarray:
    if gate.kind == "CNOT":
        return _apply_cnot(amps, q, gate.control, gate.target)
    return _apply_1q(amps, q, gate_matrix(gate.kind, gate.theta), gate.target)


def _check_gate(q: int, gate: Gate) -> None:
    if max(gate.qubits) >= q:
        raise IndexError(f"gate {gate} addresses a qubit outside 0..{q - 1}")


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    _check_gate(state.q, gate)
    return StateVector(state.q, _apply(state.amplitudes, state.q, gate))


def _apply_noise(amps, q, qubits, noise: NoiseConfig, rng) -> np.ndarray:
    for w in qubits:
        u = rng.random(3)
        if u[0] < noise.p_bitflip:
            amps = _apply_1q(amps, q, _X, w)
        if u[1] < noise.p_phaseflip:
            amps = _apply_1q(amps, q, _Z, w)
        if u[2] < noise.p_depolarizing:
            pauli = "IXYZ"[rng.integers(4)]
            if pauli != "I":
                amps = _apply_1q(amps, q, _PAULI[pauli], w)
    return amps


def run_circuit(genome: CircuitGenome, state, noise: Optional[NoiseConfig] = None,
                rng: Optional[np.random.Generator] = None) -> StateVector:
    """Apply the genome's gates in order to an input state or embedding.

    With ``noise`` set, each gate is followed by stochastic Pauli errors on
    the qubits it touched (one Monte-Carlo trajectory per call).
    """
    if isinstance(state, EmbeddingVector):
        state = StateVector.from_embedding(state)
    if genome.q != state.q:
        raise DimensionError(f"genome has {genome.q} qubits but input has {state.q}")
    noisy = noise is not None and not noise.is_zero
    if noisy and rng is None:
        raise ValueError("noisy simulation needs a random generator")
    q = state.q
    amps = state.amplitudes
    for gate in genome.gates:
        amps = _apply(amps, q, gate)
        if noisy:
            amps = _apply_noise(amps, q, gate.qubits, noise, rng)
    return StateVector(q, amps)


# -- readout --------------------------------------------------------------------

def qubit_one_probabilities(state: StateVector) -> np.ndarray:
    """P(|1>) for every qubit, exact (infinite-shot) values."""
    probs = np.abs(state.amplitudes) ** 2
    t = probs.reshape((2,) * state.q)
    out = np.empty(state.q)
    for k in range(state.q):
        axis = state.q - 1 - k
        out[k] = t.sum(axis=tuple(a for a in range(state.q) if a != axis))[1]
    return out


def qubit_one_probability(state: StateVector, qubit: int) -> float:
    if not 0 <= qubit < state.q:
        raise IndexError(f"qubit {qubit} out of range for {state.q} qubits")
    probs = np.abs(state.amplitudes) ** 2
    view = probs.reshape(1 << (state.q - 1 - qubit), 2, 1 << qubit)
    return float(min(1.0, view[:, 1, :].sum()))


def _sampled_probabilities(state: StateVector, shots: int, rng, n: int) -> np.ndarray:
    probs = np.abs(state.amplitudes) ** 2
    probs = probs / probs.sum()
    outcomes = rng.choice(probs.size, size=shots, p=probs)
    return np.array([((outcomes >> k) & 1).mean() for k in range(n)])


def projection_points(state: StateVector, shots: Optional[int] = None,
                      rng: Optional[np.random.Generator] = None
                      ) -> tuple[ProjectionPoint, ProjectionPoint]:
    """Read two 2-D points from qubits (0, 1) and (2, 3).

    Exact probabilities by default; with ``shots`` the marginals are
    estimated from that many sampled measurements.
    """
    if state.q < 4:
        raise EmbeddingCapacityError(f"projection needs >= 4 qubits, state has {state.q}")
    if shots:
        if rng is None:
            raise ValueError("finite-shot readout needs a random generator")
        p = _sampled_probabilities(state, shots, rng, 4)
    else:
        p = [qubit_one_probability(state, k) for k in range(4)]
    return ProjectionPoint(p[0], p[1]), ProjectionPoint(p[2], p[3])


def readout(genome: CircuitGenome, state, noise: Optional[NoiseConfig] = None,
            rng: Optional[np.random.Generator] = None, shots: int = 0,
            trajectories: int = 1) -> tuple[ProjectionPoint, ProjectionPoint]:
    """Run the circuit and read both projection points.

    Under noise the points are averaged over ``trajectories`` independent
    Monte-Carlo runs; without noise a single exact run is used.
    """
    if trajectories < 1:
        raise ValueError("trajectories must be >= 1")
    if noise is None or noise.is_zero:
        trajectories = 1
    acc = np.zeros(4)
    for _ in range(trajectories):
        a, b = projection_points(run_circuit(genome, state, noise, rng), shots or None, rng)
        acc += (a.x, a.y, b.x, b.y)
    if trajectories == 1:
        return a, b
    acc /= trajectories
    return ProjectionPoint(acc[0], acc[1]), ProjectionPoint(acc[2], acc[3])


# -- OpenQASM 2.0 ---------------------------------------------------------------

QASM_HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'


def export_qasm(genome: CircuitGenome) -> str:
    lines = [QASM_HEADER.rstrip("\n"), f"qreg q[{genome.q}];"]
    for g in genome.gates:
        if g.kind == "CNOT":
            lines.append(f"cx q[{g.control}],q[{g.target}];")
        elif g.kind == "H":
            lines.append(f"h q[{g.target}];")
        else:
            lines.append(f"{g.kind.lower()}({g.theta:.17g}) q[{g.target}];")
    return "\n".join(lines) + "\n"


class QasmParseError(ValueError):
    def __init__(self, lineno: int, text: str, reason: str = "unknown statement"):
        super().__init__(f"line {lineno}: {reason}: {text!r}")
        self.lineno = lineno


_QREG = re.compile(r"qreg\s+q\[(\d+)\]$")
_ROT = re.compile(r"(rx|ry|rz)\(\s*([^)]+?)\s*\)\s+q\[(\d+)\]$")
_H_RE = re.compile(r"h\s+q\[(\d+)\]$")
_CX = re.compile(r"cx\s+q\[(\d+)\]\s*,\s*q\[(\d+)\]$")


def parse_qasm_subset(text: str) -> CircuitGenome:
    """Parse the gate vocabulary written by :func:`export_qasm`."""
    q = None
    gates = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("//", 1)[0].strip()
        if not line:
            continue
        if not line.endswith(";"):
            raise QasmParseError(lineno, raw, "missing ';'")
        stmt = line[:-1].strip()
        if stmt == "OPENQASM 2.0" or stmt == 'include "qelib1.inc"':
            continue
        if m := _QREG.match(stmt):
            if q is not None:
                raise QasmParseError(lineno, raw, "second qreg")
            q = int(m.group(1))
            continue
        if q is None:
            raise QasmParseError(lineno, raw, "gate before qreg")
        try:
            if m := _ROT.match(stmt):
                gates.append(Gate(m.group(1).upper(), int(m.group(3)), theta=float(m.group(2))))
            elif m := _H_RE.match(stmt):
                gates.append(Gate("H", int(m.group(1))))
            elif m := _CX.match(stmt):
                gates.append(Gate("CNOT", int(m.group(2)), int(m.group(1))))
            else:
                raise QasmParseError(lineno, raw)
        except ValueError as exc:
            if isinstance(exc, QasmParseError):
                raise
            raise QasmParseError(lineno, raw, str(exc)) from exc
        if max(gates[-1].qubits) >= q:
            raise QasmParseError(lineno, raw, "qubit index outside qreg")
    if q is None:
        raise QasmParseError(0, "", "no qreg declaration")
    return CircuitGenome(q, tuple(gates))
