"""Independent reference implementations used only by the tests.

Each oracle deliberately takes a different route from the library code:
dense Kronecker-product matrices instead of strided kernels, brute-force
enumeration instead of reshapes, recursion instead of dynamic programming.
"""
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.linalg import expm

PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def single_qubit_unitary(kind, theta=None):
    if kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    return expm(-0.5j * theta * PAULI[kind[1]])


def dense_gate(q, gate):
    """Full 2^q x 2^q matrix of one gate; qubit 0 is the least-significant bit."""
    dim = 1 << q
    if gate.kind == "CNOT":
        m = np.zeros((dim, dim), dtype=complex)
        for col in range(dim):
            bits = [(col >> k) & 1 for k in range(q)]
            if bits[gate.control]:
                bits[gate.target] ^= 1
            row = sum(b << k for k, b in enumerate(bits))
            m[row, col] = 1
        return m
    u = single_qubit_unitary(gate.kind, gate.theta)
    m = np.array([[1.0 + 0j]])
    for k in reversed(range(q)):
        m = np.kron(m, u if k == gate.target else np.eye(2))
    return m


def dense_circuit(q, gates):
    u = np.eye(1 << q, dtype=complex)
    for g in gates:
        u = dense_gate(q, g) @ u
    return u


def marginal_one(amps, q, qubit):
    total = 0.0
    for idx in range(1 << q):
        if (idx >> qubit) & 1:
            total += abs(amps[idx]) ** 2
    return total


def brute_ranks(xs):
    xs = list(xs)
    return [sum(1 for y in xs if y < x) + (sum(1 for y in xs if y == x) + 1) / 2 for x in xs]


def brute_spearman(xs, ys):
    rx, ry = brute_ranks(xs), brute_ranks(ys)
    n = len(rx)
    mx, my = sum(rx) / n, sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    return cov / np.sqrt(vx * vy)


def pairwise_fronts(objs):
    """Front index by repeatedly peeling the non-dominated set, O(n^2) per front."""
    def dom(a, b):
        return all(x <= y for x, y in zip(a, b)) and a != b and any(x < y for x, y in zip(a, b))
    remaining = set(range(len(objs)))
    fronts = [None] * len(objs)
    k = 0
    while remaining:
        layer = {i for i in remaining
                 if not any(dom(objs[j], objs[i]) for j in remaining if j != i)}
        for i in layer:
            fronts[i] = k
        remaining -= layer
        k += 1
    return fronts


def dag_longest_path(gates):
    """Depth as the longest chain in the dependency DAG of qubit-sharing gates."""
    n = len(gates)
    longest = [1] * n
    for j in range(n):
        for i in range(j):
            if set(gates[i].qubits) & set(gates[j].qubits):
                longest[j] = max(longest[j], longest[i] + 1)
    return max(longest, default=0)


def edit_distance(s, t):
    s, t = tuple(s), tuple(t)

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (s[i - 1] != t[j - 1]))
    return d(len(s), len(t))


def chain_count_scan(gates):
    """Quadratic scan: for each CNOT and each of its qubits, inspect the next gates on it."""
    count = 0
    for i, g in enumerate(gates):
        if g.kind != "CNOT":
            continue
        for w in g.qubits:
            following = [h.kind for h in gates[i + 1:] if w in h.qubits][:3]
            if following == ["RX", "RY", "RZ"]:
                count += 1
    return count


def histogram_count(pixels, bins):
    counts = np.zeros((3, bins))
    for c, i, j in product(range(3), range(pixels.shape[1]), range(pixels.shape[2])):
        v = pixels[c, i, j]
        b = bins - 1 if v >= 255 else int(v * bins // 256)
        counts[c, b] += 1
    return (counts / (pixels.shape[1] * pixels.shape[2])).ravel()
