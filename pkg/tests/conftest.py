import os

import numpy as np
import pytest
from hypothesis import settings

from qsimilarity.genome import Gate
from qsimilarity.imaging import ImagePatch

settings.register_profile("default", deadline=None, max_examples=60)
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_patch(rng, h, w=None):
    w = h if w is None else w
    return ImagePatch(rng.uniform(0, 255, size=(3, h, w)))


def random_gate_list(rng, q, n):
    kinds = ("RX", "RY", "RZ", "H", "CNOT") if q > 1 else ("RX", "RY", "RZ", "H")
    gates = []
    for _ in range(n):
        k = kinds[rng.integers(len(kinds))]
        if k == "CNOT":
            c, t = rng.choice(q, 2, replace=False)
            gates.append(Gate("CNOT", int(t), int(c)))
        elif k == "H":
            gates.append(Gate("H", int(rng.integers(q))))
        else:
            gates.append(Gate(k, int(rng.integers(q)), theta=float(rng.uniform(-7, 7))))
    return gates


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(ACCEPTANCE_LINES[-1])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
