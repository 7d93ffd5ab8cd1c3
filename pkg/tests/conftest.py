"""Shared fixtures and brute-force reference kernels.

The reference kernels build full 2^N x 2^N matrices with ``np.kron`` and
explicit permutation loops. They share nothing with the package kernels
beyond the bit convention (qubit k is bit k of the index).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def dense_single(gate: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    # leftmost kron factor is the highest qubit label
    out = np.array([[1.0 + 0j]])
    for k in reversed(range(num_qubits)):
        out = np.kron(out, gate if k == qubit else np.eye(2))
    return out


def dense_cnot(control: int, target: int, num_qubits: int) -> np.ndarray:
    dim = 1 << num_qubits
    mat = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        j = i ^ (1 << target) if (i >> control) & 1 else i
        mat[j, i] = 1
    return mat


def random_vector(rng: np.random.Generator, num_qubits: int) -> np.ndarray:
    v = rng.standard_normal(1 << num_qubits) + 1j * rng.standard_normal(1 << num_qubits)
    return v / np.linalg.norm(v)


def reference_partial_trace(psi: np.ndarray, num_qubits: int, keep: list[int]) -> np.ndarray:
    """Loop-based partial trace; result bit k is qubit keep[k]."""
    k = len(keep)
    rest = [q for q in range(num_qubits) if q not in keep]
    rho = np.zeros((1 << k, 1 << k), dtype=complex)
    for env in range(1 << len(rest)):
        base = sum(((env >> t) & 1) << q for t, q in enumerate(rest))
        vec = np.array(
            [psi[base | sum(((a >> t) & 1) << q for t, q in enumerate(keep))] for a in range(1 << k)]
        )
        rho += np.outer(vec, vec.conj())
    return rho


@st.composite
def state_vectors(draw, min_qubits: int = 1, max_qubits: int = 5):
    n = draw(st.integers(min_qubits, max_qubits))
    seed = draw(st.integers(0, 2**32 - 1))
    return n, random_vector(np.random.default_rng(seed), n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def reference_tables() -> dict:
    return json.loads((DATA / "reference_tables.json").read_text(encoding="utf-8"))
