"""Dephased non-Markovian process: comb construction and its signed system-only correction.

Each step couples system S and environment E through CNOT(S->E) followed by
CNOT(E->S), then dephases E.  The environment starts inside the comb in a fixed
state and leaves with the last system output, so the wires are

    S1_in, S1_out, S2_in, ..., SL_in, (SL_out (x) E).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import qcore
from .qcore import CombChoi
from .sampler import QuasiDecomposition

__all__ = [
    "DephasedCombInstance", "CombDecomposition", "DecompositionCheck", "step_unitary", "step_choi",
    "build_dephasing_comb", "target_comb", "apply_system_z", "virtual_comb_decomposition",
    "verify_decomposition", "simulate_comb_choi", "z_propagation_residual", "comb_as_channel",
    "comb_quasi_decomposition",
]

_I = np.eye(2, dtype=complex)
_Z = qcore.PAULI["Z"]
_X = qcore.PAULI["X"]


def step_unitary() -> np.ndarray:
    """CNOT with E as control after CNOT with S as control, on S (x) E."""
    swap = np.eye(4)[[0, 2, 1, 3]]
    cnot_es = swap @ qcore.CNOT @ swap
    return cnot_es @ qcore.CNOT


def z_propagation_residual() -> float:
    """|| Z_S U Z_S - Z_E U ||: a Z on the system on both sides acts as Z on E."""
    U = step_unitary()
    zs = np.kron(_Z, _I)
    ze = np.kron(_I, _Z)
    return float(np.abs(zs @ U @ zs - ze @ U).max())


def step_choi(p: float) -> np.ndarray:
    """Choi of (S_in, E_prev) -> (S_out, E_next): unitary step then dephasing on E."""
    U = step_unitary()
    return qcore.choi_from_kraus([np.sqrt(1 - p) * U, np.sqrt(p) * np.kron(_I, _Z) @ U])


def _env(env_state) -> np.ndarray:
    if env_state is None:
        return qcore.proj(qcore.ket(0, 2))
    e = np.asarray(env_state, dtype=complex)
    return qcore.proj(e) if e.ndim == 1 else qcore.herm(e)


def _wires(L: int) -> tuple:
    return tuple([(2, 2)] * (L - 1) + [(2, 4)])


def build_dephasing_comb(L: int, p: float, env_state=None) -> CombChoi:
    """Link product of L steps starting from the environment state."""
    if L < 1:
        raise ValueError("need at least one step")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    J = step_choi(p)
    mat, dims, labels = _env(env_state), [2], ["E0"]
    for j in range(1, L + 1):
        mat, dims, labels = qcore.link(mat, dims, labels, J, [2, 2, 2, 2],
                                       [f"S{j}i", f"E{j - 1}", f"S{j}o", f"E{j}"])
    assert labels[-1] == f"E{L}"
    return CombChoi(_wires(L), mat)


def target_comb(L: int, env_state=None) -> CombChoi:
    return build_dephasing_comb(L, 0.0, env_state)


@dataclass
class DephasedCombInstance:
    L: int
    p: float
    env_state: np.ndarray | None = None

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("need at least one step")
        if not 0 <= self.p < 0.5:
            raise ValueError("p must lie in [0, 1/2)")

    @property
    def noisy(self) -> CombChoi:
        return build_dephasing_comb(self.L, self.p, self.env_state)

    @property
    def target(self) -> CombChoi:
        return target_comb(self.L, self.env_state)


def _factor_dims(L: int) -> list[int]:
    return [2] * (2 * L + 1)


def apply_system_z(comb: CombChoi, flags) -> CombChoi:
    """Z on S_j before and after step j for every flagged j (a system-only comb acting on comb)."""
    L = comb.steps
    flags = tuple(int(f) for f in flags)
    if len(flags) != L:
        raise ValueError("one flag per step")
    ops = []
    for j in range(L):
        z = _Z if flags[j] else _I
        ops += [z, z]
    ops.append(_I)
    K = qcore.kron(*ops)
    return CombChoi(comb.wires, K @ comb.mat @ K.conj().T)


@dataclass
class CombDecomposition:
    flags: list[tuple]
    coefficients: np.ndarray
    combs: list[CombChoi]

    @property
    def sum_abs(self) -> float:
        return float(np.abs(self.coefficients).sum())


def virtual_comb_decomposition(L: int, p: float, env_state=None) -> CombDecomposition:
    """Target = sum_i lambda_i Lambda_i(noisy) with
    lambda_i = (-1)^|i| (1-p)^(L-|i|) p^|i| / (1-2p)^L."""
    if not 0 <= p < 0.5:
        raise ValueError("p must lie in [0, 1/2)")
    noisy = build_dephasing_comb(L, p, env_state)
    flags = [(0,) * L] if p == 0 else list(itertools.product((0, 1), repeat=L))
    norm = (1 - 2 * p) ** L
    coeffs = np.array([(-1) ** sum(f) * (1 - p) ** (L - sum(f)) * p ** sum(f) / norm for f in flags])
    return CombDecomposition(flags, coeffs, [apply_system_z(noisy, f) for f in flags])


@dataclass(frozen=True)
class DecompositionCheck:
    max_residual: float
    sum_abs: float


def verify_decomposition(inst: DephasedCombInstance, decomp: CombDecomposition) -> DecompositionCheck:
    target = inst.target.mat
    acc = np.zeros_like(target)
    for c, comb in zip(decomp.coefficients, decomp.combs):
        acc = acc + c * comb.mat
    return DecompositionCheck(float(np.abs(acc - target).max()), decomp.sum_abs)


# ---------------------------------------------------------------------------
# direct circuit simulation and the unrolled channel


def simulate_comb_choi(L: int, p: float, env_state=None) -> np.ndarray:
    """Comb Choi from density-matrix simulation of the whole circuit on operator-basis inputs."""
    U = step_unitary()
    env = _env(env_state)
    n = L + 1  # qubits S1..SL, E

    def on(op2, j):
        # op on (S_j, E) inside S1..SL E
        ops = [_I] * n
        full = np.zeros((2**n, 2**n), dtype=complex)
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        coef = op2[2 * a + b, 2 * c + d]
                        if coef == 0:
                            continue
                        ops = [_I] * n
                        ops[j] = np.outer(np.eye(2)[a], np.eye(2)[c])
                        ops[-1] = np.outer(np.eye(2)[b], np.eye(2)[d])
                        full += coef * qcore.kron(*ops)
        return full

    Us = [on(U, j) for j in range(L)]
    ZE = qcore.kron(*([_I] * L + [_Z]))

    def run(x):
        r = np.kron(x, env)
        for j in range(L):
            r = Us[j] @ r @ Us[j].conj().T
            r = (1 - p) * r + p * ZE @ r @ ZE
        return r

    J = qcore.choi_from_map(run, 2**L)  # factors: S1i..SLi, S1o..SLo, E
    T = J.reshape([2] * (2 * (2 * L + 1)))
    k = 2 * L + 1
    order = []
    for j in range(L):
        order += [j, L + j]
    order.append(2 * L)
    T = T.transpose(order + [k + o for o in order])
    return T.reshape(2 ** k, 2 ** k)


def comb_as_channel(comb: CombChoi) -> np.ndarray:
    """Choi of the unrolled channel (S1_in..SL_in) -> (S1_out..SL_out, E)."""
    L = comb.steps
    k = 2 * L + 1
    T = comb.mat.reshape([2] * (2 * k))
    order = [2 * j for j in range(L)] + [2 * j + 1 for j in range(L)] + [2 * L]
    T = T.transpose(order + [k + o for o in order])
    return T.reshape(2**k, 2**k)


def comb_quasi_decomposition(L: int, p: float, env_state=None) -> QuasiDecomposition:
    """Two-branch form: even-parity flag patterns vs odd-parity, each a probability mixture."""
    dec = virtual_comb_decomposition(L, p, env_state)
    return QuasiDecomposition.from_terms(dec.coefficients, [comb_as_channel(c) for c in dec.combs],
                                         2**L, 2 ** (L + 1))
