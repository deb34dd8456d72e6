"""Coherence distillation towards |+>^m under MIO/DIO."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qcore
from . import monotones as mono
from .freesets import FreeSetSpec
from .monotones import OverheadResult
from .sampler import QuasiDecomposition

__all__ = [
    "CoherenceInstance", "RateResult", "mio_dio_overhead", "l1_coherence", "single_qubit_overhead",
    "single_qubit_rate", "one_qubit_decomposition", "dio_channels", "commutes_with_dephasing",
    "coherence_target_output", "coherence_dual_value",
]


@dataclass
class CoherenceInstance:
    state: np.ndarray
    m: int = 1
    eps: float = 0.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not 0 <= self.eps <= 1:
            raise ValueError("eps must lie in [0, 1]")

    @property
    def d(self) -> int:
        return self.state.shape[0]


@dataclass(frozen=True)
class RateResult:
    rate: float
    m_tilde: int


def l1_coherence(rho) -> float:
    rho = np.asarray(rho, dtype=complex)
    return float(np.abs(rho).sum() - np.abs(np.diag(rho)).sum())


def mio_dio_overhead(rho, m: int = 1, eps: float = 0.0) -> OverheadResult:
    """SDP value with Delta(Q_pm) = mu_pm 2^-m I; equal for MIO and DIO."""
    inst = CoherenceInstance(np.asarray(rho, dtype=complex), m, eps)
    return mono.zeta_program(inst.state, 2.0**m, eps, variant="g", f=FreeSetSpec.diagonal(inst.d))


def _l1(rho_or_value) -> float:
    if np.ndim(rho_or_value) == 0:
        return float(rho_or_value)
    rho = np.asarray(rho_or_value)
    if rho.shape != (2, 2):
        raise ValueError("closed forms hold for a single qubit only")
    return l1_coherence(rho)


def single_qubit_overhead(rho, m: int = 1, eps: float = 0.0) -> float:
    """max{(2^m (1-eps) - 1)/M_l1, 1}; accepts a qubit state or its l1 coherence."""
    M = _l1(rho)
    num = 2**m * (1 - eps) - 1
    if M <= 0:
        return 1.0 if num <= 0 else float("inf")
    return max(num / M, 1.0)


def single_qubit_rate(rho, eps: float = 0.0) -> RateResult:
    """sup_m m / C(rho, m)^2 through the last m with unit overhead."""
    M = _l1(rho)
    if eps >= 1:
        return RateResult(float("inf"), -1)
    mt = math.floor(math.log2((M + 1) / (1 - eps)))
    # guard the floor against rounding at exact powers of two
    if 2 ** (mt + 1) * (1 - eps) - 1 <= M * (1 + 1e-12):
        mt += 1
    if mt >= 1 and 2**mt * (1 - eps) - 1 > M * (1 + 1e-12):
        mt -= 1
    mt = max(mt, 0)
    nxt = 2 ** (mt + 1) * (1 - eps) - 1
    first = (mt + 1) * M**2 / nxt**2
    return RateResult(max(first, float(mt)), mt)


# ---------------------------------------------------------------------------
# one-qubit construction with Pauli X / Z mixtures


def _twirl_choi(pre: np.ndarray, post: np.ndarray | None = None) -> np.ndarray:
    """Choi of rho -> post . (rho'/2 + X rho' X/2) . post^dag with rho' = pre rho pre^dag."""
    X = qcore.PAULI["X"]
    kraus = [X @ pre / np.sqrt(2), pre / np.sqrt(2)]
    if post is not None:
        kraus = [post @ k for k in kraus]
    return qcore.choi_from_kraus(kraus)


def one_qubit_decomposition(rho, eps: float = 0.0) -> QuasiDecomposition:
    """Signed mixture of T and Z.T (T = X-twirl) reaching (1-eps)|+><+| + eps|-><-|.

    The off-diagonal phase is first removed by a diagonal unitary, which is free.
    """
    rho = qcore.herm(rho)
    if rho.shape != (2, 2):
        raise ValueError("qubit input required")
    b = rho[0, 1]
    beta = abs(b)
    if beta <= 1e-15:
        raise ValueError("incoherent input cannot reach the target")
    phase = np.diag([1.0, b / beta])  # maps the (0,1) entry to +beta
    Z = qcore.PAULI["Z"]
    J_t = _twirl_choi(phase)
    J_zt = _twirl_choi(phase, Z)
    s = (1 - 2 * eps) / (4 * beta) + 0.5
    if s >= 1:
        return QuasiDecomposition(s, s - 1, J_t, J_zt, 2, 2)
    s = min(max(s, 0.0), 1.0)
    return QuasiDecomposition(1.0, 0.0, s * J_t + (1 - s) * J_zt, J_zt, 2, 2)


# ---------------------------------------------------------------------------
# DIO channels from a feasible (Q_pm, mu_pm) and the dual form


def coherence_target_output(m: int, fidelity: float) -> np.ndarray:
    """fidelity * P + (1 - fidelity) (I - P)/(2^m - 1) with P = |+><+|^m."""
    P = qcore.plus(m)
    n = P.shape[0]
    return fidelity * P + (1 - fidelity) * (np.eye(n) - P) / (n - 1)


def dio_channels(Q_plus, Q_minus, mu_plus: float, mu_minus: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Measure-and-prepare channels omega -> Tr(Q omega/mu) P + Tr((I - Q/mu) omega) (I-P)/(2^m-1)."""
    P = qcore.plus(m)
    n = P.shape[0]
    Pc = (np.eye(n) - P) / (n - 1)
    out = []
    for Q, mu in ((Q_plus, mu_plus), (Q_minus, mu_minus)):
        Q = qcore.herm(Q)
        d = Q.shape[0]
        E = Q / mu if mu > 1e-12 else np.eye(d) / n
        # J = sum_ij |i><j| (x) [E_ji P + (I - E)_ji Pc]
        J = np.kron(E.T, P) + np.kron((np.eye(d) - E).T, Pc)
        out.append(qcore.herm(J))
    return out[0], out[1]


def commutes_with_dephasing(J, d_in: int, d_out: int) -> float:
    """max-entry size of (E o Delta - Delta o E) on the Choi level."""
    J = np.asarray(J, dtype=complex)
    T = J.reshape(d_in, d_out, d_in, d_out)
    # E o Delta: keep only the diagonal input blocks
    a = np.zeros_like(T)
    for i in range(d_in):
        a[i, :, i, :] = T[i, :, i, :]
    # Delta o E: keep only the diagonal output entries
    b = np.zeros_like(T)
    for k in range(d_out):
        b[:, k, :, k] = T[:, k, :, k]
    return float(np.abs(a - b).max())


def coherence_dual_value(rho, m: int = 1, eps: float = 0.0, kind: str = "dio") -> mono.DualResult:
    """Dual form over MIO or DIO evaluated at the twirled target output."""
    rho = qcore.herm(rho)
    eta = coherence_target_output(m, 1 - eps)
    cls = mono.OperationClass(kind, (rho.shape[0],), (2**m,))
    return mono.dual_overhead_value(rho, eta, cls)
