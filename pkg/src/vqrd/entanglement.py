"""Entanglement distillation overheads targeting Bell pairs.

Separability is always relaxed to PPT.  Values labelled "PPT" are exact for
PPT(-preserving) operations and for membership questions on 2x2 and 2x3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qcore
from . import freesets as fs
from . import monotones as mono
from .conic import Model
from .freesets import FreeSetSpec
from .monotones import OverheadResult

__all__ = [
    "EntanglementInstance", "ppt_overhead_exact", "ppt_singlet_fraction", "overhead_from_fraction",
    "overhead_via_fraction", "m_distillation_norm", "pure_state_overhead", "isotropic_overhead",
    "ppt_state_overhead", "hypothesis_testing_entropy", "eh_overhead_bound", "eh_rate_bound",
    "negativity", "ppt_dual_value",
]


@dataclass
class EntanglementInstance:
    state: np.ndarray
    dims: tuple = (2, 2)
    m: int = 1
    eps: float = 0.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not 0 <= self.eps <= 1:
            raise ValueError("eps must lie in [0, 1]")
        if self.state.shape[0] != self.dims[0] * self.dims[1]:
            raise ValueError("state does not match the bipartition")


def _dims(rho: np.ndarray, dims) -> tuple:
    if dims is not None:
        return tuple(dims)
    d = int(round(np.sqrt(rho.shape[0])))
    if d * d != rho.shape[0]:
        raise ValueError("pass dims for non-square bipartitions")
    return (d, d)


def ppt_overhead_exact(rho, m: int = 1, dims=None) -> OverheadResult:
    """Zero-error overhead under PPT operations.

    min mu_+ + mu_- with 0 <= Q_pm <= mu_pm I, -mu_pm/2^m <= Q_pm^Gamma <= mu_pm/2^m,
    Tr rho (Q_+ - Q_-) = 1 = mu_+ - mu_-.
    """
    rho = qcore.herm(rho)
    dims = _dims(rho, dims)
    n = rho.shape[0]
    I = np.eye(n)
    model = Model("ppt_overhead")
    Qp, Qm, mup, mum = mono.build_q_program(model, rho, 0.0, trace_equality=True)
    for Q, mu in ((Qp, mup), (Qm, mum)):
        QG = Q.ptranspose(dims, 1)
        bound = (mu / 2**m).kron_right(I)
        model.add_psd(bound - QG)
        model.add_psd(bound + QG)
    return mono._finish(model, Qp, Qm, mup, mum)


def ppt_singlet_fraction(rho, m: int = 1, dims=None) -> float:
    """max Tr(rho W) over 0 <= W <= I with Tr(W sigma) <= 2^-m for all PPT sigma."""
    rho = qcore.herm(rho)
    dims = _dims(rho, dims)
    n = rho.shape[0]
    model = Model("ppt_singlet_fraction")
    W = model.hermitian(n, psd=True)
    model.add_psd(model.const(np.eye(n)) - W)
    fs.encode_sup_overlap_leq(model, W, 2.0**-m, FreeSetSpec.ppt(*dims))
    model.maximize(W.inner(rho))
    return float(np.clip(model.solve().value, 0.0, 1.0))


def overhead_from_fraction(f: float, eps: float = 0.0) -> float:
    return mono.overlap_lower_bound(f, eps, clamp=True)


def overhead_via_fraction(rho, m: int = 1, eps: float = 0.0, dims=None) -> float:
    return overhead_from_fraction(ppt_singlet_fraction(rho, m, dims), eps)


def m_distillation_norm(coeffs, M: int) -> float:
    """||phi||_[M] from Schmidt coefficients sorted in nonincreasing order."""
    z = np.asarray(getattr(coeffs, "coeffs", coeffs), dtype=float)
    if np.any(np.diff(z) > 1e-12):
        raise ValueError("Schmidt coefficients must be sorted nonincreasing")
    if z.size < M:
        z = np.concatenate([z, np.zeros(M - z.size)])
    scores = [np.sum(z[M - k:] ** 2) / k for k in range(1, M + 1)]
    k = int(np.argmin(scores)) + 1
    return float(np.sum(z[:M - k]) + np.sqrt(k) * np.linalg.norm(z[M - k:]))


def pure_state_overhead(schmidt, m: int = 1, eps: float = 0.0) -> float:
    norm2 = m_distillation_norm(schmidt, 2**m) ** 2
    return max(2 ** (m + 1) * (1 - eps) / norm2 - 1, 1.0)


def isotropic_overhead(alpha: float, k: int = 1, m: int = 1, eps: float = 0.0) -> float:
    if not 1 <= m <= k:
        raise ValueError("need 1 <= m <= k")
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if alpha >= 1 - 2.0**-k:
        return ppt_state_overhead(m, eps)
    c = (2**k - 2 ** (k - m)) / (2**k - 1)
    return max(2 * (1 - eps) / (1 - alpha * c) - 1, 1.0)


def ppt_state_overhead(m: int = 1, eps: float = 0.0) -> float:
    """Overhead for any PPT (in particular bound entangled) input."""
    return max(2 ** (m + 1) * (1 - eps) - 1, 1.0)


def hypothesis_testing_entropy(rho, eps: float = 0.0, dims=None, relaxation: str = "ppt") -> float:
    """-log2 of min over 0 <= A <= I, Tr(A rho) >= 1-eps of max_sigma Tr(A sigma), in bits."""
    if relaxation != "ppt":
        raise ValueError("only the PPT relaxation is implemented")
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    rho = qcore.herm(rho)
    dims = _dims(rho, dims)
    n = rho.shape[0]
    model = Model("hypothesis_testing")
    A = model.hermitian(n, psd=True)
    model.add_psd(model.const(np.eye(n)) - A)
    model.add_geq(A.inner(rho), 1 - eps)
    t = model.scalar()
    fs.encode_sup_overlap_leq(model, A, t, FreeSetSpec.ppt(*dims))
    model.minimize(t)
    val = model.solve().value
    return float(max(-np.log2(val), 0.0))


def eh_overhead_bound(E_H: float, m: int) -> float:
    """Upper bound 2^(m - E_H + 1) - 1, valid for m >= E_H."""
    if m < E_H - 1e-9:
        raise ValueError("bound only holds for m >= E_H")
    return 2.0 ** (m - E_H + 1) - 1


def eh_rate_bound(E_H: float) -> float:
    """Rate lower bound 1/(2^(2 - E_H) - 1)^2."""
    return 1.0 / (2.0 ** (2 - E_H) - 1) ** 2


def negativity(rho, dims=None) -> float:
    """Trace norm of the partial transpose."""
    rho = qcore.herm(rho)
    return qcore.trace_norm(qcore.partial_transpose(rho, _dims(rho, dims), 1))


def ppt_dual_value(rho, m: int = 1, dims=None) -> mono.DualResult:
    """Dual form evaluated at the target itself over PPT channels."""
    rho = qcore.herm(rho)
    dims = _dims(rho, dims)
    cls = mono.OperationClass("ppt", dims, (2**m, 2**m))
    return mono.dual_overhead_value(rho, qcore.bell(m), cls)
