"""Magic-state overheads over the stabilizer polytope (qubit T and qutrit Strange targets)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qcore
from . import freesets as fs
from . import monotones as mono
from .conic import Model
from .freesets import FreeSetSpec
from .monotones import BoundReport, OverheadResult

__all__ = [
    "MagicInstance", "P_TH", "dephased_t_overhead", "t_twirl", "stabilizer_overhead_lp",
    "stabilizer_overhead_exact", "axis_interval", "strange_fraction", "strange_overhead", "target_state",
]

P_TH = 1 / np.sqrt(2)
_TARGET_DIM = {"T": 2, "S": 3}


def target_state(target: str) -> np.ndarray:
    if target == "T":
        return qcore.t_state()
    if target == "S":
        return qcore.strange_state()
    raise ValueError(f"unknown magic target {target!r}")


def _family(d: int) -> str:
    try:
        return {2: "qubit", 4: "two_qubit", 3: "qutrit"}[d]
    except KeyError:
        raise ValueError(f"no stabilizer polytope for dimension {d}") from None


@dataclass
class MagicInstance:
    state: np.ndarray
    target: str = "T"
    m: int = 1
    eps: float = 0.0

    def __post_init__(self):
        if self.target not in _TARGET_DIM:
            raise ValueError("target must be 'T' or 'S'")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not 0 <= self.eps <= 1:
            raise ValueError("eps must lie in [0, 1]")
        self.state = qcore.herm(self.state)
        if self.state.shape[0] != self.qudit_dim**self.m:
            raise ValueError("state dimension does not match target^m")

    @property
    def qudit_dim(self) -> int:
        return _TARGET_DIM[self.target]

    @property
    def free_set(self) -> FreeSetSpec:
        return FreeSetSpec.stabilizer(_family(self.state.shape[0]))


def dephased_t_overhead(p: float, eps: float = 0.0) -> float:
    """max{(1 - 2 eps)/max(|p|, 1/sqrt 2), 1} for p T + (1-p) I/2."""
    if not -1 <= p <= 1:
        raise ValueError("p must lie in [-1, 1]")
    if not 0 <= eps <= 0.5:
        raise ValueError("eps must lie in [0, 1/2]")
    return max((1 - 2 * eps) / max(abs(p), P_TH), 1.0)


def t_twirl(rho) -> np.ndarray:
    """Average of rho and (SX) rho (SX)^dag: projects onto the T / T-bar axis."""
    rho = qcore.herm(rho)
    if rho.shape != (2, 2):
        raise ValueError("qubit input required")
    U = qcore.S_GATE @ qcore.PAULI["X"]
    return (rho + U @ rho @ U.conj().T) / 2


def stabilizer_overhead_lp(inst: MagicInstance) -> BoundReport:
    """zeta_s bracket with k = 1/F_stab(target^m) and k = 1 + R^s_stab(target^m)."""
    d = inst.qudit_dim
    if not ((d == 2 and inst.m <= 2) or (d == 3 and inst.m == 1)):
        raise ValueError("supported: qubits with m <= 2, qutrits with m = 1")
    f = inst.free_set
    return mono.zeta_bracket(inst.state, target_state(inst.target), inst.m, inst.eps, f,
                                 variant="s", f_target=f)


def axis_interval(target: str) -> tuple[float, float]:
    """Range of a for which a P + (1-a)(I-P)/(d-1) is a stabilizer mixture."""
    P = target_state(target)
    d = P.shape[0]
    Pc = (np.eye(d) - P) / (d - 1)
    f = FreeSetSpec.stabilizer(_family(d))
    out = []
    for sense in ("min", "max"):
        model = Model("axis_interval")
        a = model.scalar()
        S = fs.free_cone_element(model, f)
        model.add_eq(S - a.kron_right(P - Pc), Pc)
        getattr(model, "minimize" if sense == "min" else "maximize")(a)
        out.append(model.solve().value)
    return out[0], out[1]


def stabilizer_overhead_exact(rho, target: str = "T", eps: float = 0.0) -> OverheadResult:
    """Single-copy overhead under resource non-generating maps.

    Twirling makes every optimal branch measure-and-prepare onto the target axis:
    omega -> Tr(E omega) P + (1 - Tr(E omega)) P_c, free iff Tr(E sigma) stays in
    the axis interval for every stabilizer sigma.  With Q = mu E this is a
    two-sided version of the zeta program.
    """
    P = target_state(target)
    rho = qcore.herm(rho)
    if rho.shape != P.shape:
        raise ValueError("state and target dimensions differ")
    a_lo, a_hi = axis_interval(target)
    f = FreeSetSpec.stabilizer(_family(P.shape[0]))
    model = Model("stabilizer_exact")
    Qp, Qm, mup, mum = mono.build_q_program(model, rho, eps)
    for Q, mu in ((Qp, mup), (Qm, mum)):
        fs.encode_sup_overlap_leq(model, Q, mu * a_hi, f)
        fs.encode_inf_overlap_geq(model, Q, mu * a_lo, f)
    return mono._finish(model, Qp, Qm, mup, mum)


def strange_fraction(rho) -> float:
    """LP relaxation of the best stabilizer-protocol overlap with S:
    max Tr(rho W) over 0 <= W <= I with Tr(W sigma) <= F_stab(S) on every vertex."""
    rho = qcore.herm(rho)
    if rho.shape != (3, 3):
        raise ValueError("qutrit input required")
    f = FreeSetSpec.stabilizer("qutrit")
    F = fs.free_fidelity(qcore.strange_state(), f)
    model = Model("strange_fraction")
    W = model.hermitian(3, psd=True)
    model.add_psd(model.const(np.eye(3)) - W)
    fs.encode_sup_overlap_leq(model, W, F, f)
    model.maximize(W.inner(rho))
    return float(np.clip(model.solve().value, 0.0, 1.0))


def strange_overhead(rho, m: int = 1, eps: float = 0.0) -> float:
    """max{2(1-eps)/f - 1, 1} with f from the witness LP (a lower bound on the overhead)."""
    if m != 1:
        raise ValueError("only m = 1 is supported")
    if not 0 <= eps <= 1:
        raise ValueError("eps must lie in [0, 1]")
    if eps >= 1:
        return 1.0
    return mono.overlap_lower_bound(strange_fraction(rho), eps, clamp=True)
