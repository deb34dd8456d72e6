"""Free-set encoders and conic resource measures.

A free set is either the diagonal states in a fixed basis, the PPT states
of a bipartition, or the convex hull of a finite list of pure states
(stabilizer polytopes).  Every encoder adds constraints to a
:class:`vqrd.conic.Model`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import qcore
from .conic import Expr, Model, SolverError

__all__ = [
    "FreeSetSpec", "stabilizer_states", "encode_sup_overlap_leq", "encode_inf_overlap_geq",
    "encode_overlap_eq", "free_cone_element", "max_overlap", "free_fidelity", "generalized_robustness",
    "standard_robustness", "weight", "base_norm",
]


@dataclass(frozen=True)
class FreeSetSpec:
    kind: str  # "diagonal" | "ppt" | "polytope"
    dims: tuple = ()
    vertices: tuple = field(default=(), repr=False)
    description: str = ""

    def __post_init__(self):
        if self.kind not in ("diagonal", "ppt", "polytope"):
            raise ValueError(f"unknown free-set kind {self.kind!r}")
        if self.kind == "polytope":
            if not self.vertices:
                raise ValueError("polytope needs at least one vertex")
            for v in self.vertices:
                if abs(np.trace(v).real - 1) > 1e-9:
                    raise ValueError("polytope vertices must be normalized states")
        if self.kind == "ppt" and len(self.dims) != 2:
            raise ValueError("PPT set needs a bipartition (d_a, d_b)")

    @property
    def dim(self) -> int:
        if self.kind == "polytope":
            return self.vertices[0].shape[0]
        return int(np.prod(self.dims))

    @classmethod
    def diagonal(cls, d: int) -> "FreeSetSpec":
        return cls("diagonal", (d,), description=f"diagonal states, d={d}")

    @classmethod
    def ppt(cls, da: int, db: int) -> "FreeSetSpec":
        return cls("ppt", (da, db), description=f"PPT states on {da}x{db}")

    @classmethod
    def polytope(cls, vertices, description: str = "") -> "FreeSetSpec":
        return cls("polytope", (), tuple(np.asarray(v, dtype=complex) for v in vertices), description)

    @classmethod
    def stabilizer(cls, which: str = "qubit") -> "FreeSetSpec":
        return cls.polytope(stabilizer_states(which), description=f"stabilizer polytope ({which})")

    def contains(self, rho, tol: float = 1e-8) -> bool:
        rho = np.asarray(rho, dtype=complex)
        if self.kind == "diagonal":
            return bool(np.abs(rho - np.diag(np.diag(rho))).max() <= tol)
        if self.kind == "ppt":
            return bool(np.linalg.eigvalsh(qcore.herm(qcore.partial_transpose(rho, self.dims, 1))).min() >= -tol)
        return weight(rho, self) >= 1 - 1e-6


# ---------------------------------------------------------------------------
# stabilizer states by Clifford orbit


def _orbit(start: np.ndarray, gens: list[np.ndarray]) -> list[np.ndarray]:
    def key(p):
        return tuple(np.round(p, 8).view(float).ravel())

    seen = {key(start): start}
    frontier = [start]
    while frontier:
        nxt = []
        for p in frontier:
            for g in gens:
                q = g @ p @ g.conj().T
                k = key(q)
                if k not in seen:
                    seen[k] = q
                    nxt.append(q)
        frontier = nxt
    return list(seen.values())


@lru_cache(maxsize=None)
def _stab(which: str) -> tuple:
    if which == "qubit":
        gens = [qcore.HADAMARD, qcore.S_GATE]
        start = qcore.proj(qcore.ket(0, 2))
    elif which == "two_qubit":
        I = np.eye(2)
        gens = [np.kron(qcore.HADAMARD, I), np.kron(I, qcore.HADAMARD), np.kron(qcore.S_GATE, I),
                np.kron(I, qcore.S_GATE), qcore.CNOT]
        start = qcore.proj(qcore.ket(0, 4))
    elif which == "qutrit":
        w = np.exp(2j * np.pi / 3)
        dft = np.array([[w ** (i * j) for j in range(3)] for i in range(3)]) / np.sqrt(3)
        phase = np.diag([1, 1, w])
        shift = np.roll(np.eye(3), 1, axis=0).astype(complex)
        gens = [dft, phase, shift]
        start = qcore.proj(qcore.ket(0, 3))
    else:
        raise ValueError(f"unknown stabilizer family {which!r}")
    states = _orbit(start.astype(complex), gens)
    return tuple(states)


def stabilizer_states(which: str = "qubit") -> list[np.ndarray]:
    """Pure stabilizer states: 6 for a qubit, 60 for two qubits, 12 for a qutrit."""
    return [s.copy() for s in _stab(which)]


# ---------------------------------------------------------------------------
# encoders


def _check_dim(Q: Expr, f: FreeSetSpec):
    if Q.shape[0] != f.dim:
        raise ValueError(f"operator dimension {Q.shape[0]} does not match free set dimension {f.dim}")


def encode_sup_overlap_leq(model: Model, Q: Expr, c, f: FreeSetSpec) -> None:
    """Constrain max over free states sigma of Tr(Q sigma) to be at most c."""
    _check_dim(Q, f)
    if not isinstance(c, Expr):
        c = model.const(c)
    if f.kind == "diagonal":
        for qi in Q.diag():
            model.add_geq(c - qi)
    elif f.kind == "polytope":
        for v in f.vertices:
            model.add_geq(c - Q.inner(v))
    else:
        # Lagrange dual of the PPT maximization
        n = f.dim
        R = model.hermitian(n, psd=True)
        model.add_psd(c.kron_right(np.eye(n)) - Q - R.ptranspose(f.dims, 1))


def encode_overlap_eq(model: Model, Q: Expr, c, f: FreeSetSpec) -> None:
    """Constrain Tr(Q sigma) = c for every free state sigma."""
    _check_dim(Q, f)
    if not isinstance(c, Expr):
        c = model.const(c)
    if f.kind == "diagonal":
        for qi in Q.diag():
            model.add_eq(qi - c)
    elif f.kind == "polytope":
        for v in f.vertices:
            model.add_eq(Q.inner(v) - c)
    else:
        # PPT states span the full operator space, so Q must be proportional to I
        model.add_eq(Q - c.kron_right(np.eye(f.dim)))


def encode_inf_overlap_geq(model: Model, Q: Expr, c, f: FreeSetSpec) -> None:
    """Constrain min over free states sigma of Tr(Q sigma) to be at least c."""
    if not isinstance(c, Expr):
        c = model.const(c)
    encode_sup_overlap_leq(model, -Q, -c, f)


def free_cone_element(model: Model, f: FreeSetSpec) -> Expr:
    """A variable ranging over the cone generated by the free set."""
    n = f.dim
    if f.kind == "diagonal":
        out = None
        for i in range(n):
            e = np.zeros((n, n))
            e[i, i] = 1
            term = model.scalar(nonneg=True).kron_right(e)
            out = term if out is None else out + term
        return out
    if f.kind == "ppt":
        S = model.hermitian(n, psd=True)
        model.add_psd(S.ptranspose(f.dims, 1))
        return S
    out = None
    for v in f.vertices:
        term = model.scalar(nonneg=True).kron_right(v)
        out = term if out is None else out + term
    return out


# ---------------------------------------------------------------------------
# measures


def max_overlap(Q, f: FreeSetSpec) -> float:
    """max over free states sigma of Tr(Q sigma)."""
    Q = qcore.herm(Q)
    if Q.shape[0] != f.dim:
        raise ValueError("dimension mismatch")
    if f.kind == "diagonal":
        return float(np.diag(Q).real.max())
    if f.kind == "polytope":
        return float(max(np.trace(Q @ v).real for v in f.vertices))
    m = Model("max_overlap")
    c = m.scalar()
    encode_sup_overlap_leq(m, m.const(Q), c, f)
    m.minimize(c)
    return m.solve().value


def free_fidelity(psi, f: FreeSetSpec) -> float:
    """max over free sigma of <psi|sigma|psi>; psi may be a ket or a pure density matrix."""
    psi = np.asarray(psi, dtype=complex)
    P = qcore.proj(psi) if psi.ndim == 1 else psi
    return max_overlap(P, f)


def generalized_robustness(rho, f: FreeSetSpec) -> float:
    """min s such that (rho + s omega)/(1+s) is free for some state omega."""
    rho = qcore.herm(rho)
    m = Model("generalized_robustness")
    S = free_cone_element(m, f)
    W = m.hermitian(rho.shape[0], psd=True)
    m.add_eq(S - W, rho)
    m.minimize(W.trace())
    return max(m.solve().value, 0.0)


def standard_robustness(rho, f: FreeSetSpec) -> float:
    """min s such that (rho + s sigma)/(1+s) is free for some free sigma; inf if none exists."""
    rho = qcore.herm(rho)
    if f.kind == "diagonal" and np.abs(rho - np.diag(np.diag(rho))).max() > 1e-12:
        return float("inf")
    m = Model("standard_robustness")
    S = free_cone_element(m, f)
    N = free_cone_element(m, f)
    m.add_eq(S - N, rho)
    m.minimize(N.trace())
    m.solve(require_optimal=False)
    if m.status in ("infeasible", "unbounded"):
        return float("inf")
    if m.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"standard robustness: solver status {m.status}", m.solution)
    return max(m.value, 0.0)


def weight(rho, f: FreeSetSpec) -> float:
    """Largest w with rho = w sigma + (1-w) tau, sigma free, tau any state."""
    rho = qcore.herm(rho)
    m = Model("weight")
    S = free_cone_element(m, f)
    m.add_psd(m.const(rho) - S)
    m.maximize(S.trace())
    return float(np.clip(m.solve().value, 0.0, 1.0))


def base_norm(x, f: FreeSetSpec) -> float:
    """min mu_+ + mu_- over x = mu_+ sigma_+ - mu_- sigma_- with free sigma_pm."""
    x = qcore.herm(x)
    if f.kind == "diagonal" and np.abs(x - np.diag(np.diag(x))).max() > 1e-12:
        return float("inf")
    m = Model("base_norm")
    P = free_cone_element(m, f)
    N = free_cone_element(m, f)
    m.add_eq(P - N, x)
    m.minimize(P.trace() + N.trace())
    m.solve(require_optimal=False)
    if m.status in ("infeasible", "unbounded"):
        return float("inf")
    if m.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"base norm: solver status {m.status}", m.solution)
    return m.value
