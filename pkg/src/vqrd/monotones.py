"""Generic overhead programs and bounds for convex resource theories.

The zeta program

    min  mu_+ + mu_-
    s.t. 0 <= Q_pm <= mu_pm I,  mu_+ - mu_- = 1,  Tr rho (Q_+ - Q_-) >= 1 - eps,
         Tr(Q_pm sigma) <= mu_pm / k  for all free sigma   (variant "s")
         Tr(Q_pm sigma)  = mu_pm / k  for all free sigma   (variant "g")

brackets the overhead between k = 1/F(target) and k = 1 + R(target).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qcore
from . import freesets as fs
from .conic import Model, SolverError
from .freesets import FreeSetSpec

__all__ = [
    "OverheadResult", "BoundReport", "OperationClass", "DualResult", "build_q_program",
    "zeta_program", "target_free_set", "zeta_bracket", "dual_overhead_value",
    "witness_range", "overlap_lower_bound", "robustness_lower_bound", "weight_lower_bound",
    "check_twirling_condition", "virtual_monotone_bound", "LowerBound",
]


@dataclass
class OverheadResult:
    value: float
    Q_plus: np.ndarray | None = None
    Q_minus: np.ndarray | None = None
    mu_plus: float = np.nan
    mu_minus: float = np.nan
    status: str = "optimal"

    def __float__(self):
        return float(self.value)


@dataclass
class BoundReport:
    lower: float
    upper: float
    methods: dict = field(default_factory=dict)
    certificate: np.ndarray | None = None
    exact: bool = False

    def __post_init__(self):
        if self.lower > self.upper + 1e-6:
            raise ArithmeticError(f"inconsistent bounds: lower {self.lower} > upper {self.upper}")


def build_q_program(model: Model, rho: np.ndarray, eps: float, k: float | None = None,
                    f: FreeSetSpec | None = None, variant: str = "s", trace_equality: bool = False):
    """Shared Q_pm / mu_pm skeleton.  Returns (Qp, Qm, mup, mum) expressions."""
    n = rho.shape[0]
    I = np.eye(n)
    mup = model.scalar(nonneg=True)
    mum = model.scalar(nonneg=True)
    Qp = model.hermitian(n, psd=True)
    Qm = model.hermitian(n, psd=True)
    model.add_psd(mup.kron_right(I) - Qp)
    model.add_psd(mum.kron_right(I) - Qm)
    model.add_eq(mup - mum, 1.0)
    overlap = (Qp - Qm).inner(rho)
    if trace_equality:
        model.add_eq(overlap, 1.0 - eps)
    else:
        model.add_geq(overlap, 1.0 - eps)
    if f is not None:
        enc = fs.encode_sup_overlap_leq if variant == "s" else fs.encode_overlap_eq
        enc(model, Qp, mup / k, f)
        enc(model, Qm, mum / k, f)
    model.minimize(mup + mum)
    return Qp, Qm, mup, mum


def _finish(model: Model, Qp, Qm, mup, mum) -> OverheadResult:
    model.solve(require_optimal=False)
    if model.status in ("infeasible", "unbounded"):
        return OverheadResult(float("inf"), status="infeasible")
    if model.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"{model.name}: solver status {model.status} ({model.solution.message})", model.solution)
    return OverheadResult(model.value, model.eval(Qp), model.eval(Qm), model.eval(mup), model.eval(mum))


def zeta_program(rho, k: float, eps: float, variant: str = "s", f: FreeSetSpec | None = None) -> OverheadResult:
    if k < 1 - 1e-12:
        raise ValueError("k must be at least 1")
    if variant not in ("s", "g"):
        raise ValueError("variant must be 's' or 'g'")
    if not 0 <= eps <= 1:
        raise ValueError("eps must lie in [0, 1]")
    rho = qcore.herm(rho)
    m = Model(f"zeta_{variant}")
    parts = build_q_program(m, rho, eps, k, f, variant)
    return _finish(m, *parts)


def target_free_set(f: FreeSetSpec, target: np.ndarray, m: int = 1) -> FreeSetSpec:
    """Free set of the same theory on the space of ``target``'s m-th tensor power."""
    d = target.shape[0] ** m
    if f.kind == "diagonal":
        return FreeSetSpec.diagonal(d)
    if f.kind == "ppt":
        da = int(round(np.sqrt(target.shape[0])))
        return FreeSetSpec.ppt(da**m, (target.shape[0] // da) ** m)
    family = {2: "qubit", 4: "two_qubit", 3: "qutrit"}.get(d)
    if family is None:
        raise ValueError(f"no stabilizer polytope for dimension {d}")
    return FreeSetSpec.stabilizer(family)


def _target_power(psi, m: int, f: FreeSetSpec) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    P = qcore.proj(psi) if psi.ndim == 1 else psi
    if f.kind == "ppt":
        da = int(round(np.sqrt(P.shape[0])))
        return qcore.tensor_power(P, m, (da, P.shape[0] // da))
    return qcore.tensor_power(P, m)


def _target(psi, m: int, f: FreeSetSpec, f_target: FreeSetSpec | None):
    psi = np.asarray(psi, dtype=complex)
    P1 = qcore.proj(psi) if psi.ndim == 1 else psi
    ft = f_target if f_target is not None else target_free_set(f, P1, m)
    return _target_power(P1, m, ft), ft


def zeta_bracket(rho, psi, m: int, eps: float, f: FreeSetSpec, variant: str = "s",
                     f_target: FreeSetSpec | None = None) -> BoundReport:
    """Lower/upper zeta bounds with k = 1/F(target) and k = 1 + R(target)."""
    P, ft = _target(psi, m, f, f_target)
    F = fs.max_overlap(P, ft)
    R = fs.standard_robustness(P, ft) if variant == "s" else fs.generalized_robustness(P, ft)
    k_lo, k_hi = 1.0 / F, 1.0 + R
    lower = zeta_program(rho, k_lo, eps, variant, f).value
    methods = {"lower": f"zeta_{variant}(k=1/F={k_lo:.12g})"}
    if np.isfinite(R):
        upper = lower if abs(k_hi - k_lo) <= 1e-9 else zeta_program(rho, k_hi, eps, variant, f).value
        methods["upper"] = f"zeta_{variant}(k=1+R={k_hi:.12g})"
    else:
        upper = float("inf")
        methods["upper"] = "skipped (robustness unbounded)"
    return BoundReport(lower, upper, methods, exact=abs(k_hi - k_lo) <= 1e-9)


# ---------------------------------------------------------------------------
# dual form over an operation class


@dataclass(frozen=True)
class OperationClass:
    """Channels from dims_in to dims_out: "mio", "dio" (single system) or "ppt" (bipartite)."""

    kind: str
    dims_in: tuple
    dims_out: tuple

    def __post_init__(self):
        if self.kind not in ("mio", "dio", "ppt", "cptp"):
            raise ValueError(f"no conic encoding for operation class {self.kind!r}")
        if self.kind == "ppt" and (len(self.dims_in) != 2 or len(self.dims_out) != 2):
            raise ValueError("PPT class needs bipartite input and output dims")

    @property
    def d_in(self) -> int:
        return int(np.prod(self.dims_in))

    @property
    def d_out(self) -> int:
        return int(np.prod(self.dims_out))

    def linear_constraints(self) -> list[np.ndarray]:
        """Hermitian L with Tr(L J) = 0 for every Choi J in the class."""
        if self.kind not in ("mio", "dio"):
            return []
        di, do = self.d_in, self.d_out
        n = di * do
        out = []

        def pair(p, q):
            a = np.zeros((n, n), dtype=complex)
            a[p, q] = a[q, p] = 1
            b = np.zeros((n, n), dtype=complex)
            b[p, q], b[q, p] = 1j, -1j
            return [a, b]

        for i in range(di):
            for a_ in range(do):
                for b_ in range(a_ + 1, do):
                    out += pair(i * do + a_, i * do + b_)
        if self.kind == "dio":
            for i in range(di):
                for j in range(i + 1, di):
                    for a_ in range(do):
                        out += pair(i * do + a_, j * do + a_)
        return out

    def constrain_choi(self, model: Model, J) -> None:
        """Membership constraints for a Choi variable (used in tests and primal programs)."""
        model.add_eq(J.ptrace([self.d_in, self.d_out], [0]), np.eye(self.d_in))
        for L in self.linear_constraints():
            model.add_eq(J.inner(L), 0.0)
        if self.kind == "ppt":
            dims = list(self.dims_in) + list(self.dims_out)
            model.add_psd(J.ptranspose(dims, [1, 3]))

    def encode_sup_leq(self, model: Model, X, c) -> None:
        """max over channels J in the class of Tr(X J) <= c (dual certificate)."""
        di, do = self.d_in, self.d_out
        Y = model.hermitian(di)
        model.add_leq(Y.trace(), c)
        S = Y.kron_right(np.eye(do)) - X
        for L in self.linear_constraints():
            S = S + model.scalar().kron_right(L)
        if self.kind == "ppt":
            K = model.hermitian(di * do, psd=True)
            dims = list(self.dims_in) + list(self.dims_out)
            S = S - K.ptranspose(dims, [1, 3])
        model.add_psd(S)


@dataclass
class DualResult:
    value: float
    W: np.ndarray


def dual_overhead_value(rho, eta, op_class: OperationClass) -> DualResult:
    """sup_W 2 Tr(W eta) - 1 subject to 0 <= Tr(W L(rho)) <= 1 for all L in the class."""
    rho = qcore.herm(rho)
    eta = qcore.herm(eta)
    do = op_class.d_out
    m = Model("overhead_dual")
    W = m.hermitian(do)
    X = W.kron_left(rho.T)
    op_class.encode_sup_leq(m, X, 1.0)
    op_class.encode_sup_leq(m, -X, 0.0)
    m.maximize(2 * W.inner(eta) - 1.0)
    m.solve()
    return DualResult(m.value, m.eval(W))


def witness_range(W, rho, op_class: OperationClass) -> tuple[float, float]:
    """(min, max) of Tr(W L(rho)) over channels L in the class."""
    rho = qcore.herm(rho)
    X = np.kron(rho.T, qcore.herm(W))
    vals = []
    for sense in (1, -1):
        m = Model("witness_range")
        J = m.hermitian(op_class.d_in * op_class.d_out, psd=True)
        op_class.constrain_choi(m, J)
        obj = J.inner(X)
        m.minimize(obj) if sense == 1 else m.maximize(obj)
        vals.append(m.solve().value)
    return vals[0], vals[1]


# ---------------------------------------------------------------------------
# closed-form lower bounds


@dataclass
class LowerBound:
    value: float
    overlap_bound: float


def overlap_lower_bound(f_value: float, eps: float, clamp: bool = True) -> float:
    """2(1-eps)/f - 1 for a maximal target overlap f."""
    if not 0 < f_value <= 1 + 1e-12:
        raise ValueError("overlap must lie in (0, 1]")
    v = 2 * (1 - eps) / f_value - 1
    return max(v, 1.0) if clamp else v


def robustness_lower_bound(rho, psi, m: int, eps: float, f: FreeSetSpec, f_target: FreeSetSpec | None = None,
                           clamp: bool = True) -> LowerBound:
    """Uses f <= F(target) (1 + R^g(rho))."""
    P, ft = _target(psi, m, f, f_target)
    F = fs.max_overlap(P, ft)
    fb = min(F * (1 + fs.generalized_robustness(rho, f)), 1.0)
    return LowerBound(overlap_lower_bound(fb, eps, clamp), fb)


def weight_lower_bound(rho, psi, m: int, eps: float, f: FreeSetSpec, f_target: FreeSetSpec | None = None,
                       clamp: bool = True) -> LowerBound:
    """Uses f <= 1 - (1 - F(target)) W(rho)."""
    P, ft = _target(psi, m, f, f_target)
    F = fs.max_overlap(P, ft)
    fb = 1 - (1 - F) * fs.weight(rho, f)
    return LowerBound(overlap_lower_bound(fb, eps, clamp), fb)


def check_twirling_condition(psi, m: int, f: FreeSetSpec, tol: float = 1e-7) -> bool:
    """True when 1/F(target) equals 1 + R^s(target); f is the free set on the target space."""
    P = _target_power(psi, m, f)
    F = fs.max_overlap(P, f)
    R = fs.standard_robustness(P, f)
    return bool(np.isfinite(R) and abs(1 / F - (1 + R)) <= tol)


def virtual_monotone_bound(M_target: float, M_input: float) -> float:
    """C^0 >= M(target)/M(input) for a virtual monotone M."""
    if M_input <= 0:
        raise ValueError("input measure must be positive")
    return M_target / M_input
