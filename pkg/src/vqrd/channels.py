"""Channel overheads: noisy-memory correction, diamond norms, inverse maps and capacities."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import qcore
from .conic import Model, SolverError

__all__ = [
    "MemoryInstance", "MemoryResult", "RateCapacity", "diamond_norm", "diamond_distance",
    "channel_tensor_power", "memory_overhead_sdp", "inverse_choi", "inverse_overhead",
    "depolarizing_inverse_overhead", "amplitude_damping_inverse_overhead", "binary_entropy",
    "amplitude_damping_capacity", "depolarizing_rate_vs_capacity", "noise_family_channel", "memory_curve_data",
    "damping_rate_data", "NOISE_FAMILIES",
]


def _dims(J, d_in: int | None, d_out: int | None) -> tuple[int, int]:
    n = J.shape[0]
    if d_in is None and d_out is None:
        d = int(round(np.sqrt(n)))
        if d * d != n:
            raise ValueError("pass d_in/d_out for non-square channels")
        return d, d
    if d_in is None:
        d_in = n // d_out
    if d_out is None:
        d_out = n // d_in
    if d_in * d_out != n:
        raise ValueError("Choi dimension does not match d_in * d_out")
    return d_in, d_out


def _encode_diamond_leq(model: Model, D, d_in: int, d_out: int, t):
    """||D||_diamond <= t for a Hermitian-preserving Choi expression D."""
    n = d_in * d_out
    P = model.hermitian(n, psd=True)
    N = model.hermitian(n, psd=True)
    model.add_eq(P - N - D)
    model.add_psd(t.kron_right(np.eye(d_in)) - (P + N).ptrace([d_in, d_out], [0]))


def diamond_norm(J, d_in: int | None = None, d_out: int | None = None) -> float:
    """Diamond norm of a Hermitian-preserving map from its Choi matrix:
    min ||Tr_out(P + N)||_inf over J = P - N with P, N >= 0."""
    J = qcore.herm(J)
    d_in, d_out = _dims(J, d_in, d_out)
    if np.abs(J).max() == 0:
        return 0.0
    model = Model("diamond_norm")
    t = model.scalar()
    _encode_diamond_leq(model, model.const(J), d_in, d_out, t)
    model.minimize(t)
    return float(max(model.solve().value, 0.0))


def diamond_distance(J1, J2, d_in: int | None = None, d_out: int | None = None) -> float:
    J1, J2 = np.asarray(J1, dtype=complex), np.asarray(J2, dtype=complex)
    if J1.shape != J2.shape:
        raise ValueError("Choi matrices differ in shape")
    return 0.5 * diamond_norm(J1 - J2, d_in, d_out)


def channel_tensor_power(J, d_in: int, d_out: int, m: int) -> np.ndarray:
    """Choi of E^{(x) m} with all inputs first, then all outputs."""
    J = np.asarray(J, dtype=complex)
    out, din, dout = J, d_in, d_out
    for _ in range(m - 1):
        T = np.kron(out, J).reshape(din, dout, d_in, d_out, din, dout, d_in, d_out)
        out = T.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(din * d_in * dout * d_out, -1)
        din, dout = din * d_in, dout * d_out
    return out


@dataclass
class MemoryInstance:
    choi: np.ndarray
    d: int = 2
    m: int = 1
    eps: float = 0.0

    def __post_init__(self):
        self.choi = qcore.herm(self.choi)
        if self.choi.shape[0] != self.d * self.d:
            raise ValueError("memory must map C^d to C^d")
        if not (qcore.is_cp(self.choi, 1e-8) and qcore.is_tp(self.choi, self.d, self.d, 1e-8)):
            raise ValueError("memory channel must be CPTP")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not 0 <= self.eps <= 1:
            raise ValueError("eps must lie in [0, 1]")


@dataclass
class MemoryResult:
    value: float
    J_plus: np.ndarray | None
    J_minus: np.ndarray | None
    lambda_plus: float
    lambda_minus: float
    status: str = "optimal"

    def __float__(self):
        return float(self.value)


def memory_overhead_sdp(inst: MemoryInstance) -> MemoryResult:
    """min lambda_+ + lambda_- over CP maps J_pm with Tr_out J_pm = lambda_pm I and
    (1/2)||(J_+ - J_-) after M - id||_diamond <= eps.  Infeasible instances return inf."""
    D = inst.d**inst.m
    if D > 4:
        raise ValueError("memory SDP supports total dimension at most 4")
    JM = channel_tensor_power(inst.choi, inst.d, inst.d, inst.m)
    Jid = qcore.identity_choi(D)
    model = Model("memory_overhead")
    lp = model.scalar(nonneg=True)
    lm = model.scalar(nonneg=True)
    Jp = model.hermitian(D * D, psd=True)
    Jm = model.hermitian(D * D, psd=True)
    for J, lam in ((Jp, lp), (Jm, lm)):
        model.add_eq(J.ptrace([D, D], [0]) - lam.kron_right(np.eye(D)))
    model.add_eq(lp - lm, 1.0)
    diff = (Jp - Jm).apply_linear(lambda X: qcore.compose_choi(JM, X, D, D, D)) - Jid
    if inst.eps == 0:
        model.add_eq(diff)
    else:
        t = model.scalar(nonneg=True)
        _encode_diamond_leq(model, diff, D, D, t)
        model.add_leq(t, 2 * inst.eps)
    model.minimize(lp + lm)
    model.solve(require_optimal=False)
    if model.status in ("infeasible", "unbounded"):
        return MemoryResult(float("inf"), None, None, np.nan, np.nan, "infeasible")
    if model.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"memory_overhead: solver status {model.status}", model.solution)
    return MemoryResult(model.value, model.eval(Jp), model.eval(Jm), model.eval(lp), model.eval(lm), model.status)


def _superop(J, d_in: int, d_out: int) -> np.ndarray:
    """Matrix S with vec(E(X)) = S vec(X) (row-major vec)."""
    T = np.asarray(J, dtype=complex).reshape(d_in, d_out, d_in, d_out)
    # E(|i><j|)_{ab} = T[i, a, j, b]
    return T.transpose(1, 3, 0, 2).reshape(d_out * d_out, d_in * d_in)


def inverse_choi(J, d: int | None = None, cond_max: float = 1e12) -> np.ndarray:
    """Choi matrix of the linear inverse of a channel on d x d matrices."""
    J = qcore.herm(J)
    d, _ = _dims(J, d, d)
    S = _superop(J, d, d)
    if np.linalg.cond(S) > cond_max:
        raise ValueError("channel is not invertible as a linear map")
    Sinv = np.linalg.inv(S)
    return qcore.herm(qcore.choi_from_map(lambda X: (Sinv @ X.reshape(-1)).reshape(d, d), d))


def inverse_overhead(J, d: int | None = None) -> float:
    """||E^-1||_diamond, the zero-error single-use overhead."""
    return diamond_norm(inverse_choi(J, d))


def depolarizing_inverse_overhead(p: float, d: int = 2) -> float:
    if p >= 1:
        return float("inf")
    return (1 + (1 - 2 / d**2) * p) / (1 - p)


def amplitude_damping_inverse_overhead(gamma: float) -> float:
    if gamma >= 1:
        return float("inf")
    return (1 + gamma) / (1 - gamma)


def binary_entropy(x) -> np.ndarray | float:
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - (1 - x) * np.log2(1 - x)
    h = np.nan_to_num(h, nan=0.0)
    return float(h) if h.ndim == 0 else h


def amplitude_damping_capacity(gamma: float, grid: int = 10_000) -> float:
    """max_t h2((1-gamma) t) - h2(gamma t): grid scan then golden-section refinement."""
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    if gamma >= 0.5:
        return 0.0

    def g(t):
        return binary_entropy((1 - gamma) * t) - binary_entropy(gamma * t)

    ts = np.linspace(0.0, 1.0, grid + 1)
    vals = g(ts)
    i = int(np.argmax(vals))
    best = float(vals[i])
    if 0 < i < grid:
        res = minimize_scalar(lambda t: -g(t), bracket=(ts[i - 1], ts[i], ts[i + 1]), method="golden",
                              tol=1e-10)
        if res.success and 0 <= res.x <= 1:
            best = max(best, -float(res.fun))
    return max(best, 0.0)


@dataclass(frozen=True)
class RateCapacity:
    v_lower: float
    q_upper: float


def depolarizing_rate_vs_capacity(p: float) -> RateCapacity:
    """Qubit depolarizing: rate bound 1/C^0^2 against the capacity bound max(1-4p, 0)."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    v = ((1 - p) / (1 + p / 2)) ** 2
    return RateCapacity(v, max(1 - 4 * p, 0.0))


# ---------------------------------------------------------------------------
# figure data

NOISE_FAMILIES = ("depolarizing", "dephasing", "replacement")


def noise_family_channel(family: str, p: float) -> np.ndarray:
    """E_p = p rho + (1-p) noise, with p the surviving signal weight."""
    if family == "depolarizing":
        return qcore.depolarizing(1 - p)
    if family == "dephasing":
        return qcore.dephasing(1 - p)
    if family == "replacement":
        return qcore.replacement(p, qcore.proj(qcore.ket(0, 2)))
    raise ValueError(f"unknown family {family!r}")


def _memory_curve_point(args) -> float:
    family, p, eps = args
    return memory_overhead_sdp(MemoryInstance(noise_family_channel(family, p), 2, 1, eps)).value


def memory_curve_data(eps: float = 0.01, n: int = 101, families=NOISE_FAMILIES, workers: int | None = None) -> list[tuple]:
    """Rows (family, p, overhead) for p on an even grid of [0, 1]."""
    ps = np.linspace(0.0, 1.0, n)
    jobs = [(fam, float(p), eps) for fam in families for p in ps]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        vals = list(ex.map(_memory_curve_point, jobs))
    return [(fam, p, v) for (fam, p, _), v in zip(jobs, vals)]


def damping_rate_data(n: int = 101, method: str = "closed") -> list[tuple]:
    """Rows (gamma, 1/C^0(A_gamma)^2, Q(A_gamma)) on an even grid of [0, 1]."""
    rows = []
    for g in np.linspace(0.0, 1.0, n):
        g = float(g)
        if method == "sdp" and g < 1:
            C = inverse_overhead(qcore.amplitude_damping(g))
        else:
            C = amplitude_damping_inverse_overhead(g)
        rows.append((g, 1.0 / C**2 if np.isfinite(C) else 0.0, amplitude_damping_capacity(g)))
    return rows
