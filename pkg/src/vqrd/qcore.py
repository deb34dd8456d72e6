"""Dense linear algebra and constructors for states, channels and combs.

Operators are plain complex numpy arrays throughout; the small typed
wrappers below validate invariants at API boundaries and handle file IO.

Choi convention: J = sum_ij |i><j| (x) E(|i><j|), input factor first,
unnormalized (Tr J = d_in for a channel).
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

__all__ = [
    "HermitianOperator", "DensityMatrix", "ChoiOperator", "CombChoi", "SchmidtVector",
    "kron", "partial_trace", "partial_transpose", "trace_norm", "fidelity", "herm",
    "link_product", "link", "apply_channel", "choi_from_kraus", "choi_from_map",
    "choi_from_unitary", "identity_choi", "tensor_power", "compose_choi", "is_cp", "is_tp", "schmidt",
    "ket", "proj", "bell", "max_entangled", "plus", "t_ket", "t_state", "t_bar_state",
    "strange_state", "isotropic_state", "dephased_t_state", "depolarizing", "dephasing",
    "amplitude_damping", "replacement", "PAULI", "CNOT", "HADAMARD", "S_GATE", "T_GATE",
    "standard_objects", "random_state", "random_pure", "random_unitary", "random_channel",
    "load_operator", "dump_operator",
]

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_GATE = np.diag([1, 1j]).astype(complex)
T_GATE = np.diag([1, np.exp(1j * np.pi / 4)])
# control on the first factor
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def _a(x) -> np.ndarray:
    """Underlying array of a typed operator or array-like."""
    if isinstance(x, (HermitianOperator,)):
        return x.entries
    if isinstance(x, DensityMatrix):
        return x.op.entries
    if isinstance(x, (ChoiOperator, CombChoi)):
        return x.mat
    return np.asarray(x, dtype=complex)


def herm(x) -> np.ndarray:
    x = _a(x)
    return (x + x.conj().T) / 2


# ---------------------------------------------------------------------------
# typed wrappers


@dataclass(frozen=True)
class HermitianOperator:
    entries: np.ndarray
    herm_tol: float = 1e-10

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {e.shape}")
        dev = np.abs(e - e.conj().T).max() if e.size else 0.0
        if dev > self.herm_tol:
            raise ValueError(f"matrix is not Hermitian (deviation {dev:.3g})")
        object.__setattr__(self, "entries", e)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(herm(self.entries))


@dataclass(frozen=True)
class DensityMatrix:
    op: HermitianOperator
    trace_tol: float = 1e-9
    psd_tol: float = 1e-9

    def __post_init__(self):
        op = self.op if isinstance(self.op, HermitianOperator) else HermitianOperator(self.op)
        object.__setattr__(self, "op", op)
        tr = np.trace(op.entries).real
        if abs(tr - 1) > self.trace_tol:
            raise ValueError(f"trace {tr} differs from 1")
        lo = op.eigvalsh().min()
        if lo < -self.psd_tol:
            raise ValueError(f"negative eigenvalue {lo:.3g}")

    @property
    def entries(self) -> np.ndarray:
        return self.op.entries

    @property
    def dim(self) -> int:
        return self.op.dim


@dataclass(frozen=True)
class ChoiOperator:
    dim_in: int
    dim_out: int
    mat: np.ndarray
    normalization: str = "unnormalized"

    def __post_init__(self):
        m = HermitianOperator(np.asarray(self.mat, dtype=complex), herm_tol=1e-9).entries
        if m.shape[0] != self.dim_in * self.dim_out:
            raise ValueError("Choi dimension does not equal dim_in * dim_out")
        object.__setattr__(self, "mat", m)

    def is_cp(self, tol: float = 1e-9) -> bool:
        return is_cp(self.mat, tol)

    def is_tp(self, tol: float = 1e-9) -> bool:
        return is_tp(self.mat, self.dim_in, self.dim_out, tol)

    def __call__(self, rho):
        return apply_channel(self, rho)


@dataclass(frozen=True)
class CombChoi:
    """Multi-step process; wires are (dim_in, dim_out) per step, factors ordered in1,out1,in2,..."""

    wires: tuple
    mat: np.ndarray

    def __post_init__(self):
        w = tuple((int(a), int(b)) for a, b in self.wires)
        object.__setattr__(self, "wires", w)
        m = np.asarray(self.mat, dtype=complex)
        if m.shape[0] != self.dims_product:
            raise ValueError("comb matrix dimension does not match wire signature")
        object.__setattr__(self, "mat", m)

    @property
    def steps(self) -> int:
        return len(self.wires)

    @property
    def dims(self) -> list[int]:
        return [d for w in self.wires for d in w]

    @property
    def dims_product(self) -> int:
        return int(np.prod(self.dims))

    def causality_residual(self) -> float:
        """Largest violation of the recursive trace conditions."""
        dims = self.dims
        cur = self.mat
        worst = 0.0
        for step in range(self.steps - 1, -1, -1):
            nfac = 2 * step + 2
            d_in = dims[2 * step]
            reduced = partial_trace(cur, dims[:nfac], list(range(nfac - 1)))
            if step == 0:
                prev = np.ones((1, 1))
            else:
                prev = partial_trace(reduced, dims[:nfac - 1], list(range(nfac - 2))) / d_in
            expect = np.kron(prev, np.eye(d_in))
            worst = max(worst, np.abs(reduced - expect).max())
            cur = prev
        return float(worst)

    def is_causal(self, tol: float = 1e-8) -> bool:
        return self.causality_residual() <= tol

    def is_cp(self, tol: float = 1e-9) -> bool:
        return is_cp(self.mat, tol)


@dataclass(frozen=True)
class SchmidtVector:
    coeffs: np.ndarray
    norm_tol: float = 1e-9

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if np.any(c < -self.norm_tol) or np.any(np.diff(c) > self.norm_tol):
            raise ValueError("Schmidt coefficients must be nonnegative and nonincreasing")
        if abs(np.sum(c**2) - 1) > self.norm_tol:
            raise ValueError("Schmidt coefficients must have unit 2-norm")
        object.__setattr__(self, "coeffs", np.clip(c, 0, None))


# ---------------------------------------------------------------------------
# core operations


def kron(*ops) -> np.ndarray:
    return reduce(np.kron, [_a(o) for o in ops])


def _check_dims(x: np.ndarray, dims: Sequence[int]):
    n = int(np.prod(dims))
    if x.shape[-1] != n or x.shape[-2] != n:
        raise ValueError(f"dims {list(dims)} do not match operator of size {x.shape[-1]}")


def partial_trace(x, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced operator on the factors in ``keep`` (order preserved). Accepts stacks."""
    x = _a(x)
    dims = list(dims)
    _check_dims(x, dims)
    keep = sorted(set(keep))
    k = len(dims)
    lead = x.shape[:-2]
    t = x.reshape(lead + tuple(dims) + tuple(dims))
    letters = string.ascii_letters
    rows = list(letters[:k])
    cols = [letters[k + i] if i in keep else rows[i] for i in range(k)]
    out = [rows[i] for i in keep] + [cols[i] for i in keep]
    sub = "..." + "".join(rows) + "".join(cols) + "->..." + "".join(out)
    r = np.einsum(sub, t)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return r.reshape(lead + (dk, dk))


def partial_transpose(x, dims: Sequence[int], sys: Sequence[int] | int = 1) -> np.ndarray:
    """Transpose on the listed factors (default: the second of a bipartition)."""
    x = _a(x)
    dims = list(dims)
    _check_dims(x, dims)
    sys = [sys] if isinstance(sys, (int, np.integer)) else list(sys)
    k = len(dims)
    lead = x.shape[:-2]
    nl = len(lead)
    t = x.reshape(lead + tuple(dims) + tuple(dims))
    perm = list(range(nl + 2 * k))
    for s in sys:
        perm[nl + s], perm[nl + k + s] = perm[nl + k + s], perm[nl + s]
    return t.transpose(perm).reshape(x.shape)


def trace_norm(x) -> float:
    return float(np.abs(np.linalg.eigvalsh(herm(x))).sum())


def _psd_sqrt(x: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(herm(x))
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def fidelity(rho, sigma) -> float:
    """Squared Uhlmann fidelity (equals <psi|sigma|psi> for pure rho)."""
    rho, sigma = _a(rho), _a(sigma)
    if rho.shape != sigma.shape:
        raise ValueError("dimension mismatch")
    s = _psd_sqrt(rho)
    val = np.linalg.eigvalsh(herm(s @ sigma @ s))
    return float(np.clip(np.sqrt(np.clip(val, 0, None)).sum() ** 2, 0.0, 1.0))


def link(a, a_dims: Sequence[int], a_labels: Sequence, b, b_dims: Sequence[int], b_labels: Sequence):
    """Link product of two operators with labelled tensor factors.

    Factors carrying the same label are contracted.  Returns (matrix, dims, labels)
    with the unshared factors of ``a`` first, then those of ``b``.
    """
    a, b = _a(a), _a(b)
    a_dims, b_dims = list(a_dims), list(b_dims)
    a_labels, b_labels = list(a_labels), list(b_labels)
    _check_dims(a, a_dims)
    _check_dims(b, b_dims)
    if len(set(a_labels)) != len(a_labels) or len(set(b_labels)) != len(b_labels):
        raise ValueError("duplicate wire labels")
    shared = [l for l in a_labels if l in b_labels]
    for l in shared:
        if a_dims[a_labels.index(l)] != b_dims[b_labels.index(l)]:
            raise ValueError(f"wire {l!r} has mismatched dimensions")
    pool = iter(string.ascii_letters)
    row = {}
    col = {}
    for l in a_labels + [l for l in b_labels if l not in a_labels]:
        row[l] = next(pool)
        col[l] = next(pool)
    # shared factors are contracted: a[alpha v, alpha' u] b[v beta, u beta']
    ta = a.reshape(tuple(a_dims) * 2)
    tb = b.reshape(tuple(b_dims) * 2)
    sa = "".join(row[l] for l in a_labels) + "".join(col[l] for l in a_labels)
    sb = "".join(row[l] for l in b_labels) + "".join(col[l] for l in b_labels)
    out_labels = [l for l in a_labels if l not in shared] + [l for l in b_labels if l not in shared]
    so = "".join(row[l] for l in out_labels) + "".join(col[l] for l in out_labels)
    r = np.einsum(f"{sa},{sb}->{so}", ta, tb, optimize=True)
    dims_out = [a_dims[a_labels.index(l)] if l in a_labels else b_dims[b_labels.index(l)] for l in out_labels]
    n = int(np.prod(dims_out)) if dims_out else 1
    return r.reshape(n, n), dims_out, out_labels


def link_product(a, b, shared: int | None = None):
    """Link product of Choi operators / combs joined output-to-input.

    For two channels (ChoiOperator) the result is the Choi operator of b after a.
    For arrays pass ``shared`` is ignored; use :func:`link` for arbitrary wiring.
    """
    if isinstance(a, ChoiOperator) and isinstance(b, ChoiOperator):
        if a.dim_out != b.dim_in:
            raise ValueError("wire mismatch: output of first channel must match input of second")
        m, _, _ = link(a.mat, [a.dim_in, a.dim_out], ["i", "k"], b.mat, [b.dim_in, b.dim_out], ["k", "o"])
        return ChoiOperator(a.dim_in, b.dim_out, m)
    if isinstance(a, CombChoi) and isinstance(b, ChoiOperator):
        # append a channel after the last output wire
        dims = a.dims
        la = [f"w{i}" for i in range(len(dims))]
        if b.dim_in != dims[-1]:
            raise ValueError("wire mismatch")
        m, d, _ = link(a.mat, dims, la, b.mat, [b.dim_in, b.dim_out], [la[-1], "new"])
        wires = list(a.wires[:-1]) + [(a.wires[-1][0], b.dim_out)]
        return CombChoi(tuple(wires), m)
    raise TypeError("link_product expects two ChoiOperators or a CombChoi followed by a ChoiOperator")


def compose_choi(j1, j2, d_in: int, d_mid: int, d_out: int) -> np.ndarray:
    """Choi of E2 after E1 from raw matrices."""
    m, _, _ = link(j1, [d_in, d_mid], ["i", "k"], j2, [d_mid, d_out], ["k", "o"])
    return m


def apply_channel(e, rho, dim_in: int | None = None) -> np.ndarray:
    """E(rho) = Tr_in[(rho^T (x) I) J]."""
    if isinstance(e, ChoiOperator):
        J, din = e.mat, e.dim_in
    else:
        J = _a(e)
        din = dim_in if dim_in is not None else _a(rho).shape[-1]
    rho = _a(rho)
    if rho.shape[-1] != din or J.shape[0] % din:
        raise ValueError("input dimension mismatch")
    dout = J.shape[0] // din
    Jt = J.reshape(din, dout, din, dout)
    return np.einsum("ij,iajb->ab", rho, Jt)


def choi_from_map(fn, d_in: int) -> np.ndarray:
    blocks = []
    for i in range(d_in):
        row = []
        for j in range(d_in):
            e = np.zeros((d_in, d_in), dtype=complex)
            e[i, j] = 1
            row.append(np.asarray(fn(e), dtype=complex))
        blocks.append(row)
    return np.block(blocks)


def choi_from_kraus(kraus: Sequence[np.ndarray]) -> np.ndarray:
    # vec in row-major with input first: |K>> = sum_i |i> (x) K|i>
    J = 0
    for K in kraus:
        K = np.asarray(K, dtype=complex)
        v = K.T.reshape(-1)
        J = J + np.outer(v, v.conj())
    return J


def choi_from_unitary(U) -> np.ndarray:
    return choi_from_kraus([np.asarray(U, dtype=complex)])


def identity_choi(d: int) -> np.ndarray:
    return choi_from_unitary(np.eye(d))


def is_cp(J, tol: float = 1e-9) -> bool:
    return bool(np.linalg.eigvalsh(herm(J)).min() >= -tol)


def is_tp(J, d_in: int, d_out: int, tol: float = 1e-9) -> bool:
    return bool(np.abs(partial_trace(_a(J), [d_in, d_out], [0]) - np.eye(d_in)).max() <= tol)


def tensor_power(x, m: int, dims: Sequence[int] | None = None) -> np.ndarray:
    """m-fold tensor power; with a bipartition ``dims`` the A factors are grouped first."""
    x = _a(x)
    if x.ndim == 1:
        x = proj(x)
    out = reduce(np.kron, [x] * m)
    if dims is None or m == 1:
        return out
    da, db = dims
    t = out.reshape([da, db] * m * 2)
    order = [2 * i for i in range(m)] + [2 * i + 1 for i in range(m)]
    perm = order + [2 * m + o for o in order]
    return t.transpose(perm).reshape(out.shape)


def schmidt(psi, dims: Sequence[int] | None = None, tol: float = 1e-9) -> SchmidtVector:
    """Schmidt coefficients of a pure bipartite state (ket or rank-one density matrix)."""
    psi = np.asarray(_a(psi), dtype=complex)
    if psi.ndim == 2:
        w, v = np.linalg.eigh(herm(psi))
        if abs(w[-1] - 1) > tol or abs(np.trace(psi).real - 1) > tol:
            raise ValueError("input is not a pure state")
        psi = v[:, -1]
    n = psi.shape[0]
    if dims is None:
        da = int(round(np.sqrt(n)))
        dims = (da, n // da)
    if dims[0] * dims[1] != n:
        raise ValueError("dimension mismatch")
    psi = psi / np.linalg.norm(psi)
    s = np.linalg.svd(psi.reshape(dims), compute_uv=False)
    return SchmidtVector(np.sort(s)[::-1])


# ---------------------------------------------------------------------------
# reference states


def ket(idx, d: int = 2) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[idx] = 1
    return v


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    return np.outer(v, v.conj())


def max_entangled(d: int) -> np.ndarray:
    """Projector onto sum_i |ii>/sqrt(d)."""
    v = np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
    return proj(v)


def bell(k: int = 1) -> np.ndarray:
    """k Bell pairs with all A qubits first, i.e. the maximally entangled state of dimension 2^k."""
    return max_entangled(2**k)


def plus(m: int = 1) -> np.ndarray:
    return proj(np.ones(2**m) / np.sqrt(2**m))


def t_ket() -> np.ndarray:
    return np.array([1, np.exp(1j * np.pi / 4)]) / np.sqrt(2)


def t_state() -> np.ndarray:
    return proj(t_ket())


def t_bar_state() -> np.ndarray:
    return np.eye(2) - t_state()


def strange_state() -> np.ndarray:
    return proj(np.array([0, 1, -1]) / np.sqrt(2))


def isotropic_state(alpha: float, k: int = 1) -> np.ndarray:
    """(1-alpha) Phi + alpha (I - Phi)/(D^2 - 1) with D = 2^k."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    D = 2**k
    phi = max_entangled(D)
    return (1 - alpha) * phi + alpha * (np.eye(D * D) - phi) / (D * D - 1)


def dephased_t_state(p: float) -> np.ndarray:
    """p T + (1-p) I/2, for p in [-1, 1] (p = 1 is the pure T state)."""
    if not -1 <= p <= 1:
        raise ValueError("p must lie in [-1, 1]")
    return p * t_state() + (1 - p) * np.eye(2) / 2


# ---------------------------------------------------------------------------
# reference channels (Choi matrices)


def depolarizing(p: float, d: int = 2) -> np.ndarray:
    """rho -> (1-p) rho + p Tr(rho) I/d."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return (1 - p) * identity_choi(d) + p * np.eye(d * d) / d


def dephasing(p: float) -> np.ndarray:
    """rho -> (1-p) rho + p Z rho Z."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return (1 - p) * identity_choi(2) + p * choi_from_unitary(Z)


def amplitude_damping(gamma: float) -> np.ndarray:
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    return choi_from_kraus([k0, k1])


def replacement(p: float, sigma) -> np.ndarray:
    """rho -> p rho + (1-p) Tr(rho) sigma (p is the surviving signal fraction)."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    sigma = _a(sigma)
    d = sigma.shape[0]
    return p * identity_choi(d) + (1 - p) * np.kron(np.eye(d), sigma)


def standard_objects() -> dict:
    """Catalog of named constructors."""
    return {
        "bell": bell, "plus": plus, "t": t_state, "t_bar": t_bar_state, "strange": strange_state,
        "isotropic": isotropic_state, "dephased_t": dephased_t_state, "depolarizing": depolarizing,
        "dephasing": dephasing, "amplitude_damping": amplitude_damping, "replacement": replacement,
        "pauli": PAULI, "cnot": CNOT, "s_gate": S_GATE, "t_gate": T_GATE, "hadamard": HADAMARD,
    }


# ---------------------------------------------------------------------------
# random objects for tests and experiments


def random_state(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_channel(d_in: int, d_out: int, rng: np.random.Generator, nkraus: int = 3) -> np.ndarray:
    """Random CPTP Choi via a Stiefel isometry."""
    g = rng.normal(size=(d_out * nkraus, d_in)) + 1j * rng.normal(size=(d_out * nkraus, d_in))
    q, _ = np.linalg.qr(g)
    kraus = [q[i * d_out:(i + 1) * d_out] for i in range(nkraus)]
    return choi_from_kraus(kraus)


# ---------------------------------------------------------------------------
# JSON operator files


def load_operator(path_or_obj):
    """Read {"dim","re","im"} (+ "dim_in","dim_out" or "wires") into a typed object."""
    if isinstance(path_or_obj, dict):
        obj = path_or_obj
    else:
        with open(path_or_obj) as fh:
            obj = json.load(fh)
    mat = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj.get("im", np.zeros_like(obj["re"])), dtype=float)
    if mat.shape != (obj["dim"], obj["dim"]):
        raise ValueError("entries do not match the declared dim")
    if "wires" in obj:
        return CombChoi(tuple(tuple(w) for w in obj["wires"]), mat)
    if "dim_in" in obj:
        return ChoiOperator(int(obj["dim_in"]), int(obj["dim_out"]), mat)
    return HermitianOperator(mat, herm_tol=1e-9)


def dump_operator(x) -> dict:
    mat = _a(x)
    obj = {"dim": int(mat.shape[0]), "re": mat.real.tolist(), "im": mat.imag.tolist()}
    if isinstance(x, ChoiOperator):
        obj.update(dim_in=x.dim_in, dim_out=x.dim_out)
    if isinstance(x, CombChoi):
        obj["wires"] = [list(w) for w in x.wires]
    return obj
