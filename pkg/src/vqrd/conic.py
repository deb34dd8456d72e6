"""Dense conic interior-point solver and a small modeling layer on top of it.

Programs are stored in primal standard form

    minimize    c^T x
    subject to  A x = b,  x in K

where K is a product of a free block, a nonnegative orthant and real
positive semidefinite blocks (stored as scaled lower-triangular vectors).
The dual is

    maximize    b^T y
    subject to  c - A^T y = s,  s in K*   (s = 0 on the free block).

The solver runs a Mehrotra predictor-corrector method on the homogeneous
self-dual embedding with Nesterov-Todd scaling.  Hermitian matrix variables
are mapped to real PSD blocks through ``hermitian_embed``.
"""

from __future__ import annotations

import contextlib
import itertools
import os
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla

__all__ = [
    "Cone",
    "ConicProgram",
    "ConicSolution",
    "SolverError",
    "solve",
    "default_tol",
    "hermitian_embed",
    "svec",
    "smat",
    "Model",
    "record_programs",
    "Expr",
    "Constraint",
]

SQRT2 = np.sqrt(2.0)


class SolverError(RuntimeError):
    """Raised when a program that must be solved to optimality is not."""

    def __init__(self, message: str, solution: "ConicSolution | None" = None):
        super().__init__(message)
        self.solution = solution


_RECORDERS: list[list] = []


@contextlib.contextmanager
def record_programs():
    """Collect every program compiled inside the block (for inspection or dumping)."""
    sink: list[ConicProgram] = []
    _RECORDERS.append(sink)
    try:
        yield sink
    finally:
        _RECORDERS.remove(sink)


def default_tol() -> float:
    """Solver tolerance, overridable through the ``VQRD_TOL`` environment variable."""
    raw = os.environ.get("VQRD_TOL")
    if raw:
        try:
            val = float(raw)
        except ValueError:
            raise ValueError(f"VQRD_TOL must be a float, got {raw!r}") from None
        if not (0.0 < val < 1.0):
            raise ValueError(f"VQRD_TOL out of range: {val}")
        return val
    return 1e-8


# ---------------------------------------------------------------------------
# svec / smat and the real embedding of Hermitian matrices


_TRIL_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _tril(n: int):
    hit = _TRIL_CACHE.get(n)
    if hit is None:
        r, c = np.tril_indices(n)
        scale = np.where(r == c, 1.0, SQRT2)
        hit = (r, c, scale)
        _TRIL_CACHE[n] = hit
    return hit


def svec(x: np.ndarray) -> np.ndarray:
    """Scaled lower-triangular vectorization; preserves the trace inner product.

    Works on a single matrix or on a stack with the matrix in the last two axes.
    """
    n = x.shape[-1]
    r, c, scale = _tril(n)
    return x[..., r, c] * scale


def smat(v: np.ndarray, n: int | None = None) -> np.ndarray:
    """Inverse of :func:`svec`."""
    if n is None:
        n = int(round((np.sqrt(8 * v.shape[-1] + 1) - 1) / 2))
    r, c, scale = _tril(n)
    out = np.zeros(v.shape[:-1] + (n, n))
    vals = v / scale
    out[..., r, c] = vals
    out[..., c, r] = vals
    return out


def hermitian_embed(x) -> np.ndarray:
    """Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix.

    Each eigenvalue of ``x`` appears twice in the embedding, so PSD-ness is preserved.
    """
    x = np.asarray(getattr(x, "entries", x), dtype=complex)
    re, im = x.real, x.imag
    return np.block([[re, -im], [im, re]])


def _unembed(xr: np.ndarray) -> np.ndarray:
    """Hermitian matrix represented by a real symmetric 2n x 2n block.

    The map is onto the PSD cone and ``_unembed(hermitian_embed(h)) == h``;
    for any real X, Tr(hermitian_embed(C) X) = 2 Tr(C _unembed(X)).
    """
    n = xr.shape[-1] // 2
    a = xr[..., :n, :n]
    d = xr[..., n:, n:]
    b = xr[..., :n, n:]
    bt = xr[..., n:, :n]
    return (a + d) / 2 + 1j * (bt - b) / 2


# ---------------------------------------------------------------------------
# program and solution containers


@dataclass(frozen=True)
class Cone:
    kind: str  # "free", "nonneg" or "psd"
    size: int  # number of scalars for free/nonneg, matrix order for psd

    def __post_init__(self):
        if self.kind not in ("free", "nonneg", "psd"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("cone size must be positive")

    @property
    def width(self) -> int:
        if self.kind == "psd":
            return self.size * (self.size + 1) // 2
        return self.size


@dataclass
class ConicProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cones: list[Cone]
    name: str = ""

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.A = np.asarray(self.A, dtype=float).reshape(len(self.b), -1)
        self.cones = _canonical_cones(self.cones)
        n = sum(k.width for k in self.cones)
        if self.A.shape[1] != n or self.c.shape[0] != n:
            raise ValueError(
                f"column count mismatch: cones imply {n}, A has {self.A.shape[1]}, c has {self.c.shape[0]}"
            )

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def dump(self) -> str:
        """Plain-text rendering (objective, triplet equalities, cone list)."""
        lines = [f"# program {self.name or '(unnamed)'}", f"n {self.n}", f"m {self.A.shape[0]}"]
        lines.append("cones " + " ".join(f"{k.kind}:{k.size}" for k in self.cones))
        nz = np.flatnonzero(self.c)
        lines.append(f"objective {len(nz)}")
        lines += [f"{j} {self.c[j]:.17g}" for j in nz]
        rows, cols = np.nonzero(self.A)
        lines.append(f"A {len(rows)}")
        lines += [f"{i} {j} {self.A[i, j]:.17g}" for i, j in zip(rows, cols)]
        lines.append(f"b {len(self.b)}")
        lines += [f"{v:.17g}" for v in self.b]
        return "\n".join(lines) + "\n"


def _canonical_cones(cones: Iterable[Cone]) -> list[Cone]:
    cones = list(cones)
    order = {"free": 0, "nonneg": 1, "psd": 2}
    last = -1
    for k in cones:
        if order[k.kind] < last:
            raise ValueError("cones must be ordered free, nonneg, psd")
        last = order[k.kind]
    return cones


@dataclass
class ConicSolution:
    status: str  # optimal | optimal_inaccurate | infeasible | unbounded | max_iter
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    iterations: int
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    history: list[dict] = field(default_factory=list)
    message: str = ""

    @property
    def objective(self) -> float:
        return self.primal_objective


# ---------------------------------------------------------------------------
# cone bookkeeping for the interior-point iterations


class _Layout:
    def __init__(self, cones: Sequence[Cone]):
        self.nfree = sum(k.size for k in cones if k.kind == "free")
        self.nlin = sum(k.size for k in cones if k.kind == "nonneg")
        self.psd = [k.size for k in cones if k.kind == "psd"]
        self.lin = slice(self.nfree, self.nfree + self.nlin)
        self.psd_slices = []
        off = self.nfree + self.nlin
        for n in self.psd:
            w = n * (n + 1) // 2
            self.psd_slices.append(slice(off, off + w))
            off += w
        self.n = off
        self.nk = self.n - self.nfree
        self.degree = self.nlin + sum(self.psd)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.n)
        e[self.lin] = 1.0
        for n, sl in zip(self.psd, self.psd_slices):
            e[sl] = svec(np.eye(n))
        return e

    def inner_k(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u[self.nfree:] @ v[self.nfree:])


def _sqrt_factor(x: np.ndarray) -> np.ndarray:
    """Some L with x = L L^T; Cholesky when possible, eigen-based otherwise."""
    try:
        return np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh((x + x.T) / 2)
        w = np.maximum(w, 1e-300)
        return v * np.sqrt(w)


class _Scaling:
    """Nesterov-Todd scaling point for the current (x, s)."""

    def __init__(self, lay: _Layout, x: np.ndarray, s: np.ndarray):
        self.lay = lay
        xl, sl = x[lay.lin], s[lay.lin]
        self.lin_d = np.sqrt(sl / xl)  # W on the orthant
        self.lin_lam = np.sqrt(xl * sl)
        self.R, self.Rinv, self.lam = [], [], []
        for n, sl_ in zip(lay.psd, lay.psd_slices):
            X = smat(x[sl_], n)
            S = smat(s[sl_], n)
            L1 = _sqrt_factor(X)
            L2 = _sqrt_factor(S)
            U, lam, Vt = np.linalg.svd(L2.T @ L1)
            lam = np.maximum(lam, 1e-300)
            ih = 1.0 / np.sqrt(lam)
            R = (L1 @ Vt.T) * ih
            Rinv = (ih[:, None] * U.T) @ L2.T
            self.R.append(R)
            self.Rinv.append(Rinv)
            self.lam.append(lam)

    # scaled coordinates ---------------------------------------------------
    def w_x(self, dx: np.ndarray) -> list:
        """W dx as a list of blocks (orthant vector, then diagonal-free matrices)."""
        lay = self.lay
        out = [self.lin_d * dx[lay.lin]]
        for n, sl, Ri in zip(lay.psd, lay.psd_slices, self.Rinv):
            out.append(Ri @ smat(dx[sl], n) @ Ri.T)
        return out

    def w_s(self, ds: np.ndarray) -> list:
        """W^{-T} ds."""
        lay = self.lay
        out = [ds[lay.lin] / self.lin_d]
        for n, sl, R in zip(lay.psd, lay.psd_slices, self.R):
            out.append(R.T @ smat(ds[sl], n) @ R)
        return out

    def wt(self, blocks: list) -> np.ndarray:
        """W^T applied to scaled blocks, returned as a full-length vector (zero on free)."""
        lay = self.lay
        v = np.zeros(lay.n)
        v[lay.lin] = self.lin_d * blocks[0]
        for sl, Ri, B in zip(lay.psd_slices, self.Rinv, blocks[1:]):
            v[sl] = svec(Ri.T @ B @ Ri)
        return v

    def hinv_rows(self, A: np.ndarray) -> np.ndarray:
        """(W^T W)^{-1} applied to every row of A restricted to the cone part."""
        lay = self.lay
        out = np.zeros_like(A)
        out[:, lay.lin] = A[:, lay.lin] / self.lin_d**2
        for n, sl, R in zip(lay.psd, lay.psd_slices, self.R):
            G = R @ R.T
            M = smat(A[:, sl], n)
            out[:, sl] = svec(G @ M @ G)
        return out

    def hinv_vec(self, v: np.ndarray) -> np.ndarray:
        return self.hinv_rows(v[None, :])[0]

    # Jordan algebra helpers ----------------------------------------------
    def lam_sq(self) -> list:
        return [self.lin_lam**2] + [np.diag(l**2) for l in self.lam]

    def lam_div(self, blocks: list) -> list:
        """Solve lambda o u = r for u."""
        out = [blocks[0] / self.lin_lam]
        for lam, B in zip(self.lam, blocks[1:]):
            out.append(2.0 * B / (lam[:, None] + lam[None, :]))
        return out

    def max_step(self, blocks: list) -> float:
        """Largest alpha with lambda + alpha * d in the cone (inf if unrestricted)."""
        amax = np.inf
        d0 = blocks[0] / self.lin_lam
        if d0.size and d0.min() < 0:
            amax = min(amax, -1.0 / d0.min())
        for lam, B in zip(self.lam, blocks[1:]):
            ih = 1.0 / np.sqrt(lam)
            M = ih[:, None] * B * ih[None, :]
            w = np.linalg.eigvalsh((M + M.T) / 2)[0]
            if w < 0:
                amax = min(amax, -1.0 / w)
        return amax


def _jordan(a: list, b: list) -> list:
    out = [a[0] * b[0]]
    for A, B in zip(a[1:], b[1:]):
        out.append((A @ B + B @ A) / 2)
    return out


def _axpy_blocks(alpha: float, a: list, b: list) -> list:
    return [alpha * u + v for u, v in zip(a, b)]


def _eye_blocks(lay: _Layout, scale: float) -> list:
    return [np.full(lay.nlin, scale)] + [scale * np.eye(n) for n in lay.psd]


# ---------------------------------------------------------------------------
# preprocessing


def _reduce_rows(A: np.ndarray, b: np.ndarray, tol: float = 1e-12):
    """Drop linearly dependent equality rows with a pivoted QR of A^T.

    Returns (A_red, b_red, kept_rows, consistent).
    """
    m = A.shape[0]
    if m == 0:
        return A, b, np.arange(0), True
    _, R, piv = sla.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return A[:0], b[:0], np.arange(0), bool(np.all(np.abs(b) <= 1e-9))
    rank = int(np.sum(diag > tol * diag[0]))
    kept = np.sort(piv[:rank])
    consistent = True
    if rank < m:
        Ak, bk = A[kept], b[kept]
        coef, *_ = np.linalg.lstsq(Ak.T, A.T, rcond=None)
        resid = b - coef.T @ bk
        consistent = bool(np.all(np.abs(resid) <= 1e-9 * max(1.0, np.abs(b).max())))
    return A[kept], b[kept], kept, consistent


# ---------------------------------------------------------------------------
# the solver


def _checked_lu(K: np.ndarray):
    """LU factors of K; raises LinAlgError on a zero or non-finite pivot."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu = sla.lu_factor(K, check_finite=False)
    piv = np.abs(np.diag(lu[0]))
    if not np.all(np.isfinite(piv)) or piv.min() <= 1e-300:
        raise np.linalg.LinAlgError("singular matrix")
    return lu


class _BorderedFactor:
    """Solves the reduced Newton system

        A_F dxf + M dy + u dtau = r_y
           -A_F^T dy + c_F dtau = r_f
        -c_F^T dxf + v^T dy + w dtau = r_t

    Two factorizations are available: Cholesky of M with a small dense Schur
    complement on (dxf, dtau), and LU of the whole bordered matrix.  Neither is
    uniformly better near a degenerate optimum, so callers may try both.
    """

    def __init__(self, M, Af, cf, u, v, w):
        self.M, self.Af, self.cf, self.u, self.v, self.w = M, Af, cf, u, v, w
        self.nf = Af.shape[1]
        self.m = M.shape[0]
        self._chol = None
        self._lu = None

    def modes(self):
        return ("chol", "lu") if self.nf == 0 else ("lu", "chol")

    def _build_chol(self):
        M, Af, nf, m = self.M, self.Af, self.nf, self.m
        reg = 1e-14 * max(1.0, np.abs(np.diag(M)).max(initial=0.0))
        chol = sla.cho_factor(M + reg * np.eye(m), lower=True, check_finite=False)
        B = np.column_stack([Af, self.u])
        MinvB = sla.cho_solve(chol, B, check_finite=False)
        Crow = np.vstack([-Af.T, self.v[None, :]])
        D = np.zeros((nf + 1, nf + 1))
        D[:nf, -1] = self.cf
        D[-1, :nf] = -self.cf
        D[-1, -1] = self.w
        self._chol = (chol, MinvB, Crow, _checked_lu(D - Crow @ MinvB))

    def _build_lu(self):
        nf, m = self.nf, self.m
        K = np.zeros((nf + m + 1, nf + m + 1))
        K[:nf, nf:nf + m] = -self.Af.T
        K[:nf, -1] = self.cf
        K[nf:nf + m, :nf] = self.Af
        K[nf:nf + m, nf:nf + m] = self.M
        K[nf:nf + m, -1] = self.u
        K[-1, :nf] = -self.cf
        K[-1, nf:nf + m] = self.v
        K[-1, -1] = self.w
        self._lu = _checked_lu(K)

    def available(self, mode: str) -> bool:
        try:
            if mode == "chol" and self._chol is None:
                if self.m == 0:
                    return False
                self._build_chol()
            elif mode == "lu" and self._lu is None:
                self._build_lu()
        except (np.linalg.LinAlgError, ValueError):
            return False
        return True

    def solve(self, mode, r_f, r_y, r_t):
        nf, m = self.nf, self.m
        if mode == "lu":
            sol = sla.lu_solve(self._lu, np.concatenate([r_f, r_y, [r_t]]), check_finite=False)
            return sol[:nf], sol[nf:nf + m], sol[-1]
        chol, MinvB, Crow, schur = self._chol
        z = sla.cho_solve(chol, r_y, check_finite=False)
        ft = sla.lu_solve(schur, np.concatenate([r_f, [r_t]]) - Crow @ z, check_finite=False)
        return ft[:nf], z - MinvB @ ft, ft[-1]

def solve(
    p: ConicProgram,
    gap_tol: float | None = None,
    feas_tol: float | None = None,
    max_iter: int = 200,
    record_history: bool = True,
    stall_iters: int = 8,
    inaccurate_factor: float = 100.0,
) -> ConicSolution:
    """Solve a :class:`ConicProgram` with a homogeneous self-dual interior-point method.

    When progress stalls the best iterate is returned.  Its status is
    ``optimal_inaccurate`` if every residual is within ``inaccurate_factor``
    times its tolerance, otherwise ``max_iter``.
    """
    reduced = _reduce_free_columns(p)
    q, cols = reduced if reduced is not None else (p, None)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        # degenerate late iterates can overflow; non-finite steps are rejected below
        sol = _solve(q, gap_tol, feas_tol, max_iter, record_history, stall_iters, inaccurate_factor)
    if cols is not None:
        # dropped free variables stay at zero
        for name in ("x", "s"):
            full = np.zeros(p.n)
            full[cols] = getattr(sol, name)
            setattr(sol, name, full)
    return sol


def _reduce_free_columns(p: ConicProgram, tol: float = 1e-12):
    """Drop free variables whose columns depend on other free columns.

    Such directions leave A x unchanged, so when their cost is consistent they
    can be fixed at zero; otherwise the program is left untouched.  Returns
    (reduced program, kept column indices) or None.
    """
    nf = sum(k.width for k in p.cones if k.kind == "free")
    if nf == 0 or p.A.shape[0] == 0:
        return None
    Af, cf = p.A[:, :nf], p.c[:nf]
    _, R, piv = sla.qr(Af, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank == nf or rank == 0:
        return None
    keep, drop = np.sort(piv[:rank]), np.sort(piv[rank:])
    coef, *_ = np.linalg.lstsq(Af[:, keep], Af[:, drop], rcond=None)
    if np.abs(cf[drop] - cf[keep] @ coef).max() > 1e-9 * max(1.0, np.abs(cf).max()):
        return None
    cols = np.concatenate([keep, np.arange(nf, p.n)])
    cones = [Cone("free", rank)] + [k for k in p.cones if k.kind != "free"]
    return ConicProgram(p.c[cols], p.A[:, cols], p.b, cones, p.name), cols


def _solve(p, gap_tol, feas_tol, max_iter, record_history, stall_iters, inaccurate_factor) -> ConicSolution:
    tol = default_tol()
    gap_tol = tol if gap_tol is None else gap_tol
    feas_tol = tol if feas_tol is None else feas_tol
    lay = _Layout(p.cones)
    m0 = p.A.shape[0]

    # row scaling then removal of dependent rows
    norms = np.linalg.norm(p.A, axis=1)
    zero_rows = norms == 0
    if np.any(zero_rows & (np.abs(p.b) > 1e-12)):
        return _trivial(p, lay, "infeasible", "zero equality row with nonzero right-hand side")
    norms[zero_rows] = 1.0
    A_s = p.A / norms[:, None]
    b_s = p.b / norms
    A, b, kept, consistent = _reduce_rows(A_s, b_s)
    if not consistent:
        return _trivial(p, lay, "infeasible", "inconsistent equality system")
    c = p.c.copy()
    m, n = A.shape
    nf = lay.nfree
    Af, Ak = A[:, :nf], A[:, nf:]
    cf, ck = c[:nf], c[nf:]

    e = lay.identity()
    x = e.copy()
    s = e.copy()
    y = np.zeros(m)
    tau = kappa = 1.0
    nu = lay.degree
    bnorm = max(1.0, np.linalg.norm(b))
    cnorm = max(1.0, np.linalg.norm(c))
    history: list[dict] = []
    status, message = "max_iter", "iteration limit reached"
    it = 0
    best = (np.inf, None)  # (score, iterate) with score = worst ratio of residual to tolerance
    since_best = 0

    def unscale_y(yv):
        full = np.zeros(m0)
        full[kept] = yv
        return full / norms

    for it in range(max_iter + 1):
        rp = b * tau - A @ x
        rd = c * tau - A.T @ y - s
        rd[:nf] = c[:nf] * tau - A[:, :nf].T @ y  # s is identically zero on the free block
        rg = c @ x + kappa - b @ y
        mu = (lay.inner_k(x, s) + tau * kappa) / (nu + 1)

        xh, yh, sh = x / tau, y / tau, s / tau
        pobj, dobj = c @ xh, b @ yh
        pres = np.linalg.norm(A @ xh - b) / bnorm
        dres_vec = c - A.T @ yh - sh
        dres = np.linalg.norm(dres_vec) / cnorm
        gap = abs(pobj - dobj)
        rel_gap = gap / max(1.0, min(abs(pobj), abs(dobj)))
        if record_history:
            history.append(
                dict(it=it, pobj=pobj, dobj=dobj, xs=lay.inner_k(xh, sh), tau=tau, kappa=kappa,
                     mu=mu, pres=pres, dres=dres)
            )
        if pres <= feas_tol and dres <= feas_tol and rel_gap <= gap_tol:
            status, message = "optimal", "converged"
            break
        score = max(pres / feas_tol, dres / feas_tol, rel_gap / gap_tol)
        if score < 0.9 * best[0]:
            best, since_best = (score, (x, y, s, tau)), 0
        else:
            since_best += 1
            if since_best >= stall_iters and best[0] < 1e4:
                status, message = "max_iter", "no progress"
                break
        by = b @ y
        if by > 0:
            r = np.linalg.norm(A.T @ y + np.concatenate([np.zeros(nf), s[nf:]]))
            if r / by <= feas_tol and tau < 1e-6 * max(1.0, kappa):
                status, message = "infeasible", "primal infeasibility certificate"
                break
        cx = c @ x
        if cx < 0:
            r = np.linalg.norm(A @ x)
            if r / (-cx) <= feas_tol and tau < 1e-6 * max(1.0, kappa):
                status, message = "unbounded", "dual infeasibility certificate"
                break
        if it == max_iter:
            break

        try:
            W = _Scaling(lay, x, s)
            # Hinv applied to A_k^T, c_k (all restricted to the cone columns)
            HA = W.hinv_rows(A)[:, nf:]  # rows: H^{-1} A_i
            Hc = W.hinv_vec(c)[nf:]
            M = Ak @ HA.T
            M = (M + M.T) / 2
            u_col = -(HA @ ck + b)  # coupling of dtau in the equality rows
            v_row = b - HA @ ck  # coupling of dy in the gap row
            w_tt = kappa / tau + ck @ Hc
            fact = _BorderedFactor(M, Af, cf, u_col, v_row, w_tt)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            status, message = "max_iter", f"numerical failure: {exc}"
            break

        def kkt_solve(mode, r1, r2, r3):
            h1 = W.hinv_vec(r1)[nf:]
            dxf, dy, dtau = fact.solve(mode, r1[:nf], r2 - Ak @ h1, r3 + ck @ h1)
            dxk = h1 + HA.T @ dy - Hc * dtau
            return np.concatenate([dxf, dxk]), dy, dtau

        def kkt_apply(dx, dy, dtau):
            o1 = W.wt(W.w_x(dx)) - A.T @ dy + c * dtau
            o1[:nf] = -Af.T @ dy + cf * dtau
            return o1, A @ dx - b * dtau, -c @ dx + b @ dy + (kappa / tau) * dtau

        def newton(eta: float, rc: list, rk: float):
            u = W.lam_div(rc)
            r1 = -eta * rd + W.wt(u)
            r1[:nf] = -eta * rd[:nf]
            r2 = eta * rp
            r3 = eta * rg + rk / tau

            def resid(dx, dy, dtau):
                o1, o2, o3 = kkt_apply(dx, dy, dtau)
                e = (r1 - o1, r2 - o2, r3 - o3)
                return e, max(np.abs(e[0]).max(), np.abs(e[1]).max(initial=0.0), abs(e[2]))

            target = 1e-14 * max(np.abs(r1).max(), np.abs(r2).max(initial=0.0), abs(r3), 1e-300)
            best = None
            for mode in fact.modes():
                if not fact.available(mode):
                    continue
                sol = kkt_solve(mode, r1, r2, r3)
                err, size = resid(*sol)
                # iterative refinement against the unreduced system, kept only while it helps
                for _ in range(3):
                    if size <= target:
                        break
                    corr = kkt_solve(mode, *err)
                    cand = tuple(a_ + b_ for a_, b_ in zip(sol, corr))
                    err2, size2 = resid(*cand)
                    if size2 >= size:
                        break
                    sol, err, size = cand, err2, size2
                if best is None or size < best[1]:
                    best = (sol, size)
                if size <= 1e3 * target:
                    break
            if best is None:
                raise np.linalg.LinAlgError("Newton system could not be factorized")
            dx, dy, dtau = best[0]
            if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy)) and np.isfinite(dtau)):
                raise np.linalg.LinAlgError("non-finite Newton direction")
            wdx = W.w_x(dx)
            # from the linearized dual residual; more accurate than W^T(u - W dx) near the optimum
            ds = eta * rd - A.T @ dy + c * dtau
            ds[:nf] = 0.0
            ds_scaled = W.w_s(ds)
            dkappa = (rk - kappa * dtau) / tau
            return dx, dy, dtau, ds, dkappa, wdx, ds_scaled

        def step_len(wdx, wds, dtau, dkappa):
            a = min(W.max_step(wdx), W.max_step(wds))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        lam2 = W.lam_sq()
        # predictor
        rc_a = [-v for v in lam2]
        try:
            dx_a, dy_a, dt_a, ds_a, dk_a, wdx_a, wds_a = newton(1.0, rc_a, -tau * kappa)
        except np.linalg.LinAlgError as exc:
            status, message = "max_iter", f"numerical failure: {exc}"
            break
        alpha_a = min(1.0, step_len(wdx_a, wds_a, dt_a, dk_a))
        sigma = (1.0 - alpha_a) ** 3
        # corrector
        corr = _jordan(wdx_a, wds_a)
        rc = [sigma * mu * I - l2 - cr for I, l2, cr in zip(_eye_blocks(lay, 1.0), lam2, corr)]
        rk = sigma * mu - tau * kappa - dt_a * dk_a
        try:
            dx, dy, dt, ds, dk, wdx, wds = newton(1.0 - sigma, rc, rk)
        except np.linalg.LinAlgError as exc:
            status, message = "max_iter", f"numerical failure: {exc}"
            break
        alpha = min(1.0, 0.99 * step_len(wdx, wds, dt, dk))
        if not np.isfinite(alpha) or alpha <= 1e-14:
            status, message = "max_iter", "step length collapsed"
            break
        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        s[:nf] = 0.0
        tau = tau + alpha * dt
        kappa = kappa + alpha * dk

    if status == "max_iter" and best[1] is not None:
        # fall back to the best iterate seen; honest about reduced accuracy
        x, y, s, tau = best[1]
        if best[0] <= inaccurate_factor:
            status, message = "optimal_inaccurate", f"{message}; best iterate within {best[0]:.1f}x tolerance"
    if status in ("optimal", "optimal_inaccurate", "max_iter"):
        xo, yo, so = x / tau, y / tau, s / tau
    else:
        xo, yo, so = x, y, s
    pobj, dobj = float(c @ xo), float(b @ yo)
    return ConicSolution(
        status=status,
        x=xo,
        y=unscale_y(yo),
        s=so,
        primal_objective=pobj,
        dual_objective=dobj,
        gap=abs(pobj - dobj),
        iterations=it,
        primal_residual=float(np.linalg.norm(p.A @ xo - p.b) / max(1.0, np.linalg.norm(p.b))),
        dual_residual=float(np.linalg.norm(p.c - p.A.T @ unscale_y(yo) - so) / max(1.0, np.linalg.norm(p.c))),
        history=history,
        message=message,
    )


def _trivial(p: ConicProgram, lay: _Layout, status: str, message: str) -> ConicSolution:
    n = p.n
    return ConicSolution(
        status=status, x=np.full(n, np.nan), y=np.full(p.A.shape[0], np.nan), s=np.full(n, np.nan),
        primal_objective=np.nan, dual_objective=np.nan, gap=np.nan, iterations=0, message=message,
    )


# ---------------------------------------------------------------------------
# modeling layer


class _Var:
    __slots__ = ("id", "kind", "n", "width", "basis")

    def __init__(self, vid: int, kind: str, n: int):
        self.id = vid
        self.kind = kind  # scalar_free | scalar_nonneg | herm | psd
        self.n = n
        if kind in ("scalar_free", "scalar_nonneg"):
            self.width = 1
            self.basis = np.ones((1, 1, 1), dtype=complex)
        elif kind == "herm":
            self.width = n * n
            self.basis = _herm_basis(n)
        elif kind == "psd":
            self.width = (2 * n) * (2 * n + 1) // 2
            self.basis = _psd_basis(n)
        else:
            raise ValueError(kind)

    @property
    def cone(self) -> str:
        return {"scalar_free": "free", "herm": "free", "scalar_nonneg": "nonneg", "psd": "psd"}[self.kind]


_BASIS_CACHE: dict[tuple[str, int], np.ndarray] = {}


def _herm_basis(n: int) -> np.ndarray:
    key = ("herm", n)
    if key not in _BASIS_CACHE:
        out = []
        for i in range(n):
            m = np.zeros((n, n), dtype=complex)
            m[i, i] = 1
            out.append(m)
        for i, j in itertools.combinations(range(n), 2):
            m = np.zeros((n, n), dtype=complex)
            m[i, j] = m[j, i] = 1
            out.append(m)
            m = np.zeros((n, n), dtype=complex)
            m[i, j], m[j, i] = 1j, -1j
            out.append(m)
        _BASIS_CACHE[key] = np.array(out)
    return _BASIS_CACHE[key]


def _psd_basis(n: int) -> np.ndarray:
    key = ("psd", n)
    if key not in _BASIS_CACHE:
        w = (2 * n) * (2 * n + 1) // 2
        _BASIS_CACHE[key] = _unembed(smat(np.eye(w), 2 * n))
    return _BASIS_CACHE[key]


def _herm_rows(mat: np.ndarray) -> np.ndarray:
    """Real coordinates (diag, Re upper, Im upper) of Hermitian matrices in the last two axes."""
    n = mat.shape[-1]
    iu, ju = np.triu_indices(n, 1)
    d = np.arange(n)
    return np.concatenate(
        [mat[..., d, d].real, mat[..., iu, ju].real, mat[..., iu, ju].imag], axis=-1
    )


def _herm_from_rows(v: np.ndarray, n: int) -> np.ndarray:
    """Hermitian Z with  v . rows(E) = Tr(Z E)  for Hermitian E."""
    iu, ju = np.triu_indices(n, 1)
    k = len(iu)
    z = np.zeros((n, n), dtype=complex)
    z[np.arange(n), np.arange(n)] = v[:n]
    z[iu, ju] = (v[n:n + k] + 1j * v[n + k:]) / 2
    z[ju, iu] = np.conj(z[iu, ju])
    return z


class Expr:
    """Affine matrix-valued expression  sum_v coef_v . x_v + const.

    ``terms`` maps variable ids to arrays of shape (width_v, rows, cols) holding the
    image of each coordinate of variable v.  Scalars are 1x1 expressions.
    """

    __array_priority__ = 100

    def __init__(self, model: "Model", terms: dict, const: np.ndarray):
        self.model = model
        self.terms = terms
        self.const = np.asarray(const, dtype=complex)

    @property
    def shape(self):
        return self.const.shape

    @property
    def is_scalar(self) -> bool:
        return self.const.shape == (1, 1)

    # arithmetic -----------------------------------------------------------
    def _lift(self, other) -> "Expr":
        if isinstance(other, Expr):
            return other
        arr = np.asarray(getattr(other, "entries", other), dtype=complex)
        if arr.ndim == 0:
            if self.is_scalar:
                arr = arr.reshape(1, 1)
            else:
                raise ValueError("cannot add a bare number to a matrix expression; use number * I")
        return Expr(self.model, {}, arr)

    def __add__(self, other):
        o = self._lift(other)
        if o.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {o.shape}")
        terms = dict(self.terms)
        for k, v in o.terms.items():
            terms[k] = terms[k] + v if k in terms else v
        return Expr(self.model, terms, self.const + o.const)

    __radd__ = __add__

    def __neg__(self):
        return Expr(self.model, {k: -v for k, v in self.terms.items()}, -self.const)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, a):
        if isinstance(a, Expr):
            if a.is_scalar and not a.terms:
                a = a.const[0, 0]
            elif self.is_scalar and not self.terms:
                return a * self.const[0, 0]
            else:
                raise TypeError("product of two variable expressions is not affine")
        a = complex(a) if np.iscomplexobj(a) else float(a)
        return Expr(self.model, {k: a * v for k, v in self.terms.items()}, a * self.const)

    __rmul__ = __mul__

    def __truediv__(self, a):
        return self * (1.0 / a)

    def map(self, fn) -> "Expr":
        """Apply a linear map acting on the last two axes (must accept stacks)."""
        return Expr(self.model, {k: fn(v) for k, v in self.terms.items()}, fn(self.const))

    def apply_linear(self, fn) -> "Expr":
        """Like :meth:`map` for functions that only accept a single matrix."""

        def g(t):
            if t.ndim == 2:
                return np.asarray(fn(t), dtype=complex)
            return np.stack([np.asarray(fn(ti), dtype=complex) for ti in t])

        return self.map(g)

    def lmul(self, m) -> "Expr":
        m = np.asarray(m, dtype=complex)
        return self.map(lambda t: m @ t)

    def rmul(self, m) -> "Expr":
        m = np.asarray(m, dtype=complex)
        return self.map(lambda t: t @ m)

    def conj_by(self, k) -> "Expr":
        """K . E . K^dagger."""
        k = np.asarray(k, dtype=complex)
        kd = k.conj().T
        return self.map(lambda t: k @ t @ kd)

    def kron_left(self, c) -> "Expr":
        """C (x) E."""
        c = np.asarray(c, dtype=complex)

        def f(t):
            r = np.einsum("ab,...ij->...aibj", c, t)
            return r.reshape(t.shape[:-2] + (c.shape[0] * t.shape[-2], c.shape[1] * t.shape[-1]))

        return self.map(f)

    def kron_right(self, c) -> "Expr":
        """E (x) C."""
        c = np.asarray(c, dtype=complex)

        def f(t):
            r = np.einsum("...ij,ab->...iajb", t, c)
            return r.reshape(t.shape[:-2] + (t.shape[-2] * c.shape[0], t.shape[-1] * c.shape[1]))

        return self.map(f)

    def ptrace(self, dims: Sequence[int], keep: Sequence[int]) -> "Expr":
        from .qcore import partial_trace

        return self.map(lambda t: partial_trace(t, dims, keep))

    def ptranspose(self, dims: Sequence[int], sys: Sequence[int] | int) -> "Expr":
        from .qcore import partial_transpose

        return self.map(lambda t: partial_transpose(t, dims, sys))

    def block(self, rows: slice, cols: slice) -> "Expr":
        return self.map(lambda t: t[..., rows, cols])

    def diag(self) -> list["Expr"]:
        n = self.shape[0]
        return [self.entry(i, i) for i in range(n)]

    def entry(self, i: int, j: int) -> "Expr":
        return self.map(lambda t: t[..., i:i + 1, j:j + 1])

    def trace(self) -> "Expr":
        return self.map(lambda t: np.trace(t, axis1=-2, axis2=-1)[..., None, None])

    def inner(self, c) -> "Expr":
        """Tr(C E) as a scalar expression (real part for Hermitian C, E)."""
        c = np.asarray(getattr(c, "entries", c), dtype=complex)
        return self.map(lambda t: np.einsum("ji,...ij->...", c, t)[..., None, None])

    @property
    def H(self) -> "Expr":
        return self.map(lambda t: np.conj(np.swapaxes(t, -1, -2)))


@dataclass
class Constraint:
    kind: str  # "eq", "geq", "psd"
    rows: slice
    slack: _Var | None
    n: int
    hermitian: bool = True


class Model:
    """Collects variables and constraints, compiles to a :class:`ConicProgram`."""

    def __init__(self, name: str = ""):
        self.name = name
        self._vars: list[_Var] = []
        self._rows: list[tuple[dict, np.ndarray]] = []  # (var id -> (r, width) block, rhs)
        self._nrows = 0
        self.constraints: list[Constraint] = []
        self._objective: Expr | None = None
        self._sense = 1.0
        self.solution: ConicSolution | None = None
        self._offsets: dict[int, int] | None = None
        self.program: ConicProgram | None = None

    # variables --------------------------------------------------------------
    def _new(self, kind: str, n: int) -> Expr:
        v = _Var(len(self._vars), kind, n)
        self._vars.append(v)
        shape = (1, 1) if kind.startswith("scalar") else (n, n)
        return Expr(self, {v.id: v.basis}, np.zeros(shape, dtype=complex))

    def scalar(self, nonneg: bool = False) -> Expr:
        return self._new("scalar_nonneg" if nonneg else "scalar_free", 1)

    def hermitian(self, n: int, psd: bool = False) -> Expr:
        return self._new("psd" if psd else "herm", n)

    def const(self, value) -> Expr:
        arr = np.asarray(getattr(value, "entries", value), dtype=complex)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        return Expr(self, {}, arr)

    # constraints ------------------------------------------------------------
    def _push_rows(self, expr: Expr, hermitian: bool) -> slice:
        if hermitian:
            extract = _herm_rows
        else:
            def extract(t):
                return np.concatenate([t.real.reshape(t.shape[:-2] + (-1,)), t.imag.reshape(t.shape[:-2] + (-1,))], axis=-1)
        blocks = {k: extract(v).T for k, v in expr.terms.items()}
        rhs = -extract(expr.const)
        start = self._nrows
        self._rows.append((blocks, rhs))
        self._nrows += rhs.shape[0]
        return slice(start, self._nrows)

    def add_eq(self, lhs: Expr, rhs=0.0, hermitian: bool = True) -> Constraint:
        expr = lhs - rhs if not (isinstance(rhs, (int, float)) and rhs == 0) else lhs
        if expr.is_scalar:
            # scalar equalities keep only the real part
            sl = self._push_rows(expr.map(lambda t: t.real.astype(complex)), hermitian=True)
        else:
            sl = self._push_rows(expr, hermitian)
        con = Constraint("eq", sl, None, expr.shape[0], hermitian)
        self.constraints.append(con)
        return con

    def add_geq(self, lhs: Expr, rhs=0.0) -> Constraint:
        """Scalar constraint lhs >= rhs (real part)."""
        expr = lhs - rhs
        if not expr.is_scalar:
            raise ValueError("add_geq expects a scalar expression; use add_psd for matrices")
        t = self.scalar(nonneg=True)
        slack_var = self._vars[-1]
        sl = self._push_rows((expr - t).map(lambda a: a.real.astype(complex)), hermitian=True)
        con = Constraint("geq", sl, slack_var, 1)
        self.constraints.append(con)
        return con

    def add_leq(self, lhs, rhs=0.0) -> Constraint:
        if not isinstance(lhs, Expr):
            lhs = self.const(lhs)
        return self.add_geq(-(lhs - rhs))

    def add_psd(self, expr: Expr) -> Constraint:
        """Hermitian matrix constraint expr >= 0 (PSD)."""
        n = expr.shape[0]
        S = self.hermitian(n, psd=True)
        slack_var = self._vars[-1]
        sl = self._push_rows(expr - S, hermitian=True)
        con = Constraint("psd", sl, slack_var, n)
        self.constraints.append(con)
        return con

    # objective and solve ----------------------------------------------------
    def minimize(self, expr: Expr):
        self._objective, self._sense = expr, 1.0

    def maximize(self, expr: Expr):
        self._objective, self._sense = expr, -1.0

    def compile(self) -> ConicProgram:
        order = {"free": 0, "nonneg": 1, "psd": 2}
        vars_sorted = sorted(self._vars, key=lambda v: (order[v.cone], v.id))
        offsets, off = {}, 0
        cones: list[Cone] = []
        for v in vars_sorted:
            offsets[v.id] = off
            off += v.width
            if v.cone == "psd":
                cones.append(Cone("psd", 2 * v.n))
            elif cones and cones[-1].kind == v.cone:
                cones[-1] = Cone(v.cone, cones[-1].size + 1 if v.width == 1 else cones[-1].size + v.width)
            else:
                cones.append(Cone(v.cone, v.width))
        n = off
        A = np.zeros((self._nrows, n))
        b = np.zeros(self._nrows)
        r0 = 0
        for blocks, rhs in self._rows:
            r = rhs.shape[0]
            for vid, blk in blocks.items():
                o = offsets[vid]
                A[r0:r0 + r, o:o + blk.shape[1]] += blk
            b[r0:r0 + r] = rhs
            r0 += r
        c = np.zeros(n)
        if self._objective is not None:
            if not self._objective.is_scalar:
                raise ValueError("objective must be scalar")
            for vid, t in self._objective.terms.items():
                o = offsets[vid]
                c[o:o + t.shape[0]] += self._sense * t[:, 0, 0].real
        self._offsets = offsets
        self.program = ConicProgram(c, A, b, cones, name=self.name)
        for sink in _RECORDERS:
            sink.append(self.program)
        return self.program

    def solve(self, require_optimal: bool = True, accept_inaccurate: bool = True, **opts) -> "Model":
        """Compile and solve.  With ``require_optimal`` a non-optimal status raises
        :class:`SolverError`; ``optimal_inaccurate`` counts as optimal unless
        ``accept_inaccurate`` is false."""
        prog = self.compile()
        sol = solve(prog, **opts)
        self.solution = sol
        ok = ("optimal", "optimal_inaccurate") if accept_inaccurate else ("optimal",)
        if require_optimal and sol.status not in ok:
            raise SolverError(f"{self.name or 'program'}: solver status {sol.status} ({sol.message})", sol)
        return self

    @property
    def status(self) -> str:
        return self.solution.status if self.solution else "unsolved"

    @property
    def value(self) -> float:
        """Optimal objective in the user's sense (max problems return the max)."""
        sol = self.solution
        const = 0.0
        if self._objective is not None:
            const = float(self._objective.const[0, 0].real)
        return self._sense * sol.primal_objective + const

    @property
    def dual_value(self) -> float:
        const = float(self._objective.const[0, 0].real) if self._objective is not None else 0.0
        return self._sense * self.solution.dual_objective + const

    def _var_slice(self, v: _Var) -> slice:
        o = self._offsets[v.id]
        return slice(o, o + v.width)

    def eval(self, expr: Expr) -> np.ndarray | float:
        x = self.solution.x
        out = expr.const.copy()
        for vid, t in expr.terms.items():
            v = self._vars[vid]
            out = out + np.tensordot(x[self._var_slice(v)], t, axes=1)
        if expr.is_scalar:
            return float(out[0, 0].real)
        return out

    def dual(self, con: Constraint) -> np.ndarray | float:
        """Multiplier of a constraint (PSD Hermitian matrix, nonnegative scalar, or free)."""
        sol = self.solution
        if con.kind == "geq":
            return float(sol.s[self._var_slice(con.slack)][0])
        if con.kind == "psd":
            blk = smat(sol.s[self._var_slice(con.slack)], 2 * con.n)
            return 2.0 * _unembed(blk)
        yv = sol.y[con.rows] * self._sense
        if con.n == 1 and con.hermitian:
            return float(yv[0])
        if con.hermitian:
            return _herm_from_rows(yv, con.n)
        k = con.n * con.n
        return (yv[:k] + 1j * yv[k:]).reshape(con.n, con.n)

    def dump(self) -> str:
        if self.program is None:
            self.compile()
        return self.program.dump()
