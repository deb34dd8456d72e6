"""Monte Carlo estimators for signed mixtures of free operations.

A decomposition ``eta = l_plus * L_plus(rho) - l_minus * L_minus(rho)`` is
realized by flipping a coin with bias ``l_plus / gamma``, applying the chosen
channel, measuring and multiplying the outcome by ``+gamma`` or ``-gamma``.
Random numbers come from Philox streams split per batch with ``SeedSequence``,
so results do not depend on how batches are scheduled.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import qcore

__all__ = [
    "QuasiDecomposition", "ProbabilisticDecomposition", "EstimatorReport", "DistributionEstimate",
    "estimate_expectation", "sample_complexity", "estimate_distribution", "postselected_estimate",
    "make_rng", "exact_expectation",
]

BATCH = 1 << 16


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class QuasiDecomposition:
    """eta = lambda_plus * Lambda_plus(X) - lambda_minus * Lambda_minus(X).

    Channels are Choi matrices (input factor first).  ``m`` is the number of
    target copies on the output, each of dimension ``dim_out ** (1/m)``.
    """

    lambda_plus: float
    lambda_minus: float
    channel_plus: np.ndarray
    channel_minus: np.ndarray
    dim_in: int
    dim_out: int
    m: int = 1
    tol: float = 1e-9

    def __post_init__(self):
        if self.lambda_plus < -self.tol or self.lambda_minus < -self.tol:
            raise ValueError("coefficients must be nonnegative")
        if abs(self.lambda_plus - self.lambda_minus - 1) > self.tol:
            raise ValueError("lambda_plus - lambda_minus must equal 1")
        for J in (self.channel_plus, self.channel_minus):
            if J.shape != (self.dim_in * self.dim_out,) * 2:
                raise ValueError("Choi matrix does not match dim_in * dim_out")
            if not qcore.is_cp(J, 1e-7) or not qcore.is_tp(J, self.dim_in, self.dim_out, 1e-7):
                raise ValueError("branch channels must be CPTP")
        d1 = round(self.dim_out ** (1 / self.m))
        if d1**self.m != self.dim_out:
            raise ValueError("dim_out is not an m-th power")

    @classmethod
    def from_terms(cls, coeffs, chois, dim_in: int, dim_out: int, m: int = 1) -> "QuasiDecomposition":
        """Group a signed list sum_i c_i L_i into the two-branch form."""
        coeffs = np.asarray(coeffs, dtype=float)
        pos, neg = coeffs[coeffs > 0].sum(), -coeffs[coeffs < 0].sum()
        n = dim_in * dim_out

        if pos == 0:
            raise ValueError("need at least one positive term")

        def mix(mask, total):
            if total == 0:
                return np.asarray(chois[0], dtype=complex)  # unused branch
            return sum(abs(c) / total * np.asarray(J, dtype=complex) for c, J, k in zip(coeffs, chois, mask) if k)

        Jp, Jm = mix(coeffs > 0, pos), mix(coeffs < 0, neg)
        if Jp.shape != (n, n):
            raise ValueError("Choi matrices do not match dim_in * dim_out")
        return cls(float(pos), float(neg), Jp, Jm, dim_in, dim_out, m)

    @property
    def gamma(self) -> float:
        return self.lambda_plus + self.lambda_minus

    @property
    def p_plus(self) -> float:
        return self.lambda_plus / self.gamma

    @property
    def p_minus(self) -> float:
        return self.lambda_minus / self.gamma

    def branch_outputs(self, rho) -> tuple[np.ndarray, np.ndarray]:
        return (qcore.apply_channel(self.channel_plus, rho, self.dim_in),
                qcore.apply_channel(self.channel_minus, rho, self.dim_in))

    def output(self, rho) -> np.ndarray:
        a, b = self.branch_outputs(rho)
        return self.lambda_plus * a - self.lambda_minus * b


@dataclass(frozen=True)
class ProbabilisticDecomposition:
    """eta = l_plus L_plus(X)/Tr L_plus(X) - l_minus L_minus(X)/Tr L_minus(X) with subchannels L_pm."""

    lambda_plus: float
    lambda_minus: float
    channel_plus: np.ndarray
    channel_minus: np.ndarray
    dim_in: int
    dim_out: int
    m: int = 1
    tol: float = 1e-9

    def __post_init__(self):
        if self.lambda_plus < -self.tol or self.lambda_minus < -self.tol:
            raise ValueError("coefficients must be nonnegative")
        if abs(self.lambda_plus - self.lambda_minus - 1) > self.tol:
            raise ValueError("lambda_plus - lambda_minus must equal 1")
        for J in (self.channel_plus, self.channel_minus):
            if not qcore.is_cp(J, 1e-7):
                raise ValueError("subchannels must be CP")
            over = np.linalg.eigvalsh(qcore.partial_trace(J, [self.dim_in, self.dim_out], [0]))
            if over.max() > 1 + 1e-7:
                raise ValueError("subchannels must be trace non-increasing")

    gamma = QuasiDecomposition.gamma
    p_plus = QuasiDecomposition.p_plus
    p_minus = QuasiDecomposition.p_minus

    def success_probabilities(self, rho) -> tuple[float, float]:
        a = qcore.apply_channel(self.channel_plus, rho, self.dim_in)
        b = qcore.apply_channel(self.channel_minus, rho, self.dim_in)
        return float(np.trace(a).real), float(np.trace(b).real)

    def output(self, rho) -> np.ndarray:
        a = qcore.apply_channel(self.channel_plus, rho, self.dim_in)
        b = qcore.apply_channel(self.channel_minus, rho, self.dim_in)
        sp, sm = np.trace(a).real, np.trace(b).real
        out = self.lambda_plus * a / sp
        if self.lambda_minus > 0:
            out = out - self.lambda_minus * b / sm
        return out


@dataclass(frozen=True)
class EstimatorReport:
    estimate: float
    n_samples: int
    empirical_std: float
    seed: int
    samples_consumed: int

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("n_samples must be positive")

    def to_json(self) -> str:
        return json.dumps({"estimate": _sig(self.estimate), "n": self.n_samples, "std": _sig(self.empirical_std),
                           "seed": self.seed, "consumed": self.samples_consumed}, sort_keys=True)


@dataclass(frozen=True)
class DistributionEstimate:
    probabilities: np.ndarray
    counts_plus: np.ndarray
    counts_minus: np.ndarray
    n_plus: int
    n_minus: int


def _sig(x: float) -> float:
    return float(f"{x:.12g}")


# ---------------------------------------------------------------------------
# measurement model


def _check_observable(M) -> np.ndarray:
    M = qcore.herm(M)
    w = np.linalg.eigvalsh(M)
    if w.min() < -0.5 - 1e-9 or w.max() > 0.5 + 1e-9:
        raise ValueError("observable must satisfy -I/2 <= M <= I/2")
    return M


def _outcome_table(state: np.ndarray, M: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Joint Born distribution for measuring M on each of the m output copies.

    Returns (probabilities, values) where values are copy-averaged eigenvalues.
    """
    w, V = np.linalg.eigh(M)
    d = M.shape[0]
    Vm = V
    vals = w
    for _ in range(m - 1):
        Vm = np.kron(Vm, V)
        vals = np.add.outer(vals, w).ravel()
    probs = np.einsum("ji,jk,ki->i", Vm.conj(), state, Vm).real
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if total <= 0:
        raise ValueError("branch output has zero norm")
    if state.shape[0] != d**m:
        raise ValueError("observable dimension does not match a single output copy")
    return probs / total, vals / m


def exact_expectation(d: QuasiDecomposition, rho, M) -> float:
    """lambda_+ <M>_+ - lambda_- <M>_-, averaging M over the m output copies."""
    M = _check_observable(M)
    out = []
    for state in d.branch_outputs(rho):
        p, v = _outcome_table(state, M, d.m)
        out.append(float(p @ v))
    return d.lambda_plus * out[0] - d.lambda_minus * out[1]


def _batches(n: int, seed: int):
    nb = max(1, math.ceil(n / BATCH))
    seqs = np.random.SeedSequence(int(seed)).spawn(nb)
    sizes = [BATCH] * (nb - 1) + [n - BATCH * (nb - 1)]
    return list(zip(sizes, seqs))


def _run(tasks, fn, workers: int | None):
    if workers == 1 or len(tasks) == 1:
        return [fn(*t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda t: fn(*t), tasks))


def _signed_draws(rng, size, p_plus, tables, gamma):
    heads = rng.random(size) < p_plus
    out = np.empty(size)
    for branch, sign in ((heads, 1.0), (~heads, -1.0)):
        k = int(branch.sum())
        if k:
            probs, vals = tables[0 if sign > 0 else 1]
            idx = rng.choice(len(probs), size=k, p=probs)
            out[branch] = sign * gamma * vals[idx]
    return out


def estimate_expectation(d: QuasiDecomposition, rho, M, n: int, seed: int = 0,
                         workers: int | None = None, return_samples: bool = False):
    """Sample average of the signed, gamma-scaled outcomes over n shots."""
    if n <= 0:
        raise ValueError("n must be positive")
    M = _check_observable(M)
    tables = [_outcome_table(s, M, d.m) for s in d.branch_outputs(rho)]

    def batch(size, ss):
        return _signed_draws(make_rng(ss), size, d.p_plus, tables, d.gamma)

    parts = _run(_batches(n, seed), batch, workers)
    x = np.concatenate(parts)
    rep = EstimatorReport(float(x.mean()), n, float(x.std(ddof=1)) if n > 1 else 0.0, int(seed), n)
    return (rep, x) if return_samples else rep


def sample_complexity(gamma: float, beta: float, delta: float, m: int = 1) -> int:
    """Two-sided Hoeffding count for values in [-gamma/2, gamma/2], m values per shot."""
    if not (0 < beta < 1 and 0 < delta < 1):
        raise ValueError("beta and delta must lie in (0, 1)")
    if gamma <= 0 or m < 1:
        raise ValueError("gamma must be positive and m >= 1")
    return math.ceil(gamma**2 / (2 * beta**2 * m) * math.log(2 / delta))


def estimate_distribution(d: QuasiDecomposition, rho, n: int, seed: int = 0) -> DistributionEstimate:
    """Computational-basis distribution of the virtual output from n shots.

    Shots are split deterministically as N_pm = round(p_pm n) and the estimate is
    p'(j) = lambda_+ n_+(j)/N_+ - lambda_- n_-(j)/N_-, which sums to exactly 1.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    a, b = d.branch_outputs(rho)
    n_plus = int(round(d.p_plus * n))
    n_minus = n - n_plus
    rng = make_rng(seed)
    pa = np.clip(np.diag(a).real, 0, None)
    pb = np.clip(np.diag(b).real, 0, None)
    cp = rng.multinomial(n_plus, pa / pa.sum()) if n_plus else np.zeros(len(pa), dtype=int)
    cm = rng.multinomial(n_minus, pb / pb.sum()) if n_minus else np.zeros(len(pb), dtype=int)
    est = d.lambda_plus * (cp / n_plus if n_plus else 0.0)
    if d.lambda_minus > 0:
        if n_minus == 0:
            raise ValueError("too few shots to sample the negative branch")
        est = est - d.lambda_minus * cm / n_minus
    return DistributionEstimate(np.asarray(est, dtype=float), cp, cm, n_plus, n_minus)


def postselected_estimate(d: ProbabilisticDecomposition, rho, M, n: int, seed: int = 0,
                          workers: int | None = None) -> EstimatorReport:
    """Postselected variant: a branch that reports failure restarts from the coin flip.

    ``n`` counts accepted shots; ``samples_consumed`` counts every use of rho.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    M = _check_observable(M)
    succ = d.success_probabilities(rho)
    if min(s for s, lam in zip(succ, (d.lambda_plus, d.lambda_minus)) if lam > 0) <= 0:
        raise ValueError("a branch with positive weight never succeeds")
    a = qcore.apply_channel(d.channel_plus, rho, d.dim_in)
    b = qcore.apply_channel(d.channel_minus, rho, d.dim_in)
    tables = [_outcome_table(a / succ[0], M, d.m),
              _outcome_table(b / succ[1], M, d.m) if succ[1] > 0 else (np.ones(1), np.zeros(1))]

    def batch(size, ss):
        rng = make_rng(ss)
        vals = np.empty(0)
        consumed = 0
        while vals.size < size:
            k = size - vals.size
            heads = rng.random(k) < d.p_plus
            ok = rng.random(k) < np.where(heads, succ[0], succ[1])
            consumed += k
            hk = heads[ok]
            draw = np.empty(hk.size)
            for mask, sign, t in ((hk, 1.0, tables[0]), (~hk, -1.0, tables[1])):
                c = int(mask.sum())
                if c:
                    draw[mask] = sign * d.gamma * t[1][rng.choice(len(t[0]), size=c, p=t[0])]
            vals = np.concatenate([vals, draw])
        return vals, consumed

    parts = _run(_batches(n, seed), batch, workers)
    x = np.concatenate([p[0] for p in parts])
    consumed = sum(p[1] for p in parts)
    return EstimatorReport(float(x.mean()), n, float(x.std(ddof=1)) if n > 1 else 0.0, int(seed), consumed)
