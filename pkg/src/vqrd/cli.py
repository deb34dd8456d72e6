"""Command-line front end: overheads, figure data and sampling experiments.

Exit codes: 0 success, 2 solver failure, 3 invalid input.  Errors are written to
stderr as one JSON object; data goes to stdout (or ``--output``).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import click
import numpy as np

from . import channels as ch
from . import coherence as coh
from . import combs as cb
from . import entanglement as ent
from . import magic as mg
from . import qcore
from . import sampler as sp
from .conic import SolverError, record_programs

EXIT_SOLVER = 2
EXIT_INPUT = 3


class InputError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def _json_value(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else fmt(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _round(x):
    if isinstance(x, (float, np.floating)) and math.isfinite(float(x)):
        return float(f"{float(x):.12g}")
    return _json_value(x)


@dataclass
class RunConfig:
    command: str
    theory: str | None = None
    preset: str | None = None
    input_path: str | None = None
    m: int = 1
    eps: float = 0.0
    method: str = "sdp"
    tol: float | None = None
    seed: int = 0
    output: str | None = None
    fmt: str = "csv"
    extra: dict = field(default_factory=dict)


def parse_preset(text: str) -> tuple[str, dict]:
    """'name:key=value,key=value' -> (name, {key: float or str})."""
    name, _, rest = text.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            k, eq, v = item.partition("=")
            if not eq or not k:
                raise InputError(f"malformed preset parameter {item!r}")
            try:
                params[k.strip()] = float(v)
            except ValueError:
                params[k.strip()] = v.strip()
    return name.strip(), params


def _need(params: dict, key: str, default=None) -> float:
    if key in params:
        return params[key]
    if default is None:
        raise InputError(f"preset needs parameter {key!r}")
    return default


def _qubit_beta(beta: float) -> np.ndarray:
    if not 0 <= beta <= 0.5:
        raise InputError("beta must lie in [0, 1/2]")
    return np.array([[0.5, beta], [beta, 0.5]], dtype=complex)


# ---------------------------------------------------------------------------
# overhead dispatch; each returns a dict row


def _coherence(name, params, rho, m, eps, method):
    if rho is None:
        if name == "qubit":
            rho = _qubit_beta(_need(params, "beta"))
        elif name == "plus":
            rho = qcore.plus(int(_need(params, "m", 1)))
        elif name == "random":
            rng = sp.make_rng(int(_need(params, "seed", 0)))
            rho = qcore.random_state(int(_need(params, "d", 2)), rng)
        else:
            raise InputError(f"unknown coherence preset {name!r}")
    out = {}
    if method in ("sdp", "both"):
        out["sdp"] = coh.mio_dio_overhead(rho, m, eps).value
    if method in ("closed", "both"):
        if rho.shape != (2, 2):
            raise InputError("closed form exists only for a single qubit")
        out["closed"] = coh.single_qubit_overhead(rho, m, eps)
    return out


def _entanglement(name, params, rho, m, eps, method):
    closed = None
    if rho is None:
        if name == "isotropic":
            alpha, k = _need(params, "alpha"), int(_need(params, "k", 1))
            rho = qcore.isotropic_state(alpha, k)
            closed = ent.isotropic_overhead(alpha, k, m, eps)
        elif name == "bell":
            rho = qcore.bell(int(_need(params, "k", 1)))
        elif name == "separable":
            rho = np.diag([0.5, 0, 0, 0.5]).astype(complex)
            closed = ent.ppt_state_overhead(m, eps)
        elif name == "pure":
            rng = sp.make_rng(int(_need(params, "seed", 0)))
            psi = qcore.random_pure(4, rng)
            rho = qcore.proj(psi)
            closed = ent.pure_state_overhead(qcore.schmidt(psi), m, eps)
        else:
            raise InputError(f"unknown entanglement preset {name!r}")
    out = {}
    if method in ("sdp", "both"):
        if eps == 0:
            out["sdp"] = ent.ppt_overhead_exact(rho, m).value
        else:
            out["sdp"] = ent.overhead_via_fraction(rho, m, eps)
    if method in ("closed", "both"):
        if closed is None:
            raise InputError("no closed form for this entanglement instance")
        out["closed"] = closed
    return out


def _magic(name, params, rho, m, eps, method):
    target, closed = "T", None
    if rho is None:
        if name == "dephasedT":
            p = _need(params, "p")
            rho = qcore.dephased_t_state(p)
            closed = mg.dephased_t_overhead(p, eps) if eps <= 0.5 else None
        elif name == "T":
            rho = qcore.t_state()
            closed = mg.dephased_t_overhead(1.0, eps) if eps <= 0.5 else None
        elif name == "stabilizer":
            rho = qcore.proj(qcore.ket(0, 2))
        elif name == "strange":
            rho, target = qcore.strange_state(), "S"
        elif name == "strange_vertex":
            rho, target = qcore.proj(qcore.ket(0, 3)), "S"
        else:
            raise InputError(f"unknown magic preset {name!r}")
    elif rho.shape[0] == 3:
        target = "S"
    out = {}
    if method in ("sdp", "both"):
        if m != 1:
            rep = mg.stabilizer_overhead_lp(mg.MagicInstance(qcore.tensor_power(rho, m), target, m, eps))
            out["sdp"] = rep.lower
        else:
            out["sdp"] = mg.stabilizer_overhead_exact(rho, target, eps).value
            rep = mg.stabilizer_overhead_lp(mg.MagicInstance(rho, target, 1, eps))
        out["lp_lower"], out["lp_upper"] = rep.lower, rep.upper
    if method in ("closed", "both"):
        if target == "S":
            closed = mg.strange_overhead(rho, m, eps)
        if closed is None:
            raise InputError("no closed form for this magic instance")
        out["closed"] = closed
    return out


def _channel_preset(name, params):
    if name == "depolarizing":
        p = _need(params, "p")
        return qcore.depolarizing(p), (ch.depolarizing_inverse_overhead(p) if p < 1 else math.inf)
    if name == "dephasing":
        p = _need(params, "p")
        return qcore.dephasing(p), (1 / (1 - 2 * p) if p < 0.5 else math.inf)
    if name == "amplitude_damping":
        g = _need(params, "gamma")
        return qcore.amplitude_damping(g), ch.amplitude_damping_inverse_overhead(g)
    if name == "identity":
        return qcore.identity_choi(2), 1.0
    if name == "replacement":
        return qcore.replacement(_need(params, "p"), qcore.proj(qcore.ket(0, 2))), None
    raise InputError(f"unknown channel preset {name!r}")


def _memory(name, params, J, m, eps, method):
    closed = None
    if J is None:
        J, closed = _channel_preset(name, params)
    out = {}
    if method in ("sdp", "both"):
        out["sdp"] = ch.memory_overhead_sdp(ch.MemoryInstance(J, 2, m, eps)).value
    if method in ("closed", "both"):
        if closed is None or eps != 0 or m != 1:
            raise InputError("closed form exists only at eps=0, m=1 for the listed channels")
        out["closed"] = closed
    return out


def _inverse(name, params, J, m, eps, method):
    closed = None
    if J is None:
        J, closed = _channel_preset(name, params)
    out = {}
    if method in ("sdp", "both"):
        out["sdp"] = ch.inverse_overhead(J)
    if method in ("closed", "both"):
        if closed is None:
            raise InputError("no closed form for this channel")
        out["closed"] = closed
    return out


def _comb(name, params, obj, m, eps, method):
    if name != "comb":
        raise InputError("comb preset is 'comb:L=..,p=..'")
    L, p = int(_need(params, "L")), _need(params, "p")
    inst = cb.DephasedCombInstance(L, p)
    chk = cb.verify_decomposition(inst, cb.virtual_comb_decomposition(L, p))
    out = {"residual": chk.max_residual}
    if method in ("sdp", "both"):
        out["sdp"] = chk.sum_abs
    if method in ("closed", "both"):
        out["closed"] = (1 - 2 * p) ** -L
    return out


_THEORIES = {
    "coherence": _coherence,
    "entanglement": _entanglement,
    "magic": _magic,
    "memory": _memory,
    "inverse": _inverse,
    "comb": _comb,
}


def run_overhead(cfg: RunConfig) -> list[dict]:
    if cfg.m < 1:
        raise InputError("m must be at least 1")
    if not 0 <= cfg.eps <= 1:
        raise InputError("eps must lie in [0, 1]")
    if (cfg.preset is None) == (cfg.input_path is None):
        raise InputError("pass exactly one of --preset or --input")
    name, params = parse_preset(cfg.preset) if cfg.preset else ("input", {})
    obj = None
    if cfg.input_path:
        obj = qcore.herm(qcore.load_operator(cfg.input_path))
    res = _THEORIES[cfg.theory](name, params, obj, cfg.m, cfg.eps, cfg.method)
    row = {"theory": cfg.theory, "preset": cfg.preset or cfg.input_path, "m": cfg.m, "eps": cfg.eps,
           "method": cfg.method}
    if cfg.method == "both":
        row["value"] = res["sdp"]
        row["closed"] = res["closed"]
        row["gap"] = abs(res["sdp"] - res["closed"]) if math.isfinite(res["sdp"]) else math.nan
    else:
        row["value"] = res[cfg.method]
    for k, v in res.items():
        if k not in ("sdp", "closed"):
            row[k] = v
    return [row]


# ---------------------------------------------------------------------------
# output helpers


def render(rows: list[dict], form: str) -> str:
    if form == "json":
        return json.dumps([{k: _round(v) for k, v in r.items()} for r in rows], sort_keys=False) + "\n"
    buf = io.StringIO()
    header = list(rows[0].keys()) if rows else []
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(r.get(h, "")) for h in header])
    return buf.getvalue()


def emit(text: str, output: str | None):
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def fail(kind: str, message: str, code: int):
    click.echo(json.dumps({"error": kind, "message": message, "exit_code": code}), err=True)
    sys.exit(code)


def _apply_tol(tol):
    if tol is not None:
        if not 0 < tol < 1:
            raise InputError("tol must lie in (0, 1)")
        os.environ["VQRD_TOL"] = repr(float(tol))


# ---------------------------------------------------------------------------
# figure and sample commands


def figure_rows(name: str, eps: float, n: int) -> list[dict]:
    if name == "fig2":
        return [{"family": f, "noise_param": p, "overhead": v} for f, p, v in ch.memory_curve_data(eps, n)]
    if name == "fig3":
        return [{"gamma": g, "v_lower": v, "capacity": q} for g, v, q in ch.damping_rate_data(n)]
    if name == "comb":
        rows = []
        for L in (1, 2, 3):
            for p in (0.05, 0.1, 0.2):
                inst = cb.DephasedCombInstance(L, p)
                c = cb.verify_decomposition(inst, cb.virtual_comb_decomposition(L, p))
                rows.append({"L": L, "p": p, "sum_abs": c.sum_abs, "bound": (1 - 2 * p) ** -L,
                             "residual": c.max_residual})
        return rows
    raise InputError(f"unknown figure {name!r}")


def sample_setup(preset: str, eps: float = 0.0):
    """(decomposition, input state, observable, exact target value) for a sampling preset."""
    name, params = parse_preset(preset)
    if name == "coherence":
        rho = _qubit_beta(_need(params, "beta", 0.25))
        d = coh.one_qubit_decomposition(rho, eps)
        M = qcore.PAULI["X"] / 2
        return d, rho, M, float(np.trace(M @ coh.coherence_target_output(1, 1 - eps)).real)
    if name == "comb":
        L, p = int(_need(params, "L", 1)), _need(params, "p", 0.1)
        d = cb.comb_quasi_decomposition(L, p)
        rho = qcore.plus(L)
        M = np.kron(np.eye(2**L), qcore.PAULI["X"]) / 2
        target = qcore.apply_channel(cb.comb_as_channel(cb.target_comb(L)), rho)
        return d, rho, M, float(np.trace(M @ target).real)
    if name == "dephasing":
        p = _need(params, "p", 0.1)
        if not 0 <= p < 0.5:
            raise InputError("p must lie in [0, 1/2)")
        J = qcore.dephasing(p)
        Jz = qcore.compose_choi(J, qcore.choi_from_unitary(qcore.PAULI["Z"]), 2, 2, 2)
        d = sp.QuasiDecomposition((1 - p) / (1 - 2 * p), p / (1 - 2 * p), J, Jz, 2, 2)
        rho = qcore.plus(1)
        M = qcore.PAULI["X"] / 2
        return d, rho, M, 0.5
    raise InputError(f"unknown sampling preset {name!r}")


# ---------------------------------------------------------------------------
# click wiring


@click.group()
def cli():
    """Virtual resource distillation toolkit."""


@cli.command("overhead")
@click.option("--theory", type=click.Choice(sorted(_THEORIES)), required=True)
@click.option("--preset", default=None, help="name:key=value,... (see README)")
@click.option("--input", "input_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--m", "m", default=1, type=int)
@click.option("--eps", default=0.0, type=float)
@click.option("--method", default="sdp", type=click.Choice(["sdp", "closed", "both"]))
@click.option("--tol", default=None, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--output", default=None, type=click.Path(dir_okay=False))
@click.option("--format", "form", default="csv", type=click.Choice(["csv", "json"]))
@click.option("--dump-program", default=None, type=click.Path(dir_okay=False),
              help="write every conic program solved to this file")
def overhead_cmd(theory, preset, input_path, m, eps, method, tol, seed, output, form, dump_program):
    """Overhead of distilling the theory's target from a preset or input object."""
    _apply_tol(tol)
    cfg = RunConfig("overhead", theory, preset, input_path, m, eps, method, tol, seed, output, form)
    with record_programs() as progs:
        rows = run_overhead(cfg)
    if dump_program:
        with open(dump_program, "w") as fh:
            fh.write("".join(pr.dump() for pr in progs))
    emit(render(rows, form), output)


@cli.command("figure")
@click.argument("name", type=click.Choice(["fig2", "fig3", "comb"]))
@click.option("--eps", default=0.01, type=float)
@click.option("--n", "n", default=101, type=int)
@click.option("--tol", default=None, type=float)
@click.option("--output", default=None, type=click.Path(dir_okay=False))
@click.option("--format", "form", default="csv", type=click.Choice(["csv", "json"]))
def figure_cmd(name, eps, n, tol, output, form):
    """Emit figure data as CSV (or JSON)."""
    _apply_tol(tol)
    if n < 2:
        raise InputError("need at least two grid points")
    emit(render(figure_rows(name, eps, n), form), output)


@cli.command("sample")
@click.option("--preset", required=True, help="coherence:beta=..., comb:L=..,p=..., dephasing:p=...")
@click.option("--eps", default=0.0, type=float)
@click.option("--n", "n", default=None, type=int, help="shots; default from the Hoeffding count")
@click.option("--beta", default=0.05, type=float, help="accuracy for the default shot count")
@click.option("--delta", default=0.05, type=float, help="failure probability for the default shot count")
@click.option("--seed", default=0, type=int)
@click.option("--workers", default=None, type=int)
@click.option("--output", default=None, type=click.Path(dir_okay=False))
def sample_cmd(preset, eps, n, beta, delta, seed, workers, output):
    """Run the signed Monte Carlo estimator and write its JSON report."""
    d, rho, M, _ = sample_setup(preset, eps)
    if n is None:
        n = sp.sample_complexity(d.gamma, beta, delta, d.m)
    rep = sp.estimate_expectation(d, rho, M, n, seed=seed, workers=workers)
    emit(rep.to_json() + "\n", output)


def main(argv=None) -> int:
    saved_tol = os.environ.get("VQRD_TOL")
    try:
        return _run(argv)
    finally:
        # --tol is process-wide while a command runs; undo it for in-process callers
        if saved_tol is None:
            os.environ.pop("VQRD_TOL", None)
        else:
            os.environ["VQRD_TOL"] = saved_tol


def _run(argv) -> int:
    try:
        cli.main(args=argv, prog_name="vqrd", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.Abort:
        fail("aborted", "aborted", EXIT_INPUT)
    except click.UsageError as e:
        fail("invalid_input", e.format_message(), EXIT_INPUT)
    except SolverError as e:
        fail("solver", str(e), EXIT_SOLVER)
    except (ValueError, KeyError, FileNotFoundError) as e:
        fail("invalid_input", str(e), EXIT_INPUT)
    return 0


if __name__ == "__main__":
    sys.exit(main())
