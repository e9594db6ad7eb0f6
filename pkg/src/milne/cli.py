"""Command-line interface.

Every subcommand reads the JSON run configuration, computes everything in
memory and only then writes its CSV or JSON output, so a failed run never
leaves a partial file behind.

Exit codes: 0 on success, 1 for configuration or usage errors, 2 when a
numerical invariant fails.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import PotentialSpec, SpatialGrid, evaluate_energy_slice, load_config
from .errors import ConfigError, MilneError
from .ermakov import ErmakovParams, alpha_at, nonoscillating_c, phase, q_at, zeros_of
from .schrodinger import integrate_regular
from .semiclassical import action_integrals, expansion_fit, expansion_residual, hbar_expansion
from .spectral import (
    accumulated_phase,
    basis_at,
    continuation_map,
    find_eigenvalues,
    resolve_c,
    worker_count,
)

FLOAT_FORMAT = "{:.15g}"
C_POLICIES = ("co", "minus_co", "of_energy", "fixed:VALUE")


class UsageError(Exception):
    """Raised instead of argparse's exit(2) so usage problems map to exit 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: D401 - argparse hook
        raise UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Potential, grid and command options for one invocation."""

    potential: PotentialSpec
    grid: SpatialGrid
    options: argparse.Namespace


def parse_c_policy(text: str) -> str:
    """Validate ``co | minus_co | of_energy | fixed:VALUE``."""
    if text in ("co", "minus_co", "of_energy"):
        return text
    if text.startswith("fixed:"):
        try:
            value = float(text[6:])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad fixed c value in {text!r}") from None
        if not math.isfinite(value):
            raise argparse.ArgumentTypeError("fixed c must be finite")
        return text
    raise argparse.ArgumentTypeError(f"c-policy must be one of {', '.join(C_POLICIES)}")


def _finite(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError("value must be finite")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("value must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="milne", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="JSON run configuration")
    common.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eigen", parents=[common], help="eigenvalues as JSON")
    p.add_argument("--nmax", type=_positive_int, default=5)

    p = sub.add_parser("ampphase", parents=[common], help="amplitude and phase as CSV")
    p.add_argument("--energy", type=_finite, required=True)
    p.add_argument("--c-policy", type=parse_c_policy, default="co")
    p.add_argument("--I", dest="I", type=_finite, default=1.0, help="Ermakov invariant")

    p = sub.add_parser("scan-phase", parents=[common], help="accumulated phase over n(E) as CSV")
    p.add_argument("--nmin", type=_finite, required=True)
    p.add_argument("--nmax", type=_finite, required=True)
    p.add_argument("--steps", type=_positive_int, required=True)
    p.add_argument("--c-policy", type=parse_c_policy, default="of_energy")
    p.add_argument("--I", dest="I", type=_finite, default=1.0)

    p = sub.add_parser("action", parents=[common], help="action integrals as JSON")
    p.add_argument("--energy", type=_finite, required=True)

    p = sub.add_parser("fig1", parents=[common], help="Q and amplitudes for both c_o branches")
    p.add_argument("--n", type=_finite, default=4.4, help="quantum-number continuation n(E)")

    p = sub.add_parser("fig2", parents=[common], help="hbar dphi against p")
    p.add_argument("--n", type=_finite, default=12.4)
    p.add_argument("--c-generic", type=_finite, default=0.0)

    p = sub.add_parser("expand", parents=[common], help="hbar-expansion terms and residuals as CSV")
    p.add_argument("--order", type=int, choices=(0, 2), default=2)
    p.add_argument("--hbar-eff", type=_finite, required=True)
    p.add_argument("--energy", type=_finite, default=4.9)

    p = sub.add_parser("check", help="run the acceptance criteria and print a pass/fail table")
    p.add_argument("--config", type=Path, default=None, help="ignored; checks use the reference oscillator")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--criteria", type=str, default=None, help="comma-separated subset, e.g. 1,4,9")
    return parser


def _csv(header: Sequence[str], rows, blocks: Sequence = ()) -> str:
    """Header row, data rows, then optional blank-line separated blocks."""
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")

    def emit(block):
        for row in block:
            buf.write(",".join(FLOAT_FORMAT.format(float(v)) for v in row) + "\n")

    emit(rows)
    for block in blocks:
        buf.write("\n")
        emit(block)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _cmd_eigen(cfg: RunConfig) -> str:
    qmap = find_eigenvalues(cfg.potential, cfg.grid, cfg.options.nmax)
    return _json({"eigenvalues": [{"n": k, "E": E} for k, E in qmap.eigenvalues]})


def _cmd_ampphase(cfg: RunConfig) -> str:
    o = cfg.options
    if not o.I > 0:
        raise ConfigError("--I must be positive")
    qmap = continuation_map(cfg.potential, cfg.grid, E=o.energy)
    pair = basis_at(cfg.potential, cfg.grid, o.energy, qmap, o.I)
    c = resolve_c(o.c_policy, pair, qmap, o.energy)
    ap = phase(pair, ErmakovParams(o.I, c))
    i = ap.index
    rows = zip(ap.x, pair.u1.values[i], pair.u2.values[i], ap.alpha, ap.phi, ap.dphi)
    return _csv(["x", "u1", "u2", "alpha", "phi", "dphi"], rows)


def _cmd_scan_phase(cfg: RunConfig) -> str:
    o = cfg.options
    if o.steps < 1 or o.nmax < o.nmin:
        raise ConfigError("scan needs --steps >= 1 and --nmax >= --nmin")
    if not o.I > 0:
        raise ConfigError("--I must be positive")
    ns = np.linspace(o.nmin, o.nmax, o.steps)
    qmap = continuation_map(cfg.potential, cfg.grid, n=float(o.nmax))

    def one(n):
        E = qmap.energy_of(float(n))
        pair = basis_at(cfg.potential, cfg.grid, E, qmap, o.I)
        c = resolve_c(o.c_policy, pair, qmap, E)
        acc = accumulated_phase(cfg.potential, cfg.grid, E, ErmakovParams(o.I, c), qmap)
        return E, qmap.n(E), acc.phi_total / math.pi, c

    workers = min(worker_count(), len(ns))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, ns))
    else:
        rows = [one(n) for n in ns]
    return _csv(["E", "nE", "phi_total_over_pi", "c_used"], rows)


def _cmd_action(cfg: RunConfig) -> str:
    E = cfg.options.energy
    qmap = continuation_map(cfg.potential, cfg.grid, E=E)
    acts = action_integrals(cfg.potential, cfg.grid, E, qmap)
    keys = ("E", "J_classical", "J_quantal_co", "period", "J_quantal", "offset")
    return _json({k: acts[k] for k in keys})


def _cmd_fig1(cfg: RunConfig) -> str:
    n = cfg.options.n
    qmap = continuation_map(cfg.potential, cfg.grid, n=n)
    E = qmap.energy_of(n)
    pair = basis_at(cfg.potential, cfg.grid, E, qmap, 1.0)
    es = pair.energy_slice
    co, _ = nonoscillating_c(pair)
    p_co, p_minus = ErmakovParams(1.0, co), ErmakovParams(1.0, -co)
    a_co = phase(pair, p_co, check=False)
    a_minus = phase(pair, p_minus, check=False)
    margin = 0.25 * (es.t2 - es.t1)
    win = (a_co.x >= es.t1 - margin) & (a_co.x <= es.t2 + margin)
    q = q_at(pair, p_co, a_co.x[win])
    rows = zip(a_co.x[win], q, a_co.alpha[win], a_minus.alpha[win])
    blocks = []
    for sol in (pair.u1, pair.u2):
        z = zeros_of(sol, es.t1, es.t2)
        blocks.append(list(zip(z, q_at(pair, p_co, z), alpha_at(pair, p_co, z), alpha_at(pair, p_minus, z))))
    return _csv(["x", "Q_co", "alpha_co", "alpha_minus_co"], rows, blocks)


def _cmd_fig2(cfg: RunConfig) -> str:
    o = cfg.options
    qmap = continuation_map(cfg.potential, cfg.grid, n=o.n)
    E = qmap.energy_of(o.n)
    pair = basis_at(cfg.potential, cfg.grid, E, qmap, 1.0)
    es = pair.energy_slice
    co, _ = nonoscillating_c(pair)
    a_co = phase(pair, ErmakovParams(1.0, co))
    a_gen = phase(pair, ErmakovParams(1.0, o.c_generic))
    inside = (a_co.x > es.t1) & (a_co.x < es.t2)
    x = a_co.x[inside]
    hb = es.hbar
    rows = zip(x, es.p_at(x), hb * a_co.dphi[inside], hb * a_gen.dphi[inside])
    return _csv(["x", "p_classical", "hbar_dphi_co", "hbar_dphi_generic"], rows)


def _cmd_expand(cfg: RunConfig) -> str:
    o = cfg.options
    if not o.hbar_eff > 0:
        raise ConfigError("--hbar-eff must be positive")
    pot = cfg.potential.with_hbar(o.hbar_eff)
    es = evaluate_energy_slice(pot, cfg.grid, o.energy)
    u = integrate_regular(es, "left").values
    t0 = hbar_expansion(es, o.hbar_eff, 0)
    u_exact = u[t0.index]
    u_exact = u_exact / np.max(np.abs(u_exact))
    cols = {
        "x": t0.x,
        "a0": t0.a0,
        "f0": t0.f0,
    }
    if o.order == 2:
        t2 = hbar_expansion(es, o.hbar_eff, 2)
        cols.update({"a2": t2.a2, "f2": t2.f2})
    cols["u_exact"] = u_exact
    cols["u_order0"] = expansion_fit(t0, u_exact)
    if o.order == 2:
        cols["u_order2"] = expansion_fit(t2, u_exact)
    cols["residual_order0"] = expansion_residual(t0)
    if o.order == 2:
        cols["residual_order2"] = expansion_residual(t2)
    keep = np.all(np.isfinite(np.column_stack(list(cols.values()))), axis=1)
    return _csv(list(cols), zip(*(v[keep] for v in cols.values())))


def _cmd_check(cfg: RunConfig) -> tuple[str, int]:
    from .acceptance import CRITERIA, run_criteria

    sel = None
    if cfg.options.criteria:
        try:
            sel = [int(t) for t in cfg.options.criteria.split(",") if t.strip()]
        except ValueError:
            raise ConfigError(f"bad --criteria list {cfg.options.criteria!r}") from None
        bad = [k for k in sel if k not in CRITERIA]
        if bad:
            raise ConfigError(f"unknown criteria {bad}")
    results = run_criteria(sel)
    lines = [r.line() for r in results]
    failed = [r.number for r in results if not r.passed]
    lines.append(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    if failed:
        lines.append("failing: " + ", ".join(str(k) for k in failed))
    return "\n".join(lines) + "\n", 2 if failed else 0


COMMANDS = {
    "eigen": _cmd_eigen,
    "ampphase": _cmd_ampphase,
    "scan-phase": _cmd_scan_phase,
    "action": _cmd_action,
    "fig1": _cmd_fig1,
    "fig2": _cmd_fig2,
    "expand": _cmd_expand,
}


def _write(text: str, out: Path | None) -> None:
    if out is None:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            # Downstream closed early (e.g. `| head`); not an error for us.
            sys.stdout = open(os.devnull, "w")
    else:
        out.write_text(text)


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, run one subcommand and return the exit code."""
    try:
        args = build_parser().parse_args(argv)
        worker_count()  # validates MILNE_THREADS early
        if args.command == "check":
            text, code = _cmd_check(RunConfig(None, None, args))
            _write(text, args.out)
            return code
        potential, grid = load_config(args.config)
        text = COMMANDS[args.command](RunConfig(potential, grid, args))
    except (UsageError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MilneError as exc:
        print(f"numerical failure [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    try:
        _write(text, args.out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
