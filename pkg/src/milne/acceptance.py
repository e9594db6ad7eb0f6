"""The twelve acceptance checks on the reference harmonic oscillator.

Each check returns a :class:`CriterionResult` carrying the measured numbers
next to the tolerance they are judged against. The CLI ``check`` command and
the test-suite both run these functions, so the numbers printed by one are
the numbers asserted by the other.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .domain import PotentialSpec, SpatialGrid, evaluate_energy_slice, reference_config
from .ermakov import (
    ErmakovParams,
    alpha_at,
    amplitude,
    closed_form_dphi,
    coefficient_matrix,
    inverted_pair,
    inverted_sign,
    kappa_transform,
    milne_residual,
    nonoscillating_c,
    phase,
    q_at,
    stationary_points,
    trimmed,
    zeros_of,
)
from .schrodinger import BasisPair
from .semiclassical import (
    action_integrals,
    expansion_residual,
    hbar_expansion,
    schwarzian_from_derivative,
    semiclassical_amp_phase,
    semiclassical_c_o,
    wkb_pair,
)
from .spectral import (
    QuantumNumberMap,
    accumulated_phase,
    basis_at,
    c_of_energy,
    eigen_phase,
    find_eigenvalues,
    harmonic_map,
    normalization_checks,
)

__all__ = ["CriterionResult", "CRITERIA", "run_criteria"]


@dataclass
class CriterionResult:
    """Outcome of one acceptance criterion."""

    number: int
    title: str
    passed: bool
    measured: dict[str, float | int | bool] = field(default_factory=dict)
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        text = f"[{status}] criterion {self.number:2d} {self.title}: {parts}"
        return f"{text} ({self.note})" if self.note else text


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


@lru_cache(maxsize=None)
def _reference() -> tuple[PotentialSpec, SpatialGrid, QuantumNumberMap]:
    pot, grid = reference_config()
    return pot, grid, harmonic_map(pot, 20)


@lru_cache(maxsize=None)
def _pair(E: float, refine: int = 0) -> BasisPair:
    pot, grid, qmap = _reference()
    for _ in range(refine):
        grid = grid.refined()
    return basis_at(pot, grid, E, qmap, 1.0)


def _midwell(x: np.ndarray, t1: float, t2: float) -> np.ndarray:
    q = 0.25 * (t2 - t1)
    return (x > t1 + q) & (x < t2 - q)


def criterion_1() -> CriterionResult:
    pot, grid, _ = _reference()
    start = time.perf_counter()
    qmap = find_eigenvalues(pot, grid, 10)
    elapsed = time.perf_counter() - start
    err = max(abs(E - (k + 0.5)) for k, E in qmap.eigenvalues)
    ok = err <= 1e-8 and elapsed < 10.0
    return CriterionResult(1, "eigenvalues n+1/2, n=0..10", ok, {"max_abs_err": err, "seconds": elapsed})


def criterion_2() -> CriterionResult:
    _, _, qmap = _reference()
    res = []
    for refine in (0, 1):
        pair = _pair(4.9, refine)
        ap = phase(pair, ErmakovParams(1.0, c_of_energy(1.0, qmap, 4.9)))
        res.append(float(np.nanmax(np.abs(milne_residual(ap.alpha, pair.energy_slice, index=ap.index)))))
    ratio = res[0] / res[1]
    ok = res[0] <= 1e-4 and ratio >= 4.0
    return CriterionResult(
        2, "Milne residual at E=4.9, c=c(E)", ok, {"residual": res[0], "residual_refined": res[1], "ratio": ratio}
    )


def criterion_3() -> CriterionResult:
    pair = _pair(4.9)
    es = pair.energy_slice
    co, _ = nonoscillating_c(pair)
    worst = 0.0
    for c in (0.0, co, -co):
        ap = phase(pair, ErmakovParams(1.0, c))
        inside = (ap.x > es.t1) & (ap.x < es.t2)
        dphi = closed_form_dphi(pair, c, ap.index)
        worst = max(worst, float(np.max(np.abs(ap.alpha[inside] ** 2 * dphi[inside] - 1.0))))
    return CriterionResult(
        3, "a=1 identity for c in {0, +c_o, -c_o}", worst <= 1e-6, {"max_dev": worst},
        "phase derivative from the closed form, allowed region",
    )


def criterion_4() -> CriterionResult:
    pair = _pair(4.9)
    es = pair.energy_slice
    co, counts = nonoscillating_c(pair)
    n_co = counts[co]

    index = trimmed(pair)
    pts = stationary_points(amplitude(pair, ErmakovParams(1.0, -co), index), es, index)
    z1 = zeros_of(pair.u1, es.t1, es.t2)
    z2 = zeros_of(pair.u2, es.t1, es.t2)
    merged = sorted([(z, 1) for z in z1] + [(z, 2) for z in z2])
    interlaced = all(a[1] != b[1] for a, b in zip(merged, merged[1:]))
    placed = True
    for (za, _), (zb, _) in zip(merged, merged[1:]):
        inside = [k for xk, k in pts if za < xk < zb]
        placed &= len(inside) == 1
    kinds = [k for _, k in pts]
    alternating = all(a != b for a, b in zip(kinds, kinds[1:]))
    target = 2.0 / pair.W**2
    zeros = np.concatenate([z1, z2])
    q_err = max(
        float(np.max(np.abs(q_at(pair, ErmakovParams(1.0, c), zeros) / target - 1.0))) for c in (co, -co)
    )
    ok = n_co == 1 and len(pts) >= 8 and alternating and placed and interlaced and q_err <= 1e-6
    return CriterionResult(
        4, "non-oscillation dichotomy at n(E)=4.4", ok,
        {"stationary_co": n_co, "stationary_minus_co": len(pts), "alternating": alternating,
         "one_per_zero_gap": placed, "Q_target": target, "Q_rel_err": q_err},
    )


def criterion_5() -> CriterionResult:
    pot, grid, qmap = _reference()
    ns = (3.2, 4.4, 6.7)
    ratios = []
    for n in ns:
        E = qmap.energy_of(n)
        acc = accumulated_phase(pot, grid, E, ErmakovParams(1.0, c_of_energy(1.0, qmap, E)), qmap)
        ratios.append(acc.phi_total / math.pi)
    rel = max(abs(r - n) / n for r, n in zip(ratios, ns))
    fit = np.polyfit(ns, ratios, 1)
    collinear = float(np.max(np.abs(np.polyval(fit, ns) - ratios))) * math.pi
    ok = rel <= 1e-4 and collinear <= 1e-4 * math.pi
    measured = {f"phi/pi@{n}": r for n, r in zip(ns, ratios)}
    measured.update({"max_rel_err": rel, "line_dev": collinear, "slope": fit[0], "intercept": fit[1]})
    return CriterionResult(5, "accumulated phase phi(s2)/pi = n(E)", ok, measured)


def criterion_6() -> CriterionResult:
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(100):
        I = float(rng.uniform(0.25, 4.0))
        c = float(rng.uniform(-1.0, 1.0))
        W = float(rng.uniform(0.2, 4.0) * rng.choice([-1.0, 1.0]))
        M = coefficient_matrix(ErmakovParams(I, c), W)
        worst = max(worst, abs(M.det * W * W - 1.0))
    return CriterionResult(6, "det M = W^-2 over 100 random triples", worst <= 1e-12, {"max_rel_err": worst})


def criterion_7() -> CriterionResult:
    pot, grid, qmap = _reference()
    E = 4.9
    acts = action_integrals(pot, grid, E, qmap)
    jc_err = abs(acts["J_classical"] / (2.0 * math.pi * E) - 1.0)
    jq_err = abs(acts["J_quantal"] / acts["J_quantal_co"] - 1.0)
    levels = [eigen_phase(pot, grid, 3.5, ErmakovParams(1.0, c)).phi_total / math.pi for c in (0.0, 0.3)]
    int_err = max(abs(v - round(v)) for v in levels)
    ok = jc_err <= 1e-6 and jq_err <= 1e-4 and int_err <= 1e-4
    return CriterionResult(
        7, "action integrals", ok,
        {"J_classical": acts["J_classical"], "J_classical_rel_err": jc_err, "J_quantal_co": acts["J_quantal"],
         "2*pi*hbar*n": acts["J_quantal_co"], "J_quantal_rel_err": jq_err, "J_quantal-J_classical": acts["offset"],
         "J/2pi@E3,c=0": levels[0], "J/2pi@E3,c=0.3": levels[1], "integer_err": int_err},
    )


def criterion_8() -> CriterionResult:
    _, _, qmap = _reference()
    E = qmap.energy_of(12.4)
    pair = _pair(E)
    es = pair.energy_slice
    co, _ = nonoscillating_c(pair)
    devs = []
    for c in (co, 0.0):
        ap = phase(pair, ErmakovParams(1.0, c))
        win = np.abs(ap.x) <= 0.8 * es.t2
        p = es.p_at(ap.x[win])
        devs.append(float(np.max(np.abs(es.hbar * ap.dphi[win] / p - 1.0))))
    ok = devs[0] <= 0.02 and devs[1] > 0.05
    return CriterionResult(8, "hbar dphi(c_o) tracks p at n(E)=12.4", ok, {"dev_co": devs[0], "dev_c0": devs[1]})


def criterion_9() -> CriterionResult:
    pair = _pair(4.9)
    es = pair.energy_slice
    wp = wkb_pair(es, 1.0, pair.W)
    c = semiclassical_c_o(1.0, pair.W)
    alpha, phi = semiclassical_amp_phase(wp, ErmakovParams(1.0, c))
    mid = _midwell(wp.x, es.t1, es.t2)
    amp_err = float(np.max(np.abs(alpha[mid] ** 2 * wp.p[mid] / wp.hbar - 1.0)))
    S = wp.S / wp.hbar
    phase_err = float(np.max(np.abs(phi[mid] - S[mid])) / np.max(np.abs(S[mid])))
    h = es.grid.h
    s_phi = schwarzian_from_derivative(alpha**-2.0, h)
    s_S = schwarzian_from_derivative(wp.p / wp.hbar, h)
    lhs = float(np.nanmax(np.abs(s_phi[mid] - s_S[mid])) / np.nanmax(np.abs(s_S[mid])))
    rhs = float(np.max(np.abs(wp.p[mid] ** 2 - wp.hbar**2 / alpha[mid] ** 4) / wp.p[mid] ** 2))
    ok = amp_err <= 1e-8 and phase_err <= 1e-8 and lhs <= 1e-4 and rhs <= 1e-4
    return CriterionResult(
        9, "semiclassical non-oscillating solution", ok,
        {"alpha2_p_err": amp_err, "phase_err": phase_err, "schwarzian_side": lhs, "momentum_side": rhs},
    )


def criterion_10() -> CriterionResult:
    pot, grid, _ = _reference()
    res = []
    for hb in (1.0, 0.5):
        es = evaluate_energy_slice(pot.with_hbar(hb), grid, 4.9)
        terms = hbar_expansion(es, hb, 2)
        mid = _midwell(terms.x, es.t1, es.t2)
        res.append(float(np.nanmax(expansion_residual(terms)[mid])))
    ratio = res[0] / res[1]
    ok = abs(ratio / 16.0 - 1.0) <= 0.3
    return CriterionResult(
        10, "order-2 expansion error scales as hbar^4", ok,
        {"residual_hbar1": res[0], "residual_hbar0.5": res[1], "ratio": ratio},
    )


def criterion_11() -> CriterionResult:
    pot, grid, qmap = _reference()
    rep = normalization_checks(pot, grid, qmap, 1.0)
    c, d = rep["c"], rep["d"]
    ok = bool(c["passed"] and d["passed"])
    return CriterionResult(
        11, "invariant I from unity normalization and de Broglie integral", ok,
        {"I_unity": c["value"], "I_unity_err": c["error"], "I_broglie": d["value"], "broglie_err": d["error"]},
    )


def criterion_12() -> CriterionResult:
    pot, grid, qmap = _reference()
    pair = _pair(4.9)
    es = pair.energy_slice
    co, _ = nonoscillating_c(pair)
    # kappa invariance
    ap = phase(pair, ErmakovParams(1.0, co))
    kp, kparams = kappa_transform(pair, ErmakovParams(1.0, co), 2.0)
    ak = phase(kp, kparams)
    kappa_err = max(
        float(np.max(np.abs(ak.alpha / ap.alpha - 1.0))), float(np.max(np.abs(ak.phi - ap.phi)) / ap.phi_end)
    )
    # c-invariance of alpha at the zeros of u1
    z1 = zeros_of(pair.u1, es.t1, es.t2)
    vals = np.array([alpha_at(pair, ErmakovParams(1.0, c), z1) for c in (0.0, co, -co, 3.0)])
    cinv_err = float(np.max(np.abs(vals / vals[0] - 1.0)))
    # inverted phase relation
    inv_err = 0.0
    for c in (co, -co):
        direct = phase(pair, ErmakovParams(1.0, c))
        _, phibar = inverted_pair(pair, ErmakovParams(1.0, -c), direct)
        sigma = inverted_sign(pair, c)
        rhs = sigma * pair.W * (np.cos(direct.phi) / 2.0 + c * np.sin(direct.phi))
        inv_err = max(inv_err, float(np.max(np.abs(np.sin(phibar) - rhs))))
    rep = normalization_checks(pot, grid, qmap, 1.0)
    b = rep["b"]
    ok = kappa_err <= 1e-10 and cinv_err <= 1e-10 and inv_err <= 1e-5 and bool(b["passed"])
    return CriterionResult(
        12, "identity suite", ok,
        {"kappa_err": kappa_err, "c_invariance_err": cinv_err, "inverted_phase_err": inv_err,
         "dn_dE_integral": b["value"], "dn_dE_rel_err": b["error"]},
    )


CRITERIA: dict[int, Callable[[], CriterionResult]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
}


def run_criteria(numbers: list[int] | None = None) -> list[CriterionResult]:
    """Run the selected criteria (all by default) in ascending order."""
    return [CRITERIA[k]() for k in sorted(numbers or CRITERIA)]
