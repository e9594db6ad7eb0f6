"""Eigenvalues, the quantum-number continuation n(E), c(E) and accumulated phase."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.integrate import quad, simpson
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .domain import EnergySlice, PotentialSpec, SpatialGrid, evaluate_energy_slice
from .errors import (
    BracketNotFound,
    ClampWarning,
    DegenerateTurningPoints,
    EigenvalueDegenerate,
    GridBufferWarning,
    OutOfRange,
)
from .ermakov import C_MAX, ErmakovParams, closed_form_phase, nonoscillating_c, phase, trimmed
from .schrodinger import (
    DEGENERATE_SIN,
    BasisPair,
    build_g,
    envelope_balanced,
    integrate_regular,
    rescale_basis,
)

__all__ = [
    "QuantumNumberMap",
    "AccumulatedPhase",
    "worker_count",
    "find_eigenvalues",
    "harmonic_map",
    "continuation_map",
    "quantum_number",
    "c_of_energy",
    "basis_at",
    "resolve_c",
    "accumulated_phase",
    "eigen_phase",
    "matched_eigenfunction",
    "inverse_p_integral",
    "normalization_checks",
]

EIGEN_RTOL = 1e-12


@dataclass(frozen=True)
class QuantumNumberMap:
    """Eigenvalue table and the monotone continuation ``n(E)``.

    ``kind="analytic_harmonic"`` uses ``n = E/(hbar omega) - 1/2``;
    ``kind="interpolated"`` a shape-preserving cubic through ``(E_k, k)``.
    """

    eigenvalues: tuple[tuple[int, float], ...]
    kind: str
    hbar_omega: float | None = None
    _interp: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ("analytic_harmonic", "interpolated"):
            raise ValueError(f"unknown map kind {self.kind!r}")
        E = [e for _, e in self.eigenvalues]
        if np.any(np.diff(E) <= 0):
            raise ValueError("eigenvalues must be strictly increasing")
        if self.kind == "analytic_harmonic":
            if not (self.hbar_omega and self.hbar_omega > 0):
                raise ValueError("analytic map needs hbar*omega > 0")
        elif len(E) >= 2:
            n = [k for k, _ in self.eigenvalues]
            object.__setattr__(self, "_interp", PchipInterpolator(E, n, extrapolate=False))

    @property
    def energies(self) -> np.ndarray:
        return np.array([e for _, e in self.eigenvalues])

    def _check(self, E: float) -> None:
        if self.kind == "interpolated":
            lo, hi = self.eigenvalues[0][1], self.eigenvalues[-1][1]
            if not lo <= E <= hi:
                raise OutOfRange(f"E={E} outside the tabulated range [{lo}, {hi}]")

    def n(self, E: float) -> float:
        self._check(E)
        if self.kind == "analytic_harmonic":
            return E / self.hbar_omega - 0.5
        for k, e in self.eigenvalues:
            if E == e:
                return float(k)
        if self._interp is None:
            raise OutOfRange("a single eigenvalue defines no continuation")
        return float(self._interp(E))

    def dn(self, E: float) -> float:
        """``dn/dE``."""
        self._check(E)
        if self.kind == "analytic_harmonic":
            return 1.0 / self.hbar_omega
        if self._interp is None:
            raise OutOfRange("a single eigenvalue defines no continuation")
        return float(self._interp.derivative()(E))

    def energy_of(self, n: float) -> float:
        """Inverse continuation ``E(n)``."""
        if self.kind == "analytic_harmonic":
            return self.hbar_omega * (n + 0.5)
        ks = [k for k, _ in self.eigenvalues]
        if not ks[0] <= n <= ks[-1]:
            raise OutOfRange(f"n={n} outside [{ks[0]}, {ks[-1]}]")
        lo, hi = self.eigenvalues[0][1], self.eigenvalues[-1][1]
        return brentq(lambda e: self.n(e) - n, lo, hi, xtol=1e-14, rtol=EIGEN_RTOL)


@dataclass(frozen=True)
class AccumulatedPhase:
    """Phase at the right end of the grid plus an exponential-tail estimate."""

    E: float
    phi_total: float
    c_used: float
    tail_correction: float = 0.0


def worker_count(requested: int | None = None) -> int:
    """Thread count from the argument or ``MILNE_THREADS`` (0 means one per CPU)."""
    if requested is None:
        raw = os.environ.get("MILNE_THREADS", "1").strip() or "1"
        try:
            requested = int(raw)
        except ValueError:
            raise ValueError(f"MILNE_THREADS must be an integer, got {raw!r}") from None
    if requested < 0:
        raise ValueError("worker count must be >= 0")
    return requested or (os.cpu_count() or 1)


def _probe(potential: PotentialSpec, grid: SpatialGrid, E: float) -> tuple[float, int]:
    """Balanced Wronskian and Sturm node count of u2 at ``E``."""
    es = evaluate_energy_slice(potential, grid, E)
    v1, v2, W0 = envelope_balanced(integrate_regular(es, "left"), integrate_regular(es, "right"))
    return W0, v2.node_count


def _quiet_probe(potential, grid, E):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridBufferWarning)
        return _probe(potential, grid, E)


def find_eigenvalues(
    potential: PotentialSpec, grid: SpatialGrid, n_max: int, workers: int | None = None
) -> QuantumNumberMap:
    """Locate ``E_0 .. E_nmax`` by node counting and root-finding on the Wronskian.

    Energies are split recursively until each bracket holds one increment of
    the node count of ``u2``; the Wronskian of the envelope-balanced pair then
    changes sign exactly once inside it and ``brentq`` refines the root.

    Raises:
        BracketNotFound: node counts do not reach ``n_max + 1`` below the grid edges.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    imin = potential.check_single_minimum(grid)
    v = potential(grid.x)
    vmin, vtop = float(v[imin]), float(min(v[0], v[-1]))
    span = vtop - vmin
    cache: dict[float, tuple[float, int]] = {}

    def probe(E):
        if E not in cache:
            cache[E] = _quiet_probe(potential, grid, E)
        return cache[E]

    lo = None
    for frac in (1e-6, 1e-5, 1e-4, 1e-3, 1e-2):
        try:
            E = vmin + frac * span
            if probe(E)[1] == 0:
                lo = E
                break
        except DegenerateTurningPoints:
            continue
    if lo is None:
        raise BracketNotFound("no energy with zero nodes found above the minimum")
    top = vmin + (1.0 - 1e-9) * span
    hi = lo + span / 256.0
    while probe(hi)[1] <= n_max:
        if hi >= top:
            raise BracketNotFound(f"only {probe(hi)[1]} nodes below the grid-edge potential")
        hi = min(lo + 2.0 * (hi - lo), top)

    brackets: dict[int, tuple[float, float]] = {}
    stack = [(lo, hi)]
    while stack:
        a, b = stack.pop()
        na, nb = probe(a)[1], probe(b)[1]
        if nb == na or na > n_max:
            continue
        if nb - na == 1:
            brackets[na] = (a, b)
            continue
        if b - a < 1e-12 * max(abs(a), abs(b), 1.0):
            raise BracketNotFound(f"node count jumps by {nb - na} at E={a}")
        mid = 0.5 * (a + b)
        stack.extend([(a, mid), (mid, b)])
    missing = [k for k in range(n_max + 1) if k not in brackets]
    if missing:
        raise BracketNotFound(f"no bracket for n={missing}")

    def refine(k):
        a, b = brackets[k]
        f = lambda E: _quiet_probe(potential, grid, E)[0]
        return brentq(f, a, b, xtol=1e-14, rtol=EIGEN_RTOL, maxiter=200)

    n_workers = min(worker_count(workers), n_max + 1)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            energies = list(pool.map(refine, range(n_max + 1)))
    else:
        energies = [refine(k) for k in range(n_max + 1)]
    eig = tuple((k, float(e)) for k, e in enumerate(energies))
    if potential.kind == "harmonic":
        return QuantumNumberMap(eig, "analytic_harmonic", potential.hbar * potential.omega)
    return QuantumNumberMap(eig, "interpolated")


def harmonic_map(potential: PotentialSpec, n_max: int = 10) -> QuantumNumberMap:
    """Analytic map ``E_k = hbar omega (k + 1/2)`` for a harmonic potential."""
    if potential.kind != "harmonic":
        raise ValueError("analytic map requires a harmonic potential")
    hw = potential.hbar * potential.omega
    return QuantumNumberMap(
        tuple((k, hw * (k + 0.5)) for k in range(n_max + 1)), "analytic_harmonic", hw
    )


def continuation_map(
    potential: PotentialSpec,
    grid: SpatialGrid,
    E: float | None = None,
    n: float | None = None,
    workers: int | None = None,
) -> QuantumNumberMap:
    """A map whose range covers the energy ``E`` or quantum number ``n``.

    Harmonic potentials get the analytic map; otherwise eigenvalues are found
    with a doubling ``n_max`` until the table brackets the request.
    """
    if potential.kind == "harmonic":
        return harmonic_map(potential, 10)
    n_max = max(4, int(math.ceil(n)) + 1 if n is not None else 4)
    while True:
        qmap = find_eigenvalues(potential, grid, n_max, workers)
        top_n, top_E = qmap.eigenvalues[-1]
        if (E is None or E < top_E) and (n is None or n < top_n):
            return qmap
        n_max *= 2


def quantum_number(qmap: QuantumNumberMap, E: float) -> float:
    """``n(E)``; raises :class:`OutOfRange` outside an interpolated table."""
    return qmap.n(E)


def c_of_energy(I: float, qmap: QuantumNumberMap, E: float) -> float:
    """``c(E) = -cot(pi n(E)) / 2I``, clamped to ``|c| <= 1e8``.

    Raises:
        EigenvalueDegenerate: ``n(E)`` is (numerically) an integer.
    """
    n = qmap.n(E)
    s = math.sin(math.pi * n)
    if abs(s) < DEGENERATE_SIN:
        raise EigenvalueDegenerate(f"n(E)={n} is an integer; c(E) diverges")
    c = -math.cos(math.pi * n) / s / (2.0 * I)
    if abs(c) > C_MAX:
        warnings.warn(f"c(E)={c:.3e} clamped", ClampWarning, stacklevel=2)
        c = math.copysign(C_MAX, c)
    return c


def basis_at(
    potential: PotentialSpec, grid: SpatialGrid, E: float, qmap: QuantumNumberMap, I: float = 1.0
) -> BasisPair:
    """Rescaled basis pair at ``E`` with ``W = 2I sin(pi n(E))``."""
    es = evaluate_energy_slice(potential, grid, E)
    return rescale_basis(integrate_regular(es, "left"), integrate_regular(es, "right"), I, qmap.n(E))


def resolve_c(policy: str, pair: BasisPair, qmap: QuantumNumberMap, E: float) -> float:
    """Turn a c-policy into a number.

    ``co`` is the branch of ``+/-c_o`` found to be non-oscillating,
    ``minus_co`` the other one, ``of_energy`` is ``c(E)`` and ``fixed:VALUE``
    a literal.
    """
    if policy in ("co", "minus_co"):
        c, _ = nonoscillating_c(pair)
        return c if policy == "co" else -c
    if policy == "of_energy":
        return c_of_energy(pair.I, qmap, E)
    if policy.startswith("fixed:"):
        c = float(policy.split(":", 1)[1])
        if not math.isfinite(c):
            raise ValueError("fixed c must be finite")
        return c
    raise ValueError(f"unknown c-policy {policy!r}")


def _tail(es: EnergySlice, dphi_end: float, index: int) -> float:
    """``int_{x_end}^inf dphi`` for ``dphi ~ exp(-2 kappa x)`` beyond the last point."""
    kappa = math.sqrt(max(-float(es.p_squared[index]), 0.0)) / es.hbar
    return dphi_end / (2.0 * kappa) if kappa > 0 else 0.0


def accumulated_phase(
    potential: PotentialSpec,
    grid: SpatialGrid,
    E: float,
    params: ErmakovParams,
    qmap: QuantumNumberMap,
) -> AccumulatedPhase:
    """``phi(s2)``: the phase at the right trim boundary plus the decaying tail.

    The basis is rescaled with ``n(E)`` from ``qmap`` and invariant ``params.I``.
    """
    pair = basis_at(potential, grid, E, qmap, params.I)
    ap = phase(pair, params)
    tail = _tail(pair.energy_slice, float(ap.dphi[-1]), ap.index.stop - 1)
    return AccumulatedPhase(float(E), ap.phi_end + tail, params.c, tail)


def eigen_phase(
    potential: PotentialSpec, grid: SpatialGrid, E: float, params: ErmakovParams
) -> AccumulatedPhase:
    """Accumulated phase at (or extremely close to) an eigenvalue.

    There ``sin(pi n) = 0`` and the Wronskian rescaling is singular, so the
    envelope-balanced pair is used as is and the phase is the continuous branch
    of ``arctan(u1/g)``. Any eigenvalue error leaves a growing admixture in
    ``u1`` that eventually dominates the right tail, so the phase is read where
    ``|u1|`` is smallest beyond ``t2``: the deepest point the computed
    eigenfunction reaches before the admixture takes over.
    """
    es = evaluate_energy_slice(potential, grid, E)
    v1, v2, W0 = envelope_balanced(integrate_regular(es, "left"), integrate_regular(es, "right"))
    pair = BasisPair(v1, v2, W0, params.I, float("nan"))
    index = trimmed(pair)
    u1 = v1.values[index]
    g = build_g(pair, params.c).values[index]
    phi = closed_form_phase(u1, g)
    phi -= phi[0] - np.arctan(u1[0] / g[0])
    right = np.flatnonzero(es.x[index] > es.t2)
    j = right[np.argmin(np.abs(u1[right]))]
    return AccumulatedPhase(float(E), float(phi[j]), params.c)


def matched_eigenfunction(
    potential: PotentialSpec, grid: SpatialGrid, E: float
) -> tuple[np.ndarray, EnergySlice]:
    """Eigenfunction at ``E``: ``u1`` left of the minimum, matched ``u2`` to the right.

    Both pieces carry the envelope-balanced normalization of ``u1``.
    """
    es = evaluate_energy_slice(potential, grid, E)
    v1, v2, _ = envelope_balanced(integrate_regular(es, "left"), integrate_regular(es, "right"))
    m = es.minimum_index
    f = v1.values.copy()
    j = m if abs(v2.values[m]) > 1e-3 else m + 1
    f[m:] = v2.values[m:] * (v1.values[j] / v2.values[j])
    return f, es


def _balanced_scale(potential, grid, E, qmap, I):
    es = evaluate_energy_slice(potential, grid, E)
    _, _, W0 = envelope_balanced(integrate_regular(es, "left"), integrate_regular(es, "right"))
    return math.sqrt(abs(2.0 * I * math.sin(math.pi * qmap.n(E)) / W0))


def inverse_p_integral(es: EnergySlice) -> float:
    """``int_{t1}^{t2} dx / p`` via ``x = t1 + (t2 - t1)(1 - cos u)/2``.

    The substitution removes the inverse square-root endpoint singularities.
    """
    t1, t2 = es.t1, es.t2
    L = t2 - t1

    def integrand(u):
        x = t1 + 0.5 * L * (1.0 - math.cos(u))
        p2 = 2.0 * es.mass * (es.E - float(es.potential(x)))
        # rounding in the turning points can leave p2 a hair below zero
        return 0.5 * L * math.sin(u) / math.sqrt(max(abs(p2), 1e-300))

    val, _ = quad(integrand, 0.0, math.pi, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def normalization_checks(
    potential: PotentialSpec,
    grid: SpatialGrid,
    qmap: QuantumNumberMap,
    I: float = 1.0,
    level: int = 2,
    n_b: float = 4.25,
    delta: float = 1e-4,
) -> dict[str, dict[str, float | bool]]:
    """Energy-normalization relations of the invariant ``I``.

    Items (each with ``value``, ``expected``, ``error``, ``tol``, ``passed``;
    ``passed`` is None for informational items):

    * ``a``: ``int f^2 dx`` of the eigenfunction at level ``level`` against
      ``(hbar^2/m) I dphi(s2)/dE``, the derivative taken along ``c = c(E)``.
    * ``b``: ``I (dc/dE) / (1/2I + 2I c^2)`` against ``I pi dn/dE`` at ``n = n_b``.
    * ``c``: the ``I`` giving a unit-norm eigenfunction, against ``m omega/(hbar pi)``
      (harmonic only; otherwise an informational comparison with item ``d``).
    * ``d``: ``2 pi / int lambda dx`` against the unit-norm ``I`` of item ``c``
      (a tested equality only for the harmonic oscillator).
    """
    hbar, m = potential.hbar, potential.mass
    Ek = dict(qmap.eigenvalues).get(level)
    if Ek is None:
        raise OutOfRange(f"level {level} is not in the eigenvalue table")
    dE = delta
    report: dict[str, dict[str, float | bool]] = {}

    # (a)
    f, es = matched_eigenfunction(potential, grid, Ek)
    s_k = 0.5 * sum(_balanced_scale(potential, grid, Ek + d, qmap, I) for d in (-dE, dE))
    norm = float(simpson((s_k * f) ** 2, dx=grid.h))
    phis = [
        accumulated_phase(potential, grid, Ek + d, ErmakovParams(I, c_of_energy(I, qmap, Ek + d)), qmap).phi_total
        for d in (-dE, dE)
    ]
    dphi_dE = (phis[1] - phis[0]) / (2.0 * dE)
    rhs = hbar**2 / m * I * dphi_dE
    report["a"] = _item(norm, rhs, 1e-4)

    # (b)
    Eb = qmap.energy_of(n_b)
    dEb = delta
    c_p, c_m = (c_of_energy(I, qmap, Eb + d) for d in (dEb, -dEb))
    dc = (c_p - c_m) / (2.0 * dEb)
    c0 = c_of_energy(I, qmap, Eb)
    lhs = I * dc / (0.5 / I + 2.0 * I * c0 * c0)
    report["b"] = _item(lhs, I * math.pi * qmap.dn(Eb), 1e-6)

    # (c), (d)
    I_unity = I / norm
    I_broglie = 1.0 / (hbar * inverse_p_integral(es))
    if potential.kind == "harmonic":
        report["c"] = _item(I_unity, m * potential.omega / (hbar * math.pi), 1e-4)
        report["d"] = _item(I_broglie, I_unity, 1e-3)
    else:
        # the wavelength formula is exact only for the oscillator; elsewhere
        # it is the semiclassical estimate, so the comparison is informational
        report["c"] = _item(I_unity, I_broglie, None)
        report["d"] = _item(I_broglie, I_unity, None)
    return report


def _item(value: float, expected: float, tol: float | None) -> dict[str, float | bool | None]:
    err = abs(value - expected) / max(abs(expected), 1e-300)
    passed = None if tol is None else bool(err <= tol)
    return {"value": value, "expected": expected, "error": err, "tol": tol, "passed": passed}
