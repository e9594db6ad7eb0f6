"""Reduced action, WKB pair, Schwarzian derivatives and the finite-order hbar expansion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .domain import EnergySlice, PotentialSpec, SpatialGrid, evaluate_energy_slice
from .errors import ArccosDomain, DerivativeVanishes
from .ermakov import ErmakovParams, coefficient_matrix, nonoscillating_c, phase, stationary_points
from .finite_diff import d1, d2, d3
from .spectral import QuantumNumberMap, basis_at

__all__ = [
    "ReducedAction",
    "WkbPair",
    "ExpansionTerms",
    "reduced_action",
    "loop_action",
    "wkb_pair",
    "schwarzian",
    "schwarzian_from_derivative",
    "semiclassical_c_o",
    "semiclassical_amp_phase",
    "modified_equation_residual",
    "hbar_expansion",
    "expansion_residual",
    "expansion_fit",
    "expansion_fit_error",
    "expanded_phase",
    "expanded_phase_bracket",
    "action_integrals",
    "count_oscillations",
]

CAUSTIC_TRIM = 0.1
ACTION_NODES = 4001


@dataclass(frozen=True)
class ReducedAction:
    """``S(x) = int_{t1}^x p dx'`` on the allowed grid points ``index``."""

    x: np.ndarray
    S: np.ndarray
    dS: np.ndarray
    origin: float
    total: float
    index: slice


@dataclass(frozen=True)
class WkbPair:
    """Semiclassical pair on the caustic-trimmed window ``index``."""

    x: np.ndarray
    u1_tilde: np.ndarray
    u2_tilde: np.ndarray
    I: float
    W: float
    p: np.ndarray
    S: np.ndarray
    hbar: float
    index: slice
    energy_slice: EnergySlice


@dataclass(frozen=True)
class ExpansionTerms:
    """Order-0 and order-2 coefficients of ``u = a exp(i F / hbar)`` on ``index``.

    ``a = a0 + hbar^2 a2`` and ``F = f0 + hbar^2 f2`` with ``b_j = 0`` for
    ``j >= 2``. Derivative arrays are kept for the residual evaluation.
    """

    x: np.ndarray
    a0: np.ndarray
    f0: np.ndarray
    a2: np.ndarray
    f2: np.ndarray
    df2: np.ndarray
    p: np.ndarray
    hbar_eff: float
    order: int
    index: slice
    energy_slice: EnergySlice


def _theta_action(es: EnergySlice, nodes: int = ACTION_NODES):
    """Action as a function of ``u`` with ``x = t1 + L (1 - cos u)/2``.

    The substitution turns ``p dx`` into a smooth integrand, so plain
    cumulative Simpson is accurate to rounding.
    """
    t1, L = es.t1, es.t2 - es.t1
    u = np.linspace(0.0, np.pi, nodes)
    x = t1 + 0.5 * L * (1.0 - np.cos(u))
    integrand = es.p_at(x) * 0.5 * L * np.sin(u)
    return u, cumulative_simpson(integrand, x=u, initial=0.0)


def reduced_action(es: EnergySlice) -> ReducedAction:
    """Reduced action from the inner turning point across the allowed grid points."""
    u, S_u = _theta_action(es)
    spline = CubicSpline(u, S_u)
    index = es.classically_allowed
    x = es.x[index]
    L = es.t2 - es.t1
    theta = np.arccos(np.clip(1.0 - 2.0 * (x - es.t1) / L, -1.0, 1.0))
    return ReducedAction(x, spline(theta), es.p_at(x), es.t1, float(S_u[-1]), index)


def loop_action(es: EnergySlice) -> float:
    """``J = (closed loop) p dx = 2 S(t2)``."""
    return 2.0 * float(_theta_action(es)[1][-1])


def _window(es: EnergySlice) -> slice:
    return es.caustic_window(CAUSTIC_TRIM)


def wkb_pair(
    es: EnergySlice, I: float, W: float, hbar: float | None = None, shift: float = 0.0
) -> WkbPair:
    """``u1 = sqrt(2 I hbar/p) sin(S/hbar)``, ``u2 = sqrt(2 I hbar/p) cos(S/hbar + arccos(W/2I))``.

    ``S`` is measured from ``t1``. A constant ``shift`` added to ``S/hbar`` in
    both members (``pi/4`` reproduces the connection phase of the exact regular
    solution) leaves the Wronskian unchanged.

    Raises:
        ArccosDomain: ``|W/2I| > 1``.
    """
    hbar = es.hbar if hbar is None else hbar
    ratio = W / (2.0 * I)
    if abs(ratio) > 1.0:
        raise ArccosDomain(f"|W/2I| = {abs(ratio)} exceeds 1")
    act = reduced_action(es)
    win = _window(es)
    sub = slice(win.start - act.index.start, win.stop - act.index.start)
    S, p = act.S[sub], act.dS[sub]
    amp = np.sqrt(2.0 * I * hbar / p)
    u1 = amp * np.sin(S / hbar + shift)
    u2 = amp * np.cos(S / hbar + shift + math.acos(ratio))
    return WkbPair(es.x[win], u1, u2, float(I), float(W), p, S, float(hbar), win, es)


def schwarzian(f: np.ndarray, h: float) -> np.ndarray:
    """``f'''/f' - 1.5 (f''/f')^2``; NaN on the 3-point margins.

    Raises:
        DerivativeVanishes: ``|f'|`` below 1e-12 of its maximum somewhere inside.
    """
    f1, f2, f3 = d1(f, h), d2(f, h), d3(f, h)
    inner = slice(3, -3)
    if np.any(np.abs(f1[inner]) <= 1e-12 * np.max(np.abs(f1[inner]))):
        raise DerivativeVanishes("f' vanishes; Schwarzian undefined")
    out = f3 / f1 - 1.5 * (f2 / f1) ** 2
    out[:3] = out[-3:] = np.nan
    return out


def schwarzian_from_derivative(df: np.ndarray, h: float) -> np.ndarray:
    """Schwarzian of ``f`` given ``f'``: ``g''/g - 1.5 (g'/g)^2`` with ``g = f'``."""
    if np.any(np.abs(df) <= 1e-12 * np.max(np.abs(df))):
        raise DerivativeVanishes("f' vanishes; Schwarzian undefined")
    out = d2(df, h) / df - 1.5 * (d1(df, h) / df) ** 2
    out[:2] = out[-2:] = np.nan
    return out


def semiclassical_c_o(I: float, W: float) -> float:
    """Non-oscillating ``c`` for the WKB pair: ``-tan(arccos(W/2I)) / 2I``.

    Equal to ``c_o`` when ``W > 0`` and to ``-c_o`` when ``W < 0``.
    """
    ratio = W / (2.0 * I)
    if abs(ratio) > 1.0:
        raise ArccosDomain(f"|W/2I| = {abs(ratio)} exceeds 1")
    return -math.tan(math.acos(ratio)) / (2.0 * I)


def semiclassical_amp_phase(pair: WkbPair, params: ErmakovParams) -> tuple[np.ndarray, np.ndarray]:
    """Superpose the WKB pair like the exact one.

    The phase starts from ``S/hbar`` at the left end of the window so that it
    shares the origin of the action at ``t1``.
    """
    M = coefficient_matrix(params, pair.W)
    alpha = np.sqrt(np.clip(M.form(pair.u1_tilde, pair.u2_tilde), 0.0, None))
    h = pair.energy_slice.grid.h
    phi = pair.S[0] / pair.hbar + cumulative_simpson(alpha**-2.0, dx=h, initial=0.0)
    return alpha, phi


def modified_equation_residual(pair: WkbPair, which: int = 1) -> np.ndarray:
    """Residual of ``hbar^2 u'' + [p^2 + (hbar^2/2) <S;x>] u = 0`` for a WKB solution.

    Normalized by ``p^2`` times the local amplitude ``sqrt(2 I hbar/p)``;
    NaN on the stencil margins.
    """
    h = pair.energy_slice.grid.h
    u = pair.u1_tilde if which == 1 else pair.u2_tilde
    sch = schwarzian_from_derivative(pair.p, h)
    amp = np.sqrt(2.0 * pair.I * pair.hbar / pair.p)
    r = (pair.hbar**2 * d2(u, h) + (pair.p**2 + 0.5 * pair.hbar**2 * sch) * u) / (pair.p**2 * amp)
    r[:2] = r[-2:] = np.nan
    return r


def hbar_expansion(es: EnergySlice, hbar_eff: float, order: int = 2) -> ExpansionTerms:
    """Truncated expansion terms on the caustic-trimmed window.

    ``f0 = S`` and ``a0 = p^-1/2``. At order 2 the recurrences reduce to
    ``f2' = a0''/(2 a0 p)`` and
    ``a2 = -[int (2 a0' f2' + a0 f2'') / sqrt(p) dy] / (2 sqrt(p))``, both
    integrated from the left edge of the window. Stencils are taken on the
    whole allowed range before restricting to the window.
    """
    if order not in (0, 2):
        raise ValueError("order must be 0 or 2")
    if not hbar_eff > 0:
        raise ValueError("hbar_eff must be positive")
    act = reduced_action(es)
    h = es.grid.h
    p = act.dS
    a0 = p**-0.5
    df2 = d2(a0, h) / (2.0 * a0 * p)
    integrand = (2.0 * d1(a0, h) * df2 + a0 * d1(df2, h)) / np.sqrt(p)
    win = _window(es)
    sub = slice(win.start - act.index.start, win.stop - act.index.start)
    p, a0, df2, integrand = p[sub], a0[sub], df2[sub], integrand[sub]
    if order == 0:
        zeros = np.zeros_like(p)
        f2 = a2 = df2 = zeros
    else:
        f2 = cumulative_simpson(df2, dx=h, initial=0.0)
        a2 = -cumulative_simpson(integrand, dx=h, initial=0.0) / (2.0 * np.sqrt(p))
    return ExpansionTerms(es.x[win], a0, act.S[sub], a2, f2, df2, p, float(hbar_eff), order, win, es)


def _amplitude_and_momentum(terms: ExpansionTerms) -> tuple[np.ndarray, np.ndarray]:
    hb2 = terms.hbar_eff**2
    return terms.a0 + hb2 * terms.a2, terms.p + hb2 * terms.df2


def expansion_residual(terms: ExpansionTerms) -> np.ndarray:
    """Residual of ``u = a exp(iF/hbar)`` in ``hbar^2 u'' + p^2 u = 0``.

    With ``a`` and ``F'`` truncated at ``terms.order`` the residual is
    ``hbar^2 a'' + a (p^2 - F'^2) + i hbar (2 a' F' + a F'')``; its modulus is
    returned normalized by ``p^2 a`` (NaN on the stencil margins).
    """
    h = terms.energy_slice.grid.h
    hb = terms.hbar_eff
    a, dF = _amplitude_and_momentum(terms)
    re = hb**2 * d2(a, h) + a * (terms.p**2 - dF**2)
    im = hb * (2.0 * d1(a, h) * dF + a * d1(dF, h))
    r = np.hypot(re, im) / (terms.p**2 * np.abs(a))
    r[:2] = r[-2:] = np.nan
    return r


def expansion_fit(terms: ExpansionTerms, u_exact: np.ndarray) -> np.ndarray:
    """Best ``a sin(F/hbar + const)`` approximation of an exact solution on the window.

    The free amplitude and phase constant are fitted by linear least squares.
    """
    a, _ = _amplitude_and_momentum(terms)
    F = terms.f0 / terms.hbar_eff + terms.hbar_eff * terms.f2
    basis = np.column_stack([a * np.sin(F), a * np.cos(F)])
    coef, *_ = np.linalg.lstsq(basis, u_exact, rcond=None)
    return basis @ coef


def expansion_fit_error(terms: ExpansionTerms, u_exact: np.ndarray) -> float:
    """Max error of :func:`expansion_fit` relative to ``max|u_exact|``."""
    return float(np.max(np.abs(expansion_fit(terms, u_exact) - u_exact)) / np.max(np.abs(u_exact)))


def expanded_phase_bracket(I: float, W: float, c: float) -> float:
    """``2Ic + (I/W) (4 - W^2/I^2)^(1/2)``; zero at the non-oscillating ``c``."""
    rad = 4.0 - W * W / (I * I)
    if rad < -1e-14:
        raise ArccosDomain("W^2 > 4I^2")
    return 2.0 * I * c + (I / W) * math.sqrt(max(rad, 0.0))


def expanded_phase(terms: ExpansionTerms, I: float, W: float, c: float, hbar_eff: float | None = None) -> np.ndarray:
    """``phi = arccot(cot(theta) - B)`` with ``theta = S/hbar + hbar f2``.

    The branch is chosen continuous and so that ``phi - theta`` stays in the
    interval between 0 and ``2 arctan(B/2)``; at ``B = 0`` the phase is ``theta``.
    """
    hb = terms.hbar_eff if hbar_eff is None else hbar_eff
    theta = terms.f0 / hb + hb * terms.f2
    B = expanded_phase_bracket(I, W, c)
    s, co = np.sin(theta), np.cos(theta)
    raw = np.arctan2(s, co - B * s)
    dev = np.mod(raw - theta + np.pi, 2.0 * np.pi) - np.pi
    return theta + dev


def action_integrals(
    potential: PotentialSpec,
    grid: SpatialGrid,
    E: float,
    qmap: QuantumNumberMap,
    I: float = 1.0,
    c: float | None = None,
    dE: float = 1e-3,
) -> dict[str, float]:
    """Classical and quantal action integrals at ``E``.

    ``J_classical`` is the loop integral of ``p``, ``J_quantal = 2 hbar phi(s2, c)``
    (``c`` defaults to the non-oscillating branch), ``J_quantal_co = 2 pi hbar n(E)``
    and ``period = dJ_classical/dE`` by a centered difference.
    """
    hbar = potential.hbar
    es = evaluate_energy_slice(potential, grid, E)
    J = loop_action(es)
    Jp = loop_action(evaluate_energy_slice(potential, grid, E + dE))
    Jm = loop_action(evaluate_energy_slice(potential, grid, E - dE))
    pair = basis_at(potential, grid, E, qmap, I)
    if c is None:
        c, _ = nonoscillating_c(pair)
    ap = phase(pair, ErmakovParams(I, c))
    kappa_end = math.sqrt(max(-float(es.p_squared[ap.index.stop - 1]), 0.0)) / hbar
    phi_s2 = ap.phi_end + (float(ap.dphi[-1]) / (2.0 * kappa_end) if kappa_end > 0 else 0.0)
    J_quantal = 2.0 * hbar * phi_s2
    n = qmap.n(E)
    return {
        "E": float(E),
        "n": float(n),
        "c": float(c),
        "J_classical": J,
        "J_quantal": J_quantal,
        "J_quantal_co": 2.0 * math.pi * hbar * n,
        "offset": J_quantal - J,
        "period": (Jp - Jm) / (2.0 * dE),
    }


def count_oscillations(alpha: np.ndarray, pair: WkbPair) -> int:
    """Stationary points of a semiclassical amplitude on the window."""
    es = pair.energy_slice
    return len(stationary_points(alpha, es, pair.index))
