"""Nonlinear superposition: amplitude, phase and the non-oscillating parameter.

With a basis pair ``(u1, u2)`` of Wronskian ``W`` and an invariant ``I``, the
amplitude

    alpha^2 = m11 u1^2 + m22 u2^2 + 2 m12 u1 u2

solves ``hbar^2 alpha'' + p^2 alpha = hbar^2 / alpha^3`` for every real ``c``,
and the phase follows from ``phi' = alpha^-2``. Everything here works on the
trimmed interior of the grid (edge nodes, where ``alpha`` diverges, dropped).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .domain import EnergySlice
from .errors import (
    BandUndefined,
    ClampWarning,
    InvertedMismatch,
    NegativeQuadraticForm,
    PhaseUnwrapMismatch,
    RealityViolated,
    ReconstructionMismatch,
)
from .finite_diff import d1, d2
from .schrodinger import BasisPair, LinearSolution, build_g, trim_mask

__all__ = [
    "C_MAX",
    "ErmakovParams",
    "CoefficientMatrix",
    "AmplitudePhase",
    "CanonicalQ",
    "coefficient_matrix",
    "trimmed",
    "amplitude",
    "phase",
    "closed_form_phase",
    "c_nonoscillating",
    "nonoscillating_c",
    "milne_residual",
    "reconstruct_basis",
    "stationary_points",
    "canonical_Q",
    "q_at",
    "alpha_at",
    "closed_form_dphi",
    "zeros_of",
    "inverted_pair",
    "inverted_sign",
    "c_band",
    "phase_schwarzian",
    "forbidden_identity_residual",
    "kappa_transform",
]

C_MAX = 1e8
RADICAND_FLOOR = -1e-14
PHASE_TOL = 1e-5
PHASE_BAD_FRACTION = 1e-3
# largest phase increment per quadrature step before the grid is subdivided
PHASE_STEP = 0.02
MAX_SUBDIVISION = 256
RECONSTRUCT_TOL = 1e-6
INVERTED_TOL = 1e-8
DEAD_BAND = 1e-9


@dataclass(frozen=True)
class ErmakovParams:
    """Invariant ``I > 0`` and superposition parameter ``c`` (``|c| <= 1e8``)."""

    I: float
    c: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.I) and self.I > 0):
            raise ValueError("I must be positive and finite")
        if not math.isfinite(self.c):
            raise ValueError("c must be finite")
        if abs(self.c) > C_MAX:
            raise ValueError(f"|c| must not exceed {C_MAX}")

    @classmethod
    def clamped(cls, I: float, c: float) -> ErmakovParams:
        """Build with ``c`` clipped to ``[-C_MAX, C_MAX]``, warning when clipping."""
        if not math.isfinite(c) or abs(c) > C_MAX:
            warnings.warn(f"c={c} clamped to |c| <= {C_MAX}", ClampWarning, stacklevel=2)
            c = math.copysign(C_MAX, c) if not math.isnan(c) else C_MAX
        return cls(I, c)


@dataclass(frozen=True)
class CoefficientMatrix:
    """Symmetric coefficient matrix of the amplitude quadratic form."""

    m11: float
    m22: float
    m12: float

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12**2

    @property
    def trace(self) -> float:
        return self.m11 + self.m22

    def form(self, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
        return self.m11 * u1**2 + self.m22 * u2**2 + 2.0 * self.m12 * u1 * u2


@dataclass(frozen=True)
class AmplitudePhase:
    """Amplitude and phase on the trimmed interior ``index`` of the grid.

    ``phi`` starts at 0 at ``x_min`` and ``dphi = alpha^-2``.
    """

    x: np.ndarray
    alpha: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    params: ErmakovParams
    index: slice
    pair: BasisPair

    @property
    def phi_end(self) -> float:
        """Phase at the right trim boundary."""
        return float(self.phi[-1])


@dataclass(frozen=True)
class CanonicalQ:
    """``Q = alpha^2/(u1^2+u2^2) = lambda1 w1^2 + lambda2 w2^2`` on the trimmed interior."""

    lambda1: float
    lambda2: float
    q: np.ndarray
    w1sq: np.ndarray
    w2sq: np.ndarray


def coefficient_matrix(params: ErmakovParams, W: float) -> CoefficientMatrix:
    """``m11 = 1/2I + 2Ic^2``, ``m22 = 2I/W^2``, ``m12 = -2Ic/W``; ``det = W^-2``."""
    if W == 0 or not math.isfinite(W):
        raise ValueError("W must be finite and nonzero")
    I, c = params.I, params.c
    M = CoefficientMatrix(1.0 / (2.0 * I) + 2.0 * I * c * c, 2.0 * I / W**2, -2.0 * I * c / W)
    if not (M.m11 > 0 and M.det > 0):
        raise NegativeQuadraticForm(f"coefficient matrix not positive definite: {M}")
    return M


def trimmed(pair: BasisPair) -> slice:
    """Contiguous index range of the trimmed interior."""
    idx = np.flatnonzero(trim_mask(pair))
    return slice(int(idx[0]), int(idx[-1]) + 1)


def amplitude(pair: BasisPair, params: ErmakovParams, index: slice | None = None) -> np.ndarray:
    """``alpha(x, c)`` on the trimmed interior.

    Raises:
        NegativeQuadraticForm: radicand below -1e-14 relative to its diagonal part.
    """
    index = trimmed(pair) if index is None else index
    M = coefficient_matrix(params, pair.W)
    u1, u2 = pair.u1.values[index], pair.u2.values[index]
    rad = M.form(u1, u2)
    diag = M.m11 * u1**2 + M.m22 * u2**2
    if np.any(rad < RADICAND_FLOOR * diag):
        raise NegativeQuadraticForm("alpha^2 went negative; basis invariants broken")
    return np.sqrt(np.clip(rad, 0.0, None))


def closed_form_phase(u1: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Continuous branch of ``arctan(u1/g)``, assuming the phase never decreases."""
    theta = np.arctan2(u1, g)
    step = np.diff(theta)
    step = np.where(step < -np.pi, step + 2 * np.pi, step)
    return theta[0] + np.concatenate(([0.0], np.cumsum(step)))


def _mod_pi_distance(a: np.ndarray) -> np.ndarray:
    r = np.mod(a, np.pi)
    return np.minimum(r, np.pi - r)


def _integrate_phase(
    pair: BasisPair, params: ErmakovParams, index: slice, dphi: np.ndarray, h: float
) -> np.ndarray:
    """Cumulative Simpson of ``alpha^-2`` sampled back on the grid.

    For large ``|c|`` the amplitude dips sharply and ``alpha^-2`` can rise by
    a sizeable fraction of pi within one step. The grid is then subdivided
    uniformly, with ``u1, u2`` from Hermite splines built on the stored
    values and derivatives.
    """
    r = math.ceil(float(np.max(dphi)) * h / PHASE_STEP)
    if r <= 1:
        return cumulative_simpson(dphi, dx=h, initial=0.0)
    r = min(r + r % 2, MAX_SUBDIVISION)
    x = pair.x[index]
    fine = np.linspace(x[0], x[-1], r * (x.size - 1) + 1)
    u1 = CubicHermiteSpline(x, pair.u1.values[index], pair.u1.derivative[index])(fine)
    u2 = CubicHermiteSpline(x, pair.u2.values[index], pair.u2.derivative[index])(fine)
    rad = coefficient_matrix(params, pair.W).form(u1, u2)
    if np.any(rad <= 0):
        raise NegativeQuadraticForm("alpha vanishes between grid points")
    return cumulative_simpson(1.0 / rad, dx=h / r, initial=0.0)[::r]


def phase(pair: BasisPair, params: ErmakovParams, check: bool = True) -> AmplitudePhase:
    """Amplitude and unwrapped phase ``phi = int alpha^-2 dx`` with ``phi(x_min) = 0``.

    The phase is integrated with cumulative Simpson from the left trim
    boundary. The half-interval back to ``x_min``, where ``alpha^-2`` vanishes,
    is added by the trapezoid rule.

    Raises:
        PhaseUnwrapMismatch: the integrated phase disagrees modulo pi with
            ``arctan(u1/g)`` by more than 1e-5 at over 0.1% of the points.
    """
    index = trimmed(pair)
    alpha = amplitude(pair, params, index)
    if np.any(alpha <= 0):
        raise NegativeQuadraticForm("alpha vanishes on the trimmed interior")
    dphi = alpha**-2.0
    h = pair.energy_slice.grid.h
    phi = _integrate_phase(pair, params, index, dphi, h)
    phi += 0.5 * h * dphi[0] * (index.start > 0)
    if check:
        g = build_g(pair, params.c).values[index]
        bad = _mod_pi_distance(phi - np.arctan(pair.u1.values[index] / g)) > PHASE_TOL
        if np.count_nonzero(bad) > PHASE_BAD_FRACTION * phi.size:
            raise PhaseUnwrapMismatch(
                f"integrated phase off the closed form at {np.count_nonzero(bad)} of {phi.size} points"
            )
    return AmplitudePhase(pair.x[index], alpha, phi, dphi, params, index, pair)


def c_nonoscillating(I: float, W: float, sign: int = -1) -> float:
    """``c_o = -[W^-2 - (2I)^-2]^(1/2)``; ``sign=+1`` returns ``-c_o``.

    ``W^2 = 4I^2`` (to rounding) gives 0.

    Raises:
        RealityViolated: ``W^2 > 4I^2``.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1")
    gap = 4.0 * I * I - W * W
    if gap < -1e-14 * 4.0 * I * I:
        raise RealityViolated(f"W^2={W * W} exceeds 4I^2={4 * I * I}")
    rad = max(1.0 / W**2 - 1.0 / (4.0 * I * I), 0.0)
    return sign * math.sqrt(rad)


def stationary_points(alpha: np.ndarray, es: EnergySlice, index: slice) -> list[tuple[float, str]]:
    """Interior extrema of ``alpha`` strictly between the turning points.

    The slope is the centered difference; slopes below 1e-9 of the largest
    slope in the window are ignored.
    """
    x = es.x[index]
    inside = (x > es.t1) & (x < es.t2)
    slope = np.gradient(alpha)[inside]
    xs = x[inside]
    keep = np.abs(slope) > DEAD_BAND * np.max(np.abs(slope))
    slope, xs = slope[keep], xs[keep]
    sgn = np.sign(slope)
    flips = np.flatnonzero(sgn[1:] != sgn[:-1])
    return [
        (0.5 * (xs[k] + xs[k + 1]), "min" if sgn[k] < 0 else "max") for k in flips
    ]


def nonoscillating_c(pair: BasisPair) -> tuple[float, dict[float, int]]:
    """Pick the branch of ``+/-c_o`` whose amplitude has one stationary point.

    Returns the chosen ``c`` and the stationary-point count for both branches.
    When neither branch has exactly one, the branch with fewer is returned.
    """
    es = pair.energy_slice
    index = trimmed(pair)
    counts = {}
    for sign in (-1, 1):
        c = c_nonoscillating(pair.I, pair.W, sign)
        counts[c] = len(stationary_points(amplitude(pair, ErmakovParams(pair.I, c), index), es, index))
    best = min(counts, key=lambda c: (counts[c] != 1, counts[c]))
    return best, counts


def milne_residual(
    alpha: np.ndarray, es: EnergySlice, hbar: float | None = None, index: slice = slice(None)
) -> np.ndarray:
    """Normalized residual of ``hbar^2 alpha'' + p^2 alpha - hbar^2/alpha^3``.

    The normalizer is ``max(|p^2 alpha|, hbar^2/alpha^3)`` so the residual stays
    meaningful at the turning points. The two stencil-margin points at each
    end are NaN.
    """
    hbar = es.hbar if hbar is None else hbar
    p2 = np.asarray(es.p_squared)[index]
    a2 = d2(alpha, es.grid.h)
    cube = hbar**2 / alpha**3
    r = (hbar**2 * a2 + p2 * alpha - cube) / np.maximum(np.abs(p2 * alpha), cube)
    r[:2] = r[-2:] = np.nan
    return r


def reconstruct_basis(ap: AmplitudePhase, I: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``u1 = sqrt(2I) alpha sin(phi)`` and ``g = sqrt(2I) alpha cos(phi)``.

    Both are compared with the stored ``u1`` and :func:`milne.schrodinger.build_g`
    after fixing one global factor (in practice a sign) at the potential minimum.

    Raises:
        ReconstructionMismatch: relative max-norm error above 1e-6.
    """
    I = ap.params.I if I is None else I
    k = math.sqrt(2.0 * I)
    u1_rec = k * ap.alpha * np.sin(ap.phi)
    g_rec = k * ap.alpha * np.cos(ap.phi)
    pair = ap.pair
    u1 = pair.u1.values[ap.index]
    g = build_g(pair, ap.params.c).values[ap.index]
    j = pair.energy_slice.minimum_index - ap.index.start
    ref = u1_rec if abs(u1_rec[j]) > abs(g_rec[j]) else g_rec
    tgt = u1 if ref is u1_rec else g
    factor = tgt[j] / ref[j]
    u1_rec, g_rec = factor * u1_rec, factor * g_rec
    err = max(
        np.max(np.abs(u1_rec - u1)) / np.max(np.abs(u1)),
        np.max(np.abs(g_rec - g)) / np.max(np.abs(g)),
    )
    if not err <= RECONSTRUCT_TOL:
        raise ReconstructionMismatch(f"reconstruction error {err:.3e} exceeds {RECONSTRUCT_TOL}")
    return u1_rec, g_rec


def canonical_Q(pair: BasisPair, params: ErmakovParams, index: slice | None = None) -> CanonicalQ:
    """Diagonalize the 2x2 coefficient matrix and evaluate ``Q`` on the trimmed interior."""
    index = trimmed(pair) if index is None else index
    M = coefficient_matrix(params, pair.W)
    half = 0.5 * M.trace
    disc = math.hypot(0.5 * (M.m11 - M.m22), M.m12)
    lam1, lam2 = half + disc, half - disc
    u1, u2 = pair.u1.values[index], pair.u2.values[index]
    norm2 = u1**2 + u2**2
    if disc == 0.0:
        ones = np.ones_like(norm2)
        return CanonicalQ(lam1, lam2, lam1 * ones, ones, np.zeros_like(norm2))
    # eigenvector of lam1, from whichever row is better conditioned
    a = np.array([M.m12, lam1 - M.m11])
    b = np.array([lam1 - M.m22, M.m12])
    e1 = a if np.linalg.norm(a) >= np.linalg.norm(b) else b
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.array([-e1[1], e1[0]])
    v1 = e1[0] * u1 + e1[1] * u2
    v2 = e2[0] * u1 + e2[1] * u2
    w1sq, w2sq = v1**2 / norm2, v2**2 / norm2
    return CanonicalQ(lam1, lam2, lam1 * w1sq + lam2 * w2sq, w1sq, w2sq)


def zeros_of(sol: LinearSolution, lo: float, hi: float) -> np.ndarray:
    """Zeros of a solution in ``(lo, hi)``, refined by cubic-spline roots."""
    x = sol.energy_slice.x
    window = np.flatnonzero((x > lo) & (x < hi))
    sl = slice(max(window[0] - 3, 0), min(window[-1] + 4, x.size))
    spline = CubicSpline(x[sl], sol.values[sl])
    roots = spline.roots(extrapolate=False)
    return roots[(roots > lo) & (roots < hi)]


def q_at(pair: BasisPair, params: ErmakovParams, xs: np.ndarray) -> np.ndarray:
    """``Q(x, c)`` at off-grid points, with ``u1, u2`` interpolated by cubic splines."""
    x = pair.x
    index = trimmed(pair)
    u1 = CubicSpline(x[index], pair.u1.values[index])(xs)
    u2 = CubicSpline(x[index], pair.u2.values[index])(xs)
    M = coefficient_matrix(params, pair.W)
    return M.form(u1, u2) / (u1**2 + u2**2)


def alpha_at(pair: BasisPair, params: ErmakovParams, xs: np.ndarray) -> np.ndarray:
    """``alpha(x, c)`` at off-grid points from spline-interpolated ``u1, u2``."""
    x = pair.x
    index = trimmed(pair)
    u1 = CubicSpline(x[index], pair.u1.values[index])(xs)
    u2 = CubicSpline(x[index], pair.u2.values[index])(xs)
    return np.sqrt(coefficient_matrix(params, pair.W).form(u1, u2))


def closed_form_dphi(pair: BasisPair, c: float, index: slice) -> np.ndarray:
    """``d/dx arctan(u1/g) = (u1' g - u1 g')/(u1^2 + g^2)`` from the stored derivatives."""
    g = build_g(pair, c)
    u1, du1 = pair.u1.values[index], pair.u1.derivative[index]
    gv, dg = g.values[index], g.derivative[index]
    return (du1 * gv - u1 * dg) / (u1**2 + gv**2)


def inverted_sign(pair: BasisPair, c: float) -> float:
    """Sign linking the inverted phase to the direct one.

    It is ``sign(g(s1)) * sign(gbar(s2))`` with ``g = 2I(u2/W - c u1)``. In the
    reflected coordinate ``-x`` the pair ``(u2, u1)`` again has Wronskian ``W``,
    so ``gbar = 2I u1/W`` at the right edge. Both are taken at the trim
    boundaries.
    """
    index = trimmed(pair)
    g_left = build_g(pair, c).values[index.start]
    gbar_right = 2.0 * pair.I * pair.u1.values[index.stop - 1] / pair.W
    return float(np.sign(g_left) * np.sign(gbar_right))


def inverted_pair(
    pair: BasisPair, params_bar: ErmakovParams, direct: AmplitudePhase | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude and phase with the roles of ``u1`` and ``u2`` exchanged.

    ``phibar(x) = int_x^{x_max} alphabar^-2 dx`` accumulates from the right.
    If ``direct`` is given (the pair evaluated at ``c = -cbar``) and
    ``cbar^2 = W^-2 - (2I)^-2``, the two amplitudes must coincide.

    Raises:
        InvertedMismatch: amplitudes differ by more than 1e-8 relative at ``+/-c_o``.
    """
    index = trimmed(pair)
    I, cb, W = params_bar.I, params_bar.c, pair.W
    u1, u2 = pair.u1.values[index], pair.u2.values[index]
    rad = (0.5 / I + 2.0 * I * cb * cb) * u2**2 + (2.0 * I / W**2) * u1**2 + (4.0 * I * cb / W) * u1 * u2
    abar = np.sqrt(np.clip(rad, 0.0, None))
    dphibar = abar**-2.0
    h = pair.energy_slice.grid.h
    rev = cumulative_simpson(dphibar[::-1], dx=h, initial=0.0)
    phibar = rev[::-1] + 0.5 * h * dphibar[-1]
    if direct is not None:
        on_branch = abs(cb * cb - (1.0 / W**2 - 0.25 / I**2)) <= 1e-10 * max(cb * cb, 1.0 / W**2)
        if on_branch and math.isclose(direct.params.c, -cb, rel_tol=1e-12, abs_tol=1e-300):
            err = np.max(np.abs(abar - direct.alpha) / direct.alpha)
            if err > INVERTED_TOL:
                raise InvertedMismatch(f"inverted amplitude differs by {err:.3e} at c = +/-c_o")
    return abar, phibar


def c_band(pair: BasisPair, I: float, x: float) -> tuple[float, float]:
    """Interval of ``c`` for which ``alpha^2(x, c) < hbar/p(x)``.

    ``c_pm = u2/(W u1) -/+ [2I hbar/p - u1^2]^(1/2) / (2I u1)``, ordered so that
    the first entry is the lower bound.

    Raises:
        BandUndefined: ``u1(x) = 0`` or the radicand is negative.
    """
    es = pair.energy_slice
    if not es.t1 < x < es.t2:
        raise BandUndefined(f"x={x} is not strictly inside ({es.t1}, {es.t2})")
    index = trimmed(pair)
    xs = pair.x[index]
    u1 = float(CubicSpline(xs, pair.u1.values[index])(x))
    u2 = float(CubicSpline(xs, pair.u2.values[index])(x))
    p = float(es.p_at(x))
    if u1 == 0.0:
        raise BandUndefined("u1 vanishes at x")
    rad = 2.0 * I * es.hbar / p - u1 * u1
    if rad < 0:
        raise BandUndefined(f"band radicand {rad:.3e} is negative")
    centre = u2 / (pair.W * u1)
    half = math.sqrt(rad) / abs(2.0 * I * u1)
    return centre - half, centre + half


def phase_schwarzian(dphi: np.ndarray, h: float) -> np.ndarray:
    """Schwarzian of ``phi`` from its derivative: ``g''/g - 1.5 (g'/g)^2`` with ``g = phi'``."""
    return d2(dphi, h) / dphi - 1.5 * (d1(dphi, h) / dphi) ** 2


def forbidden_identity_residual(ap: AmplitudePhase, es: EnergySlice) -> tuple[np.ndarray, np.ndarray]:
    """Residual of ``(1/2)<phi;x> = p^2/hbar^2 - phi'^2`` on the trimmed interior.

    Returns ``(residual, schwarzian)``; the residual is normalized by
    ``max(p^2/hbar^2, phi'^2)`` and NaN on the stencil margins. In the forbidden
    region the identity forces ``<phi;x> < 0``.
    """
    k2 = np.asarray(es.p_squared)[ap.index] / es.hbar**2
    sch = phase_schwarzian(ap.dphi, es.grid.h)
    r = (0.5 * sch - k2 + ap.dphi**2) / np.maximum(np.abs(k2), ap.dphi**2)
    r[:2] = r[-2:] = np.nan
    return r, sch


def kappa_transform(pair: BasisPair, params: ErmakovParams, kappa: float) -> tuple[BasisPair, ErmakovParams]:
    """Apply ``u1 -> k u1, W -> k W, I -> k^2 I, c -> c/k^2``, which leaves ``alpha, phi`` fixed."""
    new_pair = replace(pair, u1=pair.u1.scaled(kappa), W=pair.W * kappa, I=pair.I * kappa**2)
    return new_pair, ErmakovParams(params.I * kappa**2, params.c / kappa**2)
