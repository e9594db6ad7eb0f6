"""Regular solutions of the linear equation ``hbar^2 u'' + p^2 u = 0``.

The two regular solutions are obtained by Numerov marches inward from the
forbidden grid edges. :func:`rescale_basis` then fixes their relative scale
and the Wronskian so that the pair is ready for the nonlinear superposition
in :mod:`milne.ermakov`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .domain import EnergySlice
from .errors import (
    EigenvalueDegenerate,
    InconsistentWronskian,
    IntegrationOverflow,
    NonFiniteInput,
)
from .finite_diff import d1

__all__ = [
    "LinearSolution",
    "BasisPair",
    "GFunction",
    "numerov",
    "integrate_regular",
    "wronskian_and_nodes",
    "envelope_balanced",
    "rescale_basis",
    "build_g",
    "solve_basis",
    "count_sign_changes",
    "trim_mask",
]

START_VALUE = 1e-30
RESCALE_AT = 1e100
RESCALE_BY = 1e-100
TRIM_LEVEL = 1e-12
WRONSKIAN_SPREAD_LIMIT = 1e-4
DEGENERATE_SIN = 1e-8

Side = Literal["left", "right"]


@dataclass(frozen=True)
class LinearSolution:
    """A solution sampled on the grid of ``energy_slice``.

    Attributes:
        values: u(x_i).
        derivative: du/dx from 5-point centered differences.
        regular_end: ``"left"`` (vanishes at x_min) or ``"right"``.
        node_count: sign changes on the open grid interval.
        log_scale: natural log of the total factor divided out of the raw march.
        energy_slice: kinematics the solution was integrated for.
    """

    values: np.ndarray
    derivative: np.ndarray
    regular_end: Side
    node_count: int
    log_scale: float
    energy_slice: EnergySlice

    def scaled(self, factor: float) -> LinearSolution:
        """Multiply by a nonzero constant; node count is unchanged."""
        return replace(
            self,
            values=self.values * factor,
            derivative=self.derivative * factor,
            log_scale=self.log_scale - math.log(abs(factor)),
        )

    def envelope(self, index: int) -> float:
        """Local oscillation envelope ``sqrt(u^2 + (hbar u'/p)^2)`` at an allowed index."""
        es = self.energy_slice
        p = math.sqrt(es.p_squared[index])
        return math.hypot(self.values[index], es.hbar * self.derivative[index] / p)


@dataclass(frozen=True)
class BasisPair:
    """Regular pair with stored Wronskian ``W = u1' u2 - u1 u2'`` and constant ``I``.

    ``kappa`` is the overall factor applied to the envelope-normalized ``u2``
    (it carries the sign flip when the raw Wronskian has the wrong sign) and
    ``scale`` the factor applied to ``u1``.
    """

    u1: LinearSolution
    u2: LinearSolution
    W: float
    I: float
    n_of_E: float
    kappa: float = 1.0
    scale: float = 1.0

    @property
    def energy_slice(self) -> EnergySlice:
        return self.u1.energy_slice

    @property
    def x(self) -> np.ndarray:
        return self.u1.energy_slice.x


@dataclass(frozen=True)
class GFunction:
    """Auxiliary solution ``g = 2I (u2/W - c u1)``, a quarter period behind ``u1``."""

    values: np.ndarray
    derivative: np.ndarray
    c: float


def count_sign_changes(values: np.ndarray) -> int:
    """Strict sign changes, ignoring exact zeros."""
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def numerov(k2: np.ndarray, h: float, reverse: bool = False) -> tuple[np.ndarray, float]:
    """March ``u'' = -k2 u`` from one end starting with ``(0, 1e-30)``.

    Whenever the newest value exceeds 1e100 in magnitude, the two active values
    are multiplied by 1e-100; the already stored history is rescaled at the end
    so the returned array is a single consistent solution.

    Args:
        k2: ``p^2 / hbar^2`` on the grid.
        h: grid step.
        reverse: march from the right end instead of the left.

    Returns:
        ``(u, log_scale)`` with ``log_scale`` the natural log of the total
        factor divided out.
    """
    k2 = np.asarray(k2, dtype=float)
    if not np.all(np.isfinite(k2)):
        raise NonFiniteInput("p^2 contains non-finite entries")
    q = k2[::-1] if reverse else k2
    f = (1.0 + h * h * q / 12.0).tolist()
    n = len(f)
    u = [0.0] * n
    u[1] = START_VALUE
    cuts = []
    for i in range(1, n - 1):
        if f[i + 1] == 0.0:
            raise IntegrationOverflow("Numerov weight vanished; grid step too coarse")
        nxt = ((12.0 - 10.0 * f[i]) * u[i] - f[i - 1] * u[i - 1]) / f[i + 1]
        u[i + 1] = nxt
        if abs(nxt) > RESCALE_AT:
            u[i] *= RESCALE_BY
            u[i + 1] *= RESCALE_BY
            cuts.append(i)
    arr = np.asarray(u)
    for i in cuts:
        arr[:i] *= RESCALE_BY
    if not np.all(np.isfinite(arr)):
        raise IntegrationOverflow("non-finite values in Numerov march")
    log_scale = len(cuts) * 100.0 * math.log(10.0)
    return (arr[::-1].copy() if reverse else arr), log_scale


def trim_mask(pair: BasisPair) -> np.ndarray:
    """Trimmed interior: ``max(|u1|, |u2|)`` above 1e-12 of its allowed-range peak.

    The pinned edge nodes are always excluded.
    """
    es = pair.energy_slice
    env = np.maximum(np.abs(pair.u1.values), np.abs(pair.u2.values))
    mask = env > TRIM_LEVEL * np.max(env[es.classically_allowed])
    mask[0] = mask[-1] = False
    return mask


def integrate_regular(es: EnergySlice, side: Side) -> LinearSolution:
    """Regular solution at the ``side`` edge, normalized to max 1 on the allowed range.

    The sign is chosen so the first lobe seen from the regular end is positive.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    k2 = np.asarray(es.p_squared) / es.hbar**2
    u, log_scale = numerov(k2, es.grid.h, reverse=side == "right")
    peak = np.max(np.abs(u[es.classically_allowed]))
    if not peak > 0:
        raise IntegrationOverflow("regular solution vanished on the allowed range")
    u = u / peak
    log_scale += math.log(peak)
    h = es.grid.h
    return LinearSolution(
        values=u,
        derivative=d1(u, h),
        regular_end=side,
        node_count=count_sign_changes(u[1:-1]),
        log_scale=log_scale,
        energy_slice=es,
    )


def _sample_indices(es: EnergySlice) -> np.ndarray:
    i = es.minimum_index
    lo = max(min(i - 2, es.grid.n_points - 5), 0)
    return np.arange(lo, lo + 5)


def wronskian_and_nodes(u1: LinearSolution, u2: LinearSolution) -> tuple[float, int]:
    """Mean Wronskian over the 5 points nearest the minimum, and the node count of u2.

    Raises:
        InconsistentWronskian: relative spread over the samples exceeds 1e-4.
    """
    if u1.values.shape != u2.values.shape:
        raise ValueError("solutions live on different grids")
    idx = _sample_indices(u1.energy_slice)
    a = u1.derivative[idx] * u2.values[idx]
    b = u1.values[idx] * u2.derivative[idx]
    w = a - b
    W = float(np.mean(w))
    # near eigenvalues W -> 0, so measure the spread against the term sizes
    ref = max(abs(W), float(np.max(np.abs(a) + np.abs(b))))
    if ref > 0 and np.ptp(w) / ref > WRONSKIAN_SPREAD_LIMIT:
        raise InconsistentWronskian(
            f"Wronskian spread {np.ptp(w) / ref:.3e} exceeds {WRONSKIAN_SPREAD_LIMIT}"
        )
    return W, u2.node_count


def envelope_balanced(
    u1: LinearSolution, u2: LinearSolution
) -> tuple[LinearSolution, LinearSolution, float]:
    """Scale both solutions to unit oscillation envelope at the potential minimum.

    Returns the pair and their Wronskian. This Wronskian is a smooth function
    of E whose zeros are the eigenvalues.
    """
    i = u1.energy_slice.minimum_index
    v1 = u1.scaled(1.0 / u1.envelope(i))
    v2 = u2.scaled(1.0 / u2.envelope(i))
    W, _ = wronskian_and_nodes(v1, v2)
    return v1, v2, W


def rescale_basis(u1: LinearSolution, u2: LinearSolution, I: float, n_of_E: float) -> BasisPair:
    """Fix the pair so that ``W = 2I sin(pi n(E))`` with equal envelopes.

    Both solutions are first brought to a unit envelope at the potential
    minimum. A common factor then sets ``|W|`` and ``u2`` absorbs the sign, so
    ``u2`` is multiplied by ``kappa`` in total and ``u1`` by ``scale``. With
    equal envelopes the superposition of :mod:`milne.ermakov` has the
    semiclassical amplitude ``sqrt(hbar/p)`` at the non-oscillating ``c``.

    Raises:
        EigenvalueDegenerate: ``|sin(pi n(E))| < 1e-8`` or the raw Wronskian vanishes.
    """
    if not I > 0:
        raise ValueError("I must be positive")
    target = 2.0 * I * math.sin(math.pi * n_of_E)
    if abs(math.sin(math.pi * n_of_E)) < DEGENERATE_SIN:
        raise EigenvalueDegenerate(f"n(E)={n_of_E} is an integer; W would vanish")
    i = u1.energy_slice.minimum_index
    e1, e2 = u1.envelope(i), u2.envelope(i)
    v1, v2, W0 = envelope_balanced(u1, u2)
    if W0 == 0.0:
        raise EigenvalueDegenerate("raw Wronskian vanishes")
    s = math.sqrt(abs(target / W0))
    sign = math.copysign(1.0, target / W0)
    w1 = v1.scaled(s)
    w2 = v2.scaled(s * sign)
    return BasisPair(w1, w2, target, float(I), float(n_of_E), kappa=s * sign / e2, scale=s / e1)


def build_g(pair: BasisPair, c: float) -> GFunction:
    """``g = 2I (u2/W - c u1)``; its Wronskian with ``u1`` is ``2I``."""
    k = 2.0 * pair.I
    vals = k * (pair.u2.values / pair.W - c * pair.u1.values)
    der = k * (pair.u2.derivative / pair.W - c * pair.u1.derivative)
    return GFunction(vals, der, float(c))


def solve_basis(es: EnergySlice, I: float, n_of_E: float) -> BasisPair:
    """Integrate both regular solutions and rescale them."""
    return rescale_basis(integrate_regular(es, "left"), integrate_regular(es, "right"), I, n_of_E)
