"""Grids, single-minimum potentials and per-energy kinematics."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.optimize import bisect

from .errors import (
    ConfigError,
    DegenerateTurningPoints,
    EnergyOutOfRange,
    GridBufferWarning,
    NoMinimum,
)

#: |p^2| below this fraction of max|p^2| on the grid counts as zero.
SIGN_TOLERANCE = 1e-12
#: Minimum number of e-foldings between a turning point and the grid edge.
MIN_EFOLDS = 5.0


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid ``x_min, x_min + h, ..., x_max`` with an odd point count."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min={self.x_min} must be < x_max={self.x_max}")
        if int(self.n_points) != self.n_points or self.n_points < 5:
            raise ValueError("n_points must be an integer >= 5")
        if self.n_points % 2 == 0:
            raise ValueError("n_points must be odd (composite Simpson end to end)")

    @classmethod
    def from_points(cls, x: Sequence[float]) -> SpatialGrid:
        """Build from explicit nodes; non-uniform spacing is rejected."""
        x = np.asarray(x, dtype=float)
        steps = np.diff(x)
        if x.size < 2 or np.any(steps <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if not np.allclose(steps, steps.mean(), rtol=1e-9, atol=0.0):
            raise ValueError("non-uniform grids are not supported")
        return cls(float(x[0]), float(x[-1]), int(x.size))

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @cached_property
    def x(self) -> np.ndarray:
        nodes = np.linspace(self.x_min, self.x_max, self.n_points)
        nodes.flags.writeable = False
        return nodes

    def refined(self) -> SpatialGrid:
        """Same interval with the step halved."""
        return SpatialGrid(self.x_min, self.x_max, 2 * self.n_points - 1)


@dataclass(frozen=True)
class PotentialSpec:
    """A single-minimum potential ``V(x)`` with particle mass and hbar.

    ``kind`` is one of ``"harmonic"``, ``"polynomial"`` (ascending
    coefficients, ``V = sum c_k x**k``) or ``"tabulated"`` (monotone cubic
    interpolation through samples).
    """

    kind: str
    mass: float = 1.0
    hbar: float = 1.0
    omega: float | None = None
    coeffs: tuple[float, ...] = ()
    table_x: tuple[float, ...] = ()
    table_v: tuple[float, ...] = ()
    _interp: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ("harmonic", "polynomial", "tabulated"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValueError("mass must be positive and finite")
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise ValueError("hbar must be positive and finite")
        if self.kind == "harmonic" and not (self.omega and self.omega > 0):
            raise ValueError("harmonic potential needs omega > 0")
        if self.kind == "polynomial" and len(self.coeffs) < 3:
            raise ValueError("polynomial potential needs at least a quadratic term")
        if self.kind == "tabulated":
            tx, tv = np.asarray(self.table_x), np.asarray(self.table_v)
            if tx.size < 4 or tx.size != tv.size:
                raise ValueError("tabulated potential needs >= 4 matching (x, V) samples")
            if np.any(np.diff(tx) <= 0):
                raise ValueError("tabulated x samples must be strictly increasing")
            object.__setattr__(self, "_interp", PchipInterpolator(tx, tv, extrapolate=False))

    @classmethod
    def harmonic(cls, m: float = 1.0, omega: float = 1.0, hbar: float = 1.0) -> PotentialSpec:
        return cls("harmonic", mass=m, hbar=hbar, omega=omega)

    @classmethod
    def polynomial(cls, coeffs: Sequence[float], mass: float = 1.0, hbar: float = 1.0) -> PotentialSpec:
        return cls("polynomial", mass=mass, hbar=hbar, coeffs=tuple(float(c) for c in coeffs))

    @classmethod
    def tabulated(
        cls, x: Sequence[float], v: Sequence[float], mass: float = 1.0, hbar: float = 1.0
    ) -> PotentialSpec:
        return cls(
            "tabulated",
            mass=mass,
            hbar=hbar,
            table_x=tuple(float(t) for t in x),
            table_v=tuple(float(t) for t in v),
        )

    def with_hbar(self, hbar: float) -> PotentialSpec:
        return PotentialSpec(
            self.kind, self.mass, hbar, self.omega, self.coeffs, self.table_x, self.table_v
        )

    def __call__(self, x: np.ndarray | float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "harmonic":
            return 0.5 * self.mass * self.omega**2 * x**2
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(x, self.coeffs)
        return self._interp(x)

    def check_covers(self, grid: SpatialGrid) -> None:
        if self.kind == "tabulated":
            lo, hi = self.table_x[0], self.table_x[-1]
            if lo > grid.x_min or hi < grid.x_max:
                raise ValueError(
                    f"table covers [{lo}, {hi}] but grid needs [{grid.x_min}, {grid.x_max}]"
                )

    def check_single_minimum(self, grid: SpatialGrid) -> int:
        """Return the grid index of the unique interior minimum.

        Raises:
            NoMinimum: the finite-difference slope does not change sign
                exactly once, from negative to positive.
        """
        self.check_covers(grid)
        v = self(grid.x)
        slope = np.sign(np.diff(v))
        slope = slope[slope != 0]
        flips = np.flatnonzero(slope[1:] != slope[:-1])
        if slope.size == 0 or flips.size != 1 or slope[0] > 0:
            raise NoMinimum(f"{self.kind} potential is not single-minimum on the grid")
        return int(np.argmin(v))


@dataclass(frozen=True)
class EnergySlice:
    """Kinematics at a fixed energy: ``p^2 = 2m(E - V)`` and turning points."""

    E: float
    p_squared: np.ndarray
    t1: float
    t2: float
    classically_allowed: slice
    grid: SpatialGrid
    potential: PotentialSpec

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def hbar(self) -> float:
        return self.potential.hbar

    @property
    def mass(self) -> float:
        return self.potential.mass

    @cached_property
    def minimum_index(self) -> int:
        return int(np.argmin(self.potential(self.grid.x)))

    def p_at(self, x: np.ndarray | float) -> np.ndarray:
        """Classical momentum at arbitrary points of the allowed region."""
        p2 = 2.0 * self.mass * (self.E - self.potential(x))
        return np.sqrt(np.clip(p2, 0.0, None))

    def caustic_window(self, fraction: float = 0.1) -> slice:
        """Grid indices in ``[t1 + d, t2 - d]`` with ``d = fraction * (t2 - t1)``."""
        d = fraction * (self.t2 - self.t1)
        inside = np.flatnonzero((self.x >= self.t1 + d) & (self.x <= self.t2 - d))
        return slice(int(inside[0]), int(inside[-1]) + 1)

    def mid_well(self) -> slice:
        """Middle half of ``(t1, t2)``."""
        return self.caustic_window(0.25)


def _sign_pattern(p2: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(p2))
    s = np.sign(p2)
    s[np.abs(p2) <= SIGN_TOLERANCE * scale] = 0
    return s


def _turning_points(potential: PotentialSpec, grid: SpatialGrid, E: float, p2: np.ndarray):
    s = _sign_pattern(p2)
    nz = np.flatnonzero(s)
    changes = [(nz[k], nz[k + 1]) for k in range(nz.size - 1) if s[nz[k]] != s[nz[k + 1]]]
    if len(changes) != 2 or s[nz[0]] > 0:
        raise DegenerateTurningPoints(
            f"expected exactly two sign changes of p^2 at E={E}, found {len(changes)}"
        )
    x = grid.x
    roots = []
    for i, j in changes:
        a, b = x[i], x[j]
        if j - i > 1:
            # an exact zero (or sub-threshold values) sits between the brackets
            roots.append(float(x[(i + j) // 2]) if j - i == 2 else 0.5 * (a + b))
            continue
        xtol = 1e-12 * max(abs(a), abs(b), grid.h)
        roots.append(bisect(lambda t: E - float(potential(t)), a, b, xtol=xtol, maxiter=200))
    (i1, _), (_, j2) = changes
    allowed = slice(int(changes[0][1]), int(changes[1][0]) + 1)
    return roots[0], roots[1], allowed


def _efolds(p2: np.ndarray, x: np.ndarray, hbar: float, side: slice) -> float:
    kappa = np.sqrt(np.clip(-p2[side], 0.0, None)) / hbar
    return float(trapezoid(kappa, x[side])) if kappa.size > 1 else 0.0


def evaluate_energy_slice(potential: PotentialSpec, grid: SpatialGrid, E: float) -> EnergySlice:
    """Sample ``p^2(x, E)`` on the grid and bracket both turning points.

    Raises:
        EnergyOutOfRange: ``E`` is not strictly below ``V`` at both grid edges
            or not above the potential minimum.
        NoMinimum: the potential is not single-minimum on the grid.
    """
    if not math.isfinite(E):
        raise EnergyOutOfRange("energy must be finite")
    imin = potential.check_single_minimum(grid)
    v = potential(grid.x)
    if E <= v[imin]:
        raise EnergyOutOfRange(f"E={E} is not above the potential minimum {v[imin]}")
    if E >= v[0] or E >= v[-1]:
        raise EnergyOutOfRange(
            f"E={E} reaches V at a grid edge (V(x_min)={v[0]}, V(x_max)={v[-1]}); no forbidden buffer"
        )
    p2 = 2.0 * potential.mass * (E - v)
    p2.flags.writeable = False
    t1, t2, allowed = _turning_points(potential, grid, E, p2)
    x = grid.x
    for name, side in (("left", slice(0, allowed.start)), ("right", slice(allowed.stop, None))):
        n = _efolds(p2, x, potential.hbar, side)
        if n < MIN_EFOLDS:
            warnings.warn(
                f"only {n:.2f} e-foldings between the {name} turning point and the grid edge",
                GridBufferWarning,
                stacklevel=2,
            )
    return EnergySlice(float(E), p2, t1, t2, allowed, grid, potential)


def find_turning_points(es: EnergySlice) -> tuple[float, float]:
    """Refine the roots of ``E - V`` bracketed by sign changes of ``p^2``.

    Raises:
        DegenerateTurningPoints: not exactly two resolvable sign changes.
    """
    t1, t2, _ = _turning_points(es.potential, es.grid, es.E, np.asarray(es.p_squared))
    return t1, t2


def local_de_broglie(es: EnergySlice) -> np.ndarray:
    """``2 pi hbar / p`` on the classically allowed grid points."""
    p = np.sqrt(es.p_squared[es.classically_allowed])
    return 2.0 * np.pi * es.hbar / p


# ---------------------------------------------------------------------------
# configuration


def read_table(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column ``x,V`` CSV with a header row."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"potential table {path} not found")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ConfigError(f"{path}: expected a header row and data rows")
    try:
        data = np.array([[float(a), float(b)] for a, b, *_ in rows[1:] if a.strip()])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from None
    return data[:, 0], data[:, 1]


def config_from_dict(cfg: dict, base_dir: Path | None = None) -> tuple[PotentialSpec, SpatialGrid]:
    try:
        pot = cfg["potential"]
        g = cfg["grid"]
        hbar = float(cfg.get("hbar", 1.0))
        grid = SpatialGrid(float(g["xmin"]), float(g["xmax"]), int(g["n"]))
        kind = pot["type"]
        if kind == "harmonic":
            potential = PotentialSpec.harmonic(float(pot.get("m", 1.0)), float(pot["omega"]), hbar)
        elif kind == "polynomial":
            potential = PotentialSpec.polynomial(pot["coeffs"], float(pot.get("m", 1.0)), hbar)
        elif kind == "table":
            table = Path(pot["file"])
            if not table.is_absolute() and base_dir is not None:
                table = base_dir / table
            tx, tv = read_table(table)
            potential = PotentialSpec.tabulated(tx, tv, float(pot.get("m", 1.0)), hbar)
        else:
            raise ConfigError(f"unknown potential type {kind!r}")
        potential.check_covers(grid)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    return potential, grid


def load_config(path: str | Path) -> tuple[PotentialSpec, SpatialGrid]:
    """Load ``(potential, grid)`` from the JSON run configuration."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(cfg, path.parent)


def reference_config() -> tuple[PotentialSpec, SpatialGrid]:
    """Harmonic m = omega = hbar = 1 on [-12, 12] with 4001 points."""
    return PotentialSpec.harmonic(1.0, 1.0, 1.0), SpatialGrid(-12.0, 12.0, 4001)
