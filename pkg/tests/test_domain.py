import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milne.domain import (
    PotentialSpec,
    SpatialGrid,
    config_from_dict,
    evaluate_energy_slice,
    find_turning_points,
    load_config,
    local_de_broglie,
    read_table,
)
from milne.errors import (
    ConfigError,
    DegenerateTurningPoints,
    EnergyOutOfRange,
    GridBufferWarning,
    NoMinimum,
)


def test_grid_spacing_and_refinement():
    g = SpatialGrid(-12.0, 12.0, 4001)
    assert g.h == pytest.approx(0.006)
    assert g.x[0] == -12.0 and g.x[-1] == 12.0
    r = g.refined()
    assert r.n_points == 8001 and r.h == pytest.approx(g.h / 2)
    np.testing.assert_allclose(r.x[::2], g.x, atol=1e-13)


@pytest.mark.parametrize("args", [(-1.0, 1.0, 4), (-1.0, 1.0, 3), (1.0, -1.0, 11), (0.0, 0.0, 11)])
def test_grid_rejects_bad_shapes(args):
    with pytest.raises(ValueError):
        SpatialGrid(*args)


def test_grid_from_points_requires_uniform():
    assert SpatialGrid.from_points(np.linspace(0, 1, 11)).n_points == 11
    with pytest.raises(ValueError):
        SpatialGrid.from_points([0.0, 0.1, 0.3, 0.4, 0.5])


def test_grid_x_is_read_only():
    g = SpatialGrid(0.0, 1.0, 11)
    with pytest.raises(ValueError):
        g.x[0] = 3.0


def test_harmonic_turning_points(slice49):
    t1, t2 = find_turning_points(slice49)
    assert t2 == pytest.approx(math.sqrt(9.8), abs=1e-10)
    assert t1 == pytest.approx(-t2, abs=1e-10)


def test_allowed_slice_matches_sign_of_p2(slice49):
    inside = slice49.p_squared[slice49.classically_allowed]
    assert np.all(inside > 0)
    x = slice49.x[slice49.classically_allowed]
    assert x[0] > slice49.t1 and x[-1] < slice49.t2


def test_de_broglie_on_allowed_points(slice49):
    lam = local_de_broglie(slice49)
    x = slice49.x[slice49.classically_allowed]
    assert lam.shape == x.shape
    mid = np.argmin(np.abs(x))
    assert lam[mid] == pytest.approx(2 * math.pi / math.sqrt(9.8))
    assert np.all(np.diff(lam[: mid + 1]) < 0)


def test_energy_below_minimum(reference):
    pot, grid = reference
    with pytest.raises(EnergyOutOfRange):
        evaluate_energy_slice(pot, grid, -0.1)
    with pytest.raises(EnergyOutOfRange):
        evaluate_energy_slice(pot, grid, 0.0)


def test_energy_reaching_grid_edge(reference):
    pot, grid = reference
    with pytest.raises(EnergyOutOfRange):
        evaluate_energy_slice(pot, grid, 80.0)


def test_thin_buffer_warns(reference):
    pot, grid = reference
    with pytest.warns(GridBufferWarning):
        evaluate_energy_slice(pot, grid, 70.0)


def test_double_well_rejected():
    pot = PotentialSpec.polynomial([0.0, 0.0, -2.0, 0.0, 1.0])
    grid = SpatialGrid(-4.0, 4.0, 801)
    with pytest.raises(NoMinimum):
        pot.check_single_minimum(grid)
    with pytest.raises((DegenerateTurningPoints, NoMinimum)):
        evaluate_energy_slice(pot, grid, -0.5)


def test_with_hbar_keeps_classical_momentum(reference):
    pot, grid = reference
    es = evaluate_energy_slice(pot.with_hbar(0.5), grid, 4.9)
    base = evaluate_energy_slice(pot, grid, 4.9)
    assert es.hbar == 0.5
    np.testing.assert_allclose(es.p_squared, base.p_squared)
    np.testing.assert_allclose(local_de_broglie(es), 0.5 * local_de_broglie(base))


def test_polynomial_is_ascending():
    pot = PotentialSpec.polynomial([1.0, 0.0, 3.0])
    assert pot(2.0) == pytest.approx(13.0)


def test_tabulated_interpolates_smooth_data():
    x = np.linspace(-6, 6, 241)
    pot = PotentialSpec.tabulated(x, 0.5 * x**2)
    xs = np.linspace(-5, 5, 37)
    np.testing.assert_allclose(pot(xs), 0.5 * xs**2, rtol=2e-3, atol=2e-4)


def test_tabulated_grid_must_be_covered():
    x = np.linspace(-3, 3, 61)
    pot = PotentialSpec.tabulated(x, x**2)
    with pytest.raises(ValueError):
        pot.check_covers(SpatialGrid(-4.0, 4.0, 101))


@settings(max_examples=30, deadline=None)
@given(
    omega=st.floats(0.3, 3.0),
    frac=st.floats(0.05, 0.6),
)
def test_harmonic_turning_points_property(omega, frac):
    pot = PotentialSpec.harmonic(1.0, omega, 1.0)
    grid = SpatialGrid(-12.0, 12.0, 2001)
    E = frac * 0.5 * omega**2 * 144.0 * 0.5
    es = evaluate_energy_slice(pot, grid, E)
    t = math.sqrt(2 * E) / omega
    assert es.t1 == pytest.approx(-t, abs=1e-9)
    assert es.t2 == pytest.approx(t, abs=1e-9)


# --- configuration -----------------------------------------------------------


def test_load_harmonic_config(tmp_path):
    path = tmp_path / "h.json"
    path.write_text(json.dumps({
        "potential": {"type": "harmonic", "m": 2.0, "omega": 1.5},
        "grid": {"xmin": -5, "xmax": 5, "n": 101},
        "hbar": 0.5,
    }))
    pot, grid = load_config(path)
    assert (pot.mass, pot.omega, pot.hbar) == (2.0, 1.5, 0.5)
    assert grid.n_points == 101


def test_table_config_relative_path(tmp_path):
    (tmp_path / "v.csv").write_text("x,V\n" + "\n".join(f"{x},{x*x}" for x in np.linspace(-5, 5, 51)))
    pot, grid = config_from_dict(
        {"potential": {"type": "table", "file": "v.csv"}, "grid": {"xmin": -4, "xmax": 4, "n": 81}},
        tmp_path,
    )
    assert pot(1.0) == pytest.approx(1.0, abs=1e-2)


def test_read_table_needs_header(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1,2\n")
    with pytest.raises(ConfigError):
        read_table(p)
    p.write_text("x,V\n1,a\n")
    with pytest.raises(ConfigError):
        read_table(p)


@pytest.mark.parametrize(
    "cfg",
    [
        {},
        {"potential": {"type": "harmonic", "omega": 1}},
        {"potential": {"type": "cubic"}, "grid": {"xmin": -1, "xmax": 1, "n": 11}},
        {"potential": {"type": "harmonic", "omega": 1}, "grid": {"xmin": -1, "xmax": 1, "n": 10}},
        {"potential": {"type": "harmonic", "omega": -1}, "grid": {"xmin": -1, "xmax": 1, "n": 11}},
    ],
)
def test_bad_configs(cfg):
    with pytest.raises(ConfigError):
        config_from_dict(cfg)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")
