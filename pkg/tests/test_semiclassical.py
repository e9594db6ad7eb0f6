import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milne.domain import evaluate_energy_slice
from milne.errors import ArccosDomain, DerivativeVanishes
from milne.ermakov import ErmakovParams
from milne.schrodinger import integrate_regular
from milne.semiclassical import (
    action_integrals,
    count_oscillations,
    expanded_phase,
    expanded_phase_bracket,
    expansion_fit_error,
    expansion_residual,
    hbar_expansion,
    loop_action,
    modified_equation_residual,
    reduced_action,
    schwarzian,
    semiclassical_amp_phase,
    semiclassical_c_o,
    wkb_pair,
)


def test_reduced_action_harmonic(slice49):
    act = reduced_action(slice49)
    # S(t1 -> 0) is a quarter of the loop: pi E / 2 for the unit oscillator
    j = np.argmin(np.abs(act.x))
    assert act.x[j] == pytest.approx(0.0, abs=1e-12)
    assert act.S[j] == pytest.approx(math.pi * 4.9 / 2, rel=1e-12)
    assert act.total == pytest.approx(math.pi * 4.9, rel=1e-12)
    assert loop_action(slice49) == pytest.approx(2 * math.pi * 4.9, rel=1e-12)


def test_wkb_wronskian(slice49):
    W = 2 * math.sin(math.pi * 4.4)
    wp = wkb_pair(slice49, 1.0, W)
    h = slice49.grid.h
    w = np.gradient(wp.u1_tilde, h) * wp.u2_tilde - wp.u1_tilde * np.gradient(wp.u2_tilde, h)
    np.testing.assert_allclose(w[3:-3], W, rtol=1e-3)


def test_wkb_domain_error(slice49):
    with pytest.raises(ArccosDomain):
        wkb_pair(slice49, 1.0, 2.5)


def test_wkb_with_connection_phase_matches_exact(reference):
    pot, grid = reference
    E = 12.9
    es = evaluate_energy_slice(pot, grid, E)
    wp = wkb_pair(es, 1.0, 2 * math.sin(math.pi * 12.4), shift=math.pi / 4)
    u = integrate_regular(es, "left").values[wp.index]
    mid = np.abs(wp.x) < 0.5 * es.t2
    k = np.dot(u[mid], wp.u1_tilde[mid]) / np.dot(wp.u1_tilde[mid], wp.u1_tilde[mid])
    err = np.max(np.abs(k * wp.u1_tilde[mid] - u[mid])) / np.max(np.abs(u[mid]))
    assert err < 0.02


@settings(max_examples=40, deadline=None)
@given(I=st.floats(0.2, 5.0), frac=st.floats(-0.99, 0.99).filter(lambda f: abs(f) > 0.01))
def test_semiclassical_c_o_formula(I, frac):
    W = frac * 2 * I
    c = semiclassical_c_o(I, W)
    expected = -math.sqrt(max(1 / W**2 - 1 / (4 * I * I), 0.0)) * math.copysign(1, W)
    assert c == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_semiclassical_non_oscillating(slice49):
    W = 2 * math.sin(math.pi * 4.4)
    wp = wkb_pair(slice49, 1.0, W)
    co = semiclassical_c_o(1.0, W)
    a, phi = semiclassical_amp_phase(wp, ErmakovParams(1.0, co))
    np.testing.assert_allclose(a**2 * wp.p, 1.0, atol=1e-12)
    np.testing.assert_allclose(phi, wp.S, atol=1e-9)
    counts = [count_oscillations(semiclassical_amp_phase(wp, ErmakovParams(1.0, c))[0], wp) for c in (co, 0.3)]
    # sqrt(hbar/p) has its single minimum at the bottom of the well
    assert counts[0] == 1 and counts[1] > 4


def test_modified_equation_residual(slice49):
    wp = wkb_pair(slice49, 1.0, 1.0)
    r = modified_equation_residual(wp, 1)
    assert np.nanmax(np.abs(r)) < 1e-6


def test_schwarzian_of_mobius_vanishes():
    x = np.linspace(0.0, 1.0, 201)
    f = (2 * x + 1) / (x + 3)
    s = schwarzian(f, x[1] - x[0])
    assert np.nanmax(np.abs(s)) < 1e-6
    with pytest.raises(DerivativeVanishes):
        schwarzian(np.ones_like(x), x[1] - x[0])


def test_schwarzian_of_tan():
    x = np.linspace(-1.0, 1.0, 401)
    s = schwarzian(np.tan(x), x[1] - x[0])
    np.testing.assert_allclose(s[3:-3], 2.0, atol=1e-5)


def test_order2_improves_on_order0(slice49):
    t0, t2 = hbar_expansion(slice49, 1.0, 0), hbar_expansion(slice49, 1.0, 2)
    mid = np.abs(t0.x) < 0.5 * slice49.t2
    r0 = np.nanmax(np.abs(expansion_residual(t0)[mid]))
    r2 = np.nanmax(np.abs(expansion_residual(t2)[mid]))
    assert r2 < r0 / 5


def test_expansion_fit(reference):
    pot, grid = reference
    es = evaluate_energy_slice(pot.with_hbar(0.5), grid, 4.9)
    terms = hbar_expansion(es, 0.5, 2)
    u = integrate_regular(es, "left").values[terms.index]
    assert expansion_fit_error(terms, u) < 1e-2


def test_expanded_phase_bracket(slice49):
    W = 2 * math.sin(math.pi * 4.4)
    terms = hbar_expansion(slice49, 1.0, 2)
    theta = terms.f0 / terms.hbar_eff + terms.hbar_eff * terms.f2
    dev = expanded_phase(terms, 1.0, W, 0.3) - theta
    bound = 2 * math.atan(expanded_phase_bracket(1.0, W, 0.3) / 2)
    assert np.nanmin(dev) >= -1e-9
    assert np.nanmax(dev) == pytest.approx(bound, rel=1e-3)
    assert expanded_phase_bracket(1.0, W, semiclassical_c_o(1.0, W)) == pytest.approx(0.0, abs=1e-12)


def test_action_integrals(reference, qmap):
    pot, grid = reference
    acts = action_integrals(pot, grid, 4.9, qmap)
    assert acts["J_classical"] == pytest.approx(2 * math.pi * 4.9, rel=1e-10)
    assert acts["period"] == pytest.approx(2 * math.pi, rel=1e-9)
    assert acts["offset"] == pytest.approx(math.pi, rel=1e-6)
