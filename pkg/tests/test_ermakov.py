import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milne.errors import (
    BandUndefined,
    ClampWarning,
    RealityViolated,
)
from milne.ermakov import (
    C_MAX,
    ErmakovParams,
    alpha_at,
    amplitude,
    c_band,
    c_nonoscillating,
    canonical_Q,
    closed_form_dphi,
    closed_form_phase,
    coefficient_matrix,
    forbidden_identity_residual,
    inverted_pair,
    inverted_sign,
    kappa_transform,
    milne_residual,
    nonoscillating_c,
    phase,
    q_at,
    reconstruct_basis,
    stationary_points,
    trimmed,
    zeros_of,
)

C_O = -0.16245984811645


def test_params_validation():
    with pytest.raises(ValueError):
        ErmakovParams(0.0, 0.0)
    with pytest.raises(ValueError):
        ErmakovParams(1.0, float("nan"))
    with pytest.raises(ValueError):
        ErmakovParams(1.0, 2 * C_MAX)
    with pytest.warns(ClampWarning):
        p = ErmakovParams.clamped(1.0, -1e12)
    assert p.c == -C_MAX


@settings(max_examples=50, deadline=None)
@given(I=st.floats(0.1, 10), c=st.floats(-5, 5), W=st.floats(0.05, 5))
def test_matrix_determinant(I, c, W):
    M = coefficient_matrix(ErmakovParams(I, c), W)
    assert M.det == pytest.approx(W**-2, rel=1e-9)
    assert M.m11 > 0 and M.m22 > 0


def test_nonoscillating_value(pair49):
    assert c_nonoscillating(1.0, pair49.W) == pytest.approx(C_O, rel=1e-8)
    assert c_nonoscillating(1.0, pair49.W, sign=1) == pytest.approx(-C_O, rel=1e-8)
    assert c_nonoscillating(1.0, 2.0) == 0.0
    with pytest.raises(RealityViolated):
        c_nonoscillating(1.0, 2.1)


def test_branch_selection_counts(pair49):
    c, counts = nonoscillating_c(pair49)
    assert c == pytest.approx(C_O, rel=1e-8)
    assert counts[c] == 1
    assert counts[-c] == 11


def test_oscillating_branch_extrema_alternate(pair49):
    ap = phase(pair49, ErmakovParams(1.0, -C_O))
    pts = stationary_points(ap.alpha, pair49.energy_slice, ap.index)
    kinds = [k for _, k in pts]
    assert all(a != b for a, b in zip(kinds, kinds[1:]))
    xs = np.array([x for x, _ in pts])
    np.testing.assert_allclose(np.sort(np.abs(xs))[-2:], [2.943, 2.943], atol=5e-3)


def test_amplitude_positive_and_finite(pair49):
    for c in (0.0, 0.3, C_O, -3.0):
        a = amplitude(pair49, ErmakovParams(1.0, c))
        assert np.all(a > 0) and np.all(np.isfinite(a))


def test_phase_matches_closed_form(pair49):
    ap = phase(pair49, ErmakovParams(1.0, 0.3))
    inside = (ap.x > pair49.energy_slice.t1) & (ap.x < pair49.energy_slice.t2)
    dphi = closed_form_dphi(pair49, 0.3, ap.index)
    err = np.max(np.abs(dphi[inside] - ap.dphi[inside]) / ap.dphi[inside])
    assert err < 1e-6
    assert np.all(np.diff(ap.phi) >= 0)


def test_closed_form_phase_unwraps():
    t = np.linspace(0, 10, 1000)
    phi = closed_form_phase(np.sin(t), np.cos(t))
    np.testing.assert_allclose(phi, t, atol=1e-12)


def test_milne_residual_small_mid_well(pair49):
    ap = phase(pair49, ErmakovParams(1.0, C_O))
    r = milne_residual(ap.alpha, pair49.energy_slice, index=ap.index)
    x = ap.x
    mid = (x > -2) & (x < 2)
    assert np.nanmax(np.abs(r[mid])) < 1e-6
    assert np.isnan(r[0]) and np.isnan(r[-1])


@pytest.mark.parametrize("c", [0.0, 0.3, C_O, 3.0])
def test_reconstruction(pair49, c):
    ap = phase(pair49, ErmakovParams(1.0, c))
    u1_rec, _ = reconstruct_basis(ap)
    u1 = pair49.u1.values[ap.index]
    assert np.max(np.abs(u1_rec - u1)) / np.max(np.abs(u1)) < 1e-6


def test_q_at_zeros_of_u1_is_m22(pair49):
    es = pair49.energy_slice
    z = zeros_of(pair49.u1, es.t1, es.t2)
    np.testing.assert_allclose(z, [-1.804, -0.707, 0.301, 1.343, 2.645], atol=2e-3)
    for c in (0.0, 0.7, C_O):
        params = ErmakovParams(1.0, c)
        M = coefficient_matrix(params, pair49.W)
        np.testing.assert_allclose(q_at(pair49, params, z), M.m22, rtol=1e-9)
    a0 = alpha_at(pair49, ErmakovParams(1.0, 0.0), z)
    a1 = alpha_at(pair49, ErmakovParams(1.0, 3.0), z)
    np.testing.assert_allclose(a0, a1, rtol=1e-9)


def test_canonical_q_bounded_by_eigenvalues(pair49):
    cq = canonical_Q(pair49, ErmakovParams(1.0, 0.4))
    assert cq.lambda1 >= cq.lambda2 > 0
    assert np.all(cq.q <= cq.lambda1 * (1 + 1e-12))
    assert np.all(cq.q >= cq.lambda2 * (1 - 1e-12))
    np.testing.assert_allclose(cq.w1sq + cq.w2sq, 1.0, atol=1e-12)


def test_inverted_amplitude_equals_direct_at_c_o(pair49):
    direct = phase(pair49, ErmakovParams(1.0, C_O))
    abar, phibar = inverted_pair(pair49, ErmakovParams(1.0, -C_O), direct)
    np.testing.assert_allclose(abar, direct.alpha, rtol=1e-8)
    assert np.all(np.diff(phibar) <= 0)
    assert inverted_sign(pair49, C_O) in (-1.0, 1.0)


def test_c_band_contains_c_o(pair49):
    for x in np.linspace(-1.5, 1.5, 13):
        try:
            lo, hi = c_band(pair49, 1.0, float(x))
        except BandUndefined:
            continue
        assert lo < C_O < hi


def test_c_band_outside_allowed(pair49):
    with pytest.raises(BandUndefined):
        c_band(pair49, 1.0, 5.0)


def test_forbidden_region_schwarzian_negative(pair49):
    ap = phase(pair49, ErmakovParams(1.0, C_O))
    r, sch = forbidden_identity_residual(ap, pair49.energy_slice)
    es = pair49.energy_slice
    tail = (ap.x > es.t2 + 0.5) & (ap.x < es.t2 + 2.0)
    assert np.all(sch[tail] < 0)
    assert np.nanmax(np.abs(r[tail])) < 1e-5


@pytest.mark.parametrize("kappa", [0.5, 2.0, -3.0])
def test_kappa_invariance(pair49, kappa):
    params = ErmakovParams(1.0, 0.25)
    ap = phase(pair49, params)
    new_pair, new_params = kappa_transform(pair49, params, kappa)
    ap2 = phase(new_pair, new_params)
    np.testing.assert_allclose(ap2.alpha, ap.alpha, rtol=1e-12)
    np.testing.assert_allclose(ap2.phi, ap.phi, rtol=1e-12, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(c=st.floats(-20, 20), scale=st.floats(0.1, 10))
def test_amplitude_bounded_below_by_small_eigenvalue(pair49, c, scale):
    from dataclasses import replace

    # any nonzero W keeps the form positive definite
    pair = replace(pair49, W=pair49.W * scale)
    params = ErmakovParams(1.0, c)
    idx = trimmed(pair)
    a2 = amplitude(pair, params, idx) ** 2
    cq = canonical_Q(pair, params, idx)
    norm2 = pair.u1.values[idx] ** 2 + pair.u2.values[idx] ** 2
    assert np.all(a2 >= cq.lambda2 * norm2 * (1 - 1e-9))


def test_phase_accurate_for_large_c(pair49):
    from milne.schrodinger import build_g

    for c in (3.0, -10.0):
        ap = phase(pair49, ErmakovParams(1.0, c))
        g = build_g(pair49, c).values[ap.index]
        u1 = pair49.u1.values[ap.index]
        ref = closed_form_phase(u1, g)
        ref -= ref[0] - np.arctan(u1[0] / g[0])
        assert np.max(np.abs(ap.phi - ref)) < 1e-6


def test_trimmed_slice_contains_allowed_range(pair49):
    idx = trimmed(pair49)
    allowed = pair49.energy_slice.classically_allowed
    assert idx.start <= allowed.start and idx.stop >= allowed.stop
