import math

import numpy as np
import pytest

from alleezone.phaseplane import (
    connected_ground_state,
    connected_ground_states,
    connected_length_of,
    estimate_Lstar2,
    estimate_Lstar2_tilde,
    gamma_intersections,
    separate_arc_lengths,
    separate_ground_states,
    separate_shoot,
    tail_V,
)
from alleezone.reactions import L0_bound, primitive_G
from alleezone.spectral import critical_Lstar, critical_Lstar_tilde
from alleezone.zones import Connected, Separate

from conftest import fd_residual


def V_exact(x, theta=0.25):
    # w = 1/V solves w'' = theta w - (1 + theta)/3, so V = 1 / (A + C cosh(sqrt(theta) x))
    A = (1 + theta) / (3 * theta)
    C = math.sqrt((1 + theta) ** 2 / (9 * theta**2) - 1 / (2 * theta))
    return 1.0 / (A + C * np.cosh(math.sqrt(theta) * np.asarray(x)))


def test_homoclinic_matches_closed_form(cubic):
    V = tail_V(cubic)
    x = np.concatenate((np.linspace(0, 10, 501), np.linspace(10, 50, 81)))
    exact = V_exact(x)
    assert abs(V(0.0) - cubic.theta_star) < 1e-14
    assert np.max(np.abs(V(x) / exact - 1)) < 1e-9
    assert np.allclose(V(-x), V(x), rtol=0, atol=0)


@pytest.mark.parametrize("q", [0.39, 0.3, 0.1, 1e-3, 1e-8])
def test_homoclinic_position_inverts(cubic, q):
    V = tail_V(cubic)
    x = V.position(q)
    assert abs(V_exact(x) / q - 1) < 1e-9


def test_homoclinic_derivative_on_gamma0(cubic):
    V = tail_V(cubic)
    x = np.linspace(0.0, 30.0, 301)
    v, dv = V(x), V.derivative(x)
    assert np.max(np.abs(dv**2 - primitive_G(cubic, v))) < 1e-12
    assert np.all(dv[1:] < 0)


def test_gamma_intersections_on_both_curves(cubic):
    for beta in (0.05, 0.2, 0.35):
        (q1, p1), (q2, p2) = gamma_intersections(cubic, beta)
        assert q1 == q2 and p1 < 0 < p2 and p1 == -p2
        # on Gamma_0 and on the f-orbit through (beta, 0)
        assert abs(p1**2 - primitive_G(cubic, q1)) < 1e-15
        assert abs(p1**2 - 2 * (cubic.f.integral(beta) - cubic.f.integral(q1))) < 1e-14
    assert gamma_intersections(cubic, cubic.theta_star) == [(cubic.theta_star, 0.0)]
    assert gamma_intersections(cubic, 0.5) == []


def test_connected_length_limits(cubic):
    Ls = critical_Lstar(cubic)
    assert abs(connected_length_of(cubic, 1e-7) - Ls) < 1e-6
    assert connected_length_of(cubic, cubic.theta_star * (1 - 1e-9)) < 1e-3
    betas = np.linspace(0.01, 0.39, 30)
    vals = [connected_length_of(cubic, b) for b in betas]
    assert np.all(np.diff(vals) < 0)
    with pytest.raises(ValueError):
        connected_length_of(cubic, 0.2, branch=1)


def test_Lstar2_bounds(cubic, alt_pair):
    for pair in (cubic, alt_pair):
        Lss = estimate_Lstar2(pair)
        assert critical_Lstar(pair) - 1e-12 <= Lss <= L0_bound(pair)
    # the cubic default has no medium regime; the alternative pair does
    assert abs(estimate_Lstar2(cubic) - critical_Lstar(cubic)) < 1e-9
    assert estimate_Lstar2(alt_pair) > critical_Lstar(alt_pair) + 0.02


def test_alt_pair_medium_regime_has_two_ground_states(alt_pair):
    L = 0.5 * (critical_Lstar(alt_pair) + estimate_Lstar2(alt_pair))
    found = connected_ground_states(alt_pair, L)
    assert len(found) == 2
    peaks = sorted(p.peak for p in found)
    assert peaks[0] < peaks[1] < alt_pair.theta_star


def test_no_connected_ground_state_beyond_Lstar2(cubic):
    assert connected_ground_state(cubic, 1.05 * estimate_Lstar2(cubic)) is None


@pytest.mark.parametrize("L", [0.05, 0.2, 0.4])
def test_connected_ground_state_profile(cubic, L):
    prof = connected_ground_state(cubic, L)
    assert prof is not None
    assert 0 < prof.peak < cubic.theta_star
    x = np.linspace(0, L + 40, 8001)
    u = prof(x)
    assert np.all(np.diff(u) < 0)
    for dv, dd in prof.interface_jumps():
        assert dv < 1e-9 and dd < 1e-9
    for h in (0.02, 0.01):
        assert fd_residual(cubic, prof, h) <= 5 * h * h


def test_separate_limits(cubic):
    for L1 in (0.2, 1.0, 5.0):
        small = separate_arc_lengths(cubic, L1, [1e-7])[0]
        assert abs(small - critical_Lstar_tilde(cubic, L1)) < 1e-6


@pytest.mark.parametrize("L1", [0.2, 1.0, 5.0])
def test_Lstar2_tilde_bounds(cubic, L1):
    lts = estimate_Lstar2_tilde(cubic, L1)
    assert critical_Lstar_tilde(cubic, L1) - 1e-12 <= lts <= 2 * L0_bound(cubic)


def test_alt_pair_separate_medium_regime(alt_pair):
    lt = critical_Lstar_tilde(alt_pair, 1.0)
    assert estimate_Lstar2_tilde(alt_pair, 1.0) > lt + 0.01


@pytest.mark.parametrize("L1,L", [(1.0, 0.3), (1.0, 0.6), (5.0, 0.5), (0.2, 0.1)])
def test_separate_ground_states_are_on_gamma0(cubic, L1, L):
    zone = Separate.from_length(L1, L)
    found = separate_ground_states(cubic, zone)
    assert found
    for prof in found:
        assert abs(prof.diagnostics["gamma0_residual"]) < 1e-10
        for dv, dd in prof.interface_jumps():
            assert dv < 1e-9 and dd < 1e-9
        assert prof.kind.startswith("separate-type-")
        x = np.linspace(zone.L2 + 0.5, zone.L2 + 30, 200)
        assert np.all(np.diff(prof(x)) <= 0)


def test_shoot_residual_changes_sign_across_root(cubic):
    zone = Separate.from_length(1.0, 0.5)
    (prof,) = [p for p in separate_ground_states(cubic, zone) if p.start_value < cubic.theta]
    g0 = prof.start_value
    lo = separate_shoot(cubic, zone, g0 * 0.9)
    hi = separate_shoot(cubic, zone, g0 * 1.1)
    assert lo.residual * hi.residual < 0
    assert abs(separate_shoot(cubic, zone, g0).residual) < 1e-10


def test_profile_summary_fields(cubic):
    prof = connected_ground_state(cubic, 0.3)
    s = prof.summary()
    assert s["kind"] == "connected" and s["zone"] == {"type": "connected", "L": 0.3}
    assert prof.samples.shape[1] == 2
