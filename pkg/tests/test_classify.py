import math

import numpy as np
import pytest

from alleezone.classify import (
    SPREADING,
    UNDETERMINED,
    VANISHING,
    ConsistencyError,
    _check_monotone,
    classify,
    spreading_certificate,
    sweep,
    threshold_bisect,
    vanishing_certificate,
    vanishing_delta,
)
from alleezone.phaseplane import estimate_Lstar2
from alleezone.reactions import L0_bound, l_alpha, polynomial_pair, tabulated_pair
from alleezone.solver import make_initial, simulate
from alleezone.spectral import critical_Lstar, lambda1
from alleezone.zones import Connected, Separate


def delta_closed_form(theta, lam):
    # g(s)/s = (s - theta)(1 - s) <= -theta + lam/2  <=>  s^2 - (1+theta) s + lam/2 >= 0
    return min(1.0, 0.5 * ((1 + theta) - math.sqrt((1 + theta) ** 2 - 2 * lam)))


@pytest.mark.parametrize("lam", [1e-4, 0.01, 0.1, 0.24])
def test_delta_cubic_closed_form_and_scan(cubic, lam):
    exact = delta_closed_form(0.25, lam)
    assert vanishing_delta(cubic, lam) == exact
    poly = polynomial_pair([0, 1, -1], [0, -0.25, 1.25, -1])
    assert abs(vanishing_delta(poly, lam) - exact) < 1e-12
    u = np.linspace(-0.2, 2.0, 1201)
    tab = tabulated_pair(np.column_stack((u, cubic.f(u), cubic.g(u))))
    d_tab = vanishing_delta(tab, lam)
    assert 0.85 * exact < d_tab <= exact


def test_delta_condition_holds(cubic):
    lam = 0.1
    d = vanishing_delta(cubic, lam)
    s = np.linspace(1e-9, d, 10001)
    assert np.all(cubic.f(s) <= (1 + lam / 2) * s + 1e-15)
    assert np.all(cubic.g(s) <= (-0.25 + lam / 2) * s + 1e-15)
    assert cubic.g(d * 1.01) > (-0.25 + lam / 2) * d * 1.01


def test_delta_requires_positive_eigenvalue(cubic):
    with pytest.raises(ValueError):
        vanishing_delta(cubic, 0.0)


def test_vanishing_certificate_examples(cubic):
    zone = Connected(0.2)
    x = np.linspace(0, 40, 2001)
    assert vanishing_certificate(cubic, zone, x, np.zeros_like(x)).passed
    wide = np.where(x < 20, cubic.theta_star, 0.0)
    assert not vanishing_certificate(cubic, zone, x, wide).passed
    rep = vanishing_certificate(cubic, Connected(1.0), x, np.zeros_like(x))
    assert not rep.applicable and not rep.passed


def test_spreading_certificate_examples(cubic):
    zone = Connected(0.3)
    x = np.linspace(0, 60, 3001)
    rep = spreading_certificate(cubic, zone, x, np.ones_like(x))
    assert rep.passed and rep.r >= 0.3
    assert abs(rep.alpha - 0.5 * (cubic.theta_star + 1)) < 1e-15
    assert not spreading_certificate(cubic, zone, x, np.zeros_like(x)).passed
    # a block that is one node too short fails
    la = l_alpha(cubic, rep.alpha)
    u = np.where((x >= 5) & (x < 5 + 2 * la - 0.04), 1.0, 0.0)
    assert not spreading_certificate(cubic, zone, x, u).passed


def _recheck(pair, rep):
    """Re-verify a certificate from the stored state, independently of the
    classifier's own code paths."""
    s = rep.state
    if rep.outcome == VANISHING:
        d = rep.certificate_data["delta"]
        eig = lambda1(pair, rep.zone)
        L = rep.zone.L
        t1, t2 = eig.theta1, eig.theta2
        phi = np.where(s.x <= L, np.cos(t2 * s.x), np.cos(t2 * L) * np.exp(-t1 * (s.x - L)))
        assert np.all(s.u <= d * phi)
    elif rep.outcome == SPREADING:
        a, r = rep.certificate_data["alpha"], rep.certificate_data["r"]
        la = l_alpha(pair, a)
        m = (s.x >= r) & (s.x <= r + 2 * la)
        assert r >= rep.zone.outer and np.all(s.u[m] >= a)
        assert s.x[m][-1] - s.x[m][0] >= 2 * la - 0.02


def test_classify_vanishing_small_zone(cubic):
    rep = classify(cubic, Connected(0.4 * critical_Lstar(cubic)), make_initial("rectangle", 0.02, 2.0))
    assert rep.outcome == VANISHING and rep.certificate == "supersolution-dominated"
    _recheck(cubic, rep)


def test_classify_spreading_large_zone(cubic):
    rep = classify(cubic, Connected(1.1 * L0_bound(cubic)), make_initial("rectangle", 0.01, 2.0))
    assert rep.outcome == SPREADING and rep.certificate == "spreading-block"
    _recheck(cubic, rep)
    # later snapshots keep the certificate
    traj = simulate(cubic, rep.zone, make_initial("rectangle", 0.01, 2.0), rep.T_reached + 30,
                    snapshot_times=np.arange(rep.T_reached, rep.T_reached + 31, 5.0))
    for snap in traj.snapshots:
        assert spreading_certificate(cubic, rep.zone, snap.x, snap.u).passed


def test_medium_zone_never_vanishes(alt_pair):
    Ls, Lss = critical_Lstar(alt_pair), estimate_Lstar2(alt_pair)
    rep = classify(alt_pair, Connected(0.5 * (Ls + Lss)), make_initial("rectangle", 1e-3, 2.0), T_max=100)
    assert rep.outcome in (SPREADING, UNDETERMINED)
    if rep.outcome == UNDETERMINED:
        assert rep.certificate == "timeout"


def test_undetermined_reports_ground_state_distance(alt_pair):
    Ls, Lss = critical_Lstar(alt_pair), estimate_Lstar2(alt_pair)
    rep = classify(alt_pair, Connected(0.5 * (Ls + Lss)), make_initial("rectangle", 1e-3, 2.0), T_max=5)
    assert rep.outcome == UNDETERMINED
    assert rep.distance_to_ground_state is not None and rep.distance_to_ground_state > 0


def test_monotonicity_guard():
    _check_monotone({0.1: VANISHING, 0.2: UNDETERMINED, 0.3: SPREADING})
    with pytest.raises(ConsistencyError):
        _check_monotone({0.1: SPREADING, 0.2: VANISHING})


def test_threshold_ordering_small_zone(cubic):
    zone = Connected(0.5 * critical_Lstar(cubic))
    low, high = threshold_bisect(cubic, zone, sigma_range=(0.02, 3.0), tol=0.02)
    assert not low.degenerate and low.sigma_high - low.sigma_low <= 0.02
    assert high.sigma_high - high.sigma_low <= 0.02
    assert low.sigma_low <= high.sigma_high + 0.02


def test_threshold_sentinel_above_Lstar(cubic):
    zone = Connected(1.2 * critical_Lstar(cubic))
    low, high = threshold_bisect(cubic, zone, sigma_range=(0.001, 3.0), tol=0.05, T_max=150)
    assert low.degenerate and low.sigma_low == 0.0
    assert high.bracketed and math.isfinite(high.sigma_high)


def test_wider_support_spreads_more_easily(cubic):
    zone = Connected(0.5 * critical_Lstar(cubic))
    _, narrow = threshold_bisect(cubic, zone, hbar=1.0, sigma_range=(0.05, 3.0), tol=0.02)
    _, wide = threshold_bisect(cubic, zone, hbar=2.0, sigma_range=(0.05, 3.0), tol=0.02)
    assert wide.sigma_high <= narrow.sigma_high


def test_connected_spreads_no_later_than_separate(cubic):
    L = 0.5
    _, conn = threshold_bisect(cubic, Connected(L), sigma_range=(0.01, 3.0), tol=0.02, T_max=200)
    _, sep = threshold_bisect(cubic, Separate.from_length(1.0, L), sigma_range=(0.01, 3.0), tol=0.02, T_max=200)
    assert conn.sigma_high <= sep.sigma_high + 0.02


def test_sweep_rows_sorted_and_parallel_equal(cubic):
    zones = [Connected(0.2), Connected(1.0)]
    a = sweep(cubic, zones, [0.01, 3.0], T_max=100)
    b = sweep(cubic, zones, [3.0, 0.01], T_max=100, jobs=2)
    assert a == b
    assert [r["L"] for r in a] == [0.2, 0.2, 1.0, 1.0]
    assert {r["outcome"] for r in a} <= {VANISHING, SPREADING, UNDETERMINED}
