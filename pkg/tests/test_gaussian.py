import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import j_quad, phi_chung as phi_chung_ref, phi_quad
from scidma.analysis.gaussian import (MU_MAX, j_mean, j_mean_inv, j_sigma, j_sigma_approx, one_minus_phi,
                                      phi, phi_chung, phi_chung_inv, phi_inv)


@pytest.mark.parametrize("x", [0.01, 0.1, 1.0, 3.0, 10.0, 25.0, 50.0, 100.0, 200.0])
def test_phi_matches_quadrature(x):
    assert phi(x) == pytest.approx(phi_quad(x), rel=1e-9)


def test_phi_endpoints():
    assert phi(0.0) == 1.0
    assert phi_inv(1.0) == 0.0
    assert phi(100.0) < 1e-6
    assert np.all(phi(np.array([100.0, 150.0, 400.0])) < 1e-6)


def test_phi_strictly_decreasing_on_fine_grid():
    x = np.arange(0.0, 60.0 + 1e-9, 1e-3)
    assert np.all(np.diff(phi(x)) < 0)


@pytest.mark.parametrize("x", [0.1, 1.0, 10.0, 50.0])
def test_phi_round_trip(x):
    assert abs(phi_inv(phi(x)) - x) < 1e-8


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-4, max_value=150.0))
def test_phi_round_trip_property(x):
    assert abs(phi_inv(phi(x)) - x) < 1e-8 * max(1.0, x)


def test_phi_inv_saturates():
    assert phi_inv(5e-324) <= MU_MAX
    assert phi_inv(1e-300, mu_max=500.0) == 500.0


def test_phi_rejects_bad_input():
    with pytest.raises(ValueError):
        phi(-1.0)
    with pytest.raises(ValueError):
        phi_inv(0.0)
    with pytest.raises(ValueError):
        phi_inv(1.5)


def test_one_minus_phi_small_mean():
    # E[tanh(u/2)] ~ E[u/2] = x/2 as x -> 0
    x = 1e-9
    assert one_minus_phi(x) == pytest.approx(0.5 * x, rel=1e-3)


@pytest.mark.parametrize("x", [0.5, 5.0, 9.9, 10.1, 30.0])
def test_chung_form(x):
    assert phi_chung(x) == pytest.approx(phi_chung_ref(x), rel=1e-12)
    assert phi_chung_inv(phi_chung(x)) == pytest.approx(x, rel=1e-8)


@pytest.mark.parametrize("x", [0.5, 2.0, 8.0, 20.0])
def test_chung_close_to_exact(x):
    assert phi_chung(x) == pytest.approx(phi(x), rel=0.05)


@pytest.mark.parametrize("mu", [0.5, 2.0, 10.0, 40.0])
def test_j_matches_quadrature(mu):
    assert j_mean(mu) == pytest.approx(j_quad(mu), abs=1e-10)


def test_j_limits_and_inverse():
    assert j_mean(0.0) == 0.0
    assert j_mean(MU_MAX) == pytest.approx(1.0, abs=1e-12)
    for mu in [0.01, 1.0, 7.0, 60.0]:
        assert j_mean_inv(j_mean(mu)) == pytest.approx(mu, rel=1e-8)


def test_j_sigma_approximation():
    s = np.linspace(0.1, 6.0, 60)
    assert np.max(np.abs(j_sigma(s) - j_sigma_approx(s))) < 2e-3
