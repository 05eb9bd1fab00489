import numpy as np
import pytest
from scipy.integrate import solve_ivp
from conftest import GAUSSIAN_CRITICAL, fd_ground_energy

from brunnian.potentials import PotentialModel, make_gaussian
from brunnian.radial import (
    bound_state_count_zero_energy,
    bound_state_energy,
    bound_state_energy_numerov,
    bound_state_energy_ode,
    critical_strength,
)


@pytest.mark.parametrize("depth, rng, mu", [(-10.0, 1.0, 0.5), (-3.2, 1.3, 0.37), (-40.0, 0.4, 1.2)])
def test_numerov_and_ode_agree(depth, rng, mu):
    v = make_gaussian(depth, rng)
    a = bound_state_energy_numerov(v, mu)
    b = bound_state_energy_ode(v, mu, 3)
    assert a == pytest.approx(b, rel=1e-7)
    assert a == pytest.approx(fd_ground_energy(v, mu), rel=1e-6)


@pytest.mark.parametrize("depth", [-1.0, -5.0, -20.0])
def test_two_dimensional_oracle_matches_finite_volume(depth):
    v = make_gaussian(depth, 1.0)
    assert bound_state_energy(v, 0.5, 2) == pytest.approx(fd_ground_energy(v, 0.5, dim=2), rel=1e-6)


def test_no_bound_state_below_critical_depth():
    assert bound_state_energy(make_gaussian(-0.99 * GAUSSIAN_CRITICAL, 1.0), 0.5) is None
    assert bound_state_energy(make_gaussian(-1.01 * GAUSSIAN_CRITICAL, 1.0), 0.5) < 0.0


def test_critical_strength_scaling():
    # depth_c = 2.684 / (2 mu b^2)
    v = make_gaussian(-1.0, 1.7)
    assert critical_strength(v, 0.8) == pytest.approx(GAUSSIAN_CRITICAL / (2 * 0.8 * 1.7**2), rel=1e-8)


def test_bound_state_count():
    assert bound_state_count_zero_energy(make_gaussian(-1.0, 1.0), 0.5) == 0
    assert bound_state_count_zero_energy(make_gaussian(-10.0, 1.0), 0.5) == 1
    # the s-wave second state of a Gaussian appears near 2 mu V b^2 = 17.7
    assert bound_state_count_zero_energy(make_gaussian(-20.0, 1.0), 0.5) == 2


def test_repulsive_potential_has_no_bound_state():
    assert bound_state_energy(PotentialModel(((3.0, 1.0),)), 0.5) is None


def test_gaussian_critical_constant_from_zero_energy_shooting():
    # with mu = 1/2 and b = 1 the critical depth equals 2 mu V0 b^2

    def node_at_zero_energy(depth):  # depth > 0 is the well strength V0
        rhs = lambda r, y: (y[1], -depth * np.exp(-r * r) * y[0])  # noqa: E731
        sol = solve_ivp(rhs, (0.0, 12.0), (0.0, 1.0), rtol=1e-12, atol=1e-14, method="DOP853")
        # beyond the well u is linear; binding sets in when its slope turns negative
        return sol.y[1, -1] < 0.0

    lo, hi = 2.0, 3.5
    while hi - lo > 1e-11:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if node_at_zero_energy(mid) else (mid, hi)
    assert 0.5 * (lo + hi) == pytest.approx(GAUSSIAN_CRITICAL, abs=1e-9)
