"""Radial Schroedinger equation for a single pair (s-wave).

Two independent integrators live here:

* a Numerov recursion for the reduced radial function u = r R in three
  dimensions, used for bound-state energies, critical couplings and the
  zero-energy scattering length;
* a general-dimension ODE integration of R itself (scipy ``solve_ivp``),
  used for two-dimensional wells and as a cross-check of the Numerov path.

Beyond ``outer_radius`` the Gaussian-sum potential is below double precision
relative to its depth, so the exterior solution is matched analytically
(modified Bessel functions) instead of integrating to large r.

Potentials are duck-typed: any callable of r with a ``ranges`` attribute.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import ive, kve

DIVERGENCE_LIMIT = 1e6


def outer_radius(potential) -> float:
    ranges = np.asarray(potential.ranges, dtype=float)
    return 7.0 * float(ranges.max()) if ranges.size else 1.0


def _step(potential, mu: float, energy: float) -> float:
    ranges = np.asarray(potential.ranges, dtype=float)
    b_min = float(ranges.min()) if ranges.size else 1.0
    r = np.linspace(0.0, outer_radius(potential), 4001)
    k_max = math.sqrt(2.0 * mu * max(float(np.max(np.abs(potential(r) - energy))), 1e-12))
    return min(b_min / 200.0, 0.02 / k_max)


def numerov_u(potential, mu: float, energy: float, r_end: float | None = None, h: float | None = None):
    """Outward Numerov solution of u'' = 2 mu (V - E) u with u(0)=0, u'(0)=1.

    Returns ``(r, u)`` on the uniform grid.
    """
    if r_end is None:
        r_end = outer_radius(potential)
    if h is None:
        h = _step(potential, mu, energy)
    n = int(math.ceil(r_end / h))
    h = r_end / n
    r = np.linspace(0.0, r_end, n + 1)
    q = 2.0 * mu * (potential(r) - energy)
    f = 1.0 - h * h * q / 12.0
    u = np.empty(n + 1)
    u[0] = 0.0
    u[1] = h * (1.0 + q[0] * h * h / 6.0)
    fl = f.tolist()
    ul = u.tolist()
    for i in range(1, n):
        ul[i + 1] = ((12.0 - 10.0 * fl[i]) * ul[i] - fl[i - 1] * ul[i - 1]) / fl[i + 1]
    return r, np.asarray(ul)


def _end_state(r, u):
    h = r[1] - r[0]
    # three-point one-sided derivative at the last grid point
    du = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    nodes = int(np.count_nonzero(np.signbit(u[2:]) != np.signbit(u[1:-1])))
    return u[-1], du, nodes


def _exterior_3d(u_end, du_end, kappa):
    """Coefficients of u = grow e^{k s} + decay e^{-k s} beyond the last grid point."""
    grow = 0.5 * (u_end + du_end / kappa)
    decay = 0.5 * (u_end - du_end / kappa)
    return grow, decay


def _count_3d(potential, mu, energy):
    """Number of s-wave bound states below ``energy`` (< 0) and the growing coefficient."""
    r, u = numerov_u(potential, mu, energy)
    u_end, du_end, nodes = _end_state(r, u)
    kappa = math.sqrt(-2.0 * mu * energy)
    grow, decay = _exterior_3d(u_end, du_end, kappa)
    # one more zero on (r_end, inf) when the decaying part overtakes a growing part of opposite sign
    outer = 1 if grow * decay < 0 and abs(decay) > abs(grow) else 0
    return nodes + outer, grow


def _min_potential(potential) -> float:
    r = np.linspace(0.0, outer_radius(potential), 20001)
    return float(np.min(potential(r)))


def _lowest_root(count, coefficient, v_min, tol):
    """Ground-state energy from a monotone eigenvalue count and a continuous matching function."""
    hi = -1e-14 * abs(v_min)
    if count(hi) == 0:
        return None
    lo = v_min
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if count(mid) >= 1:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-6 * abs(lo) and count(hi) == 1:
            break
    f_lo, f_hi = coefficient(lo), coefficient(hi)
    if f_lo == 0.0:
        return lo
    if f_lo * f_hi > 0:
        return 0.5 * (lo + hi)
    return brentq(coefficient, lo, hi, xtol=tol * abs(lo), rtol=4 * np.finfo(float).eps)


def bound_state_energy_numerov(potential, mu: float, tol: float = 1e-14) -> float | None:
    """Ground-state s-wave energy in three dimensions, or None when unbound."""
    v_min = _min_potential(potential)
    if v_min >= 0.0:
        return None
    return _lowest_root(
        lambda e: _count_3d(potential, mu, e)[0],
        lambda e: _count_3d(potential, mu, e)[1],
        v_min,
        tol,
    )


def _ode_R(potential, mu: float, energy: float, dim: int, r_end: float, r0: float = 1e-6):
    """Regular solution R of R'' + (d-1)/r R' = 2 mu (V - E) R, dense."""
    k0 = 2.0 * mu * (float(potential(np.array(r0))) - energy)
    y0 = [1.0 + k0 * r0 * r0 / (2.0 * dim), k0 * r0 / dim]

    def rhs(r, y):
        return [y[1], 2.0 * mu * (float(potential(np.array(r))) - energy) * y[0] - (dim - 1) / r * y[1]]

    return solve_ivp(rhs, (r0, r_end), y0, method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)


def _count_ode(potential, mu, energy, dim):
    r_end = outer_radius(potential)
    sol = _ode_R(potential, mu, energy, dim, r_end)
    grid = np.linspace(sol.t[0], r_end, 4000)
    vals = sol.sol(grid)[0]
    nodes = int(np.count_nonzero(np.signbit(vals[1:]) != np.signbit(vals[:-1])))
    R, dR = sol.y[0, -1], sol.y[1, -1]
    kappa = math.sqrt(-2.0 * mu * energy)
    nu = (dim - 2) / 2.0
    z = kappa * r_end
    # R = c_k K_nu(kappa r) + c_i I_nu(kappa r), exponentially scaled at z
    k0, k1 = kve(nu, z), kve(nu + 1.0, z)
    i0, i1 = ive(nu, z), ive(nu + 1.0, z)
    m = np.array([[k0, i0], [kappa * (-k1 + nu / z * k0), kappa * (i1 + nu / z * i0)]])
    # exterior solution is r**-nu (c_k K_nu + c_i I_nu)
    g, dg = R, dR + nu / r_end * R
    c_k, c_i = np.linalg.solve(m, [g, dg])
    outer = 1 if c_k * c_i < 0 and abs(c_k / c_i) > i0 / k0 else 0
    return nodes + outer, c_i


def bound_state_energy_ode(potential, mu: float, dim: int = 3, tol: float = 1e-12) -> float | None:
    """Ground-state energy from direct ODE integration in ``dim`` dimensions."""
    v_min = _min_potential(potential)
    if v_min >= 0.0:
        return None
    return _lowest_root(
        lambda e: _count_ode(potential, mu, e, dim)[0],
        lambda e: _count_ode(potential, mu, e, dim)[1],
        v_min,
        tol,
    )


def bound_state_energy(potential, mu: float, dim: int = 3) -> float | None:
    if dim == 3:
        return bound_state_energy_numerov(potential, mu)
    return bound_state_energy_ode(potential, mu, dim)


def zero_energy_end(potential, mu: float, r_end: float | None = None):
    """``(r_end, u, u')`` of the zero-energy reduced solution at ``r_end``."""
    if r_end is None:
        r_end = outer_radius(potential)
    h = _step(potential, mu, 0.0)
    r, u = numerov_u(potential, mu, 0.0, r_end=r_end, h=h)
    u_end, du_end, nodes = _end_state(r, u)
    return r[-1], u_end, du_end, nodes


def inverse_scattering_length(potential, mu: float, r_end: float | None = None) -> float:
    """1/a, finite through a zero-energy resonance; 0 for V identically 0 gives -inf guard."""
    r, u, du, _ = zero_energy_end(potential, mu, r_end)
    # u = C (r - a)  =>  1/a = u' / (r u' - u)
    return du / (r * du - u)


def scattering_length(potential, mu: float, rel_tol: float = 1e-6) -> float:
    """Three-dimensional s-wave scattering length.

    Returns ``math.inf`` when |a| exceeds ``DIVERGENCE_LIMIT`` (zero-energy
    resonance). Raises ``ArithmeticError`` when extending the integration
    range changes a by more than ``rel_tol``.
    """
    if len(potential.ranges) == 0 or potential.is_zero:
        return 0.0
    r1 = outer_radius(potential)
    values = []
    for r_end in (r1, 1.5 * r1, 2.0 * r1):
        r, u, du, _ = zero_energy_end(potential, mu, r_end)
        values.append(r - u / du if du != 0.0 else math.inf)
    a = values[-1]
    if any(abs(v) > DIVERGENCE_LIMIT for v in values):
        return math.inf
    spread = max(abs(v - a) for v in values)
    if spread > rel_tol * max(abs(a), 1e-300) and spread > 1e-12:
        raise ArithmeticError(f"scattering length not stable under r_max sweep (spread {spread:.2e})")
    return a


def bound_state_count_zero_energy(potential, mu: float) -> int:
    r, u, du, nodes = zero_energy_end(potential, mu)
    return nodes + (1 if du * u < 0 else 0)


def critical_strength(shape, mu: float, tol: float = 1e-12) -> float:
    """Factor g for which ``g * shape`` first binds an s-wave state (three dimensions).

    ``shape`` must be attractive somewhere. The root is where the zero-energy
    reduced solution leaves ``outer_radius`` with zero slope.
    """

    class _Scaled:
        def __init__(self, g):
            self.g = g
            self.ranges = shape.ranges

        def __call__(self, r):
            return self.g * shape(r)

    hi = 1.0
    while bound_state_count_zero_energy(_Scaled(hi), mu) == 0:
        hi *= 2.0
        if hi > 1e8:
            raise ArithmeticError("shape never binds")
    lo = 0.0
    # tighten so the bracket holds exactly one sign change of u'
    while True:
        mid = 0.5 * (lo + hi)
        if bound_state_count_zero_energy(_Scaled(mid), mu) >= 1:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-3 * hi:
            break

    def slope(g):
        r, u, du, _ = zero_energy_end(_Scaled(g), mu)
        return du / math.hypot(u, du)

    return brentq(slope, lo, hi, xtol=tol * hi, rtol=4 * np.finfo(float).eps)
