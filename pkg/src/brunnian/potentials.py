"""Radial pair potentials stored as finite sums of Gaussians.

Every potential handed to the solver is a :class:`PotentialModel`,

    V(r) = sum_j strength_j * exp(-r**2 / range_j**2),

so all correlated-Gaussian matrix elements stay closed form. Named
constructors produce that representation from physically motivated shapes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import least_squares


class PotentialError(ValueError):
    """Raised when a potential cannot be constructed with the requested shape."""


class FitError(PotentialError):
    pass


@dataclass(frozen=True)
class PotentialModel:
    terms: tuple[tuple[float, float], ...] = ()
    form: str = "custom"
    params: tuple[tuple[str, Any], ...] = ()
    residual: float | None = field(default=None, compare=False)

    def __post_init__(self):
        terms = tuple((float(s), float(b)) for s, b in self.terms)
        for _, b in terms:
            if not b > 0.0:
                raise PotentialError(f"Gaussian range must be positive, got {b}")
        object.__setattr__(self, "terms", terms)

    @property
    def strengths(self) -> np.ndarray:
        return np.array([s for s, _ in self.terms], dtype=float)

    @property
    def ranges(self) -> np.ndarray:
        return np.array([b for _, b in self.terms], dtype=float)

    @property
    def is_zero(self) -> bool:
        return all(s == 0.0 for s, _ in self.terms)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for s, b in self.terms:
            out = out + s * np.exp(-(r * r) / (b * b))
        return out

    def scaled(self, length: float) -> "PotentialModel":
        """Ranges multiplied by ``length``, strengths divided by ``length**2``."""
        terms = tuple((s / length**2, b * length) for s, b in self.terms)
        return PotentialModel(terms, form="custom", params=(("scaled_from", self.form), ("length", length)))

    def volume_integral(self, dim: int = 3) -> float:
        """Integral of V over d-dimensional space."""
        return float(sum(s * math.pi ** (dim / 2) * b**dim for s, b in self.terms))

    def to_dict(self) -> dict:
        out = {"form": self.form, "params": dict(self.params), "terms": [list(t) for t in self.terms]}
        if self.residual is not None:
            out["fit_residual"] = self.residual
        return out


def make_gaussian(depth: float, range: float) -> PotentialModel:
    """Single Gaussian ``depth * exp(-r**2/range**2)``; attractive wells have depth < 0."""
    if not range > 0.0:
        raise PotentialError(f"range must be positive, got {range}")
    params = (("depth", float(depth)), ("range", float(range)))
    if depth == 0.0:
        return PotentialModel((), form="gaussian", params=params)
    return PotentialModel(((depth, range),), form="gaussian", params=params)


def yukawa(r, strength: float, screening_length: float):
    r = np.asarray(r, dtype=float)
    return strength * np.exp(-r / screening_length) / r


def _fit_grid(r_min: float, r_max: float, n: int = 400) -> np.ndarray:
    return np.geomspace(r_min, r_max, n)


def _solve_strengths(log_ranges, r, target):
    # relative residual: rows scaled by 1/target
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        basis = np.exp(-(r[:, None] ** 2) / np.exp(2.0 * log_ranges)[None, :])
    basis = np.nan_to_num(basis)
    weighted = basis / target[:, None]
    coef, *_ = np.linalg.lstsq(weighted, np.ones_like(r), rcond=None)
    resid = weighted @ coef - 1.0
    return coef, resid


def _relative_l2(log_ranges, r, target) -> float:
    _, resid = _solve_strengths(log_ranges, r, target)
    return float(np.sqrt(np.mean(resid**2)))


def _refine(log_ranges, r, target):
    def fun(x):
        return _solve_strengths(x, r, target)[1]

    sol = least_squares(fun, log_ranges, method="lm", xtol=1e-12, ftol=1e-12, max_nfev=4000)
    x = np.sort(sol.x)
    if _relative_l2(x, r, target) <= _relative_l2(np.sort(log_ranges), r, target):
        return x
    return np.sort(log_ranges)


def _flatten_error(coef, log_ranges, r, target, power: int = 32):
    """Polish all parameters towards the minimax fit by minimising sum |e|**power.

    Kept only if the largest pointwise relative error goes down.
    """
    n = len(coef)

    def error(p):
        with np.errstate(over="ignore", under="ignore"):
            basis = np.exp(-(r[:, None] ** 2) / np.exp(2.0 * p[n:])[None, :])
        return basis @ p[:n] / target - 1.0

    x0 = np.concatenate([coef, log_ranges])
    worst = float(np.max(np.abs(error(x0))))
    if worst == 0.0:
        return coef, log_ranges

    def fun(p):
        e = error(p) / worst
        return np.sign(e) * np.abs(e) ** (power / 2)

    with np.errstate(over="ignore", invalid="ignore"):
        sol = least_squares(fun, x0, method="lm", xtol=1e-15, ftol=1e-15, max_nfev=200 * (2 * n + 1))
    if np.all(np.isfinite(sol.x)) and float(np.max(np.abs(error(sol.x)))) < worst:
        order = np.argsort(sol.x[n:])
        return sol.x[:n][order], sol.x[n:][order]
    return coef, log_ranges


def fit_yukawa(
    strength: float,
    screening_length: float,
    n_terms: int = 8,
    r_window: tuple[float, float] | None = None,
    tolerance: float = 1e-2,
) -> PotentialModel:
    """Least-squares Gaussian expansion of ``strength * exp(-r/L)/r``.

    The fit minimises the relative RMS deviation on a log-spaced grid over
    ``r_window`` (default ``(0.05, 10) * screening_length``). Ranges are
    optimised by variable projection; strengths solve a linear problem.
    Fits with more terms start from the fit with one term fewer plus one new
    range. A last pass flattens the pointwise error towards the minimax fit,
    which mostly helps the window edges.

    The default window, term count and tolerance are working conventions,
    not physical inputs; tighten them for quantitative Yukawa studies.
    """
    if not screening_length > 0.0:
        raise PotentialError("screening_length must be positive")
    if n_terms < 1:
        raise PotentialError("n_terms must be at least 1")
    if r_window is None:
        r_window = (0.05 * screening_length, 10.0 * screening_length)
    r_min, r_max = map(float, r_window)
    if not 0.0 < r_min < r_max:
        raise PotentialError("need 0 < r_min < r_max")
    params = (
        ("strength", float(strength)),
        ("screening_length", float(screening_length)),
        ("n_terms", int(n_terms)),
        ("r_window", (r_min, r_max)),
    )
    if strength == 0.0:
        return PotentialModel((), form="yukawa_fit", params=params, residual=0.0)

    r = _fit_grid(r_min, r_max)
    target = yukawa(r, 1.0, screening_length)
    start = min(n_terms, 4)
    x = np.log(np.geomspace(r_min, r_max, start))
    x = _refine(x, r, target)
    for k in range(start + 1, n_terms + 1):
        # new range inserted in the widest log gap (or beyond the ends)
        edges = np.concatenate([[np.log(r_min) - 1.0], x, [np.log(r_max) + 1.0]])
        gaps = np.diff(edges)
        i = int(np.argmax(gaps))
        x = np.sort(np.append(x, 0.5 * (edges[i] + edges[i + 1])))
        x = _refine(x, r, target)
    coef, _ = _solve_strengths(x, r, target)
    coef, x = _flatten_error(coef, x, r, target)
    with np.errstate(over="ignore", under="ignore"):
        resid = np.exp(-(r[:, None] ** 2) / np.exp(2.0 * x)[None, :]) @ coef / target - 1.0
    residual = float(np.sqrt(np.mean(resid**2)))
    if not residual < tolerance:
        raise FitError(f"fit tolerance not met: residual {residual:.3e} >= {tolerance:.1e} with {n_terms} terms")
    terms = tuple((strength * c, math.exp(xi)) for c, xi in zip(coef, x))
    return PotentialModel(terms, form="yukawa_fit", params=params, residual=residual)


def make_core_pocket_tail(
    core_height: float,
    core_range: float,
    pocket_depth: float,
    pocket_range: float,
    tail_height: float,
    tail_range: float,
) -> PotentialModel:
    """Repulsive core, attractive pocket and repulsive outer barrier.

    The three-Gaussian sum is sampled densely on (0, 5*tail_range) and must
    show V(0) > 0, a negative minimum and a positive maximum beyond it.
    """
    if not 0.0 < core_range < pocket_range < tail_range:
        raise PotentialError("need 0 < core_range < pocket_range < tail_range")
    if pocket_depth >= 0.0:
        raise PotentialError("no attractive pocket: pocket_depth must be negative")
    if core_height <= 0.0 or tail_height <= 0.0:
        raise PotentialError("core_height and tail_height must be positive")
    pot = PotentialModel(
        ((core_height, core_range), (pocket_depth, pocket_range), (tail_height, tail_range)),
        form="core_pocket_tail",
        params=(
            ("core_height", float(core_height)),
            ("core_range", float(core_range)),
            ("pocket_depth", float(pocket_depth)),
            ("pocket_range", float(pocket_range)),
            ("tail_height", float(tail_height)),
            ("tail_range", float(tail_range)),
        ),
    )
    problems = core_pocket_tail_shape(pot, 5.0 * tail_range)
    if problems:
        raise PotentialError("potential lacks core/pocket/tail shape: " + "; ".join(problems))
    return pot


def core_pocket_tail_shape(pot: PotentialModel, r_max: float, n: int = 20001) -> list[str]:
    """Return shape violations (empty list when the shape contract holds)."""
    r = np.linspace(0.0, r_max, n)
    v = pot(r)
    problems = []
    if not v[0] > 0.0:
        problems.append("no repulsive core (V(0) <= 0)")
    i_min = int(np.argmin(v))
    if not v[i_min] < 0.0:
        problems.append("no attractive pocket")
        return problems
    beyond = v[i_min:]
    i_max = int(np.argmax(beyond))
    if not (beyond[i_max] > 0.0 and 0 < i_max < len(beyond) - 1):
        problems.append("no repulsive barrier beyond the pocket")
    return problems


def from_config(entry: dict) -> PotentialModel:
    """Build a potential from its JSON declaration ``{"form": ..., parameters}``."""
    entry = dict(entry)
    form = entry.pop("form", "gaussian")
    if form == "gaussian":
        return make_gaussian(entry["depth"], entry["range"])
    if form in ("yukawa", "yukawa_fit"):
        window = entry.get("r_window")
        return fit_yukawa(
            entry["strength"],
            entry["screening_length"],
            int(entry.get("n_terms", 8)),
            tuple(window) if window is not None else None,
            float(entry.get("tolerance", 1e-2)),
        )
    if form == "core_pocket_tail":
        keys = ("core_height", "core_range", "pocket_depth", "pocket_range", "tail_height", "tail_range")
        return make_core_pocket_tail(*(entry[k] for k in keys))
    if form == "custom":
        return PotentialModel(tuple(tuple(t) for t in entry.get("terms", [])), form="custom")
    if form == "zero":
        return PotentialModel((), form="zero")
    raise PotentialError(f"unknown potential form {form!r}")


def scattering_length(potential: PotentialModel, reduced_mass: float) -> float:
    """s-wave scattering length (three dimensions) from zero-energy Numerov integration.

    ``math.inf`` signals a zero-energy resonance (|a| > 1e6).
    """
    from .radial import scattering_length as _a

    if not reduced_mass > 0.0:
        raise PotentialError("reduced_mass must be positive")
    return _a(potential, reduced_mass)
