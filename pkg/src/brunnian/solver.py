"""Stochastic variational solver with explicitly correlated Gaussians.

Basis functions are exp(-1/2 x^T A x) over the N-1 Jacobi vectors x (one
copy of A per Cartesian direction), projected onto the permutation symmetry
of identical bosons or fermions. Overlap, kinetic and Gaussian-potential
matrix elements are closed form. The basis grows one function at a time:
each step draws random candidates and keeps the one that lowers the ground
energy most, found from the secular equation of the bordered (arrowhead)
Hamiltonian in the current eigenbasis.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .model import (
    BINDING_TOLERANCE,
    SolveResult,
    SystemSpec,
    sub_compositions,
    validate_system,
)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class EmptyChannelError(SolverError):
    """The symmetry projection annihilates every s-wave basis function (e.g. an identical-fermion pair)."""


@dataclass(frozen=True)
class SolverSettings:
    max_basis: int = 200
    candidates_per_step: int = 30
    # log-uniform pair correlation lengths, in units of the system length scale
    width_window: tuple[float, float] = (1e-2, 1e2)
    stall_steps: int = 15
    convergence_tolerance: float = 1e-5
    symmetrize: bool = True
    random_seed: int = 0
    binding_tolerance: float = BINDING_TOLERANCE
    overlap_guard: float = 1e-10
    consistency_tolerance: float = 1e-7

    def __post_init__(self):
        if self.max_basis < 1 or self.candidates_per_step < 1 or self.stall_steps < 1:
            raise ValueError("max_basis, candidates_per_step and stall_steps must be positive")
        lo, hi = self.width_window
        if not 0.0 < lo < hi:
            raise ValueError(f"width_window bounds must satisfy 0 < lo < hi, got {self.width_window}")
        object.__setattr__(self, "width_window", (float(lo), float(hi)))
        if not self.convergence_tolerance > 0 or not self.binding_tolerance >= 0:
            raise ValueError("tolerances must be positive")

    def replace(self, **changes) -> "SolverSettings":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return SolverSettings(**values)

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d["width_window"] = list(self.width_window)
        return d


@dataclass(frozen=True)
class JacobiFrame:
    """Sequential Jacobi coordinates.

    ``transformation`` is (N-1) x N, mapping particle positions to relative
    vectors; ``inverse`` is N x (N-1) and gives each particle's position
    relative to the centre of mass.
    """

    transformation: np.ndarray
    reduced_masses: np.ndarray
    masses: np.ndarray
    full: np.ndarray = field(repr=False)
    inverse: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.reduced_masses)

    def pair_vector(self, i: int, j: int) -> np.ndarray:
        """w with r_i - r_j = sum_k w_k x_k."""
        return self.inverse[i] - self.inverse[j]

    def permutation(self, perm) -> np.ndarray:
        """Matrix T with x' = T x when particle positions are permuted r'_i = r_perm[i]."""
        N = len(self.masses)
        P = np.zeros((N, N))
        P[np.arange(N), list(perm)] = 1.0
        T = self.full @ P @ np.linalg.inv(self.full)
        return T[: self.n, : self.n]


def build_jacobi(spec_or_masses) -> JacobiFrame:
    if isinstance(spec_or_masses, SystemSpec):
        masses = np.array([p.mass for p in spec_or_masses.particles], dtype=float)
    else:
        masses = np.asarray(spec_or_masses, dtype=float)
    N = len(masses)
    full = np.zeros((N, N))
    mu = np.zeros(N - 1)
    for k in range(N - 1):
        m_acc = masses[: k + 1].sum()
        full[k, : k + 1] = -masses[: k + 1] / m_acc
        full[k, k + 1] = 1.0
        mu[k] = m_acc * masses[k + 1] / (m_acc + masses[k + 1])
    full[N - 1] = masses / masses.sum()
    inv = np.linalg.inv(full)
    return JacobiFrame(full[: N - 1].copy(), mu, masses, full, inv[:, : N - 1].copy())


@dataclass(frozen=True)
class CorrelatedGaussian:
    """exp(-1/2 x^T A x) with A symmetric positive definite."""

    width_matrix: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.width_matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
            raise ValueError("width matrix must be square and symmetric")
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError as exc:
            raise ValueError("width matrix is not positive definite") from exc
        object.__setattr__(self, "width_matrix", A)


class Hamiltonian:
    """Precomputed operator data for one system: kinetic metric, pair vectors, permutations."""

    def __init__(self, spec: SystemSpec, symmetrize: bool = True):
        self.spec = spec
        self.d = spec.dimension
        self.frame = build_jacobi(spec)
        self.n = self.frame.n
        self.lam = 1.0 / self.frame.reduced_masses
        pairs = list(itertools.combinations(range(spec.n), 2))
        self.pair_index = pairs
        self.W = np.array([self.frame.pair_vector(i, j) for i, j in pairs]).reshape(len(pairs), self.n)
        pots = [spec.potential(spec.particles[i].species, spec.particles[j].species) for i, j in pairs]
        n_terms = max([len(p.terms) for p in pots] + [1])
        self.strength = np.zeros((len(pairs), n_terms))
        self.coeff = np.ones((len(pairs), n_terms))
        for p, pot in enumerate(pots):
            for t, (s, b) in enumerate(pot.terms):
                self.strength[p, t] = s
                self.coeff[p, t] = 2.0 / (b * b)
        self.perms, self.signs = self._permutations(spec, symmetrize)
        # rigorous lower bound: kinetic energy >= 0 and each pair sits at its potential minimum
        floor = 0.0
        for pot in pots:
            if pot.terms:
                r = np.linspace(0.0, 7.0 * float(pot.ranges.max()), 2001)
                floor += min(float(np.min(pot(r))), 0.0)
        self.energy_floor = 1.01 * floor - 1e-12

    def _permutations(self, spec, symmetrize):
        groups = {}
        for idx, p in enumerate(spec.particles):
            if symmetrize and p.statistics in ("boson", "fermion"):
                groups.setdefault(p.species, []).append(idx)
        group_perms = []
        for sp, members in sorted(groups.items()):
            fermion = spec.representative(sp).statistics == "fermion"
            opts = []
            for perm in itertools.permutations(members):
                sign = _perm_sign([members.index(m) for m in perm]) if fermion else 1
                opts.append((dict(zip(members, perm)), sign))
            group_perms.append(opts)
        mats, signs = [], []
        for combo in itertools.product(*group_perms):
            mapping = list(range(spec.n))
            sign = 1
            for m, s in combo:
                for a, b in m.items():
                    mapping[a] = b
                sign *= s
            mats.append(self.frame.permutation(mapping))
            signs.append(sign)
        return np.array(mats).reshape(len(mats), self.n, self.n), np.array(signs, dtype=float)

    def permuted(self, B):
        """T_P^T B T_P for every symmetry permutation; B (..., n, n) -> (..., G, n, n)."""
        T = self.perms
        return np.einsum("gji,...jk,gkl->...gil", T, B, T)

    def elements(self, A, Bp, log_norm_a, log_norm_b):
        """Overlap, kinetic and potential elements between primitive widths.

        ``A`` (..., n, n) bra widths broadcast against ``Bp`` (..., n, n) ket
        widths. Returns normalised overlap and the kinetic and potential
        values divided by the overlap.
        """
        d = self.d
        C = A + Bp
        sign, logdet = np.linalg.slogdet(C)
        if np.any(sign <= 0):
            raise SolverError("loss of positive definiteness in matrix elements")
        Cinv = np.linalg.inv(C)
        overlap = np.exp(log_norm_a + log_norm_b - 0.5 * d * logdet)
        M = A @ Cinv @ Bp
        kinetic = 0.5 * d * np.einsum("...ii,i->...", M, self.lam)
        q = np.einsum("pi,...ij,pj->...p", self.W, Cinv, self.W)
        pot = np.einsum("pt,...pt->...", self.strength, (1.0 + self.coeff * q[..., None]) ** (-0.5 * d))
        return overlap, kinetic, pot

    def log_norm(self, A):
        """log of the primitive normalisation, det(2A)^(d/4)."""
        return 0.25 * self.d * np.linalg.slogdet(2.0 * A)[1]


def _perm_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def matrix_elements(bra: CorrelatedGaussian, ket: CorrelatedGaussian, spec: SystemSpec, frame: JacobiFrame | None = None):
    """(overlap, kinetic, potential) between two normalised primitive Gaussians (no symmetrisation)."""
    H = Hamiltonian(spec, symmetrize=False)
    if frame is not None and not np.allclose(frame.transformation, H.frame.transformation):
        raise ValueError("frame does not match spec")
    A, B = bra.width_matrix, ket.width_matrix
    if A.shape != (H.n, H.n) or B.shape != (H.n, H.n):
        raise ValueError("width matrices do not match the number of Jacobi coordinates")
    ov, kin, pot = H.elements(A, B, H.log_norm(A), H.log_norm(B))
    return float(ov), float(ov * kin), float(ov * pot)


@dataclass
class BasisState:
    """Accepted basis and ground-state coefficients (normalised, symmetrised functions)."""

    hamiltonian: Hamiltonian
    widths: np.ndarray
    scale: np.ndarray
    coefficients: np.ndarray
    energies: np.ndarray

    def quadratic_expectation(self, Q: np.ndarray) -> float:
        """<x^T Q x> summed over Cartesian components, for the ground state."""
        H = self.hamiltonian
        A = self.widths
        ln = H.log_norm(A)
        Bp = H.permuted(A)  # (K, G, n, n)
        C = A[:, None, None] + Bp[None]  # (K, K, G, n, n)
        sign, logdet = np.linalg.slogdet(C)
        ov = np.exp(ln[:, None, None] + ln[None, :, None] - 0.5 * H.d * logdet)
        tr = np.einsum("ij,...ji->...", Q, np.linalg.inv(C))
        S = np.einsum("g,klg->kl", H.signs, ov)
        R = np.einsum("g,klg->kl", H.signs, ov * H.d * tr)
        c = self.coefficients * self.scale
        return float(c @ R @ c / (c @ S @ c))


def _sample_widths(rng, W, lengths, count):
    """Random width matrices A = sum_pairs w w^T / alpha^2 with log-uniform alpha."""
    lo, hi = np.log(lengths[0]), np.log(lengths[1])
    alpha = np.exp(rng.uniform(lo, hi, size=(count, W.shape[0])))
    return np.einsum("cp,pi,pj->cij", 1.0 / alpha**2, W, W)


def _lowest_arrowhead(E, v, z):
    """Lowest root of z - lam - sum v^2/(E - lam) = 0 for each row (vectorised Newton from the right)."""
    # start from the 2x2 problem with the current ground state: an upper bound on the root
    e0 = E[0]
    v0 = v[:, 0]
    mean = 0.5 * (e0 + z)
    lam = mean - np.sqrt((0.5 * (z - e0)) ** 2 + v0**2)
    for _ in range(100):
        diff = E[None, :] - lam[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            f = z - lam - np.sum(v * v / diff, axis=1)
            fp = -1.0 - np.sum(v * v / diff**2, axis=1)
            step = f / fp
        lam_new = lam - step
        done = np.abs(step) <= 1e-15 * np.maximum(np.abs(lam), 1e-300)
        lam = np.where(np.isfinite(lam_new), lam_new, lam)
        if np.all(done):
            break
    return lam


class _Basis:
    """Accepted functions with an incremental Cholesky factor of the overlap matrix.

    The transformed Hamiltonian L^-1 H L^-T is rediagonalised from the stored
    matrix elements after every accepted function, so rounding errors do not
    accumulate from step to step.
    """

    def __init__(self, H: Hamiltonian, capacity: int):
        n, G = H.n, len(H.signs)
        self.K = 0
        self.widths = np.zeros((capacity, n, n))
        self.perm_widths = np.zeros((capacity, G, n, n))
        self.log_norms = np.zeros(capacity)
        self.scale = np.zeros(capacity)
        self.S = np.zeros((capacity, capacity))
        self.Hm = np.zeros((capacity, capacity))
        self.L = np.zeros((capacity, capacity))
        self.E = np.zeros(0)
        self.U = np.zeros((0, 0))

    def project(self, vectors):
        """L^-1 applied to rows of ``vectors`` (c, K) -> (c, K)."""
        K = self.K
        return solve_triangular(self.L[:K, :K], vectors.T, lower=True, check_finite=False).T

    def add(self, width, perm_width, log_norm, scale, s_vec, h_vec, h_nn, y, root):
        K = self.K
        self.widths[K] = width
        self.perm_widths[K] = perm_width
        self.log_norms[K] = log_norm
        self.scale[K] = scale
        self.S[K, :K] = self.S[:K, K] = s_vec
        self.S[K, K] = 1.0
        self.Hm[K, :K] = self.Hm[:K, K] = h_vec
        self.Hm[K, K] = h_nn
        self.L[K, :K] = y
        self.L[K, K] = root
        self.K = K + 1
        K += 1
        L = self.L[:K, :K]
        X = solve_triangular(L, self.Hm[:K, :K], lower=True, check_finite=False)
        Ht = solve_triangular(L, X.T, lower=True, check_finite=False)
        E, U = np.linalg.eigh(0.5 * (Ht + Ht.T))
        return E, U

    def consistent(self, energy, u0, tol):
        """Rayleigh quotient of the new ground state from the raw S and H agrees with ``energy``."""
        K = self.K
        c = solve_triangular(self.L[:K, :K].T, u0, lower=False, check_finite=False)
        S, Hm = self.S[:K, :K], self.Hm[:K, :K]
        rq = (c @ Hm @ c) / (c @ S @ c)
        scale = max(1.0, float(np.max(np.abs(np.diag(Hm)))))
        return abs(rq - energy) <= tol * scale

    def pop(self):
        self.K -= 1
        K = self.K
        self.S[K, :] = self.S[:, K] = 0.0
        self.Hm[K, :] = self.Hm[:, K] = 0.0
        self.L[K, :] = 0.0

    def ground_coefficients(self):
        K = self.K
        return solve_triangular(self.L[:K, :K].T, self.U[:, 0], lower=False, check_finite=False)


def _run_svm(H: Hamiltonian, settings: SolverSettings, seed: int, length_scale: float):
    rng = np.random.default_rng([settings.random_seed, seed])
    lengths = (settings.width_window[0] * length_scale, settings.width_window[1] * length_scale)
    basis = _Basis(H, settings.max_basis)
    trace = []
    stall = 0
    rejected = 0
    while basis.K < settings.max_basis:
        K = basis.K
        cand = _sample_widths(rng, H.W, lengths, settings.candidates_per_step)
        cand_ln = H.log_norm(cand)
        # diagonal (self) elements of the projected candidates
        cp = H.permuted(cand)  # (c, G, n, n)
        ov, kin, pot = H.elements(cand[:, None], cp, cand_ln[:, None], cand_ln[:, None])
        s_nn = ov @ H.signs
        h_nn = (ov * (kin + pot)) @ H.signs
        ok = s_nn > settings.overlap_guard
        if K == 0 and not np.any(s_nn > 1e-13):
            raise EmptyChannelError("symmetry projection leaves no s-wave state for this system")
        s_nn = np.where(ok, s_nn, 1.0)
        h_nn = h_nn / s_nn
        if K:
            ov, kin, pot = H.elements(
                cand[:, None, None],
                basis.perm_widths[None, :K],
                cand_ln[:, None, None],
                basis.log_norms[None, :K, None],
            )
            norm = 1.0 / np.sqrt(s_nn)[:, None] * basis.scale[None, :K]
            s_vec = (ov @ H.signs) * norm
            h_vec = ((ov * (kin + pot)) @ H.signs) * norm
            y = basis.project(s_vec)
            b = y @ basis.U
            g = basis.project(h_vec) @ basis.U
            norm2 = 1.0 - np.sum(y * y, axis=1)
            ok &= norm2 > settings.overlap_guard
            norm2 = np.where(ok, norm2, 1.0)
            root = np.sqrt(norm2)
            E = basis.E
            v = (g - E[None, :] * b) / root[:, None]
            z = (h_nn - 2.0 * np.sum(b * g, axis=1) + np.sum(b * b * E[None, :], axis=1)) / norm2
            lam = _lowest_arrowhead(E, v, z)
        else:
            lam = h_nn.copy()
        lam = np.where(ok & np.isfinite(lam), lam, np.inf)
        best = int(np.argmin(lam))
        prev = basis.E[0] if K else np.inf
        accepted = False
        if np.isfinite(lam[best]) and lam[best] < prev:
            args = (cand[best], cp[best], cand_ln[best], 1.0 / np.sqrt(s_nn[best]))
            if K:
                new_E, new_U = basis.add(*args, s_vec[best], h_vec[best], h_nn[best], y[best], root[best])
            else:
                new_E, new_U = basis.add(*args, np.zeros(0), np.zeros(0), h_nn[best], np.zeros(0), 1.0)
            if (
                H.energy_floor <= new_E[0] < prev
                and basis.consistent(new_E[0], new_U[:, 0], settings.consistency_tolerance)
            ):
                basis.E, basis.U = new_E, new_U
                accepted = True
            else:
                basis.pop()
        if not accepted:
            if K == 0:
                raise SolverError("no admissible basis candidate in the first step")
            rejected += 1
            stall += 1
            if stall >= settings.stall_steps:
                break
            continue
        E0 = basis.E[0]
        trace.append((basis.K, float(E0)))
        gain = prev - E0
        if gain <= settings.convergence_tolerance * max(abs(E0), settings.binding_tolerance):
            stall += 1
        else:
            stall = 0
        if stall >= settings.stall_steps:
            break
    K = basis.K
    state = BasisState(H, basis.widths[:K].copy(), basis.scale[:K].copy(), basis.ground_coefficients(), basis.E.copy())
    return trace, state


def solve_ground_state(
    spec: SystemSpec,
    settings: SolverSettings | None = None,
    threshold: float | None = None,
    cache: "EnergyCache | None" = None,
) -> SolveResult:
    """Variational ground state of ``spec``.

    ``threshold`` is the breakup energy the verdict is measured against; when
    omitted it is computed with :func:`lowest_threshold`.
    """
    settings = settings or SolverSettings()
    validate_system(spec)
    cache = cache if cache is not None else EnergyCache(settings)
    result = cache.solve(spec)
    if threshold is None:
        threshold = cache.threshold(spec)
    return SolveResult(
        result.energy,
        result.basis_size,
        result.convergence_trace,
        float(threshold),
        settings.binding_tolerance,
        result.state,
    )


def _raw_solve(spec: SystemSpec, settings: SolverSettings) -> SolveResult:
    spec = spec.canonical()
    H = Hamiltonian(spec, settings.symmetrize)
    trace, state = _run_svm(H, settings, spec.structure_seed(), spec.length_scale())
    energy = trace[-1][1]
    log.debug("solved %s: E=%.10g with %d functions", spec.composition, energy, len(trace))
    return SolveResult(energy, len(trace), tuple(trace), 0.0, settings.binding_tolerance, state)


class EnergyCache:
    """Memoised variational energies and breakup thresholds for one settings object.

    Keys are :meth:`SystemSpec.cache_key`, i.e. composition, masses, statistics
    and the acting potentials.
    """

    def __init__(self, settings: SolverSettings | None = None):
        self.settings = settings or SolverSettings()
        self._solves: dict = {}
        self._thresholds: dict = {}

    def solve(self, spec: SystemSpec) -> SolveResult:
        key = spec.cache_key()
        if key not in self._solves:
            if spec.n < 2:
                self._solves[key] = SolveResult(0.0, 0, (), 0.0, self.settings.binding_tolerance)
            else:
                try:
                    self._solves[key] = _raw_solve(spec, self.settings)
                except EmptyChannelError as exc:
                    self._solves[key] = exc
        hit = self._solves[key]
        if isinstance(hit, EmptyChannelError):
            raise hit
        return hit

    def fragment_energy(self, spec: SystemSpec) -> float:
        """Lowest energy of a fragment: its bound ground state or, if unbound, its own threshold.

        A fragment with no state in the modelled channel (two identical
        fermions) cannot bind there and contributes its threshold.
        """
        if spec.n < 2:
            return 0.0
        try:
            energy = self.solve(spec).energy
        except EmptyChannelError:
            return self.threshold(spec)
        return min(energy, self.threshold(spec))

    def threshold(self, spec: SystemSpec) -> float:
        if spec.n < 2:
            raise ValueError("threshold needs at least two particles")
        key = spec.cache_key()
        if key in self._thresholds:
            return self._thresholds[key]
        best = np.inf
        for first, second in two_fragment_partitions(spec.composition):
            e = self.fragment_energy(spec.with_composition(first)) + self.fragment_energy(spec.with_composition(second))
            best = min(best, e)
        self._thresholds[key] = float(best)
        return float(best)

    def result(self, spec: SystemSpec) -> SolveResult:
        """Solve result with its own lowest threshold attached."""
        r = self.solve(spec)
        return SolveResult(r.energy, r.basis_size, r.convergence_trace, self.threshold(spec), r.tolerance, r.state)


def two_fragment_partitions(composition):
    """Unordered splits of a multiset into two nonempty parts."""
    comp = tuple(composition)
    total = dict(comp)
    size = sum(total.values())
    seen = set()
    out = []
    for part in sub_compositions(comp, 1, size - 1):
        d = dict(part)
        rest = tuple((sp, total[sp] - d.get(sp, 0)) for sp, _ in comp if total[sp] - d.get(sp, 0))
        key = tuple(sorted((part, rest)))
        if key in seen:
            continue
        seen.add(key)
        out.append((part, rest))
    return out


def lowest_threshold(spec: SystemSpec, settings: SolverSettings | None = None, cache: EnergyCache | None = None) -> float:
    """Minimum over two-fragment partitions of the summed fragment ground energies."""
    validate_system(spec) if spec.n >= 2 else None
    cache = cache if cache is not None else EnergyCache(settings)
    return cache.threshold(spec)


def mean_square_radius(spec: SystemSpec, result: SolveResult) -> float:
    """Mean over particles of <|r_i - R_cm|^2> in the variational ground state."""
    state: BasisState = result.state
    if state is None:
        raise ValueError("result carries no basis state")
    frame = state.hamiltonian.frame
    g = frame.inverse
    Q = g.T @ g / len(frame.masses)
    return state.quadratic_expectation(Q)


def mean_square_pair_distance(spec: SystemSpec, result: SolveResult) -> float:
    """Mean over pairs of <|r_i - r_j|^2>."""
    state: BasisState = result.state
    H = state.hamiltonian
    Q = H.W.T @ H.W / len(H.W)
    return state.quadratic_expectation(Q)
