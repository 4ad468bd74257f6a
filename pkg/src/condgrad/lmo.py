"""Linear minimization oracles and structured extreme-point representations.

Each oracle returns, for a direction ``g``, an extreme point of its feasible
region minimizing ``<g, .>``. Tie-breaking is everywhere "smallest index
wins" so runs are reproducible. Oracles over polytopes with pinnable
coordinates additionally expose restricted (in-face) argmin/argmax oracles
used by the decomposition-invariant solvers.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import ContractViolation

# Coordinates within this tolerance of a bound are treated as on the face.
FACE_PIN_TOL = 1e-10

_POWER_SEED = 20240731
_POWER_TOL = 1e-9
_POWER_MAX_ITERS = 10_000
# Below this size a dense LAPACK factorization beats power-iteration sweeps
# (and is immune to the clustered spectra that arise near optimal faces).
_DENSE_EIG_MAX = 256


class UnsupportedOracleError(TypeError):
    """The oracle does not implement the requested restricted operation."""


class InfeasibleFaceError(RuntimeError):
    """No extreme point exists under the requested face fixings."""


# ---------------------------------------------------------------------------
# Atoms


@dataclass(frozen=True)
class Permutation:
    """n x n 0/1 matrix with ones at (i, sigma[i])."""

    sigma: tuple

    def __post_init__(self):
        n = len(self.sigma)
        if sorted(self.sigma) != list(range(n)):
            raise ContractViolation("sigma must be a bijection on 0..n-1")

    @property
    def n(self) -> int:
        return len(self.sigma)


@dataclass(frozen=True)
class RankOne:
    """Rank-one matrix ``scale * outer(u, v)`` with unit-norm factors."""

    scale: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for f in (self.u, self.v):
            if abs(np.linalg.norm(f) - 1.0) > 1e-12:
                raise ContractViolation("RankOne factors must have unit norm")


def atom_dense(atom) -> np.ndarray:
    """Materialize any atom as a dense float array."""
    if isinstance(atom, Permutation):
        out = np.zeros((atom.n, atom.n))
        out[np.arange(atom.n), list(atom.sigma)] = 1.0
        return out
    if isinstance(atom, RankOne):
        return atom.scale * np.outer(atom.u, atom.v)
    return np.asarray(atom, dtype=np.float64)


def atom_dot(atom, g: np.ndarray) -> float:
    """Inner product ``<g, atom>`` without materializing when structured."""
    if isinstance(atom, Permutation):
        return float(g[np.arange(atom.n), list(atom.sigma)].sum())
    if isinstance(atom, RankOne):
        return float(atom.scale * (atom.u @ g @ atom.v))
    return float(np.vdot(g, atom))


def atoms_equal(a, b) -> bool:
    """Exact structural equality used for active-set merging."""
    if isinstance(a, Permutation) and isinstance(b, Permutation):
        return a.sigma == b.sigma
    if isinstance(a, RankOne) and isinstance(b, RankOne):
        return (
            a.scale == b.scale
            and np.array_equal(a.u, b.u)
            and np.array_equal(a.v, b.v)
        )
    if isinstance(a, (Permutation, RankOne)) or isinstance(b, (Permutation, RankOne)):
        return False
    return np.array_equal(a, b)


@dataclass
class FaceFixings:
    """Coordinates pinned by the current face of a 0/1-or-box polytope."""

    fixed_zero: np.ndarray
    fixed_one: np.ndarray

    def __post_init__(self):
        inter = np.intersect1d(self.fixed_zero, self.fixed_one)
        if inter.size:
            raise ContractViolation("fixed_zero and fixed_one must be disjoint")


# ---------------------------------------------------------------------------
# Vector-domain oracles


class ProbabilitySimplexOracle:
    """Scaled probability simplex ``{x >= 0, sum x = tau}``."""

    def __init__(self, tau: float = 1.0):
        if tau <= 0:
            raise ContractViolation("tau must be positive")
        self.tau = tau

    def extreme_point(self, g: np.ndarray) -> np.ndarray:
        if g.size == 0:
            raise ContractViolation("empty direction")
        out = np.zeros_like(g, dtype=np.float64)
        out[int(np.argmin(g))] = self.tau
        return out

    def coordinate_bounds(self, x: np.ndarray):
        return np.zeros_like(x), np.full_like(x, self.tau)

    def inface_extreme_points(self, g: np.ndarray, x: np.ndarray):
        free = np.flatnonzero(x > FACE_PIN_TOL)
        if free.size == 0:
            raise InfeasibleFaceError("no free coordinate on the simplex face")
        s = np.zeros_like(g, dtype=np.float64)
        a = np.zeros_like(g, dtype=np.float64)
        s[free[int(np.argmin(g[free]))]] = self.tau
        a[free[int(np.argmax(g[free]))]] = self.tau
        return s, a


class KSparseOracle:
    """Intersection ``B1(K * tau) ∩ Binf(tau)``; vertices have exactly K
    entries of magnitude tau."""

    def __init__(self, k: int, tau: float = 1.0):
        if k < 1:
            raise ContractViolation("K must be >= 1")
        if tau <= 0:
            raise ContractViolation("tau must be positive")
        self.k = k
        self.tau = tau

    def extreme_point(self, g: np.ndarray) -> np.ndarray:
        if self.k > g.size:
            raise ContractViolation("K exceeds the dimension")
        order = np.argsort(-np.abs(g), kind="stable")[: self.k]
        out = np.zeros_like(g, dtype=np.float64)
        signs = np.where(g[order] < 0, 1.0, -1.0)  # sign(0) treated as +1
        out[order] = self.tau * signs
        return out


class HypersimplexOracle:
    """Convex hull of 0/tau vectors with exactly K entries equal to tau."""

    def __init__(self, k: int, tau: float = 1.0):
        if k < 1:
            raise ContractViolation("K must be >= 1")
        if tau <= 0:
            raise ContractViolation("tau must be positive")
        self.k = k
        self.tau = tau

    def extreme_point(self, g: np.ndarray) -> np.ndarray:
        if self.k > g.size:
            raise ContractViolation("K exceeds the dimension")
        chosen = np.argsort(g, kind="stable")[: self.k]
        out = np.zeros_like(g, dtype=np.float64)
        out[chosen] = self.tau
        return out

    def coordinate_bounds(self, x: np.ndarray):
        return np.zeros_like(x), np.full_like(x, self.tau)

    def inface_extreme_points(self, g: np.ndarray, x: np.ndarray):
        at_tau = x >= self.tau - FACE_PIN_TOL
        at_zero = x <= FACE_PIN_TOL
        free = np.flatnonzero(~at_tau & ~at_zero)
        remaining = self.k - int(at_tau.sum())
        if remaining < 0 or remaining > free.size:
            raise InfeasibleFaceError("face fixings incompatible with K")
        base = np.where(at_tau, self.tau, 0.0)
        s = base.copy()
        a = base.copy()
        if remaining > 0:
            s[free[np.argsort(g[free], kind="stable")[:remaining]]] = self.tau
            a[free[np.argsort(-g[free], kind="stable")[:remaining]]] = self.tau
        return s, a


class BoxOracle:
    """Axis-aligned box ``{lower <= x <= upper}`` (coordinate-wise)."""

    def __init__(self, lower: np.ndarray, upper: np.ndarray):
        lower = np.asarray(lower, dtype=np.float64)
        upper = np.asarray(upper, dtype=np.float64)
        if np.any(lower > upper):
            raise ContractViolation("need lower <= upper coordinate-wise")
        self.lower = lower
        self.upper = upper

    def extreme_point(self, g: np.ndarray) -> np.ndarray:
        # Ties (g == 0) go to the lower bound.
        return np.where(g < 0, self.upper, self.lower).astype(np.float64)

    def coordinate_bounds(self, x: np.ndarray):
        return self.lower, self.upper

    def inface_extreme_points(self, g: np.ndarray, x: np.ndarray):
        at_lo = x <= self.lower + FACE_PIN_TOL
        at_hi = x >= self.upper - FACE_PIN_TOL
        free = ~at_lo & ~at_hi
        base = np.where(at_hi, self.upper, self.lower)
        s = base.copy()
        a = base.copy()
        s[free] = np.where(g[free] < 0, self.upper[free], self.lower[free])
        a[free] = np.where(g[free] > 0, self.upper[free], self.lower[free])
        return s, a


# ---------------------------------------------------------------------------
# Matrix-domain oracles


class BirkhoffOracle:
    """Doubly stochastic matrices; vertices are permutation matrices."""

    def extreme_point(self, g: np.ndarray) -> Permutation:
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ContractViolation("Birkhoff direction must be a square matrix")
        rows, cols = linear_sum_assignment(g)
        sigma = np.empty(g.shape[0], dtype=int)
        sigma[rows] = cols
        return Permutation(tuple(int(c) for c in sigma))

    def coordinate_bounds(self, x: np.ndarray):
        return np.zeros_like(x), np.ones_like(x)

    def extreme_point_with_fixings(
        self, g: np.ndarray, fixings: FaceFixings, maximize: bool = False
    ) -> Permutation:
        """Optimal assignment respecting fixed cells.

        ``fixings`` indexes flattened cells of the n x n matrix. Cells fixed
        to one remove their row/column pair from the subproblem; cells fixed
        to zero are forbidden (infinite cost).
        """
        n = g.shape[0]
        fixed_one = [(int(i) // n, int(i) % n) for i in np.atleast_1d(fixings.fixed_one)]
        rows_taken = {r for r, _ in fixed_one}
        cols_taken = {c for _, c in fixed_one}
        if len(rows_taken) != len(fixed_one) or len(cols_taken) != len(fixed_one):
            raise ContractViolation("a row/column pair is fixed to one twice")
        free_rows = [r for r in range(n) if r not in rows_taken]
        free_cols = [c for c in range(n) if c not in cols_taken]
        cost = g[np.ix_(free_rows, free_cols)].astype(np.float64).copy()
        if maximize:
            cost = -cost
        for i in np.atleast_1d(fixings.fixed_zero):
            r, c = int(i) // n, int(i) % n
            if r in rows_taken or c in cols_taken:
                continue
            cost[free_rows.index(r), free_cols.index(c)] = np.inf
        try:
            rr, cc = linear_sum_assignment(cost)
        except ValueError as exc:
            raise InfeasibleFaceError(str(exc)) from exc
        if not np.isfinite(cost[rr, cc]).all():
            raise InfeasibleFaceError("assignment uses a forbidden cell")
        sigma = np.empty(n, dtype=int)
        for r, c in fixed_one:
            sigma[r] = c
        for i, j in zip(rr, cc):
            sigma[free_rows[i]] = free_cols[j]
        return Permutation(tuple(int(c) for c in sigma))

    def inface_extreme_points(self, g: np.ndarray, x: np.ndarray):
        flat = x.ravel()
        fixings = FaceFixings(
            fixed_zero=np.flatnonzero(flat <= FACE_PIN_TOL),
            fixed_one=np.flatnonzero(flat >= 1.0 - FACE_PIN_TOL),
        )
        s = self.extreme_point_with_fixings(g, fixings, maximize=False)
        a = self.extreme_point_with_fixings(g, fixings, maximize=True)
        return s, a


def _power_iteration(apply_b: Callable[[np.ndarray], np.ndarray], n: int):
    """Dominant eigenvector of the PSD operator ``apply_b`` on R^n.

    Deterministic seeded start; stops when the Rayleigh-quotient residual
    ``||Bv - rho v||`` falls below 1e-9 relative to ``1 + |rho|``; hard cap
    of 10 000 sweeps. Returns None on stagnation (clustered leading
    eigenvalues make plain power iteration arbitrarily slow) so callers can
    switch to a dense factorization.
    """
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    window_residual = np.inf
    for sweep in range(_POWER_MAX_ITERS):
        w = apply_b(v)
        rho = float(v @ w)
        residual = float(np.linalg.norm(w - rho * v))
        if residual <= _POWER_TOL * (1.0 + abs(rho)):
            return v, rho
        if sweep % 500 == 499:
            if residual > 0.5 * window_residual:
                return None  # stagnating: hand over to the dense path
            window_residual = residual
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # v got stuck in the kernel; deterministic restart
            v = rng.standard_normal(n)
            v /= np.linalg.norm(v)
            continue
        v = w / norm
    return None


def _canonical_sign(u: np.ndarray, v: np.ndarray):
    """Flip (u, v) together so the first nonzero entry of v is positive."""
    nz = np.nonzero(v)[0]
    if nz.size and v[nz[0]] < 0:
        return -u, -v
    return u, v


class NuclearNormOracle:
    """Nuclear-norm ball of radius tau; vertices are ``-tau * u1 v1^T``."""

    def __init__(self, tau: float):
        if tau <= 0:
            raise ContractViolation("tau must be positive")
        self.tau = tau

    def extreme_point(self, g: np.ndarray) -> RankOne:
        m, n = g.shape
        if not np.any(g):
            u = np.zeros(m)
            u[0] = 1.0
            v = np.zeros(n)
            v[0] = 1.0
            return RankOne(-self.tau, u, v)
        if max(m, n) > _DENSE_EIG_MAX:
            got = _power_iteration(lambda z: g.T @ (g @ z), n)
            if got is not None:
                v = got[0]
                gv = g @ v
                sigma = np.linalg.norm(gv)
                if sigma > 0.0:
                    u = gv / sigma
                    u, v = _canonical_sign(u, v)
                    return RankOne(-self.tau, u, v)
        # small matrices, or clustered leading singular values on which
        # power-iteration sweeps stagnate: deterministic dense path
        u_mat, _s, vt = np.linalg.svd(g)
        u, v = _canonical_sign(u_mat[:, 0], vt[0, :])
        return RankOne(-self.tau, u, v)


class SpectraplexOracle:
    """PSD matrices of trace tau; minimizer is ``tau * v v^T`` with v the
    unit leading eigenvector of the negated (symmetrized) direction."""

    def __init__(self, tau: float):
        if tau <= 0:
            raise ContractViolation("tau must be positive")
        self.tau = tau

    def extreme_point(self, g: np.ndarray) -> RankOne:
        sym = 0.5 * (g + g.T)
        n = sym.shape[0]
        if not np.any(sym):
            v = np.zeros(n)
            v[0] = 1.0
            return RankOne(self.tau, v, v)
        if n > _DENSE_EIG_MAX:
            # Shift proportionally so c*I - sym stays PSD without washing
            # out the relative spectral gap when the direction is small.
            shift = 1.001 * float(np.abs(sym).sum(axis=1).max())
            got = _power_iteration(lambda z: shift * z - sym @ z, n)
            if got is not None:
                _, v = _canonical_sign(got[0], got[0])
                return RankOne(self.tau, v, v)
        # small matrices, or clustered bottom eigenvalues: dense path
        _vals, vecs = np.linalg.eigh(sym)
        _, v = _canonical_sign(vecs[:, 0], vecs[:, 0])
        return RankOne(self.tau, v, v)


# ---------------------------------------------------------------------------
# Wrappers


class SubspaceOracle:
    """Reduced-space view of an inner oracle.

    The reduced gradient is inflated to the full space, handed to the inner
    oracle, and the resulting vertex deflated back. ``deflate . inflate``
    must be the identity on the reduced space; this is probed on seeded
    random vectors at construction.
    """

    def __init__(self, inner, deflate, inflate, reduced_dim: int, probes: int = 3):
        self.inner = inner
        self.deflate = deflate
        self.inflate = inflate
        self.reduced_dim = reduced_dim
        rng = np.random.default_rng(7)
        for _ in range(probes):
            z = rng.standard_normal(reduced_dim)
            back = np.asarray(deflate(inflate(z)))
            if back.shape != z.shape or np.max(np.abs(back - z)) > 1e-10:
                raise ContractViolation("deflate . inflate is not the identity")

    def extreme_point(self, g_reduced: np.ndarray) -> np.ndarray:
        full = self.inner.extreme_point(self.inflate(g_reduced))
        return np.asarray(self.deflate(atom_dense(full)), dtype=np.float64)


def supports_inface(lmo) -> bool:
    return hasattr(lmo, "inface_extreme_points")


def inface_extreme_point(lmo, g: np.ndarray, x: np.ndarray):
    """In-face FW vertex (argmin) and away vertex (argmax) over the minimal
    face of the iterate, with pin tolerance 1e-10."""
    if not supports_inface(lmo):
        raise UnsupportedOracleError(
            f"{type(lmo).__name__} has no in-face oracle"
        )
    return lmo.inface_extreme_points(g, x)


# ---------------------------------------------------------------------------
# Lazification cache


class VertexCache:
    """Bounded append-only vertex store scanned linearly (oldest evicted)."""

    def __init__(self, cap: int = 5000):
        if cap < 1:
            raise ContractViolation("cache cap must be >= 1")
        self._atoms = deque(maxlen=cap)
        self._dense = deque(maxlen=cap)

    def __len__(self):
        return len(self._atoms)

    def insert(self, atom):
        self._atoms.append(atom)
        self._dense.append(atom_dense(atom))

    def best(self, g: np.ndarray):
        """Cached atom minimizing ``<g, v>`` (earliest wins ties)."""
        best_val = np.inf
        best_atom = None
        for atom, dense in zip(self._atoms, self._dense):
            val = float(np.vdot(g, dense))
            if val < best_val:
                best_val = val
                best_atom = atom
        return best_atom, best_val


def cached_extreme_point(
    cache: VertexCache, lmo, g: np.ndarray, x: np.ndarray,
    phi: float, lazy_tolerance: float = 2.0,
):
    """Vertex lookup with lazification.

    Returns ``(atom, hit, phi')``: a cached vertex whose gap estimate clears
    ``phi / lazy_tolerance`` when one exists (no exact call), otherwise a
    fresh exact vertex; the gap estimate is halved when even the fresh
    vertex falls short of the threshold.
    """
    if phi <= 0:
        raise ContractViolation("phi must be positive")
    if lazy_tolerance < 1:
        raise ContractViolation("lazy_tolerance must be >= 1")
    threshold = phi / lazy_tolerance
    gx = float(np.vdot(g, x))
    atom, val = cache.best(g)
    if atom is not None and gx - val >= threshold:
        return atom, True, phi
    fresh = lmo.extreme_point(g)
    cache.insert(fresh)
    if gx - atom_dot(fresh, g) < threshold:
        return fresh, False, phi / 2.0
    return fresh, False, phi
