"""Convex-decomposition containers for active-set Frank-Wolfe variants.

The base :class:`ActiveSet` keeps atoms, weights, and the materialized
iterate together. :class:`QuadCacheActiveSet` specializes it for quadratic
objectives by caching pairwise products so away/local vertex selection
needs no dense inner products. :func:`quad_correction` minimizes the
quadratic over the affine hull of the active atoms and falls back to a
ratio-test step toward that minimizer when it leaves the simplex.
"""

from __future__ import annotations

from typing import Iterable, Optional

import numpy as np
import scipy.linalg

from .core import ContractViolation
from .lmo import Permutation, RankOne, atom_dense, atoms_equal

WEIGHT_FLOOR = 1e-12
REFRESH_EVERY = 100


class ActiveSet:
    """Weights, atoms, and materialized iterate of a convex decomposition.

    Invariants: weights stay strictly positive (atoms at or below the
    floor are dropped and the rest renormalized), weights sum to one, and
    the iterate is re-materialized from scratch every ``REFRESH_EVERY``
    mutations to bound drift.
    """

    def __init__(self):
        self.atoms: list = []
        self.weights: list[float] = []
        self._dense: list[np.ndarray] = []
        self.iterate: Optional[np.ndarray] = None
        self._mutations = 0

    @classmethod
    def from_vertex(cls, atom) -> "ActiveSet":
        return cls.from_decomposition([(1.0, atom)])

    @classmethod
    def from_decomposition(cls, pairs: Iterable[tuple]) -> "ActiveSet":
        aset = cls()
        for weight, atom in pairs:
            if weight <= 0:
                raise ContractViolation("decomposition weights must be positive")
            aset._insert_atom(atom)
            aset.weights[-1] = float(weight)
        total = sum(aset.weights)
        if abs(total - 1.0) > 1e-9:
            raise ContractViolation("decomposition weights must sum to one")
        aset.weights = [w / total for w in aset.weights]
        aset.rematerialize()
        return aset

    def __len__(self) -> int:
        return len(self.atoms)

    def weight(self, idx: int) -> float:
        return self.weights[idx]

    def dense_atom(self, idx: int) -> np.ndarray:
        return self._dense[idx]

    def find(self, atom) -> int:
        for i, existing in enumerate(self.atoms):
            if atoms_equal(existing, atom):
                return i
        return -1

    def rematerialize(self):
        x = np.zeros_like(self._dense[0])
        for w, dense in zip(self.weights, self._dense):
            x += w * dense
        self.iterate = x
        self._mutations = 0

    # ----- selection

    def dot_with_atoms(self, grad: np.ndarray) -> np.ndarray:
        return np.array([float(np.vdot(grad, d)) for d in self._dense])

    def argminmax(self, grad: np.ndarray):
        """Indices of the away atom (max inner product with the gradient)
        and the local-FW atom (min); ties go to the smallest index."""
        if not self.atoms:
            raise ContractViolation("active set is empty")
        dots = self.dot_with_atoms(grad)
        return int(np.argmax(dots)), int(np.argmin(dots))

    # ----- mutations

    def _insert_atom(self, atom) -> int:
        self.atoms.append(atom)
        self._dense.append(atom_dense(atom))
        self.weights.append(0.0)
        self._sync_insert(len(self.atoms) - 1)
        return len(self.atoms) - 1

    def apply_pairwise(self, a_idx: int, s_atom, gamma: float):
        """Transfer ``gamma`` weight from the away atom onto ``s_atom``."""
        w_a = self.weights[a_idx]
        if gamma < 0 or gamma > w_a * (1 + 1e-12) + 1e-15:
            raise ContractViolation("pairwise step exceeds the departing weight")
        if gamma == 0.0:
            return
        gamma = min(gamma, w_a)
        s_idx = self.find(s_atom)
        if s_idx < 0:
            s_idx = self._insert_atom(s_atom)
        self.weights[a_idx] -= gamma
        self.weights[s_idx] += gamma
        self.iterate -= gamma * (self._dense[a_idx] - self._dense[s_idx])
        self._sync_pairwise(a_idx, s_idx, gamma)
        self._after_mutation()

    def apply_fw(self, v_atom, gamma: float):
        """Scale all weights by ``1 - gamma`` and give ``gamma`` to the new
        vertex; ``gamma = 1`` collapses the set."""
        if gamma < 0 or gamma > 1:
            raise ContractViolation("FW step length must lie in [0, 1]")
        if gamma == 0.0:
            return
        if gamma == 1.0:
            self.atoms = [v_atom]
            self._dense = [atom_dense(v_atom)]
            self.weights = [1.0]
            self.iterate = self._dense[0].copy()
            self._sync_collapse()
            self._mutations = 0
            return
        v_idx = self.find(v_atom)
        if v_idx < 0:
            v_idx = self._insert_atom(v_atom)
        self.weights = [w * (1.0 - gamma) for w in self.weights]
        self.weights[v_idx] += gamma
        self.iterate = (1.0 - gamma) * self.iterate + gamma * self._dense[v_idx]
        self._sync_fw(v_idx, gamma)
        self._after_mutation()

    def apply_away(self, a_idx: int, gamma: float, gamma_max: float):
        """Move away from atom ``a``: weights scale by ``1 + gamma`` and the
        away atom loses ``gamma``; at ``gamma_max`` the atom drops out."""
        if gamma < 0 or gamma > gamma_max * (1 + 1e-12) + 1e-15:
            raise ContractViolation("away step exceeds its maximum")
        if gamma == 0.0:
            return
        self.weights = [w * (1.0 + gamma) for w in self.weights]
        self.weights[a_idx] -= gamma
        self.iterate = (1.0 + gamma) * self.iterate - gamma * self._dense[a_idx]
        self._sync_away(a_idx, gamma)
        self._after_mutation()

    def set_weights(self, new_weights):
        """Replace the weight vector (after a corrective step)."""
        if len(new_weights) != len(self.atoms):
            raise ContractViolation("weight vector length mismatch")
        self.weights = [float(w) for w in new_weights]
        self._after_mutation(force_refresh=True)

    def _after_mutation(self, force_refresh: bool = False):
        dropped = [i for i, w in enumerate(self.weights) if w <= WEIGHT_FLOOR]
        if dropped:
            for i in reversed(dropped):
                del self.atoms[i]
                del self.weights[i]
                del self._dense[i]
                self._sync_drop(i)
            total = sum(self.weights)
            self.weights = [w / total for w in self.weights]
            self.rematerialize()
            self._sync_recompute()
            return
        self._mutations += 1
        if force_refresh or self._mutations >= REFRESH_EVERY:
            self.rematerialize()
            self._sync_recompute()

    # ----- cache hooks (no-ops for the plain container)

    def _sync_insert(self, idx: int):
        pass

    def _sync_pairwise(self, a_idx: int, s_idx: int, gamma: float):
        pass

    def _sync_fw(self, v_idx: int, gamma: float):
        pass

    def _sync_away(self, a_idx: int, gamma: float):
        pass

    def _sync_drop(self, idx: int):
        pass

    def _sync_collapse(self):
        pass

    def _sync_recompute(self):
        pass


class QuadCacheActiveSet(ActiveSet):
    """Active set with product caching for ``f = 0.5 x'Ax + b'x``.

    Stores ``<A v_j, v_i>`` for every atom pair and ``<b, v_i>`` per atom,
    and maintains the gradient inner products ``<grad f(x), v_i>``
    incrementally from weight changes, so vertex selection avoids dense
    scalar products entirely.
    """

    def __init__(self, a_apply, b):
        super().__init__()
        self.a_apply = a_apply
        self.b = b
        self._pair = np.zeros((0, 0))
        self._bdot = np.zeros(0)
        self._gdot = np.zeros(0)

    @classmethod
    def from_vertex_quadratic(cls, a_apply, b, atom) -> "QuadCacheActiveSet":
        aset = cls(a_apply, b)
        aset._insert_atom(atom)
        aset.weights[-1] = 1.0
        aset.rematerialize()
        aset._sync_recompute()
        return aset

    def dot_with_atoms(self, grad: np.ndarray) -> np.ndarray:
        # Answered from the incremental table; `grad` is not consulted.
        return self._gdot.copy()

    def gradient_dots(self) -> np.ndarray:
        """Cached ``<grad f(x), v_i>`` values (for fidelity checks)."""
        return self._gdot.copy()

    def _sync_insert(self, idx: int):
        dense = self._dense[idx]
        av = self.a_apply(dense)
        col = np.array([float(np.vdot(av, d)) for d in self._dense])
        k = len(self._dense)
        pair = np.zeros((k, k))
        pair[:-1, :-1] = self._pair
        pair[:, idx] = col
        pair[idx, :] = col  # A symmetric
        self._pair = pair
        self._bdot = np.append(self._bdot, float(np.vdot(self.b, dense)))
        weights = np.asarray(self.weights)
        self._gdot = np.append(
            self._gdot, float(self._pair[idx, :] @ weights) + self._bdot[idx]
        )

    def _sync_pairwise(self, a_idx: int, s_idx: int, gamma: float):
        self._gdot += gamma * (self._pair[:, s_idx] - self._pair[:, a_idx])

    def _sync_fw(self, v_idx: int, gamma: float):
        self._gdot = (1.0 - gamma) * (self._gdot - self._bdot) + self._bdot
        self._gdot += gamma * self._pair[:, v_idx]

    def _sync_away(self, a_idx: int, gamma: float):
        self._gdot = (1.0 + gamma) * (self._gdot - self._bdot) + self._bdot
        self._gdot -= gamma * self._pair[:, a_idx]

    def _sync_drop(self, idx: int):
        keep = [i for i in range(self._pair.shape[0]) if i != idx]
        self._pair = self._pair[np.ix_(keep, keep)]
        self._bdot = self._bdot[keep]
        self._gdot = self._gdot[keep]

    def _sync_collapse(self):
        self._pair = np.zeros((0, 0))
        self._bdot = np.zeros(0)
        self._gdot = np.zeros(0)
        self._sync_insert(0)

    def _sync_recompute(self):
        weights = np.asarray(self.weights)
        self._gdot = self._pair @ weights + self._bdot


def quad_cache_from_decomposition(a_apply, b, pairs) -> QuadCacheActiveSet:
    """Build a product-caching active set from (weight, atom) pairs."""
    aset = QuadCacheActiveSet(a_apply, b)
    for weight, atom in pairs:
        if weight <= 0:
            raise ContractViolation("decomposition weights must be positive")
        aset._insert_atom(atom)
        aset.weights[-1] = float(weight)
    aset.rematerialize()
    aset._sync_recompute()
    return aset


def quad_correction(aset: ActiveSet, a_apply, b) -> bool:
    """Reweight the active set toward the affine-hull minimizer of the
    quadratic.

    Solves for barycentric weights making the gradient orthogonal to all
    in-hull directions; if they are nonnegative they replace the current
    weights, otherwise a ratio-test (Wolfe) step toward them drops at
    least one atom. Returns whether the function value decreased. Systems
    with an estimated condition number above 1e12 are skipped.
    """
    k = len(aset)
    if k < 2:
        return False
    dense = aset._dense
    weights = np.asarray(aset.weights)
    ref = int(np.argmax(weights))  # largest-weight atom anchors the system

    if isinstance(aset, QuadCacheActiveSet):
        pair = aset._pair
        bdot = aset._bdot
    else:
        av = [a_apply(d) for d in dense]
        pair = np.array([[float(np.vdot(av[j], dense[i])) for j in range(k)]
                         for i in range(k)])
        bdot = np.array([float(np.vdot(b, d)) for d in dense])

    system = np.ones((k, k))
    rhs = np.ones(k)
    rows = [i for i in range(k) if i != ref]
    system[: k - 1, :] = pair[rows, :] - pair[ref, :]
    rhs[: k - 1] = -(bdot[rows] - bdot[ref])

    try:
        lu, piv = scipy.linalg.lu_factor(system)
    except (ValueError, scipy.linalg.LinAlgError):
        return False
    diag = np.abs(np.diag(lu))
    if diag.min() == 0.0 or diag.max() / diag.min() > 1e12:
        return False
    lam_target = scipy.linalg.lu_solve((lu, piv), rhs)

    if np.all(lam_target >= 0.0):
        new_weights = lam_target
    else:
        # Wolfe's step: furthest point toward the target still in the simplex
        negative = np.flatnonzero(lam_target < 0.0)
        thetas = weights[negative] / (weights[negative] - lam_target[negative])
        j = int(np.argmin(thetas))
        new_weights = weights + float(thetas[j]) * (lam_target - weights)
        new_weights[negative[j]] = 0.0  # the ratio-test atom leaves exactly
        np.maximum(new_weights, 0.0, out=new_weights)

    def quad_value(x):
        return 0.5 * float(np.vdot(x, a_apply(x))) + float(np.vdot(b, x))

    x_old = aset.iterate
    x_new = np.zeros_like(x_old)
    for w, d in zip(new_weights, dense):
        x_new += w * d
    f_old = quad_value(x_old)
    f_new = quad_value(x_new)
    if f_new > f_old + 1e-12 * (1.0 + abs(f_old)):
        return False  # numerical regression; keep the current weights
    aset.set_weights(new_weights)
    return f_new < f_old


# ---------------------------------------------------------------------------
# Text serialization (one atom per line) for warm starts


def _format_floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_active_set(aset: ActiveSet, path_or_file):
    """Write ``weight kind payload`` lines; see the bench module for the
    format walkthrough."""
    own = isinstance(path_or_file, (str, bytes))
    fh = open(path_or_file, "w") if own else path_or_file
    try:
        for w, atom in zip(aset.weights, aset.atoms):
            if isinstance(atom, Permutation):
                payload = "perm " + " ".join(str(i) for i in atom.sigma)
            elif isinstance(atom, RankOne):
                payload = (
                    f"rankone {atom.scale!r} {atom.u.size} {atom.v.size} "
                    + _format_floats(atom.u) + " " + _format_floats(atom.v)
                )
            else:
                arr = np.asarray(atom)
                shape = "x".join(str(s) for s in arr.shape)
                payload = f"dense {shape} " + _format_floats(arr.ravel())
            fh.write(f"{w!r} {payload}\n")
    finally:
        if own:
            fh.close()


def load_active_set(path_or_file, cls=ActiveSet, **kwargs) -> ActiveSet:
    own = isinstance(path_or_file, (str, bytes))
    fh = open(path_or_file) if own else path_or_file
    pairs = []
    try:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            weight = float(parts[0])
            kind = parts[1]
            if kind == "perm":
                atom = Permutation(tuple(int(s) for s in parts[2:]))
            elif kind == "rankone":
                scale = float(parts[2])
                nu, nv = int(parts[3]), int(parts[4])
                vals = [float(s) for s in parts[5:]]
                atom = RankOne(scale, np.array(vals[:nu]), np.array(vals[nu:nu + nv]))
            elif kind == "dense":
                shape = tuple(int(s) for s in parts[2].split("x"))
                atom = np.array([float(s) for s in parts[3:]]).reshape(shape)
            else:
                raise ContractViolation(f"unknown atom kind {kind!r}")
            pairs.append((weight, atom))
    finally:
        if own:
            fh.close()
    if cls is ActiveSet:
        return ActiveSet.from_decomposition(pairs)
    aset = cls(**kwargs)
    for weight, atom in pairs:
        aset._insert_atom(atom)
        aset.weights[-1] = weight
    aset.rematerialize()
    aset._sync_recompute()
    return aset
