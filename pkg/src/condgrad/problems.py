"""Seeded generators for the benchmark problem suite.

Randomness comes from numpy's PCG64 generator with one explicit
``SeedSequence([seed, stream])`` per tensor, so regenerating an instance
from the same seed is bitwise identical within this implementation (and
reproducible at the algorithmic level elsewhere).

Instances are addressable by a canonical string id such as
``"simplex_ls:m=50,n=100,seed=7"``; see :func:`parse_problem_id`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import ContractViolation, Objective
from .lmo import (
    BirkhoffOracle,
    BoxOracle,
    KSparseOracle,
    NuclearNormOracle,
    ProbabilitySimplexOracle,
    SpectraplexOracle,
)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream)]))


@dataclass
class ProblemInstance:
    """Objective + oracle + starting point, plus quadratic structure when
    the objective has it."""

    problem_id: str
    objective: Objective
    lmo: object
    x0: object  # feasible start: dense array or a structured vertex atom
    shape: tuple
    seed: int
    is_quadratic: bool = False
    quad: Optional[tuple] = None  # (a_apply, b) with grad f(x) = a_apply(x) + b
    x0_decomposition: Optional[list] = None  # [(weight, atom)] when x0 is not a vertex
    params: dict = field(default_factory=dict)
    warnings: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)  # generator internals for checks

    @property
    def dimension(self) -> int:
        return int(np.prod(self.shape))


def _quad_objective(a_apply, b, value) -> Objective:
    # The gradient is evaluated through the quadratic handles so that
    # grad f(x) == a_apply(x) + b holds exactly, not just to rounding.
    def gradient_into(storage, x):
        storage[...] = a_apply(x) + b

    return Objective(value=value, gradient_into=gradient_into)


def gen_simplex_ls(m: int, n: int, seed: int = 1,
                   a_matrix: Optional[np.ndarray] = None,
                   b_vector: Optional[np.ndarray] = None) -> ProblemInstance:
    """Least squares ``(1/m) ||Ax + b||^2`` over the probability simplex.

    ``a_matrix``/``b_vector`` replace the seeded data when given (such
    instances are not addressable by a canonical id).
    """
    if m < 1 or n < 1:
        raise ContractViolation("m and n must be positive")
    a_mat = _rng(seed, 0).standard_normal((m, n)) if a_matrix is None else np.asarray(a_matrix, dtype=np.float64)
    b_vec = _rng(seed, 1).standard_normal(m) if b_vector is None else np.asarray(b_vector, dtype=np.float64)
    if a_mat.shape != (m, n) or b_vec.shape != (m,):
        raise ContractViolation("injected data has the wrong shape")

    def value(x):
        r = a_mat @ x + b_vec
        return float(r @ r) / m

    def a_apply(z):
        return (2.0 / m) * (a_mat.T @ (a_mat @ z))

    b_lin = (2.0 / m) * (a_mat.T @ b_vec)
    lmo = ProbabilitySimplexOracle(1.0)
    x0 = lmo.extreme_point(np.zeros(n))
    custom = a_matrix is not None or b_vector is not None
    return ProblemInstance(
        problem_id="simplex_ls:custom" if custom else f"simplex_ls:m={m},n={n},seed={seed}",
        objective=_quad_objective(a_apply, b_lin, value),
        lmo=lmo, x0=x0, shape=(n,), seed=seed,
        is_quadratic=True, quad=(a_apply, b_lin),
        params={"m": m, "n": n, "seed": seed},
    )


def gen_ksparse_projection(n: int, k: int, seed: int = 1) -> ProblemInstance:
    """Project a simplex point onto the K-sparse polytope: ``||x - y||^2``
    with ``y`` built from a random integer vector in [1, 100]."""
    if not 1 <= k < n:
        raise ContractViolation("need 1 <= K < n")
    x_tilde = _rng(seed, 0).integers(1, 101, size=n).astype(np.float64)
    y = x_tilde / np.abs(x_tilde).sum()

    def value(x):
        r = x - y
        return float(r @ r)

    def a_apply(z):
        return 2.0 * z

    b_lin = -2.0 * y
    lmo = KSparseOracle(k, 1.0)
    x0 = lmo.extreme_point(np.zeros(n))
    return ProblemInstance(
        problem_id=f"ksparse:n={n},K={k},seed={seed}",
        objective=_quad_objective(a_apply, b_lin, value),
        lmo=lmo, x0=x0, shape=(n,), seed=seed,
        is_quadratic=True, quad=(a_apply, b_lin),
        params={"n": n, "K": k, "seed": seed},
        extras={"y": y},
    )


def gen_birkhoff(n: int, seed: int = 1) -> ProblemInstance:
    """Fit a random matrix in (0,1)^{n x n} over the doubly stochastic
    matrices: ``(1/n^2) ||X - X~||_F^2``."""
    if n < 2:
        raise ContractViolation("n must be >= 2")
    target = _rng(seed, 0).uniform(0.0, 1.0, size=(n, n))

    def value(x):
        r = x - target
        return float(np.vdot(r, r)) / (n * n)

    def a_apply(z):
        return (2.0 / (n * n)) * z

    b_lin = -(2.0 / (n * n)) * target
    lmo = BirkhoffOracle()
    return ProblemInstance(
        problem_id=f"birkhoff:n={n},seed={seed}",
        objective=_quad_objective(a_apply, b_lin, value),
        lmo=lmo,
        x0=lmo.extreme_point(np.zeros((n, n))),
        shape=(n, n), seed=seed,
        is_quadratic=True, quad=(a_apply, b_lin),
        params={"n": n, "seed": seed},
        extras={"target": target},
    )


def gen_nuclear(n: int, k: int, tau: Optional[float] = None,
                missing_fraction: float = 0.5, seed: int = 1) -> ProblemInstance:
    """Collaborative-filtering style completion of a rank-k matrix over the
    nuclear-norm ball; the loss only sees the present entries."""
    if not 1 <= k <= n:
        raise ContractViolation("need 1 <= k <= n")
    if not 0.0 <= missing_fraction < 1.0:
        raise ContractViolation("missing_fraction must lie in [0, 1)")
    left = _rng(seed, 0).standard_normal((n, k))
    right = _rng(seed, 1).standard_normal((n, k))
    target = left @ right.T
    present = _rng(seed, 2).uniform(size=(n, n)) >= missing_fraction
    mask = present.astype(np.float64)
    if tau is None:
        tau = 2.0 * float(np.linalg.svd(target, compute_uv=False).sum())
    tau = float(tau)

    def value(x):
        r = mask * (x - target)
        return 0.5 * float(np.vdot(r, r))

    def a_apply(z):
        return mask * z

    b_lin = -(mask * target)
    lmo = NuclearNormOracle(tau)
    x0 = lmo.extreme_point(np.zeros((n, n)))
    return ProblemInstance(
        problem_id=f"nuclear:n={n},k={k},tau={tau!r},missing={missing_fraction!r},seed={seed}",
        objective=_quad_objective(a_apply, b_lin, value),
        lmo=lmo, x0=x0, shape=(n, n), seed=seed,
        is_quadratic=True, quad=(a_apply, b_lin),
        params={"n": n, "k": k, "tau": tau, "missing": missing_fraction, "seed": seed},
        extras={"target": target, "mask": mask},
    )


def gen_spectrahedron(n: int, tau: float = 2.0, missing_fraction: float = 0.5,
                      seed: int = 1,
                      target: Optional[np.ndarray] = None) -> ProblemInstance:
    """Masked symmetric-matrix fit over the spectraplex of trace ``tau``."""
    if not 1.0 <= tau <= 8.0:
        raise ContractViolation("tau must lie in [1, 8]")
    custom = target is not None
    if custom:
        target = np.asarray(target, dtype=np.float64)
    else:
        b_raw = _rng(seed, 0).standard_normal((n, n))
        target = 0.5 * (b_raw + b_raw.T)
    upper = _rng(seed, 1).uniform(size=(n, n)) >= missing_fraction
    mask = np.triu(upper).astype(np.float64)
    mask = np.maximum(mask, mask.T)  # symmetric present-entry set

    def value(x):
        r = mask * (x - target)
        return 0.5 * float(np.vdot(r, r))

    def a_apply(z):
        return mask * z

    b_lin = -(mask * target)
    lmo = SpectraplexOracle(float(tau))
    x0 = lmo.extreme_point(np.zeros((n, n)))
    pid = ("spectrahedron:custom" if custom else
           f"spectrahedron:n={n},tau={float(tau)!r},missing={missing_fraction!r},seed={seed}")
    return ProblemInstance(
        problem_id=pid,
        objective=_quad_objective(a_apply, b_lin, value),
        lmo=lmo, x0=x0, shape=(n, n), seed=seed,
        is_quadratic=True, quad=(a_apply, b_lin),
        params={"n": n, "tau": float(tau), "missing": missing_fraction, "seed": seed},
        extras={"target": target, "mask": mask},
    )


def _design_objective(a_mat: np.ndarray, criterion: str) -> Objective:
    m, n = a_mat.shape

    def info_matrix(x):
        return a_mat.T @ (x[:, None] * a_mat)

    def chol(x):
        mat = info_matrix(x)
        if not np.isfinite(mat).all():
            return None
        try:
            return np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            return None

    def domain_check(x):
        return chol(x) is not None

    def value(x):
        lower = chol(x)
        if lower is None:
            return np.inf
        if criterion == "a":
            inv_half = np.linalg.solve(lower, np.eye(n))
            return float(np.vdot(inv_half, inv_half))  # tr(M^{-1})
        return -2.0 * float(np.log(np.diag(lower)).sum())  # -logdet(M)

    def gradient_into(storage, x):
        lower = chol(x)
        if lower is None:
            storage[:] = np.nan
            return
        # Z = M^{-1} A^T, columns are M^{-1} a_i
        z = np.linalg.solve(lower.T, np.linalg.solve(lower, a_mat.T))
        if criterion == "a":
            storage[:] = -np.sum(z * z, axis=0)
        else:
            storage[:] = -np.sum(a_mat.T * z, axis=0)

    return Objective(value=value, gradient_into=gradient_into, domain_check=domain_check)


def _gen_design(m: int, n: int, seed: int, criterion: str,
                a_matrix: Optional[np.ndarray]) -> ProblemInstance:
    if a_matrix is not None:
        a_mat = np.asarray(a_matrix, dtype=np.float64)
        m, n = a_mat.shape
    else:
        if m <= n:
            raise ContractViolation("need m > n so the uniform design is nonsingular")
        a_mat = _rng(seed, 0).standard_normal((m, n))
    if m <= n:
        raise ContractViolation("need m > n so the uniform design is nonsingular")
    lmo = ProbabilitySimplexOracle(1.0)
    x0 = np.full(m, 1.0 / m)
    eye = np.eye(m)
    decomposition = [(1.0 / m, eye[i].copy()) for i in range(m)]
    name = "a_criterion" if criterion == "a" else "d_criterion"
    pid = f"{name}:custom" if a_matrix is not None else f"{name}:m={m},n={n},seed={seed}"
    return ProblemInstance(
        problem_id=pid,
        objective=_design_objective(a_mat, criterion),
        lmo=lmo, x0=x0, shape=(m,), seed=seed,
        x0_decomposition=decomposition,
        params={"m": m, "n": n, "seed": seed},
    )


def gen_a_criterion(m: int = 0, n: int = 0, seed: int = 1,
                    a_matrix: Optional[np.ndarray] = None) -> ProblemInstance:
    """Optimal experiment design, ``tr((A' diag(x) A)^{-1})`` over the
    simplex, with a positive-definiteness domain oracle. Accepts either
    the (m, n, seed) triple or an explicit experiment matrix."""
    return _gen_design(m, n, seed, "a", a_matrix)


def gen_d_criterion(m: int = 0, n: int = 0, seed: int = 1,
                    a_matrix: Optional[np.ndarray] = None) -> ProblemInstance:
    """Optimal experiment design under ``-logdet(A' diag(x) A)`` (the sign
    makes minimization seek maximal information)."""
    return _gen_design(m, n, seed, "d", a_matrix)


def gen_poisson(n_features: int, n_samples: Optional[int] = None,
                alpha: float = 0.1, box_radius: float = 10.0,
                seed: int = 1, exact_counts: bool = False) -> ProblemInstance:
    """Poisson regression with ridge penalty over a box on ``(w, b)``.

    ``exact_counts`` replaces the Poisson draws with the continuous
    surrogate ``y_i = exp(w*'x_i + b*)``, making the ground truth a
    stationary point of the unpenalized loss.
    """
    if alpha < 0:
        raise ContractViolation("alpha must be nonnegative")
    if box_radius <= 0:
        raise ContractViolation("box radius must be positive")
    if n_samples is None:
        n_samples = 5 * n_features
    design = _rng(seed, 0).standard_normal((n_samples, n_features))
    w_true = _rng(seed, 1).standard_normal(n_features) / np.sqrt(n_features)
    b_true = 0.5 * float(_rng(seed, 2).standard_normal())
    rates = np.exp(design @ w_true + b_true)
    if exact_counts:
        counts = rates.copy()
    else:
        counts = _rng(seed, 3).poisson(rates).astype(np.float64)
    warnings = {"exp_clipped": 0}

    def scores(z):
        w, b = z[:-1], z[-1]
        s = design @ w + b
        clipped = s > 500.0
        if np.any(clipped):
            warnings["exp_clipped"] += int(clipped.sum())
            s = np.minimum(s, 500.0)
        return s

    def value(z):
        w = z[:-1]
        s = scores(z)
        return float(np.sum(np.exp(s) - counts * s) + alpha * (w @ w))

    def gradient_into(storage, z):
        w = z[:-1]
        s = scores(z)
        resid = np.exp(s) - counts
        storage[:-1] = design.T @ resid + 2.0 * alpha * w
        storage[-1] = resid.sum()

    dim = n_features + 1
    lmo = BoxOracle(np.full(dim, -box_radius), np.full(dim, box_radius))
    x0 = lmo.extreme_point(np.zeros(dim))
    pid = (f"poisson:n_features={n_features},n_samples={n_samples},"
           f"alpha={alpha!r},N={float(box_radius)!r},seed={seed}")
    if exact_counts:
        pid = "poisson:custom"
    inst = ProblemInstance(
        problem_id=pid,
        objective=Objective(value=value, gradient_into=gradient_into),
        lmo=lmo, x0=x0, shape=(dim,), seed=seed,
        params={"n_features": n_features, "n_samples": n_samples,
                "alpha": alpha, "N": float(box_radius), "seed": seed},
    )
    inst.warnings = warnings
    inst.extras = {"w_true": w_true, "b_true": b_true, "design": design,
                   "counts": counts}
    return inst


# ---------------------------------------------------------------------------
# Registry and canonical ids

GENERATORS: dict[str, Callable[..., ProblemInstance]] = {
    "simplex_ls": gen_simplex_ls,
    "ksparse": gen_ksparse_projection,
    "birkhoff": gen_birkhoff,
    "nuclear": gen_nuclear,
    "spectrahedron": gen_spectrahedron,
    "a_criterion": gen_a_criterion,
    "d_criterion": gen_d_criterion,
    "poisson": gen_poisson,
}

# CLI-facing parameter-name aliases onto generator keyword arguments.
_PARAM_ALIASES = {
    "ksparse": {"K": "k"},
    "nuclear": {"missing": "missing_fraction"},
    "spectrahedron": {"missing": "missing_fraction"},
    "poisson": {"N": "box_radius"},
}


def _parse_scalar(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_problem_id(problem_id: str) -> ProblemInstance:
    """Instantiate a problem from ``name:key=value,...``."""
    name, _, rest = problem_id.partition(":")
    if name not in GENERATORS:
        raise ContractViolation(
            f"unknown problem {name!r}; known: {sorted(GENERATORS)}"
        )
    kwargs = {}
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            if not _:
                raise ContractViolation(f"malformed parameter {item!r}")
            key = _PARAM_ALIASES.get(name, {}).get(key, key)
            kwargs[key] = _parse_scalar(value)
    return GENERATORS[name](**kwargs)
