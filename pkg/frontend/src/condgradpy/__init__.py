"""condgradpy: scripting facade over the condgrad solvers.

Users supply a plain objective callable and a gradient callable with the
write-into-storage convention ``grad(storage, x)``, pick an oracle
constructor and a variant/step pair, and get back plain-data results:

    import numpy as np
    from condgradpy import probability_simplex_oracle, compute_extreme_point, solve

    def f(x):
        return np.linalg.norm(x) ** 2

    def grad(storage, x):
        for i in range(len(x)):
            storage[i] = 2 * x[i]

    lmo = probability_simplex_oracle(1.0, dim=5)
    x0 = compute_extreme_point(lmo, np.zeros(5))
    result = solve(f, grad, lmo, x0)
"""

from ._api import (
    BoundOracle,
    BoundResult,
    Step,
    UserCallableError,
    Variant,
    birkhoff_oracle,
    box_oracle,
    compute_extreme_point,
    hypersimplex_oracle,
    ksparse_oracle,
    nuclear_norm_oracle,
    probability_simplex_oracle,
    solve,
    spectraplex_oracle,
)

__all__ = [
    "BoundOracle",
    "BoundResult",
    "Step",
    "UserCallableError",
    "Variant",
    "birkhoff_oracle",
    "box_oracle",
    "compute_extreme_point",
    "hypersimplex_oracle",
    "ksparse_oracle",
    "nuclear_norm_oracle",
    "probability_simplex_oracle",
    "solve",
    "spectraplex_oracle",
]

__version__ = "0.1.0"
