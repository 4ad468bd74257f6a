"""condgrad: projection-free constrained optimization with Frank-Wolfe
methods, linear minimization oracles, active-set structures, and a
benchmark harness."""

from .activeset import (
    ActiveSet,
    QuadCacheActiveSet,
    load_active_set,
    quad_correction,
    save_active_set,
)
from .algorithms import (
    AlmProblem,
    AlmResult,
    BlockProblem,
    SolverConfig,
    alternating_linear_minimization,
    away_frank_wolfe,
    bdicg,
    blended_pairwise_cg,
    block_coordinate_fw,
    dicg,
    frank_wolfe,
    lazy_frank_wolfe,
    pairwise_cg,
)
from .core import (
    IterationState,
    Objective,
    RunResult,
    StopCriteria,
    fw_gap,
    invoke_callback,
    strong_gap_bound,
)
from .lmo import (
    BirkhoffOracle,
    BoxOracle,
    FaceFixings,
    HypersimplexOracle,
    KSparseOracle,
    NuclearNormOracle,
    Permutation,
    ProbabilitySimplexOracle,
    RankOne,
    SpectraplexOracle,
    SubspaceOracle,
    VertexCache,
    atom_dense,
    atom_dot,
    cached_extreme_point,
    inface_extreme_point,
)
from .problems import (
    GENERATORS,
    ProblemInstance,
    gen_a_criterion,
    gen_birkhoff,
    gen_d_criterion,
    gen_ksparse_projection,
    gen_nuclear,
    gen_poisson,
    gen_simplex_ls,
    gen_spectrahedron,
    parse_problem_id,
)
from .stepsize import (
    AdaptiveStep,
    AgnosticStep,
    GeneralizedAgnosticStep,
    MonotonicStep,
    QuadraticExactStep,
    SecantStep,
    StepContext,
    agnostic_step,
    generalized_agnostic_step,
    quadratic_exact_step,
)

__version__ = "0.1.0"
