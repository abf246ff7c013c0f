"""Constants for the Moran process toolkit."""

import math

# Package name (used in manifests and the schema title)
TOOL_NAME = "moran-fpras"

# Exact solver: largest vertex count accepted by default (2^n states)
DEFAULT_MAX_VERTICES = 14
MAX_VERTICES_ENV = "MORAN_FPRAS_MAX_VERTICES"

# Largest vertex count solved with a dense LU factorisation under "auto"
DENSE_SOLVER_MAX_VERTICES = 11

# Residual tolerance for the iterative and preconditioned sparse solvers
SOLVER_TOLERANCE = 1e-10

# Sparse solver: incomplete-LU preconditioner for BiCGSTAB
SPARSE_ILU_DROP_TOL = 1e-6
SPARSE_ILU_FILL_FACTOR = 10
SPARSE_MAX_ITERATIONS = 2000

# |r - 1| below this is treated as the neutral case r = 1
NEUTRAL_FITNESS_TOLERANCE = 1e-12

# Iterative (fixed-point sweep) fallback
ITERATIVE_MAX_SWEEPS = 1_000_000
ITERATIVE_CHECK_EVERY = 100

# ln 16 at full double precision (sample count formulas)
LN_16 = math.log(16.0)

# Random streams: uniforms drawn per refill of the per-replicate buffer
RNG_BUFFER_SIZE = 4096

# Estimator: replicates handed to one worker task
REPLICATE_BATCH_SIZE = 256

# Default master seed when none is supplied
DEFAULT_SEED = 0

# Advisory confidence level for the additive Hoeffding interval
ADVISORY_CONFIDENCE = 0.95

# CLI exit codes (0 is success, 2 is a click usage error)
EXIT_ABORTED = 3
EXIT_CAP_EXCEEDED = 4
