import os
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# ==========================================================
# 1) DIFFERENTIATION DEFAULTS
# ==========================================================
DEFAULT_STEP          = float(os.getenv("SUBCURV_STEP", "1e-4"))         # relative to axis length
DEFAULT_NESTED_STEP   = float(os.getenv("SUBCURV_NESTED_STEP", "1e-3"))  # for derived fields (Γ, N)
DEFAULT_STENCIL_ORDER = int(os.getenv("SUBCURV_STENCIL_ORDER", "4"))

# ==========================================================
# 2) QUADRATURE / SAMPLING DEFAULTS
# ==========================================================
DEFAULT_GRID          = int(os.getenv("SUBCURV_GRID", "64"))             # nodes per periodic axis
DEFAULT_SEED          = int(os.getenv("SUBCURV_SEED", "0"))
DEFAULT_POINTS        = int(os.getenv("SUBCURV_POINTS", "25"))
DEFAULT_BASE_POINTS   = int(os.getenv("SUBCURV_BASE_POINTS", "10"))
DEFAULT_WORKERS       = int(os.getenv("SUBCURV_WORKERS", "1"))

# ==========================================================
# 3) TOLERANCES
# ==========================================================
TOL_CURVATURE         = 1e-5     # pointwise oracle comparisons (relative above 1)
TOL_IDENTITY          = 1e-4     # exact identities without nested N derivatives
TOL_NESTED_IDENTITY   = 1e-3     # identities involving δ̌N or flow derivatives
TOL_MEASURE           = 1e-6     # fiberwise spread of the transport criterion
ASYMMETRY_LIMIT       = 1e-12
ANTISYMMETRY_LIMIT    = 1e-8

# ==========================================================
# 4) OUTPUT
# ==========================================================
OUTPUT_DIR = Path(os.getenv("SUBCURV_OUTPUT_DIR", "./output_reports"))
