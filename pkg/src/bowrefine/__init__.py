"""Tag-guided refinement and reduction of visual bag-of-words models."""

__version__ = "0.1.0"

from .core import BowMatrix, linear_kernel, normalized_laplacian  # noqa: E402
from .graph import build_graph  # noqa: E402
from .l1solve import SolverConfig, basis_pursuit  # noqa: E402
from .reduce import reduce_bow, semantic_spectral_clustering  # noqa: E402
from .refine import RefineConfig, refine  # noqa: E402

__all__ = [
    "BowMatrix",
    "RefineConfig",
    "SolverConfig",
    "basis_pursuit",
    "build_graph",
    "linear_kernel",
    "normalized_laplacian",
    "reduce_bow",
    "refine",
    "semantic_spectral_clustering",
]
