"""nlcbox: critical points of confined nematic liquid crystals in cuboids.

Computes stable states and index-k saddle points of a Landau-de Gennes
Q-tensor energy with planar-degenerate (tangent) surface anchoring on
[-1,1]^2 x [-h,h], classifies the resulting textures, and maps how minima
and transition states connect.
"""

from .backend import backend_name
from .classify import (
    ClassifierConfig,
    StateLabel,
    canonical_name,
    classify_face,
    classify_faces,
    face_view,
    splay_vertex_count,
    symmetrize_field,
    symmetry_ops,
    transform_field,
    transform_label,
)
from .config import MODES, PhaseDiagramCell, RunConfig, load_config
from .energy import EnergyBreakdown, ModelParams, anchoring_omega, energy, gradient, hess_vec
from .io import (
    export_field_vtk,
    export_landscape_json,
    export_traces_csv,
    import_field_vtk,
    import_landscape_json,
)
from .grid import Field, GridGeometry, build_grid, inner_product, laplacian, norm, surface_integral
from .landscape import (
    LandscapeGraph,
    PathwayChain,
    converge_symmetric,
    downward_search,
    transition_pathway,
    upward_search,
)
from .saddle import SaddleState, SolverConfig, make_state, morse_index, newton_polish, run_hisd
from .seeds import (
    TopologicalSkeleton,
    enumerate_topological_seeds,
    skeleton_from_signs,
    skeleton_label,
    skeleton_to_field,
    wors_seed,
)
from .tensor import BulkParams, QTensor, biaxiality, bulk_gradient, bulk_potential, director, s_plus, spectral, uniaxial

__version__ = "0.1.0"

__all__ = [
    "BulkParams",
    "ClassifierConfig",
    "EnergyBreakdown",
    "Field",
    "GridGeometry",
    "LandscapeGraph",
    "MODES",
    "ModelParams",
    "PathwayChain",
    "PhaseDiagramCell",
    "RunConfig",
    "QTensor",
    "SaddleState",
    "SolverConfig",
    "StateLabel",
    "TopologicalSkeleton",
    "anchoring_omega",
    "backend_name",
    "biaxiality",
    "build_grid",
    "bulk_gradient",
    "bulk_potential",
    "canonical_name",
    "classify_face",
    "classify_faces",
    "converge_symmetric",
    "director",
    "downward_search",
    "energy",
    "enumerate_topological_seeds",
    "export_field_vtk",
    "export_landscape_json",
    "export_traces_csv",
    "face_view",
    "gradient",
    "import_field_vtk",
    "import_landscape_json",
    "load_config",
    "hess_vec",
    "inner_product",
    "laplacian",
    "make_state",
    "morse_index",
    "newton_polish",
    "norm",
    "run_hisd",
    "s_plus",
    "skeleton_from_signs",
    "skeleton_label",
    "skeleton_to_field",
    "spectral",
    "splay_vertex_count",
    "surface_integral",
    "symmetrize_field",
    "symmetry_ops",
    "transform_field",
    "transform_label",
    "transition_pathway",
    "uniaxial",
    "upward_search",
    "wors_seed",
    "__version__",
]
