"""Two-sided spectral bounds and stable explicit RK steps for FEM diffusion.

The package assembles mass, surrogate-mass, and stiffness matrices for
Lagrange elements of arbitrary order on simplicial meshes, computes
guaranteed two-sided bounds on the largest eigenvalue of the generalized
pencil, and turns those bounds into provably stable explicit Runge-Kutta
time steps with norm-growth certificates.
"""

from .assembly import (
    CONSISTENT,
    HRZ_DIAGONAL,
    NODE_QUADRATURE,
    AssembledSystem,
    DiffusionField,
    NonSPDDiffusionError,
    SurrogateAxiomError,
    SurrogatePolicy,
    apply_dirichlet,
    assemble_mass,
    assemble_stiffness,
    assemble_system,
    element_alignment_factor,
    l2_project,
    surrogate_reference_matrix,
    write_coo,
)
from .bounds import (
    DEFAULT_SEED,
    BoundReport,
    ConvergenceError,
    InequalityViolation,
    compute_bound_report,
    diag_ratio_bounds,
    geometric_bound,
    is_m_matrix,
    lambda_max_dense,
    lambda_max_generalized,
    lambda_max_with_vector,
    verify_matrix_inequalities,
    zhudu_bound,
)
from .mesh import (
    AffineMap,
    DegenerateElementError,
    DofNumbering,
    MeshFormatError,
    MeshSpec,
    MeshStructureError,
    PatchTable,
    SimplicialMesh,
    build_affine_maps,
    build_patches,
    generate_mesh,
    number_dofs,
    random_perturbed,
    read_mesh,
    stretched,
    structured_triangular,
    uniform_interval,
    validate_mesh,
    write_mesh,
)
from .reference import (
    ReferenceElement,
    UnsupportedElementError,
    build_reference_element,
    eval_basis,
    eval_basis_gradients,
    simplex_multi_indices,
    simplex_quadrature,
    tabulate_basis,
    tabulate_gradients,
)
from .timestepping import (
    BlowUpError,
    CertificateError,
    IntegrationTrace,
    RKScheme,
    integrate,
    l2_growth_certificate,
    real_stability_boundary,
    rk_scheme,
    scheme_from_tableau,
    stable_timestep,
    top_mode_initial_condition,
)

__version__ = "0.1.0"

__all__ = [
    "AffineMap",
    "AssembledSystem",
    "BlowUpError",
    "BoundReport",
    "CONSISTENT",
    "CertificateError",
    "ConvergenceError",
    "DEFAULT_SEED",
    "DegenerateElementError",
    "DiffusionField",
    "DofNumbering",
    "HRZ_DIAGONAL",
    "InequalityViolation",
    "IntegrationTrace",
    "MeshFormatError",
    "MeshSpec",
    "MeshStructureError",
    "NODE_QUADRATURE",
    "NonSPDDiffusionError",
    "PatchTable",
    "ReferenceElement",
    "RKScheme",
    "SimplicialMesh",
    "SurrogateAxiomError",
    "SurrogatePolicy",
    "UnsupportedElementError",
    "apply_dirichlet",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_system",
    "build_affine_maps",
    "build_patches",
    "build_reference_element",
    "compute_bound_report",
    "diag_ratio_bounds",
    "element_alignment_factor",
    "eval_basis",
    "eval_basis_gradients",
    "generate_mesh",
    "geometric_bound",
    "integrate",
    "is_m_matrix",
    "l2_growth_certificate",
    "l2_project",
    "lambda_max_dense",
    "lambda_max_generalized",
    "lambda_max_with_vector",
    "number_dofs",
    "random_perturbed",
    "read_mesh",
    "real_stability_boundary",
    "rk_scheme",
    "scheme_from_tableau",
    "simplex_multi_indices",
    "simplex_quadrature",
    "stable_timestep",
    "stretched",
    "structured_triangular",
    "surrogate_reference_matrix",
    "tabulate_basis",
    "tabulate_gradients",
    "top_mode_initial_condition",
    "uniform_interval",
    "validate_mesh",
    "verify_matrix_inequalities",
    "write_coo",
    "write_mesh",
    "zhudu_bound",
]
