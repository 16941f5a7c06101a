"""P1 finite-element generators for the benchmark parametric families."""

from .assembly import assemble_load, assemble_matrix, assemble_subdomain_stiffness, nodal_field
from .mesh import (
    Mesh,
    MeshError,
    checkerboard_tags,
    load_mesh,
    save_mesh,
    square_with_hole_mesh,
    structured_square_mesh,
    validate_mesh,
)
from .problems import (
    FemProblem,
    HoleGeometry,
    gen_checkerboard_problem,
    gen_hole_problem,
    hole_box,
    precondition_split,
    sigma_of_l,
)
