"""Low-order-refined discretizations of the high-order de Rham complex.

Interpolation-histopolation bases on Gauss-Lobatto points make the
high-order H1/HCurl/HDiv/L2/DG operators spectrally equivalent to lowest-order
operators on the Gauss-Lobatto refined mesh, independent of the degree.
"""

__version__ = "0.1.0"

from .amg import CfSplit, TwoLevelAmg, cf_split, two_level_amg_setup
from .assembly import (AssembledOp, Coefficients, MassOperator, OpTag, SystemOperator, apply_mass_matfree, assemble,
                       assemble_lor, eliminate_dirichlet, export_matrix_market, mass_diagonal, piola_metric)
from .basis import (Basis1D, BasisKind, LowQuad, OperatorKind, QuadMode, equivalence_constants, eval_basis,
                    eval_basis_deriv, high_order_gram, low_order_gram, make_basis, operator_pair_1d)
from .derham import IncidenceKind, RefElementLayout, SpaceKind, build_incidence, complex_ranks
from .dg import assemble_ip_dg, assemble_ip_dg_lor, build_graph_laplacian, dg_penalty_weights
from .eigen import estimate_condition, generalized_eigvalsh, jacobi_eigvalsh
from .errors import ConfigError, InvariantError, LorfemError, NotSPDError
from .mesh import CartMesh, LorMesh, build_cart_mesh, lor_refine, mesh_from_config
from .quadrature import NodalRule, QuadRule, gauss_legendre_rule, gauss_lobatto_rule
from .solvers import (IdentityPreconditioner, JacobiPreconditioner, LorCholesky, Preconditioner, SolveReport,
                      lor_cholesky_setup, pcg)
from .spaces import FeSpace, build_space, expected_ndofs

__all__ = [name for name in dir() if not name.startswith("_")]
