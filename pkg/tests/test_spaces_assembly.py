import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from lorfem.assembly import (AssembledOp, Coefficients, MassOperator, OpTag, SystemOperator, assemble, assemble_lor,
                             element_matrices, eliminate_dirichlet, export_matrix_market, mass_diagonal)
from lorfem.errors import InvariantError
from lorfem.mesh import build_cart_mesh
from lorfem.quadrature import gauss_legendre_rule, gauss_lobatto_rule
from lorfem.spaces import build_space, expected_ndofs

KINDS_3D = ["H1", "HCurl", "HDiv", "L2"]


def _interp_affine(space, grad, c0=0.3):
    """Nodal H1 coefficients of ``f(x) = grad . x + c0``."""
    mesh, p = space.mesh, space.p
    pts = gauss_lobatto_rule(p).points
    u = np.zeros(space.ndofs)
    origin = mesh.element_origin()
    for e in range(mesh.n_elements):
        for k in range(space.layout.ndofs):
            _, idx = space.layout.multi_index(k)
            x = origin[e] + mesh.jacobians[e] @ (pts[list(idx)] + 1.0)
            u[space.elem_dofs[e][k]] = grad @ x + c0
    return u


def _piola_constant(space, field):
    """DOFs of a constant vector field under the covariant (HCurl) or contravariant (HDiv) map."""
    mesh = space.mesh
    u = np.zeros(space.ndofs)
    for e in range(mesh.n_elements):
        jac = mesh.jacobians[e]
        ref = jac.T @ field if space.kind.value == "HCurl" else np.linalg.det(jac) * np.linalg.solve(jac, field)
        for k in range(space.layout.ndofs):
            comp, _ = space.layout.multi_index(k)
            u[space.elem_dofs[e][k]] = ref[comp]
    return u


@pytest.mark.parametrize("kind", KINDS_3D + ["DG"])
@pytest.mark.parametrize("p", [1, 2, 3])
def test_ndofs_match_closed_form(kind, p):
    mesh = build_cart_mesh(3, [2, 1, 3])
    space = build_space(kind, p, mesh)
    assert space.ndofs == expected_ndofs(kind, p, mesh.counts)
    assert space.elem_dofs.shape == (mesh.n_elements, space.layout.ndofs)
    assert space.elem_dofs.max() == space.ndofs - 1
    assert np.unique(space.elem_dofs).size == space.ndofs


def test_h1_global_count_and_boundary():
    mesh = build_cart_mesh(2, [2, 3])
    space = build_space("H1", 2, mesh)
    assert space.ndofs == 5 * 7
    assert space.boundary_dofs.size == 2 * 5 + 2 * 7 - 4
    assert build_space("L2", 2, mesh).boundary_dofs.size == 0


@pytest.mark.parametrize("quad", ["exact", "collocated"])
def test_h1_mass_integrates_constants(sheared_mesh_2d, quad):
    space = build_space("H1", 3, sheared_mesh_2d)
    m = assemble(space, "mass", quad).matrix
    one = np.ones(space.ndofs)
    assert one @ m @ one == pytest.approx(sheared_mesh_2d.volumes.sum(), rel=1e-13)


def test_h1_exact_mass_and_stiffness_of_affine_function(sheared_mesh_3d):
    mesh = sheared_mesh_3d
    space = build_space("H1", 2, mesh)
    grad = np.array([0.4, -1.1, 0.7])
    u = _interp_affine(space, grad)
    k = assemble(space, "stiffness", "exact").matrix
    assert u @ k @ u == pytest.approx(grad @ grad * mesh.volumes.sum(), rel=1e-12)
    # int f^2 by an independent tensor Gauss rule on every mapped element
    q = gauss_legendre_rule(3)
    xi = np.stack(np.meshgrid(q.points, q.points, q.points, indexing="ij"), -1).reshape(-1, 3)
    w = np.einsum("i,j,k->ijk", q.weights, q.weights, q.weights).ravel()
    origin = mesh.element_origin()
    ref = sum(abs(np.linalg.det(mesh.jacobians[e])) * w
              @ ((origin[e] + (xi + 1.0) @ mesh.jacobians[e].T) @ grad + 0.3) ** 2 for e in range(mesh.n_elements))
    m = assemble(space, "mass", "exact").matrix
    assert u @ m @ u == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("kind", ["HCurl", "HDiv"])
@pytest.mark.parametrize("quad", ["exact", "collocated"])
def test_piola_mass_of_constant_field(sheared_mesh_3d, kind, quad):
    space = build_space(kind, 2, sheared_mesh_3d)
    field = np.array([0.7, -1.3, 0.4])
    u = _piola_constant(space, field)
    m = assemble(space, "mass", quad).matrix
    assert u @ m @ u == pytest.approx(field @ field * sheared_mesh_3d.volumes.sum(), rel=1e-12)
    # constant fields are curl- and divergence-free
    assert np.abs(space.incidence @ u).max() < 1e-12 * np.abs(u).max()


def test_l2_mass_of_constant(sheared_mesh_3d):
    space = build_space("L2", 3, sheared_mesh_3d)
    # L2 DOFs are histopolation averages of the reference density |det J| f
    u = np.repeat(np.abs(np.linalg.det(sheared_mesh_3d.jacobians)), space.layout.ndofs) * 2.5
    m = assemble(space, "mass", "exact").matrix
    assert u @ m @ u == pytest.approx(2.5**2 * sheared_mesh_3d.volumes.sum(), rel=1e-12)


@pytest.mark.parametrize("p", [1, 3])
def test_h1_element_stiffness_brute_force(p):
    """Element stiffness against physical gradients of monomial-fitted Lagrange polynomials."""
    mesh = build_cart_mesh(2, [1, 1], [(0.0, 2.0), (0.0, 1.0)], None, [[1.0, 0.4], [-0.2, 0.9]])
    space = build_space("H1", p, mesh)
    x = gauss_lobatto_rule(p).points
    coef = np.linalg.inv(np.vander(x, increasing=True))  # column j: monomial coefficients of l_j
    val = lambda t: np.vander(t, p + 1, increasing=True) @ coef  # noqa: E731
    der = lambda t: np.vander(t, p + 1, increasing=True)[:, :-1] @ (coef[1:] * np.arange(1, p + 1)[:, None])  # noqa: E731
    q = gauss_legendre_rule(p + 2)
    vx, dx = val(q.points), der(q.points)
    # basis index k = i + (p + 1) j, axis 0 fastest; gradients at (qa, qb)
    gx = np.einsum("ai,bj->abji", dx, vx).reshape(q.points.size, q.points.size, -1)
    gy = np.einsum("ai,bj->abji", vx, dx).reshape(q.points.size, q.points.size, -1)
    jac = mesh.jacobians[0]
    jinv = np.linalg.inv(jac)
    w = np.outer(q.weights, q.weights) * abs(np.linalg.det(jac))
    phys = np.einsum("rc,cabk->rabk", jinv.T, np.stack([gx, gy]))
    ref = np.einsum("ab,rabk,rabl->kl", w, phys, phys)
    got = element_matrices(space, "stiffness", "exact")[0].toarray()
    np.testing.assert_allclose(got, ref, atol=1e-12 * np.abs(ref).max())


@pytest.mark.parametrize("kind", ["H1", "HCurl", "HDiv"])
def test_stiffness_is_incidence_sandwich(sheared_mesh_3d, kind, rng):
    mesh = sheared_mesh_3d
    coeffs = Coefficients(rng.uniform(0.5, 2.0, mesh.n_elements), rng.uniform(0.5, 2.0, mesh.n_elements))
    space = build_space(kind, 2, mesh)
    k = assemble(space, "stiffness", "exact", coeffs).matrix
    nxt = space.next_space()
    m_next = assemble(nxt, "mass", "exact", Coefficients(np.ones(mesh.n_elements), coeffs.alpha)).matrix
    g = space.incidence
    ref = (g.T @ m_next @ g).toarray()
    assert np.abs(k.toarray() - ref).max() <= 1e-12 * np.abs(ref).max()


@pytest.mark.parametrize("kind", KINDS_3D)
@pytest.mark.parametrize("quad", ["exact", "collocated"])
@pytest.mark.parametrize("order", ["high", "low"])
def test_matrix_free_mass_matches_assembled(sheared_mesh_3d, kind, quad, order, rng):
    mesh = sheared_mesh_3d
    coeffs = Coefficients(np.ones(mesh.n_elements), rng.uniform(0.5, 2.0, mesh.n_elements))
    space = build_space(kind, 3, mesh)
    a = assemble(space, "mass", quad, coeffs, order=order).matrix
    op = MassOperator(space, coeffs, quad, order)
    u = rng.standard_normal(space.ndofs)
    np.testing.assert_allclose(op.apply(u), a @ u, atol=1e-13 * np.abs(a @ u).max())
    np.testing.assert_allclose(op.diagonal(), a.diagonal(), rtol=1e-13)
    np.testing.assert_allclose(mass_diagonal(space, coeffs, None, quad, order), a.diagonal(), rtol=1e-13)


@pytest.mark.parametrize("kind", ["H1", "HCurl", "HDiv"])
def test_system_operator_matches_eliminated_assembly(sheared_mesh_3d, kind, rng):
    mesh = sheared_mesh_3d
    coeffs = Coefficients(rng.uniform(0.5, 2.0, mesh.n_elements), rng.uniform(0.5, 2.0, mesh.n_elements))
    space = build_space(kind, 2, mesh)
    a = assemble(space, "mass_plus_stiffness", "collocated", coeffs).matrix
    a = eliminate_dirichlet(a, space.boundary_dofs)
    op = SystemOperator(space, coeffs, "collocated")
    u = rng.standard_normal(space.ndofs)
    np.testing.assert_allclose(op.apply(u), a @ u, atol=1e-12 * np.abs(a @ u).max())


@pytest.mark.parametrize("kind", KINDS_3D)
def test_lor_equals_high_order_at_p1(kind):
    mesh = build_cart_mesh(3, [2, 2, 1])
    space = build_space(kind, 1, mesh)
    for tag in ("mass", "stiffness"):
        if kind == "L2" and tag == "stiffness":
            continue
        hi = assemble(space, tag, "exact").matrix
        lo = assemble_lor(space, tag, quad_mode="exact").matrix
        assert abs(hi - lo).max() < 1e-14 * abs(hi).max()


def test_lor_stiffness_exact_on_affine(sheared_mesh_2d):
    space = build_space("H1", 4, sheared_mesh_2d)
    grad = np.array([1.5, -0.5])
    u = _interp_affine(space, grad)
    k = assemble_lor(space, "stiffness", quad_mode="exact").matrix
    assert u @ k @ u == pytest.approx(grad @ grad * sheared_mesh_2d.volumes.sum(), rel=1e-12)


@pytest.mark.parametrize("kind", ["H1", "HCurl", "HDiv"])
def test_assembled_operators_are_spd_after_elimination(kind):
    mesh = build_cart_mesh(2, [2, 2])
    space = build_space(kind, 3, mesh)
    for order in ("high", "low"):
        a = eliminate_dirichlet(assemble(space, "mass_plus_stiffness", "collocated", order=order).matrix,
                                space.boundary_dofs).toarray()
        np.testing.assert_allclose(a, a.T, atol=1e-14)
        assert np.linalg.eigvalsh(a).min() > 0


def test_eliminate_dirichlet_moves_values_to_rhs():
    a = sp.csr_matrix(np.array([[4.0, -1, 0], [-1, 4, -1], [0, -1, 4]]))
    b = np.array([1.0, 2.0, 3.0])
    a2, b2 = eliminate_dirichlet(a, [0], b, np.array([5.0]))
    np.testing.assert_array_equal(a2.toarray(), [[1, 0, 0], [0, 4, -1], [0, -1, 4]])
    np.testing.assert_allclose(b2, [5.0, 7.0, 3.0])
    x = np.linalg.solve(a2.toarray(), b2)
    assert x[0] == 5.0
    np.testing.assert_allclose(a.toarray()[1:] @ x, b[1:])


def test_matrix_market_export(tmp_path):
    space = build_space("H1", 2, build_cart_mesh(2, [2, 2]))
    op = assemble(space, "mass_plus_stiffness", "exact")
    path = tmp_path / "a.mtx"
    export_matrix_market(op, path)
    text = path.read_text()
    assert text.startswith("%%MatrixMarket matrix coordinate real symmetric")
    back = scipy.io.mmread(str(path))
    assert abs(back - op.matrix).max() < 1e-14


def test_symmetry_check_raises():
    space = build_space("H1", 1, build_cart_mesh(1, [1]))
    bad = AssembledOp(sp.csr_matrix(np.array([[1.0, 2.0], [0.0, 1.0]])), space, OpTag.MASS, "exact")
    with pytest.raises(InvariantError):
        bad.check_symmetric()


def test_coefficients_validated():
    space = build_space("H1", 1, build_cart_mesh(2, [2, 2]))
    with pytest.raises(ValueError):
        assemble(space, "mass", "exact", Coefficients(np.ones(3), np.ones(3)))
    with pytest.raises(ValueError):
        assemble(space, "mass", "exact", Coefficients(np.ones(4), -np.ones(4)))


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(["H1", "HCurl", "HDiv", "L2"]), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_mass_is_symmetric_positive(kind, p, seed):
    rng = np.random.default_rng(seed)
    mesh = build_cart_mesh(2, [2, 1], None, [rng.uniform(0.5, 2)], [[1.0, rng.uniform(-0.5, 0.5)], [0.0, 1.0]])
    space = build_space(kind, p, mesh)
    m = MassOperator(space, None, "collocated")
    u = rng.standard_normal(space.ndofs)
    v = rng.standard_normal(space.ndofs)
    assert m.apply(u) @ v == pytest.approx(u @ m.apply(v), rel=1e-11, abs=1e-12)
    assert u @ m.apply(u) > 0
