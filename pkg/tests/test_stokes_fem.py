"""Taylor-Hood assembly, exactly representable solutions, convergence."""

import numpy as np
import pytest

import shapederiv as sd
from shapederiv.fields import ConstantForce, LeftEdgeTraction, trig_manufactured
from shapederiv.mesh import TriMesh
from shapederiv.stokes_fem import FunctionSpace, pressure_mass_matrix


def pressure_gradient_setup(n):
    """f = (1, 0) with the right edge free: u = 0, lambda = x1 - 1 exactly."""
    mesh = sd.unit_square_mesh(n, {"right"})
    system = sd.assemble(mesh, ConstantForce(value=(1.0, 0.0)))
    return mesh, system, sd.solve_stokes(system)


def poiseuille_setup(n):
    """No body force, traction (2, 0) on the left edge, walls top and bottom."""
    mesh = sd.unit_square_mesh(n, {"left", "right"})
    system = sd.assemble(mesh, ConstantForce(value=(0.0, 0.0)), LeftEdgeTraction(value=(2.0, 0.0)))
    return mesh, system, sd.solve_stokes(system)


# --- function space ----------------------------------------------------------


def test_space_dof_counts_unit_square():
    mesh = sd.unit_square_mesh(2, {"right"})
    space = FunctionSpace(mesh)
    assert space.num_pressure == 9
    # 9 vertices + 16 edges; Dirichlet closure = all boundary nodes except
    # the interior of the right edge (2 vertices + 2 midpoints stay free).
    assert space.num_nodes == 25
    on_dirichlet = [
        k for k, (x, y) in enumerate(space.node_coords)
        if (x == 0.0 or y == 0.0 or y == 1.0)
    ]
    assert set(space.dirichlet_nodes) == set(on_dirichlet)
    assert space.num_velocity == 2 * (space.num_nodes - len(on_dirichlet))


def test_space_reference_triangle_fully_clamped():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    edges = np.array([[0, 1], [1, 2], [2, 0]])
    mesh = TriMesh(verts, tris, edges, ("D", "D", "D"))
    space = FunctionSpace(mesh)
    assert space.num_velocity == 0  # every quadratic node sits on the boundary


def test_assemble_requires_dirichlet_edges():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mesh = TriMesh(verts, np.array([[0, 1, 2]]), np.array([[0, 1], [1, 2], [2, 0]]), ("N", "N", "N"))
    with pytest.raises(sd.EmptyDirichletBoundary):
        sd.assemble(mesh, ConstantForce())


# --- assembly ---------------------------------------------------------------


def test_zero_force_gives_zero_load():
    mesh = sd.unit_square_mesh(1, {"right"})
    system = sd.assemble(mesh, ConstantForce(value=(0.0, 0.0)))
    assert np.all(system.f == 0.0)


def test_stiffness_symmetry():
    mesh = sd.unit_square_mesh(4, {"right"})
    system = sd.assemble(mesh, ConstantForce())
    diff = abs(system.A - system.A.T).max()
    assert diff <= 1e-14 * abs(system.A).max()


def test_stiffness_positive_definite_on_free_dofs():
    mesh = sd.unit_square_mesh(2, {"right"})
    system = sd.assemble(mesh, ConstantForce())
    eigvals = np.linalg.eigvalsh(system.A.toarray())
    assert eigvals[0] > 0.0


def test_divergence_rows_sum_to_integral_of_div():
    # The pressure basis is a partition of unity, so summing the rows of B
    # must reproduce int(div basis) computed by plain quadrature.
    mesh = sd.unit_square_mesh(3, {"right"})
    system = sd.assemble(mesh, ConstantForce())
    space = system.space
    ref = np.zeros(2 * space.num_nodes)
    for t, nodes in enumerate(space.tri_nodes):
        contrib = np.einsum("q,qac->ac", space.quad_coef[t], space.phys_grads[t])
        for a, node in enumerate(nodes):
            ref[2 * node] += contrib[a, 0]
            ref[2 * node + 1] += contrib[a, 1]
    row_sums = np.asarray(system.B.sum(axis=0)).ravel()
    np.testing.assert_allclose(row_sums, ref[space.free_dofs], atol=1e-13)


def test_load_against_midpoint_rule_oracle():
    """Oracle: edge-midpoint quadrature (degree 1) of f . w per element."""
    mesh = sd.unit_square_mesh(4, {"right"})
    system = sd.assemble(mesh, ConstantForce(value=(1.0, 0.0)))
    space = system.space
    ref = np.zeros(2 * space.num_nodes)
    mids = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])  # barycentric midpoints
    # P2 basis at edge midpoints: vertex functions vanish there, each edge
    # function is 1 at its own midpoint and 0 at the others.
    for t, nodes in enumerate(space.tri_nodes):
        area = 0.5 * space.det[t]
        for local_mid in range(3):
            node = nodes[3 + local_mid]
            ref[2 * node] += area / 3.0  # integral of f1 * (edge basis)
    np.testing.assert_allclose(
        system.f, ref[space.free_dofs], atol=1e-3 * max(1.0, abs(ref).max())
    )


# --- solving ----------------------------------------------------------------


def test_zero_data_zero_solution():
    mesh = sd.unit_square_mesh(2, {"right"})
    system = sd.assemble(mesh, ConstantForce(value=(0.0, 0.0)))
    sol = sd.solve_stokes(system)
    assert np.abs(sol.u).max() == 0.0
    assert np.abs(sol.lam).max() == 0.0


@pytest.mark.parametrize("n", [2, 4, 8])
def test_pressure_gradient_case_exact(n):
    mesh, system, sol = pressure_gradient_setup(n)
    u_full = system.space.expand_velocity(sol.u)
    assert np.abs(u_full).max() <= 1e-9
    lam_exact = mesh.vertices[:, 0] - 1.0
    assert np.abs(sol.lam - lam_exact).max() <= 1e-9


@pytest.mark.parametrize("n", [2, 4, 8])
def test_poiseuille_with_traction_exact(n):
    mesh, system, sol = poiseuille_setup(n)
    space = system.space
    u_full = space.expand_velocity(sol.u)
    u_exact = np.zeros_like(u_full)
    u_exact[0::2] = space.node_coords[:, 1] * (1.0 - space.node_coords[:, 1])
    assert np.abs(u_full - u_exact).max() <= 1e-8
    lam_exact = 2.0 * (1.0 - mesh.vertices[:, 0])
    assert np.abs(sol.lam - lam_exact).max() <= 1e-8


def test_poiseuille_energy_closed_form():
    # int 1/2 |grad u|^2 = 1/2 * int (1 - 2 y)^2 = 1/6; boundary work = 1/3.
    _, system, sol = poiseuille_setup(4)
    assert sd.energy(system, sol) == pytest.approx(-1.0 / 6.0, abs=1e-10)


def test_energy_identity_and_complementarity():
    for make in (pressure_gradient_setup, poiseuille_setup):
        _, system, sol = make(4)
        scale = 1.0 + np.linalg.norm(system.rhs) * np.linalg.norm(sol.u)
        assert abs(sol.u @ (system.A @ sol.u) - system.rhs @ sol.u) <= 1e-9 * scale
        assert abs(sol.lam @ (system.B @ sol.u)) <= 1e-10 * scale


def test_residual_invariants():
    mesh = sd.unit_square_mesh(8, {"right"})
    system = sd.assemble(mesh, sd.TrigForce())
    sol = sd.solve_stokes(system)
    scale = 1.0 + np.linalg.norm(system.rhs)
    assert sol.residual_momentum <= 1e-9 * scale
    assert sol.residual_divergence <= 1e-9 * scale


def test_pure_dirichlet_needs_pinning():
    mesh = sd.disk_mesh(2)
    system = sd.assemble(mesh, ConstantForce(value=(0.0, 1.0)))
    with pytest.raises(sd.SingularSystem):
        sd.solve_stokes(system)
    sol = sd.solve_stokes(system, pin_pressure=True)
    weights = system.space.pressure_integral_weights()
    assert abs(weights @ sol.lam) <= 1e-12  # zero-mean representative
    assert sol.residual_divergence <= 1e-9


def test_pure_dirichlet_gradient_force_zero_velocity():
    # f = grad(x1) on a fully clamped domain: u = 0, pressure recovers x1.
    mesh = sd.disk_mesh(3)
    system = sd.assemble(mesh, ConstantForce(value=(1.0, 0.0)))
    sol = sd.solve_stokes(system, pin_pressure=True)
    assert np.abs(system.space.expand_velocity(sol.u)).max() <= 1e-12
    weights = system.space.pressure_integral_weights()
    shift = (weights @ mesh.vertices[:, 0]) / weights.sum()
    assert np.abs(sol.lam - (mesh.vertices[:, 0] - shift)).max() <= 1e-10


# --- inf-sup and convergence --------------------------------------------------


def test_inf_sup_floor_under_refinement():
    values = {}
    for n in (4, 8, 16):
        mesh = sd.unit_square_mesh(n, {"right"})
        system = sd.assemble(mesh, ConstantForce())
        values[n] = sd.inf_sup_constant(system)
    assert values[4] > 0.1
    assert values[8] >= 0.8 * values[4]
    assert values[16] >= 0.8 * values[8]


def test_pressure_mass_total():
    mesh = sd.unit_square_mesh(3, {"right"})
    m = pressure_mass_matrix(FunctionSpace(mesh))
    assert m.sum() == pytest.approx(1.0, abs=1e-13)


def test_manufactured_solution_satisfies_momentum_balance():
    """Substitution oracle: -Lap(u) + grad(lambda) - f = 0, via differences."""
    man = trig_manufactured()
    rng = np.random.default_rng(10)
    eps = 1e-5
    for _ in range(5):
        p = rng.uniform(0.2, 0.8, size=2)
        lap = np.zeros(2)
        for j in range(2):
            dp = np.zeros(2)
            dp[j] = eps
            lap += (man.velocity.evaluate(p + dp) - 2 * man.velocity.evaluate(p)
                    + man.velocity.evaluate(p - dp)) / eps**2
        grad_lam = np.array(
            [
                (man.pressure(p + np.array([eps, 0])) - man.pressure(p - np.array([eps, 0]))) / (2 * eps),
                (man.pressure(p + np.array([0, eps])) - man.pressure(p - np.array([0, eps]))) / (2 * eps),
            ]
        )
        residual = -lap + grad_lam - man.force.evaluate(p)
        assert np.abs(residual).max() <= 1e-4
        # divergence-free by construction
        div = sum(
            (man.velocity.evaluate(p + np.eye(2)[j] * eps)[j]
             - man.velocity.evaluate(p - np.eye(2)[j] * eps)[j]) / (2 * eps)
            for j in range(2)
        )
        assert abs(div) <= 1e-9


def test_convergence_study_orders():
    rows = sd.convergence_study(trig_manufactured(), [4, 8, 16])
    assert rows[0].order is None
    assert all(r.order >= 1.8 for r in rows[1:])
    errs = [r.h1_error for r in rows]
    assert errs[0] > errs[1] > errs[2]


def test_convergence_study_single_row():
    rows = sd.convergence_study(trig_manufactured(), [4])
    assert len(rows) == 1 and rows[0].order is None


def test_exactly_representable_solutions_mesh_independent():
    for make in (pressure_gradient_setup, poiseuille_setup):
        energies = []
        for n in (2, 4, 8):
            _, system, sol = make(n)
            energies.append(sd.energy(system, sol))
        assert max(energies) - min(energies) <= 1e-10
