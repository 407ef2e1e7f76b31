"""Mixed Dirichlet-Neumann viscous flow on triangulations (Taylor-Hood P2/P1).

The problem: minimize the viscous energy  int( sum_i 1/2|grad u_i|^2 - f.u )
over velocities vanishing on the Dirichlet part of the boundary, subject
to the pointwise divergence-free constraint; the pressure is the
multiplier of that constraint.  The quadratic/linear element pair is
inf-sup stable, which keeps the discrete multiplier unique whenever the
Neumann part of the boundary is nonempty.

Assembly uses a fixed six-point triangle rule (exact through degree 4)
and three-point Gauss edges, with element contributions summed in a fixed
order, so repeated assemblies are bit-identical.  Systems are solved by
sparse LU; everything here is desk-scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, EmptyDirichletBoundary, SingularSystem
from .fields import ForceField, ManufacturedStokes
from .mesh import DIRICHLET, NEUMANN, TriMesh

__all__ = [
    "FunctionSpace",
    "StokesSystem",
    "StokesSolution",
    "assemble",
    "solve_stokes",
    "energy",
    "inf_sup_constant",
    "h1_velocity_error",
    "pressure_mass_matrix",
    "ConvergenceRow",
    "convergence_study",
]

# Six-point triangle rule, exact for polynomials of degree <= 4.
_QA1, _QB1, _QW1 = 0.816847572980459, 0.091576213509771, 0.109951743655322
_QA2, _QB2, _QW2 = 0.108103018168070, 0.445948490915965, 0.223381589678011
_TRI_BARY = np.array(
    [
        [_QA1, _QB1, _QB1],
        [_QB1, _QA1, _QB1],
        [_QB1, _QB1, _QA1],
        [_QA2, _QB2, _QB2],
        [_QB2, _QA2, _QB2],
        [_QB2, _QB2, _QA2],
    ]
)
_TRI_W = np.array([_QW1, _QW1, _QW1, _QW2, _QW2, _QW2])  # sums to 1

# Three-point Gauss rule on [0, 1] (degree 5).
_EDGE_T = np.array([0.5 - np.sqrt(15.0) / 10.0, 0.5, 0.5 + np.sqrt(15.0) / 10.0])
_EDGE_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])

_GRAD_BARY = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # d l_k / d(xi, eta)


def _p2_values(bary: np.ndarray) -> np.ndarray:
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    return np.column_stack(
        [
            l0 * (2 * l0 - 1),
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            4 * l0 * l1,
            4 * l1 * l2,
            4 * l2 * l0,
        ]
    )


def _p2_ref_grads(bary: np.ndarray) -> np.ndarray:
    nq = bary.shape[0]
    g = np.zeros((nq, 6, 2))
    l = bary
    d = _GRAD_BARY
    for k in range(3):
        g[:, k, :] = (4 * l[:, k] - 1)[:, None] * d[k]
    pairs = [(0, 1), (1, 2), (2, 0)]  # midpoint nodes 3, 4, 5
    for idx, (a, b) in enumerate(pairs):
        g[:, 3 + idx, :] = 4 * (l[:, a][:, None] * d[b] + l[:, b][:, None] * d[a])
    return g


_P2_VALS = _p2_values(_TRI_BARY)        # (nq, 6)
_P2_REF_GRADS = _p2_ref_grads(_TRI_BARY)  # (nq, 6, 2)
_P1_VALS = _TRI_BARY                    # (nq, 3)


def _edge_p2_values(t: np.ndarray) -> np.ndarray:
    return np.column_stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)])


_EDGE_P2 = _edge_p2_values(_EDGE_T)  # (3 quad, 3 nodes: start, end, mid)


class FunctionSpace:
    """Taylor-Hood space on a mesh: P2 vector velocity, P1 scalar pressure.

    Velocity nodes are vertices plus edge midpoints; both velocity
    components are constrained to zero at every node on the closure of
    the Dirichlet edges.  Pressure nodes are the vertices, unconstrained.
    Precomputes the per-element geometry used by every assembly loop.
    """

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        v, t = mesh.vertices, mesh.triangles
        nv, nt = mesh.num_vertices, mesh.num_triangles

        edge_ids: dict[tuple[int, int], int] = {}
        tri_nodes = np.empty((nt, 6), dtype=int)
        tri_nodes[:, :3] = t
        mid_coords: list[np.ndarray] = []
        for ti, (i, j, k) in enumerate(t):
            for local, (a, b) in enumerate(((i, j), (j, k), (k, i))):
                key = (min(a, b), max(a, b))
                if key not in edge_ids:
                    edge_ids[key] = nv + len(mid_coords)
                    mid_coords.append(0.5 * (v[a] + v[b]))
                tri_nodes[ti, 3 + local] = edge_ids[key]
        self.tri_nodes = tri_nodes
        self.node_coords = np.vstack([v, np.array(mid_coords).reshape(-1, 2)])
        self.num_nodes = self.node_coords.shape[0]
        self.num_pressure = nv

        dirichlet: set[int] = set()
        self.neumann_edges: list[tuple[int, int, int]] = []
        for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            mid = edge_ids[(min(i, j), max(i, j))]
            if tag == DIRICHLET:
                dirichlet.update((int(i), int(j), mid))
            else:
                self.neumann_edges.append((int(i), int(j), mid))
        self.dirichlet_nodes = np.array(sorted(dirichlet), dtype=int)

        constrained = np.zeros(2 * self.num_nodes, dtype=bool)
        constrained[2 * self.dirichlet_nodes] = True
        constrained[2 * self.dirichlet_nodes + 1] = True
        self.free_dofs = np.nonzero(~constrained)[0]
        self.num_velocity = self.free_dofs.size

        # Element geometry: affine maps, physical basis gradients, quadrature.
        v0 = v[t[:, 0]]
        e1 = v[t[:, 1]] - v0
        e2 = v[t[:, 2]] - v0
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        jinv_t = np.empty((nt, 2, 2))
        jinv_t[:, 0, 0] = e2[:, 1]
        jinv_t[:, 0, 1] = -e1[:, 1]
        jinv_t[:, 1, 0] = -e2[:, 0]
        jinv_t[:, 1, 1] = e1[:, 0]
        jinv_t /= det[:, None, None]
        self.det = det
        self.phys_grads = np.einsum("tij,qaj->tqai", jinv_t, _P2_REF_GRADS)
        xi, eta = _TRI_BARY[:, 1], _TRI_BARY[:, 2]
        self.quad_points = (
            v0[:, None, :] + xi[None, :, None] * e1[:, None, :] + eta[None, :, None] * e2[:, None, :]
        )
        self.quad_coef = _TRI_W[None, :] * (0.5 * det)[:, None]

    def expand_velocity(self, u_free: np.ndarray) -> np.ndarray:
        """Free-dof coefficients -> full vector with zeros at Dirichlet dofs."""
        full = np.zeros(2 * self.num_nodes)
        full[self.free_dofs] = u_free
        return full

    def interpolate_velocity(self, field) -> np.ndarray:
        """Nodal interpolation of an analytic velocity, free dofs only."""
        vals = field.evaluate(self.node_coords)
        return vals.reshape(-1)[self.free_dofs]

    def element_velocity_gradients(self, u_free: np.ndarray) -> np.ndarray:
        """grad(u_h) at every quadrature point: (nt, nq, 2, 2)."""
        full = self.expand_velocity(u_free)
        coeffs = full.reshape(-1, 2)[self.tri_nodes]  # (nt, 6, 2)
        return np.einsum("tai,tqaj->tqij", coeffs, self.phys_grads)

    def pressure_at_quad(self, lam: np.ndarray) -> np.ndarray:
        """P1 pressure values at every quadrature point: (nt, nq)."""
        return np.einsum("tp,qp->tq", lam[self.mesh.triangles], _P1_VALS)

    def pressure_integral_weights(self) -> np.ndarray:
        """Vector a with a.lam = integral of the P1 pressure (exact)."""
        a = np.zeros(self.num_pressure)
        np.add.at(a, self.mesh.triangles, (self.det / 6.0)[:, None])
        return a


@dataclass(frozen=True)
class StokesSystem:
    """Assembled saddle system: stiffness A, divergence pairing B, loads f, g."""

    space: FunctionSpace
    A: sparse.csr_matrix
    B: sparse.csr_matrix
    f: np.ndarray
    g: np.ndarray | None = None

    @property
    def rhs(self) -> np.ndarray:
        return self.f if self.g is None else self.f + self.g


@dataclass(frozen=True)
class StokesSolution:
    """Velocity and pressure coefficients with their defect norms."""

    u: np.ndarray
    lam: np.ndarray
    residual_momentum: float
    residual_divergence: float


def assemble(mesh: TriMesh, f_field: ForceField, g_field: ForceField | None = None) -> StokesSystem:
    """Assemble stiffness, divergence pairing and loads on a tagged mesh.

    Dirichlet velocity dofs are eliminated by row/column removal (the
    boundary data is zero, so no lifting is needed).  ``g_field``, when
    given, is integrated over the Neumann edges only.
    """
    if DIRICHLET not in mesh.boundary_tags:
        raise EmptyDirichletBoundary("no Dirichlet edges: velocity stiffness would be singular")
    space = FunctionSpace(mesh)
    return _assemble_on(space, f_field, g_field)


def _assemble_on(space: FunctionSpace, f_field: ForceField, g_field: ForceField | None) -> StokesSystem:
    nt = space.mesh.num_triangles
    pg = space.phys_grads
    coef = space.quad_coef
    ndof = 2 * space.num_nodes

    # Scalar P2 stiffness, applied per velocity component.
    ke = np.einsum("tqai,tqbi,tq->tab", pg, pg, coef)
    node_dofs = 2 * space.tri_nodes  # (nt, 6)
    rows = np.broadcast_to(node_dofs[:, :, None], (nt, 6, 6))
    cols = np.broadcast_to(node_dofs[:, None, :], (nt, 6, 6))
    data = np.concatenate([ke.ravel(), ke.ravel()])
    rr = np.concatenate([rows.ravel(), (rows + 1).ravel()])
    cc = np.concatenate([cols.ravel(), (cols + 1).ravel()])
    a_full = sparse.coo_matrix((data, (rr, cc)), shape=(ndof, ndof)).tocsr()

    # Divergence pairing: rows are vertex pressures, columns velocity dofs.
    be = np.einsum("tq,qp,tqac->tpac", coef, _P1_VALS, pg)
    prow = np.broadcast_to(space.mesh.triangles[:, :, None, None], (nt, 3, 6, 2))
    vcol = node_dofs[:, None, :, None] + np.arange(2)[None, None, None, :]
    vcol = np.broadcast_to(vcol, (nt, 3, 6, 2))
    b_full = sparse.coo_matrix(
        (be.ravel(), (prow.ravel(), vcol.ravel())), shape=(space.num_pressure, ndof)
    ).tocsr()

    f_vals = f_field.evaluate(space.quad_points)  # (nt, nq, 2)
    fe = np.einsum("tq,qa,tqc->tac", coef, _P2_VALS, f_vals)
    f_full = np.zeros(ndof)
    np.add.at(f_full, vcol[:, 0], fe)

    g_full = None
    if g_field is not None and space.neumann_edges:
        g_full = np.zeros(ndof)
        for i, j, mid in space.neumann_edges:
            pa, pb = space.mesh.vertices[i], space.mesh.vertices[j]
            length = float(np.linalg.norm(pb - pa))
            xq = pa[None, :] + _EDGE_T[:, None] * (pb - pa)[None, :]
            gv = g_field.evaluate(xq)  # (3, 2)
            ge = length * np.einsum("q,qa,qc->ac", _EDGE_W, _EDGE_P2, gv)
            for local, node in enumerate((i, j, mid)):
                g_full[2 * node] += ge[local, 0]
                g_full[2 * node + 1] += ge[local, 1]

    free = space.free_dofs
    A = a_full[free][:, free].tocsr()
    B = b_full[:, free].tocsr()
    f = f_full[free]
    g = None if g_full is None else g_full[free]
    return StokesSystem(space=space, A=A, B=B, f=f, g=g)


def solve_stokes(
    system: StokesSystem, pin_pressure: bool = False, residual_tol: float = 1e-9
) -> StokesSolution:
    """Solve the saddle system [[A, -B'], [-B, 0]] (u, lam) = (f + g, 0).

    With an empty Neumann boundary the pressure is only determined up to a
    constant; callers must then opt into ``pin_pressure``: one pressure
    dof is fixed to zero for the solve and the result is shifted to zero
    mean afterwards.  ``residual_tol`` scales with 1 + |f + g| and bounds
    the accepted momentum and divergence defects.
    """
    space = system.space
    if not space.neumann_edges and not pin_pressure:
        raise SingularSystem(
            "no Neumann edges: the pressure is defined up to a constant; "
            "solve with pin_pressure=True"
        )
    rhs_u = system.rhs
    B = system.B[1:] if pin_pressure else system.B
    K = sparse.bmat([[system.A, -B.T], [-B, None]], format="csc")
    rhs = np.concatenate([rhs_u, np.zeros(B.shape[0])])
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise SingularSystem(f"saddle factorization failed: {exc}") from None
    sol = lu.solve(rhs)
    nu = system.A.shape[0]
    u = sol[:nu]
    if pin_pressure:
        lam = np.concatenate([[0.0], sol[nu:]])
        weights = space.pressure_integral_weights()
        lam = lam - (weights @ lam) / weights.sum()
    else:
        lam = sol[nu:]

    r_mom = float(np.linalg.norm(system.A @ u - rhs_u - system.B.T @ lam))
    r_div = float(np.linalg.norm(system.B @ u))
    scale = 1.0 + float(np.linalg.norm(rhs_u))
    if not np.isfinite(r_mom) or r_mom > residual_tol * scale or r_div > residual_tol * scale:
        raise SingularSystem(
            f"solution residuals too large (momentum {r_mom:.3e}, divergence {r_div:.3e})"
        )
    return StokesSolution(u=u, lam=lam, residual_momentum=r_mom, residual_divergence=r_div)


def energy(system: StokesSystem, solution: StokesSolution) -> float:
    """Discrete energy 1/2 u'Au - (f+g)'u of a velocity vector."""
    u = solution.u
    if u.shape[0] != system.A.shape[0]:
        raise DimensionMismatch("velocity vector does not match the system")
    return float(0.5 * u @ (system.A @ u) - system.rhs @ u)


def pressure_mass_matrix(space: FunctionSpace) -> sparse.csr_matrix:
    nt = space.mesh.num_triangles
    me = np.einsum("tq,qp,qr->tpr", space.quad_coef, _P1_VALS, _P1_VALS)
    rows = np.broadcast_to(space.mesh.triangles[:, :, None], (nt, 3, 3))
    cols = np.broadcast_to(space.mesh.triangles[:, None, :], (nt, 3, 3))
    return sparse.coo_matrix(
        (me.ravel(), (rows.ravel(), cols.ravel())),
        shape=(space.num_pressure, space.num_pressure),
    ).tocsr()


def inf_sup_constant(system: StokesSystem) -> float:
    """Discrete inf-sup constant of the divergence pairing.

    Smallest generalized singular value of B with the stiffness norm on
    velocities and the pressure mass norm on multipliers; computed from
    the smallest eigenvalue of the pressure Schur complement.  Meaningful
    when the Neumann boundary is nonempty (B has full row rank).
    """
    lu = spla.splu(system.A.tocsc())
    bt = system.B.toarray().T
    z = lu.solve(bt)
    schur = bt.T @ z
    m = pressure_mass_matrix(system.space).toarray()
    eigvals = scipy.linalg.eigh(schur, m, eigvals_only=True)
    return float(np.sqrt(max(eigvals[0], 0.0)))


def h1_velocity_error(space: FunctionSpace, u_free: np.ndarray, exact_velocity) -> float:
    """H1-seminorm distance between a discrete velocity and an exact one."""
    grad_h = space.element_velocity_gradients(u_free)
    grad_ex = exact_velocity.gradient(space.quad_points)
    diff = grad_h - grad_ex
    return float(np.sqrt(np.einsum("tqij,tqij,tq->", diff, diff, space.quad_coef)))


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    h: float
    h1_error: float
    order: float | None  # vs the previous row; None on the first row


def convergence_study(
    manufactured: ManufacturedStokes,
    n_list,
    neumann_sides: set[str] = frozenset({"right"}),
) -> list[ConvergenceRow]:
    """Solve the manufactured problem on a sequence of meshes and report
    H1 velocity errors with consecutive-ratio orders."""
    from .mesh import unit_square_mesh

    rows: list[ConvergenceRow] = []
    prev: ConvergenceRow | None = None
    for n in n_list:
        mesh = unit_square_mesh(int(n), neumann_sides=set(neumann_sides))
        system = assemble(mesh, manufactured.force, manufactured.traction)
        solution = solve_stokes(system)
        err = h1_velocity_error(system.space, solution.u, manufactured.velocity)
        order = None
        if prev is not None and err > 0.0 and prev.h1_error > 0.0:
            order = float(np.log(prev.h1_error / err) / np.log(n / prev.n))
        row = ConvergenceRow(n=int(n), h=1.0 / float(n), h1_error=err, order=order)
        rows.append(row)
        prev = row
    return rows
