"""Lagrange P1/P2 spaces on the referent mesh and pulled-back assembly.

All integrals are referent-domain integrals; the moving domain enters only
through per-element geometric factors (Jacobian, cofactor, grid flux)
supplied by :mod:`alefem.ale`. Matrices use scipy CSR storage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu, gmres

from . import _kernels

DIRECT_SOLVE_LIMIT = 50_000

# Quadrature on the reference triangle (0,0)-(1,0)-(0,1); weights sum to the
# reference area 1/2. Points are barycentric (lam0, lam1, lam2).


def _perm3(a):
    return [(1 - 2 * a, a, a), (a, 1 - 2 * a, a), (a, a, 1 - 2 * a)]


def _rule(points, weights, degree):
    return (
        np.asarray(points, dtype=float),
        0.5 * np.asarray(weights, dtype=float),
        degree,
    )


_RULE3 = _rule(
    [(0.5, 0.5, 0.0), (0.0, 0.5, 0.5), (0.5, 0.0, 0.5)],
    [1.0 / 3.0] * 3,
    2,
)

_D4A, _D4B = 0.445948490915965, 0.091576213509771
_RULE6 = _rule(
    _perm3(_D4A) + _perm3(_D4B),
    [0.223381589678011] * 3 + [0.109951743655322] * 3,
    4,
)

_D6A, _D6B = 0.063089014491502, 0.249286745170910
_D6C, _D6D = 0.310352451033785, 0.636502499121399
_D6E = 1.0 - _D6C - _D6D
_RULE12 = _rule(
    _perm3(_D6A)
    + _perm3(_D6B)
    + [
        (_D6C, _D6D, _D6E),
        (_D6D, _D6E, _D6C),
        (_D6E, _D6C, _D6D),
        (_D6C, _D6E, _D6D),
        (_D6D, _D6C, _D6E),
        (_D6E, _D6D, _D6C),
    ],
    [0.050844906370207] * 3 + [0.116786275726379] * 3 + [0.082851075618374] * 6,
    6,
)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 3) barycentric
    weights: np.ndarray  # (nq,)
    degree: int


_RULES = {d: QuadratureRule(*r[:2], r[2]) for d, r in ((2, _RULE3), (4, _RULE6), (6, _RULE12))}


def triangle_rule(min_degree: int) -> QuadratureRule:
    """Smallest stocked rule exact to at least the requested degree."""
    for d in sorted(_RULES):
        if d >= min_degree:
            return _RULES[d]
    raise ValueError(f"no stocked rule of degree >= {min_degree}")


def reference_basis(degree: int, bary) -> tuple[np.ndarray, np.ndarray]:
    """Basis values and gradients at one barycentric point.

    Gradients are with respect to the reference coordinates (xi, eta) with
    lam = (1 - xi - eta, xi, eta). P2 edge functions follow the local edge
    order (0,1), (1,2), (2,0).
    """
    l0, l1, l2 = (float(b) for b in bary)
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if degree == 1:
        return np.array([l0, l1, l2]), dl.copy()
    if degree == 2:
        lam = np.array([l0, l1, l2])
        vals = np.empty(6)
        grads = np.empty((6, 2))
        vals[:3] = lam * (2.0 * lam - 1.0)
        for i in range(3):
            grads[i] = (4.0 * lam[i] - 1.0) * dl[i]
        for k, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
            vals[3 + k] = 4.0 * lam[i] * lam[j]
            grads[3 + k] = 4.0 * (lam[i] * dl[j] + lam[j] * dl[i])
        return vals, grads
    raise ValueError(f"unsupported degree {degree}")


def _tabulate(degree: int, rule: QuadratureRule):
    vals, grads = zip(*(reference_basis(degree, p) for p in rule.points))
    return np.ascontiguousarray(vals), np.ascontiguousarray(grads)


@dataclass
class _Tables:
    """Per-(space, rule) assembly tables."""

    wq: np.ndarray  # (nq,)
    phi: np.ndarray  # (nq, nloc)
    lam: np.ndarray  # (nq, 3) barycentric values, for per-element P1 data
    dets: np.ndarray  # (n_e,) |det| of the referent affine maps
    gradhat: np.ndarray  # (n_e, nq, nloc, 2) gradients in referent coords
    quad_xy: np.ndarray  # (n_e, nq, 2) referent quadrature points
    mref: np.ndarray  # (nloc, nloc) reference mass


@dataclass
class FeSpace:
    """Lagrange space of degree 1 or 2 on a fixed referent mesh."""

    mesh: object
    degree: int
    dof_map: np.ndarray  # (n_e, nloc)
    dof_coords: np.ndarray  # (n_dofs, 2)
    boundary_dofs: np.ndarray  # sorted
    dof_node_pairs: np.ndarray  # (n_dofs, 2) supporting mesh nodes per dof
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_dofs(self) -> int:
        return self.dof_coords.shape[0]

    def deformed_dof_coords(self, disp: np.ndarray) -> np.ndarray:
        """Dof positions after applying a nodal P1 displacement field; edge
        dofs live at midpoints, so their displacement is the endpoint mean
        (the grid keeps straight edges)."""
        pairs = self.dof_node_pairs
        return self.dof_coords + 0.5 * (disp[pairs[:, 0]] + disp[pairs[:, 1]])

    def tables(self, min_degree: int | None = None) -> _Tables:
        """Assembly tables for the smallest adequate rule (default 2*degree)."""
        rule = triangle_rule(2 * self.degree if min_degree is None else min_degree)
        key = ("tables", rule.degree)
        if key not in self._cache:
            self._cache[key] = self._build_tables(rule)
        return self._cache[key]

    def _build_tables(self, rule: QuadratureRule) -> _Tables:
        mesh = self.mesh
        p = mesh.nodes[mesh.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        # inverse of B = [d1 d2] (columns); referent gradients via B^{-T}
        binv = np.empty((mesh.n_triangles, 2, 2))
        binv[:, 0, 0] = d2[:, 1] / det
        binv[:, 0, 1] = -d2[:, 0] / det
        binv[:, 1, 0] = -d1[:, 1] / det
        binv[:, 1, 1] = d1[:, 0] / det

        phi, dphi = _tabulate(self.degree, rule)
        lam = np.ascontiguousarray(rule.points)
        gradhat = np.ascontiguousarray(np.einsum("eij,qli->eqlj", binv, dphi))
        quad_xy = np.einsum("qk,ekd->eqd", lam, p)
        mref = np.einsum("q,qi,qj->ij", rule.weights, phi, phi)
        return _Tables(rule.weights, phi, lam, np.abs(det), gradhat, quad_xy, mref)

    def scatter_indices(self):
        key = "scatter"
        if key not in self._cache:
            nloc = self.dof_map.shape[1]
            rows = np.repeat(self.dof_map, nloc, axis=1).ravel()
            cols = np.tile(self.dof_map, (1, nloc)).ravel()
            self._cache[key] = (rows, cols)
        return self._cache[key]


def build_space(mesh, degree: int) -> FeSpace:
    """P1: one dof per node. P2: node dofs then edge-midpoint dofs."""
    if degree == 1:
        nodes_self = np.repeat(np.arange(mesh.n_nodes, dtype=np.int64)[:, None], 2, axis=1)
        return FeSpace(mesh, 1, mesh.triangles.astype(np.int64),
                       mesh.nodes.copy(), mesh.boundary_node_set().astype(np.int64),
                       nodes_self)
    if degree != 2:
        raise ValueError(f"unsupported degree {degree}")

    edge_ids: dict[tuple[int, int], int] = {}
    n_e = mesh.n_triangles
    dof_map = np.empty((n_e, 6), dtype=np.int64)
    dof_map[:, :3] = mesh.triangles
    for e in range(n_e):
        tri = mesh.triangles[e]
        for k, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
            key = (min(tri[i], tri[j]), max(tri[i], tri[j]))
            idx = edge_ids.setdefault(key, len(edge_ids))
            dof_map[e, 3 + k] = mesh.n_nodes + idx

    coords = np.empty((mesh.n_nodes + len(edge_ids), 2))
    coords[: mesh.n_nodes] = mesh.nodes
    pairs = np.empty((coords.shape[0], 2), dtype=np.int64)
    pairs[: mesh.n_nodes] = np.arange(mesh.n_nodes)[:, None]
    for (a, b), idx in edge_ids.items():
        coords[mesh.n_nodes + idx] = 0.5 * (mesh.nodes[a] + mesh.nodes[b])
        pairs[mesh.n_nodes + idx] = (a, b)

    bdofs = set(int(n) for n in mesh.boundary_node_set())
    for a, b in mesh.boundary_edges:
        key = (min(a, b), max(a, b))
        bdofs.add(mesh.n_nodes + edge_ids[tuple(int(v) for v in key)])
    return FeSpace(mesh, 2, dof_map, coords, np.asarray(sorted(bdofs), dtype=np.int64),
                   pairs)


def interpolate(space: FeSpace, fn) -> np.ndarray:
    """Nodal interpolation: evaluate fn(x, y) at the dof coordinates."""
    return np.asarray(fn(space.dof_coords[:, 0], space.dof_coords[:, 1]), dtype=float)


# ---------------------------------------------------------------------------
# assembly


def _to_csr(space: FeSpace, locals_: np.ndarray) -> sparse.csr_matrix:
    rows, cols = space.scatter_indices()
    n = space.n_dofs
    return sparse.coo_matrix((locals_.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_weighted_mass(space: FeSpace, jac) -> sparse.csr_matrix:
    """M_ij = sum_K int psi_i psi_j J with J constant per element."""
    t = space.tables()
    jac = np.broadcast_to(np.asarray(jac, dtype=float), t.dets.shape)
    locals_ = (jac * t.dets)[:, None, None] * t.mref
    return _to_csr(space, locals_)


def assemble_stiffness_arrays(space: FeSpace, cof, jac, scale: float = 1.0) -> sparse.csr_matrix:
    """K_ij = scale * sum_K int (1/J) (C^T grad psi_i).(C^T grad psi_j)
    with C, J frozen per element (no time dependence)."""
    t = space.tables()
    cof = np.ascontiguousarray(cof, dtype=float)
    jac = np.ascontiguousarray(jac, dtype=float)
    locals_ = _kernels.stiffness_locals(t.dets, t.gradhat, cof, jac, t.wq, float(scale))
    return _to_csr(space, locals_)


def assemble_pulled_back_stiffness(space: FeSpace, alpha: float, geom, scale=None,
                                   tau=None) -> sparse.csr_matrix:
    """Step-scaled diffusion operator with interval geometry sampled at offset
    tau (interval end unless given): scale defaults to alpha * dt."""
    if scale is None:
        scale = alpha * geom.dt
    if tau is None:
        tau = geom.dt
    return assemble_stiffness_arrays(space, geom.C_at(tau), geom.J_at(tau), scale)


def assemble_mesh_motion_operator(space: FeSpace, flux, divflux) -> sparse.csr_matrix:
    """Mo_ij = sum_K [ int psi_i (flux . grad psi_j) + divflux int psi_i psi_j ]
    where flux is the per-element linear grid flux (corner values, (n_e,3,2))
    and divflux its constant divergence. Pass either the exact interval
    integral or the endpoint surrogate."""
    t = space.tables()
    flux = np.ascontiguousarray(flux, dtype=float)
    divflux = np.ascontiguousarray(divflux, dtype=float)
    locals_ = _kernels.motion_locals(t.dets, t.phi, t.gradhat, flux, t.lam, divflux, t.wq)
    return _to_csr(space, locals_)


def assemble_load(space: FeSpace, f, jac, scale: float = 1.0) -> np.ndarray:
    """b_i = scale * sum_K int psi_i f J, with f(x, y) sampled at quadrature
    points of a rule of degree >= degree + 4 (the benchmark forcings are
    quartic in space, so the data term adds no quadrature bias)."""
    t = space.tables(space.degree + 4)
    fq = np.ascontiguousarray(f(t.quad_xy[..., 0], t.quad_xy[..., 1]), dtype=float)
    jac = np.asarray(jac, dtype=float)
    if jac.ndim == 0:
        jac = np.full(t.dets.shape, float(jac))
    else:
        jac = np.ascontiguousarray(jac)
    locals_ = _kernels.load_locals(t.dets, jac, t.phi, fq, t.wq, float(scale))
    b = np.zeros(space.n_dofs)
    np.add.at(b, space.dof_map.ravel(), locals_.ravel())
    return b


def apply_dirichlet(A: sparse.csr_matrix, b: np.ndarray, dofs, values):
    """Symmetric elimination: move the constrained columns to the right-hand
    side, zero rows and columns, put 1 on the diagonal, pin the values."""
    n = b.shape[0]
    dofs = np.asarray(dofs, dtype=np.int64)
    vfull = np.zeros(n)
    vfull[dofs] = values
    b = b - A @ vfull
    keep = np.ones(n)
    keep[dofs] = 0.0
    D = sparse.diags(keep)
    E = sparse.diags(1.0 - keep)
    A2 = (D @ A @ D + E).tocsr()
    b[dofs] = vfull[dofs]
    return A2, b


def solve_sparse(A: sparse.csr_matrix, b: np.ndarray, rel_tol: float = 1e-10,
                 method: str = "auto") -> np.ndarray:
    """Direct sparse LU below DIRECT_SOLVE_LIMIT unknowns, preconditioned
    GMRES above. The residual is checked a posteriori on either path."""
    if method == "auto":
        method = "direct" if A.shape[0] <= DIRECT_SOLVE_LIMIT else "iterative"
    if method == "direct":
        x = splu(A.tocsc()).solve(b)
    elif method == "iterative":
        d = A.diagonal()
        d[d == 0.0] = 1.0
        M = sparse.diags(1.0 / d)
        try:
            x, info = gmres(A, b, M=M, rtol=0.1 * rel_tol, atol=0.0, restart=200)
        except TypeError:  # scipy < 1.12 spells the keyword tol
            x, info = gmres(A, b, M=M, tol=0.1 * rel_tol, atol=0.0, restart=200)
        if info != 0:
            raise RuntimeError(f"gmres did not converge (info={info})")
    else:
        raise ValueError(f"unknown method {method!r}")

    ref = max(float(np.linalg.norm(b)), 1e-300)
    res = float(np.linalg.norm(A @ x - b))
    if res > rel_tol * ref:
        raise RuntimeError(f"linear solve residual {res:.3e} exceeds {rel_tol:.1e} * {ref:.3e}")
    return x


# ---------------------------------------------------------------------------
# norms on the current (deformed) domain


def _values_at_quad(space: FeSpace, u: np.ndarray, t: _Tables) -> np.ndarray:
    return np.einsum("qi,ei->eq", t.phi, u[space.dof_map])


def l2_norm_current_domain(space: FeSpace, u: np.ndarray, jac) -> float:
    """L2 norm over the deformed domain via pullback: sqrt(int u^2 J)."""
    t = space.tables()
    uq = _values_at_quad(space, u, t)
    jac = np.broadcast_to(np.asarray(jac, dtype=float), t.dets.shape)
    return float(np.sqrt(np.einsum("e,q,eq->", jac * t.dets, t.wq, uq**2)))


def l2_error_vs_exact(space: FeSpace, u: np.ndarray, exact, jac) -> float:
    """L2 distance to a referent-coordinate exact field over the deformed
    domain, with a rule of degree >= 2*degree + 2."""
    t = space.tables(2 * space.degree + 2)
    uq = _values_at_quad(space, u, t)
    eq = exact(t.quad_xy[..., 0], t.quad_xy[..., 1])
    jac = np.broadcast_to(np.asarray(jac, dtype=float), t.dets.shape)
    return float(np.sqrt(np.einsum("e,q,eq->", jac * t.dets, t.wq, (uq - eq) ** 2)))
