"""Conforming Lagrange finite elements producing the semi-discrete system.

The spatial discretisation is expressed through sparse *quadrature-point
operators*: ``value_ops[c]`` maps the interior DOF vector to component ``c``
of the field at every quadrature point, ``grad_ops[c][d]`` to its derivative
along direction ``d``. Mass, stiffness, loads and L2 norms are all weighted
sums over those points.

Callables describing data take ``x`` of shape ``(dim, npts)`` and return an
array of shape ``(ncomp, npts)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from dgtime.legendre import gauss_rule

log = logging.getLogger(__name__)

MAX_DEGREE_1D = 5
SUPPORTED_DEGREES_2D = (1, 2)


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform mesh of the unit interval or the unit square.

    In 2D each grid square is cut by its lower-left to upper-right diagonal.
    ``nodes`` holds the Lagrange nodes of degree ``r`` (grid points of spacing
    ``h / r``), ``cells`` the element-to-node map in reference-element order.
    """

    dim: int
    n: int
    r: int
    nodes: np.ndarray
    cells: np.ndarray
    boundary: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]


def mesh_1d(n: int, r: int) -> SpatialMesh:
    npts = n * r + 1
    x = np.arange(npts) / (n * r)
    cells = np.arange(r + 1)[None, :] + r * np.arange(n)[:, None]
    boundary = np.zeros(npts, dtype=bool)
    boundary[[0, -1]] = True
    return SpatialMesh(1, n, r, x[:, None], cells, boundary)


def mesh_2d(n: int, r: int) -> SpatialMesh:
    side = n * r + 1
    ii, jj = np.meshgrid(np.arange(side), np.arange(side), indexing="xy")
    nodes = np.column_stack([ii.ravel(), jj.ravel()]) / (n * r)
    nid = lambda i, j: i + j * side  # noqa: E731

    cells = []
    for cj in range(n):
        for ci in range(n):
            i0, j0 = ci * r, cj * r
            ll, lr = (i0, j0), (i0 + r, j0)
            ur, ul = (i0 + r, j0 + r), (i0, j0 + r)
            for tri in ((ll, lr, ur), (ll, ur, ul)):
                verts = [nid(*v) for v in tri]
                if r == 2:
                    mids = []
                    for a, b in ((0, 1), (1, 2), (2, 0)):
                        pa, pb = tri[a], tri[b]
                        mids.append(nid((pa[0] + pb[0]) // 2, (pa[1] + pb[1]) // 2))
                    verts += mids
                cells.append(verts)
    cells = np.array(cells)
    boundary = (ii.ravel() == 0) | (jj.ravel() == 0) | (ii.ravel() == side - 1) | (jj.ravel() == side - 1)
    return SpatialMesh(2, n, r, nodes, cells, boundary)


def _lagrange_1d(r: int, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the equispaced degree-``r`` Lagrange basis on [0, 1]."""
    pts = np.linspace(0.0, 1.0, r + 1)
    val = np.ones((xi.size, r + 1))
    der = np.zeros((xi.size, r + 1))
    for a in range(r + 1):
        others = np.delete(pts, a)
        denom = np.prod(pts[a] - others)
        factors = xi[:, None] - others[None, :]
        val[:, a] = np.prod(factors, axis=1) / denom
        for c in range(r):
            der[:, a] += np.prod(np.delete(factors, c, axis=1), axis=1) / denom
    return val, der


def _triangle_basis(r: int, xi: np.ndarray, eta: np.ndarray):
    """P1/P2 basis on the reference triangle; returns values and (d/dxi, d/deta)."""
    l0, l1, l2 = 1.0 - xi - eta, xi, eta
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    lam = [l0, l1, l2]
    if r == 1:
        val = np.column_stack(lam)
        gx = np.tile(dl[:, 0], (xi.size, 1))
        gy = np.tile(dl[:, 1], (xi.size, 1))
        return val, gx, gy
    vals, gxs, gys = [], [], []
    for i in range(3):
        vals.append(lam[i] * (2 * lam[i] - 1))
        coef = 4 * lam[i] - 1
        gxs.append(coef * dl[i, 0])
        gys.append(coef * dl[i, 1])
    for i, j in ((0, 1), (1, 2), (2, 0)):
        vals.append(4 * lam[i] * lam[j])
        gxs.append(4 * (dl[i, 0] * lam[j] + lam[i] * dl[j, 0]))
        gys.append(4 * (dl[i, 1] * lam[j] + lam[i] * dl[j, 1]))
    return np.column_stack(vals), np.column_stack(gxs), np.column_stack(gys)


def _triangle_rule(npts: int):
    """Collapsed (Duffy) tensor Gauss rule on the reference triangle."""
    rule = gauss_rule(npts)
    u, wu = rule.mapped(0.0, 1.0)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    ww = np.outer(wu, wu) * (1.0 - vv)
    return (uu * (1.0 - vv)).ravel(), vv.ravel(), ww.ravel()


def _reference_data(mesh: SpatialMesh):
    """Quadrature points, weights, basis values and physical gradients for every element."""
    r = mesh.r
    if mesh.dim == 1:
        rule = gauss_rule(r + 2)
        xi, w = rule.mapped(0.0, 1.0)
        val, der = _lagrange_1d(r, xi)
        h = mesh.h
        x0 = mesh.nodes[mesh.cells[:, 0], 0]
        pts = (x0[:, None] + h * xi[None, :]).reshape(-1, 1)
        weights = np.tile(w * h, mesh.n_cells)
        values = np.broadcast_to(val, (mesh.n_cells,) + val.shape)
        grads = [np.broadcast_to(der / h, values.shape)]
        return pts, weights, values, grads

    xi, eta, w = _triangle_rule(r + 2)
    val, gxi, geta = _triangle_basis(r, xi, eta)
    v = mesh.nodes[mesh.cells[:, :3]]  # (ncell, 3, 2)
    e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    pts = v[:, 0, None, :] + xi[None, :, None] * e1[:, None, :] + eta[None, :, None] * e2[:, None, :]
    weights = (np.abs(det)[:, None] * w[None, :]).ravel()
    # inverse-transpose of J = [e1 e2]
    inv = np.empty((mesh.n_cells, 2, 2))
    inv[:, 0, 0], inv[:, 0, 1] = e2[:, 1] / det, -e2[:, 0] / det
    inv[:, 1, 0], inv[:, 1, 1] = -e1[:, 1] / det, e1[:, 0] / det
    # grad_x = J^{-T} grad_xi ;  J^{-1} rows are inv[:, 0], inv[:, 1]
    gx = inv[:, 0, 0, None, None] * gxi + inv[:, 1, 0, None, None] * geta
    gy = inv[:, 0, 1, None, None] * gxi + inv[:, 1, 1, None, None] * geta
    values = np.broadcast_to(val, (mesh.n_cells,) + val.shape)
    return pts.reshape(-1, 2), weights, values, [gx, gy]


def _point_operator(mesh: SpatialMesh, local: np.ndarray) -> sp.csr_matrix:
    """Sparse (n_qp x n_nodes) operator from per-element local tables (ncell, nq, nloc)."""
    ncell, nq, nloc = local.shape
    rows = np.repeat(np.arange(ncell * nq), nloc)
    cols = np.repeat(mesh.cells[:, None, :], nq, axis=1).ravel()
    return sp.csr_matrix((np.ascontiguousarray(local).ravel(), (rows, cols)),
                         shape=(ncell * nq, mesh.n_nodes))


@dataclass
class SemiDiscreteSystem:
    """``M u'' + 2 gamma M u' + (gamma^2 M + K) u = F`` on the interior DOFs.

    Only ``gamma`` is stored for damping and reaction; ``damping`` and
    ``reaction`` are formed on demand. Interior DOFs are component-blocked:
    full DOF ``c * n_nodes + node``.
    """

    mesh: SpatialMesh
    kind: str
    ncomp: int
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    gamma: float
    rho: float
    interior: np.ndarray
    dof_node: np.ndarray
    dof_comp: np.ndarray
    quad_points: np.ndarray
    quad_weights: np.ndarray
    value_ops: list
    grad_ops: list
    lam: float = 0.0
    mu: float = 1.0
    _dense: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dof_count(self) -> int:
        return self.interior.size

    @property
    def r(self) -> int:
        return self.mesh.r

    @property
    def h(self) -> float:
        return self.mesh.h

    @property
    def dof_coords(self) -> np.ndarray:
        return self.mesh.nodes[self.dof_node]

    def _cached(self, key, build):
        if key not in self._dense:
            self._dense[key] = build()
        return self._dense[key]

    def dense_mass(self) -> np.ndarray:
        return self._cached("M", lambda: self.mass.toarray())

    def dense_stiffness(self) -> np.ndarray:
        return self._cached("K", lambda: self.stiffness.toarray())

    def damping(self) -> np.ndarray:
        return 2.0 * self.gamma * self.dense_mass()

    def displacement_weight(self, mode: str = "full") -> np.ndarray:
        """``gamma^2 M + K`` (``mode="full"``) or ``K`` alone (``mode="stiffness"``)."""
        if mode == "full":
            return self._cached("W", lambda: self.gamma ** 2 * self.dense_mass() + self.dense_stiffness())
        if mode == "stiffness":
            return self.dense_stiffness()
        raise ValueError(f"unknown displacement weighting {mode!r}")

    def field_values(self, dofs: np.ndarray) -> np.ndarray:
        """Field components at the quadrature points, shape ``(ncomp, n_qp)``."""
        return np.stack([op @ dofs for op in self.value_ops])

    def l2_error(self, dofs: np.ndarray, fn) -> float:
        """``|| fn - u_h ||_{L2}`` with ``u_h`` the FE function of ``dofs``."""
        exact = np.reshape(fn(self.quad_points.T), (self.ncomp, -1))
        diff = exact - self.field_values(dofs)
        return math.sqrt(float(np.sum(self.quad_weights * diff * diff)))

    def gradient_load(self, grad: np.ndarray) -> np.ndarray:
        """``a(u, psi_i)`` for every basis function, given grad u at the quadrature points.

        ``grad`` has shape ``(ncomp, dim, n_qp)``. In 1D ``a`` is the Dirichlet
        form; in 2D it is the isotropic elastic form ``int sigma(u) : eps(psi)``.
        """
        w = self.quad_weights
        g = np.reshape(grad, (self.ncomp, self.mesh.dim, -1))
        if self.kind == "wave1d":
            return self.grad_ops[0][0].T @ (w * g[0, 0])
        eps11, eps22 = g[0, 0], g[1, 1]
        eps12 = 0.5 * (g[0, 1] + g[1, 0])
        div = eps11 + eps22
        s11 = 2 * self.mu * eps11 + self.lam * div
        s22 = 2 * self.mu * eps22 + self.lam * div
        s12 = 2 * self.mu * eps12
        (gx0, gy0), (gx1, gy1) = self.grad_ops
        return (gx0.T @ (w * s11) + gy1.T @ (w * s22)
                + gy0.T @ (w * s12) + gx1.T @ (w * s12))


def _build_system(mesh: SpatialMesh, kind: str, ncomp: int, gamma: float, rho: float,
                  lam: float = 0.0, mu: float = 1.0) -> SemiDiscreteSystem:
    pts, weights, values, grads = _reference_data(mesh)
    B = _point_operator(mesh, values)
    G = [_point_operator(mesh, g) for g in grads]
    nn = mesh.n_nodes

    interior_nodes = np.flatnonzero(~mesh.boundary)
    interior = np.concatenate([c * nn + interior_nodes for c in range(ncomp)])
    dof_node = np.tile(interior_nodes, ncomp)
    dof_comp = np.repeat(np.arange(ncomp), interior_nodes.size)

    def restrict(op, comp):
        # embed a scalar node operator as component `comp` of the interior DOF vector
        block = op[:, interior_nodes]
        empty = sp.csr_matrix(block.shape)
        return sp.hstack([block if c == comp else empty for c in range(ncomp)], format="csr")

    value_ops = [restrict(B, c) for c in range(ncomp)]
    grad_ops = [[restrict(g, c) for g in G] for c in range(ncomp)]
    W = sp.diags(weights)

    mass = sum(rho * (V.T @ W @ V) for V in value_ops)
    if kind == "wave1d":
        gx = grad_ops[0][0]
        stiffness = gx.T @ W @ gx
    else:
        (gx0, gy0), (gx1, gy1) = grad_ops
        e11, e22 = gx0, gy1
        e12 = 0.5 * (gy0 + gx1)
        div = e11 + e22
        stiffness = (2 * mu * (e11.T @ W @ e11 + e22.T @ W @ e22 + 2 * (e12.T @ W @ e12))
                     + lam * (div.T @ W @ div))
    mass = sp.csr_matrix(0.5 * (mass + mass.T))
    stiffness = sp.csr_matrix(0.5 * (stiffness + stiffness.T))
    return SemiDiscreteSystem(
        mesh=mesh, kind=kind, ncomp=ncomp, mass=mass, stiffness=stiffness,
        gamma=float(gamma), rho=float(rho), interior=interior, dof_node=dof_node,
        dof_comp=dof_comp, quad_points=pts, quad_weights=weights,
        value_ops=value_ops, grad_ops=grad_ops, lam=float(lam), mu=float(mu),
    )


def assemble_1d(n_cells: int, r: int, gamma: float = 1.0) -> SemiDiscreteSystem:
    """Degree-``r`` Lagrange elements on a uniform mesh of (0, 1), Dirichlet DOFs removed."""
    if n_cells < 2:
        raise ValueError(f"need at least two cells, got {n_cells}")
    if not 1 <= r <= MAX_DEGREE_1D:
        raise ValueError(f"1D element degree must lie in 1..{MAX_DEGREE_1D}, got {r}")
    return _build_system(mesh_1d(n_cells, r), "wave1d", 1, gamma, 1.0)


def assemble_2d_elasticity(n: int, r: int, lam: float = 1.0, mu: float = 1.0,
                           rho: float = 1.0, gamma: float = 0.0,
                           dirichlet: bool = True) -> SemiDiscreteSystem:
    """Vector P1/P2 elements for isotropic linear elasticity on the unit square.

    ``dirichlet=False`` keeps the boundary DOFs (used for kernel and mass checks).
    """
    if n < 2:
        raise ValueError(f"grid size must be at least 2, got {n}")
    if r not in SUPPORTED_DEGREES_2D:
        raise ValueError(f"2D element degree must be one of {SUPPORTED_DEGREES_2D}, got {r}")
    mesh = mesh_2d(n, r)
    if not dirichlet:
        mesh = SpatialMesh(mesh.dim, mesh.n, mesh.r, mesh.nodes, mesh.cells,
                           np.zeros_like(mesh.boundary))
    return _build_system(mesh, "elasto2d", 2, gamma, rho, lam, mu)


def interpolate(system: SemiDiscreteSystem, fn) -> np.ndarray:
    """Nodal interpolant of ``fn`` restricted to the interior DOFs."""
    coords = system.dof_coords.T
    vals = np.reshape(np.asarray(fn(coords), dtype=float), (system.ncomp, -1))
    return vals[system.dof_comp, np.arange(system.dof_count)]


def assemble_load(system: SemiDiscreteSystem, f, t: float) -> np.ndarray:
    """``F_i(t) = int f(x, t) psi_i(x) dx`` by element quadrature."""
    vals = np.reshape(np.asarray(f(system.quad_points.T, t), dtype=float), (system.ncomp, -1))
    w = system.quad_weights
    return sum(op.T @ (w * vals[c]) for c, op in enumerate(system.value_ops))


def ritz_project(system: SemiDiscreteSystem, load: np.ndarray) -> np.ndarray:
    """Solve ``K x = load``; ``load`` is the precomputed ``a(u, psi_i)`` vector."""
    load = np.asarray(load, dtype=float)
    if not np.any(load):
        return np.zeros(system.dof_count)
    try:
        lu = spla.splu(system.stiffness.tocsc())
    except RuntimeError as exc:
        raise np.linalg.LinAlgError("stiffness matrix is singular") from exc
    x = lu.solve(load)
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("stiffness matrix is singular")
    return x


def dump_system(system: SemiDiscreteSystem, directory) -> list[Path]:
    """Write mass and stiffness in MatrixMarket coordinate format."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name, mat in (("mass", system.mass), ("stiffness", system.stiffness)):
        path = directory / f"{name}.mtx"
        scipy.io.mmwrite(str(path), sp.coo_matrix(mat))
        out.append(path)
    log.info("wrote %s", ", ".join(str(p) for p in out))
    return out
