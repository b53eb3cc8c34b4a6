"""Slab-by-slab solution of the DG-in-time system ``A z = b``.

The unknowns are the untransformed displacements ``U``; per slab
``U(t) = sum_j alpha^j phi^j(t)`` with one coefficient vector per shifted
Legendre mode. With ``W = gamma^2 M + K`` the slab operator is

    A = M (x) (M1 + M4) + 2 gamma M (x) M2 + W (x) (M3 + M5)

(rows ordered test-DOF-major, ``(m, l)``), and the right-hand side picks up
the previous slab's exit state through the ``t_{n-1}^+`` boundary terms.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterator, NamedTuple

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sp

from dgtime.fem import SemiDiscreteSystem, assemble_load, interpolate, ritz_project
from dgtime.legendre import SlabBasis, gauss_rule

log = logging.getLogger(__name__)

MIN_DEGREE = 2
RCOND_LIMIT = 1e-14
RESIDUAL_LIMIT = 1e-10


class SlabSolveError(np.linalg.LinAlgError):
    """Slab operator singular, too ill-conditioned, or residual check failed."""


@dataclass(frozen=True)
class TimeMesh:
    """Partition ``0 = t_0 < t_1 < ... < t_N = T`` with a temporal degree per slab."""

    nodes: np.ndarray
    degrees: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        degrees = np.asarray(self.degrees, dtype=int)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("time mesh needs at least one slab")
        if degrees.shape != (nodes.size - 1,):
            raise ValueError("need exactly one degree per slab")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("slab lengths must be positive")
        if np.any(degrees < MIN_DEGREE):
            raise ValueError(f"temporal degrees must be at least {MIN_DEGREE}")
        nodes.setflags(write=False)
        degrees.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "degrees", degrees)

    @classmethod
    def uniform(cls, T: float, k: float, q: int) -> "TimeMesh":
        n = int(round(T / k))
        if n < 1 or not np.isclose(n * k, T, rtol=1e-12, atol=0.0):
            raise ValueError(f"step {k} does not divide final time {T}")
        return cls(np.linspace(0.0, T, n + 1), np.full(n, q))

    @property
    def n_slabs(self) -> int:
        return self.degrees.size

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    def slab(self, n: int) -> SlabBasis:
        """Basis of slab ``n`` (0-based)."""
        t0, t1 = self.nodes[n], self.nodes[n + 1]
        return SlabBasis(int(self.degrees[n]), float(t0), float(t1 - t0))

    def __iter__(self) -> Iterator[SlabBasis]:
        return (self.slab(n) for n in range(self.n_slabs))


class TimeMatrices(NamedTuple):
    M1: np.ndarray
    M2: np.ndarray
    M3: np.ndarray
    M4: np.ndarray
    M5: np.ndarray


@lru_cache(maxsize=64)
def build_time_matrices(q: int, k: float) -> TimeMatrices:
    """``M1 .. M5`` for one slab; entry ``[l, j]`` pairs test ``l`` with trial ``j``."""
    if q < MIN_DEGREE:
        raise ValueError(f"temporal degree must be at least {MIN_DEGREE}, got {q}")
    basis = SlabBasis(q, 0.0, k)
    t, w = gauss_rule(q + 2).mapped(0.0, k)
    p0, p1, p2 = (basis.table(t, o) for o in range(3))
    mats = [
        (p1 * w) @ p2.T,
        (p1 * w) @ p1.T,
        (p1 * w) @ p0.T,
        np.outer(basis.start_values(1), basis.start_values(1)),
        np.outer(basis.start_values(0), basis.start_values(0)),
    ]
    for m in mats:
        m.setflags(write=False)
    return TimeMatrices(*mats)


@dataclass(frozen=True)
class TrajectoryState:
    """Displacement and velocity at ``t_n^-``; the exit state of the previous slab."""

    U_minus: np.ndarray
    V_minus: np.ndarray


@dataclass
class SlabSystem:
    basis: SlabBasis
    matrices: TimeMatrices
    A: np.ndarray
    b: np.ndarray

    @property
    def size(self) -> int:
        return self.b.size


@dataclass(frozen=True)
class SlabSolution:
    """Coefficients ``alpha[m, j-1]`` of ``U_m(t) = sum_j alpha_m^j phi^j(t)`` on one slab."""

    coeffs: np.ndarray
    basis: SlabBasis
    index: int = 0
    rcond: float = float("nan")

    def __call__(self, t, order: int = 0) -> np.ndarray:
        vals = self.coeffs @ self.basis.table(np.atleast_1d(t), order)
        return vals[:, 0] if np.ndim(t) == 0 else vals

    def start(self, order: int = 0) -> np.ndarray:
        return self.coeffs @ self.basis.start_values(order)

    def end(self, order: int = 0) -> np.ndarray:
        return self.coeffs @ self.basis.end_values(order)

    def exit_state(self) -> TrajectoryState:
        return TrajectoryState(self.end(0), self.end(1))


@dataclass
class Trajectory:
    """Slab solutions in time order."""

    mesh: TimeMesh
    slabs: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.slabs)

    def __len__(self):
        return len(self.slabs)

    def __getitem__(self, n):
        return self.slabs[n]

    @property
    def rconds(self) -> np.ndarray:
        return np.array([s.rcond for s in self.slabs])

    def final_state(self) -> TrajectoryState:
        return self.slabs[-1].exit_state()


def slab_operator(system: SemiDiscreteSystem, q: int, k: float,
                  mats: TimeMatrices | None = None) -> np.ndarray:
    mats = mats or build_time_matrices(q, k)
    M = system.dense_mass()
    W = system.displacement_weight("full")
    return (np.kron(M, mats.M1 + mats.M4)
            + np.kron(system.damping(), mats.M2)
            + np.kron(W, mats.M3 + mats.M5))


def assemble_slab(system: SemiDiscreteSystem, q: int, k: float, state: TrajectoryState,
                  forcing: Callable[[float], np.ndarray] | None, t_start: float = 0.0,
                  A: np.ndarray | None = None) -> SlabSystem:
    """Slab operator and right-hand side; ``forcing(t)`` returns the load vector F(t).

    The load integral uses ``q + 4`` Gauss points. A precomputed operator for
    the same ``(q, k)`` may be passed in as ``A``.
    """
    d = system.dof_count
    U, V = np.asarray(state.U_minus, float), np.asarray(state.V_minus, float)
    if U.shape != (d,) or V.shape != (d,):
        raise ValueError(f"state vectors must have length {d}, got {U.shape} and {V.shape}")
    basis = SlabBasis(q, t_start, k)
    mats = build_time_matrices(q, k)
    if A is None:
        A = slab_operator(system, q, k, mats)
    elif A.shape != (d * (q + 1),) * 2:
        raise ValueError("precomputed slab operator has the wrong shape")

    b = np.zeros((d, q + 1))
    if forcing is not None:
        t, w = gauss_rule(q + 4).mapped(t_start, t_start + k)
        loads = np.array([forcing(ti) for ti in t])  # (nq, d)
        b += np.einsum("qm,jq,q->mj", loads, basis.table(t, 1), w)
    b += np.outer(system.dense_mass() @ V, basis.start_values(1))
    b += np.outer(system.displacement_weight("full") @ U, basis.start_values(0))
    return SlabSystem(basis, mats, A, b.ravel())


def factorize(A: np.ndarray):
    """LU factors plus reciprocal 1-norm condition estimate."""
    with warnings.catch_warnings():
        # exact singularity is reported through the condition estimate instead
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=True)
    anorm = np.linalg.norm(A, 1)
    gecon = sla.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not np.isfinite(rcond):
        raise SlabSolveError("condition estimate failed")
    return (lu, piv), float(rcond)


def solve_slab(slab: SlabSystem, factors=None, index: int = 0) -> SlabSolution:
    """Dense LU solve with a condition guard and a backward residual check."""
    if factors is None:
        factors = factorize(slab.A)
    (lu, piv), rcond = factors
    if rcond < RCOND_LIMIT:
        raise SlabSolveError(f"slab operator is singular to working precision (rcond={rcond:.3e})")
    b = slab.b
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        z = np.zeros_like(b)
    else:
        z = sla.lu_solve((lu, piv), b)
        res = np.linalg.norm(slab.A @ z - b) / bnorm
        if not res <= RESIDUAL_LIMIT:
            raise SlabSolveError(f"slab residual {res:.3e} exceeds {RESIDUAL_LIMIT:g}")
    q = slab.basis.q
    return SlabSolution(z.reshape(-1, q + 1), slab.basis, index, rcond)


def initial_state(problem, system: SemiDiscreteSystem, mode: str = "nodal") -> TrajectoryState:
    """Discrete initial data: nodal interpolation or the Ritz projection."""
    if mode == "nodal":
        return TrajectoryState(interpolate(system, problem.u0), interpolate(system, problem.u1))
    if mode == "ritz":
        x = system.quad_points.T
        U0 = ritz_project(system, system.gradient_load(problem.grad_u(x, 0.0)))
        U1 = ritz_project(system, system.gradient_load(problem.grad_v(x, 0.0)))
        return TrajectoryState(U0, U1)
    raise ValueError(f"unknown initial data mode {mode!r}")


def advance(problem, system: SemiDiscreteSystem, mesh: TimeMesh, initial: str = "nodal",
            dump_dir=None, state: TrajectoryState | None = None,
            forcing: Callable[[float], np.ndarray] | None = None) -> Trajectory:
    """Sequential slab loop from ``t = 0`` to ``T``.

    The slab operator and its LU factors are reused while ``(q, k)`` repeats.
    ``state``/``forcing`` override the problem's initial data and load.
    """
    if state is None:
        state = initial_state(problem, system, initial)
    if forcing is None:
        forcing = lambda t: assemble_load(system, problem.f, t)  # noqa: E731
    dump_dir = Path(dump_dir) if dump_dir is not None else None
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)

    traj = Trajectory(mesh)
    cache_key, A, factors = None, None, None
    for n, basis in enumerate(mesh):
        key = (basis.q, round(basis.k, 15))
        if key != cache_key:
            A = slab_operator(system, basis.q, basis.k)
            factors = factorize(A)
            cache_key = key
        slab = assemble_slab(system, basis.q, basis.k, state, forcing, basis.t_start, A=A)
        if dump_dir is not None:
            scipy.io.mmwrite(str(dump_dir / f"A_{n:04d}.mtx"), sp.coo_matrix(slab.A))
            scipy.io.mmwrite(str(dump_dir / f"b_{n:04d}.mtx"), slab.b[:, None])
        sol = solve_slab(slab, factors, index=n)
        traj.slabs.append(sol)
        state = sol.exit_state()
    log.debug("advanced %d slabs, min rcond %.3e", len(traj), traj.rconds.min())
    return traj


def bilinear_form(system: SemiDiscreteSystem, u: Trajectory, v: Trajectory) -> float:
    """Global DG bilinear form ``A(u, v)`` summed over slabs, with jump terms.

    Every slab operator already carries the ``t_{n-1}^+`` terms, so only the
    coupling to the previous slab's ``t_{n-1}^-`` values is subtracted.
    """
    M = system.dense_mass()
    W = system.displacement_weight("full")
    total = 0.0
    for n, (su, sv) in enumerate(zip(u, v)):
        A = slab_operator(system, su.basis.q, su.basis.k)
        total += sv.coeffs.ravel() @ (A @ su.coeffs.ravel())
        if n > 0:
            prev = u[n - 1]
            total -= (M @ prev.end(1)) @ sv.start(1) + (W @ prev.end(0)) @ sv.start(0)
    return float(total)
