"""Energy-norm and endpoint errors, the a-priori stability bound, convergence rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from dgtime.fem import SemiDiscreteSystem, assemble_load, interpolate
from dgtime.legendre import gauss_rule
from dgtime.slab import TimeMesh, Trajectory, initial_state

BULK_EXTRA_POINTS = 6


@dataclass(frozen=True)
class EnergyErrorBreakdown:
    """Squared addends of the energy norm; ``total`` is their sum, ``norm`` its root.

    Velocity terms are mass weighted, displacement terms use ``W``; the bulk
    term carries the damping weight ``2 gamma M``.
    """

    velocity_initial: float
    velocity_jumps: float
    velocity_final: float
    velocity_bulk: float
    displacement_initial: float
    displacement_jumps: float
    displacement_final: float
    total: float = field(init=False)

    def __post_init__(self):
        total = 0.0
        for name in self.component_names():
            total += getattr(self, name)
        object.__setattr__(self, "total", total)

    @staticmethod
    def component_names() -> tuple[str, ...]:
        return tuple(f.name for f in fields(EnergyErrorBreakdown) if f.name != "total")

    @property
    def norm(self) -> float:
        return math.sqrt(self.total)

    def components(self) -> dict:
        return {n: getattr(self, n) for n in self.component_names()}


def _sq(v, A) -> float:
    return float(v @ (A @ v))


def _breakdown(system: SemiDiscreteSystem, traj: Trajectory,
               ref_u: Callable | None, ref_v: Callable | None,
               weighting: str = "full") -> EnergyErrorBreakdown:
    M = system.dense_mass()
    C = system.damping()
    d = system.dof_count
    if weighting == "velocity":
        W = np.zeros_like(M)
    else:
        W = system.displacement_weight(weighting)
    zero = lambda t: np.zeros(d)  # noqa: E731
    ref_u = ref_u or zero
    ref_v = ref_v or zero

    first, last = traj[0], traj[-1]
    t0, T = first.basis.t_start, last.basis.t_end
    v_init = 0.5 * _sq(ref_v(t0) - first.start(1), M)
    u_init = 0.5 * _sq(ref_u(t0) - first.start(0), W)
    v_final = 0.5 * _sq(ref_v(T) - last.end(1), M)
    u_final = 0.5 * _sq(ref_u(T) - last.end(0), W)

    # the reference is continuous in time, so [e]_n = -[U]_n
    v_jumps = u_jumps = 0.0
    for prev, cur in zip(traj.slabs[:-1], traj.slabs[1:]):
        v_jumps += 0.5 * _sq(cur.start(1) - prev.end(1), M)
        u_jumps += 0.5 * _sq(cur.start(0) - prev.end(0), W)

    bulk = 0.0
    for s in traj:
        t, w = gauss_rule(s.basis.q + BULK_EXTRA_POINTS).mapped(s.basis.t_start, s.basis.t_end)
        vel = s(t, 1)
        for i, ti in enumerate(t):
            bulk += w[i] * _sq(ref_v(ti) - vel[:, i], C)

    return EnergyErrorBreakdown(v_init, v_jumps, v_final, bulk, u_init, u_jumps, u_final)


def _check_mesh(traj: Trajectory, mesh: TimeMesh | None):
    if mesh is not None and len(traj) != mesh.n_slabs:
        raise ValueError(f"trajectory has {len(traj)} slabs, mesh has {mesh.n_slabs}")


def energy_error(trajectory: Trajectory, problem, system: SemiDiscreteSystem,
                 mesh: TimeMesh | None = None, weighting: str = "full") -> EnergyErrorBreakdown:
    """Energy norm of ``I_h u - U_DG``, with ``I_h`` the nodal interpolant.

    ``weighting="stiffness"`` drops the ``gamma^2 M`` part of the displacement
    weight, ``weighting="velocity"`` drops the displacement terms altogether.
    """
    _check_mesh(trajectory, mesh)
    ref_u = lambda t: interpolate(system, lambda x: problem.u(x, t))  # noqa: E731
    ref_v = lambda t: interpolate(system, lambda x: problem.v(x, t))  # noqa: E731
    return _breakdown(system, trajectory, ref_u, ref_v, weighting)


def energy_norm(trajectory: Trajectory, system: SemiDiscreteSystem,
                weighting: str = "full") -> EnergyErrorBreakdown:
    """Energy norm of a discrete trajectory itself (zero reference)."""
    return _breakdown(system, trajectory, None, None, weighting)


def l2_endpoint_error(trajectory: Trajectory, problem, system: SemiDiscreteSystem,
                      mesh: TimeMesh | None = None, discrete: bool = False) -> tuple[float, float]:
    """Velocity and displacement errors at ``t_N^-``.

    By default these are true L2 norms of ``u(T) - u_h`` over the domain,
    integrated elementwise. ``discrete=True`` instead returns mass-weighted
    norms of the nodal interpolant minus the DOF vector.
    """
    _check_mesh(trajectory, mesh)
    last = trajectory[-1]
    T = last.basis.t_end
    V, U = last.end(1), last.end(0)
    if discrete:
        M = system.dense_mass()
        ev = interpolate(system, lambda x: problem.v(x, T)) - V
        eu = interpolate(system, lambda x: problem.u(x, T)) - U
        return math.sqrt(max(_sq(ev, M), 0.0)), math.sqrt(max(_sq(eu, M), 0.0))
    return (system.l2_error(V, lambda x: problem.v(x, T)),
            system.l2_error(U, lambda x: problem.u(x, T)))


def stability_bound(problem, system: SemiDiscreteSystem, mesh: TimeMesh,
                    initial: str = "nodal") -> float:
    """Right-hand side of the a-priori bound on the energy norm of the DG solution.

    ``sqrt(int F' M^-1 F dt / (2 gamma) + 2 |U1|_M^2 + 2 |U0|_W^2)``, with the
    load integral taken on the same Gauss points the slab solver uses. For
    ``2 gamma >= 1`` this is no larger than the bound with the continuous
    ``||f||^2`` in the first slot.
    """
    if not system.gamma > 0:
        raise ValueError("the bound needs positive damping")
    M = system.dense_mass()
    W = system.displacement_weight("full")
    state = initial_state(problem, system, initial)
    chol = sla.cho_factor(M)
    load = 0.0
    for basis in mesh:
        t, w = gauss_rule(basis.q + 4).mapped(basis.t_start, basis.t_end)
        for ti, wi in zip(t, w):
            F = assemble_load(system, problem.f, ti)
            load += wi * float(F @ sla.cho_solve(chol, F))
    total = load / (2.0 * system.gamma) + 2.0 * _sq(state.V_minus, M) + 2.0 * _sq(state.U_minus, W)
    return math.sqrt(total)


@dataclass
class ReportRow:
    problem: str
    q: int
    r: int
    k: float
    h: float
    energy_error: float
    energy_rate: float | None = None
    l2_error: float = float("nan")
    l2_rate: float | None = None
    note: str = ""


def expected_rates(q: int, r: int) -> tuple[float, float]:
    """Asymptotic (energy, L2 endpoint) exponents when ``h = k``."""
    return q - 0.5, float(min(q + 1, r + 1))


def empirical_rate(e_coarse: float, e_fine: float, k_coarse: float, k_fine: float) -> float:
    return math.log(e_coarse / e_fine) / math.log(k_coarse / k_fine)


@dataclass
class ConvergenceReport:
    rows: list
    expected: dict = field(default_factory=dict)  # (q, r) -> (energy, l2)
    diagnostics: dict = field(default_factory=dict)  # (q, k) -> per-run extras

    def group(self, q: int) -> list:
        return [row for row in self.rows if row.q == q]

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def _safe_rate(e0, e1, k0, k1):
    if not (np.isfinite(e0) and np.isfinite(e1)) or e0 <= 0 or e1 <= 0:
        return None
    return empirical_rate(e0, e1, k0, k1)


def fill_rates(rows: Sequence[ReportRow]) -> list:
    """Rates between consecutive rows of each ``(problem, q, r)`` group, in place."""
    last = {}
    for row in rows:
        key = (row.problem, row.q, row.r)
        prev = last.get(key)
        if prev is None:
            row.energy_rate = row.l2_rate = None
        else:
            if not row.k < prev.k:
                raise ValueError(f"step sizes must decrease within a group, got {prev.k} then {row.k}")
            row.energy_rate = _safe_rate(prev.energy_error, row.energy_error, prev.k, row.k)
            row.l2_rate = _safe_rate(prev.l2_error, row.l2_error, prev.k, row.k)
        last[key] = row
    return list(rows)


def rates(rows: Sequence[ReportRow]) -> ConvergenceReport:
    """Successive log-ratio rates; the first level of each group has none."""
    rows = list(rows)
    if len(rows) < 2:
        raise ValueError("need at least two rows to form a rate")
    if len({row.k for row in rows}) < 2:
        raise ValueError("need at least two distinct step sizes")
    fill_rates(rows)
    expected = {(row.q, row.r): expected_rates(row.q, row.r) for row in rows}
    return ConvergenceReport(rows, expected)
