import math
from dataclasses import replace

import numpy as np
import pytest

from dgtime.errors import (
    EnergyErrorBreakdown,
    ReportRow,
    empirical_rate,
    energy_error,
    energy_norm,
    expected_rates,
    l2_endpoint_error,
    rates,
    stability_bound,
)
from dgtime.legendre import SlabBasis
from dgtime.problems import get_problem, wave1d
from dgtime.slab import SlabSolution, TimeMesh, Trajectory, advance


def solve(problem, q, r, k):
    n = int(round(1 / k))
    system = problem.build(n, r)
    mesh = TimeMesh.uniform(problem.T, k, q)
    return advance(problem, system, mesh), system, mesh


class FromTrajectory:
    """Problem stand-in whose "exact" solution is a one-slab DG trajectory."""

    def __init__(self, sol, system):
        self.sol, self.system = sol, system

    def _lookup(self, x, vals):
        # interpolate() hands over the DOF coordinates in DOF order
        assert x.shape[1] == self.system.dof_count
        return vals[None, :]

    def u(self, x, t):
        return self._lookup(x, self.sol(t))

    def v(self, x, t):
        return self._lookup(x, self.sol(t, 1))


def test_breakdown_sums_components():
    b = EnergyErrorBreakdown(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0)
    assert b.total == 28.0
    assert b.norm == pytest.approx(math.sqrt(28.0))
    assert list(b.components()) == list(EnergyErrorBreakdown.component_names())
    assert len(b.components()) == 7


def test_exact_equals_dg_gives_zero():
    p = wave1d()
    system = p.build(4, 2)
    mesh = TimeMesh.uniform(0.25, 0.25, 3)
    traj = advance(p, system, mesh)
    fake = FromTrajectory(traj[0], system)
    assert energy_error(traj, fake, system, mesh).total == pytest.approx(0.0, abs=1e-24)
    assert l2_endpoint_error(traj, fake, system, mesh, discrete=True) == (0.0, 0.0)


def test_time_constant_error():
    system = wave1d().build(5, 1)
    rng = np.random.default_rng(0)
    c = rng.standard_normal(system.dof_count)
    coeffs = np.zeros((system.dof_count, 3))
    coeffs[:, 0] = c
    mesh = TimeMesh([0.0, 0.5], [2])
    traj = Trajectory(mesh, [SlabSolution(coeffs, SlabBasis(2, 0.0, 0.5))])
    b = energy_norm(traj, system)
    W = system.displacement_weight()
    assert b.total == pytest.approx(c @ W @ c, rel=1e-13)
    assert b.displacement_initial == pytest.approx(b.displacement_final, rel=1e-13)
    assert b.velocity_bulk == 0.0


def test_norm_homogeneity_and_nonnegativity():
    system = wave1d().build(6, 2)
    mesh = TimeMesh([0.0, 0.2, 0.5, 1.0], [2, 3, 2])
    rng = np.random.default_rng(5)
    slabs = [SlabSolution(rng.standard_normal((system.dof_count, b.q + 1)), b, n)
             for n, b in enumerate(mesh)]
    traj = Trajectory(mesh, slabs)
    base = energy_norm(traj, system)
    assert all(v >= 0 for v in base.components().values())
    for alpha in (-3.0, 0.5, 7.0):
        scaled = Trajectory(mesh, [replace(s, coeffs=alpha * s.coeffs) for s in slabs])
        assert energy_norm(scaled, system).total == pytest.approx(alpha ** 2 * base.total, rel=1e-12)
    zero = Trajectory(mesh, [replace(s, coeffs=0 * s.coeffs) for s in slabs])
    assert energy_norm(zero, system).total == 0.0


def test_weightings():
    p = wave1d()
    traj, system, mesh = solve(p, 2, 1, 0.25)
    full = energy_error(traj, p, system, mesh, weighting="full")
    stiff = energy_error(traj, p, system, mesh, weighting="stiffness")
    vel = energy_error(traj, p, system, mesh, weighting="velocity")
    assert vel.displacement_final == 0.0
    assert vel.total < stiff.total < full.total
    assert vel.velocity_bulk == full.velocity_bulk
    with pytest.raises(ValueError):
        energy_error(traj, p, system, mesh, weighting="other")


def test_mesh_mismatch():
    p = wave1d()
    traj, system, _ = solve(p, 2, 1, 0.5)
    with pytest.raises(ValueError):
        energy_error(traj, p, system, TimeMesh.uniform(1.0, 0.25, 2))


def test_reference_energy_value():
    p = wave1d()
    traj, system, mesh = solve(p, 3, 2, 0.125)
    assert energy_error(traj, p, system, mesh).norm == pytest.approx(1.2170e-2, rel=0.05)


def test_reference_l2_values():
    p = wave1d()
    traj, system, mesh = solve(p, 2, 1, 0.5)
    assert l2_endpoint_error(traj, p, system, mesh)[0] == pytest.approx(5.6323e-1, rel=0.05)
    p2 = get_problem("elasto2d")
    traj, system, mesh = solve(p2, 2, 2, 0.25)
    vel, disp = l2_endpoint_error(traj, p2, system, mesh)
    assert vel + disp == pytest.approx(9.5802e-2, rel=0.05)


def test_discrete_l2_is_mass_weighted_nodal():
    p = wave1d()
    traj, system, mesh = solve(p, 2, 1, 0.25)
    vel, disp = l2_endpoint_error(traj, p, system, mesh, discrete=True)
    from dgtime.fem import interpolate
    e = interpolate(system, lambda x: p.v(x, 1.0)) - traj[-1].end(1)
    assert vel == pytest.approx(math.sqrt(e @ system.dense_mass() @ e), rel=1e-14)


def test_rates_examples():
    rows = [ReportRow("x", 2, 1, 0.2, 0.2, 0.4, l2_error=0.4),
            ReportRow("x", 2, 1, 0.1, 0.1, 0.1, l2_error=0.4)]
    report = rates(rows)
    assert report.rows[0].energy_rate is None
    assert report.rows[1].energy_rate == pytest.approx(2.0)
    assert report.rows[1].l2_rate == pytest.approx(0.0)
    assert empirical_rate(1.6504, 0.65087, 0.5, 0.25) == pytest.approx(1.3424, abs=5e-5)
    assert report.expected[(2, 1)] == (1.5, 2.0)


def test_rates_preconditions():
    with pytest.raises(ValueError):
        rates([ReportRow("x", 2, 1, 0.2, 0.2, 0.4)])
    with pytest.raises(ValueError):
        rates([ReportRow("x", 2, 1, 0.1, 0.1, 0.4), ReportRow("x", 2, 1, 0.2, 0.2, 0.1)])
    # separate degree groups each start afresh
    rows = [ReportRow("x", 2, 1, 0.2, 0.2, 0.4), ReportRow("x", 2, 1, 0.1, 0.1, 0.1),
            ReportRow("x", 3, 2, 0.2, 0.2, 0.4), ReportRow("x", 3, 2, 0.1, 0.1, 0.05)]
    report = rates(rows)
    assert report.rows[2].energy_rate is None
    assert report.rows[3].energy_rate == pytest.approx(3.0)


def test_expected_rates():
    assert expected_rates(3, 2) == (2.5, 3.0)
    assert expected_rates(2, 2) == (1.5, 3.0)
    assert expected_rates(4, 1) == (3.5, 2.0)


@pytest.mark.parametrize("q,k", [(2, 0.5), (3, 0.25), (4, 0.125)])
def test_stability_bound_holds(q, k):
    p = wave1d()
    traj, system, mesh = solve(p, q, q - 1, k)
    assert energy_norm(traj, system).norm <= stability_bound(p, system, mesh)


def test_stability_bound_needs_damping():
    p = wave1d(gamma=0.0)
    system = p.build(4, 1)
    with pytest.raises(ValueError):
        stability_bound(p, system, TimeMesh.uniform(1.0, 0.5, 2))
