"""Manufactured test problems: damped 1D wave and 2D damped elastodynamics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from dgtime.fem import SemiDiscreteSystem, assemble_1d, assemble_2d_elasticity

PI = np.pi
OMEGA = np.sqrt(2.0) * PI  # temporal frequency of both manufactured solutions


@dataclass(frozen=True)
class ProblemSpec:
    """A manufactured solution together with the matching forcing and space builder.

    All callables take ``x`` of shape ``(dim, npts)`` and a scalar time;
    ``u``/``v``/``f`` return ``(ncomp, npts)``, ``grad_u``/``grad_v`` return
    ``(ncomp, dim, npts)``.
    """

    name: str
    dim: int
    ncomp: int
    T: float
    gamma: float
    u: Callable
    v: Callable
    grad_u: Callable
    grad_v: Callable
    f: Callable
    builder: Callable[..., SemiDiscreteSystem]
    energy_weighting: str = "full"

    def build(self, n: int, r: int) -> SemiDiscreteSystem:
        return self.builder(n, r, self.gamma)

    def u0(self, x):
        return self.u(x, 0.0)

    def u1(self, x):
        return self.v(x, 0.0)

    def forcing(self, t: float):
        return lambda x: self.f(x, t)


def wave1d(gamma: float = 1.0, T: float = 1.0) -> ProblemSpec:
    """``u'' + 2 gamma u' + gamma^2 u - u_xx = f`` with ``u = sin(sqrt2 pi t) sin(pi x)``."""

    def u(x, t):
        return np.sin(OMEGA * t) * np.sin(PI * np.atleast_2d(x))

    def v(x, t):
        return OMEGA * np.cos(OMEGA * t) * np.sin(PI * np.atleast_2d(x))

    def grad_u(x, t):
        return (np.sin(OMEGA * t) * PI * np.cos(PI * np.atleast_2d(x)))[:, None, :]

    def grad_v(x, t):
        return (OMEGA * np.cos(OMEGA * t) * PI * np.cos(PI * np.atleast_2d(x)))[:, None, :]

    def f(x, t):
        amp = (gamma ** 2 - PI ** 2) * np.sin(OMEGA * t) + 2 * np.sqrt(2.0) * gamma * PI * np.cos(OMEGA * t)
        return amp * np.sin(PI * np.atleast_2d(x))

    def builder(n, r, g):
        return assemble_1d(n, r, gamma=g)

    return ProblemSpec("wave1d", 1, 1, T, gamma, u, v, grad_u, grad_v, f, builder)


def _shape_2d(x):
    x1, x2 = x[0], x[1]
    return np.stack([-np.sin(PI * x1) ** 2 * np.sin(2 * PI * x2),
                     np.sin(2 * PI * x1) * np.sin(PI * x2) ** 2])


def _shape_2d_grad(x):
    x1, x2 = x[0], x[1]
    g = np.empty((2, 2) + np.shape(x1))
    g[0, 0] = -PI * np.sin(2 * PI * x1) * np.sin(2 * PI * x2)
    g[0, 1] = -2 * PI * np.sin(PI * x1) ** 2 * np.cos(2 * PI * x2)
    g[1, 0] = 2 * PI * np.cos(2 * PI * x1) * np.sin(PI * x2) ** 2
    g[1, 1] = PI * np.sin(2 * PI * x1) * np.sin(2 * PI * x2)
    return g


def elasto2d(gamma: float = 1.0, T: float = 1.0, lam: float = 1.0, mu: float = 1.0,
             rho: float = 1.0) -> ProblemSpec:
    """Damped isotropic elastodynamics on the unit square.

    The displacement field is a divergence-free profile times ``sin(sqrt2 pi t)``,
    so ``-div sigma = -mu Laplacian`` and the forcing below is exact for any
    Lame ``lam`` and ``gamma``. Note the often-quoted closed form with
    coefficients ``6 pi^2 + 0.01`` and ``0.2 sqrt2 pi`` corresponds to
    ``gamma = 0.1``, not to the ``gamma = 1`` used by default here.
    """

    def u(x, t):
        return np.sin(OMEGA * t) * _shape_2d(x)

    def v(x, t):
        return OMEGA * np.cos(OMEGA * t) * _shape_2d(x)

    def grad_u(x, t):
        return np.sin(OMEGA * t) * _shape_2d_grad(x)

    def grad_v(x, t):
        return OMEGA * np.cos(OMEGA * t) * _shape_2d_grad(x)

    def f(x, t):
        s, ds = np.sin(OMEGA * t), OMEGA * np.cos(OMEGA * t)
        w = _shape_2d(x)
        extra = np.stack([np.sin(2 * PI * x[1]), -np.sin(2 * PI * x[0])])
        amp = rho * (gamma ** 2 - OMEGA ** 2) + 8 * PI ** 2 * mu
        return (amp * s + 2 * rho * gamma * ds) * w + 2 * PI ** 2 * mu * s * extra

    def builder(n, r, g):
        return assemble_2d_elasticity(n, r, lam=lam, mu=mu, rho=rho, gamma=g)

    # reference errors for this problem are velocity-only energy norms
    return ProblemSpec("elasto2d", 2, 2, T, gamma, u, v, grad_u, grad_v, f, builder, "velocity")


PROBLEMS = {"wave1d": wave1d, "elasto2d": elasto2d}


def get_problem(name: str, **params) -> ProblemSpec:
    """Registry lookup; ``params`` override the problem defaults (``gamma``, ``T``, ...)."""
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    params = {k: v for k, v in params.items() if v is not None}
    return factory(**params)
