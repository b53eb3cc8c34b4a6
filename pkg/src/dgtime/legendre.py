"""Legendre polynomials, shifted slab bases and Gauss-Legendre quadrature.

Everything temporal in the package is built on three primitives here:

* ``eval_legendre`` / ``legendre_table``: the three-term recurrence, with first
  and second derivatives carried along the same recurrence.
* ``gauss_rule``: Gauss-Legendre nodes and weights, found by Newton iteration
  on L_n started from Chebyshev-like guesses.
* ``SlabBasis``: the Legendre basis mapped affinely onto a slab (t0, t0 + k].
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_NEWTON_MAXITER = 100
_NEWTON_TOL = 1e-14


def eval_legendre(i: int, t):
    """Value of the degree-``i`` Legendre polynomial at ``t`` (scalar or array)."""
    if i < 0:
        raise ValueError(f"Legendre degree must be non-negative, got {i}")
    t = np.asarray(t, dtype=float)
    p_prev = np.ones_like(t)
    if i == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = t.copy()
    for n in range(1, i):
        p_prev, p = p, ((2 * n + 1) * t * p - n * p_prev) / (n + 1)
    return p if p.ndim else float(p)


def legendre_table(n: int, t, order: int = 0) -> np.ndarray:
    """Rows ``L_0 .. L_n`` (or their ``order``-th derivative) evaluated at ``t``.

    Returns an array of shape ``(n + 1, len(t))``. Derivatives use
    ``L'_{i+1} = L'_{i-1} + (2i+1) L_i`` and the same identity differentiated
    once more, so no division by ``1 - t^2`` is ever needed.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {order}")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    vals = np.zeros((3, n + 1, t.size))
    vals[0, 0] = 1.0
    if n >= 1:
        vals[0, 1] = t
        vals[1, 1] = 1.0
    for i in range(1, n):
        vals[0, i + 1] = ((2 * i + 1) * t * vals[0, i] - i * vals[0, i - 1]) / (i + 1)
        vals[1, i + 1] = vals[1, i - 1] + (2 * i + 1) * vals[0, i]
        vals[2, i + 1] = vals[2, i - 1] + (2 * i + 1) * vals[1, i]
    return vals[order]


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on (-1, 1)."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.nodes.size

    def mapped(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights transplanted onto (a, b)."""
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> QuadratureRule:
    """``n``-point Gauss-Legendre rule, exact for polynomials of degree ``2n - 1``."""
    if n < 1:
        raise ValueError(f"quadrature needs at least one point, got {n}")
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (4 * i - 1) / (4 * n + 2))
    for _ in range(_NEWTON_MAXITER):
        p = legendre_table(n, x)
        pn, pn1 = p[n], p[n - 1]
        dp = n * (x * pn - pn1) / (x * x - 1.0)
        dx = pn / dp
        x = x - dx
        if np.max(np.abs(dx)) <= _NEWTON_TOL:
            break
    else:
        raise RuntimeError(f"Newton iteration for the {n}-point Gauss rule did not converge")
    p = legendre_table(n, x)
    dp = n * (x * p[n] - p[n - 1]) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    # ascending nodes; symmetrise to kill the last ulp of drift
    order = np.argsort(x)
    x, w = x[order], w[order]
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(nodes=x, weights=w)


@dataclass(frozen=True)
class SlabBasis:
    """Shifted Legendre basis ``phi^1 .. phi^{q+1}`` on the slab ``(t_start, t_start + k]``.

    ``phi^j`` is ``L_{j-1}`` composed with the affine map sending the slab onto
    (-1, 1), so ``phi^j(t_start + k) = 1`` and ``phi^j(t_start) = (-1)^(j-1)``.
    """

    q: int
    t_start: float
    k: float

    def __post_init__(self):
        if self.q < 0:
            raise ValueError(f"temporal degree must be non-negative, got {self.q}")
        if not self.k > 0:
            raise ValueError(f"slab length must be positive, got {self.k}")

    @property
    def t_end(self) -> float:
        return self.t_start + self.k

    def to_reference(self, t):
        return 2.0 * (np.asarray(t, dtype=float) - self.t_start) / self.k - 1.0

    def table(self, t, order: int = 0) -> np.ndarray:
        """All basis functions (rows) or their derivatives at the points ``t``."""
        s = self.to_reference(t)
        tol = 1e-12
        if np.any(s < -1.0 - tol) or np.any(s > 1.0 + tol):
            raise ValueError("evaluation point lies outside the slab")
        return legendre_table(self.q, s, order) * (2.0 / self.k) ** order

    def start_values(self, order: int = 0) -> np.ndarray:
        """One-sided values at ``t_start^+``."""
        return self.table([self.t_start], order)[:, 0]

    def end_values(self, order: int = 0) -> np.ndarray:
        """One-sided values at ``t_end^-``."""
        return self.table([self.t_end], order)[:, 0]


def slab_basis_eval(basis: SlabBasis, j: int, t, order: int = 0):
    """``phi^j``, its first or its second derivative at ``t`` (``j`` is 1-based)."""
    if not 1 <= j <= basis.q + 1:
        raise IndexError(f"basis index {j} outside 1..{basis.q + 1}")
    vals = basis.table(np.atleast_1d(t), order)[j - 1]
    return float(vals[0]) if np.ndim(t) == 0 else vals
