"""Boundary-value-preserving L2 projection and the integrated projector.

Functions enter as truncated Legendre series on an interval (a, b); the
truncation is treated as the exact function. Coefficients may be scalars or
vectors (one spatial DOF vector per Legendre mode), stored along axis 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dgtime.legendre import gauss_rule, legendre_table


def _as_coeffs(coeffs) -> np.ndarray:
    c = np.array(coeffs, dtype=float)
    if c.ndim == 0:
        c = c.reshape(1)
    c.setflags(write=False)
    return c


def _check_interval(interval) -> tuple[float, float]:
    a, b = (float(v) for v in interval)
    if not b > a:
        raise ValueError(f"interval must have positive length, got ({a}, {b})")
    return a, b


def derivative_coeffs(c: np.ndarray) -> np.ndarray:
    """Legendre coefficients of d/dxi of ``sum c_i L_i(xi)``.

    Uses ``(2i+1) L_i = L'_{i+1} - L'_{i-1}``, run backwards from the top mode.
    The result has one mode fewer (at least one).
    """
    c = np.asarray(c, dtype=float)
    m = c.shape[0] - 1
    d = np.zeros((max(m, 1),) + c.shape[1:])
    if m == 0:
        return d
    # d_{i-1} = (2i-1) * (c_i + d_{i+1} / (2i+3))
    for i in range(m, 0, -1):
        upper = d[i + 1] / (2 * i + 3) if i + 1 <= m - 1 else 0.0
        d[i - 1] = (2 * i - 1) * (c[i] + upper)
    return d


@dataclass(frozen=True)
class LegendreSeries:
    """``sum_i coeffs[i] * L~_i(t)`` with ``L~_i`` the Legendre polynomial mapped to ``interval``."""

    coeffs: np.ndarray
    interval: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _as_coeffs(self.coeffs))
        object.__setattr__(self, "interval", _check_interval(self.interval))

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    def to_reference(self, t):
        a, b = self.interval
        return 2.0 * (np.asarray(t, dtype=float) - a) / (b - a) - 1.0

    def __call__(self, t):
        s = np.atleast_1d(self.to_reference(t))
        vals = np.tensordot(legendre_table(self.degree, s).T, self.coeffs, axes=1)
        return vals[0] if np.ndim(t) == 0 else vals

    def left_value(self):
        signs = (-1.0) ** np.arange(self.degree + 1)
        return np.tensordot(signs, self.coeffs, axes=1)

    def right_value(self):
        return self.coeffs.sum(axis=0)

    def derivative(self) -> "LegendreSeries":
        """Exact time derivative, as a series on the same interval."""
        scale = 2.0 / self.length
        return LegendreSeries(derivative_coeffs(self.coeffs) * scale, self.interval)

    def padded(self, degree: int) -> np.ndarray:
        """Coefficients zero-padded (never truncated) up to ``degree``."""
        extra = degree - self.degree
        if extra <= 0:
            return np.array(self.coeffs)
        pad = np.zeros((extra,) + self.coeffs.shape[1:])
        return np.concatenate([self.coeffs, pad])


@dataclass(frozen=True)
class ProjectedPoly(LegendreSeries):
    """Output of a projector: a polynomial of degree exactly ``len(coeffs) - 1``."""


def legendre_series(fn, interval, m: int, npoints: int | None = None) -> LegendreSeries:
    """Truncated Legendre expansion of ``fn`` on ``interval`` up to degree ``m``.

    Coefficients come from Gauss quadrature of ``fn * L_i``; ``npoints``
    defaults to ``m + 20`` so smooth inputs are resolved to round-off.
    """
    a, b = _check_interval(interval)
    rule = gauss_rule(npoints or m + 20)
    t, _ = rule.mapped(a, b)
    vals = np.asarray(fn(t), dtype=float)
    table = legendre_table(m, rule.nodes) * rule.weights
    norm = (2.0 * np.arange(m + 1) + 1.0) / 2.0
    coeffs = np.tensordot(table, vals, axes=([1], [0]))
    coeffs = coeffs * norm.reshape((-1,) + (1,) * (coeffs.ndim - 1))
    return LegendreSeries(coeffs, (a, b))


def project_p(series: LegendreSeries, q: int) -> ProjectedPoly:
    """Boundary-value-preserving L2 projection onto polynomials of degree ``q``.

    Keeps modes ``0 .. q-1`` and collapses the whole tail into mode ``q``, which
    preserves the right endpoint value and leaves a defect orthogonal to
    degree ``q - 1``.
    """
    if q < 0:
        raise ValueError(f"projection degree must be non-negative, got {q}")
    c = series.padded(q)
    out = np.array(c[: q + 1])
    out[q] = c[q:].sum(axis=0)
    return ProjectedPoly(out, series.interval)


def project_pi(u_series: LegendreSeries, q: int) -> ProjectedPoly:
    """Integrated projector: ``u(a) + int_a^t P^{q-1} du/dt``, in closed form.

    ``b_i`` are the Legendre coefficients of du/dxi on the reference interval;
    affine maps leave them unchanged, so the result lives on ``u_series.interval``.
    """
    if q < 2:
        raise ValueError(f"integrated projector needs q >= 2, got {q}")
    u_left = u_series.left_value()
    b = derivative_coeffs(u_series.padded(q + 1))
    shape = (q + 1,) + b.shape[1:]
    u = np.zeros(shape)
    if q == 2:
        tail = b[1:].sum(axis=0)
        u[0] = u_left + b[0] - tail / 3
        u[1] = b[0]
        u[2] = tail / 3
    elif q == 3:
        tail = b[2:].sum(axis=0)
        u[0] = u_left + b[0] - b[1] / 3
        u[1] = b[0] - tail / 5
        u[2] = b[1] / 3
        u[3] = tail / 5
    else:
        tail = b[q - 1:].sum(axis=0)
        u[0] = u_left + b[0] - b[1] / 3
        u[1] = b[0] - b[2] / 5
        for i in range(2, q - 2):
            u[i] = b[i - 1] / (2 * i - 1) - b[i + 1] / (2 * i + 3)
        u[q - 2] = b[q - 3] / (2 * q - 5) - tail / (2 * q - 1)
        u[q - 1] = b[q - 2] / (2 * q - 3)
        u[q] = tail / (2 * q - 1)
    return ProjectedPoly(u, u_series.interval)


def rescale(poly: ProjectedPoly, target) -> ProjectedPoly:
    """Carry a projected polynomial to another interval; coefficients are unchanged."""
    return ProjectedPoly(poly.coeffs, _check_interval(target))
