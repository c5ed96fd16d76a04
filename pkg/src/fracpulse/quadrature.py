"""Quadrature grids on the normalized time interval (0, 1), barycentric
interpolation on their nodes, and graded rules for integrands with
algebraic endpoint singularities."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import roots_jacobi

SCHEMES = ("legendre", "jacobi", "trapezoid")


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes and weights on (0, 1).

    For ``scheme == "jacobi"`` the weights absorb the endpoint factor
    ``tau**p * (1 - tau)**q``: ``sum(w * f(nodes))`` approximates
    ``int tau^p (1-tau)^q f(tau) dtau``. :meth:`integrate` always returns
    the plain integral of pointwise samples.
    """

    nodes: np.ndarray
    weights: np.ndarray
    scheme: str
    p: float = 0.0
    q: float = 0.0

    @property
    def n(self) -> int:
        return len(self.nodes)

    def endpoint_factor(self, tau):
        tau = np.asarray(tau, dtype=float)
        return tau**self.p * (1.0 - tau) ** self.q

    @cached_property
    def plain_weights(self) -> np.ndarray:
        return self.weights / self.endpoint_factor(self.nodes)

    def integrate(self, values) -> float:
        """Plain integral over (0, 1) of a function given by its node samples."""
        return float(np.dot(self.plain_weights, values))

    def inner(self, f, g, exponents=None) -> float:
        """Inner product of two sampled functions; see :meth:`integrate_weighted`."""
        prod = np.asarray(f) * np.asarray(g)
        if exponents is None:
            return float(np.dot(self.plain_weights, prod))
        return self.integrate_weighted(prod, *exponents)

    def integrate_weighted(self, values, c: float, d: float) -> float:
        """Integral of ``tau^c (1-tau)^d h(tau)`` given samples of the whole product.

        ``h = values / (tau^c (1-tau)^d)`` is interpolated through the nodes and
        integrated against a Gauss-Jacobi rule for the endpoint factor, which
        keeps the accuracy spectral when the samples have that endpoint form.
        """
        x = self.nodes
        h = np.asarray(values, dtype=float) / (x**c * (1.0 - x) ** d)
        u, w = jacobi_reference(self.n + 8, float(c), float(d))
        return float(w @ (self.interp_matrix(u) @ h))

    @cached_property
    def barycentric_weights(self) -> np.ndarray:
        x = self.nodes
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        logmag = -np.sum(np.log(np.abs(diff)), axis=1)
        sign = np.prod(np.sign(diff), axis=1)
        return sign * np.exp(logmag - logmag.max())

    def interp_matrix(self, points, derivative: bool = False) -> np.ndarray:
        """Matrix mapping node values to values (or first derivatives) of the
        interpolating polynomial at ``points``."""
        return barycentric_matrix(self.nodes, self.barycentric_weights, points, derivative)

    @cached_property
    def diff_matrix(self) -> np.ndarray:
        """Spectral differentiation matrix on the nodes."""
        x, lam = self.nodes, self.barycentric_weights
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        d = (lam[None, :] / lam[:, None]) / diff
        np.fill_diagonal(d, 0.0)
        np.fill_diagonal(d, -d.sum(axis=1))
        return d


def barycentric_matrix(nodes, lam, points, derivative=False):
    points = np.atleast_1d(np.asarray(points, dtype=float))
    diff = points[:, None] - nodes[None, :]
    exact = diff == 0.0
    hit = exact.any(axis=1)
    diff = np.where(exact, 1.0, diff)
    c = lam[None, :] / diff
    s = c.sum(axis=1, keepdims=True)
    mat = c / s
    if derivative:
        c2 = lam[None, :] / diff**2
        s2 = c2.sum(axis=1, keepdims=True)
        mat = -c2 / s + mat * s2 / s
    if np.any(hit):
        # points falling on a node: perturb for the derivative, snap for values
        rows = np.nonzero(hit)[0]
        if derivative:
            shifted = points[rows] + 1e-9 * np.where(points[rows] < 0.5, 1.0, -1.0)
            mat[rows] = barycentric_matrix(nodes, lam, shifted, True)
        else:
            mat[rows] = exact[rows].astype(float)
    return mat


@lru_cache(maxsize=256)
def jacobi_reference(m: int, e_left: float, e_right: float):
    """``m``-point rule on [0, 1] for the weight ``u^e_left (1-u)^e_right``."""
    if e_left == 0.0 and e_right == 0.0:
        x, w = np.polynomial.legendre.leggauss(m)
    else:
        x, w = roots_jacobi(m, e_right, e_left)
    u = 0.5 * (x + 1.0)
    w = w / 2.0 ** (1.0 + e_left + e_right)
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def make_grid(scheme: str = "legendre", n: int = 64, p: float = 0.0, q: float = 0.0) -> QuadratureGrid:
    """Build a grid on (0, 1).

    ``trapezoid`` is the uniform rule on cell midpoints, so that all nodes stay
    strictly inside the interval.
    """
    if n < 2:
        raise ValueError("a grid needs at least two nodes")
    if scheme == "legendre":
        u, w = jacobi_reference(n, 0.0, 0.0)
        p = q = 0.0
    elif scheme == "jacobi":
        if p <= -1.0 or q <= -1.0:
            raise ValueError(f"Jacobi exponents must exceed -1, got p={p}, q={q}")
        u, w = jacobi_reference(n, float(p), float(q))
    elif scheme == "trapezoid":
        u = (np.arange(n) + 0.5) / n
        w = np.full(n, 1.0 / n)
        p = q = 0.0
    else:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    return QuadratureGrid(np.array(u), np.array(w), scheme, float(p), float(q))


def graded_rule(a, b, m=16, e_left=0.0, e_right=0.0, gap_left=np.inf, gap_right=np.inf, max_width=None):
    """Nodes and weights for ``int_a^b (s-a)^e_left (b-s)^e_right f(s) ds``.

    ``f`` may be nearly singular at distance ``gap_left`` before ``a`` or
    ``gap_right`` beyond ``b``; panels are refined geometrically toward that
    end so the smallest panel is comparable to the gap. The endpoint powers
    go into Gauss-Jacobi weights on the panels touching the endpoints and are
    evaluated explicitly elsewhere. ``max_width`` caps the panel width.
    """
    length = b - a
    if length <= 0:
        return np.empty(0), np.empty(0)
    mid = a + 0.5 * length
    edges_l = _graded_edges(a, mid, gap_left)
    edges_r = (b - _graded_edges(0.0, 0.5 * length, gap_right))[::-1]
    edges = np.concatenate((edges_l, edges_r[1:]))
    if max_width is not None and np.max(np.diff(edges)) > max_width:
        parts = [np.linspace(lo, hi, int(np.ceil((hi - lo) / max_width)) + 1)[:-1] for lo, hi in zip(edges[:-1], edges[1:])]
        edges = np.concatenate(parts + [edges[-1:]])
    pts, wts = [], []
    last = len(edges) - 2
    for i in range(len(edges) - 1):
        lo, hi = edges[i], edges[i + 1]
        el = e_left if i == 0 else 0.0
        er = e_right if i == last else 0.0
        u, w = jacobi_reference(m, el, er)
        h = hi - lo
        s = lo + h * u
        ww = w * h ** (1.0 + el + er)
        if i != 0 and e_left != 0.0:
            ww = ww * (s - a) ** e_left
        if i != last and e_right != 0.0:
            ww = ww * (b - s) ** e_right
        pts.append(s)
        wts.append(ww)
    return np.concatenate(pts), np.concatenate(wts)


def _graded_edges(a, b, gap, ratio=0.5):
    """Edges on [a, b] refined toward ``a`` down to a panel of size ~gap."""
    length = b - a
    if not np.isfinite(gap) or gap >= ratio * length:
        return np.array([a, b])
    gap = max(gap, 1e-15 * abs(a), 1e-300)
    k = int(np.ceil(np.log(length / gap) / np.log(1.0 / ratio)))
    widths = length * ratio ** np.arange(k, 0, -1)
    edges = np.concatenate(([a], a + widths, [b]))
    return edges
