"""Fractional integral and derivative operators discretized on a quadrature grid.

Every operator acts on node samples of an operand modelled as

.. math::

    f(s) = s^c (1 - s)^d g(s),

with ``g`` smooth and the endpoint exponents ``(c, d)`` declared when the
operator is built (``operand=(c, d)``, default ``(0, 0)``). Rows are
assembled by product integration: the kernel singularity and the operand
endpoint powers are carried by Gauss-Jacobi weights on geometrically graded
panels, and ``g`` is replaced by its barycentric interpolant through the grid
nodes. Operands whose endpoint behaviour matches the declared exponents are
therefore integrated to spectral accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .quadrature import QuadratureGrid, graded_rule, jacobi_reference


class Side(Enum):
    LEFT = "left"
    RIGHT = "right"


def _side(side) -> Side:
    return side if isinstance(side, Side) else Side(str(side).lower())


@dataclass(frozen=True, eq=False)
class GridOperator:
    """Dense matrix acting on samples over a :class:`QuadratureGrid`.

    Attributes
    ----------
    matrix
        ``(N, N)`` array; ``matrix @ f`` maps operand samples to result samples.
    grid
        The grid whose nodes index rows and columns.
    kind
        Operator label, e.g. ``"RL-left-integral"`` or ``"composite"``.
    order
        Fractional order, ``None`` for multipliers and composites.
    operand
        Endpoint exponents ``(c, d)`` assumed for the operand.
    result
        Endpoint exponents of the output when it has that clean form, else ``None``.
    """

    matrix: np.ndarray
    grid: QuadratureGrid
    kind: str
    order: float | None = None
    operand: tuple[float, float] = (0.0, 0.0)
    result: tuple[float, float] | None = None

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def apply(self, values) -> np.ndarray:
        return self.matrix @ np.asarray(values, dtype=float)

    __call__ = apply

    def __matmul__(self, other):
        if isinstance(other, GridOperator):
            if other.grid is not self.grid:
                raise ValueError("operators live on different grids")
            return GridOperator(self.matrix @ other.matrix, self.grid, "composite", None, other.operand)
        return self.apply(other)

    def __add__(self, other: GridOperator) -> GridOperator:
        return GridOperator(self.matrix + other.matrix, self.grid, "composite", None, self.operand)

    def scaled(self, factor: float) -> GridOperator:
        return replace(self, matrix=factor * self.matrix)

    def gram(self, exponents=None) -> np.ndarray:
        """Symmetric PSD matrix of the bilinear form ``<A f, A g>``.

        With ``exponents=(c, d)`` the outputs are taken to be
        ``tau^c (1-tau)^d`` times a smooth factor; the smooth factors are
        interpolated and the product integrated with a Gauss-Jacobi rule for
        ``tau^(2c) (1-tau)^(2d)``. Without it the grid weights are used.
        """
        a = self.matrix
        if exponents is None:
            b, w = a, self.grid.plain_weights
        else:
            c, d = exponents
            x = self.grid.nodes
            u, w = jacobi_reference(self.n + 8, 2.0 * c, 2.0 * d)
            b = self.grid.interp_matrix(u) @ (a / (x**c * (1.0 - x) ** d)[:, None])
        g = b.T @ (w[:, None] * b)
        return 0.5 * (g + g.T)

    def grid_adjoint(self) -> GridOperator:
        """Adjoint with respect to the grid inner product ``<f, g> = sum w f g``."""
        w = self.grid.plain_weights
        return GridOperator((self.matrix.T * w[None, :]) / w[:, None], self.grid, "composite")


def _check_order(beta, lo, hi, name, lo_open=True, hi_open=False):
    bad = (beta <= lo if lo_open else beta < lo) or (beta >= hi if hi_open else beta > hi)
    if bad or not np.isfinite(beta):
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise ValueError(f"{name} order must lie in {lb}{lo}, {hi}{rb}, got {beta}")


def _panel_points(n: int) -> int:
    # interpolants of degree n-1 need about n/2 Gauss points on an unrefined panel
    return max(16, n // 2 + 8)


def _operand_factor(s, c, d):
    return s**c * (1.0 - s) ** d


def _assemble(grid: QuadratureGrid, rows, operand) -> np.ndarray:
    """Build a matrix from per-row ``(s, w_value, w_deriv)`` rules acting on ``g``."""
    c, d = operand
    x = grid.nodes
    mat = np.empty((grid.n, grid.n))
    for i, (s, w0, w1) in enumerate(rows):
        row = w0 @ grid.interp_matrix(s)
        if w1 is not None:
            row = row + w1 @ grid.interp_matrix(s, derivative=True)
        mat[i] = row
    return mat / _operand_factor(x, c, d)[None, :]


def _left_rule(grid, x, m, kernel_exp, operand):
    c, d = operand
    gap = (1.0 - x) if d != 0.0 else np.inf
    return graded_rule(0.0, x, m, e_left=c, e_right=kernel_exp, gap_right=gap)


def _right_rule(grid, x, m, kernel_exp, operand):
    c, d = operand
    gap = x if c != 0.0 else np.inf
    return graded_rule(x, 1.0, m, e_left=kernel_exp, e_right=d, gap_left=gap)


def rl_integral(beta: float, side="left", grid: QuadratureGrid | None = None, operand=(0.0, 0.0)) -> GridOperator:
    """Riemann-Liouville fractional integral of order ``beta`` in (0, 2].

    Left: ``(1/Gamma(beta)) int_0^x (x-s)^(beta-1) f(s) ds``;
    right: ``(1/Gamma(beta)) int_x^1 (s-x)^(beta-1) f(s) ds``.
    """
    _check_order(beta, 0.0, 2.0, "RL integral")
    side = _side(side)
    c, d = (float(v) for v in operand)
    m = _panel_points(grid.n)
    gam = math.gamma(beta)
    rows = []
    for x in grid.nodes:
        if side is Side.LEFT:
            s, w = _left_rule(grid, x, m, beta - 1.0, (c, d))
            w = w * (1.0 - s) ** d
        else:
            s, w = _right_rule(grid, x, m, beta - 1.0, (c, d))
            w = w * s**c
        rows.append((s, w / gam, None))
    mat = _assemble(grid, rows, (c, d))
    if side is Side.LEFT:
        result = (c + beta, 0.0) if d == 0.0 else None
    else:
        result = (0.0, d + beta) if c == 0.0 else None
    return GridOperator(mat, grid, f"RL-{side.value}-integral", float(beta), (c, d), result)


def rl_derivative(beta: float, side="left", grid: QuadratureGrid | None = None, operand=(0.0, 0.0)) -> GridOperator:
    """Riemann-Liouville fractional derivative of order ``beta`` in (0, 1).

    The derivative of ``I^(1-beta) f`` is taken under the integral sign
    after scaling ``s -> x s``, which turns it into a weakly singular
    integral of ``f`` and ``f'`` that is product-integrated like the
    fractional integral itself.
    """
    _check_order(beta, 0.0, 1.0, "RL derivative", hi_open=True)
    side = _side(side)
    c, d = (float(v) for v in operand)
    m = _panel_points(grid.n)
    g1 = math.gamma(1.0 - beta)
    rows = []
    for x in grid.nodes:
        if side is Side.LEFT:
            # q(s) = (1-s)^d g(s); integrand s^c [(1-beta+c) q + s q']
            s, w = _left_rule(grid, x, m, -beta, (c, d))
            one_s = 1.0 - s
            q = one_s**d
            dq = -d * one_s ** (d - 1.0) if d != 0.0 else 0.0
            w0 = w * ((1.0 - beta + c) * q + s * dq)
            w1 = w * s * q
            scale = 1.0 / (x * g1)
        else:
            # p(s) = s^c g(s); integrand (1-s)^d [(1-beta+d) p - (1-s) p']
            s, w = _right_rule(grid, x, m, -beta, (c, d))
            p = s**c
            dp = c * s ** (c - 1.0) if c != 0.0 else 0.0
            w0 = w * ((1.0 - beta + d) * p - (1.0 - s) * dp)
            w1 = -w * (1.0 - s) * p
            scale = 1.0 / ((1.0 - x) * g1)
        rows.append((s, scale * w0, scale * w1))
    mat = _assemble(grid, rows, (c, d))
    return GridOperator(mat, grid, f"RL-{side.value}-derivative", float(beta), (c, d))


def cf_integral(beta: float, side="left", grid: QuadratureGrid | None = None, operand=(0.0, 0.0)) -> GridOperator:
    """Caputo-Fabrizio integral ``(1/beta) int e^(-((1-beta)/beta)|x-s|) f(s) ds``.

    The lower limit is 0 for the left operator and the upper limit is 1 for
    the right one. Its inverse is :func:`cf_derivative` of the same order.
    """
    _check_order(beta, 0.0, 1.0, "Caputo-Fabrizio", hi_open=True)
    side = _side(side)
    c, d = (float(v) for v in operand)
    m = _panel_points(grid.n)
    rate = (1.0 - beta) / beta
    rows = []
    for x in grid.nodes:
        if side is Side.LEFT:
            s, w = _left_rule(grid, x, m, 0.0, (c, d))
            w = w * (1.0 - s) ** d * np.exp(-rate * (x - s))
        else:
            s, w = _right_rule(grid, x, m, 0.0, (c, d))
            w = w * s**c * np.exp(-rate * (s - x))
        rows.append((s, w / beta, None))
    mat = _assemble(grid, rows, (c, d))
    return GridOperator(mat, grid, f"CF-{side.value}-integral", float(beta), (c, d))


def cf_derivative(beta: float, side="left", grid: QuadratureGrid | None = None, operand=(0.0, 0.0)) -> GridOperator:
    """Caputo-Fabrizio derivative ``beta d/dx + (1 - beta)``; ``d/dx`` flips sign on the right."""
    _check_order(beta, 0.0, 1.0, "Caputo-Fabrizio", hi_open=True)
    side = _side(side)
    c, d = (float(v) for v in operand)
    x = grid.nodes
    rho = _operand_factor(x, c, d)
    drho = rho * (c / x - d / (1.0 - x))
    deriv = (np.diag(drho) + rho[:, None] * grid.diff_matrix) / rho[None, :]
    sign = 1.0 if side is Side.LEFT else -1.0
    mat = sign * beta * deriv + (1.0 - beta) * np.eye(grid.n)
    return GridOperator(mat, grid, "CF-derivative", float(beta), (c, d))


def multiplier(power: float, grid: QuadratureGrid, reflect: bool = False) -> GridOperator:
    """Diagonal operator multiplying by ``tau^power`` (``(1-tau)^power`` if ``reflect``)."""
    x = 1.0 - grid.nodes if reflect else grid.nodes
    return GridOperator(np.diag(x**power), grid, f"multiplier(tau^{power:g})", None)


def kernel_K(alpha: float, grid: QuadratureGrid, adjoint: bool = False, operand=None) -> GridOperator:
    """Memory operator ``tau^a I^a tau^(-a)`` with ``a = alpha/2``, or its adjoint.

    The adjoint is ``tau^(-a) I_1^a tau^a``. The default operand exponents
    are ``(-a, -a)``, matching the beta-shaped pulses the operator is used on.
    """
    _check_order(alpha, 0.0, 1.0, "kernel_K alpha", hi_open=True)
    a = 0.5 * alpha
    c, d = operand if operand is not None else (-a, -a)
    if adjoint:
        inner = rl_integral(a, "right", grid, operand=(c + a, d))
        mat = (grid.nodes ** (-a))[:, None] * inner.matrix * (grid.nodes**a)[None, :]
    else:
        inner = rl_integral(a, "left", grid, operand=(c - a, d))
        mat = (grid.nodes**a)[:, None] * inner.matrix * (grid.nodes ** (-a))[None, :]
    return GridOperator(mat, grid, "composite", float(alpha), (float(c), float(d)))


def kk_star(alpha: float, grid: QuadratureGrid) -> GridOperator:
    """``K K*`` for operands carrying the factor ``tau^(-a) (1-tau)^(-a)``.

    ``K*`` of such an operand behaves as ``tau^(-a)`` times a smooth function,
    which is the operand class the outer ``K`` is built for.
    """
    a = 0.5 * alpha
    inner = kernel_K(alpha, grid, adjoint=True, operand=(-a, -a))
    outer = kernel_K(alpha, grid, operand=(-a, 0.0))
    return outer @ inner


def representation_constant(alpha: float) -> float:
    """Factor turning ``K K*`` into the kernel ``|t1 - t2|^(alpha-1)``."""
    return math.pi / (math.gamma(1.0 - alpha) * math.sin(0.5 * math.pi * alpha))


def kernel_K_fbm(alpha: float, grid: QuadratureGrid, adjoint: bool = False, operand=None) -> GridOperator:
    """``I^(alpha-1) tau^(1-a) I^(1-a) tau^(a-1)`` for ``alpha`` in (1, 2), ``a = alpha/2``.

    The adjoint is ``tau^(a-1) I_1^(1-a) tau^(1-a) I_1^(alpha-1)`` and acts
    on smooth operands. The forward operator defaults to operands of the form
    ``tau^(a-1)`` times a smooth function; pass ``operand`` to override.
    """
    _check_order(alpha, 1.0, 2.0, "kernel_K_fbm alpha", hi_open=True)
    a = 0.5 * alpha
    x = grid.nodes
    if adjoint:
        first = rl_integral(alpha - 1.0, "right", grid, operand=(0.0, 0.0))
        second = rl_integral(1.0 - a, "right", grid, operand=(1.0 - a, alpha - 1.0))
        mat = (x ** (a - 1.0))[:, None] * (second.matrix * (x ** (1.0 - a))[None, :]) @ first.matrix
        return GridOperator(mat, grid, "composite", float(alpha), (0.0, 0.0))
    c, d = operand if operand is not None else (a - 1.0, 0.0)
    first = rl_integral(1.0 - a, "left", grid, operand=(c + a - 1.0, d))
    second = rl_integral(alpha - 1.0, "left", grid, operand=(0.0, 0.0))
    mat = second.matrix @ ((x ** (1.0 - a))[:, None] * first.matrix * (x ** (a - 1.0))[None, :])
    return GridOperator(mat, grid, "composite", float(alpha), (float(c), float(d)))


def kk_star_fbm(alpha: float, grid: QuadratureGrid) -> GridOperator:
    """``K_FBM K_FBM*`` acting on smooth operands."""
    a = 0.5 * alpha
    outer = kernel_K_fbm(alpha, grid, operand=(a - 1.0, a))
    return outer @ kernel_K_fbm(alpha, grid, adjoint=True)


def representation_constant_fbm(alpha: float) -> float:
    """Factor turning ``K_FBM K_FBM*`` into ``t1^(alpha-1) + t2^(alpha-1) - |t1-t2|^(alpha-1)``."""
    return math.pi * (alpha - 1.0) / (math.gamma(2.0 - alpha) * math.sin(0.5 * math.pi * alpha))


def regularized_inverse(op: GridOperator, lam: float | None = None) -> GridOperator:
    """Tikhonov-regularized inverse under the grid inner product.

    Minimizes ``||A u - f||^2 + lam ||u||^2`` with both norms weighted by the
    grid weights. The default ``lam`` is ``1e-10`` times the largest squared
    singular value of the weighted matrix.
    """
    a = op.matrix
    if a.shape[0] != a.shape[1]:
        raise ValueError("regularized_inverse needs a square operator")
    sw = np.sqrt(op.grid.plain_weights)
    aw = sw[:, None] * a / sw[None, :]
    u, sig, vt = np.linalg.svd(aw)
    if lam is None:
        lam = 1e-10 * sig[0] ** 2
    if lam < 0:
        raise ValueError("regularization must be nonnegative")
    if lam == 0.0:
        if sig[-1] <= sig[0] * a.shape[0] * np.finfo(float).eps:
            raise np.linalg.LinAlgError("operator is singular to working precision; use lam > 0")
        filt = 1.0 / sig
    else:
        filt = sig / (sig**2 + lam)
    inv_w = (vt.T * filt[None, :]) @ u.T
    mat = inv_w * sw[None, :] / sw[:, None]
    return GridOperator(mat, op.grid, "composite", None, (0.0, 0.0))
