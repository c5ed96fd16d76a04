"""Average gate infidelity as a quadratic form of the pulse shape.

For a stationary kernel the double integral over ``[0, 1]^2`` is folded
along the diagonal into a single lag integral

.. math::

    Q = \\int_0^1 r(u) \\, [C_{12}(u) + C_{21}(u)] \\, du, \\qquad
    C_{12}(u) = \\int_0^{1-u} S_1(v + u) S_2(v) \\, dv,

where ``r`` is the kernel as a function of the lag. Both integrals use
geometrically graded Gauss-Jacobi panels: the lag axis is refined toward
``u = 0`` (kernel singularity, short correlation scales) and ``u = 1``, and
the inner integral toward its ends when the shapes carry endpoint powers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import eval_chebyt

from .noise import FbmModel, make_kernel
from .special import EULER_GAMMA
from .quadrature import graded_rule, jacobi_reference
from .shapes import DeviceParams, GateSpec, ShapeFn

INFIDELITY_PREFACTOR = 3.0 * math.pi**2 / 32.0
CONVERGENCE_TOL = 1e-3
_LAG_FLOOR = 1e-12
_MAX_PANEL = 1.0 / 16.0


class QuadratureWarning(UserWarning):
    """Refinement did not confirm the requested accuracy."""


@dataclass(frozen=True, eq=False)
class EndpointFunction:
    """``[tau (1-tau)]^exponent * smooth(tau)``; the form the quadrature acts on.

    Shapes qualify directly; this class covers scaled sums for bilinear checks.
    """

    exponent: float
    smooth: object

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        env = (tau * (1.0 - tau)) ** self.exponent if self.exponent != 0.0 else 1.0
        return env * self.smooth(tau)


def combine(a: float, f1, b: float, f2) -> EndpointFunction:
    """``a f1 + b f2`` for two functions sharing an endpoint exponent."""
    if f1.exponent != f2.exponent:
        raise ValueError("combined functions must share the endpoint exponent")
    return EndpointFunction(f1.exponent, lambda t: a * f1.smooth(t) + b * f2.smooth(t))


@lru_cache(maxsize=512)
def _unit_rule(m, e, level):
    """Rule on [0, 1] with weight ``x^e``, graded toward 0 down to ``2^-level``."""
    gap = 2.0**-level if level > 0 else np.inf
    x, w = graded_rule(0.0, 1.0, m, e_left=e, gap_left=gap, max_width=2.0 * _MAX_PANEL)
    return x, w


def _half_overlap(integrand, e_w, e_gap, u, half, m):
    """One half of the lag overlap, integrated in the distance ``s`` from an end.

    ``s^e_w`` goes into the weights; ``integrand(s, u, half)`` supplies the
    rest, which is nearly singular at distance ``u`` when ``e_gap != 0``.
    Lags are grouped by the grading depth they need so that each group is
    evaluated as one array operation.
    """
    out = np.zeros(len(u))
    if e_gap != 0.0:
        ratio = np.maximum(u / half, 1e-300)
        level = np.where(ratio < 1.0, np.ceil(-np.log2(ratio)), 0).astype(int)
    else:
        level = np.zeros(len(u), dtype=int)
    for lev in np.unique(level):
        sel = np.nonzero(level == lev)[0]
        x, w = _unit_rule(m, e_w, int(lev))
        h = half[sel, None]
        s = h * x[None, :]
        ww = h ** (1.0 + e_w) * w[None, :]
        out[sel] = np.sum(ww * integrand(s, u[sel, None], h), axis=1)
    return out


def _lag_overlap(f1, f2, u, m):
    """``C12(u) = int_0^{1-u} f1(v+u) f2(v) dv`` for each lag in ``u``.

    The interval is split at its midpoint and the right half is integrated
    in the distance ``t = 1 - u - v`` from its end, so that every power is
    taken of a difference that is known to full relative precision.
    """
    a1, a2 = f1.exponent, f2.exponent
    u = np.asarray(u, dtype=float)
    half = 0.5 * (1.0 - u)

    def left(s, uu, h):
        # v = s; v^a2 sits in the weights
        out = f1.smooth(s + uu) * f2.smooth(s)
        if a1 != 0.0:
            out = out * ((s + uu) * (2.0 * h - s)) ** a1
        if a2 != 0.0:
            out = out * (1.0 - s) ** a2
        return out

    def right(t, uu, h):
        # v = 1 - u - t; t^a1 sits in the weights
        out = f1.smooth(1.0 - t) * f2.smooth(2.0 * h - t)
        if a1 != 0.0:
            out = out * (1.0 - t) ** a1
        if a2 != 0.0:
            out = out * ((uu + t) * (2.0 * h - t)) ** a2
        return out

    return _half_overlap(left, a2, a1, u, half, m) + _half_overlap(right, a1, a2, u, half, m)


def _lag_rule(m, e_left, e_right):
    return graded_rule(0.0, 1.0, m, e_left=e_left, e_right=e_right, gap_left=_LAG_FLOOR,
                       max_width=_MAX_PANEL)


def _stationary_form(f1, f2, lag_kernel, kernel_exp, m):
    # near u = 0 the overlap behaves like const + u^(1 + a1 + a2); near u = 1 like (1-u)^(1 + a1 + a2)
    p = 1.0 + f1.exponent + f2.exponent
    e_left = kernel_exp + min(0.0, p)
    if e_left <= -1.0:
        raise ValueError("the quadratic form diverges: kernel and shape singularities are not integrable together")
    u, w = _lag_rule(m, e_left, p)
    c = _lag_overlap(f1, f2, u, m)
    if f1 is not f2:
        c = c + _lag_overlap(f2, f1, u, m)
    else:
        c = 2.0 * c
    # the rule weights carry u^e_left (1-u)^p
    vals = lag_kernel(u) * c / (u**e_left * (1.0 - u) ** p)
    return float(np.dot(w, vals)), len(u)


def _weighted_moment(f, power, m):
    """``int_0^1 tau^power f(tau) dtau``."""
    a = f.exponent
    s, w = graded_rule(0.0, 1.0, m, e_left=a + power, e_right=a, max_width=_MAX_PANEL)
    vals = f.smooth(s)
    return float(np.dot(w, vals))


def _form(f1, f2, kernel, m):
    if kernel.stationary:
        return _stationary_form(f1, f2, kernel.lag, kernel.singular_exponent, m)
    model = kernel.model
    alpha = model.alpha
    pref = 2.0 * model.p0 * (2.0 * math.pi * model.T) ** (alpha - 1.0) * abs(
        math.gamma(1.0 - alpha) * math.sin(0.5 * math.pi * alpha)
    )
    mom = _weighted_moment(f1, alpha - 1.0, m) * _weighted_moment(f2, 0.0, m)
    mom += _weighted_moment(f2, alpha - 1.0, m) * _weighted_moment(f1, 0.0, m)
    cross, n = _stationary_form(f1, f2, lambda u: u ** (alpha - 1.0), 0.0, m)
    return pref * (mom - cross), n


def bilinear_form(f1, f2, kernel, m: int = 16) -> float:
    """``int int f1(tau1) R(tau1, tau2) f2(tau2)`` for endpoint-form functions."""
    return _form(f1, f2, kernel, m)[0]


def quadratic_form(shape, kernel, m: int = 16) -> tuple[float, float, int]:
    """``Q = (S, R S)`` in V^2 with a refinement error estimate.

    Returns ``(Q, error, n_nodes)``; ``error`` compares ``m`` and ``2m``
    points per panel, and a :class:`QuadratureWarning` is issued when it
    exceeds 1e-3 relative.
    """
    coarse, _ = _form(shape, shape, kernel, m)
    fine, n = _form(shape, shape, kernel, 2 * m)
    err = abs(fine - coarse)
    if err > CONVERGENCE_TOL * abs(fine) and err > 0:
        warnings.warn(f"quadratic form not converged: relative error {err / abs(fine):.2e}", QuadratureWarning, stacklevel=2)
    return fine, err, n


@dataclass(frozen=True)
class InfidelityReport:
    """Averaged infidelity and its provenance.

    Attributes
    ----------
    q
        Quadratic form ``(S, R S)`` in V^2.
    infidelity
        ``(3 pi^2 / 32) k^2 kappa^2 q``.
    error
        Refinement estimate of the absolute error in ``infidelity``.
    """

    q: float
    infidelity: float
    variant: str
    shape: str
    k: float
    kappa: float
    T: float
    scheme: str
    n_nodes: int
    error: float

    @property
    def converged(self) -> bool:
        return self.error <= CONVERGENCE_TOL * abs(self.infidelity) or self.infidelity == 0.0

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__} | {"converged": self.converged}


def infidelity_from_q(q: float, k: float, kappa: float) -> float:
    return INFIDELITY_PREFACTOR * k**2 * kappa**2 * q


def average_infidelity(shape: ShapeFn, gate: GateSpec, device: DeviceParams, model, variant: str = "exact",
                       m: int = 16) -> InfidelityReport:
    """Perturbative average infidelity of a SWAP^k pulse.

    ``model`` is a :class:`TlfEnsembleModel` (stationary variants; ``T``
    enters through ``theta`` and the lag scale) or an :class:`FbmModel`
    (``variant="fbm"``; its duration is taken from the gate).
    """
    if isinstance(model, FbmModel):
        model = replace(model, T=gate.T)
        variant = "fbm"
    kernel = make_kernel(model, gate.T, variant)
    return report_for_kernel(shape, gate, device.kappa, kernel, m)


def report_for_kernel(shape, gate: GateSpec, kappa: float, kernel, m: int = 16) -> InfidelityReport:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        warnings.simplefilter("always", QuadratureWarning)
        q, err, n = quadratic_form(shape, kernel, m)
    pref = infidelity_from_q(1.0, gate.k, kappa)
    tag = getattr(shape, "tag", "function")
    return InfidelityReport(q, pref * q, kernel.variant, tag, gate.k, kappa, gate.T, "lag-graded-jacobi", n, pref * err)


def exact_overlap_fidelity(dtheta):
    """Overlap fidelity of a SWAP-generated rotation misaligned by ``dtheta``.

    The SWAP eigenvalues are +1 (three triplet states) and -1 (singlet), so
    ``|3 e^{i d} + e^{-i d}| / 4 = sqrt(1 - (3/4) sin^2 d)``.
    """
    s = np.sin(np.asarray(dtheta, dtype=float))
    out = np.sqrt(1.0 - 0.75 * s**2)
    return out if np.ndim(out) else float(out)


def shape_moment(shape, func, m: int = 32) -> float:
    """``int_0^1 S(tau) func(tau) dtau`` with the endpoint power in the weights."""
    a = shape.exponent
    s, w = graded_rule(0.0, 1.0, m, e_left=a, e_right=a, max_width=_MAX_PANEL)
    return float(np.dot(w, shape.smooth(s) * func(s)))


def chebyshev_coeffs(shape, n_max: int) -> np.ndarray:
    """``Phi_n = (T_n(2 tau - 1), S)`` for ``n = 0..n_max``."""
    m = max(32, n_max + 8)
    return np.array([shape_moment(shape, lambda t, n=n: eval_chebyt(n, 2.0 * t - 1.0), m) for n in range(n_max + 1)])


def chebyshev_infidelity_alpha1(phi, model, T: float) -> float:
    """Closed-form quadratic form for the logarithmic kernel of ``alpha = 1``.

    ``4 P0 [-C - ln(pi f_min T / 2) + 2 sum_{n>=1} Phi_n^2 / n]``; warns when
    the last coefficient still contributes more than 1e-6 of the total.
    """
    if abs(model.alpha - 1.0) > 1e-8:
        raise ValueError("the Chebyshev diagonal form needs alpha = 1")
    phi = np.asarray(phi, dtype=float)
    n = np.arange(1, len(phi))
    tail = 2.0 * phi[1:] ** 2 / n
    total = 4.0 * model.p0 * (-EULER_GAMMA - math.log(0.5 * math.pi * model.f_min * T) + tail.sum())
    if len(tail) and 4.0 * model.p0 * tail[-1] > 1e-6 * abs(total):
        warnings.warn("Chebyshev series may be truncated too early", UserWarning, stacklevel=2)
    return total


def chebyshev_node_rule(n: int):
    """Gauss-Chebyshev rule on (0, 1) for the weight ``[tau (1-tau)]^(-1/2)``."""
    return jacobi_reference(n, -0.5, -0.5)


SWEEP_COLUMNS = ("axis_value", "shape", "variant", "q_V2", "infidelity", "error")


def sweep_rows(axis: str, values, shapes, build) -> list[tuple]:
    """Rows ``(value, shape, variant, Q, infidelity, error)`` of a one-axis sweep.

    ``build(value, shape)`` returns an :class:`InfidelityReport`. Rows are
    ordered by axis value, then by the order of ``shapes``.
    """
    rows = []
    for val in sorted(values):
        for shape in shapes:
            rep = build(val, shape)
            rows.append((val, rep.shape, rep.variant, rep.q, rep.infidelity, rep.error))
    return rows


def write_sweep_csv(path, axis: str, rows, meta: dict | None = None) -> None:
    from .io import write_csv

    write_csv(path, (axis,) + SWEEP_COLUMNS[1:], rows, {"axis": axis} | (meta or {}))
