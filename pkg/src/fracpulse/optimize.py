"""Optimal pulse shapes.

The stationary optimum is the beta-distribution shape; for longer pulses
the shape is refined by a damped fixed-point iteration on the improved
kernel. For fractional Brownian motion no optimum exists inside the shape
space, and :func:`fbm_localized_family` shows the infimum instead.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .fracops import cf_integral, kk_star, regularized_inverse
from .infidelity import InfidelityReport, average_infidelity, quadratic_form
from .noise import FbmModel, TlfEnsembleModel, make_kernel, remainder_fit
from .quadrature import QuadratureGrid, make_grid
from .shapes import (
    HBAR_EV_S,
    DeviceParams,
    GateSpec,
    ShapeFn,
    VoltageWaveform,
    clip_and_renormalize,
    exchange_from_voltage,
    make_shape,
    sampled_shape,
    voltage_from_exchange,
)
from .special import beta_fn

NEGATIVE_CLIP = 1e-6


class OptimizationError(RuntimeError):
    """The refinement left the space of admissible (nonnegative) shapes."""


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie strictly inside (0, 2), got {alpha}")
    return alpha


def optimal_shape_closed_form(alpha: float) -> ShapeFn:
    """``[tau (1-tau)]^(-alpha/2) / B(1 - alpha/2, 1 - alpha/2)``."""
    return make_shape("beta", alpha=_check_alpha(alpha))


def optimal_voltage(tau, gate: GateSpec, device: DeviceParams, alpha: float):
    """Unclipped optimal voltage at normalized times ``tau`` (volts)."""
    alpha = _check_alpha(alpha)
    a = 0.5 * alpha
    tau = np.asarray(tau, dtype=float)
    b = beta_fn(1.0 - a, 1.0 - a)
    level = device.v0 - math.log(device.j0 * gate.T * b / (math.pi * gate.k * HBAR_EV_S)) / device.kappa
    with np.errstate(divide="ignore"):
        return level - a / device.kappa * np.log(tau * (1.0 - tau))


def optimal_voltage_pulse(gate: GateSpec, device: DeviceParams, alpha: float, n_samples: int = 1001,
                          j_floor: float | None = None) -> VoltageWaveform:
    """Waveform of the optimal pulse built from the voltage formula.

    Clipping at ``j_floor`` and the area renormalization follow
    :func:`~fracpulse.shapes.emit_waveform`, so both construction paths give
    the same samples.
    """
    if n_samples < 8:
        raise ValueError("need at least 8 samples")
    j_floor = device.j0 if j_floor is None else float(j_floor)
    t = np.linspace(0.0, gate.T, n_samples)
    with np.errstate(over="ignore"):
        j = exchange_from_voltage(device, optimal_voltage(t / gate.T, gate, device, alpha))
    peak = float(np.max(j[np.isfinite(j)]))
    if not 0 < j_floor < peak:
        raise ValueError(f"exchange floor {j_floor:.3g} eV must be positive and below the peak")
    j, clipped = clip_and_renormalize(t, j, math.pi * gate.k * HBAR_EV_S, j_floor)
    tag = optimal_shape_closed_form(alpha).tag
    return VoltageWaveform(t, voltage_from_exchange(device, j), j, device, gate, tag, j_floor, clipped)


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    """Outcome of :func:`fixed_point_refine`.

    Attributes
    ----------
    shape
        Refined shape, sampled on ``grid``.
    values
        Shape samples at the grid nodes.
    lambdas
        Normalization multiplier after each iteration (the initial one first).
    residuals
        ``int |S_new - S_old|`` per iteration; empty when no iteration ran.
    l1_to_beta
        ``int |S - S_beta|``.
    q_ratio
        Quadratic form of the result over that of the beta shape, both under
        the improved kernel; ``None`` unless requested.
    """

    shape: ShapeFn
    values: np.ndarray
    grid: QuadratureGrid
    alpha: float
    theta: float
    iterations: int
    converged: bool
    lambdas: tuple
    residuals: tuple
    l1_to_beta: float
    q_ratio: float | None = None
    notes: tuple = field(default_factory=tuple)

    @property
    def residual(self) -> float | None:
        return self.residuals[-1] if self.residuals else None

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "theta": self.theta,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual": self.residual,
            "residuals": list(self.residuals),
            "lambdas": list(self.lambdas),
            "l1_to_beta": self.l1_to_beta,
            "q_ratio": self.q_ratio,
            "notes": list(self.notes),
            "shape": shape_to_dict(self.shape, self.grid, self.values),
        }

    def to_json(self, path) -> None:
        from .io import write_json

        write_json(path, self.to_dict())


def shape_to_dict(shape: ShapeFn, grid: QuadratureGrid, values) -> dict:
    return {
        "variant": "sampled",
        "tag": shape.tag,
        "grid": {"scheme": grid.scheme, "n": grid.n, "p": grid.p, "q": grid.q},
        "nodes": np.asarray(grid.nodes).tolist(),
        "values": np.asarray(values).tolist(),
        "exponent": shape.exponent,
    }


def shape_from_dict(data: dict) -> ShapeFn:
    """Rebuild a sampled shape written by :func:`shape_to_dict`.

    Also accepts a full result record, whose ``shape`` entry is used.
    """
    if "grid" not in data and "shape" in data:
        data = data["shape"]
    g = data["grid"]
    grid = make_grid(g["scheme"], int(g["n"]), g["p"], g["q"])
    nodes = np.asarray(data["nodes"], dtype=float)
    if not np.allclose(nodes, grid.nodes, rtol=1e-13, atol=1e-15):
        raise ValueError("stored nodes do not match the rebuilt grid")
    return sampled_shape(grid, np.asarray(data["values"], dtype=float), data.get("exponent"))


def load_shape(path) -> ShapeFn:
    with open(path) as fh:
        return shape_from_dict(json.load(fh))


def theta_of(model: TlfEnsembleModel, gate: GateSpec) -> float:
    return 2.0 * math.pi * model.f_min * gate.T


def fixed_point_refine(model: TlfEnsembleModel, gate: GateSpec, grid: QuadratureGrid | None = None,
                       max_iter: int = 200, tol: float = 1e-10, n: int = 128, damping: float = 0.5,
                       lam_reg: float | None = None, initial=None, compare: bool = False) -> OptimizationResult:
    """Refine the beta shape against the exponential correction of the improved kernel.

    Iterates

    .. math::

        S \\leftarrow \\tilde\\lambda \\rho + c\\,(K K^*)^{-1}
        \\left[A (e, S)\\, e + 2 A \\tilde\\beta^2 \\zeta\\theta\\,
        \\mathscr{I}^{\\tilde\\beta} \\mathscr{I}_1^{\\tilde\\beta} S\\right],

    with ``rho = [tau (1-tau)]^(-alpha/2)``, ``e = exp(-theta zeta tau)``,
    ``c = sin(pi alpha/2) theta^(1-alpha) / pi``, and ``lambda~`` fixed
    each step by ``(1, S) = 1``. Updates are damped,
    ``S = (1 - damping) S_old + damping S_update``.

    Parameters
    ----------
    grid
        Gauss-Jacobi grid with ``p = q = -alpha/2``; built with ``n`` nodes if omitted.
    initial
        Starting samples on the grid; defaults to the beta shape.
    compare
        Also compute the quadratic-form ratio against the beta shape.

    Raises
    ------
    ValueError
        For ``alpha`` outside (0, 1) or ``theta > 1``.
    OptimizationError
        When an iterate dips below ``-1e-6`` (after scaling by its mean).
    """
    alpha = model.alpha
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fixed-point refinement is available for alpha in (0, 1), got {alpha}")
    theta = theta_of(model, gate)
    if theta > 1.0:
        raise ValueError(f"fixed-point refinement needs theta <= 1, got {theta:.3g}")
    a = 0.5 * alpha
    if grid is None:
        grid = make_grid("jacobi", n, -a, -a)
    elif grid.scheme != "jacobi" or not (np.isclose(grid.p, -a) and np.isclose(grid.q, -a)):
        raise ValueError("refinement needs a Jacobi grid with p = q = -alpha/2")
    x = grid.nodes
    rho = (x * (1.0 - x)) ** (-a)
    b = beta_fn(1.0 - a, 1.0 - a)
    beta_vals = rho / b

    amp, zeta = remainder_fit(alpha)
    bt = 1.0 / (zeta * theta + 1.0)
    e = np.exp(-theta * zeta * x)
    inv = regularized_inverse(kk_star(alpha, grid), lam_reg).matrix
    right = cf_integral(bt, "right", grid, operand=(-a, -a)).matrix
    left = cf_integral(bt, "left", grid).matrix
    c = math.sin(0.5 * math.pi * alpha) * theta ** (1.0 - alpha) / math.pi
    cf_coeff = 2.0 * amp * bt**2 * zeta * theta

    s = beta_vals.copy() if initial is None else np.asarray(initial, dtype=float).copy()
    s = s / grid.integrate(s)
    lambdas = [1.0 / b]
    residuals = []
    notes = []
    converged = False
    for _ in range(max_iter):
        corr = c * (inv @ (amp * grid.integrate(e * s) * e + cf_coeff * (left @ (right @ s))))
        lam = (1.0 - grid.integrate(corr)) / b
        update = lam * rho + corr
        new = (1.0 - damping) * s + damping * update
        new = _admissible(new, grid, notes)
        residuals.append(grid.integrate(np.abs(new - s)))
        lambdas.append(lam)
        s = new
        if residuals[-1] < tol:
            converged = True
            break
    if max_iter > 0 and not converged:
        warnings.warn(f"fixed-point refinement stopped after {max_iter} iterations, residual {residuals[-1]:.2e}",
                      RuntimeWarning, stacklevel=2)
    shape = sampled_shape(grid, s)
    ratio = None
    if compare:
        kernel = make_kernel(model, gate.T, "improved")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            ratio = quadratic_form(shape, kernel)[0] / quadratic_form(optimal_shape_closed_form(alpha), kernel)[0]
    return OptimizationResult(shape, s, grid, alpha, theta, len(residuals), converged, tuple(lambdas),
                              tuple(residuals), grid.integrate(np.abs(s - beta_vals)), ratio, tuple(notes))


def _admissible(values, grid, notes):
    low = float(np.min(values))
    if low >= 0.0:
        return values
    if low < -NEGATIVE_CLIP:
        raise OptimizationError(f"iterate reached {low:.3g}; a negative exchange cannot be realized")
    notes.append(f"clipped negative excursion {low:.2e}")
    clipped = np.maximum(values, 0.0)
    return clipped / grid.integrate(clipped)


def multi_start(model: TlfEnsembleModel, gate: GateSpec, starts: int = 3, seed: int = 0, **kwargs) -> list[OptimizationResult]:
    """Refine from the beta shape perturbed by random smooth positive factors.

    Agreement of the results indicates, but does not prove, a unique fixed point.
    """
    rng = np.random.default_rng(seed)
    a = 0.5 * model.alpha
    grid = kwargs.pop("grid", None) or make_grid("jacobi", kwargs.pop("n", 128), -a, -a)
    x = grid.nodes
    out = []
    for _ in range(starts):
        coef = rng.normal(scale=0.2, size=4)
        factor = np.exp(np.polynomial.chebyshev.chebval(2.0 * x - 1.0, coef))
        out.append(fixed_point_refine(model, gate, grid, initial=(x * (1 - x)) ** (-a) * factor, **kwargs))
    return out


def fbm_localized_family(model: FbmModel, gate: GateSpec, width: float, device: DeviceParams | None = None,
                         m: int = 16) -> InfidelityReport:
    """Square pulse of height ``1/width`` on ``[0, width]`` against the fBm kernel.

    The fBm correlation refers to absolute time measured from the pulse
    start, so the localized pulse of a gate of duration ``T`` sees the
    kernel of a full-width pulse of duration ``width * T``. The returned
    report carries the gate's ``T``.
    """
    if not 0.0 < width <= 1.0:
        raise ValueError("width must lie in (0, 1]")
    device = device or DeviceParams()
    short = replace(gate, T=width * gate.T)
    rep = average_infidelity(make_shape("square"), short, device, replace(model, T=short.T), m=m)
    return replace(rep, T=gate.T, shape=f"box(width={width:g})")
