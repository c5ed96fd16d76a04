"""Normalized exchange pulse shapes, the exponential voltage-to-exchange map
and sampled voltage waveforms.

A shape ``S(tau)`` on ``[0, 1]`` integrates to one; the exchange is
``J(t) = pi k hbar S(t/T) / T``. Every shape is stored as
``[tau (1 - tau)]^a g(tau)`` with a smooth factor ``g`` and an endpoint
exponent ``a`` (nonzero only for beta shapes), which is what the quadrature
routines consume.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import constants
from scipy.special import betainc, erf

from .quadrature import QuadratureGrid, barycentric_matrix, jacobi_reference
from .special import beta_fn

HBAR_EV_S = constants.hbar / constants.e
SHAPE_VARIANTS = ("square", "gaussian", "exp-of-gaussian", "beta", "sampled")
DEFAULT_SIGMA = 0.12
DEFAULT_H = 10.0


def _composite_legendre(a: float, b: float, panels: int = 64, m: int = 24):
    u, w = jacobi_reference(m, 0.0, 0.0)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)
    s = (edges[:-1, None] + h[:, None] * u[None, :]).ravel()
    ws = (h[:, None] * w[None, :]).ravel()
    return s, ws


@dataclass(frozen=True, eq=False)
class ShapeFn:
    """Normalized pulse shape ``S(tau) = [tau (1-tau)]^a g(tau) / Z``.

    Build instances with :func:`make_shape` or :func:`sampled_shape`.

    Attributes
    ----------
    variant
        One of ``square``, ``gaussian``, ``exp-of-gaussian``, ``beta``, ``sampled``.
    params
        Variant parameters, e.g. ``{"sigma": 0.12}``.
    exponent
        Endpoint exponent ``a``.
    norm
        Normalization constant ``Z``, so that ``int S = 1``.
    """

    variant: str
    params: dict
    exponent: float
    norm: float
    _raw: Callable = field(repr=False)

    def smooth(self, tau) -> np.ndarray:
        """Normalized smooth factor ``g(tau) / Z``."""
        return self._raw(np.asarray(tau, dtype=float)) / self.norm

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        a = self.exponent
        with np.errstate(divide="ignore"):
            env = (tau * (1.0 - tau)) ** a if a != 0.0 else 1.0
        out = env * self.smooth(tau)
        return out if np.ndim(out) else float(out)

    @property
    def tag(self) -> str:
        if not self.params or self.variant == "sampled":
            return self.variant
        inner = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.variant}({inner})"

    @property
    def peak(self) -> float:
        """Maximum of ``S`` (infinite for singular beta shapes)."""
        if self.exponent < 0:
            return math.inf
        tau = np.linspace(0.0, 1.0, 4001)
        return float(np.max(self(tau)))

    def integral(self) -> float:
        """``int_0^1 S`` by panelled quadrature, independent of the stored norm."""
        return float(_generic_cell_masses(self, np.array([0.0, 1.0])).sum())

    def cell_masses(self, edges) -> np.ndarray:
        """``int S`` over each cell ``[edges[i], edges[i+1]]`` of a partition of [0, 1]."""
        edges = np.asarray(edges, dtype=float)
        if self.variant == "square":
            return np.diff(edges)
        if self.variant == "beta":
            p = 1.0 + self.exponent
            return np.diff(betainc(p, p, np.clip(edges, 0.0, 1.0)))
        if self.variant == "gaussian":
            s = self.params["sigma"]
            c = erf((edges - 0.5) / (math.sqrt(2.0) * s))
            return np.diff(c) * s * math.sqrt(0.5 * math.pi) / self.norm
        return _generic_cell_masses(self, edges)


def _generic_cell_masses(shape: ShapeFn, edges: np.ndarray, m: int = 12, max_width: float = 1.0 / 128) -> np.ndarray:
    # split wide cells so every panel is narrow enough for peaked shapes
    counts = np.maximum(1, np.ceil(np.diff(edges) / max_width).astype(int))
    if np.any(counts > 1):
        fine = np.concatenate([np.linspace(lo, hi, c + 1)[:-1] for lo, hi, c in zip(edges[:-1], edges[1:], counts)] + [edges[-1:]])
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        return np.add.reduceat(_generic_cell_masses(shape, fine, m, max_width), starts)
    a = shape.exponent
    lo, hi = edges[:-1], edges[1:]
    h = hi - lo
    u, w = jacobi_reference(m, 0.0, 0.0)
    s = lo[:, None] + h[:, None] * u[None, :]
    masses = (h[:, None] * w[None, :] * shape(s)).sum(axis=1)
    if a != 0.0:
        # first and last cells: endpoint power handled by Jacobi weights
        for idx, left in ((0, True), (len(h) - 1, False)):
            if (left and lo[idx] == 0.0) or (not left and hi[idx] == 1.0):
                uj, wj = jacobi_reference(m, a if left else 0.0, 0.0 if left else a)
                x = lo[idx] + h[idx] * uj
                other = (1.0 - x) ** a if left else x**a
                masses[idx] = h[idx] ** (1.0 + a) * np.dot(wj, other * shape.smooth(x))
    return masses


def _gaussian_raw(sigma):
    return lambda t: np.exp(-((t - 0.5) ** 2) / (2.0 * sigma**2))


def make_shape(variant: str, **params) -> ShapeFn:
    """Catalog shape.

    Parameters
    ----------
    variant
        ``square``; ``gaussian`` (``sigma``); ``exp-of-gaussian`` (``sigma``, ``h``);
        ``beta`` (``alpha`` in (0, 2)).
    """
    if variant == "square":
        return ShapeFn("square", {}, 0.0, 1.0, lambda t: np.ones_like(t))
    if variant == "gaussian":
        sigma = float(params.get("sigma", DEFAULT_SIGMA))
        if not sigma > 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        z = sigma * math.sqrt(2.0 * math.pi) * erf(1.0 / (2.0 * math.sqrt(2.0) * sigma))
        return ShapeFn("gaussian", {"sigma": sigma}, 0.0, z, _gaussian_raw(sigma))
    if variant == "exp-of-gaussian":
        sigma = float(params.get("sigma", DEFAULT_SIGMA))
        h = float(params.get("h", DEFAULT_H))
        if not sigma > 0 or not np.isfinite(h):
            raise ValueError(f"need sigma > 0 and finite h, got sigma={sigma}, h={h}")
        gauss = _gaussian_raw(sigma)
        # factor out exp(max(h, 0)) so large h cannot overflow
        shift = max(h, 0.0)
        raw = lambda t: np.exp(h * gauss(t) - shift)  # noqa: E731
        s, w = _composite_legendre(0.0, 1.0)
        z = float(w @ raw(s))
        return ShapeFn("exp-of-gaussian", {"sigma": sigma, "h": h}, 0.0, z, raw)
    if variant == "beta":
        alpha = float(params.get("alpha", 1.0))
        if not (0.0 <= alpha < 2.0):
            raise ValueError(f"beta shape needs alpha in [0, 2), got {alpha}")
        p = 1.0 - 0.5 * alpha
        return ShapeFn("beta", {"alpha": alpha}, -0.5 * alpha, beta_fn(p, p), lambda t: np.ones_like(t))
    raise ValueError(f"unknown shape variant {variant!r}; choose from {SHAPE_VARIANTS}")


def sampled_shape(grid: QuadratureGrid, values, exponent: float | None = None) -> ShapeFn:
    """Shape given by samples on a grid, renormalized to unit integral.

    The endpoint exponent defaults to the grid's Jacobi exponent ``p``
    (``p`` and ``q`` must then agree); values are divided by the endpoint
    envelope and the smooth factor is interpolated barycentrically.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != grid.nodes.shape:
        raise ValueError("values must match the grid nodes")
    if exponent is None:
        if grid.p != grid.q:
            raise ValueError("asymmetric Jacobi grids need an explicit exponent")
        exponent = grid.p
    if np.any(values < 0):
        raise ValueError("pulse shapes must be nonnegative")
    x = grid.nodes
    g = values / (x * (1.0 - x)) ** exponent
    lam = grid.barycentric_weights
    nodes = grid.nodes.copy()

    def raw(t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        out = barycentric_matrix(nodes, lam, flat) @ g
        return out.reshape(np.shape(t))

    u, w = jacobi_reference(grid.n + 8, exponent, exponent)
    z = float(w @ raw(u))
    if not z > 0:
        raise ValueError("sampled shape has nonpositive integral")
    return ShapeFn("sampled", {"n": grid.n}, float(exponent), z, raw)


@dataclass(frozen=True)
class DeviceParams:
    """Exponential exchange map ``J(V) = J0 exp[kappa (V - V0)]``.

    Units: ``v0`` in V, ``j0`` in eV, ``kappa`` in 1/V.
    """

    v0: float = 0.04
    j0: float = 0.01e-6
    kappa: float = 80.0

    def __post_init__(self):
        if not (self.j0 > 0 and self.kappa > 0):
            raise ValueError("device needs J0 > 0 and kappa > 0")


@dataclass(frozen=True)
class GateSpec:
    """SWAP^k gate of duration ``T`` seconds; ``j_ceiling`` (eV) caps the peak exchange."""

    k: float = 1.0
    T: float = 10e-9
    j_ceiling: float | None = None

    def __post_init__(self):
        if not (self.k > 0 and self.T > 0):
            raise ValueError("gate needs k > 0 and T > 0")

    def exchange(self, shape: ShapeFn, tau):
        """``J = pi k hbar S(tau) / T`` in eV."""
        return math.pi * self.k * HBAR_EV_S * np.asarray(shape(tau)) / self.T

    def check_peak(self, shape: ShapeFn) -> float:
        peak = math.pi * self.k * HBAR_EV_S * shape.peak / self.T
        if self.j_ceiling is not None and peak > self.j_ceiling:
            raise ValueError(f"peak exchange {peak:.3g} eV exceeds the ceiling {self.j_ceiling:.3g} eV")
        return peak


def exchange_from_voltage(device: DeviceParams, v):
    return device.j0 * np.exp(device.kappa * (np.asarray(v, dtype=float) - device.v0))


def voltage_from_exchange(device: DeviceParams, j):
    j = np.asarray(j, dtype=float)
    if np.any(j <= 0):
        raise ValueError("exchange must be positive to map back to a voltage")
    return device.v0 + np.log(j / device.j0) / device.kappa


@dataclass(frozen=True, eq=False)
class VoltageWaveform:
    """Uniformly sampled voltage pulse with its exchange profile.

    ``clipped`` marks samples held at the exchange floor.
    """

    t: np.ndarray
    v: np.ndarray
    j: np.ndarray
    device: DeviceParams
    gate: GateSpec
    shape_tag: str
    j_floor: float
    clipped: np.ndarray

    def exchange_area(self) -> float:
        """Trapezoid ``int J dt`` in eV s."""
        return float(np.trapezoid(self.j, self.t))

    def to_csv(self, path) -> None:
        from .io import write_csv

        meta = {"shape": self.shape_tag, "k": self.gate.k, "T_s": self.gate.T, "j_floor_eV": self.j_floor,
                "V0_V": self.device.v0, "J0_eV": self.device.j0, "kappa_per_V": self.device.kappa}
        write_csv(path, ["t_s", "V_V", "J_eV"], np.column_stack([self.t, self.v, self.j]), meta)

    def to_dict(self) -> dict:
        return {
            "shape": self.shape_tag,
            "gate": {"k": self.gate.k, "T_s": self.gate.T},
            "device": {"V0_V": self.device.v0, "J0_eV": self.device.j0, "kappa_per_V": self.device.kappa},
            "j_floor_eV": self.j_floor,
            "t_s": self.t.tolist(),
            "V_V": self.v.tolist(),
            "J_eV": self.j.tolist(),
            "clipped": self.clipped.astype(int).tolist(),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def clip_and_renormalize(t, j, area, j_floor, max_iter: int = 50):
    """Hold samples below ``j_floor`` (or non-finite) at the floor and rescale the
    rest so the trapezoid area equals ``area``."""
    j = np.array(j, dtype=float)
    clipped = ~np.isfinite(j) | (j < j_floor)
    for _ in range(max_iter):
        if np.all(clipped):
            raise ValueError("every sample is at the exchange floor; lower j_floor")
        work = np.where(clipped, j_floor, j)
        floor_part = np.trapezoid(np.where(clipped, j_floor, 0.0), t)
        free_part = np.trapezoid(np.where(clipped, 0.0, work), t)
        scale = (area - floor_part) / free_part
        if not scale > 0:
            raise ValueError("exchange floor alone exceeds the required pulse area")
        j = np.where(clipped, j_floor, work * scale)
        newly = ~clipped & (j < j_floor)
        if not newly.any():
            return j, clipped
        clipped = clipped | newly
    raise RuntimeError("clipping did not settle")


def emit_waveform(shape: ShapeFn, gate: GateSpec, device: DeviceParams, n_samples: int = 1001,
                  j_floor: float | None = None) -> VoltageWaveform:
    """Sample ``V(t)`` on ``n_samples`` uniform times in ``[0, T]``.

    Exchange values below ``j_floor`` (default: the idle exchange ``J0``),
    including singular endpoints, are held at the floor, and the remaining
    samples are rescaled so the trapezoid area of ``J`` stays ``pi k hbar``.
    """
    if n_samples < 8:
        raise ValueError("need at least 8 samples")
    j_floor = device.j0 if j_floor is None else float(j_floor)
    if not j_floor > 0:
        raise ValueError("exchange floor must be positive")
    peak = gate.check_peak(shape)
    if j_floor >= peak:
        raise ValueError(f"exchange floor {j_floor:.3g} eV is not below the peak {peak:.3g} eV")
    t = np.linspace(0.0, gate.T, n_samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        j = gate.exchange(shape, t / gate.T)
    area = math.pi * gate.k * HBAR_EV_S
    j, clipped = clip_and_renormalize(t, j, area, j_floor)
    return VoltageWaveform(t, voltage_from_exchange(device, j), j, device, gate, shape.tag, j_floor, clipped)
