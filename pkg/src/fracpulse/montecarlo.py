"""Monte Carlo estimate of the average infidelity from random-telegraph noise.

A discretized fluctuator ensemble is sampled event by event, the noisy
exchange is propagated through the exponential voltage map without
linearization, and the phase error is converted to an overlap infidelity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .infidelity import average_infidelity, exact_overlap_fidelity, report_for_kernel
from .noise import LorentzianMixtureKernel, TlfEnsembleModel, _power_span
from .shapes import DeviceParams, GateSpec, ShapeFn

STATIC_RATE_T = 1e-3
OVERFLOW_LIMIT = 50.0
REPORT_MIN_TRAJ = 1000
DEFAULT_BATCH = 1000
_EVENT_CHUNK = 2_000_000


class NoiseOverflowError(ArithmeticError):
    """``kappa * |v|`` is too large for the exponential map."""


@dataclass(frozen=True, eq=False)
class DiscretizedEnsemble:
    """Finite set of symmetric telegraph fluctuators.

    Attributes
    ----------
    rates
        Switching rates ``gamma_j`` in 1/s (each direction).
    energies
        ``E_j = a_j^2`` in V^2.
    edges
        Rate-bin edges the fluctuators represent.
    """

    rates: np.ndarray
    energies: np.ndarray
    edges: np.ndarray
    scheme: str = "log-uniform"

    @property
    def amplitudes(self) -> np.ndarray:
        return np.sqrt(self.energies)

    @property
    def r0(self) -> float:
        return math.fsum(self.energies)

    def autocorrelation(self, dt):
        """``sum_j E_j exp(-2 gamma_j |dt|)``."""
        dt = np.abs(np.asarray(dt, dtype=float))
        out = np.exp(-2.0 * np.multiply.outer(dt, self.rates)) @ self.energies
        return out if np.ndim(out) else float(out)

    def kernel(self, T: float) -> LorentzianMixtureKernel:
        return LorentzianMixtureKernel(self.energies, self.rates, T)


def discretize_ensemble(model: TlfEnsembleModel, n_bins: int = 64) -> DiscretizedEnsemble:
    """Log-uniform rate bins with the exact energy of the power-law density in each bin.

    The representative rate of a bin is its logarithmic midpoint.
    """
    if n_bins < 4:
        raise ValueError("need at least 4 bins")
    edges = np.geomspace(model.gamma_min, model.gamma_max, n_bins + 1)
    edges[0], edges[-1] = model.gamma_min, model.gamma_max
    norm = model.normalization
    frac = np.array([_power_span(lo, hi, model.alpha) / norm for lo, hi in zip(edges[:-1], edges[1:])])
    energies = model.r0 * frac / math.fsum(frac)
    rates = np.sqrt(edges[:-1] * edges[1:])
    return DiscretizedEnsemble(rates, energies, edges)


@dataclass(frozen=True, eq=False)
class NoiseTrajectory:
    """Noise samples ``v`` (V) at uniform times ``t`` (s); ``values`` has one row per trajectory."""

    t: np.ndarray
    values: np.ndarray
    static_rates: int = 0


def _jump_sums(flips, signs, amp, T, n_t, rng):
    """Cumulative flip jumps seen at each of the ``n_t`` sample times."""
    count, nf = flips.shape
    # ordered flip times without sorting: with N flips in [0, T), the k-th is
    # T * G_k / G_(N+1) for G the partial sums of N + 1 unit exponentials
    counts = flips.ravel()
    sizes = counts + 1
    ends = np.cumsum(sizes)
    starts = ends - sizes
    partial = np.cumsum(rng.standard_exponential(int(ends[-1])))
    offset = np.where(starts > 0, partial[starts - 1], 0.0)
    group = np.repeat(np.arange(counts.size), sizes)
    rank = np.arange(int(ends[-1])) - starts[group]
    keep = rank < counts[group]
    group, rank = group[keep], rank[keep]
    times = T * (partial[keep] - offset[group]) / (partial[ends - 1] - offset)[group]
    traj, fl = np.divmod(group, nf)
    # the k-th flip (k = 0, 1, ...) leaves state s0 (-1)^(k+1)
    jump = -2.0 * amp[fl] * signs[traj, fl] * (1.0 - 2.0 * (rank & 1))
    # a flip at time s affects every sample with t_i >= s
    cell = np.ceil(times * ((n_t - 1) / T)).astype(np.int64)
    acc = np.bincount(traj * (n_t + 1) + cell, weights=jump, minlength=count * (n_t + 1))
    return np.cumsum(acc.reshape(count, n_t + 1)[:, :n_t], axis=1)


def sample_trajectories(ens: DiscretizedEnsemble, T: float, n_t: int, rng: np.random.Generator,
                        count: int = 1) -> NoiseTrajectory:
    """Draw ``count`` independent telegraph-sum trajectories.

    Every fluctuator starts at ``+a_j`` or ``-a_j`` with probability 1/2
    and flips at the events of a Poisson process of rate ``gamma_j``. Flip
    times are generated exactly; the sum is read off at ``n_t`` uniform
    times by accumulating the jumps that fall before each sample.
    Fluctuators with ``gamma_j T < 1e-3`` are held static.
    """
    if n_t < 2:
        raise ValueError("need at least two samples")
    t = np.linspace(0.0, T, n_t)
    amp = ens.amplitudes
    nf = len(amp)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(count, nf))
    start = signs @ amp
    mean_flips = ens.rates * T
    static = mean_flips < STATIC_RATE_T
    flips = np.where(static[None, :], 0, rng.poisson(np.broadcast_to(mean_flips, (count, nf))))
    values = np.repeat(start[:, None], n_t, axis=1)
    # bound the event arrays by processing trajectories in chunks
    cum = np.cumsum(flips.sum(axis=1))
    lo = 0
    while lo < count:
        done = cum[lo - 1] if lo else 0
        hi = min(count, max(lo + 1, int(np.searchsorted(cum, done + _EVENT_CHUNK, side="right"))))
        if cum[hi - 1] > done:
            values[lo:hi] += _jump_sums(flips[lo:hi], signs[lo:hi], amp, T, n_t, rng)
        lo = hi
    return NoiseTrajectory(t, values, int(static.sum()))


def sample_trajectory(ens: DiscretizedEnsemble, T: float, n_t: int, rng: np.random.Generator) -> NoiseTrajectory:
    """One trajectory; ``values`` is one-dimensional."""
    traj = sample_trajectories(ens, T, n_t, rng, 1)
    if ens.rates.max() * T / n_t > 1.0:
        warnings.warn("the fastest fluctuator flips several times between samples", RuntimeWarning, stacklevel=2)
    return replace(traj, values=traj.values[0])


def sample_weights(shape: ShapeFn, n_t: int, rule: str = "cells") -> np.ndarray:
    """Weights ``q_i`` with ``sum q_i g(tau_i)`` approximating ``int S g``.

    ``cells`` gives each sample the exact mass of ``S`` on its cell of
    width ``1/(n_t - 1)`` (half cells at the ends), which handles singular
    endpoints without clipping. ``trapezoid`` samples ``S`` and drops
    non-finite endpoint values before renormalizing to unit sum.
    """
    tau = np.linspace(0.0, 1.0, n_t)
    if rule == "cells":
        mid = 0.5 * (tau[:-1] + tau[1:])
        return shape.cell_masses(np.concatenate(([0.0], mid, [1.0])))
    if rule == "trapezoid":
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.asarray(shape(tau), dtype=float)
        s = np.where(np.isfinite(s), s, 0.0)
        w = np.full(n_t, 1.0)
        w[[0, -1]] = 0.5
        q = w * s
        return q / q.sum()
    raise ValueError(f"unknown weight rule {rule!r}")


def phase_error(values, weights, k: float, kappa: float, linear: bool = False):
    """``(pi k / 2) sum_i q_i (exp(kappa v_i) - 1)``, or its linearization."""
    values = np.asarray(values, dtype=float)
    peak = float(np.max(np.abs(values))) * kappa if values.size else 0.0
    if peak > OVERFLOW_LIMIT:
        raise NoiseOverflowError(f"kappa * max|v| = {peak:.3g} exceeds {OVERFLOW_LIMIT}")
    factor = kappa * values if linear else np.expm1(kappa * values)
    return 0.5 * math.pi * k * (factor @ weights)


def trajectory_infidelity(traj: NoiseTrajectory, shape: ShapeFn, gate: GateSpec, kappa: float,
                          rule: str = "cells"):
    """``1 - F(dtheta)`` for each trajectory in ``traj``."""
    q = sample_weights(shape, len(traj.t), rule)
    return 1.0 - exact_overlap_fidelity(phase_error(traj.values, q, gate.k, kappa))


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo average infidelity.

    ``stderr`` is the sample standard deviation over ``sqrt(n_traj)``;
    ``analytic`` and ``analytic_ensemble`` are the perturbative values for
    the continuous model and for the discretized ensemble actually sampled.
    """

    mean: float
    stderr: float
    n_traj: int
    seed: int
    dtheta_var: float
    dtheta_kurtosis: float
    k: float
    kappa: float
    T: float
    r0: float
    alpha: float
    shape: str
    n_t: int
    n_bins: int
    analytic: float | None = None
    analytic_ensemble: float | None = None

    @property
    def reportable(self) -> bool:
        return self.n_traj >= REPORT_MIN_TRAJ

    @property
    def ratio(self) -> float | None:
        return None if not self.analytic else self.mean / self.analytic

    def agrees(self, rel: float = 0.1, n_sigma: float = 3.0) -> bool | None:
        """``|MC - analytic| <= max(rel * analytic, n_sigma * stderr)``; ``None`` below the reporting threshold."""
        if not self.reportable or self.analytic is None:
            return None
        return abs(self.mean - self.analytic) <= max(rel * abs(self.analytic), n_sigma * self.stderr)

    def to_dict(self) -> dict:
        out = {f: getattr(self, f) for f in self.__dataclass_fields__}
        out["ratio"] = self.ratio
        out["agrees"] = self.agrees()
        return out


def _seeded(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, batch])))


def phase_samples(model: TlfEnsembleModel, shape: ShapeFn, T: float, kappa: float, n_traj: int,
                  n_t: int = 4096, seed: int = 0, n_bins: int = 64, batch: int = DEFAULT_BATCH,
                  rule: str = "cells") -> np.ndarray:
    """``sum_i q_i (exp(kappa v_i) - 1)`` for each trajectory (the ``k``-independent part of the phase).

    Trajectories are generated in batches of ``batch``; batch ``b`` draws from
    a stream seeded by ``(seed, b)``, so any split of batches over workers
    reproduces the same samples.
    """
    ens = discretize_ensemble(model, n_bins)
    q = sample_weights(shape, n_t, rule)
    out = np.empty(n_traj)
    for b, lo in enumerate(range(0, n_traj, batch)):
        cnt = min(batch, n_traj - lo)
        traj = sample_trajectories(ens, T, n_t, _seeded(seed, b), cnt)
        out[lo:lo + cnt] = phase_error(traj.values, q, 2.0 / math.pi, kappa)
    return out


def summarize(base: np.ndarray, model: TlfEnsembleModel, shape: ShapeFn, gate: GateSpec, kappa: float,
              seed: int, n_t: int, n_bins: int, compare: bool = True) -> McEstimate:
    dtheta = 0.5 * math.pi * gate.k * base
    inf = 1.0 - exact_overlap_fidelity(dtheta)
    n = len(inf)
    mean = math.fsum(inf) / n
    stderr = float(np.std(inf, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    kurt = float(stats.kurtosis(dtheta)) if n > 3 and np.std(dtheta) > 0 else float("nan")
    analytic = ens_val = None
    if compare:
        dev = DeviceParams(kappa=kappa)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            analytic = average_infidelity(shape, gate, dev, model).infidelity
            ens = discretize_ensemble(model, n_bins)
            ens_val = report_for_kernel(shape, gate, kappa, ens.kernel(gate.T)).infidelity
    return McEstimate(mean, stderr, n, seed, float(np.var(dtheta)), kurt, gate.k, kappa, gate.T, model.r0,
                      model.alpha, shape.tag, n_t, n_bins, analytic, ens_val)


def estimate_infidelity(model: TlfEnsembleModel, shape: ShapeFn, gate: GateSpec, kappa: float, n_traj: int = 10000,
                        n_t: int = 4096, seed: int = 0, n_bins: int = 64, batch: int = DEFAULT_BATCH,
                        compare: bool = True, rule: str = "cells") -> McEstimate:
    """Mean and standard error of the trajectory infidelity.

    The reduction is a compensated sum in trajectory order, so the estimate
    is bit-identical for a given seed and batch size.
    """
    base = phase_samples(model, shape, gate.T, kappa, n_traj, n_t, seed, n_bins, batch, rule)
    return summarize(base, model, shape, gate, kappa, seed, n_t, n_bins, compare)


def estimate_for_ks(model: TlfEnsembleModel, shape: ShapeFn, T: float, kappa: float, ks, **kwargs) -> list[McEstimate]:
    """Estimates for several SWAP exponents from one set of trajectories."""
    compare = kwargs.pop("compare", True)
    n_t, seed, n_bins = kwargs.get("n_t", 4096), kwargs.get("seed", 0), kwargs.get("n_bins", 64)
    base = phase_samples(model, shape, T, kappa, **kwargs)
    return [summarize(base, model, shape, GateSpec(k=k, T=T), kappa, seed, n_t, n_bins, compare) for k in ks]


def discrepancy_curve(model: TlfEnsembleModel, shape: ShapeFn, gate: GateSpec, kappa: float, r0_values,
                      **kwargs) -> list[tuple]:
    """Rows ``(R0, MC mean, stderr, analytic, ratio)`` over a set of noise energies."""
    rows = []
    for r0 in sorted(r0_values):
        est = estimate_infidelity(replace(model, r0=float(r0)), shape, gate, kappa, **kwargs)
        rows.append((float(r0), est.mean, est.stderr, est.analytic, est.ratio))
    return rows
