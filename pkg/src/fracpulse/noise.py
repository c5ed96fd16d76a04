"""Charge-noise models: stationary ensembles of two-level fluctuators with a
``1/f^alpha`` spectrum, and fractional Brownian motion.

All quantities are SI: volts squared for correlations, hertz for spectral
cutoffs, seconds for times. Kernels in normalized time take the pulse
duration ``T`` explicitly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .special import EULER_GAMMA, INTEGER_GUARD, expint_regular, expint_vec

VARIANTS = ("exact", "coarse", "improved", "fbm")
COARSE_THETA_WARN = 0.1
_LOG_GAMMA_NODES = 2048


class SingularArgumentError(ValueError):
    """A kernel was evaluated at its integrable singularity."""


def _is_one(alpha: float) -> bool:
    return abs(alpha - 1.0) < INTEGER_GUARD


def _power_span(lo: float, hi: float, alpha: float) -> float:
    """``(hi^(1-alpha) - lo^(1-alpha)) / (1-alpha)``, or ``ln(hi/lo)`` at ``alpha = 1``."""
    if _is_one(alpha):
        return math.log(hi / lo)
    e = 1.0 - alpha
    return lo**e * math.expm1(e * math.log(hi / lo)) / e


@dataclass(frozen=True)
class TlfEnsembleModel:
    """Stationary ensemble of two-level fluctuators.

    Parameters
    ----------
    r0
        Total noise energy ``R0`` in V^2 (zero gives the noiseless limit).
    f_min, f_max
        Spectral cutoffs in Hz; switching rates span ``[pi f_min, pi f_max]``.
    alpha
        Spectral exponent in (0, 2).
    """

    r0: float
    f_min: float
    f_max: float
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not (0.0 < self.f_min < self.f_max):
            raise ValueError(f"need 0 < f_min < f_max, got {self.f_min}, {self.f_max}")
        if not self.r0 > 0.0:
            raise ValueError(f"R0 must be positive, got {self.r0}")

    @property
    def gamma_min(self) -> float:
        return math.pi * self.f_min

    @property
    def gamma_max(self) -> float:
        return math.pi * self.f_max

    @cached_property
    def normalization(self) -> float:
        """``N(alpha)`` such that the energy density integrates to ``R0``."""
        return _power_span(self.gamma_min, self.gamma_max, self.alpha)

    @cached_property
    def p0(self) -> float:
        return p0_from_r0(self)


@dataclass(frozen=True)
class FbmModel:
    """Fractional Brownian motion with spectral level ``p0`` (V^2 Hz^(alpha-1))."""

    p0: float
    alpha: float
    T: float

    def __post_init__(self):
        if not (1.0 < self.alpha < 2.0):
            raise ValueError(f"fBm needs alpha strictly inside (1, 2), got {self.alpha}")
        if not (self.p0 > 0.0 and self.T > 0.0):
            raise ValueError("fBm needs positive P0 and T")


def tlf_autocorrelation(energy: float, gamma: float, dt):
    """Correlation ``E exp(-2 gamma |dt|)`` of a single fluctuator."""
    if energy < 0 or gamma <= 0:
        raise ValueError("need energy >= 0 and gamma > 0")
    return energy * np.exp(-2.0 * gamma * np.abs(dt))


def energy_density(model: TlfEnsembleModel, gamma):
    """Energy per unit switching rate, ``R0 gamma^-alpha / N`` inside the band."""
    gamma = np.asarray(gamma, dtype=float)
    inside = (gamma >= model.gamma_min) & (gamma <= model.gamma_max)
    with np.errstate(divide="ignore"):
        val = model.r0 * gamma ** (-model.alpha) / model.normalization
    return np.where(inside, val, 0.0)


def p0_from_r0(model: TlfEnsembleModel) -> float:
    """Spectral level ``P0 = P(1 Hz)`` implied by the total energy ``R0``."""
    s = math.sin(0.5 * math.pi * model.alpha)
    return model.r0 / (4.0 * s * _power_span(model.f_min, model.f_max, model.alpha))


def _prefactor(model: TlfEnsembleModel) -> float:
    return 4.0 * model.p0 * math.sin(0.5 * math.pi * model.alpha)


def autocor_exact(model: TlfEnsembleModel, dt):
    """Ensemble correlation at lag ``dt`` (s) in closed form via ``E_alpha``.

    When both exponential-integral arguments are small the singular parts
    of the two terms cancel identically and only the regular parts are
    combined, which keeps full accuracy down to ``dt = 0`` where the value
    is ``R0``.
    """
    dt = np.abs(np.asarray(dt, dtype=float))
    alpha = 1.0 if _is_one(model.alpha) else model.alpha
    e = 1.0 - alpha
    z_lo = 2.0 * math.pi * model.f_min * dt
    z_hi = 2.0 * math.pi * model.f_max * dt
    a_lo, a_hi = model.f_min**e, model.f_max**e
    out = np.empty_like(dt)
    small = z_hi <= 1.0
    if np.any(small):
        diff = a_lo * expint_regular(alpha, z_lo[small]) - a_hi * expint_regular(alpha, z_hi[small])
        if alpha == 1.0:
            diff = diff + math.log(model.f_max / model.f_min)
        out[small] = diff
    big = ~small
    if np.any(big):
        out[big] = a_lo * expint_vec(alpha, z_lo[big]) - a_hi * expint_vec(alpha, z_hi[big])
    out = _prefactor(model) * out
    return out if out.ndim else float(out)


def autocor_oracle(model: TlfEnsembleModel, dt, n: int = _LOG_GAMMA_NODES):
    """Lorentzian-mixture correlation by Gauss-Legendre quadrature in ``ln gamma``."""
    dt = np.atleast_1d(np.abs(np.asarray(dt, dtype=float)))
    x, w = np.polynomial.legendre.leggauss(n)
    lo, hi = math.log(model.gamma_min), math.log(model.gamma_max)
    lg = 0.5 * (hi - lo) * (x + 1.0) + lo
    gam = np.exp(lg)
    dens = model.r0 * gam ** (1.0 - model.alpha) / model.normalization
    vals = (0.5 * (hi - lo) * w * dens)[None, :] * np.exp(-2.0 * gam[None, :] * dt[:, None])
    return vals.sum(axis=1)


def _theta(model: TlfEnsembleModel, T: float) -> float:
    return 2.0 * math.pi * model.f_min * T


def remainder_fit(alpha: float) -> tuple[float, float]:
    """``(A, zeta)`` of the exponential fit ``A (1 - exp(-zeta z))`` to the series remainder."""
    return (3.0 - alpha) / (2.0 - alpha) ** 2, (2.0 - alpha) / (3.0 - alpha)


def autocor_coarse(model: TlfEnsembleModel, T: float, tau1, tau2):
    """Leading small-``theta`` form of the correlation in normalized time."""
    theta = _theta(model, T)
    if theta > COARSE_THETA_WARN:
        warnings.warn(f"coarse kernel used at theta={theta:.3g} > {COARSE_THETA_WARN}", stacklevel=2)
    d = np.abs(np.asarray(tau1, dtype=float) - np.asarray(tau2, dtype=float))
    alpha = model.alpha
    if alpha <= 1.0 + INTEGER_GUARD and np.any(d == 0.0):
        raise SingularArgumentError("coarse kernel is singular at tau1 == tau2 for alpha <= 1")
    pref = _prefactor(model)
    if _is_one(alpha):
        out = pref * (-EULER_GAMMA - np.log(theta * d))
    else:
        out = pref * model.f_min ** (1.0 - alpha) / (1.0 - alpha) * (
            theta ** (alpha - 1.0) * math.gamma(2.0 - alpha) * d ** (alpha - 1.0) - 1.0
        )
    return out if np.ndim(out) else float(out)


def autocor_improved(model: TlfEnsembleModel, T: float, tau1, tau2):
    """Coarse kernel plus the exponential fit of the series remainder."""
    theta = _theta(model, T)
    d = np.abs(np.asarray(tau1, dtype=float) - np.asarray(tau2, dtype=float))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        base = autocor_coarse(model, T, tau1, tau2)
    a, zeta = remainder_fit(1.0 if _is_one(model.alpha) else model.alpha)
    corr = _prefactor(model) * model.f_min ** (1.0 - model.alpha) * a * (-np.expm1(-theta * zeta * d))
    out = base + corr
    return out if np.ndim(out) else float(out)


def psd(model: TlfEnsembleModel, f, n: int = _LOG_GAMMA_NODES):
    """Power spectral density (V^2/Hz) normalized so the bulk equals ``P0/|f|^alpha``.

    Computed as half the two-sided transform ``int dE/dgamma gamma/(gamma^2 + pi^2 f^2)``
    by Gauss-Legendre quadrature in ``ln gamma``.
    """
    f = np.atleast_1d(np.abs(np.asarray(f, dtype=float)))
    if np.any(f <= 0):
        raise ValueError("psd needs f > 0")
    x, w = np.polynomial.legendre.leggauss(n)
    lo, hi = math.log(model.gamma_min), math.log(model.gamma_max)
    gam = np.exp(0.5 * (hi - lo) * (x + 1.0) + lo)
    dens = model.r0 * gam ** (1.0 - model.alpha) / model.normalization
    lor = gam[None, :] / (gam[None, :] ** 2 + (math.pi * f[:, None]) ** 2)
    return 0.5 * (lor * (0.5 * (hi - lo) * w * dens)[None, :]).sum(axis=1)


def fbm_autocorrelation(model: FbmModel, tau1, tau2):
    """Non-stationary fBm correlation in normalized time."""
    a = model.alpha
    t1 = np.asarray(tau1, dtype=float)
    t2 = np.asarray(tau2, dtype=float)
    pref = 2.0 * model.p0 * (2.0 * math.pi * model.T) ** (a - 1.0) * abs(
        math.gamma(1.0 - a) * math.sin(0.5 * math.pi * a)
    )
    out = pref * (t1 ** (a - 1.0) + t2 ** (a - 1.0) - np.abs(t1 - t2) ** (a - 1.0))
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class AutocorKernel:
    """Correlation kernel in normalized time, ``R(tau1, tau2)`` in V^2.

    Attributes
    ----------
    variant
        ``exact``, ``coarse``, ``improved`` or ``fbm``.
    model
        :class:`TlfEnsembleModel` for stationary variants, :class:`FbmModel` for ``fbm``.
    T
        Pulse duration in seconds.
    """

    variant: str
    model: TlfEnsembleModel | FbmModel
    T: float

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown kernel variant {self.variant!r}; choose from {VARIANTS}")
        if (self.variant == "fbm") != isinstance(self.model, FbmModel):
            raise TypeError("the fbm variant needs an FbmModel and the others a TlfEnsembleModel")
        if not self.T > 0:
            raise ValueError("pulse duration must be positive")

    @property
    def alpha(self) -> float:
        return self.model.alpha

    @property
    def stationary(self) -> bool:
        return self.variant != "fbm"

    @property
    def theta(self) -> float | None:
        return None if self.variant == "fbm" else _theta(self.model, self.T)

    @property
    def A(self) -> float:
        return remainder_fit(self.alpha)[0]

    @property
    def zeta(self) -> float:
        return remainder_fit(self.alpha)[1]

    @property
    def beta_tilde(self) -> float | None:
        th = self.theta
        return None if th is None else 1.0 / (self.zeta * th + 1.0)

    @property
    def singular_exponent(self) -> float:
        """Exponent ``e`` of the lag singularity ``|dtau|^e`` (0 for bounded or log kernels)."""
        if self.variant in ("coarse", "improved") and self.alpha < 1.0:
            return self.alpha - 1.0
        return 0.0

    def lag(self, dtau):
        """Stationary kernel as a function of the normalized lag ``|tau1 - tau2|``."""
        if not self.stationary:
            raise TypeError("the fbm kernel is not stationary")
        dtau = np.abs(np.asarray(dtau, dtype=float))
        if self.variant == "exact":
            return autocor_exact(self.model, dtau * self.T)
        if self.variant == "coarse":
            return autocor_coarse(self.model, self.T, dtau, 0.0)
        return autocor_improved(self.model, self.T, dtau, 0.0)

    def __call__(self, tau1, tau2):
        if self.variant == "fbm":
            return fbm_autocorrelation(self.model, tau1, tau2)
        return self.lag(np.asarray(tau1, dtype=float) - np.asarray(tau2, dtype=float))


def make_kernel(model, T: float, variant: str = "exact") -> AutocorKernel:
    return AutocorKernel(variant, model, float(T))


@dataclass(frozen=True, eq=False)
class LorentzianMixtureKernel:
    """Stationary kernel of an arbitrary fluctuator ensemble.

    ``R(dt) = sum_i E_i exp(-2 gamma_i |dt|)`` with energies ``E_i`` (V^2)
    and switching rates ``gamma_i`` (1/s), evaluated in normalized time.
    """

    energies: np.ndarray
    rates: np.ndarray
    T: float
    variant: str = "mixture"

    def __post_init__(self):
        if np.any(np.asarray(self.energies) < 0) or np.any(np.asarray(self.rates) <= 0):
            raise ValueError("mixture needs nonnegative energies and positive rates")

    stationary = True
    singular_exponent = 0.0

    def lag(self, dtau):
        d = np.abs(np.asarray(dtau, dtype=float))
        e = np.asarray(self.energies, dtype=float)
        g = np.asarray(self.rates, dtype=float)
        out = np.exp(-2.0 * self.T * np.multiply.outer(d, g)) @ e
        return out if np.ndim(out) else float(out)

    def __call__(self, tau1, tau2):
        return self.lag(np.asarray(tau1, dtype=float) - np.asarray(tau2, dtype=float))
