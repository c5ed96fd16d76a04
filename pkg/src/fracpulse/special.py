"""Special functions: generalized exponential integral, beta function and
shifted Chebyshev polynomials.

The generalized exponential integral

.. math::

    E_\\nu(z) = \\int_1^\\infty e^{-zs} s^{-\\nu} \\, ds

is evaluated by its convergent power series for ``z <= 1`` and by a modified
Lentz continued fraction above that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

EULER_GAMMA = 0.57721566490153286061

SERIES_SWITCH = 1.0
INTEGER_GUARD = 1e-8
_MAX_TERMS = 500


class ConvergenceError(ArithmeticError):
    """A series or continued fraction did not reach the requested tolerance."""


@dataclass(frozen=True)
class SpecialFnEval:
    value: float
    error: float
    method: str


def _nearest_integer(nu):
    n = np.rint(nu)
    return n, np.abs(nu - n) < INTEGER_GUARD


_POLE_BAND = 0.1
_ZETA = np.array([sp.zeta(k) for k in range(2, 30)])


def _lgamma1p(x):
    """``ln Gamma(1 + x)`` for small ``|x|`` via its zeta series."""
    x = np.asarray(x, dtype=float)
    ks = np.arange(2, 30)
    terms = (-1.0) ** ks * _ZETA / ks
    return -EULER_GAMMA * x + np.polyval(np.r_[terms[::-1], 0.0, 0.0], x)


def _pole_pair(nu: float, n: int, z):
    """``Gamma(1-nu) z^(nu-1) + (-z)^(n-1) / ((n-1)! (nu-n))`` near ``nu = n``.

    Both terms diverge as ``nu -> n``; the combination is formed through
    ``expm1`` of a logarithm that is itself O(nu - n).
    """
    eps = nu - n
    log_z = np.log(z)
    big_l = _lgamma1p(-eps) + eps * log_z
    for m in range(1, n):
        big_l = big_l - np.log1p(eps / (n - m))
    return (-z) ** (n - 1) / math.factorial(n - 1) * np.expm1(big_l) / (-eps)


def _series(nu: float, z: float, tol: float) -> SpecialFnEval:
    n, is_int = _nearest_integer(nu)
    n = int(n)
    near_pole = (not is_int) and n >= 1 and abs(nu - n) < _POLE_BAND
    skip = is_int or near_pole
    total = 0.0
    term_mag = 0.0
    # sum over k != n-1 of (-z)^k / (k! (k+1-nu))
    power = 1.0  # (-z)^k / k!
    for k in range(_MAX_TERMS):
        if not (skip and k == n - 1):
            t = power / (k + 1.0 - nu)
            total += t
            term_mag = abs(t)
        if k > n and term_mag <= tol * abs(total) and abs(power) < tol:
            break
        power *= -z / (k + 1.0)
    else:
        raise ConvergenceError(f"E_nu series did not converge (nu={nu}, z={z})")
    if is_int:
        psi = -EULER_GAMMA + sum(1.0 / m for m in range(1, n))
        lead = (-z) ** (n - 1) / math.factorial(n - 1) * (psi - math.log(z))
    elif near_pole:
        lead = float(_pole_pair(nu, n, z))
    else:
        lead = math.gamma(1.0 - nu) * z ** (nu - 1.0)
    value = lead - total
    err = 4 * np.finfo(float).eps * (abs(lead) + abs(total)) + term_mag
    return SpecialFnEval(value, err, "series")


def _continued_fraction(nu: float, z: float, tol: float) -> SpecialFnEval:
    tiny = 1e-300
    b = z + nu
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -i * (nu - 1.0 + i)
        b += 2.0
        d = an * d + b
        d = tiny if d == 0 else d
        c = b + an / c
        c = tiny if c == 0 else c
        d = 1.0 / d
        delta = c * d
        h *= delta
        if abs(delta - 1.0) <= tol * 0.1:
            value = h * math.exp(-z)
            return SpecialFnEval(value, abs(value) * abs(delta - 1.0), "continued-fraction")
    raise ConvergenceError(f"E_nu continued fraction did not converge (nu={nu}, z={z})")


def gen_exp_integral_eval(nu: float, z: float, tol: float = 1e-12) -> SpecialFnEval:
    """Evaluate ``E_nu(z)`` and report the method and an error estimate."""
    nu = float(nu)
    z = float(z)
    if not (0.0 < nu <= 3.0 + INTEGER_GUARD):
        raise ValueError(f"order nu must lie in (0, 3], got {nu}")
    if z < 0.0:
        raise ValueError(f"argument z must be nonnegative, got {z}")
    if z == 0.0:
        if nu <= 1.0 + INTEGER_GUARD:
            raise ValueError("E_nu(0) diverges for nu <= 1")
        return SpecialFnEval(1.0 / (nu - 1.0), 0.0, "series")
    if z <= SERIES_SWITCH:
        res = _series(nu, z, 0.01 * tol)
    else:
        res = _continued_fraction(nu, z, 0.01 * tol)
    if res.error > tol * abs(res.value) and res.value != 0.0:
        raise ConvergenceError(
            f"E_nu({z}) with nu={nu}: error {res.error:.3g} above tolerance"
        )
    return res


def gen_exp_integral(nu: float, z: float, tol: float = 1e-12) -> float:
    """Generalized exponential integral ``E_nu(z)`` for ``nu`` in (0, 3].

    Raises ``ValueError`` for ``z = 0`` with ``nu <= 1`` (divergent) and
    :class:`ConvergenceError` when the tolerance cannot be met.
    """
    return gen_exp_integral_eval(nu, z, tol).value


def expint_regular(nu: float, z) -> np.ndarray:
    """Vectorized ``E_nu(z)`` with its small-``z`` singularity removed.

    Returns ``E_nu(z) - Gamma(1 - nu) z^(nu - 1)`` for non-integer ``nu``
    and ``E_1(z) + ln z`` at ``nu = 1``. The regular part stays finite as
    ``z -> 0``, which lets differences of exponential integrals be formed
    without cancellation.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z <= SERIES_SWITCH
    n, is_int = _nearest_integer(nu)
    n = int(n)
    if np.any(small):
        zs = z[small]
        total = np.zeros_like(zs)
        power = np.ones_like(zs)
        for k in range(60):
            if not (is_int and k == n - 1):
                total += power / (k + 1.0 - nu)
            power *= -zs / (k + 1.0)
        if is_int:
            psi = -EULER_GAMMA + sum(1.0 / m for m in range(1, n))
            if n == 1:
                lead = np.full_like(zs, psi)
            else:
                lead = (-zs) ** (n - 1) / math.factorial(n - 1) * (psi - np.log(zs))
        else:
            lead = np.zeros_like(zs)
        out[small] = lead - total
    big = ~small
    if np.any(big):
        zb = z[big]
        full = _cf_vector(nu, zb)
        if is_int:
            if n == 1:
                out[big] = full + np.log(zb)
            else:
                out[big] = full
        else:
            out[big] = full - math.gamma(1.0 - nu) * zb ** (nu - 1.0)
    return out


def _cf_vector(nu: float, z: np.ndarray) -> np.ndarray:
    tiny = 1e-300
    b = z + nu
    c = np.full_like(z, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _MAX_TERMS):
        an = -i * (nu - 1.0 + i)
        b = b + 2.0
        d = an * d + b
        d = np.where(d == 0, tiny, d)
        c = b + an / c
        c = np.where(c == 0, tiny, c)
        d = 1.0 / d
        delta = c * d
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-15):
            break
    else:
        raise ConvergenceError("vectorized E_nu continued fraction did not converge")
    return h * np.exp(-z)


def _series_vec(nu: float, zs: np.ndarray) -> np.ndarray:
    n, is_int = _nearest_integer(nu)
    n = int(n)
    near_pole = (not is_int) and n >= 1 and abs(nu - n) < _POLE_BAND
    skip = is_int or near_pole
    total = np.zeros_like(zs)
    power = np.ones_like(zs)
    for k in range(60):
        if not (skip and k == n - 1):
            total += power / (k + 1.0 - nu)
        power *= -zs / (k + 1.0)
    if is_int:
        psi = -EULER_GAMMA + sum(1.0 / m for m in range(1, n))
        lead = (-zs) ** (n - 1) / math.factorial(n - 1) * (psi - np.log(zs))
    elif near_pole:
        lead = _pole_pair(nu, n, zs)
    else:
        lead = math.gamma(1.0 - nu) * zs ** (nu - 1.0)
    return lead - total


def expint_vec(nu: float, z) -> np.ndarray:
    """Vectorized ``E_nu(z)`` for ``z > 0`` (``z = 0`` allowed when ``nu > 1``)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    n, is_int = _nearest_integer(nu)
    small = (z <= SERIES_SWITCH) & (z > 0)
    if np.any(small):
        out[small] = _series_vec(nu, z[small])
    big = z > SERIES_SWITCH
    if np.any(big):
        out[big] = _cf_vector(nu, z[big])
    zero = z == 0
    if np.any(zero):
        out[zero] = 1.0 / (nu - 1.0) if nu > 1.0 + INTEGER_GUARD else np.inf
    return out


def beta_fn(a: float, b: float) -> float:
    """Euler beta function ``Gamma(a) Gamma(b) / Gamma(a + b)``."""
    if not (a > 0 and b > 0):
        raise ValueError(f"beta function needs positive arguments, got ({a}, {b})")
    return float(sp.beta(a, b))


def shifted_chebyshev(n: int, tau):
    """Shifted Chebyshev polynomial ``T_n(2 tau - 1)`` by the three-term recurrence."""
    if n < 0:
        raise ValueError("polynomial order must be nonnegative")
    x = 2.0 * np.asarray(tau, dtype=float) - 1.0
    t_prev, t_cur = np.ones_like(x), x
    if n == 0:
        return t_prev if np.ndim(x) else float(t_prev)
    for _ in range(n - 1):
        t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
    return t_cur if np.ndim(x) else float(t_cur)
