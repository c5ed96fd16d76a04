import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracpulse.special import (
    ConvergenceError,
    beta_fn,
    expint_regular,
    expint_vec,
    gen_exp_integral,
    gen_exp_integral_eval,
    shifted_chebyshev,
)

def oracle_expint(nu, z):
    with mp.workdps(30):
        return float(mp.quad(lambda s: mp.e ** (-z * s) * s ** (-nu), [1, 2, 10, mp.inf]))


@pytest.mark.parametrize("nu", [0.3, 0.7, 1.0, 1.4, 1.9])
@pytest.mark.parametrize("z", [1e-6, 1e-3, 0.1, 0.9, 1.0, 1.1, 3.0, 12.0, 50.0])
def test_expint_matches_quadrature_oracle(nu, z):
    ref = oracle_expint(nu, z)
    assert gen_exp_integral(nu, z) == pytest.approx(ref, rel=1e-10)
    assert expint_vec(nu, np.array([z]))[0] == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("nu", [1.0 + 1e-5, 1.0 - 1e-6, 2.0 - 3e-7, 0.95, 2.5, 3.0])
def test_expint_near_integer_orders(nu):
    for z in (1e-4, 0.5):
        assert gen_exp_integral(nu, z) == pytest.approx(oracle_expint(nu, z), rel=1e-10)


def test_expint_examples():
    assert gen_exp_integral(2.0, 0.0) == 1.0
    assert gen_exp_integral(1.0, 1.0) == pytest.approx(0.21938393439552029, rel=1e-12)
    z = 0.01
    lead = (z**0.4 * math.gamma(0.6) - 1.0) / (1.0 - 1.4)
    # the truncation differs from the full value by a term of order z
    assert abs(gen_exp_integral(1.4, z) - lead) < 2 * z


@given(nu=st.floats(0.2, 2.0), z=st.floats(0.1, 10.0))
@settings(max_examples=60, deadline=None)
def test_expint_recurrence(nu, z):
    lhs = gen_exp_integral(nu + 1.0, z)
    rhs = (math.exp(-z) - z * gen_exp_integral(nu, z)) / nu
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_expint_reports_method():
    assert gen_exp_integral_eval(0.5, 0.2).method == "series"
    res = gen_exp_integral_eval(0.5, 5.0)
    assert res.method == "continued-fraction"
    assert res.error <= 1e-12 * abs(res.value)


def test_expint_domain_errors():
    with pytest.raises(ValueError):
        gen_exp_integral(1.0, 0.0)
    with pytest.raises(ValueError):
        gen_exp_integral(0.5, -1.0)
    with pytest.raises(ValueError):
        gen_exp_integral(3.5, 1.0)
    assert issubclass(ConvergenceError, ArithmeticError)


@pytest.mark.parametrize("nu", [0.4, 1.0, 1.6])
def test_regular_part_removes_singularity(nu):
    z = np.array([1e-8, 1e-3, 0.5, 2.0])
    full = expint_vec(nu, z)
    sing = -np.log(z) if nu == 1.0 else math.gamma(1 - nu) * z ** (nu - 1)
    np.testing.assert_allclose(expint_regular(nu, z), full - sing, rtol=1e-9, atol=1e-12)


def test_beta_fn():
    assert beta_fn(1, 1) == pytest.approx(1.0)
    assert beta_fn(0.5, 0.5) == pytest.approx(math.pi)
    with mp.workdps(30):
        ref = float(mp.quad(lambda t: t ** (-0.7) * (1 - t) ** (-0.7), [0, 0.5, 1]))
    assert beta_fn(0.3, 0.3) == pytest.approx(ref, rel=1e-10)
    with pytest.raises(ValueError):
        beta_fn(0.0, 1.0)


def test_shifted_chebyshev():
    assert shifted_chebyshev(0, 0.3) == 1.0
    assert shifted_chebyshev(1, 0.75) == pytest.approx(0.5)
    assert shifted_chebyshev(2, 0.5) == pytest.approx(-1.0)
    tau = np.linspace(0, 1, 11)
    np.testing.assert_allclose(shifted_chebyshev(5, tau), np.cos(5 * np.arccos(2 * tau - 1)), atol=1e-12)
