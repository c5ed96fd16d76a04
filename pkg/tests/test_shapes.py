import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import curve_fit

from fracpulse.quadrature import make_grid
from fracpulse.shapes import (
    HBAR_EV_S,
    DeviceParams,
    GateSpec,
    emit_waveform,
    exchange_from_voltage,
    make_shape,
    sampled_shape,
    voltage_from_exchange,
)


def independent_integral(shape):
    a = shape.exponent
    if a == 0:
        pts = np.linspace(0, 1, 41)
        return sum(quad(shape, lo, hi, epsabs=1e-15, epsrel=1e-13)[0] for lo, hi in zip(pts[:-1], pts[1:]))
    # endpoint powers through the algebraic weight of QUADPACK
    return quad(shape.smooth, 0, 1, weight="alg", wvar=(a, a), epsabs=1e-15, epsrel=1e-13)[0]


def test_catalog_examples():
    tau = np.linspace(0.01, 0.99, 7)
    np.testing.assert_array_equal(make_shape("square")(tau), 1.0)
    np.testing.assert_allclose(make_shape("beta", alpha=0.0)(tau), 1.0)
    assert make_shape("beta", alpha=1.0)(0.5) == pytest.approx(2 / math.pi, rel=1e-14)
    assert 2 / math.pi == pytest.approx(0.63662, abs=1e-5)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        make_shape("gaussian", sigma=0.0)
    with pytest.raises(ValueError):
        make_shape("beta", alpha=2.0)
    with pytest.raises(ValueError):
        make_shape("triangle")
    with pytest.raises(ValueError):
        DeviceParams(j0=0.0)
    with pytest.raises(ValueError):
        GateSpec(k=0.0)


@given(sigma=st.floats(0.05, 0.3), h=st.floats(1.0, 15.0), alpha=st.floats(0.05, 1.95))
@settings(max_examples=40, deadline=None)
def test_normalization_property(sigma, h, alpha):
    for shape in (make_shape("gaussian", sigma=sigma), make_shape("exp-of-gaussian", sigma=sigma, h=h),
                  make_shape("beta", alpha=alpha), make_shape("square")):
        assert independent_integral(shape) == pytest.approx(1.0, abs=1e-10)
        assert shape.integral() == pytest.approx(1.0, abs=1e-10)
        assert np.all(shape(np.linspace(0.001, 0.999, 101)) >= 0)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.7])
def test_beta_symmetry(alpha):
    s = make_shape("beta", alpha=alpha)
    # dyadic points keep 1 - tau exact in floating point
    tau = np.arange(1, 1024) / 1024
    np.testing.assert_array_equal(s(tau), s(1 - tau))


@pytest.mark.parametrize("variant,params", [("square", {}), ("gaussian", {"sigma": 0.12}), ("exp-of-gaussian", {}),
                                            ("beta", {"alpha": 1.4}), ("beta", {"alpha": 0.5})])
def test_cell_masses(variant, params):
    s = make_shape(variant, **params)
    edges = np.concatenate(([0.0], np.sort(np.random.default_rng(3).uniform(0, 1, 40)), [1.0]))
    masses = s.cell_masses(edges)
    assert masses.sum() == pytest.approx(1.0, abs=1e-12)
    i = 17
    ref = quad(s, edges[i], edges[i + 1], epsabs=1e-15)[0]
    assert masses[i] == pytest.approx(ref, rel=1e-10)


def test_sampled_shape_renormalizes():
    a = -0.35
    g = make_grid("jacobi", 48, a, a)
    x = g.nodes
    s = sampled_shape(g, 3.0 * (x * (1 - x)) ** a * (1 + x))
    assert s.integral() == pytest.approx(1.0, abs=1e-12)
    beta = make_shape("beta", alpha=0.7)
    s2 = sampled_shape(g, beta(x))
    np.testing.assert_allclose(s2(np.linspace(0.01, 0.99, 13)), beta(np.linspace(0.01, 0.99, 13)), rtol=1e-12)
    with pytest.raises(ValueError):
        sampled_shape(g, -np.ones(48))


def test_exchange_voltage_maps():
    d = DeviceParams()
    assert exchange_from_voltage(d, d.v0) == pytest.approx(d.j0)
    assert exchange_from_voltage(d, d.v0 + math.log(10) / d.kappa) == pytest.approx(10 * d.j0, rel=1e-12)
    j = np.logspace(-12, -4, 9)
    np.testing.assert_allclose(exchange_from_voltage(d, voltage_from_exchange(d, j)), j, rtol=1e-12)
    with pytest.raises(ValueError):
        voltage_from_exchange(d, 0.0)


def test_square_waveform():
    gate = GateSpec(1.0, 10e-9)
    w = emit_waveform(make_shape("square"), gate, DeviceParams(), 101)
    expected = math.pi * HBAR_EV_S / 10e-9
    assert expected == pytest.approx(0.2068e-6, rel=1e-3)
    np.testing.assert_allclose(w.j, expected, rtol=1e-12)
    assert np.ptp(w.v) < 1e-12
    assert HBAR_EV_S == pytest.approx(6.582119569e-16, rel=1e-9)


@pytest.mark.parametrize("variant,params", [("beta", {"alpha": 1.4}), ("gaussian", {}), ("exp-of-gaussian", {}), ("beta", {"alpha": 0.5})])
def test_waveform_area_and_finiteness(variant, params):
    gate = GateSpec(1.0, 10e-9)
    w = emit_waveform(make_shape(variant, **params), gate, DeviceParams(), 2001)
    assert np.all(np.isfinite(w.v))
    assert w.exchange_area() == pytest.approx(math.pi * HBAR_EV_S, rel=1e-3)
    assert np.all(w.j >= w.j_floor * (1 - 1e-12))


def test_beta_waveform_symmetric_and_idle_endpoints():
    d = DeviceParams()
    w = emit_waveform(make_shape("beta", alpha=1.4), GateSpec(1.0, 10e-9), d, 1001)
    np.testing.assert_allclose(w.v, w.v[::-1], atol=1e-14)
    assert w.clipped[0] and w.clipped[-1]
    assert w.v[0] == pytest.approx(d.v0)


def test_exp_of_gaussian_gives_gaussian_voltage():
    gate = GateSpec(1.0, 10e-9)
    w = emit_waveform(make_shape("exp-of-gaussian", sigma=0.12, h=10), gate, DeviceParams(), 1001)
    keep = ~w.clipped
    tau = w.t / gate.T
    model = lambda t, c0, c1, s, mu: c0 + c1 * np.exp(-((t - mu) ** 2) / (2 * s**2))  # noqa: E731
    p, _ = curve_fit(model, tau[keep], w.v[keep], p0=[0.0, 0.1, 0.1, 0.5])
    resid = np.max(np.abs(model(tau[keep], *p) - w.v[keep])) / np.ptp(w.v[keep])
    assert resid <= 1e-3
    assert p[2] == pytest.approx(0.12, rel=1e-6)


def test_doubling_T_halves_exchange():
    s = make_shape("gaussian")
    tau = np.linspace(0, 1, 11)
    np.testing.assert_allclose(GateSpec(1, 2e-8).exchange(s, tau), 0.5 * GateSpec(1, 1e-8).exchange(s, tau), rtol=1e-14)


def test_waveform_errors():
    d = DeviceParams()
    with pytest.raises(ValueError):
        emit_waveform(make_shape("square"), GateSpec(1, 1e-8), d, 4)
    with pytest.raises(ValueError):
        emit_waveform(make_shape("square"), GateSpec(1, 1e-8), d, 64, j_floor=1e-3)
    with pytest.raises(ValueError):
        emit_waveform(make_shape("square"), GateSpec(1, 1e-8, j_ceiling=1e-8), d, 64)


def test_waveform_export(tmp_path):
    w = emit_waveform(make_shape("beta", alpha=1.0), GateSpec(0.5, 1e-8), DeviceParams(), 33)
    w.to_csv(tmp_path / "w.csv")
    text = (tmp_path / "w.csv").read_text().splitlines()
    assert text[0].startswith("# fracpulse")
    header = [line for line in text if not line.startswith("#")][0]
    assert header == "t_s,V_V,J_eV"
    w.to_json(tmp_path / "w.json")
    data = json.loads((tmp_path / "w.json").read_text())
    assert data["device"]["kappa_per_V"] == 80.0 and len(data["V_V"]) == 33
