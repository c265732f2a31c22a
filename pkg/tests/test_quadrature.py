import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvnonmarkov.channels import damping_gamma
from cvnonmarkov.exceptions import QuadratureError, ValidationError
from cvnonmarkov.quadrature import (
    PiecewiseChebyshev,
    integrate_adaptive,
    integrate_semi_infinite,
    positive_part_integral,
)


def test_sine_integral():
    res = integrate_adaptive(np.sin, 0, np.pi, tol=1e-13)
    assert abs(res.value - 2) < 1e-12
    assert res.err_estimate <= 1e-13


def test_damped_sine_closed_form():
    res = integrate_adaptive(lambda s: np.exp(-s / 10) * np.sin(s), 0, 2 * np.pi, tol=1e-12)
    assert res.value == pytest.approx((1 - np.exp(-np.pi / 5)) / 1.01, abs=1e-12)


def test_semi_infinite_gamma2():
    res = integrate_semi_infinite(lambda w: w * np.exp(-w), 0.0, tol=1e-12)
    assert res.value == pytest.approx(1.0, abs=1e-12)


@given(coeffs=st.lists(st.floats(-5, 5), min_size=1, max_size=23), lo=st.floats(-3, 0), width=st.floats(0.1, 4))
def test_exact_on_polynomials(coeffs, lo, width):
    p = np.polynomial.Polynomial(coeffs)
    hi = lo + width
    exact = p.integ()(hi) - p.integ()(lo)
    # the tolerance is relative to the integrand size, the absolute one being below rounding
    scale = max(1.0, np.abs(coeffs).sum() * max(1.0, abs(lo), abs(hi)) ** (len(coeffs) - 1))
    res = integrate_adaptive(p, lo, hi, tol=1e-13 * scale)
    assert abs(res.value - exact) <= 1e-13 * scale


def test_breakpoints_respected():
    calls = []

    def f(x):
        calls.append(x.copy())
        return damping_gamma(x)

    bp = 2.5 * np.pi
    res = integrate_adaptive(f, 0.0, 10.0, tol=1e-12, breakpoints=(bp,))
    nodes = np.concatenate(calls)
    # gamma is continuous but has a kink at the breakpoint; exactness needs a panel edge there
    exact = 0.5 * (1 - np.exp(-bp / 10) * np.cos(bp) - 0.1 * np.exp(-bp / 10) * np.sin(bp)) / 1.01
    exact += 0.5 * np.exp(-np.pi / 4) * (10.0 - bp)
    assert res.value == pytest.approx(exact, abs=1e-12)
    assert nodes.min() > 0 and nodes.max() < 10


def test_vector_integrand():
    s = np.array([0.5, 1.0, 2.0])
    res = integrate_adaptive(lambda w: w[:, None] * np.exp(-w[:, None]) * np.cos(np.outer(w, s)), 0, 40, tol=1e-12)
    assert np.allclose(res.value, (1 - s**2) / (1 + s**2) ** 2, atol=1e-11)


def test_non_convergence_carries_estimate():
    with pytest.raises(QuadratureError) as info:
        integrate_adaptive(lambda x: np.sign(x - 0.3) * np.abs(x - 0.3) ** -0.9, 0, 1, tol=1e-14, max_panels=50)
    assert info.value.value is not None
    assert info.value.err_estimate > 0


def test_bad_bounds():
    with pytest.raises(ValidationError):
        integrate_adaptive(np.sin, 1.0, 0.0)


def test_chebyshev_interpolant_and_antiderivative():
    f = PiecewiseChebyshev.fit(np.cos, 0.0, 10.0, 0.5)
    x = np.linspace(0, 10, 777)
    assert np.abs(f(x) - np.cos(x)).max() < 1e-13
    F = f.antiderivative()
    assert np.abs(F(x) - np.sin(x)).max() < 1e-13
    with pytest.raises(ValidationError):
        f(10.5)


def test_positive_part_examples():
    t = np.linspace(0, 5, 51)
    assert positive_part_integral(t, -np.ones_like(t)) == []
    t = np.linspace(0, 2 * np.pi, 400)
    out = positive_part_integral(t, np.sin(t), refine=np.sin, antiderivative=lambda x: -np.cos(x))
    assert len(out) == 1
    assert out[0].t_start == 0.0
    assert out[0].t_end == pytest.approx(np.pi, abs=1e-8)
    assert out[0].integral == pytest.approx(2.0, abs=1e-12)
    # refine without antiderivative falls back to adaptive quadrature
    out = positive_part_integral(t, np.sin(t), refine=np.sin)
    assert out.total == pytest.approx(2.0, abs=1e-9)


def test_positive_part_flow_of_damping():
    # d/dt of a GIP-like quantity decreasing where gamma > 0
    t = np.arange(0, 4 * np.pi, 0.01)
    out = positive_part_integral(t, -damping_gamma(t), refine=lambda s: -damping_gamma(s))
    assert len(out) == 1
    assert out[0].t_start == pytest.approx(np.pi, abs=1e-8)
    assert out[0].t_end == pytest.approx(2 * np.pi, abs=1e-8)


def test_positive_part_validates_grid():
    with pytest.raises(ValidationError):
        positive_part_integral(np.array([0.0, 1.0, 1.0]), np.ones(3))


def test_trapezoid_convergence_second_order():
    g = lambda s: np.sin(3 * s) * np.exp(-s / 4)
    totals = []
    for n in (200, 400, 800):
        t = np.linspace(0, 6, n + 1)
        totals.append(positive_part_integral(t, g(t)).total)
    # halving the step shrinks the change in the total about fourfold
    assert abs(totals[1] - totals[0]) / abs(totals[2] - totals[1]) == pytest.approx(4, rel=0.3)
