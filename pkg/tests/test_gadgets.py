import math

import numpy as np
import pytest
from scipy.stats import linregress

from besovnet import gadgets, network_ir
from besovnet.errors import ContractError, ParameterError
from besovnet.network_ir import weight_count
from besovnet.piecewise import PiecewisePoly, cardinal_bspline


def realize(net, x):
    x = np.asarray(x, dtype=float)
    return network_ir.eval(net, x.reshape(len(x), -1))[:, 0]


# --- squaring ---

def test_sawtooth_values():
    g1 = gadgets.sawtooth(1)
    assert realize(g1, [0.25, 0.5, 1.0]).tolist() == [0.5, 1.0, 0.0]
    assert realize(gadgets.sawtooth(2), [0.25])[0] == 1.0


def test_sawtooth_vanishes_off_unit_interval():
    x = np.concatenate([np.linspace(-3, 0, 50), np.linspace(1, 4, 50)])
    assert np.all(realize(gadgets.sawtooth(3), x) == 0.0)


@pytest.mark.parametrize('m', [1, 2, 3, 5])
def test_square_unit_endpoints(m):
    f = gadgets.square_unit(m)
    assert realize(f, [0.0, 1.0]).tolist() == [0.0, 1.0]


def test_square_unit_half():
    assert realize(gadgets.square_unit(1), [0.5])[0] == 0.25


@pytest.mark.parametrize('m', [1, 2, 4, 6])
def test_square_unit_error(m):
    x = np.linspace(0.0, 1.0, 4097)
    error = np.max(np.abs(x ** 2 - realize(gadgets.square_unit(m), x)))
    assert error <= gadgets.square_error(m) * (1 + 1e-9)
    assert error >= 0.9 * gadgets.square_error(m)


@pytest.mark.parametrize('m', range(2, 9))
def test_square_unit_error_attained(m):
    # the grid holds every dyadic midpoint of level m, where the error peaks
    x = np.linspace(0.0, 1.0, 2 ** 17 + 1)
    error = np.max(np.abs(x ** 2 - realize(gadgets.square_unit(m), x)))
    assert error == pytest.approx(gadgets.square_error(m), rel=0.01)


def test_sawtooth_shape():
    x = np.linspace(0.0, 1.0, 801)
    g3 = realize(gadgets.sawtooth(3), x)
    teeth = 1.0 - np.abs(8.0 * x - 2.0 * np.floor(4.0 * x) - 1.0)
    np.testing.assert_allclose(g3, teeth, atol=1e-12)
    quarter = 200
    np.testing.assert_allclose(g3[quarter:], g3[:-quarter], atol=1e-12)
    assert realize(gadgets.sawtooth(3), [1 / 8, 3 / 8, 5 / 8, 7 / 8]).tolist() == pytest.approx([1.0] * 4)


def test_square_unit_size_grows_linearly():
    sizes = [weight_count(gadgets.square_unit(m)) for m in range(2, 7)]
    steps = np.diff(sizes)
    assert np.all(steps == steps[0])


def test_mult2_order():
    assert gadgets.mult2_order(1.0, 1e-3) == 5
    with pytest.raises(ParameterError):
        gadgets.mult2_order(0.0, 0.1)
    with pytest.raises(ParameterError):
        gadgets.mult2_order(1.0, 1.0)


# --- ReLU products ---

@pytest.mark.parametrize('K, eps', [(1.0, 1e-2), (1.0, 1e-4), (3.0, 1e-3)])
def test_mult2_relu_accuracy(K, eps):
    net = gadgets.mult2_relu(K, eps)
    axis = np.linspace(-K, K, 81)
    X = np.stack(np.meshgrid(axis, axis, indexing='ij'), axis=-1).reshape(-1, 2)
    error = np.max(np.abs(X[:, 0] * X[:, 1] - network_ir.eval(net, X)[:, 0]))
    assert error <= eps


def test_mult2_relu_zero_factor(rng):
    net = gadgets.mult2_relu(2.0, 1e-3)
    x = rng.uniform(-2, 2, 100)
    zeros = np.zeros(100)
    assert np.all(network_ir.eval(net, np.column_stack([x, zeros]))[:, 0] == 0.0)
    assert np.all(network_ir.eval(net, np.column_stack([zeros, x]))[:, 0] == 0.0)


def test_mult_d_plan_bound():
    levels, err = gadgets.mult_d_plan(5, 1.5, 1e-3)
    assert err <= 1e-3
    assert [len(nodes) for nodes in levels] == [2, 1, 1]


@pytest.mark.parametrize('d', [2, 3, 4, 5])
def test_mult_d_relu_accuracy(rng, d):
    eps = 1e-3
    net = gadgets.mult_d_relu(d, 1.0, eps)
    X = rng.uniform(-1, 1, size=(400, d))
    error = np.max(np.abs(np.prod(X, axis=1) - network_ir.eval(net, X)[:, 0]))
    assert error <= eps
    assert abs(network_ir.eval(net, np.ones(d))[0] - 1.0) <= eps


def test_mult_d_relu_zero_annihilation(rng):
    net = gadgets.mult_d_relu(4, 1.0, 1e-3)
    X = rng.uniform(-1, 1, size=(50, 4))
    X[np.arange(50), rng.integers(0, 4, 50)] = 0.0
    assert np.all(network_ir.eval(net, X)[:, 0] == 0.0)


def test_mult_d_relu_needs_two_factors():
    with pytest.raises(ParameterError):
        gadgets.mult_d_relu(1, 1.0, 0.1)


# --- RePU products ---

def test_mult2_repu2_exact():
    net = gadgets.mult2_repu2()
    assert network_ir.eval(net, [3.0, 5.0])[0] == pytest.approx(15.0, rel=1e-12)
    assert weight_count(net) == 12
    assert net.depth == 2


def test_mult_d_repu2_exact(rng):
    net = gadgets.mult_d_repu2(5)
    assert network_ir.eval(net, [1.0, 2.0, 3.0, 4.0, 5.0])[0] == pytest.approx(120.0, rel=1e-12)
    X = rng.uniform(-3, 3, size=(200, 5))
    np.testing.assert_allclose(network_ir.eval(net, X)[:, 0], np.prod(X, axis=1), rtol=1e-10, atol=1e-9)
    assert net.depth == 6


def test_mult_d_repu2_linear_weights():
    sizes = {d: weight_count(gadgets.mult_d_repu2(d)) for d in (2, 4, 8, 16)}
    assert sizes[16] <= 16 * sizes[2]


@pytest.mark.parametrize('d', range(2, 17))
def test_mult_d_repu2_relative_error(rng, d):
    net = gadgets.mult_d_repu2(d)
    X = rng.uniform(-10, 10, size=(500, d))
    exact = np.prod(X, axis=1)
    relative = np.abs(network_ir.eval(net, X)[:, 0] - exact) / np.abs(exact)
    kappa = gadgets.mult_d_repu2_condition(X)
    assert np.all(relative <= gadgets.MULT_REPU2_ERROR_FACTOR * np.finfo(float).eps * kappa)
    assert np.all(relative[kappa <= 5e5] <= 1e-9)
    assert net.depth == 2 * math.ceil(math.log2(d))


def test_mult_d_repu2_condition():
    assert gadgets.mult_d_repu2_condition([[2.0, 2.0]]).tolist() == [2.0]
    # nodes (1, 4) and (4, 5): 4 + 1/4 + 4/5 + 5/4
    assert gadgets.mult_d_repu2_condition([[1.0, 4.0, 5.0]])[0] == pytest.approx(6.3)


def test_mult_d_repu2_zero_factor():
    net = gadgets.mult_d_repu2(3)
    assert network_ir.eval(net, [7.0, 0.0, -2.5])[0] == 0.0


# --- piecewise linear ---

def test_pwlinear_hat_exact():
    v = PiecewisePoly.linear_interpolant([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    net = gadgets.pwlinear_to_relu(v)
    x = np.linspace(-1, 3, 1001)
    np.testing.assert_allclose(realize(net, x), v(x), atol=1e-14)
    assert weight_count(net) == 6


def test_pwlinear_zero():
    zero = PiecewisePoly.from_truncated_powers([])
    net = gadgets.pwlinear_to_relu(zero)
    assert weight_count(net) == 0
    assert np.all(realize(net, np.linspace(-1, 1, 11)) == 0.0)


def test_pwlinear_rejects():
    with pytest.raises(ContractError):
        gadgets.pwlinear_to_relu(PiecewisePoly([0.0, 1.0], [[1.0, 0.0]]))
    with pytest.raises(ContractError):
        gadgets.pwlinear_to_relu(cardinal_bspline(3))


def test_pwlinear_exact_support_sign_change():
    v = PiecewisePoly.linear_interpolant([0.0, 0.5, 1.0, 1.5, 2.0], [0.0, 1.0, -0.5, 0.25, 0.0])
    net = gadgets.pwlinear_to_relu(v, exact_support=True)
    inside = np.linspace(0, 2, 801)
    np.testing.assert_allclose(realize(net, inside), v(inside), atol=1e-13)
    outside = np.concatenate([np.linspace(-5, -0.01, 100), np.linspace(2.01, 7, 100)])
    assert np.all(realize(net, outside) == 0.0)
    assert net.depth == 3


def test_hat_and_trapezoid():
    assert realize(gadgets.hat(0.0, 1.0, 2.0), [1.0])[0] == 1.0
    assert realize(gadgets.hat(0.0, 1.0, 2.0, height=3.0), [0.5])[0] == pytest.approx(1.5)
    trap = gadgets.trapezoid(0.0, 0.25, 0.75, 1.0)
    assert realize(trap, [0.5, 0.125, -1.0, 2.0]).tolist() == pytest.approx([1.0, 0.5, 0.0, 0.0])
    with pytest.raises(ParameterError):
        gadgets.trapezoid(0.0, 0.8, 0.2, 1.0)


# --- splines ---

@pytest.mark.parametrize('order, eps', [(3, 1e-2), (3, 1e-4), (4, 1e-3)])
def test_spline_to_relu_accuracy(order, eps):
    v = cardinal_bspline(order)
    net = gadgets.spline_to_relu(v, eps)
    x = np.linspace(-1, order + 1, 2001)
    assert np.max(np.abs(realize(net, x) - v(x))) <= eps
    assert np.all(realize(net, np.linspace(-3, 0, 20)) == 0.0)


def test_spline_to_relu_rejects():
    with pytest.raises(ParameterError):
        gadgets.spline_to_relu(cardinal_bspline(3), 1.0)
    jump = PiecewisePoly([0.0, 1.0], [[1.0, 0.0, 1.0]])
    with pytest.raises(ContractError):
        gadgets.spline_to_relu(jump, 0.1)


def test_boundary_margin():
    v = cardinal_bspline(3)
    eta = gadgets.boundary_margin(v, 1e-3)
    assert 0 < eta < 1.5
    assert eta ** 2 / 2 <= 1e-3


def test_spline_to_relu_supported():
    v = cardinal_bspline(3)
    eps = 1e-2
    net = gadgets.spline_to_relu_supported(v, eps)
    x = np.linspace(0, 3, 1201)
    assert np.max(np.abs(realize(net, x) - v(x))) <= eps
    outside = np.concatenate([np.linspace(-4, -0.01, 60), np.linspace(3.01, 8, 60)])
    assert np.all(realize(net, outside) == 0.0)


def test_relu_surrogate():
    h = 0.1
    net = gadgets.relu_surrogate_repu2(h)
    assert realize(net, [1.0, -1.0]).tolist() == pytest.approx([1.0, 0.0])
    x = np.linspace(-1, 1, 2001)
    assert np.max(np.abs(realize(net, x) - np.maximum(x, 0))) == pytest.approx(h / 4, rel=1e-9)
    with pytest.raises(ParameterError):
        gadgets.relu_surrogate_repu2(0.0)


@pytest.mark.parametrize('order', [3, 4, 5])
def test_spline_to_repu2_reproduces_smooth_splines(order):
    v = cardinal_bspline(order)
    net = gadgets.spline_to_repu2(v)
    assert net.r_class == 2
    x = np.linspace(-1, order + 1, 1001)
    np.testing.assert_allclose(realize(net, x), v(x), atol=1e-10)


def test_spline_to_repu2_kink_uses_surrogate():
    v = PiecewisePoly.linear_interpolant([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    h = 1e-4
    net = gadgets.spline_to_repu2(v, surrogate_width=h)
    x = np.linspace(-1, 3, 4001)
    assert np.max(np.abs(realize(net, x) - v(x))) <= h


def test_spline_network_dispatch():
    v = cardinal_bspline(3)
    assert gadgets.spline_network(v, 1e-2, 1).r_class == 1
    assert gadgets.spline_network(v, 1e-2, 2).r_class == 2
    with pytest.raises(ParameterError):
        gadgets.spline_network(v, 1e-2, 3)


def test_spline_network_repu_vanishes_far_from_support():
    v = cardinal_bspline(3)
    net = gadgets.spline_network(v, 1e-3, 2)
    assert realize(net, [-1e4, 4.0, 1e4]).tolist() == [0.0, 0.0, 0.0]


def test_right_gate():
    gate = gadgets.right_gate_repu2(2.0)
    x = np.array([-50.0, 0.0, 2.0, 2.5, 3.0, 3.5, 1e6])
    assert realize(gate, x).tolist() == pytest.approx([1.0, 1.0, 1.0, 0.5, 0.0, 0.0, 0.0])
    assert np.all(realize(gate, np.linspace(3.0, 4000.0, 500)) == 0.0)


def test_spline_to_repu2_supported_exact_tails():
    v = cardinal_bspline(3)
    net = gadgets.spline_to_repu2_supported(v)
    assert net.r_class == 2
    tails = np.concatenate([np.linspace(-4000.0, 0.0, 400), np.linspace(4.0, 4000.0, 400)])
    assert np.all(realize(net, tails) == 0.0)
    inside = np.linspace(0.0, 3.0, 601)
    np.testing.assert_allclose(realize(net, inside), v(inside), atol=1e-12)


def test_kink_width():
    hat = PiecewisePoly.linear_interpolant([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    # slope jumps 1, -2, 1
    assert gadgets.kink_width(hat, 1e-3) == pytest.approx(1e-3)
    assert gadgets.kink_width(hat, 1.0) == 0.25
    floor = 6.0 * np.sqrt(np.finfo(float).eps)
    assert gadgets.kink_width(hat, 1e-12) == pytest.approx(floor)
    assert gadgets.kink_width(cardinal_bspline(3), 1e-3) == pytest.approx(8.0 * np.sqrt(np.finfo(float).eps))
    with pytest.raises(ParameterError):
        gadgets.kink_width(hat, 0.0)


def test_spline_network_repu_kinks_meet_accuracy():
    hat = PiecewisePoly.linear_interpolant([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    eps = 1e-3
    net = gadgets.spline_network(hat, eps, 2)
    x = np.linspace(-1.0, 4.0, 5001)
    assert np.max(np.abs(realize(net, x) - hat(x))) <= eps
    far = np.concatenate([np.linspace(-3000.0, -2 * eps, 300), np.linspace(3.0, 3000.0, 300)])
    assert np.all(realize(net, far) == 0.0)


def test_spline_to_relu_weights_affine_in_log_accuracy():
    v = cardinal_bspline(3)
    eps = 10.0 ** -np.arange(1, 7)
    sizes = [weight_count(gadgets.spline_to_relu(v, e)) for e in eps]
    assert np.all(np.diff(sizes) >= 0)
    fit = linregress(np.log(1.0 / eps), sizes)
    assert fit.slope > 0
    assert fit.rvalue ** 2 >= 0.97
