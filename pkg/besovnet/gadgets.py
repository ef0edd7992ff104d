"""
Besovnet gadgets

Multiplication and piecewise-polynomial networks:

  - sawtooth / square_unit: Yarotsky's ReLU squaring on [0, 1]
  - mult2_relu / mult_d_relu: approximate products on [-K, K]^d
  - mult2_repu2 / mult_d_repu2: exact products with ρ₂ (polarization identity)
  - pwlinear_to_relu / spline_to_relu / spline_to_repu2: splines as networks
  - spline_to_repu2_supported: the RePU₂ spline gated to vanish outside its support

Every multiplication gadget returns exactly 0 when one of its factors is exactly 0.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from besovnet import calculus
from besovnet.errors import ContractError, ParameterError
from besovnet.network_ir import AffineMap, Network, build_network, identity_network, linear_network
from besovnet.piecewise import PiecewisePoly

logger = logging.getLogger(__name__)

# relative error of mult_d_repu2 per unit of u·mult_d_repu2_condition
MULT_REPU2_ERROR_FACTOR = 8.0

# slope coefficients of g(x) = 2ρ(x) − 4ρ(x−1/2) + 2ρ(x−1); the third neuron is only
# needed on the first layer, later inputs stay in [0, 1]
_HAT_BIASES = (0.0, -0.5, -1.0)
_HAT_COEFFS = (2.0, -4.0, 2.0)


def _affine(rows, cols, triplets, bias=None) -> AffineMap:
    if triplets:
        r, c, v = zip(*triplets)
    else:
        r, c, v = (), (), ()
    return AffineMap.from_triplets(rows, cols, r, c, v, bias)


def _hat_layer_coeffs(s: int) -> tuple:
    """Output coefficients of the hat neurons in sawtooth layer s (1-based)."""
    return _HAT_COEFFS if s == 1 else _HAT_COEFFS[:2]


# --- Squaring ---

def sawtooth(m: int) -> Network:
    """g_m = g∘…∘g (m-fold) as a ReLU network of depth m + 1, exact on all of R."""
    if m < 1:
        raise ParameterError(f"sawtooth needs m >= 1, got {m}")
    affines = [_affine(3, 1, [(i, 0, 1.0) for i in range(3)], _HAT_BIASES)]
    rects = [[True] * 3]
    for s in range(2, m + 1):
        prev = _hat_layer_coeffs(s - 1)
        triplets = [(i, j, c) for i in range(2) for j, c in enumerate(prev)]
        affines.append(_affine(2, len(prev), triplets, _HAT_BIASES[:2]))
        rects.append([True, True])
    last = _hat_layer_coeffs(m)
    affines.append(_affine(1, len(last), [(0, j, c) for j, c in enumerate(last)]))
    return build_network(1, affines, rects)


def square_unit(m: int) -> Network:
    """
    f_m(x) = x − Σ_{s=1}^m g_s(x)/4^s, the piecewise-linear interpolant of x² at the
    points k·2^{-m}; sup_{[0,1]} |x² − f_m(x)| = 2^{-2m-2}.
    """
    if m < 1:
        raise ParameterError(f"square_unit needs m >= 1, got {m}")
    # neurons per hidden layer: hats first, then the running sum (Identity)
    affines = [_affine(4, 1, [(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0), (3, 0, 1.0)],
                       _HAT_BIASES + (0.0,))]
    rects = [[True, True, True, False]]
    for s in range(1, m):
        coeffs = _hat_layer_coeffs(s)
        n_hat = len(coeffs)
        acc = n_hat
        triplets = [(i, j, c) for i in range(2) for j, c in enumerate(coeffs)]
        triplets += [(2, acc, 1.0)] + [(2, j, -c / 4.0 ** s) for j, c in enumerate(coeffs)]
        affines.append(_affine(3, n_hat + 1, triplets, _HAT_BIASES[:2] + (0.0,)))
        rects.append([True, True, False])
    coeffs = _hat_layer_coeffs(m)
    acc = len(coeffs)
    triplets = [(0, acc, 1.0)] + [(0, j, -c / 4.0 ** m) for j, c in enumerate(coeffs)]
    affines.append(_affine(1, acc + 1, triplets))
    return build_network(1, affines, rects)


def square_error(m: int) -> float:
    return 2.0 ** (-2 * m - 2)


# --- ReLU multiplication ---

def mult2_order(K: float, eps: float) -> int:
    """Smallest m ≥ 1 with 2K²·2^{-2m-1} ≤ ε."""
    _check_mult_params(K, eps)
    m = 1
    while 2.0 * K * K * 2.0 ** (-2 * m - 1) > eps:
        m += 1
    return m


def _check_mult_params(K: float, eps: float):
    if not K > 0:
        raise ParameterError(f"Range bound K must be positive, got {K}")
    if not 0 < eps < 1:
        raise ParameterError(f"Accuracy must lie in (0, 1), got {eps}")


def mult2_relu(K: float, eps: float) -> Network:
    """
    ReLU network with |xy − R(Φ)(x, y)| ≤ ε on [-K, K]².

    xy = ((x+y)² − (x−y)²)/4 with |t| = ρ(t) + ρ(−t) and each square taken by
    square_unit on |t|/(2K). Both branches run the same operations, so a zero factor
    gives exactly 0.
    """
    m = mult2_order(K, eps)
    scale = 1.0 / (2.0 * K)
    first = _affine(4, 2, [(0, 0, 1.0), (0, 1, 1.0), (1, 0, -1.0), (1, 1, -1.0),
                           (2, 0, 1.0), (2, 1, -1.0), (3, 0, -1.0), (3, 1, 1.0)])
    second = _affine(2, 4, [(0, 0, scale), (0, 1, scale), (1, 2, scale), (1, 3, scale)])
    absolute = build_network(2, [first, second], [[True] * 4])
    square = square_unit(m)
    squares = calculus.parallel(square, square)
    combine = linear_network([[K * K, -K * K]])
    logger.debug("mult2_relu K=%g eps=%g -> m=%d", K, eps, m)
    return calculus.compose(calculus.compose(absolute, squares), combine)


@dataclass(frozen=True)
class TreeNode:
    """One internal node of a product tree: its range bound and accuracy."""
    level: int
    K: float
    eps: float


def _plan_tree(d: int, K: float, eps_node: float):
    """Per-level node parameters and the worst-case final error for a given node accuracy."""
    values = [(K, 0.0)] * d          # (magnitude bound of the exact value, error bound)
    levels = []
    while len(values) > 1:
        nodes, nxt = [], []
        for i in range(0, len(values) - 1, 2):
            (bl, el), (br, er) = values[i], values[i + 1]
            node = TreeNode(len(levels), max(bl + el, br + er, 1e-300), eps_node)
            nodes.append(node)
            nxt.append((bl * br, eps_node + bl * er + br * el + el * er))
        if len(values) % 2:
            nxt.append(values[-1])
        levels.append(nodes)
        values = nxt
    return levels, values[0][1]


def mult_d_plan(d: int, K: float, eps: float):
    """Node accuracies for mult_d_relu; starts at ε/((d−1)(K+1)^d) and halves until the bound holds."""
    _check_mult_params(K, eps)
    eps_node = eps / ((d - 1) * (K + 1.0) ** d)
    levels, err = _plan_tree(d, K, eps_node)
    while err > eps:
        eps_node /= 2.0
        levels, err = _plan_tree(d, K, eps_node)
    return levels, err


def _product_tree(d: int, node_net, r_class: int) -> Network:
    """Binary tree of two-factor nodes; an odd factor rides an identity network."""
    if d == 1:
        return identity_network(1, r_class)
    width = d
    net = None
    level = 0
    while width > 1:
        blocks = [node_net(level, i) for i in range(width // 2)]
        if width % 2:
            blocks.append(identity_network(1, r_class))
        stage = calculus.parallel(*blocks)
        net = stage if net is None else calculus.compose(net, stage)
        width = (width + 1) // 2
        level += 1
    return net


def mult_d_relu(d: int, K: float, eps: float) -> Network:
    """ReLU network with |Π x_i − R(Φ)(x)| ≤ ε on [-K, K]^d (binary tree of mult2_relu)."""
    if d < 2:
        raise ParameterError(f"mult_d_relu needs d >= 2, got {d}")
    levels, err = mult_d_plan(d, K, eps)
    logger.debug("mult_d_relu d=%d K=%g eps=%g: node eps %g, bound %g",
                 d, K, eps, levels[0][0].eps, err)
    return _product_tree(d, lambda level, i: mult2_relu(levels[level][i].K, levels[level][i].eps), 1)


# --- RePU multiplication ---

def mult2_repu2() -> Network:
    """xy = (ρ₂(x+y) + ρ₂(−x−y) − ρ₂(x−y) − ρ₂(y−x))/4, exact on R²."""
    first = _affine(4, 2, [(0, 0, 1.0), (0, 1, 1.0), (1, 0, -1.0), (1, 1, -1.0),
                           (2, 0, 1.0), (2, 1, -1.0), (3, 0, -1.0), (3, 1, 1.0)])
    second = _affine(1, 4, [(0, 0, 0.25), (0, 1, 0.25), (0, 2, -0.25), (0, 3, -0.25)])
    return build_network(2, [first, second], [[True] * 4], r_class=2)


def mult_d_repu2(d: int) -> Network:
    """Exact product of d inputs with ρ₂ networks; depth 2⌈log₂ d⌉, O(d) weights."""
    if d < 1:
        raise ParameterError(f"mult_d_repu2 needs d >= 1, got {d}")
    node = mult2_repu2()
    return _product_tree(d, lambda level, i: node, 2)


def mult_d_repu2_condition(X) -> np.ndarray:
    """
    Σ over the nodes of mult_d_repu2's tree of |a|/|b| + |b|/|a|, a and b the exact
    node inputs, per row of X.

    A polarization node loses about u·(a² + b²) to cancellation, so the relative error
    of the realization is at most MULT_REPU2_ERROR_FACTOR·u times this sum.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    values = [X[:, i] for i in range(X.shape[1])]
    kappa = np.zeros(len(X))
    with np.errstate(divide='ignore', invalid='ignore'):
        while len(values) > 1:
            nxt = []
            for left, right in zip(values[0::2], values[1::2]):
                a, b = np.abs(left), np.abs(right)
                kappa += a / b + b / a
                nxt.append(left * right)
            if len(values) % 2:
                nxt.append(values[-1])
            values = nxt
    return kappa


# --- Piecewise linear ---

def _ramp_terms(v: PiecewisePoly):
    terms = v.truncated_powers()
    if any(s == 0 for _, s, _ in terms):
        raise ContractError("Piecewise polynomial is not continuous")
    return terms


def _empty_network(r_class: int = 1) -> Network:
    affines = [_affine(0, 1, []), _affine(1, 0, [])]
    return build_network(1, affines, [[]], r_class)


def pwlinear_to_relu(v: PiecewisePoly, exact_support: bool = False) -> Network:
    """
    Exact ReLU network for a continuous, compactly supported piecewise-linear v.

    Default form (depth 2): v(x) = Σ δ_i ρ(x − ξ_i) with the slope jumps δ_i.
    With exact_support the network is gated by the distance to [ξ_0, ξ_M]
    (depth 3) so that every x outside the support evaluates to exactly 0.
    """
    if v.degree > 1:
        raise ContractError(f"pwlinear_to_relu needs degree 1, got {v.degree}")
    if not v.continuous:
        raise ContractError("pwlinear_to_relu needs a continuous function")
    if v.is_zero:
        return _empty_network()
    if exact_support:
        return _gated_pwlinear(v)
    terms = _ramp_terms(v)
    n = len(terms)
    first = _affine(n, 1, [(i, 0, 1.0) for i in range(n)], [-xi for xi, _, _ in terms])
    second = _affine(1, n, [(0, i, a) for i, (_, _, a) in enumerate(terms)])
    return build_network(1, [first, second], [[True] * n])


def _split_signs(v: PiecewisePoly) -> tuple[np.ndarray, np.ndarray]:
    """Nodes refined at sign changes and the nodal values there."""
    nodes, values = [], []
    left, right = v.edge_values()
    for i in range(v.num_pieces):
        x0, x1 = v.breakpoints[i], v.breakpoints[i + 1]
        nodes.append(x0)
        values.append(left[i])
        if left[i] * right[i] < 0:
            root = x0 + (x1 - x0) * left[i] / (left[i] - right[i])
            nodes.append(root)
            values.append(0.0)
    nodes.append(v.breakpoints[-1])
    values.append(0.0)
    values[0] = 0.0
    return np.array(nodes), np.array(values)


def _gated_pwlinear(v: PiecewisePoly) -> Network:
    a, b = v.support()
    nodes, values = _split_signs(v)
    parts = []
    for sign in (1.0, -1.0):
        part = np.maximum(sign * values, 0.0)
        if np.any(part > 0):
            parts.append((sign, PiecewisePoly.linear_interpolant(nodes, part).truncated_powers()))
    knots = sorted({xi for _, terms in parts for xi, _, _ in terms})
    column = {xi: i for i, xi in enumerate(knots)}
    n = len(knots)
    gate_left, gate_right = n, n + 1
    first = _affine(n + 2, 1, [(i, 0, 1.0) for i in range(n)] + [(gate_left, 0, -1.0), (gate_right, 0, 1.0)],
                    [-xi for xi in knots] + [a, -b])
    triplets = []
    for row, (_, terms) in enumerate(parts):
        triplets += [(row, column[xi], coef) for xi, _, coef in terms]
        triplets += [(row, gate_left, -1.0), (row, gate_right, -1.0)]
    second = _affine(len(parts), n + 2, triplets)
    third = AffineMap.from_triplets(1, len(parts), [0] * len(parts), range(len(parts)),
                                    [sign for sign, _ in parts])
    return build_network(1, [first, second, third], [[True] * (n + 2), [True] * len(parts)])


def hat(a: float, peak: float, c: float, height: float = 1.0, exact_support: bool = False) -> Network:
    """Hat function rising from a to height at peak and back to 0 at c."""
    v = PiecewisePoly.linear_interpolant([a, peak, c], [0.0, height, 0.0])
    return pwlinear_to_relu(v, exact_support)


def trapezoid(a: float, a_in: float, b_in: float, b: float, exact_support: bool = True) -> Network:
    """1 on [a_in, b_in], 0 outside [a, b], linear in between."""
    if not a < a_in <= b_in < b:
        raise ParameterError(f"trapezoid needs a < a_in <= b_in < b, got {(a, a_in, b_in, b)}")
    nodes = [a, a_in, b_in, b] if a_in < b_in else [a, a_in, b]
    values = [0.0, 1.0, 1.0, 0.0] if a_in < b_in else [0.0, 1.0, 0.0]
    return pwlinear_to_relu(PiecewisePoly.linear_interpolant(nodes, values), exact_support)


# --- Splines with ReLU ---

def _clamped_ramps(a: float, b: float, knots) -> Network:
    """x ↦ (ρ(x̃ − ξ))_ξ with x̃ = clamp(x, a, b); both tails are exactly constant."""
    n = len(knots)
    first = _affine(1, 1, [(0, 0, -1.0)], [b])                 # h1 = ρ(b − x)
    second = _affine(1, 1, [(0, 0, -1.0)], [b - a])            # h2 = ρ(b − a − h1) = x̃ − a
    third = _affine(n, 1, [(i, 0, 1.0) for i in range(n)], [a - xi for xi in knots])
    out = _affine(n, n, [(i, i, 1.0) for i in range(n)])
    return build_network(1, [first, second, third, out], [[True], [True], [True] * n])


def spline_to_relu(v: PiecewisePoly, eps: float) -> Network:
    """
    ReLU network with sup |v − R(Φ)| ≤ ε on R.

    v = Σ a_i (x − ξ_i)_+^s over the clamped input; powers s ≥ 2 use mult_d_relu on s
    copies of the ramp. Left of the support the output is exactly 0, right of it a
    constant of size at most ε.
    """
    if not 0 < eps < 1:
        raise ParameterError(f"Accuracy must lie in (0, 1), got {eps}")
    if v.degree <= 1:
        return pwlinear_to_relu(v)
    if not v.continuous:
        raise ContractError("spline_to_relu needs a continuous spline")
    a, b = v.support()
    terms = [(xi, s, c) for xi, s, c in _ramp_terms(v) if xi < b]
    knots = sorted({xi for xi, _, _ in terms})
    column = {xi: i for i, xi in enumerate(knots)}
    n = len(knots)
    curved = sum(abs(c) for _, s, c in terms if s >= 2)
    eps_term = eps / curved if curved > 0 else eps

    pieces = []
    for xi, s, c in terms:
        i = column[xi]
        if s == 1:
            pieces.append(linear_network(_unit_row(n, i, c)))
            continue
        fan = linear_network(np.eye(n)[[i] * s])
        power = mult_d_relu(s, max(b - xi, 1e-12), min(eps_term, 0.5))
        pieces.append(calculus.scale(c, calculus.compose(fan, power)))
    combine = calculus.add_balanced(pieces)
    logger.debug("spline_to_relu: %d terms, eps %g, per-term eps %g", len(terms), eps, eps_term)
    return calculus.compose(_clamped_ramps(a, b, knots), combine)


def _unit_row(n: int, i: int, value: float) -> np.ndarray:
    row = np.zeros((1, n))
    row[0, i] = value
    return row


def boundary_margin(v: PiecewisePoly, tol: float, samples: int = 513) -> float:
    """Largest η = (b−a)/2^k with max |v| ≤ tol on [a, a+η] ∪ [b−η, b]."""
    a, b = v.support()
    eta = (b - a) / 4.0
    for _ in range(80):
        strip = np.concatenate([np.linspace(a, a + eta, samples), np.linspace(b - eta, b, samples)])
        if np.max(np.abs(v(strip))) <= tol:
            return eta
        eta /= 2.0
    raise ContractError("Spline does not vanish at the ends of its support")


def spline_to_relu_supported(v: PiecewisePoly, eps: float) -> Network:
    """
    ReLU network with sup |v − R(Φ)| ≤ ε that is exactly 0 outside supp(v).

    Piecewise-linear v uses the gated exact form. Otherwise the ε/3-approximation is
    multiplied by an exactly supported trapezoid mask, whose margin η keeps |v| ≤ ε/3
    where the mask is below 1.
    """
    if v.degree <= 1:
        return pwlinear_to_relu(v, exact_support=True)
    a, b = v.support()
    third = eps / 3.0
    core = spline_to_relu(v, third)
    eta = boundary_margin(v, third)
    mask = trapezoid(a, a + eta, b - eta, b, exact_support=True)
    K = max(1.0, v.sup_norm() + third)
    logger.debug("masked spline on [%g, %g]: margin %g, K %g", a, b, eta, K)
    return calculus.compose(calculus.tuple_(core, mask), mult2_relu(K, third))


# --- Splines with RePU ---

def relu_surrogate_repu2(h: float) -> Network:
    """(ρ₂(x+h) − ρ₂(x−h))/(4h): equals ρ(x) outside [-h, h], sup error h/4."""
    if not h > 0:
        raise ParameterError(f"Surrogate width must be positive, got {h}")
    first = _affine(2, 1, [(0, 0, 1.0), (1, 0, 1.0)], [h, -h])
    second = _affine(1, 2, [(0, 0, 1.0 / (4 * h)), (0, 1, -1.0 / (4 * h))])
    return build_network(1, [first, second], [[True, True]], r_class=2)


def kink_width(v: PiecewisePoly, eps: float) -> float:
    """
    Surrogate width h for the kinks of v, with (h/4)·Σ|slope jumps| ≤ ε.

    h never drops below 2R·√u (R: support length + 1, u: unit roundoff), where the
    cancellation error u·R²/h of the surrogate would exceed its kink error.
    """
    if not eps > 0:
        raise ParameterError(f"Accuracy must be positive, got {eps}")
    a, b = v.support()
    floor = 2.0 * (b - a + 1.0) * np.sqrt(np.finfo(float).eps)
    jumps = sum(abs(c) for _, s, c in _ramp_terms(v) if s == 1)
    if jumps == 0:
        return floor
    return min(0.25, max(4.0 * eps / jumps, floor))


def _truncated_power_repu2(xi: float, s: int, surrogate_width: float) -> Network:
    """(x − ξ)_+^s with ρ₂ neurons: s=1 via the surrogate, s=2 natively, s≥3 as ρ₂(z)·z^{s−2}."""
    if s == 1:
        return calculus.precompose_affine(relu_surrogate_repu2(surrogate_width), 1.0, [xi])
    if s == 2:
        first = _affine(1, 1, [(0, 0, 1.0)], [-xi])
        return build_network(1, [first, _affine(1, 1, [(0, 0, 1.0)])], [[True]], r_class=2)
    k = s - 1
    first = _affine(k, 1, [(i, 0, 1.0) for i in range(k)], [-xi] * k)
    out = _affine(k, k, [(i, i, 1.0) for i in range(k)])
    factors = build_network(1, [first, out], [[True] + [False] * (k - 1)], r_class=2)
    return calculus.compose(factors, mult_d_repu2(k))


def spline_to_repu2(v: PiecewisePoly, surrogate_width: float = 1e-6) -> Network:
    """
    RePU₂ network for a continuous compactly supported spline.

    The construction takes no accuracy parameter: splines whose pieces join with C¹
    smoothness are reproduced up to roundoff. Kinks (s = 1 truncated powers) have no
    exact ρ₂ form and use the surrogate of width `surrogate_width`.

    Right of the support the truncated powers cancel only up to roundoff of order
    u·(x − ξ)²; spline_to_repu2_supported removes that tail.
    """
    if not v.continuous:
        raise ContractError("spline_to_repu2 needs a continuous spline")
    if v.is_zero:
        return _empty_network(2)
    pieces = [calculus.scale(c, _truncated_power_repu2(xi, s, surrogate_width))
              for xi, s, c in _ramp_terms(v)]
    return calculus.add_balanced(pieces)


def right_gate_repu2(b: float) -> Network:
    """2ρ₂(b+1−x) − 4ρ₂(b+½−x) + 2ρ₂(b−x): 1 for x ≤ b, exactly 0 for x ≥ b + 1, C¹."""
    first = _affine(3, 1, [(i, 0, -1.0) for i in range(3)], [b + 1.0, b + 0.5, b])
    second = _affine(1, 3, [(0, 0, 2.0), (0, 1, -4.0), (0, 2, 2.0)])
    return build_network(1, [first, second], [[True] * 3], r_class=2)


def spline_to_repu2_supported(v: PiecewisePoly, surrogate_width: float = 1e-6) -> Network:
    """
    spline_to_repu2(v) times right_gate_repu2(b), multiplied exactly with mult2_repu2.

    Left of the support (left of a − h when v has a kink at a) every ramp is exactly 0,
    right of b + 1 the gate is; zero-annihilation makes the output exactly 0 in both
    tails. Where neither factor vanishes the ramp arguments stay below b − a + 1, so
    the cancellation error no longer grows with the distance to the support.
    """
    if not v.continuous:
        raise ContractError("spline_to_repu2 needs a continuous spline")
    if v.is_zero:
        return _empty_network(2)
    _, b = v.support()
    gated = calculus.tuple_(spline_to_repu2(v, surrogate_width), right_gate_repu2(b))
    return calculus.compose(gated, mult2_repu2())


def spline_network(v: PiecewisePoly, eps: float, r_class: int,
                   surrogate_width: Optional[float] = None) -> Network:
    """
    Factor network used by the compiler: exactly supported for ReLU, gated exact form for
    RePU₂ with the kink width taken from ε unless `surrogate_width` is given.
    """
    if r_class == 1:
        return spline_to_relu_supported(v, eps)
    if r_class == 2:
        h = surrogate_width if surrogate_width is not None else kink_width(v, eps)
        return spline_to_repu2_supported(v, h)
    raise ParameterError(f"No spline construction for r = {r_class}")
