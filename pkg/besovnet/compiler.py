"""
Besovnet compiler

Turns wavelet expansions into networks. Each ψ_λ is realized as a product of 1-D spline
factor networks (φ or ψ per axis), moved to its dyadic cell by an affine pre-composition
and scaled to L^p normalization; the N-term network is the coefficient-weighted sum.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from besovnet import calculus, gadgets
from besovnet.errors import ContractError, ParameterError
from besovnet.expansion import (BesovParams, CoeffMap, LambdaIndex, SampledField, besov_seminorm,
                                inv, renormalize)
from besovnet.network_ir import Network, eval as eval_net, linear_network, weight_count
from besovnet.reports import ApproximationRecord
from besovnet.wavelets1d import BiorthWaveletSystem

logger = logging.getLogger(__name__)

EVAL_CHUNK = 8192


@dataclass(frozen=True)
class CompileBudget:
    """
    Accuracy split for one wavelet network.

    δ = ε·max{1, ‖φ‖∞, ‖ψ‖∞}^{1−d}/(d·2^d) for the 1-D factors, η = S^{−d/p}·ε/2 for the
    product and K = max{‖φ‖∞, ‖ψ‖∞} + δ as its range bound.

    δ is further capped at ε·S^{−1/p} for d = 1 and at ε·S^{−d/p}/(2d·K^{d−1}) otherwise,
    so that d·K^{d−1}·δ + η ≤ ε·S^{−d/p} and the network meets ε in L^p.
    """
    N: int
    eps: float
    r_class: int
    K: float
    delta: float
    eta: float
    S: float
    d: int
    p: float

    @classmethod
    def for_system(cls, sys: BiorthWaveletSystem, eps: float, d: int, p: float,
                   r_class: int, N: int = 1) -> "CompileBudget":
        if r_class == 1 and not 0 < eps < 1:
            raise ParameterError(f"ReLU compilation needs 0 < eps < 1, got {eps}")
        if r_class not in (1, 2):
            raise ParameterError(f"r_class must be 1 or 2, got {r_class}")
        norms = max(sys.sup_norm_phi, sys.sup_norm_psi)
        delta = eps * max(1.0, norms) ** (1 - d) / (d * 2 ** d)
        shrink = sys.support_measure ** (-d * inv(p))
        # sup error e on the reference cell is an L^p error e·S^{d/p}
        if d == 1:
            delta = min(delta, eps * shrink)
        else:
            delta = min(delta, eps * shrink / (2 * d * (norms + delta) ** (d - 1)))
        eta = shrink * eps / 2.0
        return cls(N, eps, r_class, norms + delta, delta, eta, sys.support_measure, d, p)


@lru_cache(maxsize=256)
def base_network(sys: BiorthWaveletSystem, e: tuple, eps: float, p: float, r_class: int,
                 surrogate_width: Optional[float] = None) -> Network:
    """
    Network for ψ^e(y) = Π_i ψ^{e_i}(y_i) on the reference cell; cached per (e, ε, p, r).

    RePU₂ factors take their kink width from δ unless `surrogate_width` is given.
    """
    d = len(e)
    budget = CompileBudget.for_system(sys, eps, d, p, r_class)
    factors = [gadgets.spline_network(sys.factor(bit), budget.delta, r_class, surrogate_width) for bit in e]
    if d == 1:
        return factors[0]
    if r_class == 1:
        product = gadgets.mult_d_relu(d, budget.K, budget.eta)
    else:
        product = gadgets.mult_d_repu2(d)
    net = calculus.compose(calculus.parallel(*factors), product)
    logger.debug("base network e=%s r=%d: W=%d depth=%d (delta=%.3g eta=%.3g K=%.3g)",
                 e, r_class, weight_count(net), net.depth, budget.delta, budget.eta, budget.K)
    return net


def _place(net: Network, j: int, k, box, p: float) -> Network:
    """x ↦ 2^{jd/p} R(Φ)(2^j (x − a)/(b − a) − k)."""
    a, b = box
    d = net.input_dim
    dilation = 2.0 ** j / (b - a)
    shift = np.asarray(k, dtype=float) + dilation * a
    return calculus.scale(2.0 ** (j * d * inv(p)), calculus.precompose_affine(net, dilation, shift))


def wavelet_network(lam: LambdaIndex, sys: BiorthWaveletSystem, eps: float, p: float, r_class: int,
                    box=(0.0, 1.0), surrogate_width: Optional[float] = None) -> Network:
    """
    Network Φ_λ with ‖ψ_{λ,p} − R(Φ_λ)‖_p ≤ ε.

    ReLU networks vanish exactly outside supp ψ_λ.
    """
    return _place(base_network(sys, lam.e, eps, p, r_class, surrogate_width), lam.j, lam.k, box, p)


def scaling_network(k, j0: int, sys: BiorthWaveletSystem, eps: float, p: float, r_class: int,
                    box=(0.0, 1.0), surrogate_width: Optional[float] = None) -> Network:
    """The same construction for the scaling function φ_{j0,k} (e = 0)."""
    e = (0,) * len(k)
    return _place(base_network(sys, e, eps, p, r_class, surrogate_width), j0, k, box, p)


def select_epsilon(N: int, params: BesovParams) -> float:
    """ε = N^{−α/d}/2 for τ < 1, else N^{−α/d − 1/τ̄}/2."""
    exponent = params.alpha / params.d
    if params.tau >= 1:
        exponent += params.inv_tau_bar
    return 0.5 * max(N, 1) ** (-exponent)


def _zero_network(d: int, r_class: int) -> Network:
    return linear_network(np.zeros((1, d)), r_class=r_class)


def compile_expansion(c: CoeffMap, params: BesovParams, r_class: int,
                      sys: Optional[BiorthWaveletSystem] = None, eps: Optional[float] = None,
                      surrogate_width: Optional[float] = None) -> Network:
    """
    R(Φ) = Σ_λ c_{λ,p} R(Φ_λ) + the coarse scaling terms.

    Guarantees ‖f_N − R(Φ)‖_p ≤ ε·Σ|c_{λ,p}| on the unit box.

    Raises:
        ContractError: dimensions of c and params disagree.
    """
    if params.d != c.d:
        raise ContractError(f"Coefficients live in d={c.d}, parameters in d={params.d}")
    sys = sys or c.system()
    eps = select_epsilon(len(c), params) if eps is None else eps
    cp = renormalize(c, params.p) if c.p != params.p else c
    terms = [calculus.scale(v, wavelet_network(lam, sys, eps, params.p, r_class, cp.box, surrogate_width))
             for lam, v in cp.sorted_items() if v != 0.0]
    terms += [calculus.scale(v, scaling_network(k, cp.j0, sys, eps, params.p, r_class, cp.box, surrogate_width))
              for k, v in sorted(cp.coarse_entries.items()) if v != 0.0]
    if not terms:
        return _zero_network(c.d, r_class)
    net = calculus.add_balanced(terms)
    logger.info("Compiled N=%d (+%d coarse) r=%d eps=%.3g: W=%d depth=%d",
                len(c), len(cp.coarse_entries), r_class, eps, weight_count(net), net.depth)
    return net


def eval_on_grid(net: Network, like: SampledField, chunk: int = EVAL_CHUNK) -> SampledField:
    """R(Φ) at the grid nodes of `like`, evaluated in chunks."""
    points = like.points()
    out = np.empty(len(points))
    # bound the (chunk, width) activation arrays
    chunk = max(64, min(chunk, 2 ** 23 // max(1, max(net.widths))))
    for start in range(0, len(points), chunk):
        out[start:start + chunk] = eval_net(net, points[start:start + chunk])[:, 0]
    return SampledField(like.d, like.box, like.resolution, out.reshape(like.values.shape))


def coefficient_bound(N: int, params: BesovParams, seminorm: float) -> float:
    """2·|f|_B for τ < 1, 2·N^{1/τ̄}·|f|_B otherwise."""
    if params.tau < 1:
        return 2.0 * seminorm
    return 2.0 * N ** params.inv_tau_bar * seminorm


def compile_report(net: Network, c: CoeffMap, params: BesovParams, eps: float,
                   error_p: Optional[float] = None, budget_error: Optional[float] = None,
                   full: Optional[CoeffMap] = None) -> ApproximationRecord:
    """
    Bundle a compiled network with its budget figures.

    budget_error is the measured ‖f_N − R(Φ)‖_p; `full` is the untruncated expansion
    whose Besov seminorm bounds the coefficient sum.
    """
    cp = renormalize(c, params.p) if c.p != params.p else c
    a, b = cp.box
    coef_sum = cp.coefficient_sum()
    bound = eps * coef_sum * (b - a) ** (c.d * inv(params.p))
    record = dict(N=len(c), weights=weight_count(net), depth=net.depth, epsilon=eps, error_p=error_p,
                  r_class=net.r_class, coefficient_sum=coef_sum, budget_bound=bound,
                  budget_error=budget_error)
    if budget_error is not None:
        record['budget_ok'] = bool(budget_error <= bound * (1 + 1e-9) + 1e-14)
    if full is not None:
        limit = coefficient_bound(len(c), params, besov_seminorm(full, params))
        record['coefficient_bound'] = limit
        record['coefficient_bound_ok'] = bool(cp.coefficient_sum(include_coarse=False) <= limit * (1 + 1e-12))
    return ApproximationRecord(**record)


def is_exactly_zero_outside(net: Network, points: np.ndarray) -> bool:
    """True when R(Φ) is exactly 0.0 at every given point."""
    if len(points) == 0:
        return True
    return bool(np.all(eval_net(net, points) == 0.0))
