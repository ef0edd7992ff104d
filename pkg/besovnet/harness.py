"""
Besovnet harness

Besov-calibrated test targets, budget sweeps over N, rate fits and report files.
"""

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from itertools import product
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from besovnet import gadgets
from besovnet.compiler import compile_expansion, compile_report, eval_on_grid, select_epsilon
from besovnet.errors import ContractError, ParameterError
from besovnet.expansion import (BesovParams, CoeffMap, LambdaIndex, SampledField, analyze,
                                besov_seminorm, evaluate_expansion, lp_error, modulus_seminorm,
                                n_term_select)
from besovnet.network_ir import eval as eval_net, weight_count
from besovnet.reports import (ApproximationRecord, GadgetRecord, GadgetReport, RateFit, RateReport)
from besovnet.wavelets1d import BiorthWaveletSystem, cdf_system

logger = logging.getLogger(__name__)

TARGET_KINDS = ('random_series', 'cusp', 'spline_bump')


@dataclass(frozen=True)
class TargetSpec:
    """A reproducible test function on [a, b]^d sampled at 2^J nodes per axis."""
    kind: str
    d: int
    params: BesovParams
    seed: int = 0
    box: tuple[float, float] = (0.0, 1.0)
    J: int = 12
    j0: int = 2
    wavelet: tuple[int, int] = (3, 3)
    # random_series: ⌈2^{jdθ}⌉ active coefficients at level j
    theta: float = 0.5
    center: Optional[tuple[float, ...]] = None
    radius: float = 0.3
    beta: float = 1.5
    bumps: int = 3

    def __post_init__(self):
        if self.kind not in TARGET_KINDS:
            raise ParameterError(f"Unknown target kind {self.kind!r}; expected one of {TARGET_KINDS}")
        if self.params.d != self.d:
            raise ContractError(f"Target is {self.d}-dimensional, parameters are for d={self.params.d}")
        if not 0 <= self.j0 < self.J:
            raise ParameterError(f"Need 0 <= j0 < J, got j0={self.j0}, J={self.J}")
        if not 0 <= self.theta <= 1:
            raise ParameterError(f"theta must lie in [0, 1], got {self.theta}")

    def echo(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != 'params'}
        out.update({f'params.{k}': ('inf' if isinstance(v, float) and math.isinf(v) else v)
                    for k, v in asdict(self.params).items()})
        return {k: (str(v) if isinstance(v, (tuple, list)) else v) for k, v in out.items()}


@dataclass
class Target:
    grid: SampledField
    coeffs: CoeffMap
    seminorms: dict = field(default_factory=dict)


def _interior_positions(sys: BiorthWaveletSystem, j: int, J: int, d: int) -> list[tuple[int, ...]]:
    """Translations k whose tensor support at level j stays clear of the boundary margin."""
    lo = min(sys.phi_pp.support()[0], sys.psi_pp.support()[0])
    hi = max(sys.phi_pp.support()[1], sys.psi_pp.support()[1])
    margin = 2.0 * (sys.filter_span + sys.L) * 2.0 ** (-J)
    ks = [k for k in range(-int(hi) - 1, 2 ** j + 1)
          if (k + lo) / 2 ** j >= margin and (k + hi) / 2 ** j <= 1 - margin]
    return list(product(ks, repeat=d))


def _random_series(spec: TargetSpec, sys: BiorthWaveletSystem) -> Target:
    rng = np.random.default_rng(spec.seed)
    params = spec.params
    d = spec.d
    subbands = [e for e in product((0, 1), repeat=d) if any(e)]
    entries = {}
    levels = 0
    for j in range(spec.j0, spec.J):
        positions = _interior_positions(sys, j, spec.J, d)
        if not positions:
            continue
        candidates = [(e, k) for e in subbands for k in positions]
        count = min(len(candidates), math.ceil(2 ** (j * d * spec.theta)))
        picks = rng.choice(len(candidates), size=count, replace=False)
        signs = rng.choice([-1.0, 1.0], size=count)
        # each level has ℓ^τ mass 2^{-jα}
        magnitude = 2.0 ** (-j * params.alpha) * count ** (-1.0 / params.tau)
        for pick, sign in zip(sorted(picks), signs):
            e, k = candidates[pick]
            entries[LambdaIndex(j, e, k)] = sign * magnitude
        levels += 1
    if not levels:
        raise ContractError(f"No interior wavelets fit between levels {spec.j0} and {spec.J}")
    coeffs = CoeffMap(d, params.tau, entries, spec.j0, spec.J, {}, spec.box, (sys.L, sys.L_dual))
    reference = evaluate_expansion(coeffs, sys, 2 ** spec.J)
    closed_form = levels ** (1.0 / params.q) if not math.isinf(params.q) else 1.0
    seminorms = {'besov': besov_seminorm(coeffs, params), 'closed_form': closed_form}
    logger.debug("random_series: %d levels, %d coefficients", levels, len(entries))
    return Target(reference, coeffs, seminorms)


def _cusp(spec: TargetSpec, sys: BiorthWaveletSystem) -> Target:
    a, b = spec.box
    center = np.asarray(spec.center if spec.center is not None else [(a + b) / 2.0] * spec.d)
    radius = spec.radius * (b - a)

    def cusp(X):
        dist = np.linalg.norm(X - center, axis=1) / radius
        return np.maximum(0.0, 1.0 - dist) ** spec.beta

    f = SampledField.sample(cusp, spec.d, spec.box, spec.J)
    coeffs = analyze(f, sys, spec.j0)
    p = spec.params
    seminorms = {'besov': besov_seminorm(coeffs, p), 'modulus': modulus_seminorm(f, p.alpha, p.q, p.tau)}
    return Target(f, coeffs, seminorms)


def _spline_bump(spec: TargetSpec, sys: BiorthWaveletSystem) -> Target:
    rng = np.random.default_rng(spec.seed)
    positions = _interior_positions(sys, spec.j0, spec.J, spec.d)
    if not positions:
        raise ContractError(f"No interior scaling functions at level {spec.j0}")
    count = min(spec.bumps, len(positions))
    picks = sorted(rng.choice(len(positions), size=count, replace=False))
    amplitudes = rng.uniform(0.5, 1.0, size=count) * rng.choice([-1.0, 1.0], size=count)
    coarse = {positions[i]: float(v) for i, v in zip(picks, amplitudes)}
    coeffs = CoeffMap(spec.d, 2.0, {}, spec.j0, spec.J, coarse, spec.box, (sys.L, sys.L_dual))
    f = evaluate_expansion(coeffs, sys, 2 ** spec.J)
    return Target(f, coeffs, {'besov': 0.0})


def generate_target(spec: TargetSpec) -> tuple[SampledField, CoeffMap, dict]:
    """
    Sample a target and its expansion.

    random_series places ⌈2^{jdθ}⌉ coefficients at random interior positions per level
    with level ℓ^τ mass 2^{-jα}, so its seminorm is (#levels)^{1/q}. cusp samples
    max{0, 1 − ‖x − x₀‖/r}^β; spline_bump sums a few scaling functions at level j0.
    """
    sys = cdf_system(*spec.wavelet)
    builders = {'random_series': _random_series, 'cusp': _cusp, 'spline_bump': _spline_bump}
    target = builders[spec.kind](spec, sys)
    logger.info("Generated %s target d=%d seed=%d: %d coefficients",
                spec.kind, spec.d, spec.seed, len(target.coeffs))
    return target.grid, target.coeffs, target.seminorms


# --- Fits ---

def fit_rate(x: Sequence[float], y: Sequence[float], drop: int = 2,
             rate: Optional[float] = None) -> RateFit:
    """
    Least squares of log y on log x after dropping the `drop` smallest x.

    With `rate` = α/d also fits error ≈ C·x^{-rate}(1 + log x)^{rate} and reports the
    C of every point and their max/min ratio.
    """
    pairs = sorted((float(a), float(b)) for a, b in zip(x, y) if a > 0 and b > 0)
    used = pairs[drop:]
    if len(used) < 2:
        raise ContractError(f"Need at least 2 positive points after dropping {drop}, got {len(used)}")
    if len(used) < 3:
        warnings.warn("Rate fit on fewer than 3 points", RuntimeWarning)
        logger.warning("Rate fit on %d points only", len(used))
    lx = np.log([a for a, _ in used])
    ly = np.log([b for _, b in used])
    fit = stats.linregress(lx, ly)
    out = RateFit(slope=float(fit.slope), stderr=float(fit.stderr), intercept=float(fit.intercept),
                  r_squared=float(fit.rvalue ** 2), dropped=drop)
    if rate is not None:
        constants = [b / (a ** (-rate) * (1.0 + math.log(a)) ** rate) for a, b in used]
        out.log_corrected_constants = constants
        out.log_corrected_ratio = max(constants) / min(constants)
    return out


def budget_check(record: ApproximationRecord) -> dict[str, Optional[bool]]:
    """The error-budget and coefficient-sum inequalities of one compile."""
    return {'budget_ok': record.budget_ok, 'coefficient_bound_ok': record.coefficient_bound_ok}


# --- Sweeps ---

def rate_sweep(spec: TargetSpec, Ns: Sequence[int], r_class: int, p: Optional[float] = None,
               drop: int = 2, surrogate_width: Optional[float] = None) -> RateReport:
    """
    For each N: keep the N largest coefficients, compile, and measure the L^p error of
    the network against the target grid.
    """
    Ns = sorted(int(n) for n in Ns)
    if any(n <= 0 for n in Ns):
        raise ParameterError(f"N values must be positive, got {Ns}")
    params = spec.params if p is None else BesovParams(spec.params.alpha, spec.params.tau,
                                                      spec.params.q, p, spec.d)
    f, coeffs, seminorms = generate_target(spec)
    sys = cdf_system(*spec.wavelet)
    rows = []
    for N in Ns:
        selected = n_term_select(coeffs, N, params.p)
        eps = select_epsilon(len(selected), params)
        net = compile_expansion(selected, params, r_class, sys, eps, surrogate_width)
        approx = eval_on_grid(net, f)
        error = lp_error(f, approx, params.p)
        budget_error = lp_error(evaluate_expansion(selected, sys, f.resolution), approx, params.p)
        record = compile_report(net, selected, params, eps, error, budget_error, full=coeffs)
        rows.append(record)
        logger.info("N=%d W=%d depth=%d eps=%.3g error=%.3e budget_ok=%s",
                    record.N, record.weights, record.depth, eps, error, record.budget_ok)
    fit = None
    usable = [r for r in rows if r.error_p and r.error_p > 0]
    if len(usable) - drop >= 2:
        fit = fit_rate([r.weights for r in usable], [r.error_p for r in usable], drop,
                       rate=params.alpha / params.d)
    else:
        warnings.warn("Too few sweep points for a rate fit", RuntimeWarning)
        logger.warning("Skipping rate fit: %d usable points, %d dropped", len(usable), drop)
    config = spec.echo()
    config.update({'r_class': r_class, 'p': 'inf' if math.isinf(params.p) else params.p, 'drop': drop,
                   **{f'seminorm.{k}': v for k, v in seminorms.items()}})
    return RateReport(rows=rows, fitted_slope=fit.slope if fit else None,
                      slope_stderr=fit.stderr if fit else None, fit=fit, config=config)


def _square_error(m: int, grid: int) -> float:
    x = np.linspace(0.0, 1.0, grid)
    return float(np.max(np.abs(x ** 2 - eval_net(gadgets.square_unit(m), x[:, None])[:, 0])))


def _mult2_error(K: float, eps: float, grid: int) -> tuple[int, int, float]:
    net = gadgets.mult2_relu(K, eps)
    axis = np.linspace(-K, K, grid)
    X = np.stack(np.meshgrid(axis, axis, indexing='ij'), axis=-1).reshape(-1, 2)
    error = float(np.max(np.abs(X[:, 0] * X[:, 1] - eval_net(net, X)[:, 0])))
    return weight_count(net), net.depth, error


def _multd_repu_error(d: int, seed: int, samples: int = 10_000) -> tuple[int, int, float, bool]:
    net = gadgets.mult_d_repu2(d)
    X = np.random.default_rng(seed).uniform(-10.0, 10.0, size=(samples, d))
    exact = np.prod(X, axis=1)
    relative = np.abs(eval_net(net, X)[:, 0] - exact) / np.maximum(np.abs(exact), 1e-300)
    bound = gadgets.MULT_REPU2_ERROR_FACTOR * np.finfo(float).eps * gadgets.mult_d_repu2_condition(X)
    return weight_count(net), net.depth, float(np.max(relative)), bool(np.all(relative <= bound))


def gadget_sweep(kind: str, eps_list: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4), K: float = 1.0,
                 dims: Sequence[int] = (2, 3, 4, 8, 16), grid: int = 129, seed: int = 0) -> GadgetReport:
    """
    Weights, depth and measured error of a multiplication gadget.

    square and mult2 sweep the accuracy and fit weights against log(1/ε); multd-repu
    sweeps the dimension and fits weights against d (relative error on [-10, 10]^d).
    """
    rows = []
    if kind == 'square':
        for eps in eps_list:
            m = max(1, math.ceil((math.log2(1.0 / eps) - 2) / 2))
            net = gadgets.square_unit(m)
            rows.append(GadgetRecord(kind=kind, epsilon=eps, parameter=m, weights=weight_count(net),
                                     depth=net.depth, error=_square_error(m, grid)))
    elif kind == 'mult2':
        for eps in eps_list:
            w, depth, error = _mult2_error(K, eps, grid)
            rows.append(GadgetRecord(kind=kind, epsilon=eps, parameter=K, weights=w, depth=depth, error=error))
    elif kind == 'multd-repu':
        for d in dims:
            w, depth, error, bound_ok = _multd_repu_error(d, seed)
            rows.append(GadgetRecord(kind=kind, epsilon=0.0, parameter=d, weights=w, depth=depth, error=error,
                                     bound_ok=bound_ok))
    else:
        raise ParameterError(f"Unknown gadget {kind!r}; expected mult2, square or multd-repu")
    for row in rows:
        logger.info("%s eps=%g param=%g: W=%d depth=%d error=%.3e",
                    kind, row.epsilon, row.parameter, row.weights, row.depth, row.error)
    xs = [r.parameter if kind == 'multd-repu' else math.log(1.0 / r.epsilon) for r in rows]
    report = GadgetReport(kind=kind, rows=rows, config={'K': K, 'grid': grid, 'seed': seed})
    if len(set(xs)) >= 2:
        fit = stats.linregress(xs, [r.weights for r in rows])
        report.log_slope = float(fit.slope)
        report.r_squared = float(fit.rvalue ** 2)
    return report


# --- Output ---

def report_frame(report: Union[RateReport, GadgetReport]) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in report.rows])


def emit(report: Union[RateReport, GadgetReport], path, fmt: str = 'csv') -> Path:
    """
    Write a report as CSV (config echoed in `#` header lines) or JSON.

    Raises:
        OSError: The file cannot be written; the message carries the path.
    """
    path = Path(path)
    if fmt not in ('csv', 'json'):
        raise ParameterError(f"Unknown report format {fmt!r}")
    try:
        if fmt == 'json':
            path.write_text(report.model_dump_json(indent=2) + '\n')
            return path
        header = dict(report.config)
        if isinstance(report, RateReport) and report.fit is not None:
            header.update({'fitted_slope': report.fit.slope, 'slope_stderr': report.fit.stderr,
                           'r_squared': report.fit.r_squared, 'dropped': report.fit.dropped})
        if isinstance(report, GadgetReport):
            header.update({'log_slope': report.log_slope, 'r_squared': report.r_squared})
        with open(path, 'w', newline='') as f:
            for key in sorted(header):
                f.write(f"# {key}: {header[key]}\n")
            report_frame(report).to_csv(f, index=False, float_format='%.17g', lineterminator='\n')
    except OSError as e:
        raise OSError(f"Cannot write report to {path}: {e}") from e
    logger.info("Wrote %s report to %s", fmt, path)
    return path


def read_report_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, comment='#')
