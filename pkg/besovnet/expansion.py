"""
Besovnet expansion

Tensor-product wavelet analysis and synthesis on the box [a, b]^d, coefficient
renormalization, Besov seminorms and N-term selection.

The expansion is computed in unit-cube coordinates u = (x − a)/(b − a). Grid node
i ∈ {0, …, 2^J − 1} sits at u = i·2^{-J}; the fine-level coefficient c_{J,n} is
initialized from the node i = n + s, where s is the system's sample shift.
"""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd
from scipy import signal

from besovnet.errors import ContractError, ParameterError, StructureError
from besovnet.wavelets1d import BiorthWaveletSystem, Mask, cdf_system

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
MARGIN_TOL = 1e-12


def inv(p: float) -> float:
    """1/p with 1/∞ := 0."""
    return 0.0 if math.isinf(p) else 1.0 / p


# --- Types ---

@dataclass(frozen=True, order=True)
class LambdaIndex:
    """Wavelet index λ = (e, j, k); ordered by (j, e, k)."""
    j: int
    e: tuple[int, ...]
    k: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'e', tuple(int(v) for v in self.e))
        object.__setattr__(self, 'k', tuple(int(v) for v in self.k))
        if len(self.e) != len(self.k):
            raise StructureError(f"e has {len(self.e)} entries, k has {len(self.k)}")
        if not any(self.e) or any(v not in (0, 1) for v in self.e):
            raise StructureError(f"e must be a nonzero element of {{0,1}}^d, got {self.e}")

    @property
    def d(self) -> int:
        return len(self.e)

    @property
    def level(self) -> int:
        return self.j


@dataclass(eq=False)
class CoeffMap:
    """Sparse wavelet coefficients λ ↦ c_{λ,p} plus the scaling coefficients at level j0."""
    d: int
    p: float
    entries: dict
    j0: int
    J: int
    coarse_entries: dict = field(default_factory=dict)
    box: tuple[float, float] = (0.0, 1.0)
    wavelet: Optional[tuple[int, int]] = None

    def __post_init__(self):
        for lam, value in self.entries.items():
            if not math.isfinite(value):
                raise ContractError(f"Coefficient at {lam} is not finite")
            if not self.j0 <= lam.j <= self.J:
                raise ContractError(f"Level {lam.j} of {lam} outside [{self.j0}, {self.J}]")
        for k, value in self.coarse_entries.items():
            if not math.isfinite(value):
                raise ContractError(f"Coarse coefficient at {k} is not finite")

    def __len__(self) -> int:
        return len(self.entries)

    def levels(self) -> list[int]:
        return sorted({lam.j for lam in self.entries})

    def sorted_items(self) -> list[tuple[LambdaIndex, float]]:
        return sorted(self.entries.items())

    def copy_with(self, **changes) -> "CoeffMap":
        return replace(self, **changes)

    def system(self) -> BiorthWaveletSystem:
        if self.wavelet is None:
            raise ContractError("CoeffMap does not record its wavelet system")
        return cdf_system(*self.wavelet)

    def coefficient_sum(self, include_coarse: bool = True) -> float:
        total = sum(abs(v) for v in self.entries.values())
        if include_coarse:
            total += sum(abs(v) for v in self.coarse_entries.values())
        return float(total)


@dataclass(frozen=True, eq=False)
class SampledField:
    """Values of a function on the 2^J-per-axis node grid of [a, b]^d."""
    d: int
    box: tuple[float, float]
    resolution: int
    values: np.ndarray

    def __post_init__(self):
        R = int(self.resolution)
        if R < 1 or R & (R - 1):
            raise StructureError(f"Resolution must be a power of two, got {R}")
        a, b = (float(v) for v in self.box)
        if not a < b:
            raise StructureError(f"Empty box [{a}, {b}]")
        values = np.asarray(self.values, dtype=float)
        if values.shape != (R,) * self.d:
            raise StructureError(f"Values of shape {values.shape} do not match ({R},)*{self.d}")
        if not np.all(np.isfinite(values)):
            raise StructureError("Field values must be finite")
        object.__setattr__(self, 'box', (a, b))
        object.__setattr__(self, 'values', values)

    @property
    def J(self) -> int:
        return self.resolution.bit_length() - 1

    @property
    def spacing(self) -> float:
        return (self.box[1] - self.box[0]) / self.resolution

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.d

    def axis(self) -> np.ndarray:
        return self.box[0] + self.spacing * np.arange(self.resolution)

    def points(self) -> np.ndarray:
        """Grid nodes as an (R^d, d) array in row-major order."""
        mesh = np.meshgrid(*([self.axis()] * self.d), indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=1)

    @classmethod
    def sample(cls, f: Callable[[np.ndarray], np.ndarray], d: int, box, J: int) -> "SampledField":
        """Evaluate f (taking an (n, d) batch) on the grid."""
        empty = cls(d, box, 2 ** J, np.zeros((2 ** J,) * d))
        values = np.asarray(f(empty.points()), dtype=float).reshape((2 ** J,) * d)
        return cls(d, box, 2 ** J, values)

    @classmethod
    def zeros_like(cls, other: "SampledField") -> "SampledField":
        return cls(other.d, other.box, other.resolution, np.zeros_like(other.values))


@dataclass(frozen=True)
class BesovParams:
    """Smoothness α of B^α_q(L^τ) with target norm L^p in dimension d."""
    alpha: float
    tau: float
    q: float
    p: float
    d: int

    def __post_init__(self):
        if self.alpha <= 0:
            raise ContractError(f"Smoothness must be positive, got alpha={self.alpha}")
        if min(self.tau, self.q, self.p) <= 0:
            raise ContractError("tau, q and p must be positive")
        if self.d < 1:
            raise ContractError(f"Dimension must be >= 1, got {self.d}")
        if self.alpha / self.d < inv(self.tau) - inv(self.p) - 1e-12:
            raise ContractError(
                f"alpha/d >= 1/tau - 1/p violated: {self.alpha / self.d:.6g} < "
                f"{inv(self.tau) - inv(self.p):.6g}")
        if not (self.q <= self.tau * (1 + 1e-12) and self.tau <= self.p * (1 + 1e-12)):
            raise ContractError(f"0 < q <= tau <= p violated: q={self.q}, tau={self.tau}, p={self.p}")

    @classmethod
    def critical(cls, alpha: float, p: float, d: int) -> "BesovParams":
        """The critical embedding line 1/τ = α/d + 1/p with q = τ."""
        tau = 1.0 / (alpha / d + inv(p))
        return cls(alpha, tau, tau, p, d)

    @property
    def inv_tau_bar(self) -> float:
        """1/τ̄ with 1/τ + 1/τ̄ = 1 (0 when τ < 1)."""
        return max(0.0, 1.0 - inv(self.tau))

    @property
    def alpha_star(self) -> float:
        return self.d * (inv(self.tau) - inv(self.p))


# --- Filter banks ---

@dataclass(frozen=True, eq=False)
class _Band:
    values: np.ndarray
    offset: tuple[int, ...]


def _conv_axis(values: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    shape = [1] * values.ndim
    shape[axis] = len(kernel)
    return signal.convolve(values, kernel.reshape(shape), mode='full', method='direct')


def _take_axis(values, axis, sl):
    index = [slice(None)] * values.ndim
    index[axis] = sl
    return values[tuple(index)]


def _analysis_axis(band: _Band, mask: Mask, axis: int) -> _Band:
    """a_k = Σ_n m_{n−2k} c_n / √2 along one axis."""
    y = _conv_axis(band.values, mask.coeffs[::-1], axis)
    y_off = band.offset[axis] - mask.last
    start = y_off + (y_off % 2)
    offset = list(band.offset)
    offset[axis] = start // 2
    return _Band(_take_axis(y, axis, slice(start - y_off, None, 2)) / SQRT2, tuple(offset))


def _synthesis_axis(band: _Band, mask: Mask, axis: int) -> _Band:
    """c_n = Σ_k m_{n−2k} a_k / √2 along one axis."""
    n = band.values.shape[axis]
    shape = list(band.values.shape)
    shape[axis] = 2 * n - 1
    up = np.zeros(shape)
    index = [slice(None)] * up.ndim
    index[axis] = slice(0, None, 2)
    up[tuple(index)] = band.values
    offset = list(band.offset)
    offset[axis] = 2 * band.offset[axis] + mask.offset
    return _Band(_conv_axis(up, mask.coeffs, axis) / SQRT2, tuple(offset))


def _add_bands(x: _Band, y: _Band) -> _Band:
    lo = [min(a, b) for a, b in zip(x.offset, y.offset)]
    hi = [max(a + s, b + t) for a, b, s, t in zip(x.offset, y.offset, x.values.shape, y.values.shape)]
    out = np.zeros([h - l for l, h in zip(lo, hi)])
    for band in (x, y):
        index = tuple(slice(o - l, o - l + s) for o, l, s in zip(band.offset, lo, band.values.shape))
        out[index] += band.values
    return _Band(out, tuple(lo))


def _crop(band: _Band, lo: int, size: int) -> np.ndarray:
    d = band.values.ndim
    out = np.zeros((size,) * d)
    src, dst = [], []
    for o, s in zip(band.offset, band.values.shape):
        first, last = max(lo, o), min(lo + size, o + s)
        if first >= last:
            return out
        src.append(slice(first - o, last - o))
        dst.append(slice(first - lo, last - lo))
    out[tuple(dst)] = band.values[tuple(src)]
    return out


def _analysis_level(c: _Band, sys: BiorthWaveletSystem) -> dict[tuple, _Band]:
    bands = {(): c}
    for axis in range(c.values.ndim):
        split = {}
        for e, band in bands.items():
            split[e + (0,)] = _analysis_axis(band, sys.h_dual, axis)
            split[e + (1,)] = _analysis_axis(band, sys.g_dual, axis)
        bands = split
    return bands


def _synthesis_band(band: _Band, e: tuple, sys: BiorthWaveletSystem) -> _Band:
    for axis, bit in enumerate(e):
        band = _synthesis_axis(band, sys.g if bit else sys.h, axis)
    return band


def _dense_band(items, d: int) -> _Band:
    ks = np.array([k for k, _ in items], dtype=np.int64).reshape(-1, d)
    lo = ks.min(axis=0)
    values = np.zeros(tuple(ks.max(axis=0) - lo + 1))
    values[tuple((ks - lo).T)] = [v for _, v in items]
    return _Band(values, tuple(int(v) for v in lo))


def _check_margin(f: SampledField, sys: BiorthWaveletSystem):
    width = min(sys.filter_span, f.resolution // 2)
    scale = max(1.0, float(np.max(np.abs(f.values))))
    for axis in range(f.d):
        for sl in (slice(0, width), slice(f.resolution - width, None)):
            edge = np.max(np.abs(_take_axis(f.values, axis, sl)))
            if edge > MARGIN_TOL * scale:
                raise ContractError(
                    f"Field is nonzero ({edge:.3e}) within {width} cells of the boundary along axis {axis}")


# --- Analysis / synthesis ---

def analyze(f: SampledField, sys: BiorthWaveletSystem, j0: int, tol: float = 0.0) -> CoeffMap:
    """
    Fast wavelet transform from the grid level J down to j0.

    Coefficients are L²-normalized (p = 2); entries with |c| <= tol are not stored.

    Raises:
        ContractError: f does not vanish near the boundary of the box.
        ParameterError: j0 is negative or above the grid level.
    """
    J, d = f.J, f.d
    if not 0 <= j0 <= J:
        raise ParameterError(f"Coarse level must lie in [0, {J}], got {j0}")
    _check_margin(f, sys)
    s = sys.sample_shift
    c = _Band(f.values * 2.0 ** (-J * d / 2.0), (-s,) * d)
    entries = {}
    for j in range(J, j0, -1):
        bands = _analysis_level(c, sys)
        for e, band in bands.items():
            if not any(e):
                continue
            for idx in np.argwhere(np.abs(band.values) > tol):
                k = tuple(int(i) + o for i, o in zip(idx, band.offset))
                entries[LambdaIndex(j - 1, e, k)] = float(band.values[tuple(idx)])
        c = bands[(0,) * d]
    coarse = {tuple(int(i) + o for i, o in zip(idx, c.offset)): float(c.values[tuple(idx)])
              for idx in np.argwhere(np.abs(c.values) > tol)}
    logger.debug("analyze: d=%d J=%d j0=%d -> %d details, %d coarse", d, J, j0, len(entries), len(coarse))
    return CoeffMap(d, 2.0, entries, j0, J, coarse, f.box, (sys.L, sys.L_dual))


def _fine_band(c: CoeffMap, sys: BiorthWaveletSystem, resolution: Optional[int]) -> tuple[_Band, int]:
    resolution = 2 ** c.J if resolution is None else int(resolution)
    J_out = resolution.bit_length() - 1
    if resolution < 1 or resolution & (resolution - 1) or J_out < c.J:
        raise ContractError(f"Resolution {resolution} is below the finest level 2^{c.J} or not a power of two")
    if c.p != 2.0:
        c = renormalize(c, 2.0)
    d = c.d
    grouped = defaultdict(list)
    for lam, v in c.entries.items():
        grouped[(lam.j, lam.e)].append((lam.k, v))
    if c.coarse_entries:
        band = _dense_band(list(c.coarse_entries.items()), d)
    else:
        band = _Band(np.zeros((1,) * d), (0,) * d)
    zero = (0,) * d
    for j in range(c.j0, J_out):
        total = _synthesis_band(band, zero, sys)
        for e in product((0, 1), repeat=d):
            if any(e) and (j, e) in grouped:
                total = _add_bands(total, _synthesis_band(_dense_band(grouped[(j, e)], d), e, sys))
        band = total
    return band, resolution


def synthesize(c: CoeffMap, sys: BiorthWaveletSystem, resolution: Optional[int] = None) -> SampledField:
    """
    Inverse transform onto the grid of the given resolution (default 2^J).

    Grid values are 2^{Jd/2} c_{J,n} at node n + s, the exact inverse of `analyze`.

    Raises:
        ContractError: resolution is not a power of two at or above 2^J.
    """
    band, resolution = _fine_band(c, sys, resolution)
    J_out = resolution.bit_length() - 1
    values = _crop(band, -sys.sample_shift, resolution) * 2.0 ** (J_out * c.d / 2.0)
    return SampledField(c.d, c.box, resolution, values)


def evaluate_expansion(c: CoeffMap, sys: BiorthWaveletSystem, resolution: Optional[int] = None) -> SampledField:
    """
    Point values of Σ c_λ ψ_λ at the grid nodes.

    Applies the samples φ(0), …, φ(L) along every axis to the fine coefficients; for
    L = 2 this coincides with `synthesize`.
    """
    band, resolution = _fine_band(c, sys, resolution)
    J_out = resolution.bit_length() - 1
    taps = sys.phi_pp(np.arange(sys.L + 1, dtype=float))
    for axis in range(c.d):
        band = _Band(_conv_axis(band.values, taps, axis), band.offset)
    values = _crop(band, 0, resolution) * 2.0 ** (J_out * c.d / 2.0)
    return SampledField(c.d, c.box, resolution, values)


# --- Normalization and norms ---

def renormalize(c: CoeffMap, to_p: float) -> CoeffMap:
    """c_{λ,to} = 2^{−jd(1/to − 1/from)} c_{λ,from}; coarse entries use j0."""
    if to_p == c.p:
        return c.copy_with(entries=dict(c.entries), coarse_entries=dict(c.coarse_entries))
    exponent = -c.d * (inv(to_p) - inv(c.p))
    entries = {lam: v * 2.0 ** (lam.j * exponent) for lam, v in c.entries.items()}
    factor = 2.0 ** (c.j0 * exponent)
    coarse = {k: v * factor for k, v in c.coarse_entries.items()}
    return c.copy_with(p=to_p, entries=entries, coarse_entries=coarse)


def level_energy(c: CoeffMap, tau: Optional[float] = None) -> dict[int, float]:
    """Per-level masses Σ_{λ∈∇_j} |c_{λ,τ}|^τ (max |c| for τ = ∞)."""
    tau = c.p if tau is None else tau
    c = renormalize(c, tau) if tau != c.p else c
    masses: dict[int, float] = defaultdict(float)
    for lam, v in c.entries.items():
        if math.isinf(tau):
            masses[lam.j] = max(masses[lam.j], abs(v))
        else:
            masses[lam.j] += abs(v) ** tau
    return dict(sorted(masses.items()))


def besov_seminorm(c: CoeffMap, params: BesovParams) -> float:
    """(Σ_j 2^{jαq} (Σ_{λ∈∇_j} |c_{λ,τ}|^τ)^{q/τ})^{1/q} over the stored detail levels."""
    masses = level_energy(c, params.tau)
    if not masses:
        return 0.0
    tau, q, alpha = params.tau, params.q, params.alpha
    per_level = {j: 2.0 ** (j * alpha) * (m if math.isinf(tau) else m ** (1.0 / tau))
                 for j, m in masses.items()}
    if math.isinf(q):
        return float(max(per_level.values()))
    return float(sum(v ** q for v in per_level.values()) ** (1.0 / q))


def coarse_projection(c: CoeffMap) -> CoeffMap:
    return c.copy_with(entries={}, coarse_entries=dict(c.coarse_entries))


def _difference_norm(values: np.ndarray, step: tuple[int, ...], m: int, p: float, vol: float) -> float:
    R = values.shape[0]
    bounds = []
    for st in step:
        lo, hi = (0, R - m * st) if st >= 0 else (-m * st, R)
        if lo >= hi:
            return 0.0
        bounds.append((lo, hi))
    diff = 0.0
    for i in range(m + 1):
        index = tuple(slice(lo + i * st, hi + i * st) for (lo, hi), st in zip(bounds, step))
        diff = diff + (-1) ** (m - i) * math.comb(m, i) * values[index]
    diff = np.abs(diff)
    if math.isinf(p):
        return float(np.max(diff))
    return float((np.sum(diff ** p) * vol) ** (1.0 / p))


def _directions(d: int) -> list[tuple[int, ...]]:
    """Axis and diagonal directions in {−1, 0, 1}^d, one per ± pair."""
    out = []
    for v in product((-1, 0, 1), repeat=d):
        nz = [x for x in v if x]
        if nz and nz[0] > 0:
            out.append(v)
    return out


def modulus_of_smoothness(f: SampledField, m: int, t: float, p: float) -> float:
    """
    Discrete ω_m(f, t)_p: max over grid shifts h with |h| ≤ t of ‖Δ_h^m f‖_p on the
    part of the grid where every point x + i·h stays inside the box.
    """
    if m >= f.resolution:
        raise ContractError(f"Difference order {m} exceeds the grid resolution {f.resolution}")
    best = 0.0
    for direction in _directions(f.d):
        length = f.spacing * math.sqrt(sum(v * v for v in direction))
        n_max = min(int(math.floor(t / length + 1e-9)), (f.resolution - 1) // m)
        if n_max < 1:
            continue
        counts = sorted({2 ** i for i in range(n_max.bit_length()) if 2 ** i <= n_max} | {n_max})
        for n in counts:
            step = tuple(n * v for v in direction)
            best = max(best, _difference_norm(f.values, step, m, p, f.cell_volume))
    return best


def modulus_seminorm(f: SampledField, alpha: float, q: float, p: float) -> float:
    """
    (Σ_i [t_i^{-α} ω_m(f, t_i)_p]^q · ln 2)^{1/q} over dyadic t_i = (b − a)·2^{-i},
    i = 0..J, with m = ⌊α⌋ + 1.
    """
    m = int(math.floor(alpha)) + 1
    if m >= f.resolution:
        raise ContractError(f"Difference order {m} exceeds the grid resolution {f.resolution}")
    width = f.box[1] - f.box[0]
    terms = []
    for i in range(f.J + 1):
        t = width * 2.0 ** (-i)
        terms.append(t ** (-alpha) * modulus_of_smoothness(f, m, t, p))
    if math.isinf(q):
        return float(max(terms))
    return float((sum(v ** q for v in terms) * math.log(2.0)) ** (1.0 / q))


# --- Selection and errors ---

def n_term_select(c: CoeffMap, N: int, p: Optional[float] = None) -> CoeffMap:
    """
    Keep the N detail coefficients largest in |c_{λ,p}|, ties broken by (j, e, k).

    Scaling coefficients at j0 are always kept and not counted. The result keeps the
    normalization of `c`.
    """
    if N <= 0:
        raise ParameterError(f"N must be positive, got {N}")
    if N >= len(c):
        return c.copy_with(entries=dict(c.entries), coarse_entries=dict(c.coarse_entries))
    ranking = c if p is None or p == c.p else renormalize(c, p)
    order = sorted(ranking.entries.items(), key=lambda item: (-abs(item[1]), item[0]))
    keep = {lam for lam, _ in order[:N]}
    return c.copy_with(entries={lam: v for lam, v in c.entries.items() if lam in keep},
                       coarse_entries=dict(c.coarse_entries))


def lp_error(f: SampledField, g: SampledField, p: float) -> float:
    """‖f − g‖_p by the midpoint rule on the common grid (max for p = ∞)."""
    if (f.d, f.box, f.resolution) != (g.d, g.box, g.resolution):
        raise StructureError(
            f"Grid mismatch: d={f.d}, box={f.box}, R={f.resolution} vs "
            f"d={g.d}, box={g.box}, R={g.resolution}")
    diff = np.abs(f.values - g.values)
    if math.isinf(p):
        return float(np.max(diff)) if diff.size else 0.0
    return float((np.sum(diff ** p) * f.cell_volume) ** (1.0 / p))


def lp_error_monte_carlo(f: Callable, g: Callable, box, d: int, p: float,
                         samples: int = 100_000, seed: int = 0) -> float:
    """‖f − g‖_p over [a, b]^d from uniform random points; f and g take (n, d) batches."""
    a, b = box
    rng = np.random.default_rng(seed)
    X = a + (b - a) * rng.random((samples, d))
    diff = np.abs(np.ravel(f(X)) - np.ravel(g(X)))
    if math.isinf(p):
        return float(np.max(diff))
    return float(((b - a) ** d * np.mean(diff ** p)) ** (1.0 / p))


# --- Files ---

def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + '.json')


def save_field(f: SampledField, path) -> Path:
    """Little-endian doubles in row-major order plus a JSON sidecar {d, box, resolution}."""
    path = Path(path)
    try:
        path.write_bytes(np.ascontiguousarray(f.values, dtype='<f8').tobytes(order='C'))
        _sidecar(path).write_text(json.dumps({'d': f.d, 'box': list(f.box), 'resolution': f.resolution}))
    except OSError as e:
        raise OSError(f"Cannot write field to {path}: {e}") from e
    return path


def load_field(path) -> SampledField:
    path = Path(path)
    try:
        meta = json.loads(_sidecar(path).read_text())
        raw = np.frombuffer(path.read_bytes(), dtype='<f8')
    except OSError as e:
        raise OSError(f"Cannot read field from {path}: {e}") from e
    shape = (int(meta['resolution']),) * int(meta['d'])
    if raw.size != math.prod(shape):
        raise StructureError(f"{path} holds {raw.size} values, sidecar announces {shape}")
    return SampledField(int(meta['d']), tuple(meta['box']), int(meta['resolution']), raw.reshape(shape).astype(float))


def coeffs_to_frame(c: CoeffMap) -> pd.DataFrame:
    """One row per coefficient (e, j, k…, value); coarse rows carry e = 0…0 at j0."""
    rows = []
    zero = '0' * c.d
    for k, v in sorted(c.coarse_entries.items()):
        rows.append([zero, c.j0, *k, v])
    for lam, v in c.sorted_items():
        rows.append([''.join(map(str, lam.e)), lam.j, *lam.k, v])
    columns = ['e', 'j'] + [f'k{i}' for i in range(c.d)] + ['value']
    return pd.DataFrame(rows, columns=columns)


def coeffs_to_csv(c: CoeffMap, path) -> Path:
    """CSV of the coefficients with a JSON sidecar carrying d, p, j0, J, box and the wavelet."""
    path = Path(path)
    meta = {'d': c.d, 'p': 'inf' if math.isinf(c.p) else c.p, 'j0': c.j0, 'J': c.J,
            'box': list(c.box), 'wavelet': list(c.wavelet) if c.wavelet else None}
    try:
        coeffs_to_frame(c).to_csv(path, index=False, float_format='%.17g')
        _sidecar(path).write_text(json.dumps(meta))
    except OSError as e:
        raise OSError(f"Cannot write coefficients to {path}: {e}") from e
    return path


def coeffs_from_csv(path) -> CoeffMap:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype={'e': str})
        meta = json.loads(_sidecar(path).read_text()) if _sidecar(path).exists() else {}
    except OSError as e:
        raise OSError(f"Cannot read coefficients from {path}: {e}") from e
    kcols = [col for col in frame.columns if col.startswith('k')]
    d = int(meta.get('d', len(kcols)))
    entries, coarse = {}, {}
    for row in frame.itertuples(index=False):
        record = row._asdict()
        e = tuple(int(ch) for ch in str(record['e']).zfill(d))
        k = tuple(int(record[col]) for col in kcols)
        if any(e):
            entries[LambdaIndex(int(record['j']), e, k)] = float(record['value'])
        else:
            coarse[k] = float(record['value'])
    levels = [lam.j for lam in entries]
    j0 = int(meta.get('j0', min(levels, default=0)))
    J = int(meta.get('J', max(levels, default=j0) + 1))
    p = float(meta.get('p', 2.0))
    wavelet = tuple(meta['wavelet']) if meta.get('wavelet') else None
    return CoeffMap(d, p, entries, j0, J, coarse, tuple(meta.get('box', (0.0, 1.0))), wavelet)
