"""
Besovnet wavelets

Cohen-Daubechies-Feauveau biorthogonal B-spline wavelets. Masks follow the convention
φ = Σ h_k φ(2·−k) with Σ h_k = 2, so discrete biorthogonality reads
Σ_k h_k h̃_{k+2m} = 2δ_{0,m}.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

from besovnet.errors import ContractError, ParameterError
from besovnet.piecewise import PiecewisePoly, cardinal_bspline

logger = logging.getLogger(__name__)

BIORTHOGONALITY_TOL = 1e-12
TWO_SCALE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Mask:
    """Finitely supported filter: coeffs[i] is the coefficient at index offset + i."""
    coeffs: np.ndarray
    offset: int

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).ravel()
        nz = np.flatnonzero(c)
        if len(nz) == 0:
            raise ParameterError("A mask needs at least one nonzero coefficient")
        object.__setattr__(self, 'coeffs', c[nz[0]:nz[-1] + 1])
        object.__setattr__(self, 'offset', int(self.offset) + int(nz[0]))

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + len(self.coeffs))

    @property
    def last(self) -> int:
        return self.offset + len(self.coeffs) - 1

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, k: int) -> float:
        i = k - self.offset
        return float(self.coeffs[i]) if 0 <= i < len(self.coeffs) else 0.0

    def flip_alternate(self) -> "Mask":
        """k ↦ (−1)^k m_{1−k}."""
        idx = 1 - self.indices[::-1]
        signs = np.where(idx % 2 == 0, 1.0, -1.0)
        return Mask(signs * self.coeffs[::-1], int(idx[0]))

    def to_dict(self) -> dict:
        return {'offset': self.offset, 'coeffs': [float(c) for c in self.coeffs]}


@dataclass(frozen=True, eq=False)
class BiorthWaveletSystem:
    """CDF(L, L_dual) masks with the closed forms of φ and ψ."""
    L: int
    L_dual: int
    h: Mask
    h_dual: Mask
    g: Mask
    g_dual: Mask
    phi_pp: PiecewisePoly
    psi_pp: PiecewisePoly
    sup_norm_phi: float
    sup_norm_psi: float
    support_measure: float
    # Besov regularity of a degree L−1 spline and integrability of φ, ψ; metadata only
    regularity: float
    integrability: float = float('inf')
    residuals: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return f"cdf{self.L}{self.L_dual}"

    @property
    def sample_shift(self) -> int:
        """Grid offset s used to sample c_{J,n} ≈ 2^{-J/2} f(2^{-J}(n + s))."""
        return self.L // 2

    @property
    def filter_span(self) -> int:
        """Longest analysis or synthesis mask."""
        return max(len(self.h), len(self.h_dual), len(self.g), len(self.g_dual))

    def factor(self, e: int) -> PiecewisePoly:
        """φ for e = 0, ψ for e = 1."""
        return self.psi_pp if e else self.phi_pp

    def factor_sup(self, e: int) -> float:
        return self.sup_norm_psi if e else self.sup_norm_phi


def primal_mask(L: int) -> Mask:
    """h_k = 2^{1−L} C(L, k), k = 0..L (refinement mask of the order-L B-spline)."""
    return Mask(np.array([comb(L, k) for k in range(L + 1)], dtype=float) * 2.0 ** (1 - L), 0)


def dual_mask(h: Mask, L: int, L_dual: int) -> Mask:
    """
    Shortest symmetric dual mask with L_dual sum rules.

    Unknowns live on length L + 2L_dual − 1 centered at L/2. The linear system stacks the
    biorthogonality conditions, the sum rules Σ (−1)^k k^s h̃_k = 0 (s < L_dual) and the
    symmetry h̃_{L−k} = h̃_k; it is solved by least squares and the residual is checked.
    """
    n = L + 2 * L_dual - 1
    offset = 1 - L_dual
    idx = np.arange(offset, offset + n)
    rows, rhs = [], []
    shifts = range((offset - h.last) // 2 - 1, (idx[-1] - h.offset) // 2 + 2)
    for m in shifts:
        row = np.zeros(n)
        for k in h.indices:
            pos = k + 2 * m - offset
            if 0 <= pos < n:
                row[pos] += h[k]
        if row.any():
            rows.append(row)
            rhs.append(2.0 if m == 0 else 0.0)
    signs = np.where(idx % 2 == 0, 1.0, -1.0)
    centered = idx - L / 2.0
    for s in range(L_dual):
        rows.append(signs * centered ** s)
        rhs.append(0.0)
    for i in range(n // 2):
        row = np.zeros(n)
        row[i], row[n - 1 - i] = 1.0, -1.0
        rows.append(row)
        rhs.append(0.0)
    A, b = np.array(rows), np.array(rhs)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    residual = float(np.max(np.abs(A @ sol - b)))
    if residual > 1e-10:
        raise ParameterError(f"No dual mask for CDF({L},{L_dual}); residual {residual:.3e}")
    sol[np.abs(sol) < 1e-15] = 0.0
    return Mask(sol, offset)


def biorthogonality_residual(h: Mask, h_dual: Mask) -> float:
    """max_m |Σ_k h_k h̃_{k+2m} − 2δ_{0,m}|."""
    worst = 0.0
    for m in range((h_dual.offset - h.last) // 2 - 1, (h_dual.last - h.offset) // 2 + 2):
        total = sum(h[k] * h_dual[k + 2 * m] for k in h.indices)
        worst = max(worst, abs(total - (2.0 if m == 0 else 0.0)))
    return worst


def scaling_pp(L: int) -> PiecewisePoly:
    """Cardinal B-spline of degree L − 1 on [0, L]."""
    if L < 2:
        raise ParameterError(f"Need L >= 2 for a continuous scaling function, got {L}")
    return cardinal_bspline(L)


def refine_pp(phi: PiecewisePoly, mask: Mask) -> PiecewisePoly:
    """Σ_k m_k φ(2x − k), built from the truncated powers of φ."""
    terms = []
    for k in mask.indices:
        for xi, s, a in phi.truncated_powers():
            terms.append(((k + xi) / 2.0, s, mask[k] * a * 2.0 ** s))
    merged: dict[tuple[float, int], float] = {}
    for xi, s, a in terms:
        merged[(xi, s)] = merged.get((xi, s), 0.0) + a
    return PiecewisePoly.from_truncated_powers([(xi, s, a) for (xi, s), a in merged.items()], continuous=True)


def wavelet_pp(sys: BiorthWaveletSystem) -> PiecewisePoly:
    """ψ = Σ_k g_k φ(2·−k) with half-integer breakpoints."""
    return sys.psi_pp


def two_scale_residual(target: PiecewisePoly, phi: PiecewisePoly, mask: Mask, samples: int = 64) -> float:
    """max |target(x) − Σ m_k φ(2x − k)| on a grid refining every breakpoint."""
    a, b = target.support()
    lo, hi = min(a, (mask.offset) / 2.0), max(b, (mask.last + phi.support()[1]) / 2.0)
    x = np.linspace(lo - 0.5, hi + 0.5, int((hi - lo + 1) * samples) + 1)
    combo = sum(mask[k] * phi(2 * x - k) for k in mask.indices)
    return float(np.max(np.abs(target(x) - combo)))


def _union_measure(*intervals) -> float:
    spans = sorted(intervals)
    total, (cur_a, cur_b) = 0.0, spans[0]
    for a, b in spans[1:]:
        if a > cur_b:
            total += cur_b - cur_a
            cur_a, cur_b = a, b
        else:
            cur_b = max(cur_b, b)
    return total + cur_b - cur_a


@lru_cache(maxsize=16)
def cdf_system(L: int, L_dual: int) -> BiorthWaveletSystem:
    """
    Build and verify CDF(L, L_dual).

    Raises:
        ParameterError: L < 2, L_dual < 1 or L + L_dual odd.
        ContractError: a constructed mask fails biorthogonality or a two-scale check.
    """
    if L < 2 or L_dual < 1:
        raise ParameterError(f"CDF({L},{L_dual}) needs L >= 2 and L_dual >= 1")
    if (L + L_dual) % 2:
        raise ParameterError(f"CDF({L},{L_dual}) needs L + L_dual even")

    h = primal_mask(L)
    h_dual = dual_mask(h, L, L_dual)
    g = h_dual.flip_alternate()
    g_dual = h.flip_alternate()

    bio = biorthogonality_residual(h, h_dual)
    if bio > BIORTHOGONALITY_TOL:
        raise ContractError(f"CDF({L},{L_dual}) biorthogonality residual {bio:.3e} > {BIORTHOGONALITY_TOL}")

    phi = scaling_pp(L)
    psi = refine_pp(phi, g)
    residuals = {
        'biorthogonality': bio,
        'two_scale_phi': two_scale_residual(phi, phi, h),
        'two_scale_psi': two_scale_residual(psi, phi, g),
    }
    for key in ('two_scale_phi', 'two_scale_psi'):
        if residuals[key] > TWO_SCALE_TOL:
            raise ContractError(f"CDF({L},{L_dual}) {key} residual {residuals[key]:.3e} > {TWO_SCALE_TOL}")

    system = BiorthWaveletSystem(
        L=L, L_dual=L_dual, h=h, h_dual=h_dual, g=g, g_dual=g_dual,
        phi_pp=phi, psi_pp=psi,
        sup_norm_phi=phi.sup_norm(), sup_norm_psi=psi.sup_norm(),
        support_measure=_union_measure(phi.support(), psi.support()),
        regularity=L - 0.5,
        residuals=residuals,
    )
    logger.debug("Built %s: |h~|=%d, supp psi=%s, residuals=%s",
                 system.name, len(h_dual), psi.support(), residuals)
    return system


def vanishing_moments(sys: BiorthWaveletSystem, count: int | None = None) -> list[float]:
    """∫ x^m ψ(x) dx for m < count (default L_dual)."""
    count = sys.L_dual if count is None else count
    return [sys.psi_pp.moment(m) for m in range(count)]


def cascade(sys: BiorthWaveletSystem, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """
    φ at the dyadic points i·2^{-levels} computed from the mask alone.

    Integer values come from the eigenvector of (h_{2i−j}) for eigenvalue 1; each level
    then applies φ(x) = Σ h_m φ(2x − m).
    """
    h, L = sys.h, sys.L
    M = np.array([[h[2 * i - j] for j in range(L + 1)] for i in range(L + 1)])
    vals, vecs = np.linalg.eig(M)
    pick = int(np.argmin(np.abs(vals - 1.0)))
    v = np.real(vecs[:, pick])
    v = v / v.sum()
    for n in range(levels):
        step = 2 ** n
        nxt = np.zeros(L * 2 * step + 1)
        for m in h.indices:
            src = np.arange(len(nxt)) - m * step
            ok = (src >= 0) & (src < len(v))
            nxt[ok] += h[m] * v[src[ok]]
        v = nxt
    x = np.arange(len(v)) / 2.0 ** levels
    return x, v


def system_to_dict(sys: BiorthWaveletSystem) -> dict:
    """JSON-ready description used by `wavelet dump`."""
    return {
        'name': sys.name,
        'L': sys.L,
        'L_dual': sys.L_dual,
        'h': sys.h.to_dict(),
        'h_dual': sys.h_dual.to_dict(),
        'g': sys.g.to_dict(),
        'g_dual': sys.g_dual.to_dict(),
        'phi': sys.phi_pp.to_dict(),
        'psi': sys.psi_pp.to_dict(),
        'sup_norm_phi': sys.sup_norm_phi,
        'sup_norm_psi': sys.sup_norm_psi,
        'support_measure': sys.support_measure,
        'regularity': sys.regularity,
        'integrability': 'inf',
        'residuals': sys.residuals,
    }
