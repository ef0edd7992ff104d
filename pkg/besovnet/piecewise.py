"""
Besovnet piecewise polynomials

Compactly supported piecewise polynomials with breakpoints ξ_0 < … < ξ_M. Each piece
[ξ_i, ξ_{i+1}) stores ascending coefficients in the local variable h = x − ξ_i; the
function is identically zero outside [ξ_0, ξ_M).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import comb, factorial
from typing import Iterable, Optional

import numpy as np
from numpy.polynomial import polynomial as P

from besovnet.errors import ContractError

logger = logging.getLogger(__name__)

CONTINUITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PiecewisePoly:
    """A compactly supported piecewise polynomial of degree t."""
    breakpoints: np.ndarray
    coeffs: np.ndarray
    continuous: bool = False

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).ravel()
        co = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if co.size == 0:
            co = co.reshape(0, max(co.shape[-1], 1))
        object.__setattr__(self, 'breakpoints', bp)
        object.__setattr__(self, 'coeffs', co)
        if len(bp) == 0:
            if len(co):
                raise ContractError("Pieces given without breakpoints")
        else:
            if len(co) != len(bp) - 1:
                raise ContractError(f"{len(bp)} breakpoints need {len(bp) - 1} pieces, got {len(co)}")
            if np.any(np.diff(bp) <= 0):
                raise ContractError("Breakpoints must be strictly increasing")
        if self.continuous:
            gap = self.continuity_gap()
            if gap > CONTINUITY_TOL * max(1.0, self.coefficient_scale()):
                raise ContractError(f"Pieces disagree at a breakpoint by {gap:.3e}")

    # --- basic facts ---

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def num_pieces(self) -> int:
        return len(self.coeffs)

    @property
    def is_zero(self) -> bool:
        return self.num_pieces == 0 or not np.any(self.coeffs)

    def support(self) -> tuple[float, float]:
        if self.num_pieces == 0:
            return (0.0, 0.0)
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def support_measure(self) -> float:
        a, b = self.support()
        return b - a

    def coefficient_scale(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    # --- evaluation ---

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.num_pieces == 0:
            return out
        idx = np.searchsorted(self.breakpoints, x, side='right') - 1
        inside = (idx >= 0) & (idx < self.num_pieces)
        i = idx[inside]
        h = x[inside] - self.breakpoints[i]
        acc = np.zeros_like(h)
        for s in range(self.degree, -1, -1):
            acc = acc * h + self.coeffs[i, s]
        out[inside] = acc
        return out

    def edge_values(self) -> tuple[np.ndarray, np.ndarray]:
        """Values at the left and right end of every piece."""
        w = self.widths()
        left = self.coeffs[:, 0].copy()
        right = np.array([P.polyval(w[i], self.coeffs[i]) for i in range(self.num_pieces)])
        return left, right

    def continuity_gap(self) -> float:
        """Largest jump of the function, counting the zero extension outside the support."""
        if self.num_pieces == 0:
            return 0.0
        left, right = self.edge_values()
        jumps = np.concatenate([[left[0]], left[1:] - right[:-1], [right[-1]]])
        return float(np.max(np.abs(jumps)))

    # --- calculus on pieces ---

    def moment(self, m: int) -> float:
        """∫ x^m v(x) dx, exact up to roundoff."""
        total = 0.0
        for i in range(self.num_pieces):
            xi = self.breakpoints[i]
            shift = P.polypow([xi, 1.0], m) if m > 0 else np.array([1.0])
            integrand = P.polyint(P.polymul(self.coeffs[i], shift))
            total += P.polyval(self.widths()[i], integrand)
        return float(total)

    def lp_norm(self, p: float) -> float:
        """L^p norm by Gauss-Legendre quadrature per piece (exact for even integer p)."""
        if np.isinf(p):
            return self.sup_norm()
        nodes, weights = np.polynomial.legendre.leggauss(max(8, int(np.ceil(p * (self.degree + 1)))))
        total = 0.0
        for i, w in enumerate(self.widths()):
            h = 0.5 * w * (nodes + 1.0)
            total += 0.5 * w * np.sum(weights * np.abs(P.polyval(h, self.coeffs[i])) ** p)
        return float(total ** (1.0 / p))

    def sup_norm(self) -> float:
        """max |v| using the endpoints and the critical points of every piece."""
        best = 0.0
        for i, w in enumerate(self.widths()):
            c = self.coeffs[i]
            candidates = [0.0, w]
            if self.degree >= 2:
                roots = P.polyroots(P.polyder(c)) if np.any(P.polyder(c)) else []
                candidates += [r.real for r in np.atleast_1d(roots)
                               if abs(r.imag) < 1e-12 and 0.0 < r.real < w]
            best = max(best, float(np.max(np.abs(P.polyval(np.array(candidates), c)))))
        return best

    # --- transformations ---

    def scaled(self, c: float) -> "PiecewisePoly":
        return PiecewisePoly(self.breakpoints, self.coeffs * c, self.continuous)

    def dilate_shift(self, a: float, k: float) -> "PiecewisePoly":
        """x ↦ v(a·x − k) for a > 0."""
        if a <= 0:
            raise ContractError(f"Dilation factor must be positive, got {a}")
        powers = a ** np.arange(self.degree + 1)
        return PiecewisePoly((self.breakpoints + k) / a, self.coeffs * powers, self.continuous)

    # --- truncated powers ---

    def truncated_powers(self, tol: float = CONTINUITY_TOL) -> list[tuple[float, int, float]]:
        """
        Terms (ξ, s, a) with v(x) = Σ a·(x − ξ)_+^s.

        a is the jump of v^{(s)}/s! at ξ. Terms below `tol` times the largest term are
        dropped, which removes the roundoff jumps of a smooth spline.
        """
        terms = []
        t = self.degree
        w = self.widths()
        for i, xi in enumerate(self.breakpoints):
            right = self.coeffs[i] if i < self.num_pieces else np.zeros(t + 1)
            if i > 0:
                c = self.coeffs[i - 1]
                left = np.array([sum(comb(r, s) * c[r] * w[i - 1] ** (r - s) for r in range(s, t + 1))
                                 for s in range(t + 1)])
            else:
                left = np.zeros(t + 1)
            for s, jump in enumerate(right - left):
                terms.append((float(xi), s, float(jump)))
        if not terms:
            return []
        scale = max(abs(a) for _, _, a in terms)
        return [(xi, s, a) for xi, s, a in terms if abs(a) > tol * scale]

    @classmethod
    def from_truncated_powers(cls, terms: Iterable[tuple[float, int, float]],
                              continuous: Optional[bool] = None) -> "PiecewisePoly":
        """
        Piecewise form of Σ a·(x − ξ)_+^s.

        The sum must vanish to the right of its last knot (compact support).
        """
        terms = [(float(k), int(s), float(a)) for k, s, a in terms if a != 0.0]
        if not terms:
            return cls(np.zeros(0), np.zeros((0, 1)), True)
        t = max(s for _, s, _ in terms)
        knots = np.unique([k for k, _, _ in terms])
        coeffs = np.zeros((len(knots), t + 1))
        for i, xi in enumerate(knots):
            for kappa, s, a in terms:
                if kappa <= xi:
                    offset = xi - kappa
                    for r in range(s + 1):
                        coeffs[i, r] += a * comb(s, r) * offset ** (s - r)
        tail = coeffs[-1]
        scale = max(1.0, float(np.max(np.abs(coeffs))))
        if np.max(np.abs(tail)) > 1e-9 * scale:
            raise ContractError("Truncated-power sum does not vanish beyond its last knot")
        pp = cls(knots, coeffs[:-1], False)
        if continuous is None:
            continuous = pp.continuity_gap() <= CONTINUITY_TOL * max(1.0, pp.coefficient_scale())
        return cls(knots, coeffs[:-1], continuous)

    @classmethod
    def from_pieces(cls, breakpoints, polys, continuous: bool = True) -> "PiecewisePoly":
        """Build from per-piece local coefficient lists of possibly different lengths."""
        t = max((len(p) for p in polys), default=1) - 1
        coeffs = np.zeros((len(polys), t + 1))
        for i, p in enumerate(polys):
            coeffs[i, :len(p)] = p
        return cls(np.asarray(breakpoints, dtype=float), coeffs, continuous)

    @classmethod
    def linear_interpolant(cls, nodes, values) -> "PiecewisePoly":
        """Continuous piecewise-linear function through (nodes, values); zero at both ends."""
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        slopes = np.diff(values) / np.diff(nodes)
        return cls(nodes, np.column_stack([values[:-1], slopes]), True)

    def to_dict(self) -> dict:
        return {
            'breakpoints': [float(b) for b in self.breakpoints],
            'coeffs': [[float(c) for c in row] for row in self.coeffs],
            'degree': self.degree,
            'continuous': bool(self.continuous),
        }


def eval_pp(pp: PiecewisePoly, x):
    """Piecewise Horner evaluation; zero outside the support."""
    return pp(x)


def cardinal_bspline(order: int) -> PiecewisePoly:
    """Cardinal B-spline of the given order (degree order − 1) on [0, order]."""
    deg = order - 1
    terms = [(float(i), deg, (-1) ** i * comb(order, i) / factorial(deg)) for i in range(order + 1)]
    return PiecewisePoly.from_truncated_powers(terms)
