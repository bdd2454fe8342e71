"""Associative algebra of matrix-coefficient shift operators.

An operator is a finite sum  sum_j X_j(x) Lambda^j  with MatrixField
coefficients, multiplied by the rule

    (X Lambda^i) (Y Lambda^j) = X(x) Y(x + i eps) Lambda^{i+j}.

Two flavours share one representation:

* ``BandOperator``  -- exact finite band; coefficients outside the stored
  range are exactly zero.
* ``SeriesOperator`` -- a truncation of an infinite series; outside the
  *known* exponent range the coefficients are unknown on the truncated
  side(s).  Arithmetic propagates the known range conservatively, so every
  stored coefficient of a product is exact (products of two order-K one-sided
  series keep orders up to the shared K).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, TruncationOrderError
from .lattice import Lattice, MatrixField

_INF = float("inf")

#: magnitude below which a band edge coefficient is trimmed
TRIM_TOL = 0.0


class ShiftOperator:
    """Shared implementation for band and series operators.

    coeffs maps exponent -> MatrixField.  ``known_lo``/``known_hi`` bound the
    exponent range on which coefficients are exact (missing entries inside the
    range are exact zeros).  ``zero_below``/``zero_above`` state whether the
    operator is exactly zero outside the known range or merely truncated.
    """

    def __init__(self, lattice: Lattice, n: int, coeffs: dict,
                 known_lo=None, known_hi=None,
                 zero_below: bool = True, zero_above: bool = True):
        self.lattice = lattice
        self.N = n
        self.coeffs = {int(j): c for j, c in coeffs.items()}
        for j, c in self.coeffs.items():
            if c.N != n:
                raise DimensionMismatchError("coefficient dimension mismatch")
            if c.lattice != lattice:
                raise DimensionMismatchError("coefficient on wrong lattice")
        keys = sorted(self.coeffs)
        if known_lo is None:
            known_lo = keys[0] if keys else 0
        if known_hi is None:
            known_hi = keys[-1] if keys else 0
        if keys and (keys[0] < known_lo or keys[-1] > known_hi):
            raise ValueError("stored coefficients outside the known range")
        self.known_lo = int(known_lo)
        self.known_hi = int(known_hi)
        self.zero_below = bool(zero_below)
        self.zero_above = bool(zero_above)

    # -- constructors -------------------------------------------------------

    @classmethod
    def band(cls, lattice, n, coeffs):
        op = cls(lattice, n, coeffs, zero_below=True, zero_above=True)
        return op.trim()

    @property
    def is_band(self) -> bool:
        return self.zero_below and self.zero_above

    def same_kind(self, lattice, n, coeffs, known_lo, known_hi,
                  zero_below, zero_above):
        return ShiftOperator(lattice, n, coeffs, known_lo, known_hi,
                             zero_below, zero_above)

    # -- queries ------------------------------------------------------------

    @property
    def lo(self) -> int:
        keys = [j for j in self.coeffs]
        return min(keys) if keys else 0

    @property
    def hi(self) -> int:
        keys = [j for j in self.coeffs]
        return max(keys) if keys else 0

    def coefficient(self, j: int) -> MatrixField:
        """Exact coefficient of Lambda^j; raises if j lies in a truncated tail."""
        if j in self.coeffs:
            return self.coeffs[j]
        if self.known_lo <= j <= self.known_hi:
            return MatrixField.zeros(self.lattice, self.N)
        if (j < self.known_lo and self.zero_below) or \
                (j > self.known_hi and self.zero_above):
            return MatrixField.zeros(self.lattice, self.N)
        raise TruncationOrderError(
            f"coefficient of Lambda^{j} lies beyond the computed order "
            f"[{self.known_lo}, {self.known_hi}]")

    def exponents(self):
        return sorted(self.coeffs)

    def norm(self, margin: int = 0) -> float:
        vals = [c.norm(margin) for c in self.coeffs.values()]
        return max(vals) if vals else 0.0

    def tail_magnitude(self, margin: int = 0) -> float:
        """Size of the deepest stored coefficient on each truncated side."""
        out = 0.0
        if not self.zero_below and self.known_lo in self.coeffs:
            out = max(out, self.coeffs[self.known_lo].norm(margin))
        if not self.zero_above and self.known_hi in self.coeffs:
            out = max(out, self.coeffs[self.known_hi].norm(margin))
        return out

    def __repr__(self):
        kind = "BandOperator" if self.is_band else "SeriesOperator"
        return (f"<{kind} N={self.N} exponents={self.exponents()} "
                f"known=[{self.known_lo},{self.known_hi}]>")

    def trim(self, tol: float = TRIM_TOL) -> "ShiftOperator":
        """Drop (near-)zero edge coefficients; keeps bands minimal."""
        coeffs = dict(self.coeffs)
        for j in sorted(coeffs):
            side_exact = self.zero_below or j > self.known_lo
            if side_exact and coeffs[j].norm() <= tol:
                del coeffs[j]
            else:
                break
        for j in sorted(coeffs, reverse=True):
            side_exact = self.zero_above or j < self.known_hi
            if side_exact and coeffs[j].norm() <= tol:
                del coeffs[j]
            else:
                break
        return ShiftOperator(self.lattice, self.N, coeffs,
                             self.known_lo, self.known_hi,
                             self.zero_below, self.zero_above)

    # -- linear structure ----------------------------------------------------

    def _eff_lo(self):
        return -_INF if not self.zero_below else self.known_lo

    def _eff_hi(self):
        return _INF if not self.zero_above else self.known_hi

    def __add__(self, other):
        if not isinstance(other, ShiftOperator):
            return NotImplemented
        if self.N != other.N:
            raise DimensionMismatchError("operator dimensions differ")
        # exponent e stays exact iff it is exact-or-known-zero in both operands
        lo = max(-_INF if self.zero_below else self.known_lo,
                 -_INF if other.zero_below else other.known_lo)
        hi = min(_INF if self.zero_above else self.known_hi,
                 _INF if other.zero_above else other.known_hi)
        coeffs = {}
        for j in set(self.coeffs) | set(other.coeffs):
            if lo <= j <= hi:
                a = self.coeffs.get(j)
                b = other.coeffs.get(j)
                coeffs[j] = a + b if (a is not None and b is not None) \
                    else (a if a is not None else b)
        zero_below = self.zero_below and other.zero_below
        zero_above = self.zero_above and other.zero_above
        if lo == -_INF:
            lo = min(list(coeffs) + [self.known_lo, other.known_lo])
        if hi == _INF:
            hi = max(list(coeffs) + [self.known_hi, other.known_hi])
        return ShiftOperator(self.lattice, self.N, coeffs, int(lo), int(hi),
                             zero_below, zero_above)

    def __sub__(self, other):
        return self + (other * (-1.0))

    def __mul__(self, scalar):
        scalar = complex(scalar)
        coeffs = {j: c * scalar for j, c in self.coeffs.items()}
        return ShiftOperator(self.lattice, self.N, coeffs,
                             self.known_lo, self.known_hi,
                             self.zero_below, self.zero_above)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    # -- product --------------------------------------------------------------

    def __matmul__(self, other):
        return mul(self, other)

    # -- actions ----------------------------------------------------------------

    def apply(self, field: MatrixField) -> MatrixField:
        """(A phi)(x) = sum_j X_j(x) phi(x + j eps) over stored coefficients."""
        if field.N != self.N:
            raise DimensionMismatchError("operator/field dimension mismatch")
        out = MatrixField.zeros(self.lattice, self.N)
        for j, c in sorted(self.coeffs.items()):
            out = out + (c @ field.shift(j))
        return out

    def power(self, j: int) -> "ShiftOperator":
        if j < 0:
            raise ValueError("only non-negative operator powers are supported")
        out = identity_operator(self.lattice, self.N)
        for _ in range(j):
            out = mul(out, self)
        return out


BandOperator = ShiftOperator
SeriesOperator = ShiftOperator


def band_operator(lattice, n, coeffs) -> ShiftOperator:
    return ShiftOperator.band(lattice, n, coeffs)


def series_operator(lattice, n, coeffs, known_lo, known_hi,
                    zero_below=False, zero_above=False) -> ShiftOperator:
    return ShiftOperator(lattice, n, coeffs, known_lo, known_hi,
                         zero_below, zero_above)


def identity_operator(lattice, n) -> ShiftOperator:
    return ShiftOperator.band(lattice, n, {0: MatrixField.identity(lattice, n)})


def shift_power(lattice, n, j, coefficient=None) -> ShiftOperator:
    """coefficient * Lambda^j (identity coefficient by default)."""
    c = coefficient if coefficient is not None else MatrixField.identity(lattice, n)
    return ShiftOperator.band(lattice, n, {j: c})


def mul(a: ShiftOperator, b: ShiftOperator) -> ShiftOperator:
    """Operator product with the shift rule; exact on the surviving window.

    Band x band stays exact.  With truncated operands the result keeps every
    exponent whose coefficient receives no contribution from an unknown tail;
    for two one-sided series of orders K_a, K_b this is the shared order
    min(K_a, K_b).
    """
    if a.N != b.N:
        raise DimensionMismatchError(
            f"matrix dimensions differ: {a.N} vs {b.N}")
    if a.lattice != b.lattice:
        raise DimensionMismatchError("operators on different lattices")

    a_lo, a_hi = a._eff_lo(), a._eff_hi()
    b_lo, b_hi = b._eff_lo(), b._eff_hi()

    def polluted(e):
        # unknown A tail below known_lo against any effective B support
        if not a.zero_below and b_hi > e - a.known_lo:
            return True
        if not a.zero_above and b_lo < e - a.known_hi:
            return True
        if not b.zero_below and a_hi > e - b.known_lo:
            return True
        if not b.zero_above and a_lo < e - b.known_hi:
            return True
        return False

    e_min = a.known_lo + b.known_lo
    e_max = a.known_hi + b.known_hi
    exact = [e for e in range(e_min, e_max + 1) if not polluted(e)]
    if not exact:
        raise TruncationOrderError(
            "product of truncated operators keeps no exact coefficient")
    lo, hi = min(exact), max(exact)

    coeffs = {}
    for i, ca in a.coeffs.items():
        for j, cb in b.coeffs.items():
            e = i + j
            if e < lo or e > hi:
                continue
            term = ca @ cb.shift(i)
            coeffs[e] = coeffs.get(e) + term if e in coeffs else term
    zero_below = a.zero_below and b.zero_below
    zero_above = a.zero_above and b.zero_above
    out = ShiftOperator(a.lattice, a.N, coeffs, lo, hi, zero_below, zero_above)
    return out.trim() if out.is_band else out


def commutator(a: ShiftOperator, b: ShiftOperator) -> ShiftOperator:
    return mul(a, b) - mul(b, a)


def split(a: ShiftOperator):
    """Non-negative / negative shift-power parts; plus + minus = a."""
    plus_coeffs = {j: c for j, c in a.coeffs.items() if j >= 0}
    minus_coeffs = {j: c for j, c in a.coeffs.items() if j < 0}
    if a.zero_above:
        plus = ShiftOperator(a.lattice, a.N, plus_coeffs,
                             known_lo=0, known_hi=max(a.known_hi, 0),
                             zero_below=True, zero_above=True)
    elif a.known_hi < 0:
        raise TruncationOrderError(
            "non-negative part lies entirely beyond the computed order")
    else:
        plus = ShiftOperator(a.lattice, a.N, plus_coeffs,
                             known_lo=0, known_hi=a.known_hi,
                             zero_below=True, zero_above=False)
    if a.zero_below:
        minus = ShiftOperator(a.lattice, a.N, minus_coeffs,
                              known_lo=min(a.known_lo, -1), known_hi=-1,
                              zero_below=True, zero_above=True)
    elif a.known_lo > -1:
        raise TruncationOrderError(
            "negative part lies entirely beyond the computed order")
    else:
        minus = ShiftOperator(a.lattice, a.N, minus_coeffs,
                              known_lo=a.known_lo, known_hi=-1,
                              zero_below=False, zero_above=True)
    return plus.trim(), minus.trim()


def residue(a: ShiftOperator) -> MatrixField:
    """Res A = the Lambda^0 coefficient."""
    return a.coefficient(0)


def trace_residue(a: ShiftOperator) -> np.ndarray:
    """Per-site trace of the residue, as a plain complex array."""
    return residue(a).trace()


def apply(a: ShiftOperator, field: MatrixField) -> MatrixField:
    return a.apply(field)


def star_apply(a: ShiftOperator, g: MatrixField) -> MatrixField:
    """sum_m Lambda^{-m}(g b_m) for A = sum_m b_m Lambda^m (any band).

    Returns the matrix-valued function sum_m g(x - m eps) b_m(x - m eps).
    """
    out = MatrixField.zeros(a.lattice, a.N)
    for m, c in sorted(a.coeffs.items()):
        out = out + (g @ c).shift(-m)
    return out


def adjoint_star(b: ShiftOperator, g: MatrixField) -> MatrixField:
    """B*(g) for a non-negative band operator B."""
    if not b.is_band or b.lo < 0:
        raise ValueError("adjoint_star requires a non-negative band operator")
    return star_apply(b, g)


def geometric_kernel(lattice, n, depth: int, direction: str) -> ShiftOperator:
    """Truncated summation kernel.

    direction='minus': Lambda^-1/(1 - Lambda^-1) ~ sum_{s=1..depth} Lambda^-s;
    direction='plus':  1/(1 - Lambda)            ~ sum_{s=0..depth} Lambda^s.
    Returned as a one-side-truncated series so products track exactness.
    """
    eye = MatrixField.identity(lattice, n)
    if direction == "minus":
        coeffs = {-s: eye for s in range(1, depth + 1)}
        return ShiftOperator(lattice, n, coeffs, known_lo=-depth, known_hi=-1,
                             zero_below=False, zero_above=True)
    if direction == "plus":
        coeffs = {s: eye for s in range(0, depth + 1)}
        return ShiftOperator(lattice, n, coeffs, known_lo=0, known_hi=depth,
                             zero_below=True, zero_above=False)
    raise ValueError("direction must be 'minus' or 'plus'")


def multiplication_operator(field: MatrixField) -> ShiftOperator:
    """The Lambda^0 operator 'multiply by field'."""
    return ShiftOperator.band(field.lattice, field.N, {0: field})


def operators_close(a: ShiftOperator, b: ShiftOperator, margin: int = 0,
                    exponents=None) -> float:
    """Max coefficient deviation over shared exact exponents (or a given set)."""
    if exponents is None:
        lo = max(-_INF if a.zero_below else a.known_lo,
                 -_INF if b.zero_below else b.known_lo)
        hi = min(_INF if a.zero_above else a.known_hi,
                 _INF if b.zero_above else b.known_hi)
        exponents = sorted(e for e in set(a.coeffs) | set(b.coeffs)
                           if lo <= e <= hi)
    out = 0.0
    for e in exponents:
        out = max(out, (a.coefficient(e) - b.coefficient(e)).norm(margin))
    return out
