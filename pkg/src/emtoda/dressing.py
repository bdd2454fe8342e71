"""Dressing series for a Lax state and the operators built from them.

The Lax operator is the band operator L = Lambda + u + v Lambda^{-1}.  Two
truncated series conjugate plain shifts to L:

    S     = I + w_1 Lambda^{-1} + ... + w_K Lambda^{-K}        (lower)
    Sbar  = wb_0 + wb_1 Lambda + ... + wb_K Lambda^{K}         (upper)

with L S = S Lambda and L Sbar = Sbar Lambda^{-1}.  Matching powers gives
marching recursions solved here either as left-to-right running sums on a
decaying window (gauge: coefficients vanish on the left edge, wb_0 = I there)
or through the zero-mean pseudo-inverse on a periodic lattice.

From the pair we assemble the dressed projectors C_kk = S E_kk S^{-1}, the
flow generators B_jk = C_kk L^j, the logarithm tails

    log_+ L = eps d/dx + A_-,      A_- = -eps (dS/dx) S^{-1}
    log_- L = -eps d/dx + A_+,     A_+ = +eps (dSbar/dx) Sbar^{-1}

whose derivative parts cancel in log L = (log_+ L + log_- L)/2, and the
extended-flow generators D_j = (2 L^j / j!)(log L - c_j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import diffop
from .diffop import ShiftOperator, identity_operator, mul, shift_power
from .errors import (BarredDressingUndefinedError, DimensionMismatchError,
                     SummationKernelObstructionError, TruncationOrderError)
from .lattice import (Lattice, MatrixField, random_bump_field,
                      random_periodic_field, sum_inverse)

#: default truncation order for dressing series
DEFAULT_ORDER = 6

#: condition-number ceiling for fields that must be inverted per site
COND_LIMIT = 1e12

#: seam tolerance for the periodic barred march (relative)
SEAM_RTOL = 1e-8


def harmonic_constant(j: int) -> float:
    """c_0 = 0, c_j = sum_{i=1..j} 1/i."""
    return sum(1.0 / i for i in range(1, j + 1))


@dataclass(frozen=True)
class LaxState:
    """Dynamical state (u, v) of the hierarchy on a lattice."""

    u: MatrixField
    v: MatrixField

    def __post_init__(self):
        if self.u.N != self.v.N:
            raise DimensionMismatchError("u and v carry different dimensions")
        if self.u.lattice != self.v.lattice:
            raise DimensionMismatchError("u and v live on different lattices")

    @property
    def lattice(self) -> Lattice:
        return self.u.lattice

    @property
    def N(self) -> int:
        return self.u.N

    def operator(self) -> ShiftOperator:
        """L = Lambda + u + v Lambda^{-1} in canonical band form."""
        lat, n = self.lattice, self.N
        return ShiftOperator.band(lat, n, {
            1: MatrixField.identity(lat, n), 0: self.u, -1: self.v})

    def sampled(self) -> "LaxState":
        return LaxState(self.u.sampled(), self.v.sampled())


def vacuum_state(lattice: Lattice, n: int, c: complex = 1.0) -> LaxState:
    """u = 0, v = c * I."""
    return LaxState(MatrixField.zeros(lattice, n),
                    MatrixField.constant(lattice, c * np.eye(n)))


def random_bump_state(lattice, n, rng, amplitude=0.08, width_cells=None):
    """Localized random perturbation of the u=0, v=I vacuum (decaying style)."""
    u = random_bump_field(lattice, n, rng, amplitude, width_cells=width_cells)
    dv = random_bump_field(lattice, n, rng, amplitude, width_cells=width_cells)
    v = MatrixField.identity(lattice, n) + dv
    return LaxState(u, v)


def random_periodic_state(lattice, n, rng, amplitude=0.08, modes=2,
                          zero_mean_u=True):
    u = random_periodic_field(lattice, n, rng, amplitude, modes,
                              zero_mean=zero_mean_u)
    v = MatrixField.identity(lattice, n) + \
        random_periodic_field(lattice, n, rng, amplitude, modes,
                              zero_mean=False)
    return LaxState(u, v)


# -- lower dressing -----------------------------------------------------------


def compute_S(state: LaxState, order: int = DEFAULT_ORDER,
              mean_policy: str = "error") -> ShiftOperator:
    """Lower dressing series of a Lax state.

    Coefficients solve w_k(x+eps) - w_k(x) = -u(x) w_{k-1}(x) - v(x) w_{k-2}(x-eps)
    (from matching Lambda powers in L S = S Lambda), with w_0 = I and the
    left-edge / zero-mean gauge fixed by the boundary policy.
    """
    lat, n = state.lattice, state.N
    coeffs = {0: MatrixField.identity(lat, n)}
    zero = MatrixField.zeros(lat, n)
    for k in range(1, order + 1):
        w1 = coeffs[-(k - 1)] if k >= 1 else zero
        w2 = coeffs[-(k - 2)] if k >= 2 else zero
        source = -(state.u @ w1) - (state.v @ w2.shift(-1))
        coeffs[-k] = sum_inverse(source, mean_policy=mean_policy)
    return ShiftOperator(lat, n, coeffs, known_lo=-order, known_hi=0,
                         zero_below=False, zero_above=True)


def compute_Sbar(state: LaxState, order: int = DEFAULT_ORDER) -> ShiftOperator:
    """Upper dressing series; requires v invertible at every site.

    wb_0 solves wb_0(x) = v(x) wb_0(x-eps) with wb_0 = I on the left edge;
    higher orders march wb_k(x) = wb_{k-2}(x+eps) + u(x) wb_{k-1}(x)
    + v(x) wb_k(x-eps) with zero left-edge seeds.
    """
    lat, n = state.lattice, state.N
    conds = state.v.condition_numbers()
    if not np.all(np.isfinite(conds)) or np.max(conds) > COND_LIMIT:
        raise BarredDressingUndefinedError(
            "barred dressing undefined: v is singular "
            f"(max condition {np.max(conds):.3e})")
    r, S = lat.refine, lat.n_fine
    u_d, v_d = state.u.data, state.v.data
    xs_over_eps = np.arange(S) / r

    levels = []
    for k in range(order + 1):
        data = np.zeros((S, n, n), dtype=np.complex128)
        if k == 0:
            data[:r] = np.eye(n)
            for i in range(r, S):
                data[i] = v_d[i] @ data[i - r]
        else:
            prev1 = levels[k - 1]
            prev2 = levels[k - 2] if k >= 2 else None
            h = np.zeros((S, n, n), dtype=np.complex128)
            for i in range(S):
                acc = u_d[i] @ prev1[i]
                if prev2 is not None:
                    ip = i + r
                    if ip < S:
                        acc = acc + prev2[ip]
                    elif lat.periodic:
                        acc = acc + prev2[ip - S]
                h[i] = acc
            # ride the left-tail inhomogeneity on the linear particular
            # solution (x/eps) h_edge so the march stays smooth in x
            h_edge = h[:r].mean(axis=0) if not lat.periodic \
                else np.zeros((n, n), dtype=np.complex128)
            eye = np.eye(n)
            part = xs_over_eps[:, None, None] * h_edge
            for i in range(r, S):
                h_hat = h[i] - h_edge \
                    + (v_d[i] - eye) @ (xs_over_eps[i - r] * h_edge)
                data[i] = h_hat + v_d[i] @ data[i - r]
            data = data + part
        levels.append(data)

    if lat.periodic:
        # the march ignores the wrap; reject states whose monodromy reopens it
        seam = 0.0
        scale = max(float(np.max(np.abs(levels[0]))), 1e-300)
        for k, data in enumerate(levels):
            for i in range(r):
                acc = v_d[i] @ data[(i - r) % S]
                if k >= 1:
                    acc = acc + u_d[i] @ levels[k - 1][i]
                if k >= 2:
                    acc = acc + levels[k - 2][(i + r) % S]
                if k == 0:
                    seam = max(seam, float(np.max(np.abs(data[i] - acc))))
                else:
                    seam = max(seam, float(np.max(np.abs(data[i] - acc))))
        if seam > SEAM_RTOL * scale:
            raise BarredDressingUndefinedError(
                "barred dressing undefined on this periodic lattice: "
                f"monodromy seam residual {seam / scale:.3e}")

    coeffs = {k: MatrixField(lat, levels[k]) for k in range(order + 1)}
    return ShiftOperator(lat, n, coeffs, known_lo=0, known_hi=order,
                         zero_below=True, zero_above=False)


def invert_series(t: ShiftOperator) -> ShiftOperator:
    """Order-by-order inverse of a one-sided series (leading term invertible)."""
    lat, n = t.lattice, t.N
    lower = t.zero_above and t.known_hi == 0
    upper = t.zero_below and t.known_lo == 0
    if not (lower or upper):
        raise ValueError("invert_series expects a one-sided series from order 0")
    depth = -t.known_lo if lower else t.known_hi
    sign = -1 if lower else 1
    t0 = t.coefficient(0)
    conds = t0.condition_numbers()
    if not np.all(np.isfinite(conds)) or np.max(conds) > COND_LIMIT:
        raise ValueError("series leading coefficient is singular")
    t0_inv = t0.inv()
    out = {0: t0_inv}
    for m in range(1, depth + 1):
        acc = None
        for i in range(1, m + 1):
            ti = t.coefficient(sign * i)
            term = ti @ out[m - i].shift(sign * i)
            acc = term if acc is None else acc + term
        out[m] = -(t0_inv @ acc)
    coeffs = {sign * m: c for m, c in out.items()}
    if lower:
        return ShiftOperator(lat, n, coeffs, known_lo=-depth, known_hi=0,
                             zero_below=False, zero_above=True)
    return ShiftOperator(lat, n, coeffs, known_lo=0, known_hi=depth,
                         zero_below=True, zero_above=False)


@dataclass
class DressingPair:
    """Both dressings with their inverses and defining-equation residuals."""

    S: ShiftOperator
    S_inv: ShiftOperator
    Sbar: ShiftOperator
    Sbar_inv: ShiftOperator
    order: int
    residuals: dict = field(default_factory=dict)


def compute_dressing(state: LaxState, order: int = DEFAULT_ORDER,
                     margin: int = None, mean_policy: str = "error") -> DressingPair:
    """Compute S, Sbar and inverses; record defining residuals on a core."""
    if margin is None:
        margin = order + 2
    s = compute_S(state, order, mean_policy=mean_policy)
    sbar = compute_Sbar(state, order)
    s_inv = invert_series(s)
    sbar_inv = invert_series(sbar)
    pair = DressingPair(s, s_inv, sbar, sbar_inv, order)
    L = state.operator()
    lam = shift_power(state.lattice, state.N, 1)
    lam_inv = shift_power(state.lattice, state.N, -1)
    pair.residuals = {
        "LS-S.Lambda": diffop.operators_close(mul(L, s), mul(s, lam), margin),
        "LSbar-Sbar.Lambda^-1": diffop.operators_close(
            mul(L, sbar), mul(sbar, lam_inv), margin),
        "S.S^-1-I": diffop.operators_close(
            mul(s, s_inv), identity_operator(state.lattice, state.N), margin),
        "Sbar.Sbar^-1-I": diffop.operators_close(
            mul(sbar, sbar_inv), identity_operator(state.lattice, state.N),
            margin),
    }
    return pair


def unit_projector_field(lattice, n, k) -> MatrixField:
    """Constant field E_kk (k is 1-based)."""
    if not 1 <= k <= n:
        raise ValueError(f"component index {k} outside 1..{n}")
    e = np.zeros((n, n))
    e[k - 1, k - 1] = 1.0
    return MatrixField.constant(lattice, e)


def compute_C(state: LaxState, k: int, barred: bool = False,
              order: int = DEFAULT_ORDER, pair: DressingPair = None) -> ShiftOperator:
    """Dressed projector C_kk = S E_kk S^{-1} (or the barred version)."""
    lat, n = state.lattice, state.N
    if not 1 <= k <= n:
        raise ValueError(f"component index {k} outside 1..{n}")
    if n == 1:
        # E_11 is the identity; the conjugation is exactly the identity operator
        return identity_operator(lat, n)
    e_op = diffop.multiplication_operator(unit_projector_field(lat, n, k))
    if pair is None:
        pair = compute_dressing(state, order)
    if barred:
        return mul(mul(pair.Sbar, e_op), pair.Sbar_inv)
    return mul(mul(pair.S, e_op), pair.S_inv)


def lax_power(state: LaxState, j: int) -> ShiftOperator:
    return state.operator().power(j)


def compute_B(state: LaxState, j: int, k: int, barred: bool = False,
              order: int = DEFAULT_ORDER, pair: DressingPair = None) -> ShiftOperator:
    """Flow generator B_jk = C_kk L^j (barred: Cbar_kk L^j, same L power)."""
    if j < 0:
        raise ValueError("flow level j must be non-negative")
    if order < j + 1:
        raise TruncationOrderError(
            f"order {order} too small for B_{{{j},{k}}}; need order >= {j + 1}")
    c = compute_C(state, k, barred=barred, order=order, pair=pair)
    if j == 0:
        return c
    return mul(c, lax_power(state, j))


def compute_B_plus(state: LaxState, j: int, k: int,
                   order: int = DEFAULT_ORDER, pair=None) -> ShiftOperator:
    """Exact non-negative projection of B_jk (band operator)."""
    b = compute_B(state, j, k, barred=False, order=order, pair=pair)
    plus, _ = diffop.split(b)
    return plus


@dataclass
class LogPair:
    """Logarithm data: log_+ L = eps d/dx + plus_tail,
    log_- L = -eps d/dx + minus_tail, log = (plus_tail + minus_tail)/2.

    The derivative symbol never appears explicitly: it cancels in ``log`` and
    is carried as the convention above for the one-sided logs.
    """

    plus_tail: ShiftOperator
    minus_tail: ShiftOperator
    log: ShiftOperator
    epsilon: float

    def derivative_tail_scale(self, margin: int = 0) -> float:
        """Magnitude of the deepest computed coefficients (tolerance scaling)."""
        return max(self.plus_tail.tail_magnitude(margin),
                   self.minus_tail.tail_magnitude(margin))


def _series_dx(t: ShiftOperator) -> ShiftOperator:
    coeffs = {j: c.dx() for j, c in t.coeffs.items()}
    return ShiftOperator(t.lattice, t.N, coeffs, t.known_lo, t.known_hi,
                         t.zero_below, t.zero_above)


def compute_log(state: LaxState, order: int = DEFAULT_ORDER,
                pair: DressingPair = None) -> LogPair:
    """Logarithm tails from both dressings.

    plus_tail  = -eps (dS/dx) S^{-1}      (strictly negative powers)
    minus_tail = +eps (dSbar/dx) Sbar^{-1} (non-negative powers)
    """
    if pair is None:
        pair = compute_dressing(state, order)
    eps = state.lattice.eps
    ds = _series_dx(pair.S)       # coefficient 0 derivative vanishes exactly
    dsbar = _series_dx(pair.Sbar)
    a_minus = mul(ds, pair.S_inv) * (-eps)
    a_plus = mul(dsbar, pair.Sbar_inv) * eps
    log = (a_minus + a_plus) * 0.5
    return LogPair(plus_tail=a_minus, minus_tail=a_plus, log=log, epsilon=eps)


def compute_D(state: LaxState, j: int, order: int = DEFAULT_ORDER,
              pair: DressingPair = None, logs: LogPair = None) -> ShiftOperator:
    """Extended-flow generator D_j = (2 L^j / j!) (log L - c_j)."""
    if j < 0:
        raise ValueError("extended flow level must be non-negative")
    if order <= j:
        raise TruncationOrderError(
            f"order {order} too small for D_{j}; need order > {j}")
    if logs is None:
        logs = compute_log(state, order, pair=pair)
    lat, n = state.lattice, state.N
    shifted = logs.log - identity_operator(lat, n) * harmonic_constant(j)
    if j == 0:
        return shifted * 2.0
    return mul(lax_power(state, j), shifted) * (2.0 / math.factorial(j))
