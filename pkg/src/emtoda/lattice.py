"""Discrete spatial substrate: lattice geometry and matrix-valued fields.

A lattice holds M coarse sites with spacing ``eps``; each coarse cell is
subdivided into ``refine`` fine cells of width ``delta = eps/refine``._x
derivatives are taken on the fine grid while the Toda shift Lambda moves
exactly ``refine`` fine cells, which decouples derivative accuracy from the
lattice spacing.

Fields are complex N x N matrices attached to every fine site.  A field may
additionally carry an analytic generator (value and derivative closures); in
that case shifts, derivatives and pointwise algebra stay exact and reads
beyond a decaying window are evaluated from the closed form instead of the
zero-tail policy.

All operations are pure: stored arrays are frozen and every operation
returns a fresh field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, SummationKernelObstructionError

PERIODIC = "periodic"
DECAYING = "decaying"

#: |per-class mean| / scale above which the periodic summation kernel refuses.
KERNEL_MEAN_RTOL = 1e-9


@dataclass(frozen=True)
class Lattice:
    """Uniform 1-d lattice window.

    sites     -- number of coarse sites M (>= 4)
    eps       -- coarse spacing (> 0), the Lambda shift length
    refine    -- fine cells per coarse cell r (>= 1)
    boundary  -- 'periodic' or 'decaying' (zero tail outside the window)
    """

    sites: int
    eps: float
    refine: int = 1
    boundary: str = PERIODIC

    def __post_init__(self):
        if self.sites < 4:
            raise ValueError("lattice needs at least 4 coarse sites")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.refine < 1:
            raise ValueError("refine must be >= 1")
        if self.boundary not in (PERIODIC, DECAYING):
            raise ValueError(f"unknown boundary policy {self.boundary!r}")

    @property
    def n_fine(self) -> int:
        return self.sites * self.refine

    @property
    def delta(self) -> float:
        return self.eps / self.refine

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    @property
    def length(self) -> float:
        return self.sites * self.eps

    def coordinates(self) -> np.ndarray:
        """Fine-grid coordinates x_i = i * delta."""
        return np.arange(self.n_fine) * self.delta

    def core(self, margin: int) -> slice:
        """Fine-index slice dropping ``margin`` coarse cells at each edge.

        On a periodic lattice the whole window is valid and the margin is
        ignored.
        """
        if self.periodic or margin <= 0:
            return slice(0, self.n_fine)
        m = margin * self.refine
        if 2 * m >= self.n_fine:
            raise ValueError("margin swallows the whole window")
        return slice(m, self.n_fine - m)


def _shift_array(data: np.ndarray, m: int, periodic: bool) -> np.ndarray:
    """result[i] = data[i + m] under the boundary policy."""
    if m == 0:
        return data
    if periodic:
        return np.roll(data, -m, axis=0)
    out = np.zeros_like(data)
    n = data.shape[0]
    if 0 < m < n:
        out[: n - m] = data[m:]
    elif -n < m < 0:
        out[-m:] = data[: n + m]
    return out


class MatrixField:
    """Lattice-site-indexed N x N complex matrix function.

    data is shaped (n_fine, N, N) and frozen.  ``gen``/``dgen`` are optional
    vectorised closures xs -> (len(xs), N, N) giving the exact value and
    x-derivative of an analytic seed.
    """

    __slots__ = ("lattice", "data", "gen", "dgen")

    def __init__(self, lattice: Lattice, data, gen=None, dgen=None,
                 require_invertible: bool = False):
        data = np.asarray(data, dtype=np.complex128)
        if data.ndim != 3 or data.shape[0] != lattice.n_fine \
                or data.shape[1] != data.shape[2]:
            raise DimensionMismatchError(
                f"field data shape {data.shape} incompatible with lattice")
        if not data.flags.owndata:
            data = data.copy()
        data.flags.writeable = False
        self.lattice = lattice
        self.data = data
        self.gen = gen
        self.dgen = dgen
        if require_invertible:
            conds = np.linalg.cond(self.data)
            if not np.all(np.isfinite(conds)):
                raise ValueError("field tagged invertible has a singular site")

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_function(cls, lattice, fn, dfn=None):
        """Sample an analytic generator; keeps the closures for exact reads."""
        xs = lattice.coordinates()
        return cls(lattice, fn(xs), gen=fn, dgen=dfn)

    @classmethod
    def constant(cls, lattice, matrix):
        matrix = np.asarray(matrix, dtype=np.complex128)
        n = matrix.shape[0]
        data = np.broadcast_to(matrix, (lattice.n_fine, n, n))

        def gen(xs, _m=matrix, _n=n):
            return np.broadcast_to(_m, (len(xs), _n, _n)).copy()

        def dgen(xs, _n=n):
            return np.zeros((len(xs), _n, _n), dtype=np.complex128)

        return cls(lattice, np.array(data), gen=gen, dgen=dgen)

    @classmethod
    def zeros(cls, lattice, n):
        return cls.constant(lattice, np.zeros((n, n)))

    @classmethod
    def identity(cls, lattice, n):
        return cls.constant(lattice, np.eye(n))

    # -- basic queries -----------------------------------------------------

    @property
    def N(self) -> int:
        return self.data.shape[1]

    @property
    def analytic(self) -> bool:
        return self.gen is not None

    def sampled(self) -> "MatrixField":
        """Drop the generator (values only)."""
        return MatrixField(self.lattice, self.data)

    def norm(self, margin: int = 0) -> float:
        """Max absolute entry over the core window."""
        sl = self.lattice.core(margin)
        block = self.data[sl]
        return float(np.max(np.abs(block))) if block.size else 0.0

    def lattice_mean(self) -> np.ndarray:
        """Mean matrix over all fine sites."""
        return self.data.mean(axis=0)

    def trace(self) -> np.ndarray:
        """Per-site matrix trace as a plain array."""
        return np.trace(self.data, axis1=1, axis2=2)

    def condition_numbers(self) -> np.ndarray:
        return np.linalg.cond(self.data)

    # -- algebra -----------------------------------------------------------

    def _check_compatible(self, other: "MatrixField"):
        if self.lattice is not other.lattice and self.lattice != other.lattice:
            raise DimensionMismatchError("fields live on different lattices")
        if self.N != other.N:
            raise DimensionMismatchError(
                f"matrix dimensions differ: {self.N} vs {other.N}")

    def __add__(self, other):
        self._check_compatible(other)
        gen = dgen = None
        if self.gen is not None and other.gen is not None:
            f, g = self.gen, other.gen
            gen = lambda xs: f(xs) + g(xs)
            if self.dgen is not None and other.dgen is not None:
                df, dg = self.dgen, other.dgen
                dgen = lambda xs: df(xs) + dg(xs)
        return MatrixField(self.lattice, self.data + other.data, gen, dgen)

    def __sub__(self, other):
        return self + (other * (-1.0))

    def __mul__(self, scalar):
        scalar = complex(scalar)
        gen = dgen = None
        if self.gen is not None:
            f = self.gen
            gen = lambda xs: scalar * f(xs)
            if self.dgen is not None:
                df = self.dgen
                dgen = lambda xs: scalar * df(xs)
        return MatrixField(self.lattice, scalar * self.data, gen, dgen)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __matmul__(self, other):
        """Pointwise matrix product."""
        self._check_compatible(other)
        gen = dgen = None
        if self.gen is not None and other.gen is not None:
            f, g = self.gen, other.gen
            gen = lambda xs: f(xs) @ g(xs)
            if self.dgen is not None and other.dgen is not None:
                df, dg = self.dgen, other.dgen
                dgen = lambda xs: df(xs) @ g(xs) + f(xs) @ dg(xs)
        return MatrixField(self.lattice, self.data @ other.data, gen, dgen)

    def inv(self) -> "MatrixField":
        gen = dgen = None
        if self.gen is not None:
            f = self.gen
            gen = lambda xs: np.linalg.inv(f(xs))
            if self.dgen is not None:
                df = self.dgen

                def dgen(xs, _f=f, _df=df):
                    fi = np.linalg.inv(_f(xs))
                    return -fi @ _df(xs) @ fi

        return MatrixField(self.lattice, np.linalg.inv(self.data), gen, dgen)

    # -- shifts and derivatives ---------------------------------------------

    def shift_fine(self, m: int) -> "MatrixField":
        """result(x) = self(x + m * delta)."""
        if m == 0:
            return self
        gen = dgen = None
        if self.gen is not None:
            f, d = self.gen, self.lattice.delta * m
            gen = lambda xs: f(xs + d)
            if self.dgen is not None:
                df = self.dgen
                dgen = lambda xs: df(xs + d)
            data = gen(self.lattice.coordinates())
        else:
            data = _shift_array(self.data, m, self.lattice.periodic)
        return MatrixField(self.lattice, data, gen, dgen)

    def shift(self, k: int) -> "MatrixField":
        """Coarse shift: result(x) = self(x + k * eps)."""
        return self.shift_fine(k * self.lattice.refine)

    def dx(self) -> "MatrixField":
        """Spatial derivative: exact for analytic seeds, else central O(delta^2)."""
        if self.gen is not None and self.dgen is not None:
            xs = self.lattice.coordinates()
            return MatrixField(self.lattice, self.dgen(xs), gen=self.dgen)
        d = self.lattice.delta
        data = (_shift_array(self.data, 1, self.lattice.periodic)
                - _shift_array(self.data, -1, self.lattice.periodic)) / (2.0 * d)
        return MatrixField(self.lattice, data)


def shift(field: MatrixField, k: int) -> MatrixField:
    """(Lambda^k f)(x) = f(x + k eps)."""
    return field.shift(k)


def derivative_x(field: MatrixField) -> MatrixField:
    return field.dx()


def _per_class(data: np.ndarray, lattice: Lattice) -> np.ndarray:
    """View (n_fine, ...) data as (M, refine, ...): coarse index first."""
    return data.reshape((lattice.sites, lattice.refine) + data.shape[1:])


def sum_inverse(field: MatrixField, variant: str = "lambda_minus_one",
                mean_policy: str = "error") -> MatrixField:
    """Solve (Lambda - 1) g = f.

    Both spelled variants, '(Lambda-1)^-1' and '(1-Lambda^-1)^-1 Lambda^-1',
    satisfy the same difference equation; on a decaying window they are
    realised as the left-to-right running sum g(x) = sum_{s>=1} f(x - s eps)
    with a zero left tail.  On a periodic lattice the zero-mean pseudo-inverse
    is used per shift-residue class; a nonzero class mean raises unless
    mean_policy='project'.
    """
    if variant not in ("lambda_minus_one", "one_minus_lambda_inv",
                       "(Lambda-1)^-1", "(1-Lambda^-1)^-1 Lambda^-1"):
        raise ValueError(f"unknown summation variant {variant!r}")
    lat = field.lattice
    blocks = _per_class(field.data, lat)
    if lat.periodic:
        fhat = np.fft.fft(blocks, axis=0)
        scale = max(float(np.max(np.abs(field.data))), 1e-300)
        mean_mag = float(np.max(np.abs(fhat[0]))) / lat.sites
        if mean_mag > KERNEL_MEAN_RTOL * scale and mean_policy != "project":
            raise SummationKernelObstructionError(
                "summation kernel obstruction: periodic source has nonzero "
                f"mean (|mean|/scale = {mean_mag / scale:.3e})")
        k = np.arange(lat.sites)
        sym = np.exp(2j * np.pi * k / lat.sites) - 1.0
        ghat = np.zeros_like(fhat)
        nz = sym != 0
        ghat[nz] = fhat[nz] / sym[nz].reshape((-1,) + (1,) * (fhat.ndim - 1))
        g = np.fft.ifft(ghat, axis=0)
    else:
        # Constant-left-tail split: the tail value rides on the exact linear
        # particular solution (x/eps) * c so the accumulated remainder stays
        # smooth across coarse-cell boundaries (no staircase under d/dx).
        c_edge = blocks[0].mean(axis=0)
        rem = blocks - c_edge
        g = np.zeros_like(blocks)
        g[1:] = np.cumsum(rem, axis=0)[:-1]
        xs_over_eps = (np.arange(lat.n_fine) / lat.refine).reshape(
            (lat.sites, lat.refine) + (1,) * (blocks.ndim - 2))
        g = g + xs_over_eps * c_edge
    return MatrixField(lat, g.reshape(field.data.shape))


# -- analytic field builders ------------------------------------------------


def gaussian_bump_field(lattice: Lattice, n: int, amps, centers, widths):
    """Sum of Gaussian bumps with constant matrix amplitudes (exact dx)."""
    amps = [np.asarray(a, dtype=np.complex128) for a in amps]
    centers = [float(c) for c in centers]
    widths = [float(w) for w in widths]
    if any(a.shape != (n, n) for a in amps):
        raise DimensionMismatchError("bump amplitudes must be N x N")

    def gen(xs):
        out = np.zeros((len(xs), n, n), dtype=np.complex128)
        for a, c, w in zip(amps, centers, widths):
            out += np.exp(-(((xs - c) / w) ** 2))[:, None, None] * a
        return out

    def dgen(xs):
        out = np.zeros((len(xs), n, n), dtype=np.complex128)
        for a, c, w in zip(amps, centers, widths):
            e = np.exp(-(((xs - c) / w) ** 2)) * (-2.0 * (xs - c) / w ** 2)
            out += e[:, None, None] * a
        return out

    return MatrixField.from_function(lattice, gen, dgen)


def random_bump_field(lattice: Lattice, n: int, rng, amplitude=0.1,
                      n_bumps=2, width_cells=None):
    """Random localized smooth field vanishing well inside the window edges."""
    L = lattice.length
    if width_cells is None:
        width = L / 10.0
    else:
        width = width_cells * lattice.eps
    centers = rng.uniform(0.35 * L, 0.65 * L, size=n_bumps)
    amps = [(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
            * amplitude for _ in range(n_bumps)]
    widths = [width * rng.uniform(0.8, 1.2) for _ in range(n_bumps)]
    return gaussian_bump_field(lattice, n, amps, centers, widths)


def random_periodic_field(lattice: Lattice, n: int, rng, amplitude=0.1,
                          modes=2, zero_mean=True):
    """Random trigonometric field with period = lattice length (exact dx)."""
    L = lattice.length
    terms = []
    for m in range(0 if not zero_mean else 1, modes + 1):
        if m == 0:
            a = (rng.standard_normal((n, n))
                 + 1j * rng.standard_normal((n, n))) * amplitude
            terms.append((0.0, a, None))
            continue
        w = 2.0 * np.pi * m / L
        a = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) \
            * amplitude / m
        b = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) \
            * amplitude / m
        terms.append((w, a, b))

    def gen(xs):
        out = np.zeros((len(xs), n, n), dtype=np.complex128)
        for w, a, b in terms:
            if b is None:
                out += np.broadcast_to(a, (len(xs), n, n))
            else:
                out += np.cos(w * xs)[:, None, None] * a
                out += np.sin(w * xs)[:, None, None] * b
        return out

    def dgen(xs):
        out = np.zeros((len(xs), n, n), dtype=np.complex128)
        for w, a, b in terms:
            if b is not None:
                out += (-w * np.sin(w * xs))[:, None, None] * a
                out += (w * np.cos(w * xs))[:, None, None] * b
        return out

    return MatrixField.from_function(lattice, gen, dgen)
