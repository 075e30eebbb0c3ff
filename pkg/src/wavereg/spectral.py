"""Dense Fourier series on the 2*pi-periodic line and the inverse-derivative multiplier.

Coefficients follow the mean-value convention

    u_k = (1/2pi) int_T e^{-i k y} u(y) dy,    k = -K..K,

stored densely (array index j <-> wavenumber k = j - K), with no Hermitian
symmetry imposed: fields are genuinely complex-valued. The zero-mode
projection is the mean, mean(u) = u_0.

The central operator is the Fourier multiplier that inverts d/dx away from
the mean,

    (m u)_k = u_k / k   (k != 0),      (m u)_0 = 0,

which satisfies, exactly on the retained band,

    d/dx (m u) = m (d/dx u) = i (u - mean(u)),
    -i d^2/dx^2 (m u) = d/dx u,
    (m u)(x) = (m u)(0) + i int_0^x (u - mean(u)) dy.

Sobolev norms use the weight max(1, |k|)^{2s}; under that weight
||m u||_{H^{s+1}} equals ||u - mean(u)||_{H^s} exactly, and the L^2 norm of the
coefficients is (2pi)^{-1/2} times the physical root-mean-square integral.

Products are formed on a zero-padded collocation grid at least twice the size
of the retained band, so pair and triple products of band-limited fields are
alias-free after truncation back to |k| <= K.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Grid",
    "SpectralField",
    "zeros",
    "from_modes",
    "random_field",
    "to_physical",
    "to_spectral",
    "project_mean",
    "remove_mean",
    "apply_m",
    "derivative",
    "conjugate",
    "norm",
    "multiply",
    "full_convolution",
    "pair_mean",
    "quartic_mean",
]


@dataclass(frozen=True)
class Grid:
    """Retained band |k| <= n_modes plus a collocation count.

    n_points defaults to 4*n_modes + 2, large enough that cubic products and
    quartic means of band-limited fields are exact (no aliasing into the
    retained band). Any n_points >= 2*n_modes + 1 is accepted; smaller
    collocation grids alias, which `to_spectral` makes reproducible rather
    than hiding (k lands on k mod n_points).
    """

    n_modes: int
    n_points: int = 0

    def __post_init__(self) -> None:
        if self.n_modes < 0:
            raise ValueError("n_modes must be nonnegative")
        if self.n_points == 0:
            object.__setattr__(self, "n_points", 4 * self.n_modes + 2)
        if self.n_points < 2 * self.n_modes + 1:
            raise ValueError(
                f"n_points={self.n_points} cannot represent the band "
                f"|k| <= {self.n_modes}; need at least {2 * self.n_modes + 1}"
            )

    @property
    def n_coeffs(self) -> int:
        return 2 * self.n_modes + 1

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(-self.n_modes, self.n_modes + 1)

    def points(self, n_points: int | None = None) -> np.ndarray:
        n = self.n_points if n_points is None else int(n_points)
        return 2.0 * np.pi * np.arange(n) / n

    def index(self, k: int) -> int:
        if abs(k) > self.n_modes:
            raise ValueError(f"wavenumber {k} outside band |k| <= {self.n_modes}")
        return k + self.n_modes


@dataclass(frozen=True)
class SpectralField:
    """A field given by its dense coefficient vector on a Grid."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.grid.n_coeffs,):
            raise ValueError(
                f"expected {self.grid.n_coeffs} coefficients, got shape {c.shape}"
            )
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * complex(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs / complex(scalar))

    def coeff(self, k: int) -> complex:
        return complex(self.coeffs[self.grid.index(k)])


def _check_same_grid(a: SpectralField, b: SpectralField) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def zeros(grid: Grid) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.n_coeffs, dtype=complex))


def from_modes(grid: Grid, modes: Mapping[int, complex]) -> SpectralField:
    """Field with prescribed coefficients, e.g. {1: 1.0} for e^{ix}."""
    c = np.zeros(grid.n_coeffs, dtype=complex)
    for k, amp in modes.items():
        c[grid.index(int(k))] = amp
    return SpectralField(grid, c)


def random_field(
    grid: Grid,
    rng: np.random.Generator,
    band: tuple[int, int] = (1, 8),
    real_valued: bool = False,
    zero_mean: bool = True,
) -> SpectralField:
    """Random field supported on band[0] <= |k| <= band[1].

    real_valued enforces Hermitian coefficients u_{-k} = conj(u_k); zero_mean
    zeroes the k = 0 coefficient (band[0] >= 1 already implies it).
    """
    lo, hi = band
    if not (0 <= lo <= hi <= grid.n_modes):
        raise ValueError(f"band {band} not inside |k| <= {grid.n_modes}")
    c = np.zeros(grid.n_coeffs, dtype=complex)
    ks = np.arange(lo, hi + 1)
    draw = rng.standard_normal((2, ks.size)) + 1j * rng.standard_normal((2, ks.size))
    c[ks + grid.n_modes] = draw[0]
    if real_valued:
        c[-ks + grid.n_modes] = np.conj(draw[0])
    else:
        c[-ks + grid.n_modes] = draw[1]
    if lo == 0:
        if zero_mean:
            c[grid.n_modes] = 0.0
        elif real_valued:
            c[grid.n_modes] = c[grid.n_modes].real
    return SpectralField(grid, c)


def to_physical(f: SpectralField, n_points: int | None = None) -> np.ndarray:
    """Values on the uniform collocation grid x_j = 2*pi*j/n.

    Exact (up to round-off) synthesis of the trigonometric polynomial whenever
    n_points >= the band size; smaller n_points would fold coefficients and is
    rejected.
    """
    grid = f.grid
    n = grid.n_points if n_points is None else int(n_points)
    if n < grid.n_coeffs:
        raise ValueError("n_points too small to synthesize the retained band")
    buf = np.zeros(n, dtype=complex)
    buf[np.mod(grid.wavenumbers, n)] = f.coeffs
    return np.fft.ifft(buf) * n


def to_spectral(grid: Grid, values: np.ndarray) -> SpectralField:
    """Coefficients of the sampled signal; frequencies fold as k mod n_points.

    With n = len(values), the discrete transform cannot distinguish e^{ikx}
    from e^{i(k+n)x}; e.g. on n = 2K+1 points the signal e^{i(K+1)x} lands on
    the retained mode K+1-n = -K. Callers who need alias-free analysis must
    sample on at least as many points as the signal's true bandwidth.
    """
    values = np.asarray(values, dtype=complex)
    if values.ndim != 1:
        raise ValueError("values must be one-dimensional")
    n = values.size
    if n < grid.n_coeffs:
        raise ValueError("need at least as many samples as retained coefficients")
    hat = np.fft.fft(values) / n
    return SpectralField(grid, hat[np.mod(grid.wavenumbers, n)])


def project_mean(f: SpectralField) -> complex:
    """The zero-mode (mean value) of the field."""
    return complex(f.coeffs[f.grid.n_modes])


def remove_mean(f: SpectralField) -> SpectralField:
    c = f.coeffs.copy()
    c[f.grid.n_modes] = 0.0
    return SpectralField(f.grid, c)


def apply_m(f: SpectralField) -> SpectralField:
    """Divide by the wavenumber away from the mean: (m u)_k = u_k / k, (m u)_0 = 0."""
    grid = f.grid
    k = grid.wavenumbers.astype(float)
    k[grid.n_modes] = 1.0  # avoid 0/0; the mean is zeroed below
    c = f.coeffs / k
    c[grid.n_modes] = 0.0
    return SpectralField(grid, c)


def derivative(f: SpectralField, order: int = 1) -> SpectralField:
    if order < 0:
        raise ValueError("order must be nonnegative")
    return SpectralField(f.grid, f.coeffs * (1j * f.grid.wavenumbers) ** order)


def conjugate(f: SpectralField) -> SpectralField:
    """Coefficients of the complex conjugate field: conj(u)_k = conj(u_{-k})."""
    return SpectralField(f.grid, np.conj(f.coeffs[::-1]))


def norm(f: SpectralField, kind: str = "L2", s: float | None = None) -> float:
    """Norms in the coefficient convention.

    kind = "L2": (sum |u_k|^2)^{1/2} (equals (2pi)^{-1/2} times the physical
    L^2 integral norm); "Hs" with exponent s: weight max(1,|k|)^s per mode;
    "Linf": max |u(x)| on a 4x oversampled collocation grid.
    """
    if kind == "L2":
        return float(np.linalg.norm(f.coeffs))
    if kind == "Hs":
        if s is None:
            raise ValueError("Hs norm needs the exponent s")
        w = np.maximum(1.0, np.abs(f.grid.wavenumbers)) ** float(s)
        return float(np.linalg.norm(w * f.coeffs))
    if kind == "Linf":
        vals = to_physical(f, 4 * f.grid.n_points)
        return float(np.max(np.abs(vals)))
    raise ValueError(f"unknown norm kind {kind!r}")


def multiply(fields: Sequence[SpectralField]) -> SpectralField:
    """Pointwise product of 2 or 3 fields, dealiased by zero padding.

    The product is formed on a collocation grid of at least twice the band
    size (and at least the grid's own n_points), then truncated back to
    |k| <= K. For the default grid (n_points = 4K+2) pair and triple products
    of band-limited inputs are exact on the retained band.
    """
    if not 2 <= len(fields) <= 3:
        raise ValueError("multiply takes 2 or 3 fields")
    grid = fields[0].grid
    for g in fields[1:]:
        _check_same_grid(fields[0], g)
    n_big = max(2 * grid.n_coeffs, grid.n_points)
    prod = to_physical(fields[0], n_big)
    for g in fields[1:]:
        prod = prod * to_physical(g, n_big)
    return to_spectral(grid, prod)


def full_convolution(a: SpectralField, b: SpectralField) -> np.ndarray:
    """Exact product coefficients on the extended band |k| <= Ka + Kb.

    Returns the dense coefficient vector of a*b without any truncation,
    indexed by k = -(Ka+Kb) .. Ka+Kb.
    """
    return np.convolve(a.coeffs, b.coeffs)


def pair_mean(a: SpectralField, b: SpectralField) -> complex:
    """mean(a*b) = sum_k a_k b_{-k}, exact."""
    _check_same_grid(a, b)
    return complex(np.dot(a.coeffs, b.coeffs[::-1]))


def quartic_mean(
    a: SpectralField, b: SpectralField, c: SpectralField, d: SpectralField
) -> complex:
    """mean(a*b*c*d) via two exact convolutions (no grid truncation)."""
    ab = np.convolve(a.coeffs, b.coeffs)
    cd = np.convolve(c.coeffs, d.coeffs)
    return complex(np.dot(ab, cd[::-1]))
