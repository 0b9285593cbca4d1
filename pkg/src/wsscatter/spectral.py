"""Periodic spectral grid, fields, and Fourier-diagonal operators.

Everything lives on the box [-L/2, L/2)^3 sampled with n points per axis.
Fourier coefficients use the unitary DFT of the sample array, so the
L^2 norm ``sqrt(dV * sum|.|^2)`` has the same value in both
representations.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.fft as sfft

PHYSICAL = "physical"
FOURIER = "fourier"


class NonFiniteFieldError(ValueError):
    pass


class ZeroModeError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid with ``n_points**3`` nodes on a cube of side ``box_length``."""

    n_points: int
    box_length: float

    def __post_init__(self):
        n = self.n_points
        if int(n) != n or n < 8 or n % 2:
            raise ValueError(f"n_points must be an even integer >= 8, got {n!r}")
        L = float(self.box_length)
        if not np.isfinite(L) or L <= 0:
            raise ValueError(f"box_length must be positive and finite, got {L!r}")
        object.__setattr__(self, "n_points", int(n))
        object.__setattr__(self, "box_length", L)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_points,) * 3

    @property
    def dx(self) -> float:
        return self.box_length / self.n_points

    @property
    def cell_volume(self) -> float:
        return self.dx ** 3

    @cached_property
    def x(self) -> np.ndarray:
        """1D coordinates, ``-L/2 + j*dx``."""
        return -0.5 * self.box_length + self.dx * np.arange(self.n_points)

    @cached_property
    def k(self) -> np.ndarray:
        """1D wavenumbers in FFT order: (2*pi/L) * {0, 1, ..., -n/2, ..., -1}."""
        return 2 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    @cached_property
    def r2(self) -> np.ndarray:
        x2 = self.x ** 2
        return x2[:, None, None] + x2[None, :, None] + x2[None, None, :]

    @cached_property
    def k2(self) -> np.ndarray:
        k2 = self.k ** 2
        return k2[:, None, None] + k2[None, :, None] + k2[None, None, :]

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def k_half(self) -> np.ndarray:
        """|k| restricted to the non-negative half of the last axis (rfft layout)."""
        h = self.n_points // 2 + 1
        return self.kabs[:, :, :h]

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.x, self.x, indexing="ij")

    def field(self, values, space: str = PHYSICAL) -> "Field":
        return Field(self, np.asarray(values, dtype=complex), space)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape, dtype=complex))


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on a grid, in physical or Fourier representation.

    ``values[ix, iy, iz]`` is the sample at ``(x[ix], x[iy], x[iz])`` (or the
    coefficient at the matching FFT-ordered wavenumber). Values are made
    read-only on construction.
    """

    grid: SpectralGrid
    values: np.ndarray
    space: str = PHYSICAL

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.dtype != np.complex128:
            vals = vals.astype(np.complex128)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if self.space not in (PHYSICAL, FOURIER):
            raise ValueError(f"unknown representation {self.space!r}")
        if not np.all(np.isfinite(vals)):
            bad = int(np.count_nonzero(~np.isfinite(vals)))
            raise NonFiniteFieldError(f"field has {bad} non-finite entries")
        if vals.flags.writeable:
            vals = vals.copy() if vals is self.values else vals
            vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def replace(self, values, space: Optional[str] = None) -> "Field":
        return Field(self.grid, values, self.space if space is None else space)

    def physical(self) -> "Field":
        return self if self.space == PHYSICAL else from_fourier(self)

    def fourier(self) -> "Field":
        return self if self.space == FOURIER else to_fourier(self)

    def __add__(self, other: "Field") -> "Field":
        other = _match(self, other)
        return self.replace(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        other = _match(self, other)
        return self.replace(self.values - other.values)

    def __mul__(self, scalar) -> "Field":
        return self.replace(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return self.replace(-self.values)

    def conj(self) -> "Field":
        if self.space == FOURIER:
            return to_fourier(from_fourier(self).conj())
        return self.replace(np.conj(self.values))

    def l2(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(np.abs(self.values) ** 2)))


def _match(a: Field, b: Field) -> Field:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    if b.space != a.space:
        b = b.fourier() if a.space == FOURIER else b.physical()
    return b


# -- raw-array transforms; the hot loops use these directly -------------------

def fft3(a: np.ndarray) -> np.ndarray:
    return sfft.fftn(a, norm="ortho")


def ifft3(a: np.ndarray) -> np.ndarray:
    return sfft.ifftn(a, norm="ortho")


def to_fourier(f: Field) -> Field:
    if f.space != PHYSICAL:
        raise ValueError("to_fourier expects a physical-space field")
    return Field(f.grid, fft3(f.values), FOURIER)


def from_fourier(F: Field) -> Field:
    if F.space != FOURIER:
        raise ValueError("from_fourier expects a Fourier-space field")
    return Field(F.grid, ifft3(F.values), PHYSICAL)


def _apply_multiplier(f: Field, mult: np.ndarray) -> Field:
    out = f.fourier().values * mult
    res = Field(f.grid, out, FOURIER)
    return res if f.space == FOURIER else from_fourier(res)


def omega_pow_multiplier(grid: SpectralGrid, sigma: float) -> np.ndarray:
    kabs = grid.kabs
    if sigma == 0:
        return np.ones(grid.shape)
    with np.errstate(divide="ignore"):
        m = kabs ** sigma
    m[0, 0, 0] = 0.0
    return m


def omega_pow(f: Field, sigma: float, zero_mode_tol: float = 1e-10) -> Field:
    """Apply ``omega**sigma`` with ``omega = |k|``.

    The zero mode is annihilated for ``sigma > 0``. Negative powers are only
    allowed on fields whose zero mode already vanishes.
    """
    if sigma < 0:
        F = f.fourier()
        c0 = abs(F.values[0, 0, 0])
        scale = max(1.0, float(np.sqrt(np.sum(np.abs(F.values) ** 2))))
        if c0 > zero_mode_tol * scale:
            mass = c0 * np.sqrt(f.grid.cell_volume) * f.grid.n_points ** 1.5
            raise ZeroModeError(
                f"omega^{sigma} undefined: zero-mode mass {mass:.3e} does not vanish"
            )
    return _apply_multiplier(f, omega_pow_multiplier(f.grid, sigma))


def bracket_pow_multiplier(grid: SpectralGrid, sigma: float) -> np.ndarray:
    return (1.0 + grid.k2) ** (0.5 * sigma)


def free_propagator_multiplier(grid: SpectralGrid, t: float) -> np.ndarray:
    return np.exp(-0.5j * t * grid.k2)


def free_propagate(f: Field, t: float) -> Field:
    """``U(t) = exp(i t Delta / 2)`` as the multiplier ``exp(-i t |k|^2 / 2)``."""
    return _apply_multiplier(f, free_propagator_multiplier(f.grid, t))


def wave_kernel_multiplier(kabs: np.ndarray, tau: float) -> np.ndarray:
    out = np.empty_like(kabs)
    nz = kabs > 0
    out[nz] = np.sin(kabs[nz] * tau) / kabs[nz]
    out[~nz] = tau
    return out


def wave_kernel(f: Field, tau: float) -> Field:
    """``sin(omega tau) / omega``, with the analytic value ``tau`` at k = 0."""
    if tau < 0:
        raise ValueError(f"wave_kernel needs tau >= 0, got {tau}")
    return _apply_multiplier(f, wave_kernel_multiplier(f.grid.kabs, tau))


# -- dilation ----------------------------------------------------------------

def interpolation_matrix(grid: SpectralGrid, nu: float) -> np.ndarray:
    """Rows evaluate the 1D trigonometric interpolant at ``x_j / nu``.

    Column m multiplies the unitary DFT coefficient of wavenumber ``k[m]``.
    The Nyquist column uses the cosine so real data stays real.
    """
    n = grid.n_points
    xs = grid.x / nu + 0.5 * grid.box_length
    E = np.exp(1j * np.outer(xs, grid.k)) / np.sqrt(n)
    E[:, n // 2] = np.cos(xs * grid.k[n // 2]) / np.sqrt(n)
    return E


def dilation_matrix(grid: SpectralGrid, nu: float) -> np.ndarray:
    """1D operator mapping DFT coefficients of f to DFT coefficients of f(x/nu)."""
    return sfft.fft(interpolation_matrix(grid, nu), axis=0, norm="ortho")


def apply_separable(P: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Apply the same n x n matrix along all three axes of ``a``."""
    n = a.shape[0]
    out = a.reshape(n, -1)
    out = (P @ out).reshape(a.shape)
    out = np.matmul(P, out)
    return out @ P.T


def dilate(f: Field, nu: float) -> Field:
    """Return ``x -> f(x / nu)`` for ``nu >= 1``.

    The sample points ``x / nu`` form a tensor grid inside the box, so the
    band-limited interpolant is evaluated exactly, axis by axis.
    """
    if nu < 1:
        raise ValueError(f"dilate requires nu >= 1 (samples must stay in the box), got {nu}")
    if nu == 1:
        return f
    E = interpolation_matrix(f.grid, nu)
    out = Field(f.grid, apply_separable(E, f.fourier().values), PHYSICAL)
    return out if f.space == PHYSICAL else to_fourier(out)


def gauge_multiply(f: Field, t: float) -> Field:
    """Pointwise multiplication by ``exp(i |x|^2 / 2t)``."""
    if not t > 0:
        raise ValueError(f"gauge_multiply needs t > 0, got {t}")
    phys = f.physical()
    return phys.replace(phys.values * np.exp(0.5j * phys.grid.r2 / t))


# -- the centred Fourier transform used to identify xi-space with x-space -----

def fourier_image(f: Field) -> Field:
    """Unitary DFT centred on x = 0, returned as a physical-space field.

    The wavenumber lattice is read back onto the spatial grid index by index,
    which is how asymptotic data ``u0`` and ``F u0`` share one grid.
    """
    v = np.fft.ifftshift(f.physical().values)
    return Field(f.grid, np.fft.fftshift(sfft.fftn(v, norm="ortho")))


def inverse_fourier_image(f: Field) -> Field:
    v = np.fft.ifftshift(f.physical().values)
    return Field(f.grid, np.fft.fftshift(sfft.ifftn(v, norm="ortho")))


# -- builders ----------------------------------------------------------------

def gaussian(grid: SpectralGrid, amp: float = 1.0, width: float = 1.0,
             center=(0.0, 0.0, 0.0), k0=(0.0, 0.0, 0.0)) -> Field:
    X, Y, Z = grid.coordinates()
    c = center
    r2 = (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2
    phase = np.exp(1j * (k0[0] * X + k0[1] * Y + k0[2] * Z))
    return Field(grid, amp * np.exp(-0.5 * r2 / width ** 2) * phase)


def plane_wave(grid: SpectralGrid, m=(1, 0, 0), amp: float = 1.0) -> Field:
    """``amp * exp(i k0.x)`` with ``k0 = (2 pi / L) * m`` on the lattice."""
    X, Y, Z = grid.coordinates()
    k0 = 2 * np.pi / grid.box_length * np.asarray(m, dtype=float)
    return Field(grid, amp * np.exp(1j * (k0[0] * X + k0[1] * Y + k0[2] * Z)))


def random_band_limited(grid: SpectralGrid, seed: int, rho: float = 1.25,
                        mode_cap: Optional[int] = None, real: bool = False) -> Field:
    """Random smooth field: complex Gaussian coefficients with a <k>^(-rho-2) envelope.

    Modes with ``|m| > mode_cap`` on any axis are zeroed; the default cap keeps
    the lower two thirds of the spectrum. Coefficients are drawn per lattice
    index, so fields with the same seed and cap agree across grid sizes that
    share the box length.
    """
    n = grid.n_points
    cap = n // 3 if mode_cap is None else int(mode_cap)
    if 2 * cap >= n:
        raise ValueError(f"mode_cap {cap} does not fit on an n={n} grid")
    rng = np.random.default_rng(seed)
    w = 2 * cap + 1
    coef = rng.standard_normal((w, w, w)) + 1j * rng.standard_normal((w, w, w))
    m = np.arange(-cap, cap + 1)
    kk = (2 * np.pi / grid.box_length) ** 2 * (
        m[:, None, None] ** 2 + m[None, :, None] ** 2 + m[None, None, :] ** 2)
    coef *= (1.0 + kk) ** (-0.5 * (rho + 2.0))
    F = np.zeros(grid.shape, dtype=complex)
    idx = np.mod(m, n)
    F[np.ix_(idx, idx, idx)] = coef
    # the stored coefficient is with respect to exp(i k (x + L/2))
    shift = np.exp(1j * np.pi * m)
    F[np.ix_(idx, idx, idx)] *= shift[:, None, None] * shift[None, :, None] * shift[None, None, :]
    f = from_fourier(Field(grid, F * n ** 1.5 / np.sqrt(grid.box_length ** 3), FOURIER))
    if real:
        f = f.replace(f.values.real)
    return f


def resample(f: Field, grid: SpectralGrid) -> Field:
    """Move a band-limited field to another grid with the same box by zero padding."""
    if grid.box_length != f.grid.box_length:
        raise ValueError("resample needs equal box lengths")
    n_from, n_to = f.grid.n_points, grid.n_points
    F = np.fft.fftshift(f.fourier().values) / n_from ** 1.5
    # coefficients relative to exp(i k (x + L/2)) are grid independent
    out = np.zeros(grid.shape, dtype=complex)
    if n_to >= n_from:
        a = (n_to - n_from) // 2
        out[a:a + n_from, a:a + n_from, a:a + n_from] = F
    else:
        a = (n_from - n_to) // 2
        out = F[a:a + n_to, a:a + n_to, a:a + n_to].copy()
    return from_fourier(Field(grid, np.fft.ifftshift(out) * n_to ** 1.5, FOURIER))
