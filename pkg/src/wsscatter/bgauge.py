"""The nonlocal field B, its static limit B0, the phase gauge and the operator L.

B(u, t) = int_1^inf dnu nu^-3 sin(omega (nu - 1)) / omega  D0(nu) |u(t/nu)|^2

is evaluated with composite Simpson in y = ln(nu). Dilation and the wave
kernel are both applied on the Fourier side: the dilation is a separable
matrix per axis and the kernel is diagonal, so no transform is needed
between quadrature nodes.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .spectral import (Field, SpectralGrid, dilation_matrix, fft3, free_propagator_multiplier,
                       ifft3, wave_kernel_multiplier)
from .trajectory import Trajectory, dress_array

REAL_TOL = 1e-12


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class NuQuadrature:
    """Composite Simpson rule on ``[1, nu_max]`` in the variable ``y = ln nu``.

    ``weights`` already contain the Jacobian ``dnu = nu dy``. With ``tail`` set,
    the k = 0 contribution of ``[nu_max, inf)`` is added analytically.
    """

    nu_max: float = 1e4
    n_nodes: int = 257
    tail: bool = True

    def __post_init__(self):
        if not self.nu_max > 1:
            raise ValueError(f"nu_max must exceed 1, got {self.nu_max}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 3 or self.n_nodes % 2 == 0:
            raise ValueError(f"Simpson needs an odd n_nodes >= 3, got {self.n_nodes}")
        self.self_test()

    @classmethod
    def aligned(cls, ds: float, nu_max: float = 1e4, target_step: Optional[float] = None,
                tail: bool = True) -> "NuQuadrature":
        """A rule whose log-step is an integer multiple of ``ds``.

        With that choice every source time ``t / nu_i`` of a mesh midpoint is
        itself a (possibly extended) mesh midpoint. ``nu_max`` is rounded up
        so the number of intervals is even.
        """
        q = 1 if target_step is None else max(1, int(round(target_step / ds)))
        h = q * ds
        m = int(math.ceil(math.log(nu_max) / h - 1e-9))
        m += m % 2
        return cls(nu_max=math.exp(m * h), n_nodes=m + 1, tail=tail)

    @property
    def log_step(self) -> float:
        return math.log(self.nu_max) / (self.n_nodes - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        nu = np.exp(self.log_step * np.arange(self.n_nodes))
        nu[0] = 1.0
        return nu

    @cached_property
    def weights(self) -> np.ndarray:
        s = np.ones(self.n_nodes)
        s[1:-1:2] = 4.0
        s[2:-1:2] = 2.0
        return s * (self.log_step / 3.0) * self.nodes

    @property
    def tail_factor(self) -> float:
        """int_{nu_max}^inf nu^-3 (nu - 1) dnu."""
        if not self.tail:
            return 0.0
        return 1.0 / self.nu_max - 0.5 / self.nu_max ** 2

    def self_test(self, rtol: float = 1e-8) -> float:
        exact = 1.0 - 1.0 / self.nu_max
        got = float(np.sum(self.weights * self.nodes ** -2))
        err = abs(got - exact) / exact
        if err > rtol:
            raise QuadratureError(
                f"nu-quadrature integrates nu^-2 with relative error {err:.2e} > {rtol:.0e}; "
                f"use more nodes (log step {self.log_step:.4f})")
        return err


@dataclass(frozen=True, eq=False)
class PhaseGauge:
    """Holds B0 = B(v0); the phase is phi(t) = -ln(t) B0."""

    B0: Field

    def __post_init__(self):
        vals = self.B0.physical().values
        scale = max(float(np.abs(vals).max()), 1e-300)
        if np.abs(vals.imag).max() > REAL_TOL * max(scale, 1.0):
            raise ValueError("B0 must be real")
        object.__setattr__(self, "B0", Field(self.B0.grid, vals.real))

    @classmethod
    def trivial(cls, grid: SpectralGrid) -> "PhaseGauge":
        return cls(grid.zeros())

    @property
    def grid(self) -> SpectralGrid:
        return self.B0.grid

    @cached_property
    def b0_real(self) -> np.ndarray:
        return self.B0.values.real.copy()

    def phi_array(self, t: float) -> np.ndarray:
        if not t > 0:
            raise ValueError(f"phase needs t > 0, got {t}")
        return -math.log(t) * self.b0_real

    def phase_factor(self, t: float) -> np.ndarray:
        """exp(-i phi(t)) = exp(i ln(t) B0)."""
        return np.exp(-1j * self.phi_array(t))


def phi_at(gauge: PhaseGauge, t: float) -> Field:
    return Field(gauge.grid, gauge.phi_array(t))


# -- B on single times ---------------------------------------------------------

class _DilationBank:
    """Per-node 1D dilation matrices, cached per (grid, quadrature)."""

    _cache: dict = {}

    @classmethod
    def get(cls, grid: SpectralGrid, quad: NuQuadrature):
        key = (grid, quad.nu_max, quad.n_nodes)
        bank = cls._cache.get(key)
        if bank is None:
            h = grid.n_points // 2 + 1
            full = [dilation_matrix(grid, nu) for nu in quad.nodes]
            bank = (np.stack(full), np.stack([P[:h] for P in full]))
            if len(cls._cache) > 8:
                cls._cache.clear()
            cls._cache[key] = bank
        return bank


def _dilate_half(P: np.ndarray, Ph: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Dilate a stack of full spectra ``G[m, a, b, c]``; output keeps c >= 0 only."""
    M, n = G.shape[0], G.shape[1]
    h = Ph.shape[0]
    X = G.reshape(-1, n) @ Ph.T
    X = np.matmul(P, X.reshape(M * n, n, h))
    X = np.matmul(P, X.reshape(M, n, n * h))
    return X.reshape(M, n, n, h)


def _half_to_real(grid: SpectralGrid, Bh: np.ndarray) -> np.ndarray:
    return sfft.irfftn(Bh, s=grid.shape, norm="ortho")


def _assemble(grid: SpectralGrid, quad: NuQuadrature, spectra: Callable[[int], np.ndarray]) -> np.ndarray:
    """Sum the quadrature; ``spectra(i)`` is the full spectrum of |u_c(t/nu_i)|^2."""
    P_all, Ph_all = _DilationBank.get(grid, quad)
    kh = grid.k_half
    acc = np.zeros(kh.shape, dtype=complex)
    zero_mode = 0.0
    last = quad.n_nodes - 1
    for i, (nu, w) in enumerate(zip(quad.nodes, quad.weights)):
        X = _dilate_half(P_all[i], Ph_all[i], spectra(i)[None])[0]
        acc += (w * nu ** -3) * wave_kernel_multiplier(kh, nu - 1.0) * X
        if i == last:
            zero_mode = X[0, 0, 0]
    acc[0, 0, 0] += zero_mode * quad.tail_factor
    return acc


def _check_real_half(grid: SpectralGrid, Bh: np.ndarray) -> np.ndarray:
    full = sfft.ifftn(_expand_half(grid, Bh), norm="ortho")
    scale = max(float(np.abs(full).max()), 1e-300)
    if np.abs(full.imag).max() > REAL_TOL * max(scale, 1.0) * 10:
        raise QuadratureError("B has a non-negligible imaginary part")
    return full.real


def _expand_half(grid: SpectralGrid, Bh: np.ndarray) -> np.ndarray:
    n = grid.n_points
    h = n // 2 + 1
    full = np.empty(grid.shape, dtype=complex)
    full[:, :, :h] = Bh
    # Hermitian symmetry fills the negative c frequencies
    idx = (-np.arange(n)) % n
    rest = np.arange(h, n)
    full[:, :, rest] = np.conj(Bh[np.ix_(idx, idx, idx[rest])])
    return full


def compute_B(source: Callable[[float], Field], t: float, quad: NuQuadrature,
              grid: Optional[SpectralGrid] = None) -> Field:
    """B(u_c, t) from a sampler ``source(tau) -> u_c(tau)``."""
    if not t > 0:
        raise ValueError(f"compute_B needs t > 0, got {t}")
    first = source(t / quad.nodes[0])
    grid = grid or first.grid

    def spectra(i):
        u = first if i == 0 else source(t / quad.nodes[i])
        vals = u.physical().values
        return fft3(np.abs(vals) ** 2)

    Bh = _assemble(grid, quad, spectra)
    return Field(grid, _check_real_half(grid, Bh))


def compute_B_static(v0: Field, quad: NuQuadrature) -> Field:
    """B(v0): the same integral with the time-independent source |v0|^2."""
    G = fft3(np.abs(v0.physical().values) ** 2)
    Bh = _assemble(v0.grid, quad, lambda i: G)
    return Field(v0.grid, _check_real_half(v0.grid, Bh))


# -- B along a whole trajectory -----------------------------------------------

def _source_spectrum(v: np.ndarray, grid: SpectralGrid, gauge: Optional[PhaseGauge], tau: float) -> np.ndarray:
    return fft3(np.abs(dress_array(v, grid, gauge, tau)) ** 2)


def compute_B_midpoints(v_traj: Trajectory, gauge: Optional[PhaseGauge], quad: NuQuadrature,
                        steps: Optional[Sequence[int]] = None, block: int = 48, jobs: int = 1) -> np.ndarray:
    """B(u_c, t) at the midpoints of the requested mesh steps, as real arrays.

    The quadrature's log step must be an integer multiple q of the mesh step;
    then the source time of node i for midpoint j is midpoint ``j - q i``.
    Midpoints below the mesh use the earliest field, dressed at their own time.
    Returns an array of shape ``(len(steps),) + grid.shape``. Blocks of
    targets are independent; ``jobs > 1`` runs them on a thread pool and
    gives the same bits as a serial run.
    """
    mesh, grid = v_traj.mesh, v_traj.grid
    ds = mesh.ds
    q = quad.log_step / ds
    if abs(q - round(q)) > 1e-9 or round(q) < 1:
        raise QuadratureError(
            f"nu log-step {quad.log_step} is not a multiple of the mesh step {ds}; "
            "use NuQuadrature.aligned")
    q = int(round(q))
    steps = np.arange(mesh.n_steps) if steps is None else np.asarray(steps, dtype=int)
    n_nu = quad.n_nodes
    P_all, Ph_all = _DilationBank.get(grid, quad)
    kh = grid.k_half
    kernels = [(w * nu ** -3) * wave_kernel_multiplier(kh, nu - 1.0)
               for nu, w in zip(quad.nodes, quad.weights)]

    lo = int(steps.min()) - q * (n_nu - 1)
    hi = int(steps.max())
    cache: dict[int, np.ndarray] = {}

    def spectrum(m: int) -> np.ndarray:
        S = cache.get(m)
        if S is None:
            tau = math.exp(mesh.s_min + (m + 0.5) * ds)
            S = _source_spectrum(v_traj.midpoint_array(m), grid, gauge, tau)
            cache[m] = S
        return S

    for m in range(lo, hi + 1):
        spectrum(m)

    out = np.empty((len(steps),) + grid.shape)
    order = np.argsort(steps)

    def run_block(sel):
        js = steps[sel]
        acc = np.zeros((len(js),) + kh.shape, dtype=complex)
        tail_src = None
        for i in range(n_nu):
            G = np.stack([cache[j - q * i] for j in js])
            X = _dilate_half(P_all[i], Ph_all[i], G)
            acc += kernels[i] * X
            if i == n_nu - 1:
                tail_src = X[:, 0, 0, 0].copy()
        acc[:, 0, 0, 0] += tail_src * quad.tail_factor
        for r, k in enumerate(sel):
            out[k] = _check_real_half(grid, acc[r])

    blocks = [order[b:b + block] for b in range(0, len(steps), block)]
    if jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(run_block, blocks))
    else:
        for sel in blocks:
            run_block(sel)
    return out


# -- the operator L -------------------------------------------------------------

def apply_L_array(w: np.ndarray, B_t: np.ndarray, gauge: PhaseGauge, t: float,
                  prop: Optional[np.ndarray] = None) -> np.ndarray:
    """L w = -(e^{i phi} U(-t) [B(t) U(t) e^{-i phi} w] - B0 w) on raw arrays."""
    grid = gauge.grid
    if prop is None:
        prop = free_propagator_multiplier(grid, t)
    e = gauge.phase_factor(t)
    inner = ifft3(prop * fft3(e * w))
    outer = ifft3(np.conj(prop) * fft3(B_t * inner))
    return -(np.conj(e) * outer - gauge.b0_real * w)


def apply_L(v_traj: Trajectory, gauge: PhaseGauge, t: float, w: Field, quad: NuQuadrature) -> Field:
    """L(v) w at time t, with B(u_c, t) rebuilt from the dressed trajectory."""
    B_t = compute_B(lambda tau: Field(v_traj.grid, dress_array(v_traj.sample_array(tau), v_traj.grid, gauge, tau)),
                    t, quad)
    return Field(w.grid, apply_L_array(w.physical().values, B_t.values.real, gauge, t))
