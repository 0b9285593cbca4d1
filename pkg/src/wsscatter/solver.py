"""Linearized propagation in log time and the Picard map v -> v'."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bgauge import NuQuadrature, PhaseGauge, apply_L_array, compute_B_midpoints, compute_B_static
from .norms import hs, hs_array
from .spectral import Field, fft3, free_propagator_multiplier
from .trajectory import LogTimeMesh, Trajectory

log = logging.getLogger(__name__)


class SeriesDivergenceError(RuntimeError):
    pass


class NonContractionError(RuntimeError):
    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


def default_theta(rho: float) -> float:
    return min(0.5 * (rho - 1.0), 0.125)


@dataclass(frozen=True)
class SolverConfig:
    """Analytic exponents plus every discretization knob of a solve.

    ``quad`` is the requested nu-rule; the solver replaces it by the
    mesh-aligned rule from :meth:`solver_quad`, which is never coarser.
    """

    rho: float = 1.25
    rho_prime: Optional[float] = None
    theta: Optional[float] = None
    eps_pm: float = 0.05
    T: float = 0.5
    mesh: Optional[LogTimeMesh] = None
    quad: NuQuadrature = field(default_factory=NuQuadrature)
    picard_tol: float = 1e-9
    picard_max_iter: int = 20
    expm_tol: float = 1e-15
    jobs: int = 1

    def __post_init__(self):
        if not 1.0 < self.rho < 1.5:
            raise ValueError(f"rho must lie in (1, 3/2), got {self.rho}")
        if self.rho_prime is None:
            object.__setattr__(self, "rho_prime", self.rho)
        if not 1.0 < self.rho_prime < 1.5:
            raise ValueError(f"rho_prime must lie in (1, 3/2), got {self.rho_prime}")
        if self.theta is None:
            object.__setattr__(self, "theta", default_theta(self.rho))
        cap = min(0.5, self.rho - 1.0)
        if not 0.0 < self.theta < cap:
            raise ValueError(f"theta must lie in (0, {cap:g}) = (0, min(1/2, rho - 1)), got {self.theta}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not self.eps_pm > 0:
            raise ValueError(f"eps_pm must be positive, got {self.eps_pm}")
        if self.mesh is None:
            object.__setattr__(self, "mesh", LogTimeMesh.default(self.T))
        elif abs(self.mesh.T - self.T) > 1e-12 * self.T:
            raise ValueError(f"mesh ends at {self.mesh.T}, not at T = {self.T}")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be at least 1")
        if not 0 < self.expm_tol < 1e-6:
            raise ValueError(f"expm_tol must lie in (0, 1e-6), got {self.expm_tol}")

    def solver_quad(self) -> NuQuadrature:
        ds = self.mesh.ds
        q = max(1, int(math.floor(self.quad.log_step / ds + 1e-9)))
        return NuQuadrature.aligned(ds, self.quad.nu_max, q * ds, self.quad.tail)


def _taylor_step(w: np.ndarray, apply, ds: float, tol: float, max_terms: int = 60) -> np.ndarray:
    """exp(-i ds L) w by the power series, stopped once a term drops below tol * |w|."""
    scale = np.sqrt(np.sum(np.abs(w) ** 2))
    if scale == 0:
        return w.copy()
    out = w.copy()
    term = w
    for k in range(1, max_terms + 1):
        term = (-1j * ds / k) * apply(term)
        out += term
        tn = np.sqrt(np.sum(np.abs(term) ** 2))
        if tn <= tol * scale:
            return out
    raise SeriesDivergenceError(
        f"exponential series did not reach {tol:.1e} within {max_terms} terms; refine the log-time mesh")


def linearized_solve(v_traj: Trajectory, gauge: PhaseGauge, v0p: Field, cfg: SolverConfig,
                     B_mid: Optional[np.ndarray] = None) -> Trajectory:
    """Integrate i dv'/ds = L(v) v' over the mesh from v'(s_min) = v0p.

    Each step applies exp(-i ds L_mid) with L built from B at the step
    midpoint. ``B_mid`` (one real array per step) overrides the B computed
    from ``v_traj``.
    """
    mesh, grid = cfg.mesh, v0p.grid
    if v_traj.mesh != mesh or v_traj.grid != grid:
        raise ValueError("trajectory, datum and config must share mesh and grid")
    if B_mid is None:
        B_mid = compute_B_midpoints(v_traj, gauge, cfg.solver_quad(), jobs=cfg.jobs)
    ds = mesh.ds
    out = np.empty((mesh.n_steps + 1,) + grid.shape, dtype=complex)
    w = v0p.physical().values.astype(complex)
    out[0] = w
    for j, t in enumerate(np.exp(mesh.midpoints)):
        prop = free_propagator_multiplier(grid, t)
        Bj = B_mid[j]
        w = _taylor_step(w, lambda x: apply_L_array(x, Bj, gauge, t, prop), ds, cfg.expm_tol)
        out[j + 1] = w
    return Trajectory(mesh, grid, out, role="v'")


def static_B_mid(gauge: PhaseGauge, mesh: LogTimeMesh) -> np.ndarray:
    return np.broadcast_to(gauge.b0_real, (mesh.n_steps,) + gauge.grid.shape)


def sup_hs_distance(a: Trajectory, b: Trajectory, sigma: float) -> float:
    grid = a.grid
    return max(hs_array(grid, fft3(a.values[j] - b.values[j]), sigma) for j in range(len(a)))


def sup_l2_distance(a: Trajectory, b: Trajectory) -> float:
    dv = a.grid.cell_volume
    return float(max(np.sqrt(dv * np.sum(np.abs(a.values[j] - b.values[j]) ** 2)) for j in range(len(a))))


def smallness_lhs(T: float, R: float, theta: float) -> float:
    """T^theta R^2 (1 + R^2 (1 + |ln T|))^8 with the constant set to one."""
    return T ** theta * R ** 2 * (1 + R ** 2 * (1 + abs(math.log(T)))) ** 8


@dataclass
class PicardReport:
    diffs: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    residual: float = 0.0
    iterations: int = 0
    smallness: float = 0.0
    converged: bool = False
    seed: str = "static"

    @property
    def contracting(self) -> bool:
        return all(r < 1.0 for r in self.ratios)

    def rows(self):
        """(iter, d_k, ratio) rows; the first ratio is undefined and reported as nan."""
        out = []
        for k, d in enumerate(self.diffs):
            r = self.ratios[k - 1] if k > 0 else float("nan")
            out.append((k, d, r))
        return out


def picard_solve(v0: Field, cfg: SolverConfig, seed: str = "static",
                 residual: bool = True) -> tuple[Trajectory, PhaseGauge, PicardReport]:
    """Fixed point of v -> linearized_solve(v) started from a seed trajectory.

    seed ``static`` solves the linear equation with B(u_c) replaced by B0;
    seed ``constant`` starts from v(t) = v0 for all t.
    """
    if seed not in ("static", "constant"):
        raise ValueError(f"unknown seed {seed!r}")
    mesh, grid = cfg.mesh, v0.grid
    quad = cfg.solver_quad()
    v0 = v0.physical()
    scale = hs(v0, cfg.rho)
    R = 2.0 * scale
    report = PicardReport(seed=seed, smallness=smallness_lhs(cfg.T, R, cfg.theta))
    if scale == 0:
        gauge = PhaseGauge.trivial(grid)
        report.converged = True
        return Trajectory.constant(mesh, v0), gauge, report
    if report.smallness > 0.5:
        log.warning("smallness left-hand side %.3g exceeds 1/2 at T=%g, R=%g", report.smallness, cfg.T, R)
    gauge = PhaseGauge(compute_B_static(v0, quad))
    if seed == "static":
        v = linearized_solve(Trajectory.constant(mesh, v0), gauge, v0, cfg, static_B_mid(gauge, mesh))
    else:
        v = Trajectory.constant(mesh, v0)
    v = Trajectory(mesh, grid, v.values, role="v")
    bad = 0
    for k in range(cfg.picard_max_iter):
        new = linearized_solve(v, gauge, v0, cfg)
        d = sup_hs_distance(new, v, cfg.rho)
        report.diffs.append(d)
        if k > 0:
            prev = report.diffs[-2]
            ratio = d / prev if prev > 0 else 0.0
            report.ratios.append(ratio)
            bad = bad + 1 if ratio >= 1.0 else 0
        report.iterations = k + 1
        log.info("picard iterate %d: d=%.3e", k, d)
        v = Trajectory(mesh, grid, new.values, role="v")
        if d < cfg.picard_tol * scale:
            report.converged = True
            break
        if bad >= 2:
            raise NonContractionError(
                f"Picard map is not contracting (ratios {report.ratios[-2:]}); reduce T or the data", report)
    if residual:
        report.residual = fixed_point_residual(v, gauge, cfg)
    return v, gauge, report


def fixed_point_residual(v_traj: Trajectory, gauge: PhaseGauge, cfg: SolverConfig) -> float:
    """sup_j |v_{j+1} - exp(-i ds L_mid) v_j| / |v_0| with B rebuilt from scratch."""
    v0n = v_traj.initial().l2()
    if v0n == 0:
        return 0.0
    mesh, grid = cfg.mesh, v_traj.grid
    B_mid = compute_B_midpoints(v_traj, gauge, cfg.solver_quad(), jobs=cfg.jobs)
    dv = grid.cell_volume
    worst = 0.0
    for j, t in enumerate(np.exp(mesh.midpoints)):
        prop = free_propagator_multiplier(grid, t)
        Bj = B_mid[j]
        w = _taylor_step(v_traj.values[j], lambda x: apply_L_array(x, Bj, gauge, t, prop), mesh.ds, cfg.expm_tol)
        err = np.sqrt(dv * np.sum(np.abs(v_traj.values[j + 1] - w) ** 2))
        worst = max(worst, float(err))
    return worst / v0n
