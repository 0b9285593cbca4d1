"""Wave operator: asymptotic datum u0 -> solution u and modified profile w."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .bgauge import PhaseGauge
from .norms import hs
from .solver import PicardReport, SolverConfig, picard_solve
from .spectral import Field, fourier_image, free_propagate, inverse_fourier_image
from .trajectory import Trajectory, sample


def fh_norm(f: Field, rho: float) -> float:
    """||f; FH^rho|| = ||<omega>^rho F^-1 f||_2."""
    return hs(inverse_fourier_image(f), rho)


def asymptotic_to_v0(u0: Field) -> Field:
    """v0 = conj(F u0)."""
    return fourier_image(u0).conj()


def v0_to_asymptotic(v0: Field) -> Field:
    return inverse_fourier_image(v0.conj())


def _check_covered(v_traj: Trajectory, t_c: float) -> None:
    mesh = v_traj.mesh
    if not (mesh.t_min * (1 - 1e-12) <= t_c <= mesh.T * (1 + 1e-12)):
        raise ValueError(f"t_c = {t_c} is not covered by the mesh [{mesh.t_min}, {mesh.T}]")


def profile_tilde(v_traj: Trajectory, gauge: PhaseGauge, t_c: float) -> Field:
    """u~(1/t_c) = conj(F exp(-i phi(t_c)) v(t_c))."""
    _check_covered(v_traj, t_c)
    v = sample(v_traj, t_c)
    uc_tilde = v.replace(v.values * gauge.phase_factor(t_c))
    return fourier_image(uc_tilde).conj()


def reconstruct_u(v_traj: Trajectory, gauge: PhaseGauge, t_c: float) -> Field:
    """u(t) at t = 1/t_c, as U(t) u~(t)."""
    return free_propagate(profile_tilde(v_traj, gauge, t_c), 1.0 / t_c)


def invert_u(u: Field, t_phys: float) -> Field:
    """Map u(t) back to u_c(1/t) = U(1/t) F^-1 conj(U(-t) u(t))."""
    if not t_phys > 0:
        raise ValueError(f"t_phys must be positive, got {t_phys}")
    ut = free_propagate(u, -t_phys)
    return free_propagate(inverse_fourier_image(ut.conj()), 1.0 / t_phys)


def modified_profile_w(v_traj: Trajectory, gauge: PhaseGauge, t_phys: float) -> Field:
    """w(t) = F^-1 exp(-i phi(1/t)) F u~(t)."""
    t_c = 1.0 / t_phys
    u = reconstruct_u(v_traj, gauge, t_c)
    ut = free_propagate(u, -t_phys)
    Fu = fourier_image(ut)
    return inverse_fourier_image(Fu.replace(Fu.values * gauge.phase_factor(t_c)))


@dataclass
class ScatterResult:
    v_traj: Trajectory
    gauge: PhaseGauge
    u0: Field
    report: PicardReport
    rho: float
    u_samples: list = field(default_factory=list)
    w_samples: list = field(default_factory=list)
    table: list = field(default_factory=list)
    growth: list = field(default_factory=list)

    def table_rows(self):
        """(t_phys, FHrho_error, L2_norm), t_phys increasing."""
        return list(self.table)


def wave_operator(u0: Field, cfg: SolverConfig, times: Sequence[float] = (2, 5, 10, 20, 50),
                  solved: Optional[tuple] = None) -> ScatterResult:
    """Solve for v from v0 = conj(F u0) and sample u, w at the physical times.

    ``solved`` may carry an existing ``(v_traj, gauge, report)`` for this datum.
    """
    times = sorted(float(t) for t in times)
    if any(t < 1.0 / cfg.T * (1 - 1e-12) for t in times):
        raise ValueError(f"physical times must be >= 1/T = {1.0 / cfg.T}")
    if solved is None:
        solved = picard_solve(asymptotic_to_v0(u0), cfg)
    v_traj, gauge, report = solved
    res = ScatterResult(v_traj, gauge, u0, report, cfg.rho)
    for t in times:
        u = reconstruct_u(v_traj, gauge, 1.0 / t)
        w = modified_profile_w(v_traj, gauge, t)
        res.u_samples.append((t, u))
        res.w_samples.append((t, w))
        res.table.append((t, fh_norm(w - u0, cfg.rho), u.l2()))
        res.growth.append((t, fh_norm(free_propagate(u, -t), cfg.rho)))
    return res


def growth_bound_holds(growth: Sequence[tuple], slack: float = 1e-12) -> tuple[bool, float]:
    """Check |u~(t); FH^rho| <= a1 (1 + |ln t|)^2 with a1 fitted at the first time."""
    t1, g1 = growth[0]
    a1 = g1 / (1 + abs(math.log(t1))) ** 2
    ok = all(g <= a1 * (1 + abs(math.log(t))) ** 2 * (1 + slack) for t, g in growth)
    return ok, a1


def monotone_with_ripple(values: Sequence[float], ripple: float = 0.1) -> bool:
    """Each value is at most (1 + ripple) times its predecessor."""
    v = list(values)
    return all(b <= a * (1 + ripple) for a, b in zip(v, v[1:]))
