"""Fields on a logarithmic time mesh in (0, T]."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .norms import hs
from .spectral import Field, SpectralGrid, fft3, free_propagator_multiplier, ifft3
from .snapshots import write_snapshot

ROLES = ("v", "v'", "u_c")


@dataclass(frozen=True)
class LogTimeMesh:
    """Uniform nodes ``s_0 < ... < s_N`` in ``s = ln t`` (``N = n_steps``)."""

    s_min: float
    s_max: float
    n_steps: int

    def __post_init__(self):
        if not self.s_min < self.s_max:
            raise ValueError(f"s_min must be below s_max, got {self.s_min} >= {self.s_max}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ValueError(f"n_steps must be an integer >= 2, got {self.n_steps}")

    @classmethod
    def default(cls, T: float, span: float = 12.0, n_steps: int = 480) -> "LogTimeMesh":
        return cls(math.log(T) - span, math.log(T), n_steps)

    @property
    def ds(self) -> float:
        return (self.s_max - self.s_min) / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return self.s_min + self.ds * np.arange(self.n_steps + 1)

    @property
    def times(self) -> np.ndarray:
        return np.exp(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return self.s_min + self.ds * (np.arange(self.n_steps) + 0.5)

    @property
    def T(self) -> float:
        return math.exp(self.s_max)

    @property
    def t_min(self) -> float:
        return math.exp(self.s_min)

    def locate(self, s: float) -> tuple[int, float]:
        """Index j and weight w with s = (1-w) s_j + w s_{j+1}; w snaps to 0 on nodes."""
        u = (s - self.s_min) / self.ds
        j = int(math.floor(u))
        w = u - j
        if abs(w - 1.0) < 1e-9:
            j, w = j + 1, 0.0
        elif w < 1e-9:
            w = 0.0
        if j >= self.n_steps:
            j, w = self.n_steps, 0.0
        return j, w


class Trajectory:
    """One field per mesh node, all on one grid. Read-only once built."""

    def __init__(self, mesh: LogTimeMesh, grid: SpectralGrid, values: np.ndarray, role: str = "v"):
        values = np.asarray(values, dtype=complex)
        if values.shape != (mesh.n_steps + 1,) + grid.shape:
            raise ValueError(f"trajectory array has shape {values.shape}, "
                             f"expected {(mesh.n_steps + 1,) + grid.shape}")
        if role not in ROLES:
            raise ValueError(f"unknown trajectory role {role!r}")
        if not np.all(np.isfinite(values)):
            raise ValueError("trajectory contains non-finite values")
        values.flags.writeable = False
        self.mesh = mesh
        self.grid = grid
        self.values = values
        self.role = role

    @classmethod
    def constant(cls, mesh: LogTimeMesh, f: Field, role: str = "v") -> "Trajectory":
        vals = np.broadcast_to(f.physical().values, (mesh.n_steps + 1,) + f.grid.shape).copy()
        return cls(mesh, f.grid, vals, role)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, j: int) -> Field:
        return Field(self.grid, self.values[j])

    def __iter__(self) -> Iterator[Field]:
        return (self[j] for j in range(len(self)))

    @property
    def fields(self) -> list[Field]:
        return list(self)

    def initial(self) -> Field:
        return self[0]

    def final(self) -> Field:
        return self[len(self) - 1]

    def sample_array(self, t: float) -> np.ndarray:
        T = self.mesh.T
        if not t > 0:
            raise ValueError(f"sample time must be positive, got {t}")
        if t > T * (1 + 1e-12):
            raise ValueError(f"sample time {t} lies beyond T = {T}")
        s = math.log(t)
        if s <= self.mesh.s_min:
            return self.values[0]
        j, w = self.mesh.locate(s)
        if w == 0.0:
            return self.values[j]
        return (1.0 - w) * self.values[j] + w * self.values[j + 1]

    def midpoint_array(self, j: int) -> np.ndarray:
        """The field at the centre of step j (linear interpolation in s)."""
        if j < 0:
            return self.values[0]
        return 0.5 * (self.values[j] + self.values[j + 1])

    def export(self, out_dir, rho: float, prefix: str = "node", snapshots: bool = True) -> Path:
        """Write the CSV manifest plus (optionally) one WSFLD1 snapshot per node."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest = out / "trajectory.csv"
        with manifest.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "s", "t", "L2", "H_rho"])
            for j, (s, t) in enumerate(zip(self.mesh.nodes, self.mesh.times)):
                f = self[j]
                w.writerow([j, f"{s:.17e}", f"{t:.17e}", f"{f.l2():.17e}", f"{hs(f, rho):.17e}"])
                if snapshots:
                    write_snapshot(out / f"{prefix}_{j:05d}.wsf", f)
        return manifest


def sample(tr: Trajectory, t: float) -> Field:
    """Linear interpolation in ``s = ln t``; the earliest field is used below the mesh."""
    return Field(tr.grid, tr.sample_array(t))


def dress_array(v: np.ndarray, grid: SpectralGrid, gauge, t: float) -> np.ndarray:
    """``U(t) exp(-i phi(t)) v`` on raw arrays."""
    w = v if gauge is None else v * gauge.phase_factor(t)
    return ifft3(fft3(w) * free_propagator_multiplier(grid, t))


def dress(tr: Trajectory, gauge, t: float) -> Field:
    """u_c(t) = U(t) exp(-i phi(t)) v(t); ``gauge=None`` means phi = 0."""
    return Field(tr.grid, dress_array(tr.sample_array(t), tr.grid, gauge, t))
