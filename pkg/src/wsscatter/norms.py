"""Lebesgue and Sobolev-type norms of grid fields."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Field, bracket_pow_multiplier, omega_pow

KINDS = ("L", "Hdot", "H", "M", "Hdot_pm")


@dataclass(frozen=True)
class NormSpec:
    """Which norm to take.

    kind is one of ``L`` (L^r), ``Hdot`` (||omega^sigma f||_2), ``H``
    (||<omega>^sigma f||_2), ``M`` (||f||_inf + ||omega^sigma f||_{3/sigma})
    or ``Hdot_pm`` (geometric mean of the Hdot norms at sigma +- eps).
    """

    kind: str
    sigma: float = 0.0
    r: float = 2.0
    eps: float = 0.05

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "L" and not (1 <= self.r <= np.inf):
            raise ValueError(f"L^r needs r in [1, inf], got {self.r}")
        if self.kind == "M" and not (0 <= self.sigma < 1.5):
            raise ValueError(f"M^sigma needs 0 <= sigma < 3/2, got {self.sigma}")
        if self.kind == "Hdot_pm":
            if not self.eps > 0:
                raise ValueError("the +-0 norm needs eps > 0")
            if abs(self.sigma) + self.eps >= 1.5:
                raise ValueError(f"|sigma| + eps must stay below 3/2, got {abs(self.sigma) + self.eps}")


def lebesgue(f: Field, r: float = 2.0) -> float:
    vals = np.abs(f.physical().values)
    if np.isinf(r):
        return float(vals.max())
    return float((f.grid.cell_volume * np.sum(vals ** r)) ** (1.0 / r))


def hdot(f: Field, sigma: float) -> float:
    return omega_pow(f, sigma).l2()


def hs(f: Field, sigma: float) -> float:
    F = f.fourier()
    return F.replace(F.values * bracket_pow_multiplier(f.grid, sigma)).l2()


def norm(f: Field, spec: NormSpec) -> float:
    kind = spec.kind
    if kind == "L":
        return lebesgue(f, spec.r)
    if kind == "Hdot":
        return hdot(f, spec.sigma)
    if kind == "H":
        return hs(f, spec.sigma)
    if kind == "M":
        sup = lebesgue(f, np.inf)
        if spec.sigma == 0:
            return 2.0 * sup
        return sup + lebesgue(omega_pow(f, spec.sigma), 3.0 / spec.sigma)
    return float(np.sqrt(hdot(f, spec.sigma + spec.eps) * hdot(f, spec.sigma - spec.eps)))


def hs_array(grid, coeffs: np.ndarray, sigma: float) -> float:
    """H^sigma norm straight from unitary Fourier coefficients (no Field wrapper)."""
    w = bracket_pow_multiplier(grid, sigma)
    return float(np.sqrt(grid.cell_volume * np.sum(np.abs(coeffs * w) ** 2)))
