"""Run configuration: an INI-style file with bracketed sections and key = value lines."""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .bgauge import NuQuadrature
from .snapshots import read_snapshot
from .solver import SolverConfig
from .spectral import Field, SpectralGrid, gaussian, random_band_limited
from .trajectory import LogTimeMesh

DEFAULTS = {
    "grid": {"n_points": "32", "box_length": "16"},
    "solver": {"rho": "1.25", "rho_prime": "", "theta": "", "eps_pm": "0.05", "T": "0.5",
               "log_span": "12", "n_steps": "480", "picard_tol": "1e-9", "picard_max_iter": "20",
               "expm_tol": "1e-15"},
    "quad": {"nu_max": "1e4", "n_nodes": "257", "tail": "true"},
    "scenario": {"v0": "builtin:gaussian:0.05,1.5", "u0": "v0:builtin:gaussian:0.05,1.5",
                 "times": "2,5,10,20,50", "trials": "8"},
    "output": {"dir": "ws_out", "snapshots": "false"},
    "run": {"seed": "0", "jobs": "1"},
}

HELP = """\
configuration file (INI: [section] headers, key = value):
  [grid]     n_points = 32, box_length = 16
  [solver]   rho = 1.25, rho_prime = rho, theta = min((rho-1)/2, 1/8), eps_pm = 0.05,
             T = 0.5, log_span = 12, n_steps = 480, picard_tol = 1e-9 (relative to |v0; H^rho|),
             picard_max_iter = 20, expm_tol = 1e-15
  [quad]     nu_max = 1e4, n_nodes = 257, tail = true
  [scenario] v0 = builtin:gaussian:0.05,1.5, u0 = v0:builtin:gaussian:0.05,1.5,
             times = 2,5,10,20,50, trials = 8
  [output]   dir = ws_out, snapshots = false
  [run]      seed = 0, jobs = 1
builtin fields: gaussian:amp,width[,cx,cy,cz]  plane-wave-packet:amp,width,mx,my,mz
                two-bump:amp,width,separation  random:seed[,amp]
a u0 descriptor prefixed with "v0:" gives v0 instead; u0 = F^-1 conj(v0) is derived from it
"""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    grid: SpectralGrid
    solver: SolverConfig
    v0: str
    u0: str
    times: tuple
    trials: int
    out_dir: Path
    snapshots: bool
    seed: int
    jobs: int
    source: Optional[Path] = None

    @property
    def quad(self) -> NuQuadrature:
        return self.solver.quad


def _line_of(text: str, section: str, key: str) -> int:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            cur = s[1:-1].strip()
        elif cur == section and s.split("=", 1)[0].split(":", 1)[0].strip().lower() == key:
            return i
    return 0


def _num(sec, key, conv, text, section):
    raw = sec[key].strip()
    try:
        return conv(raw)
    except ValueError:
        line = _line_of(text, section, key)
        raise ConfigError(f"line {line}: [{section}] {key} = {raw!r} is not a valid {conv.__name__}") from None


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


_bool.__name__ = "boolean"


def load_config(path=None, text: Optional[str] = None) -> RunConfig:
    """Parse and validate a configuration; absent keys take the documented defaults."""
    if text is None:
        text = "" if path is None else Path(path).read_text(encoding="utf-8")
    cp = configparser.ConfigParser(interpolation=None, strict=True, empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path or "<config>"))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside any [section]") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"line {lineno}: cannot parse {line.strip()!r}") from None
    except configparser.Error as exc:
        raise ConfigError(f"line {getattr(exc, 'lineno', '?')}: {exc.message}") from None
    for section in cp.sections():
        if section not in DEFAULTS:
            line = _line_of(text, section, "") or next(
                (i for i, l in enumerate(text.splitlines(), 1) if l.strip() == f"[{section}]"), 0)
            raise ConfigError(f"line {line}: unknown section [{section}]")
        for key in cp[section]:
            if key not in DEFAULTS[section]:
                raise ConfigError(f"line {_line_of(text, section, key.lower())}: unknown key {key!r} in [{section}]")
    merged = {s: dict(d) for s, d in DEFAULTS.items()}
    for section in cp.sections():
        merged[section].update(cp[section])

    def get(section, key, conv):
        return _num(merged[section], key, conv, text, section)

    try:
        grid = SpectralGrid(get("grid", "n_points", int), get("grid", "box_length", float))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[grid] {exc}") from None
    opt = lambda key: None if not merged["solver"][key].strip() else get("solver", key, float)
    T = get("solver", "T", float)
    try:
        quad = NuQuadrature(get("quad", "nu_max", float), get("quad", "n_nodes", int), get("quad", "tail", _bool))
        if not T > 0:
            raise ValueError(f"T must be positive, got {T}")
        mesh = LogTimeMesh.default(T, get("solver", "log_span", float), get("solver", "n_steps", int))
        solver = SolverConfig(rho=get("solver", "rho", float), rho_prime=opt("rho_prime"), theta=opt("theta"),
                              eps_pm=get("solver", "eps_pm", float), T=T, mesh=mesh, quad=quad,
                              picard_tol=get("solver", "picard_tol", float),
                              picard_max_iter=get("solver", "picard_max_iter", int),
                              expm_tol=get("solver", "expm_tol", float))
    except ConfigError:
        raise
    except (ValueError, RuntimeError) as exc:
        raise ConfigError(str(exc)) from None
    try:
        times = tuple(float(x) for x in merged["scenario"]["times"].split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"line {_line_of(text, 'scenario', 'times')}: times must be comma-separated numbers") from None
    if not times or any(not math.isfinite(t) or t < 1.0 / T * (1 - 1e-12) for t in times):
        raise ConfigError(f"times must be finite and >= 1/T = {1.0 / T}")
    jobs = get("run", "jobs", int)
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")
    trials = get("scenario", "trials", int)
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    return RunConfig(grid, solver, merged["scenario"]["v0"].strip(), merged["scenario"]["u0"].strip(), times,
                     trials, Path(merged["output"]["dir"].strip()), get("output", "snapshots", _bool),
                     get("run", "seed", int), jobs, Path(path) if path else None)


def build_field(desc: str, grid: SpectralGrid) -> Field:
    """A builtin field (``builtin:name:args``) or a WSFLD1 snapshot path."""
    if desc.startswith("v0:"):
        from .scatter import v0_to_asymptotic
        return v0_to_asymptotic(build_field(desc[3:], grid))
    if not desc.startswith("builtin:"):
        f = read_snapshot(desc)
        if f.grid != grid:
            raise ConfigError(f"snapshot {desc} is on grid {f.grid}, config has {grid}")
        return f
    parts = desc.split(":", 2)
    name = parts[1]
    try:
        args = [float(a) for a in parts[2].split(",")] if len(parts) > 2 and parts[2] else []
    except ValueError:
        raise ConfigError(f"bad arguments in {desc!r}") from None
    if name == "gaussian":
        if len(args) not in (2, 5):
            raise ConfigError("gaussian takes amp,width[,cx,cy,cz]")
        center = tuple(args[2:5]) if len(args) == 5 else (0.0, 0.0, 0.0)
        return gaussian(grid, args[0], args[1], center)
    if name == "plane-wave-packet":
        if len(args) != 5:
            raise ConfigError("plane-wave-packet takes amp,width,mx,my,mz")
        k0 = tuple(2 * math.pi / grid.box_length * m for m in args[2:5])
        return gaussian(grid, args[0], args[1], k0=k0)
    if name == "two-bump":
        if len(args) != 3:
            raise ConfigError("two-bump takes amp,width,separation")
        amp, w, sep = args
        return gaussian(grid, amp, w, (-0.5 * sep, 0, 0)) + gaussian(grid, 0.5 * amp, w, (0.5 * sep, 0, 0))
    if name == "random":
        if len(args) not in (1, 2):
            raise ConfigError("random takes seed[,amp]")
        f = random_band_limited(grid, int(args[0]))
        return f * (args[1] if len(args) == 2 else 1.0)
    raise ConfigError(f"unknown builtin {name!r}")
