import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import small_cfg, small_gaussian
from wsscatter.bgauge import PhaseGauge
from wsscatter.solver import picard_solve
from wsscatter.spectral import Field, SpectralGrid, gaussian, plane_wave
from wsscatter.trajectory import Trajectory
from wsscatter.verify import (DegenerateFitError, check_b_limit, check_continuity_modulus,
                              check_data_continuity, check_sobolev_ratios, fit_log_corrected_rate,
                              sobolev_ratio_23, sobolev_ratio_26)

TS = np.logspace(-3, -0.3, 12)


def test_fit_pure_power():
    fit = fit_log_corrected_rate([(t, t ** 0.3) for t in TS])
    assert abs(fit.theta - 0.3) < 1e-6
    assert abs(fit.p) < 1e-6
    assert fit.residual < 1e-10


def test_fit_log_corrected():
    fit = fit_log_corrected_rate([(t, t ** 0.3 * (1 + abs(math.log(t))) ** 2) for t in TS])
    assert abs(fit.theta - 0.3) < 0.02


def test_fit_constant():
    fit = fit_log_corrected_rate([(t, 2.5) for t in TS])
    assert abs(fit.theta) < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.5, 1.5), st.floats(-3, 3), st.floats(-5, 5))
def test_fit_recovers_planted(theta, p, logc):
    samples = [(t, math.exp(logc) * t ** theta * (1 + abs(math.log(t))) ** p) for t in TS]
    fit = fit_log_corrected_rate(samples)
    assert abs(fit.theta - theta) < 0.02
    assert abs(fit.p - p) < 0.05


def test_fit_rejects_degenerate():
    with pytest.raises(DegenerateFitError):
        fit_log_corrected_rate([(t, t) for t in TS[:4]])
    with pytest.raises(DegenerateFitError):
        fit_log_corrected_rate([(t, t) for t in np.linspace(0.1, 0.3, 8)])
    with pytest.raises(DegenerateFitError):
        fit_log_corrected_rate([(t, 0.0) for t in TS])
    with pytest.raises(DegenerateFitError):
        fit_log_corrected_rate([(t, t) for t in [1e-3] * 3 + [1e-1] * 3])


def test_sobolev_zero_pair(grid8):
    assert sobolev_ratio_23(grid8.zeros(), grid8.zeros()) == 0.0
    assert sobolev_ratio_26(grid8.zeros(), grid8.zeros()) == 0.0


def test_sobolev_plane_wave_closed_form():
    g = SpectralGrid(16, 10.0)
    m1, m2 = (1, 0, 2), (0, -1, 1)
    u, v = plane_wave(g, m1), plane_wave(g, m2)
    kk = 2 * np.pi / g.box_length
    k1 = kk * np.linalg.norm(m1)
    k2 = kk * np.linalg.norm(m2)
    k12 = kk * np.linalg.norm(np.add(m1, m2))
    expected = math.sqrt(k12) / (k1 * k2 * g.box_length ** 1.5)
    assert abs(sobolev_ratio_23(u, v) - expected) < 1e-12 * expected


def test_sobolev_stable_across_grids():
    grids = [SpectralGrid(n, 10.0) for n in (16, 24, 32)]
    rep = check_sobolev_ratios(grids, trials=4, seed=3)
    assert rep.passed
    assert rep.details["growth"] <= 1.2
    assert len(rep.rows) == 12
    assert rep.header == ("n_points", "trial", "ratio_2_3", "ratio_2_6")


def test_continuity_zero_trajectory(grid8):
    cfg = small_cfg()
    tr = Trajectory.constant(cfg.mesh, grid8.zeros())
    rep = check_continuity_modulus(tr, cfg)
    assert rep.passed and rep.details.get("vacuous")


def test_continuity_synthetic_slow_modulus(grid8):
    cfg = small_cfg(span=8.0, n_steps=320)
    base = gaussian(grid8, 1.0, 1.0).values
    bump = gaussian(grid8, 1.0, 0.7).values
    vals = np.stack([base + t ** 0.2 * bump for t in cfg.mesh.times])
    vals[0] = base
    rep = check_continuity_modulus(Trajectory(cfg.mesh, grid8, vals), cfg)
    assert not rep.passed
    assert abs(rep.details["theta_hat"] - 0.2) < 0.02


def test_continuity_synthetic_fast_modulus(grid8):
    cfg = small_cfg(span=8.0, n_steps=320)
    base = gaussian(grid8, 1.0, 1.0).values
    bump = gaussian(grid8, 1.0, 0.7).values
    vals = np.stack([base + t ** 0.9 * bump for t in cfg.mesh.times])
    vals[0] = base
    assert check_continuity_modulus(Trajectory(cfg.mesh, grid8, vals), cfg).passed


@pytest.fixture(scope="module")
def solved8():
    g = SpectralGrid(8, 8.0)
    cfg = small_cfg(span=6.0, n_steps=240, theta=0.1)
    v0 = small_gaussian(g, 0.3, 1.2)
    return cfg, v0, picard_solve(v0, cfg, residual=False)


def test_b_limit_constant_static_trajectory():
    g = SpectralGrid(8, 8.0)
    cfg = small_cfg(span=6.0, n_steps=240, theta=0.1)
    c = Field(g, np.full(g.shape, 0.5))
    from wsscatter.bgauge import compute_B_static
    gauge = PhaseGauge(compute_B_static(c, cfg.solver_quad()))
    rep = check_b_limit(Trajectory.constant(cfg.mesh, c), gauge, cfg)
    assert max(r[2] for r in rep.rows) < 1e-12
    assert rep.passed


def test_b_limit_small_run(solved8):
    cfg, v0, (v, gauge, _) = solved8
    rep = check_b_limit(v, gauge, cfg)
    assert rep.passed, rep.summary()
    assert rep.header == ("t", "beta", "norm_Hdot_beta_of_Bdiff")
    ts = [r[0] for r in rep.rows]
    assert math.log10(max(ts) / min(ts)) >= 2.0


def test_b_limit_adversarial_offset(solved8):
    cfg, v0, (v, gauge, _) = solved8
    bump = gaussian(v.grid, 0.05 * float(np.abs(gauge.b0_real).max()), 1.0)
    rep = check_b_limit(v, gauge, cfg, B0_override=Field(v.grid, gauge.b0_real + bump.values.real))
    assert not rep.passed


def test_b_limit_constant_offset_is_invisible(solved8):
    # a constant has no Hdot^beta content, so a pure constant shift cannot be detected
    cfg, v0, (v, gauge, _) = solved8
    a = check_b_limit(v, gauge, cfg)
    b = check_b_limit(v, gauge, cfg, B0_override=Field(v.grid, gauge.b0_real + 0.1))
    assert np.allclose([r[2] for r in a.rows], [r[2] for r in b.rows], rtol=1e-8)


def test_continuity_small_run(solved8):
    cfg, v0, (v, gauge, _) = solved8
    rep = check_continuity_modulus(v, cfg)
    assert rep.passed, rep.summary()


def test_data_continuity_small_run(solved8):
    cfg, v0, (v, gauge, _) = solved8
    rep = check_data_continuity(v0, cfg, seed=1, base=v)
    assert rep.passed, rep.summary()
    assert len(rep.rows) == 4
    plus, minus = rep.rows[0][3], rep.rows[3][3]
    assert abs(plus - minus) <= 1e-10 * plus


def test_data_continuity_zero_delta(solved8):
    cfg, v0, (v, gauge, _) = solved8
    rep = check_data_continuity(v0, cfg, scales=(0.0,), sign_probe=False, base=v)
    assert rep.rows[0][3] == 0.0


def test_report_csv(tmp_path):
    grids = [SpectralGrid(16, 10.0)]
    rep = check_sobolev_ratios(grids, trials=2)
    path = rep.write_csv(tmp_path / "s.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "n_points,trial,ratio_2_3,ratio_2_6"
    assert lines[1].startswith("16,0,") and "e-" in lines[1]


@pytest.mark.parametrize("beta", [0.75, 1.0])
def test_b_limit_static_limit_monotone(solved8, beta):
    cfg, v0, (v, gauge, _) = solved8
    rep = check_b_limit(v, gauge, cfg, beta=beta)
    assert rep.details["monotone"]
    qs = [r[2] for r in rep.rows]
    assert qs[0] < qs[-1]
