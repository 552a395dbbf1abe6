import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlslab.errors import ConfigurationError, DomainError, NumericError
from nlslab.grid import Grid2D, l2_norm
from nlslab.nls import (
    NLSConfig,
    SplitStepper,
    Trajectory,
    check_admissible,
    dispersive_ratio,
    epsilon_scan,
    energy_bandwidth,
    extract_scattering_state,
    initial_profile,
    linear_propagate,
    measure_decay,
    nonlinear_phase_step,
    solve_nls,
    strichartz_ratio,
    wrap_horizon,
    xt_norm,
)
from nlslab.operators import build_operator
from nlslab.potentials import PotentialSpec


def small_config(**kw):
    base = dict(n=32, L=8.0, t_end=3.0, dt=0.01, sample_dt=0.5, epsilon=0.2)
    base.update(kw)
    return NLSConfig(**base)


@pytest.mark.parametrize("kw,msg", [({"p": 1.5}, "p > 2"), ({"lam": 1 + 0.1j}, "Imλ ≤ 0"),
                                    ({"alpha": 2.0}, "alpha"), ({"dt": 0.0}, "dt")])
def test_config_rejects_invalid_parameters(kw, msg):
    with pytest.raises(ConfigurationError, match=msg):
        small_config(**kw)


@settings(max_examples=40, deadline=None)
@given(lr=st.floats(-3, 3), li=st.floats(-3, 0), p=st.floats(2.1, 6.0), amp=st.floats(1e-3, 2.0))
def test_nonlinear_step_is_the_exact_flow(lr, li, p, amp):
    # compose two half steps and compare with one full step; check the modulus ODE
    u = np.array([amp * np.exp(0.3j)])
    lam = complex(lr, li)
    a = nonlinear_phase_step(nonlinear_phase_step(u, 0.05, lam, p), 0.05, lam, p)
    b = nonlinear_phase_step(u, 0.1, lam, p)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-14)
    # |u|^{-(p-1)} grows linearly: d/dt |u|^{1-p} = -(p-1) Im(lam)
    lhs = np.abs(b) ** (1 - p)
    assert lhs == pytest.approx(amp ** (1 - p) - (p - 1) * li * 0.1, rel=1e-10)


def test_linear_run_matches_eigen_propagation():
    cfg = small_config(lam=0.0, dt=1e-3, t_end=2.0, sample_dt=1.0)
    traj = solve_nls(cfg)
    op = build_operator(cfg.grid, cfg.potential, "dense")
    u0 = initial_profile(cfg)
    exact = linear_propagate(op, 1.0, 2.0, u0, "eigen")
    err = l2_norm(cfg.grid, traj.fields[-1] - exact) / l2_norm(cfg.grid, exact)
    assert err < 1e-6


def test_strang_order_two():
    g = Grid2D(32, 8.0)
    V = PotentialSpec.gaussian_bump(1.0, 1.0).value(g.r2)
    u0 = 0.5 * g.gaussian(1.0)

    def run(dt):
        st_ = SplitStepper(g, V, dt, 1.0, 3.0)
        u = u0
        for _ in range(int(round(1.0 / dt))):
            u = st_.step(u)
        return u

    a, b, c = run(0.04), run(0.02), run(0.01)
    order = math.log2(l2_norm(g, a - b) / l2_norm(g, b - c))
    assert 1.8 <= order <= 2.2


def test_mass_is_conserved_for_real_lambda_and_decreases_otherwise():
    traj = solve_nls(small_config(lam=1.0))
    assert np.allclose(traj.l2, traj.l2[0], rtol=1e-12)
    traj = solve_nls(small_config(lam=1 - 0.5j))
    assert np.all(np.diff(traj.l2) < 0)


def test_trajectory_arrays_are_read_only():
    traj = solve_nls(small_config())
    with pytest.raises(ValueError):
        traj.linf[0] = 0.0


def test_non_finite_field_reports_time():
    cfg = small_config()
    u0 = initial_profile(cfg).copy()
    u0[0, 0] = np.nan
    with pytest.raises(NumericError) as exc:
        solve_nls(cfg, u0)
    assert exc.value.time == pytest.approx(1.5)


def test_decay_fit_recovers_a_power_law():
    cfg = small_config()
    t = np.linspace(1, 40, 79)
    traj = Trajectory(t, 0.05 * t**-1.0, np.ones_like(t), np.ones_like(t), None, cfg, 0.01)
    fit = measure_decay(traj, (1, 40))
    assert fit.gamma == pytest.approx(1.0, abs=1e-12)
    assert fit.C0_over_epsilon == pytest.approx(0.05 / cfg.epsilon)
    with pytest.warns(UserWarning, match="less than a decade"):
        measure_decay(traj, (2, 10))


def test_wrap_horizon_scales_with_box():
    g1, g2 = Grid2D(64, 16.0), Grid2D(128, 32.0)
    f1, f2 = g1.gaussian(1.0), g2.gaussian(1.0)
    assert energy_bandwidth(g1, f1) == pytest.approx(energy_bandwidth(g2, f2), rel=0.1)
    assert wrap_horizon(g2, f2) == pytest.approx(2 * wrap_horizon(g1, f1), rel=0.1)


def test_scattering_tail_for_linear_flow_vanishes():
    cfg = small_config(lam=0.0, t_end=3.0)
    traj = solve_nls(cfg)
    op = build_operator(cfg.grid, cfg.potential)
    res = extract_scattering_state(traj, op, [1.0, 2.0, 3.0], method="split", final_state=False)
    assert np.all(res.tails < 1e-12)


def test_scattering_needs_stored_fields():
    cfg = small_config(store_fields=False)
    traj = solve_nls(cfg)
    with pytest.raises(DomainError):
        extract_scattering_state(traj, build_operator(cfg.grid, cfg.potential))


def test_admissibility():
    check_admissible(4, 4)
    check_admissible(math.inf, 2)
    with pytest.raises(DomainError, match=r"\(2, inf\) is excluded"):
        check_admissible(2, math.inf)
    with pytest.raises(DomainError):
        check_admissible(3, 3)


def test_free_strichartz_ratio_is_resolution_independent():
    ratios = []
    for n in (32, 64):
        g = Grid2D(n, 8.0)
        f = g.gaussian(1.0)
        ratios.append(strichartz_ratio(build_operator(g, PotentialSpec.zero()), f, 4, 4, 2.0, 0.01))
    assert ratios[0] == pytest.approx(ratios[1], rel=1e-6)


def test_free_dispersive_ratio_below_sharp_constant():
    g = Grid2D(128, 32.0)
    r = dispersive_ratio(build_operator(g, PotentialSpec.zero()), g.gaussian(1.0), [1.0, 4.0, 8.0])
    # exp(i t Delta/2) maps L1 to L-inf with norm (2 pi t)^-1; Gaussians are extremal as t grows
    assert np.all(r <= 1 / (2 * np.pi) + 1e-12)
    assert r[-1] == pytest.approx(1 / (2 * np.pi), rel=0.02)


def test_xt_norm_uses_stored_fields():
    cfg = small_config()
    traj = solve_nls(cfg)
    v = xt_norm(traj, None, 1.5)
    assert v == pytest.approx(traj.xt_partial[-1], rel=1e-12)
    with pytest.raises(DomainError):
        xt_norm(traj, None, 2.5)


def test_epsilon_scan_reports_largest_amplitude_in_range():
    cfg = small_config(t_end=3.0)
    fits, eps = epsilon_scan(cfg, [0.4, 0.1, 0.2], (1.0, 3.0), gamma_range=(-10.0, 10.0))
    assert [f.epsilon for f in fits] == [0.1, 0.2, 0.4]
    assert eps == 0.4
    _, none = epsilon_scan(cfg, [0.1], (1.0, 3.0), gamma_range=(50.0, 60.0))
    assert none is None
