"""Adaptive time-domain engine: sampling, spectra, detection plumbing."""

import math

import numpy as np
import pytest

from pfd import (BracketError, SimConfig, Trajectory, UnsupportedTopologyError,
                 WindowError, detect_period_doubling, integrate, poincare_map,
                 pump_smallsignal, state_derivative, steady_spectrum,
                 td_threshold, varactor_voltage)

VTH = 0.038030875924037137


def test_simconfig_validation():
    with pytest.raises(ValueError):
        SimConfig(periods_measure=100)
    with pytest.raises(ValueError):
        SimConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        SimConfig(loss_mode="spongy")
    assert SimConfig(periods_measure=128).periods_measure == 128


def test_varactor_voltage_cubic(case_design):
    var = case_design.varactor
    q = 1.3e-12
    u = q / var.c_dc
    b3 = 0.5 * var.c_d**2 - var.c_d2 / 3.0
    expect = u * (1.0 - 0.5 * var.c_d * u + b3 * u * u)
    assert varactor_voltage(case_design, q) == pytest.approx(expect)
    assert varactor_voltage(case_design, 0.0) == 0.0
    # small-charge limit is the linear capacitor
    assert varactor_voltage(case_design, 1e-20) == pytest.approx(
        1e-20 / var.c_dc, rel=1e-6)


def test_state_derivative_rest_is_fixed_point(case_design):
    d = state_derivative(np.zeros(7), 0.0, case_design, 0.0)
    assert np.all(d == 0.0)


def test_state_derivative_charge_current_links(case_design):
    state = np.array([1e-13, 0.02, 1e-4, -0.01, 2e-4, 5e-13, 3e-4])
    d = state_derivative(state, 1e-9, case_design, 0.0)
    assert d[5] == pytest.approx(state[6])  # q3' = i3
    meta = case_design.canonical
    assert d[1] == pytest.approx((d[0] - state[2]) / meta.c1)


def test_transformer_topology_rejected(transformer_design):
    with pytest.raises(UnsupportedTopologyError):
        integrate(transformer_design, 0.01)


def test_integrate_window_shape(case_design):
    cfg = SimConfig(periods_settle=64, periods_measure=8)
    traj = integrate(case_design, 0.01, cfg)
    n = 8 * traj.samples_per_period
    assert traj.samples_per_period == 64
    assert len(traj.t) == n
    dt = np.diff(traj.t)
    assert np.allclose(dt, dt[0], rtol=1e-9)
    assert traj.v1 == 0.01
    assert traj.f_pump == pytest.approx(200e6)
    for arr in (traj.q1, traj.dq1, traj.q2, traj.q3, traj.dq3, traj.vout):
        assert len(arr) == n


def test_pump_tone_matches_hb(case_design):
    v1 = 0.1 * VTH
    cfg = SimConfig(periods_settle=2048, periods_measure=64)
    traj = integrate(case_design, v1, cfg)
    spec = steady_spectrum(traj)
    _, _, z_p = pump_smallsignal(case_design, v1, 100e6)
    assert spec.q3[1] == pytest.approx(z_p, rel=2e-3)
    # sub-harmonic content stays at numerical noise below threshold
    assert abs(spec.q3[0]) < 1e-6 * abs(spec.q3[1])


def test_energy_balance_below_threshold(case_design):
    cfg = SimConfig(periods_settle=2048, periods_measure=64)
    traj = integrate(case_design, 0.03, cfg)
    vs = traj.v1 * np.cos(2.0 * np.pi * traj.f_pump * traj.t)
    p_src = np.mean(vs * traj.dq1)
    p_sink = (np.mean(traj.dq1**2) * traj.r_source
              + np.mean(traj.vout**2) / traj.r_load)
    assert p_sink == pytest.approx(p_src, rel=0.01)


def test_fixed_r_loss_damps_pump(case_design, lossy_design):
    cfg = SimConfig(periods_settle=1024, periods_measure=64,
                    loss_mode="fixed-R")
    lossless = steady_spectrum(integrate(case_design, 0.02, cfg))
    lossy = steady_spectrum(integrate(lossy_design, 0.02, cfg))
    assert abs(lossy.q3[1]) < abs(lossless.q3[1])


def test_spectrum_window_guard(case_design):
    cfg = SimConfig(periods_settle=64, periods_measure=8)
    traj = integrate(case_design, 0.01, cfg)
    broken = Trajectory(
        t=traj.t[:-3], q1=traj.q1[:-3], dq1=traj.dq1[:-3], q3=traj.q3[:-3],
        dq3=traj.dq3[:-3], q2=traj.q2[:-3], vout=traj.vout[:-3], v1=traj.v1,
        f_pump=traj.f_pump, samples_per_period=traj.samples_per_period,
        r_load=traj.r_load, r_source=traj.r_source)
    with pytest.raises(WindowError):
        steady_spectrum(broken)


def test_detect_below_threshold_quick(case_design):
    cfg = SimConfig(periods_settle=2048, periods_measure=64)
    traj = integrate(case_design, 0.8 * VTH, cfg)
    divided, metrics = detect_period_doubling(traj, case_design)
    assert not divided
    assert metrics["separation"] < 1e-3 * metrics["radius"]


def test_td_threshold_bracket_guard(case_design):
    cfg = SimConfig(periods_settle=512, periods_measure=64)
    with pytest.raises(BracketError):
        td_threshold(case_design, (0.5 * VTH, 0.6 * VTH), cfg)
    with pytest.raises(ValueError):
        td_threshold(case_design, (0.6 * VTH, 0.5 * VTH), cfg)


def test_poincare_requires_ascending_grid(case_design):
    with pytest.raises(ValueError):
        poincare_map(case_design, [0.04, 0.03])


def test_poincare_rows_below_threshold(case_design):
    cfg = SimConfig(periods_settle=256, periods_measure=64)
    rows = poincare_map(case_design, [0.5 * VTH, 0.6 * VTH], cfg)
    assert len(rows) == 2
    for v1, r_even, r_odd in rows:
        assert r_even > 0 and r_odd > 0
        assert abs(r_even - r_odd) < 1e-3 * (r_even + r_odd)
