"""Two-tone harmonic balance: roots, Jacobian, stability, output power."""

import cmath
import math
import random

import numpy as np
import pytest

from pfd import (classify_and_stability, hb_jacobian, hb_jacobian_fd,
                 hb_residual, hb_solve, pout_vs_pin, pump_smallsignal,
                 solution_alpha, vth_closed_form)

VTH = 0.038030875924037137


def _branch(sols, dividing):
    if dividing:
        return max(sols, key=lambda s: abs(s.z_o))
    return min(sols, key=lambda s: abs(s.z_o))


def test_trivial_solution_below_threshold(case_design):
    sols = hb_solve(case_design, 100e6, 0.5 * VTH)
    s1 = _branch(sols, dividing=False)
    assert abs(s1.z_o) < 1e-16
    assert s1.residual_norm < 1e-10
    assert abs(s1.z_p) > 0


def test_pump_matches_linear_response(case_design):
    v1 = 0.1 * VTH
    x_p, y_p, z_p = pump_smallsignal(case_design, v1, 100e6)
    s1 = _branch(hb_solve(case_design, 100e6, v1), dividing=False)
    assert s1.z_p == pytest.approx(z_p, rel=2e-3)
    assert s1.x_p == pytest.approx(x_p, rel=2e-3)
    assert s1.y_p == pytest.approx(y_p, rel=2e-3)


def test_charge_conservation_identity(case_design):
    for v1 in (0.5 * VTH, 1.2 * VTH):
        for s in hb_solve(case_design, 100e6, v1):
            scale_o = max(abs(s.x_o), abs(s.z_p), 1e-18)
            assert abs(s.x_o - s.y_o - s.z_o) < 1e-9 * scale_o
            assert abs(s.x_p - s.y_p - s.z_p) < 1e-9 * scale_o


def test_residual_small_at_solutions(case_design):
    for s in hb_solve(case_design, 100e6, 1.2 * VTH):
        res = hb_residual(case_design, 100e6, s.v1,
                          (s.x_o, s.y_o, s.z_o, s.x_p, s.y_p, s.z_p))
        # the pole-capped Z2(wp) leaves ~1e-6 cancellation noise in the
        # branch-2 voltage row; the remaining rows are at solver tolerance
        assert max(abs(r) for r in res) < 1e-5


def test_dividing_solution_above_threshold(case_design):
    sols = hb_solve(case_design, 100e6, 1.2 * VTH)
    s2 = _branch(sols, dividing=True)
    assert abs(s2.z_o) > 1e-14
    assert s2.residual_norm < 1e-10
    # canonical phase convention
    assert 0.0 <= cmath.phase(s2.z_o) % math.pi < math.pi


def test_jacobian_matches_finite_differences(case_design):
    rng = random.Random(7)
    for _ in range(10):
        u = np.array([rng.uniform(-1, 1) * 1e-12 for _ in range(4)])
        v1 = rng.uniform(0.2, 2.0) * VTH
        j = hb_jacobian(case_design, 100e6, v1, u)
        h = 1e-6 * max(np.max(np.abs(u)), 1e-13)
        jf = hb_jacobian_fd(case_design, 100e6, v1, u, h)
        assert np.linalg.norm(j - jf) < 1e-6 * max(np.linalg.norm(j), 1e-30)


def test_alpha_sign_exchange(case_design):
    below = _branch(hb_solve(case_design, 100e6, 0.9 * VTH), dividing=False)
    above_sols = hb_solve(case_design, 100e6, 1.2 * VTH)
    s1 = _branch(above_sols, dividing=False)
    s2 = _branch(above_sols, dividing=True)
    assert solution_alpha(case_design, 100e6, below) < 0
    assert solution_alpha(case_design, 100e6, s1) > 0
    assert solution_alpha(case_design, 100e6, s2) < 0


def test_classification_branches(case_design):
    grid = np.linspace(0.6, 1.4, 9) * VTH
    result = classify_and_stability(case_design, 100e6, grid)
    assert len(result.branches["S1"]) == len(grid)
    s2 = result.branches.get("S2", [])
    assert s2, "dividing branch not found above threshold"
    assert all(pt.v1 > VTH for pt in s2)
    amps = [abs(pt.solution.z_o) for pt in s2]
    assert all(b > a for a, b in zip(amps, amps[1:]))
    # no quasi-uniform spurious branch exists for this design; the
    # classifier must say so rather than stay silent
    if not result.branches.get("S3"):
        assert any("spurious" in d for d in result.diagnostics)


def test_classification_rows_sorted(case_design):
    grid = np.linspace(0.8, 1.2, 5) * VTH
    rows = classify_and_stability(case_design, 100e6, grid).rows()
    assert rows == sorted(rows, key=lambda r: (r[0], r[1]))
    with pytest.raises(ValueError):
        classify_and_stability(case_design, 100e6, grid[::-1])


def test_pout_floor_and_growth(case_design):
    pth = vth_closed_form(case_design, 100e6).p_th_dbm
    pins = [pth - 6.0, pth - 3.0, pth + 3.0, pth + 6.0]
    rows = pout_vs_pin(case_design, 100e6, pins)
    assert rows[0][1] == -80.0 and rows[0][2] == "S1"
    assert rows[1][1] == -80.0
    assert rows[2][2] == "S2" and rows[2][1] > -30.0
    assert rows[3][1] > rows[2][1]


def test_pout_respects_custom_floor(case_design):
    pth = vth_closed_form(case_design, 100e6).p_th_dbm
    rows = pout_vs_pin(case_design, 100e6, [pth - 6.0],
                       noise_floor_dbm=-120.0)
    assert rows[0][1] == -120.0
