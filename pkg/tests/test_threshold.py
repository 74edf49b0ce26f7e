"""Closed-form threshold, determinant null, sweeps, and scaling laws."""

import math
import random

import numpy as np
import pytest

from pfd import (Element, PfdDesign, Series, ThresholdError, VaractorModel,
                 VaractorStatic, canonical_design, dbm, det_A, det_A_matrix,
                 synthesize_canonical, threshold_sweep, vth_closed_form,
                 vth_min_optimal)

VTH_CASE = 0.038030875924037137
PTH_CASE_DBM = -24.417873350041358


def test_case_study_anchor(case_design):
    res = vth_closed_form(case_design, 100e6)
    assert res.v_th_mag == pytest.approx(VTH_CASE, rel=1e-12)
    assert res.p_th_dbm == pytest.approx(PTH_CASE_DBM, abs=1e-9)
    assert res.p_th_w == pytest.approx(res.v_th_mag**2 / 400.0)


def test_case_study_uses_pole_path(case_design):
    res = vth_closed_form(case_design, 100e6)
    assert res.branch_impedances[("z1", "o")].at_pole
    assert res.branch_impedances[("z2", "p")].at_pole


def test_detuned_values_frozen(case_design):
    assert vth_closed_form(case_design, 95e6).v_th_mag == pytest.approx(
        0.27910119012875856, rel=1e-12)
    assert vth_closed_form(case_design, 105e6).v_th_mag == pytest.approx(
        0.54056110267202051, rel=1e-12)


def test_lossy_path_off_pole(lossy_design):
    res = vth_closed_form(lossy_design, 100e6)
    assert not any(s.at_pole for s in res.branch_impedances.values())
    assert res.v_th_mag > VTH_CASE  # loss raises the threshold


def test_zero_cd_raises(case_values):
    design = canonical_design(case_values, VaractorModel(1.7e-12, 0.0), 100e6)
    with pytest.raises(ThresholdError):
        vth_closed_form(design, 100e6)


def test_dbm_reference():
    assert dbm(1e-3) == 0.0
    assert dbm(1.0) == pytest.approx(30.0)


def test_det_nulls_at_threshold(case_design):
    res = vth_closed_form(case_design, 100e6)
    a = det_A_matrix(case_design, 100e6, res.v_th)
    row_norms = np.prod([np.linalg.norm(a[i]) for i in range(3)])
    assert abs(np.linalg.det(a)) < 1e-10 * row_norms
    # away from threshold the determinant is far from the null
    off = det_A(case_design, 100e6, 2.0 * res.v_th)
    assert abs(off) > 1e4 * abs(np.linalg.det(a))


def _random_design(rng):
    f_out = rng.uniform(50e6, 500e6)
    c_dc = rng.uniform(0.5e-12, 5e-12)
    lo = 1.0 / (16.0 * math.pi**2 * f_out**2 * c_dc)
    l3 = rng.uniform(1.1 * lo, 3.9 * lo)
    values = synthesize_canonical(l3, c_dc, f_out)
    varactor = VaractorModel(c_dc, -rng.uniform(0.1, 0.5),
                             rng.uniform(0.0, 0.05))
    q = rng.choice([None, rng.uniform(20.0, 200.0)])
    return canonical_design(values, varactor, f_out, inductor_q=q), f_out


def test_det_formula_equivalence_random_designs():
    rng = random.Random(20240817)
    for _ in range(50):
        design, f_out = _random_design(rng)
        # evaluate slightly detuned so no branch sits on a clamped pole
        f = 1.003 * f_out
        res = vth_closed_form(design, f)
        a = det_A_matrix(design, f, res.v_th)
        row_norms = np.prod([np.linalg.norm(a[i]) for i in range(3)])
        assert abs(np.linalg.det(a)) < 1e-6 * row_norms


def test_cdc_scaling_with_impedances_fixed():
    z1 = Series((Element("R", 50.0, role="source"), Element("L", 380e-9)))
    z2 = Series((Element("R", 50.0, role="load"), Element("C", 2e-12)))
    base_c = 1.7e-12

    def design(k):
        # z3 keeps the original static capacitance so every branch
        # impedance is unchanged; only the modulation prefactor scales
        z3 = Series((Element("L", 500e-9), Element("C", base_c)))
        return PfdDesign(z1=z1, z2=z2, z3=z3,
                         varactor=VaractorModel(k * base_c, -0.3),
                         f_out=100e6, r_source=50.0, r_load=50.0)

    v1 = vth_closed_form(design(1.0), 100e6).v_th_mag
    for k in (2.0, 3.7, 10.0):
        vk = vth_closed_form(design(k), 100e6).v_th_mag
        assert vk == pytest.approx(k**2 * v1, rel=1e-12)


def test_vth_min_optimal_scaling():
    wo = 2.0 * math.pi * 100e6
    base = vth_min_optimal(1.7e-12, 0.3, 50.0, 50.0, wo)
    assert vth_min_optimal(1.7e-12, 0.3, 50.0, 50.0, 2.0 * wo) == pytest.approx(
        4.0 * base, rel=1e-12)


def test_optimality_consistency(case_design):
    wo = 2.0 * math.pi * 100e6
    expected = vth_min_optimal(1.7e-12, -0.3, 50.0, 50.0, wo)
    got = vth_closed_form(case_design, 100e6).v_th_mag
    assert got == pytest.approx(expected, rel=1e-3)


def test_threshold_sweep_minimum_at_center(case_design):
    rows = threshold_sweep(case_design, [95e6, 100e6, 105e6])
    assert [r[0] for r in rows] == [95e6, 100e6, 105e6]
    vths = [r[1] for r in rows]
    assert vths[1] == min(vths)
    assert rows[1][2] == pytest.approx(PTH_CASE_DBM, abs=1e-9)


def test_threshold_sweep_empty_and_failures(case_values):
    assert threshold_sweep(None, []) == []
    design = canonical_design(case_values, VaractorModel(1.7e-12, 0.0), 100e6)
    rows = threshold_sweep(design, [100e6])
    assert math.isnan(rows[0][1]) and math.isnan(rows[0][2])
