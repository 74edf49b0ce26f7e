"""Closed-form parametric threshold and determinant cross-check.

The divider self-starts when the pump drive destabilizes the half-frequency
mode; the marginal drive amplitude V_th follows in closed form from the six
branch impedances at omega_o and omega_p. A 3x3 system matrix whose
determinant nulls exactly at V_th provides an independent algebraic check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .circuit import PfdDesign
from .impedance import ImpedanceSample, design_impedances, z_eq


class ThresholdError(ValueError):
    """Raised when the closed-form threshold is undefined (e.g. c_d = 0)."""


@dataclass(frozen=True)
class ThresholdResult:
    v_th: complex
    v_th_mag: float
    p_th_w: float
    p_th_dbm: float
    branch_impedances: Dict[Tuple[str, str], ImpedanceSample]


def dbm(power_w: float) -> float:
    return 10.0 * math.log10(power_w / 1e-3)


def vth_closed_form(design: PfdDesign, f_out: Optional[float] = None) -> ThresholdResult:
    """Closed-form threshold amplitude and the corresponding input power.

    Evaluates the direct impedance-product form, or an algebraically
    identical admittance-normalized form when any branch sits on a clamped
    pole (the optimally designed circuit has Z1 at a pole at omega_o and
    Z2 at omega_p). c_d enters by magnitude; the complex phase of v_th is
    retained for diagnostics only.
    """
    if f_out is None:
        f_out = design.f_out
    if design.varactor.c_d == 0:
        raise ThresholdError("c_d = 0: threshold is infinite")
    wo = 2.0 * math.pi * f_out
    c_dc = design.varactor.c_dc
    c_d = abs(design.varactor.c_d)

    zs = design_impedances(design, f_out)
    z1o, z2o, z3o = zs[("z1", "o")], zs[("z2", "o")], zs[("z3", "o")]
    z1p, z2p, z3p = zs[("z1", "p")], zs[("z2", "p")], zs[("z3", "p")]
    any_pole = any(s.at_pole for s in zs.values())

    if any_pole:
        # divide numerator and denominator by Z1(wo)*Z2(wp); finite at the
        # tank poles of the optimal design
        num = (z2o.z + z3o.z + z2o.z * z3o.z / z1o.z) \
            * (z1p.z + z3p.z + z1p.z * z3p.z / z2p.z)
        den = 1.0 + z2o.z / z1o.z
        v_th = 4.0 * c_dc**2 * wo**2 * num / (c_d * den)
    else:
        zeq_o = z_eq(z1o.z, z2o.z, z3o.z)
        zeq_p = z_eq(z1p.z, z2p.z, z3p.z)
        den = c_d * (z1o.z + z2o.z) * z2p.z
        if den == 0:
            raise ThresholdError("degenerate network: threshold undefined")
        v_th = 4.0 * c_dc**2 * zeq_o * zeq_p * wo**2 / den

    v_mag = abs(v_th)
    p_w = v_mag**2 / (8.0 * design.r_source)
    return ThresholdResult(v_th=v_th, v_th_mag=v_mag, p_th_w=p_w,
                           p_th_dbm=dbm(p_w), branch_impedances=zs)


def vth_min_optimal(c_dc: float, c_d: float, r_s_eff: float, r_l_eff: float,
                    omega_o: float) -> float:
    """Minimum threshold of an optimally resonated design."""
    return 4.0 * c_dc**2 * r_l_eff * r_s_eff * omega_o**2 / abs(c_d)


def det_A_matrix(design: PfdDesign, f_out: float, v1: complex) -> np.ndarray:
    """Row-scaled 3x3 system matrix of the half-frequency mode.

    The pump charge enters through its small-signal solution. Rows are
    normalized by their largest entry, which leaves the determinant /
    row-norm-product ratio unchanged while keeping pole-capped branches
    well conditioned.
    """
    wo = 2.0 * math.pi * f_out
    c_dc = design.varactor.c_dc
    c_d = abs(design.varactor.c_d)
    zs = design_impedances(design, f_out)
    z1o, z2o, z3o = (zs[("z1", "o")].z, zs[("z2", "o")].z, zs[("z3", "o")].z)
    z1p, z2p, z3p = (zs[("z1", "p")].z, zs[("z2", "p")].z, zs[("z3", "p")].z)
    zeq_p = z_eq(z1p, z2p, z3p)

    couple = 1j * v1 * c_d * z2p / (4.0 * c_dc**2 * zeq_p * wo)
    a = np.array([
        [-1j * z1o * wo, -1j * z2o * wo, 0.0],
        [-1j * z1o * wo, 0.0, -1j * z3o * wo + couple],
        [1.0, -1.0, -1.0],
    ], dtype=complex)
    for i in range(3):
        scale = np.max(np.abs(a[i]))
        if scale > 0:
            a[i] /= scale
    return a


def det_A(design: PfdDesign, f_out: float, v1: complex) -> complex:
    """Determinant of the row-scaled system matrix; nulls at v_th."""
    return complex(np.linalg.det(det_A_matrix(design, f_out, v1)))


def threshold_sweep(design: PfdDesign, f_out_grid) -> list:
    """Threshold vs output frequency at fixed circuit (pump at 2*f_out).

    Returns rows (f_out, v_th_mag, p_th_dbm); failed points carry NaN.
    """
    rows = []
    for f in f_out_grid:
        try:
            res = vth_closed_form(design, f)
            rows.append((f, res.v_th_mag, res.p_th_dbm))
        except (ThresholdError, ValueError):
            rows.append((f, math.nan, math.nan))
    return rows
