"""Minimum-threshold component synthesis and design-surface generation.

Given the shunt inductor L3 and the static varactor capacitance, the four
resonance conditions (tank 1 at f_out, tank 2 at 2*f_out, Z2+Z3 series at
f_out, Z1+Z3 series at 2*f_out) fix L1, C1, L2, C2 uniquely. A lumped
L-section emulating a quarter-wave line steps the load down for lower
thresholds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

from .circuit import CanonicalMeta, PfdDesign, VaractorModel, canonical_branches
from .threshold import ThresholdError, vth_closed_form

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CanonicalValues:
    l1: Optional[float]
    l2: Optional[float]
    l3: float
    c1: Optional[float]
    c2: Optional[float]
    feasible: bool


@dataclass(frozen=True)
class TransformerValues:
    c_match: float
    l_match: float
    z0: float
    r_transformed: complex


def feasible_l3_window(c_dc: float, f_out: float):
    """Open interval of L3 values for which all synthesized values are positive."""
    lo = 1.0 / (16.0 * math.pi**2 * f_out**2 * c_dc)
    return lo, 4.0 * lo


def synthesize_canonical(l3: float, c_dc: float, f_out: float) -> CanonicalValues:
    """Solve the four resonance conditions for L1, C1, L2, C2.

    C1 and C2 come from the parallel-resonance conditions 1/(w^2 L); the
    direct series-expansion expression for C2 is inconsistent with its own
    resonance condition and is only logged for comparison.
    """
    if not (l3 > 0 and c_dc > 0 and f_out > 0):
        raise ValueError("l3, c_dc, f_out must all be positive")
    lo, hi = feasible_l3_window(c_dc, f_out)
    if not (lo < l3 < hi):
        return CanonicalValues(l1=None, l2=None, l3=l3, c1=None, c2=None,
                               feasible=False)
    k = 16.0 * c_dc * f_out**2 * math.pi**2
    a = -1.0 + 16.0 * l3 * c_dc * f_out**2 * math.pi**2
    b = -1.0 + 4.0 * l3 * c_dc * f_out**2 * math.pi**2
    l1 = 3.0 * a / k
    l2 = -3.0 * b / k
    omega_o = 2.0 * math.pi * f_out
    omega_p = 2.0 * omega_o
    c1 = 1.0 / (omega_o**2 * l1)
    c2 = 1.0 / (omega_p**2 * l2)

    c2_direct = -4.0 * c_dc / (3.0 * b)
    if abs(c2_direct - c2) > 1e-9 * c2:
        logger.debug(
            "direct C2 expression gives %.6g F vs resonance value %.6g F; "
            "using the resonance value", c2_direct, c2)
    return CanonicalValues(l1=l1, l2=l2, l3=l3, c1=c1, c2=c2, feasible=True)


def quarter_wave_lsection(z0: float, f_out: float, r_load: float) -> TransformerValues:
    """Lumped quarter-wave equivalent: series C then shunt L at the load.

    Both reactances equal z0 at omega_o, so the load is stepped to roughly
    z0^2/r_load with a nearly real input impedance. The series capacitor
    doubles as a DC blocker.
    """
    if not (z0 > 0 and f_out > 0 and r_load > 0):
        raise ValueError("z0, f_out, r_load must all be positive")
    omega_o = 2.0 * math.pi * f_out
    c_match = 1.0 / (omega_o * z0)
    l_match = z0 / omega_o
    zl = 1j * omega_o * l_match
    z_in = 1.0 / (1j * omega_o * c_match) + (zl * r_load) / (zl + r_load)
    return TransformerValues(c_match=c_match, l_match=l_match, z0=z0,
                             r_transformed=z_in)


def z0_for_target(r_load: float, r_target: float) -> float:
    """Characteristic impedance stepping r_load down to r_target."""
    return math.sqrt(r_load * r_target)


VaractorLaw = Union[Callable[[float], float], Sequence, None]


def _resolve_law(law: VaractorLaw) -> Callable[[float], float]:
    if law is None:
        return lambda c_dc: -0.3
    if callable(law):
        return law
    pairs = sorted((float(c), float(d)) for c, d in law)

    def interp(c_dc: float) -> float:
        xs = [p[0] for p in pairs]
        ys = [p[1] for p in pairs]
        if c_dc <= xs[0]:
            return ys[0]
        if c_dc >= xs[-1]:
            return ys[-1]
        for (x0, y0), (x1, y1) in zip(pairs, pairs[1:]):
            if x0 <= c_dc <= x1:
                return y0 + (y1 - y0) * (c_dc - x0) / (x1 - x0)
        return ys[-1]

    return interp


def canonical_design(values: CanonicalValues, varactor: VaractorModel,
                     f_out: float, r_source: float = 50.0, r_load: float = 50.0,
                     inductor_q: Optional[float] = None,
                     transformer: Optional[TransformerValues] = None,
                     noise_floor_dbm: float = -80.0) -> PfdDesign:
    """Assemble a PfdDesign from synthesized canonical values."""
    if not values.feasible:
        raise ValueError("cannot build a design from infeasible values")
    c_match = transformer.c_match if transformer else None
    l_match = transformer.l_match if transformer else None
    z1, z2, z3 = canonical_branches(
        values.l1, values.c1, values.l2, values.c2, values.l3,
        r_source, r_load, inductor_q=inductor_q,
        c_match=c_match, l_match=l_match)
    meta = CanonicalMeta(l1=values.l1, c1=values.c1, l2=values.l2, c2=values.c2,
                         l3=values.l3, inductor_q=inductor_q,
                         c_match=c_match, l_match=l_match)
    return PfdDesign(z1=z1, z2=z2, z3=z3, varactor=varactor, f_out=f_out,
                     r_source=r_source, r_load=r_load,
                     noise_floor_dbm=noise_floor_dbm, canonical=meta)


def _surface_point(l3: float, c_dc: float, q: Optional[float], f_out: float,
                   c_d_of_cdc: Callable[[float], float],
                   transformer: Optional[TransformerValues],
                   r_source: float, r_load: float):
    values = synthesize_canonical(l3, c_dc, f_out)
    if not values.feasible:
        return math.nan, False
    varactor = VaractorModel(c_dc=c_dc, c_d=c_d_of_cdc(c_dc))
    design = canonical_design(values, varactor, f_out, r_source=r_source,
                              r_load=r_load, inductor_q=q,
                              transformer=transformer)
    try:
        return vth_closed_form(design, f_out).p_th_dbm, True
    except (ThresholdError, ValueError):
        return math.nan, False


def pth_surface(l3_grid, c_dc_grid, q: Optional[float], f_out: float,
                transformer: Optional[TransformerValues] = None,
                c_d_law: VaractorLaw = None,
                r_source: float = 50.0, r_load: float = 50.0) -> list:
    """Threshold power over an (L3, C_DC) grid.

    Rows are (l3, c_dc, p_th_dbm, feasible) in grid order. The varactor
    slope is derived from C_DC through c_d_law (constant -0.3/V when not
    supplied; a callable or a table of (c_dc, c_d) pairs otherwise).
    """
    law = _resolve_law(c_d_law)
    rows = []
    for l3 in l3_grid:
        for c_dc in c_dc_grid:
            pth, ok = _surface_point(l3, c_dc, q, f_out, law, transformer,
                                     r_source, r_load)
            rows.append((l3, c_dc, pth, ok))
    return rows


def q_sensitivity(l3: float, c_dc_grid, q_grid, f_out: float,
                  c_d_law: VaractorLaw = None,
                  r_source: float = 50.0, r_load: float = 50.0):
    """Threshold power vs (C_DC, Q) at fixed L3.

    Returns (rows, argmin) where rows are (c_dc, q, p_th_dbm) and argmin
    maps each q to the C_DC achieving the lowest threshold in its row.
    """
    law = _resolve_law(c_d_law)
    rows = []
    argmin = {}
    for q in q_grid:
        best = None
        for c_dc in c_dc_grid:
            pth, ok = _surface_point(l3, c_dc, q, f_out, law, None,
                                     r_source, r_load)
            rows.append((c_dc, q, pth if ok else math.nan))
            if ok and not math.isnan(pth) and (best is None or pth < best[0]):
                best = (pth, c_dc)
        if best is not None:
            argmin[q] = best[1]
    return rows, argmin
