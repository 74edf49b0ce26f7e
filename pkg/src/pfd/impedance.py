"""Complex branch-impedance evaluation, resonance finding, and Z_eq.

Inductor loss uses a constant-Q series resistance R(w) = w*L/Q, which keeps
Re{Z}/Im{Z} = 1/Q at every frequency. Parallel combinations that land
exactly on a lossless resonance are clamped at the pole cap and flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import Element, Network, Parallel, Series, TableZ, VaractorStatic

POLE_CAP_OHM = 1e12


class TableRangeError(ValueError):
    """Frequency outside a tabulated leaf's range."""


class ResonanceNotFound(ValueError):
    """No sign change of the relevant reactance over the bracket."""


@dataclass(frozen=True)
class ImpedanceSample:
    omega: float
    z: complex
    at_pole: bool = False


def element_impedance(element: Element, omega: float) -> complex:
    """Phasor impedance of a lumped element at omega (rad/s)."""
    if element.kind == "R":
        return complex(element.value)
    if element.kind == "C":
        return 1.0 / (1j * omega * element.value)
    z = 1j * omega * element.value
    if element.q is not None:
        z += omega * element.value / element.q
    return z


def _eval(net: Network, omega: float, c_dc: float) -> complex:
    if isinstance(net, Element):
        return element_impedance(net, omega)
    if isinstance(net, VaractorStatic):
        return 1.0 / (1j * omega * c_dc)
    if isinstance(net, TableZ):
        f = omega / (2.0 * math.pi)
        pts = net.points
        if f < pts[0][0] or f > pts[-1][0]:
            raise TableRangeError(
                f"frequency {f:g} Hz outside table range "
                f"[{pts[0][0]:g}, {pts[-1][0]:g}]")
        freqs = [p[0] for p in pts]
        re = float(np.interp(f, freqs, [p[1] for p in pts]))
        im = float(np.interp(f, freqs, [p[2] for p in pts]))
        return complex(re, im)
    if isinstance(net, Series):
        return sum(_eval(c, omega, c_dc) for c in net.items)
    # parallel: combine through admittances; an exact-pole child contributes
    # zero admittance, a short circuit dominates
    ys = 0.0 + 0.0j
    for child in net.items:
        z = _eval(child, omega, c_dc)
        if z == 0:
            return 0.0 + 0.0j
        if abs(z) < POLE_CAP_OHM:
            ys += 1.0 / z
    if ys == 0:
        return complex(math.inf)
    return 1.0 / ys


def branch_impedance(net: Network, omega: float, c_dc: float) -> ImpedanceSample:
    """Evaluate a one-port network, clamping magnitude at the pole cap."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    z = _eval(net, omega, c_dc)
    mag = abs(z)
    if not math.isfinite(mag):
        return ImpedanceSample(omega, complex(POLE_CAP_OHM), at_pole=True)
    if mag > POLE_CAP_OHM:
        return ImpedanceSample(omega, z * (POLE_CAP_OHM / mag), at_pole=True)
    return ImpedanceSample(omega, z, at_pole=False)


def z_eq(z1: complex, z2: complex, z3: complex) -> complex:
    """Equivalent impedance product z2*z3 + z1*(z2 + z3)."""
    return z2 * z3 + z1 * (z2 + z3)


def _reactance_metric(net: Network, mode: str, omega: float, c_dc: float) -> float:
    z = branch_impedance(net, omega, c_dc).z
    if mode == "series":
        return z.imag
    return (1.0 / z).imag if z != 0 else math.inf


def find_resonance(net: Network, mode: str, bracket, c_dc: float = 1.0) -> float:
    """Bisect Im{Z} (series) or Im{1/Z} (parallel) to a zero in the bracket."""
    if mode not in ("series", "parallel"):
        raise ValueError("mode must be 'series' or 'parallel'")
    lo, hi = float(bracket[0]), float(bracket[1])
    f_lo = _reactance_metric(net, mode, lo, c_dc)
    f_hi = _reactance_metric(net, mode, hi, c_dc)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise ResonanceNotFound(
            f"no reactance sign change over [{lo:g}, {hi:g}] rad/s")
    while (hi - lo) > 1e-10 * hi:
        mid = 0.5 * (lo + hi)
        f_mid = _reactance_metric(net, mode, mid, c_dc)
        if f_mid == 0.0:
            return mid
        if math.copysign(1.0, f_mid) == math.copysign(1.0, f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def design_impedances(design, f_out: float):
    """The six samples Z1/Z2/Z3 at omega_o and omega_p for a design."""
    wo = 2.0 * math.pi * f_out
    wp = 2.0 * wo
    c_dc = design.varactor.c_dc
    return {
        ("z1", "o"): branch_impedance(design.z1, wo, c_dc),
        ("z2", "o"): branch_impedance(design.z2, wo, c_dc),
        ("z3", "o"): branch_impedance(design.z3, wo, c_dc),
        ("z1", "p"): branch_impedance(design.z1, wp, c_dc),
        ("z2", "p"): branch_impedance(design.z2, wp, c_dc),
        ("z3", "p"): branch_impedance(design.z3, wp, c_dc),
    }
