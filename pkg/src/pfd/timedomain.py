"""Exact nonlinear time-domain integration and period-doubling detection.

The canonical circuit is integrated as a first-order system in the physical
states of its seven reactances: the two parallel-tank voltages and inductor
currents, the varactor charge, the shunt-inductor current, and the running
input charge (kept for output bookkeeping). The internal node voltage
follows algebraically from current conservation, so no mass-matrix solve is
needed and the system stays explicit.

Integration uses an embedded Dormand-Prince 5(4) pair compiled with numba,
with cubic Hermite resampling onto a uniform grid of 64 samples per pump
period. Runs are fully deterministic: the sub-harmonic seed is the
integrator's own rounding noise, which is reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .circuit import PfdDesign

SAMPLES_PER_PERIOD = 64


class UnsupportedTopologyError(ValueError):
    """Time-domain integration needs the canonical, transformer-free form."""


class StiffnessError(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"step size underflow at t = {t:.6e} s")
        self.t = t


class NotSettledError(RuntimeError):
    def __init__(self, metrics: Dict[str, float]):
        super().__init__("trajectory not settled: centroid drift "
                         f"{metrics.get('drift', float('nan')):.3f} exceeds 0.1")
        self.metrics = metrics


class BracketError(ValueError):
    """Bisection bracket does not straddle the detection boundary."""


class WindowError(ValueError):
    """Spectral window does not span an integer number of pump periods."""


@dataclass(frozen=True)
class SimConfig:
    periods_settle: int = 300
    periods_measure: int = 64
    rel_tol: float = 1e-9
    abs_tol: float = 1e-15
    ramp_periods: int = 50
    loss_mode: str = "lossless"  # "lossless" | "fixed-R"

    def __post_init__(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        n = self.periods_measure
        if n < 1 or (n & (n - 1)) != 0:
            raise ValueError("periods_measure must be a power of two")
        if self.loss_mode not in ("lossless", "fixed-R"):
            raise ValueError("loss_mode must be 'lossless' or 'fixed-R'")


@dataclass(frozen=True)
class Trajectory:
    """Uniformly resampled measurement-window state history."""

    t: np.ndarray
    q1: np.ndarray
    dq1: np.ndarray
    q3: np.ndarray
    dq3: np.ndarray
    q2: np.ndarray
    vout: np.ndarray
    v1: float
    f_pump: float
    samples_per_period: int
    r_load: float
    r_source: float


# state vector: y = [q1, u1, iL1, u2, iL2, q3, i3]
# params: [rs, rl, l1, c1, l2, c2, l3, cdc, half_cd, b3, r1, r2, r3,
#          v1, wp, t_ramp]

@njit(cache=True)
def _rhs(t, y, p):
    rs, rl = p[0], p[1]
    l1, c1, l2, c2, l3 = p[2], p[3], p[4], p[5], p[6]
    cdc, half_cd, b3 = p[7], p[8], p[9]
    r1, r2, r3 = p[10], p[11], p[12]
    v1, wp, t_ramp = p[13], p[14], p[15]

    ramp = 1.0
    if t_ramp > 0.0 and t < t_ramp:
        ramp = t / t_ramp
    vs = ramp * v1 * math.cos(wp * t)

    u1, il1 = y[1], y[2]
    u2, il2 = y[3], y[4]
    q3, i3 = y[5], y[6]

    gn = rs * rl / (rs + rl)
    vn = ((vs - u1) / rs + u2 / rl - i3) * gn
    i1 = (vs - u1 - vn) / rs
    i2 = (vn - u2) / rl

    u = q3 / cdc
    vc3 = u * (1.0 + u * (-half_cd + b3 * u))

    out = np.empty(7)
    out[0] = i1
    out[1] = (i1 - il1) / c1
    out[2] = (u1 - r1 * il1) / l1
    out[3] = (i2 - il2) / c2
    out[4] = (u2 - r2 * il2) / l2
    out[5] = i3
    out[6] = (vn - vc3 - r3 * i3) / l3
    return out


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0,
     -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0, 0.0],
])
_B = np.array([35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
               -2187.0 / 6784.0, 11.0 / 84.0])
_E = np.array([71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
               -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0])


@njit(cache=True)
def _integrate_span(y0, t0, t1, p, rtol, atol, sample_t, samples, dsamples):
    """DP5(4) with PI step control; Hermite resampling at sample_t.

    Returns (y_end, status, t_fail): status 0 = ok, 1 = step underflow.
    """
    n = y0.shape[0]
    y = y0.copy()
    t = t0
    f = _rhs(t, y, p)
    # initial step: a conservative fraction of a pump period
    h = 0.02 * (2.0 * math.pi / p[14])
    if h > (t1 - t0):
        h = t1 - t0
    err_prev = 1.0
    ks = np.empty((7, n))
    si = 0
    n_samp = sample_t.shape[0]
    while t < t1:
        if t + h > t1:
            h = t1 - t
        if t + h == t:
            return y, 1, t
        ks[0] = f
        for i in range(1, 6):
            yt = y.copy()
            for j in range(i):
                if _A[i, j] != 0.0:
                    yt += (h * _A[i, j]) * ks[j]
            ks[i] = _rhs(t + _C[i] * h, yt, p)
        y_new = y.copy()
        for j in range(6):
            if _B[j] != 0.0:
                y_new += (h * _B[j]) * ks[j]
        f_new = _rhs(t + h, y_new, p)
        ks[6] = f_new
        # embedded error estimate
        err = 0.0
        for i in range(n):
            e = 0.0
            for j in range(7):
                if _E[j] != 0.0:
                    e += _E[j] * ks[j, i]
            e *= h
            sc = atol[i] + rtol * max(abs(y[i]), abs(y_new[i]))
            q = e / sc
            err += q * q
        err = math.sqrt(err / n)
        if err <= 1.0:
            # accept; fill any sample points inside [t, t+h] by cubic Hermite
            t_new = t + h
            while si < n_samp and sample_t[si] <= t_new:
                s = (sample_t[si] - t) / h
                h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s)
                h10 = s * (1.0 - s) * (1.0 - s)
                h01 = s * s * (3.0 - 2.0 * s)
                h11 = s * s * (s - 1.0)
                for i in range(n):
                    samples[si, i] = (h00 * y[i] + h10 * h * f[i]
                                      + h01 * y_new[i] + h11 * h * f_new[i])
                # derivative of the Hermite cubic for sampled rates
                d00 = (6.0 * s * s - 6.0 * s) / h
                d10 = 3.0 * s * s - 4.0 * s + 1.0
                d01 = (6.0 * s - 6.0 * s * s) / h
                d11 = 3.0 * s * s - 2.0 * s
                for i in range(n):
                    dsamples[si, i] = (d00 * y[i] + d10 * f[i]
                                       + d01 * y_new[i] + d11 * f_new[i])
                si += 1
            t = t_new
            y = y_new
            f = f_new
            # PI controller
            fac = 0.9 * err ** -0.2 * err_prev ** 0.04 if err > 0 else 10.0
            if fac > 10.0:
                fac = 10.0
            if fac < 0.2:
                fac = 0.2
            h *= fac
            err_prev = err if err > 1e-10 else 1e-10
        else:
            fac = 0.9 * err ** -0.2
            if fac < 0.2:
                fac = 0.2
            h *= fac
    return y, 0, t


def _params(design: PfdDesign, v1: float, config: SimConfig) -> np.ndarray:
    meta = design.canonical
    if meta is None:
        raise UnsupportedTopologyError(
            "time-domain integration requires the canonical topology")
    if meta.has_transformer:
        raise UnsupportedTopologyError(
            "transformer-extended designs are frequency-domain only")
    var = design.varactor
    wo = design.omega_o
    r1 = r2 = r3 = 0.0
    if config.loss_mode == "fixed-R" and meta.inductor_q is not None:
        r1 = wo * meta.l1 / meta.inductor_q
        r2 = wo * meta.l2 / meta.inductor_q
        r3 = wo * meta.l3 / meta.inductor_q
    wp = design.omega_p
    t_ramp = config.ramp_periods * (2.0 * math.pi / wp)
    # cubic charge-voltage law matched to the capacitance expansion
    b3 = 0.5 * var.c_d**2 - var.c_d2 / 3.0
    return np.array([
        design.r_source, design.r_load,
        meta.l1, meta.c1, meta.l2, meta.c2, meta.l3,
        var.c_dc, 0.5 * var.c_d, b3,
        r1, r2, r3, v1, wp, t_ramp])


def varactor_voltage(design: PfdDesign, q3) -> np.ndarray:
    """Cubic charge-voltage law of the varactor used by the integrator."""
    var = design.varactor
    u = np.asarray(q3, dtype=float) / var.c_dc
    b3 = 0.5 * var.c_d**2 - var.c_d2 / 3.0
    return u * (1.0 + u * (-0.5 * var.c_d + b3 * u))


def state_derivative(state: Sequence[float], t: float, design: PfdDesign,
                     v1: float, config: Optional[SimConfig] = None) -> np.ndarray:
    """Right-hand side of the canonical first-order system.

    State layout: (q1, u1, iL1, u2, iL2, q3, i3) with tank voltages u and
    inductor currents iL; the node voltage is eliminated algebraically.
    """
    if config is None:
        config = SimConfig(ramp_periods=0)
    p = _params(design, v1, config)
    return _rhs(float(t), np.asarray(state, dtype=float), p)


def _atol_vector(design: PfdDesign, config: SimConfig) -> np.ndarray:
    # per-state absolute floors: abs_tol is a charge; voltages and currents
    # get the corresponding q/C and q*w scales
    c_dc = design.varactor.c_dc
    wp = design.omega_p
    a = config.abs_tol
    return np.array([a, a / c_dc, a * wp, a / c_dc, a * wp, a, a * wp])


def integrate(design: PfdDesign, v1: float, config: SimConfig = SimConfig(),
              y0: Optional[np.ndarray] = None,
              return_state: bool = False):
    """Settle then measure; returns the resampled measurement Trajectory.

    The initial state is fully discharged unless y0 is given (continuation).
    """
    p = _params(design, v1, config)
    if y0 is not None:
        p[15] = 0.0  # continuation from a live state: no soft-start ramp
    atol = _atol_vector(design, config)
    tp = 2.0 * math.pi / design.omega_p
    t_settle = config.periods_settle * tp
    t_end = t_settle + config.periods_measure * tp

    y = np.zeros(7) if y0 is None else np.asarray(y0, dtype=float).copy()
    empty_t = np.empty(0)
    empty_s = np.empty((0, 7))
    y, status, t_fail = _integrate_span(
        y, 0.0, t_settle, p, config.rel_tol, atol, empty_t, empty_s, empty_s)
    if status != 0:
        raise StiffnessError(t_fail)

    n_samp = config.periods_measure * SAMPLES_PER_PERIOD
    sample_t = t_settle + np.arange(n_samp) * (tp / SAMPLES_PER_PERIOD)
    samples = np.empty((n_samp, 7))
    dsamples = np.empty((n_samp, 7))
    y_end, status, t_fail = _integrate_span(
        y, t_settle, t_end, p, config.rel_tol, atol, sample_t, samples,
        dsamples)
    if status != 0:
        raise StiffnessError(t_fail)

    q1 = samples[:, 0]
    u1 = samples[:, 1]
    u2 = samples[:, 3]
    q3 = samples[:, 5]
    i3 = samples[:, 6]
    ramp = np.minimum(sample_t / p[15], 1.0) if p[15] > 0 else 1.0
    vs = ramp * v1 * np.cos(design.omega_p * sample_t)
    gn = design.r_source * design.r_load / (design.r_source + design.r_load)
    vn = ((vs - u1) / design.r_source + u2 / design.r_load - i3) * gn
    i1 = (vs - u1 - vn) / design.r_source
    vout = vn - u2  # voltage across the load resistor

    traj = Trajectory(
        t=sample_t, q1=q1, dq1=i1, q3=q3, dq3=i3, q2=q1 - q3, vout=vout,
        v1=v1, f_pump=design.omega_p / (2.0 * math.pi),
        samples_per_period=SAMPLES_PER_PERIOD,
        r_load=design.r_load, r_source=design.r_source)
    if return_state:
        return traj, y_end
    return traj


# ---------------------------------------------------------------------------
# Spectral extraction and period-doubling detection
# ---------------------------------------------------------------------------

def _single_bin(t: np.ndarray, x: np.ndarray, freq: float) -> complex:
    """Fourier coefficient under the x(t) = X e^{iwt} + conj convention."""
    return complex(np.mean(x * np.exp(-2j * math.pi * freq * t)))


@dataclass(frozen=True)
class SpectrumResult:
    frequencies: Tuple[float, float, float]
    q1: Tuple[complex, complex, complex]
    q2: Tuple[complex, complex, complex]
    q3: Tuple[complex, complex, complex]
    vout: Tuple[complex, complex, complex]


def steady_spectrum(trajectory: Trajectory) -> SpectrumResult:
    """Single-bin projections at f_out, f_pump, and 2*f_pump."""
    n = len(trajectory.t)
    if n == 0 or n % trajectory.samples_per_period != 0:
        raise WindowError("window must span an integer number of pump periods")
    f_o = 0.5 * trajectory.f_pump
    freqs = (f_o, trajectory.f_pump, 2.0 * trajectory.f_pump)
    t = trajectory.t
    return SpectrumResult(
        frequencies=freqs,
        q1=tuple(_single_bin(t, trajectory.q1, f) for f in freqs),
        q2=tuple(_single_bin(t, trajectory.q2, f) for f in freqs),
        q3=tuple(_single_bin(t, trajectory.q3, f) for f in freqs),
        vout=tuple(_single_bin(t, trajectory.vout, f) for f in freqs))


def detect_period_doubling(trajectory: Trajectory, design: PfdDesign,
                           raise_not_settled: bool = True):
    """Stroboscopic and spectral test for the divided regime.

    Samples (q3, q3'/w_p) once per pump period; division shows as a
    separation between the odd-return and even-return centroids exceeding
    1e-3 of the cycle radius, confirmed by output power at f_out at least
    20 dB above the design noise floor.
    """
    spp = trajectory.samples_per_period
    wp = 2.0 * math.pi * trajectory.f_pump
    q3 = trajectory.q3[::spp]
    dq3 = trajectory.dq3[::spp] / wp
    n = len(q3)
    metrics: Dict[str, float] = {}
    if n == 0 or not np.any(trajectory.q3):
        metrics.update(separation=0.0, radius=0.0, pout_fo_dbm=-math.inf,
                       drift=0.0)
        return False, metrics

    pts = np.column_stack([q3, dq3])
    even, odd = pts[0::2], pts[1::2]
    ce, co = even.mean(axis=0), odd.mean(axis=0)
    sep = float(np.linalg.norm(ce - co))
    radius = float(np.max(np.hypot(trajectory.q3, trajectory.dq3 / wp)))

    # settle check: centroid consistency across the two half-windows
    half = n // 2
    e1, e2 = pts[0:half:2], pts[half + (half % 2)::2]
    o1, o2 = pts[1:half:2], pts[half + 1 - (half % 2)::2]
    drift_num = (np.linalg.norm(e1.mean(axis=0) - e2.mean(axis=0))
                 + np.linalg.norm(o1.mean(axis=0) - o2.mean(axis=0)))
    drift = float(drift_num / (2.0 * max(sep, 1e-3 * radius, 1e-300)))

    vo = _single_bin(trajectory.t, trajectory.vout, 0.5 * trajectory.f_pump)
    p_fo = 2.0 * abs(vo)**2 / trajectory.r_load
    p_fo_dbm = 10.0 * math.log10(p_fo / 1e-3) if p_fo > 0 else -math.inf

    metrics.update(separation=sep, radius=radius, pout_fo_dbm=p_fo_dbm,
                   drift=drift)
    if drift > 0.1 and raise_not_settled:
        raise NotSettledError(metrics)
    divided = (sep > 1e-3 * radius
               and p_fo_dbm >= design.noise_floor_dbm + 20.0)
    return bool(divided), metrics


def _detect_at(design: PfdDesign, v1: float, config: SimConfig) -> bool:
    """Detection with automatic settle extension on a non-settled verdict."""
    cfg = config
    for _ in range(4):
        traj = integrate(design, v1, cfg)
        try:
            divided, _ = detect_period_doubling(traj, design)
            return divided
        except NotSettledError:
            cfg = SimConfig(
                periods_settle=2 * cfg.periods_settle,
                periods_measure=cfg.periods_measure,
                rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
                ramp_periods=cfg.ramp_periods, loss_mode=cfg.loss_mode)
    divided, _ = detect_period_doubling(integrate(design, v1, cfg), design,
                                        raise_not_settled=False)
    return divided


def td_threshold(design: PfdDesign, bracket, config: SimConfig = SimConfig()) -> float:
    """Bisect the drive amplitude to the period-doubling onset.

    The bracket must straddle the boundary: no division at the low edge,
    division at the high edge. Relative tolerance 1e-3.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    div_lo = _detect_at(design, lo, config)
    div_hi = _detect_at(design, hi, config)
    if div_lo or not div_hi:
        raise BracketError(
            f"bracket [{lo:g}, {hi:g}] V does not straddle the onset "
            f"(low divided: {div_lo}, high divided: {div_hi})")
    while (hi - lo) > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if _detect_at(design, mid, config):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def poincare_map(design: PfdDesign, v1_grid: Sequence[float],
                 config: SimConfig = SimConfig()) -> list:
    """Stroboscopic return radii under a slowly increased drive.

    The state is carried between consecutive grid points, emulating a
    continuously raised drive. Rows are (v1, r_even, r_odd); below
    threshold the two radii coincide, above they separate.
    """
    v1_grid = list(v1_grid)
    if any(b < a for a, b in zip(v1_grid, v1_grid[1:])):
        raise ValueError("v1 grid must be ascending")
    rows = []
    state = None
    wp = design.omega_p
    for v1 in v1_grid:
        traj, state = integrate(design, v1, config, y0=state,
                                return_state=True)
        spp = traj.samples_per_period
        r = np.hypot(traj.q3[::spp], traj.dq3[::spp] / wp)
        rows.append((v1, float(r[0::2].mean()), float(r[1::2].mean())))
    return rows
