"""Two-tone harmonic balance, branch classification, and P_out extraction.

Charges are expanded as q(t) = X e^{i w t} + conjugate at the two tones
{omega_o, omega_p} with drive v1(t) = V1 cos(omega_p t). The nonlinear
capacitor voltage beyond its static term mixes the tones: the pump converts
energy into the half-frequency mode through a conjugate coupling, and the
cubic term saturates the divided amplitude.

The balance equations are linear in the tank charges, so those are
eliminated exactly and Newton runs on the two varactor-charge coefficients
(z_o, z_p) against the reduced branch impedances Z3 + Z1 || Z2. This keeps
the system well conditioned even when a tank sits exactly on a clamped
pole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .circuit import PfdDesign
from .impedance import branch_impedance, design_impedances, z_eq

NEWTON_MAX_ITER = 200
NEWTON_MAX_HALVINGS = 30
NEWTON_TOL = 1e-12


class DegenerateNetworkError(ValueError):
    """Z_eq vanished; the pump solution is undefined."""


@dataclass(frozen=True)
class HbSolution:
    x_o: complex
    y_o: complex
    z_o: complex
    x_p: complex
    y_p: complex
    z_p: complex
    v1: float
    residual_norm: float
    alpha: float = math.nan
    branch: str = ""


@dataclass(frozen=True)
class _Coeffs:
    """Frozen per-(design, f_out) coefficient set for the balance system."""

    wo: float
    wp: float
    z1o: complex
    z2o: complex
    z3o: complex
    z1p: complex
    z2p: complex
    z3p: complex
    zred_o: complex  # z3 + z1 || z2 at omega_o
    zred_p: complex  # z3 + z1 || z2 at omega_p
    drive_p: complex  # z2p / (z1p + z2p), pump drive division factor
    c_dc: float
    c_d: float
    b3: float  # cubic charge-voltage coefficient c_d^2/2 - c_d2/3


def _coeffs(design: PfdDesign, f_out: float) -> _Coeffs:
    wo = 2.0 * math.pi * f_out
    zs = design_impedances(design, f_out)
    z1o, z2o, z3o = zs[("z1", "o")].z, zs[("z2", "o")].z, zs[("z3", "o")].z
    z1p, z2p, z3p = zs[("z1", "p")].z, zs[("z2", "p")].z, zs[("z3", "p")].z
    var = design.varactor
    if z1o + z2o == 0 or z1p + z2p == 0:
        raise DegenerateNetworkError("z1 + z2 vanished")
    return _Coeffs(
        wo=wo, wp=2.0 * wo,
        z1o=z1o, z2o=z2o, z3o=z3o, z1p=z1p, z2p=z2p, z3p=z3p,
        zred_o=z3o + z1o * z2o / (z1o + z2o),
        zred_p=z3p + z1p * z2p / (z1p + z2p),
        drive_p=z2p / (z1p + z2p),
        c_dc=var.c_dc, c_d=var.c_d,
        b3=0.5 * var.c_d**2 - var.c_d2 / 3.0)


def _nonlinear_o(c: _Coeffs, z_o: complex, z_p: complex) -> complex:
    """omega_o component of the varactor voltage beyond the static term."""
    return (-(c.c_d / c.c_dc**2) * z_p * np.conj(z_o)
            + (3.0 * c.b3 / c.c_dc**3) * z_o
            * (abs(z_o)**2 + 2.0 * abs(z_p)**2))


def _nonlinear_p(c: _Coeffs, z_o: complex, z_p: complex) -> complex:
    """omega_p component of the varactor voltage beyond the static term."""
    return (-(c.c_d / (2.0 * c.c_dc**2)) * z_o**2
            + (3.0 * c.b3 / c.c_dc**3) * z_p
            * (abs(z_p)**2 + 2.0 * abs(z_o)**2))


def pump_smallsignal(design: PfdDesign, v1: float,
                     f_out: Optional[float] = None) -> Tuple[complex, complex, complex]:
    """Linear pump response with the half-frequency mode quiescent."""
    if f_out is None:
        f_out = design.f_out
    c = _coeffs(design, f_out)
    zeq_p = z_eq(c.z1p, c.z2p, c.z3p)
    if zeq_p == 0:
        raise DegenerateNetworkError("Z_eq at omega_p vanished")
    k = -1j * v1 / (2.0 * zeq_p * c.wp)
    return (k * (c.z2p + c.z3p), k * c.z3p, k * c.z2p)


def hb_residual(design: PfdDesign, f_out: float, v1: float,
                unknowns: Sequence[complex]) -> Tuple[complex, ...]:
    """The six balance residuals at a candidate coefficient set.

    Voltage-dimension residuals are normalized by max(|V1|, 1 mV); the
    charge-conservation residuals are returned as the raw violations.
    """
    x_o, y_o, z_o, x_p, y_p, z_p = (complex(u) for u in unknowns)
    c = _coeffs(design, f_out)
    vnorm = max(abs(v1), 1e-3)
    r1 = 1j * c.wo * (c.z1o * x_o + c.z2o * y_o)
    r2 = 1j * c.wo * (c.z1o * x_o + c.z3o * z_o) + _nonlinear_o(c, z_o, z_p)
    r3 = x_o - y_o - z_o
    r4 = 1j * c.wp * (c.z1p * x_p + c.z2p * y_p) - 0.5 * v1
    r5 = (1j * c.wp * (c.z1p * x_p + c.z3p * z_p)
          + _nonlinear_p(c, z_o, z_p) - 0.5 * v1)
    r6 = x_p - y_p - z_p
    return (r1 / vnorm, r2 / vnorm, r3, r4 / vnorm, r5 / vnorm, r6)


# ---------------------------------------------------------------------------
# Newton solver on the reduced (z_o, z_p) system
# ---------------------------------------------------------------------------
# Eliminating the tank charges through the linear rows gives two complex
# equations:
#   G1 = i wo Zred_o z_o + nl_o(z_o, z_p)                        = 0
#   G2 = i wp Zred_p z_p + nl_p(z_o, z_p) - (V1/2) drive_p       = 0
# The real unknown vector is u = [Re z_o, Im z_o, Re z_p, Im z_p].

def _real_block(d_holo: complex, d_anti: complex) -> np.ndarray:
    """2x2 real Jacobian block of r(u, conj(u)) from its Wirtinger pair."""
    return np.array([
        [(d_holo + d_anti).real, -(d_holo - d_anti).imag],
        [(d_holo + d_anti).imag, (d_holo - d_anti).real],
    ])


def _unpack(u: np.ndarray) -> Tuple[complex, complex]:
    return complex(u[0], u[1]), complex(u[2], u[3])


def _residual_vec(c: _Coeffs, v1: float, u: np.ndarray) -> np.ndarray:
    z_o, z_p = _unpack(u)
    vnorm = max(abs(v1), 1e-3)
    g1 = (1j * c.wo * c.zred_o * z_o + _nonlinear_o(c, z_o, z_p)) / vnorm
    g2 = (1j * c.wp * c.zred_p * z_p + _nonlinear_p(c, z_o, z_p)
          - 0.5 * v1 * c.drive_p) / vnorm
    return np.array([g1.real, g1.imag, g2.real, g2.imag])


def _wirtinger(c: _Coeffs, z_o: complex, z_p: complex):
    """Wirtinger derivative pairs of (G1, G2) wrt (z_o, z_p)."""
    k3 = 3.0 * c.b3 / c.c_dc**3
    kc = c.c_d / c.c_dc**2
    g1_zo = 1j * c.wo * c.zred_o + k3 * (2.0 * abs(z_o)**2 + 2.0 * abs(z_p)**2)
    g1_zo_c = -kc * z_p + k3 * z_o**2
    g1_zp = -kc * np.conj(z_o) + 2.0 * k3 * z_o * np.conj(z_p)
    g1_zp_c = 2.0 * k3 * z_o * z_p
    g2_zp = 1j * c.wp * c.zred_p + k3 * (2.0 * abs(z_p)**2 + 2.0 * abs(z_o)**2)
    g2_zp_c = k3 * z_p**2
    g2_zo = -kc * z_o + 2.0 * k3 * z_p * np.conj(z_o)
    g2_zo_c = 2.0 * k3 * z_p * z_o
    return ((g1_zo, g1_zo_c, g1_zp, g1_zp_c),
            (g2_zo, g2_zo_c, g2_zp, g2_zp_c))


def _jacobian(c: _Coeffs, v1: float, u: np.ndarray) -> np.ndarray:
    z_o, z_p = _unpack(u)
    vnorm = max(abs(v1), 1e-3)
    (g1_zo, g1_zo_c, g1_zp, g1_zp_c), (g2_zo, g2_zo_c, g2_zp, g2_zp_c) = \
        _wirtinger(c, z_o, z_p)
    jac = np.zeros((4, 4))
    jac[0:2, 0:2] = _real_block(g1_zo / vnorm, g1_zo_c / vnorm)
    jac[0:2, 2:4] = _real_block(g1_zp / vnorm, g1_zp_c / vnorm)
    jac[2:4, 0:2] = _real_block(g2_zo / vnorm, g2_zo_c / vnorm)
    jac[2:4, 2:4] = _real_block(g2_zp / vnorm, g2_zp_c / vnorm)
    return jac


def hb_jacobian(design: PfdDesign, f_out: float, v1: float,
                u: np.ndarray) -> np.ndarray:
    """Analytic Newton Jacobian of the reduced residual at the real point u."""
    return _jacobian(_coeffs(design, f_out), v1, u)


def hb_jacobian_fd(design: PfdDesign, f_out: float, v1: float,
                   u: np.ndarray, h: float) -> np.ndarray:
    """Central finite-difference Jacobian of the reduced residual."""
    c = _coeffs(design, f_out)
    n = len(u)
    out = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        out[:, j] = (_residual_vec(c, v1, u + e)
                     - _residual_vec(c, v1, u - e)) / (2 * h)
    return out


def hb_residual_reduced(design: PfdDesign, f_out: float, v1: float,
                        u: np.ndarray) -> np.ndarray:
    """Reduced real residual vector (exposed for verification)."""
    return _residual_vec(_coeffs(design, f_out), v1, u)


def _newton(c: _Coeffs, v1: float, u0: np.ndarray):
    u = u0.copy()
    f = _residual_vec(c, v1, u)
    norm = np.linalg.norm(f)
    for _ in range(NEWTON_MAX_ITER):
        if norm < NEWTON_TOL:
            return u, norm
        try:
            step = np.linalg.solve(_jacobian(c, v1, u), -f)
        except np.linalg.LinAlgError:
            return None
        scale = 1.0
        for _ in range(NEWTON_MAX_HALVINGS):
            u_try = u + scale * step
            f_try = _residual_vec(c, v1, u_try)
            norm_try = np.linalg.norm(f_try)
            if norm_try < norm or norm < NEWTON_TOL:
                break
            scale *= 0.5
        else:
            return None
        u, f, norm = u_try, f_try, norm_try
    return (u, norm) if norm < NEWTON_TOL else None


def _pump_seed(c: _Coeffs, v1: float) -> complex:
    zeq_p = z_eq(c.z1p, c.z2p, c.z3p)
    if zeq_p == 0:
        raise DegenerateNetworkError("Z_eq at omega_p vanished")
    return -1j * v1 * c.z2p / (2.0 * zeq_p * c.wp)


def _seed_points(c: _Coeffs, v1: float, extra: Sequence[complex]) -> List[np.ndarray]:
    z_p0 = _pump_seed(c, v1)

    def seed(z_o: complex) -> np.ndarray:
        return np.array([z_o.real, z_o.imag, z_p0.real, z_p0.imag])

    seeds = [seed(0.0)]
    # the deterministic fan: charge magnitudes bracketing both the natural
    # saturation scale and far-out starts, eight phases each
    for mag in (1e-13, 3e-13, 1e-12, 1e-10, 1e-8):
        for k8 in range(8):
            seeds.append(seed(mag * np.exp(1j * k8 * math.pi / 4.0)))
    seeds.extend(seed(z) for z in extra if z != 0)
    return seeds


def _canonicalize(u: np.ndarray) -> np.ndarray:
    z_o = complex(u[0], u[1])
    if z_o == 0:
        return u
    a = np.angle(z_o)
    if a < 0 or a >= math.pi - 1e-15:
        out = u.copy()
        out[0:2] = -out[0:2]
        return out
    return u


def _expand(c: _Coeffs, v1: float, z_o: complex, z_p: complex):
    """Recover the tank coefficients from the eliminated linear rows."""
    x_o = c.z2o * z_o / (c.z1o + c.z2o)
    y_o = x_o - z_o
    x_p = (v1 / (2j * c.wp) + c.z2p * z_p) / (c.z1p + c.z2p)
    y_p = x_p - z_p
    return x_o, y_o, x_p, y_p


def hb_solve(design: PfdDesign, f_out: Optional[float] = None,
             v1: float = 0.0, extra_seeds: Sequence[complex] = ()) -> List[HbSolution]:
    """All distinct steady-state solutions found from the seed schedule.

    Converged points are canonicalized through the z_o -> -z_o period
    doubling symmetry (arg z_o in [0, pi)) and deduplicated. Sorted by
    ascending |z_o|.
    """
    if f_out is None:
        f_out = design.f_out
    c = _coeffs(design, f_out)
    found: List[np.ndarray] = []
    norms: List[float] = []
    for seed in _seed_points(c, v1, extra_seeds):
        result = _newton(c, v1, seed)
        if result is None:
            continue
        u, norm = result
        u = _canonicalize(u)
        is_dup = False
        for known in found:
            tol = max(1e-16, 1e-6 * max(np.max(np.abs(u)), np.max(np.abs(known))))
            if np.max(np.abs(u - known)) < tol:
                is_dup = True
                break
        if not is_dup:
            found.append(u)
            norms.append(norm)

    sols = []
    for u, norm in zip(found, norms):
        z_o, z_p = _unpack(u)
        x_o, y_o, x_p, y_p = _expand(c, v1, z_o, z_p)
        sols.append(HbSolution(
            x_o=x_o, y_o=y_o, z_o=z_o, x_p=x_p, y_p=y_p, z_p=z_p,
            v1=v1, residual_norm=norm))
    sols.sort(key=lambda s: abs(s.z_o))
    return sols


# ---------------------------------------------------------------------------
# Stability: slow-envelope linearization around a solution
# ---------------------------------------------------------------------------
# For amplitudes varying slowly against their carriers, each reduced branch
# operator i*n*Zred(n) acquires the envelope term (Zred + n dZred/dn) d/dt.
# The flow  N_o dz_o/dt = -G1,  N_p dz_p/dt = -G2  linearized around a
# balance point gives a 4x4 real Jacobian; the sign of its leading
# eigenvalue real part decides stability.

def _reduced_impedance(design: PfdDesign, omega: float) -> complex:
    c_dc = design.varactor.c_dc
    z1 = branch_impedance(design.z1, omega, c_dc).z
    z2 = branch_impedance(design.z2, omega, c_dc).z
    z3 = branch_impedance(design.z3, omega, c_dc).z
    if z1 + z2 == 0:
        return complex(np.inf)
    return z3 + z1 * z2 / (z1 + z2)


def _envelope_mass(design: PfdDesign, omega: float) -> complex:
    """Zred + omega * dZred/domega by central difference."""
    h = 1e-6 * omega
    zm = _reduced_impedance(design, omega - h)
    zp = _reduced_impedance(design, omega + h)
    z0 = _reduced_impedance(design, omega)
    return z0 + omega * (zp - zm) / (2.0 * h)


def solution_alpha(design: PfdDesign, f_out: float, sol: HbSolution) -> float:
    """Leading envelope growth rate (1/s) around a balance solution."""
    c = _coeffs(design, f_out)
    (g1_zo, g1_zo_c, g1_zp, g1_zp_c), (g2_zo, g2_zo_c, g2_zp, g2_zp_c) = \
        _wirtinger(c, sol.z_o, sol.z_p)
    n_o = _envelope_mass(design, c.wo)
    n_p = _envelope_mass(design, c.wp)
    jac = np.zeros((4, 4))
    jac[0:2, 0:2] = _real_block(-g1_zo / n_o, -g1_zo_c / n_o)
    jac[0:2, 2:4] = _real_block(-g1_zp / n_o, -g1_zp_c / n_o)
    jac[2:4, 0:2] = _real_block(-g2_zo / n_p, -g2_zo_c / n_p)
    jac[2:4, 2:4] = _real_block(-g2_zp / n_p, -g2_zp_c / n_p)
    return float(np.max(np.linalg.eigvals(jac).real))


# ---------------------------------------------------------------------------
# Branch classification over a drive grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifiedPoint:
    v1: float
    solution: HbSolution


@dataclass
class BranchClassification:
    branches: Dict[str, List[ClassifiedPoint]]
    diagnostics: List[str]

    def rows(self):
        out = []
        for name in sorted(self.branches):
            for pt in self.branches[name]:
                out.append((pt.v1, name, abs(pt.solution.z_o),
                            pt.solution.alpha))
        out.sort(key=lambda r: (r[0], r[1]))
        return out


def classify_and_stability(design: PfdDesign, f_out: float,
                           v1_grid: Sequence[float]) -> BranchClassification:
    """Continuation over an ascending drive grid with S1/S2/S3 labels.

    S1 is the trivial branch, S2 the dividing branch growing continuously
    from zero at threshold, S3 the spurious quasi-uniform branch. alpha is
    attached per point; linking failures are reported as diagnostics.
    """
    v1_grid = list(v1_grid)
    if any(b < a for a, b in zip(v1_grid, v1_grid[1:])):
        raise ValueError("v1 grid must be ascending")

    per_point: List[List[HbSolution]] = []
    prev: List[complex] = []
    for v1 in v1_grid:
        sols = hb_solve(design, f_out, v1, extra_seeds=prev)
        sols = [replace(s, alpha=solution_alpha(design, f_out, s)) for s in sols]
        per_point.append(sols)
        prev = [s.z_o for s in sols if abs(s.z_o) > 0]

    scale = max((abs(s.z_o) for sols in per_point for s in sols), default=0.0)
    tiny = max(1e-15, 1e-3 * scale)

    # track nontrivial solutions across the grid by z_o continuity
    tracks: List[List[Tuple[int, HbSolution]]] = []
    open_tracks: List[List[Tuple[int, HbSolution]]] = []
    diagnostics: List[str] = []
    for idx, sols in enumerate(per_point):
        nontrivial = [s for s in sols if abs(s.z_o) >= tiny]
        still_open = []
        used = set()
        for track in open_tracks:
            last = track[-1][1].z_o
            best_j, best_d = None, None
            for j, s in enumerate(nontrivial):
                if j in used:
                    continue
                d = min(abs(s.z_o - last), abs(s.z_o + last))
                if best_d is None or d < best_d:
                    best_j, best_d = j, d
            if best_j is not None and best_d <= 0.6 * max(
                    abs(last), abs(nontrivial[best_j].z_o)):
                track.append((idx, nontrivial[best_j]))
                used.add(best_j)
                still_open.append(track)
            else:
                tracks.append(track)
        for j, s in enumerate(nontrivial):
            if j not in used:
                still_open.append([(idx, s)])
        open_tracks = still_open
    tracks.extend(open_tracks)

    branches: Dict[str, List[ClassifiedPoint]] = {"S1": [], "S2": [], "S3": []}
    for idx, sols in enumerate(per_point):
        trivial = [s for s in sols if abs(s.z_o) < tiny]
        if trivial:
            branches["S1"].append(ClassifiedPoint(
                v1_grid[idx], replace(trivial[0], branch="S1")))
        else:
            diagnostics.append(
                f"no trivial solution at v1 = {v1_grid[idx]:g}")

    # the nontrivial branch already present at the lowest grid drive with
    # quasi-uniform amplitude is S3; the branch growing from zero partway
    # up the grid is S2
    def label(track) -> str:
        first_idx = track[0][0]
        amps = [abs(pt[1].z_o) for pt in track]
        if first_idx == 0 and (max(amps) < 3.0 * min(amps)):
            return "S3"
        return "S2"

    for track in tracks:
        name = label(track)
        for idx, s in track:
            branches[name].append(
                ClassifiedPoint(v1_grid[idx], replace(s, branch=name)))
    for name in branches:
        branches[name].sort(key=lambda p: p.v1)
    if not branches["S3"]:
        diagnostics.append(
            "no quasi-uniform spurious branch found over the grid; the "
            "consistent two-tone system admits only the trivial and "
            "dividing branches for this design")
    return BranchClassification(branches=branches, diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# Output power characteristic
# ---------------------------------------------------------------------------

def _load_power_w(design: PfdDesign, f_out: float, y_o: complex) -> float:
    """Average power into the load from the omega_o branch-2 current."""
    wo = 2.0 * math.pi * f_out
    i_peak = 2.0 * wo * abs(y_o)
    meta = design.canonical
    if meta is not None and meta.has_transformer:
        zl = 1j * wo * meta.l_match
        z_par = zl * design.r_load / (zl + design.r_load)
        v_peak = i_peak * abs(z_par)
        return v_peak**2 / (2.0 * design.r_load)
    if meta is not None:
        return 0.5 * i_peak**2 * design.r_load
    z2o = branch_impedance(design.z2, wo, design.varactor.c_dc).z
    return 0.5 * i_peak**2 * z2o.real


def pout_vs_pin(design: PfdDesign, f_out: float, pin_grid_dbm: Sequence[float],
                noise_floor_dbm: Optional[float] = None) -> List[Tuple[float, float, str]]:
    """Output power at f_out vs available input power at f_pump.

    Selects the stable solution per point; output below the noise floor is
    clipped to the floor. Rows are (p_in_dbm, p_out_dbm, branch).
    """
    if noise_floor_dbm is None:
        noise_floor_dbm = design.noise_floor_dbm
    rows = []
    prev: List[complex] = []
    for pin_dbm in pin_grid_dbm:
        pin_w = 1e-3 * 10.0**(pin_dbm / 10.0)
        v1 = math.sqrt(8.0 * design.r_source * pin_w)
        sols = hb_solve(design, f_out, v1, extra_seeds=prev)
        prev = [s.z_o for s in sols if abs(s.z_o) > 0]
        scored = [replace(s, alpha=solution_alpha(design, f_out, s))
                  for s in sols]
        stable = [s for s in scored if s.alpha < 0]
        pick = max(stable, key=lambda s: abs(s.z_o)) if stable \
            else min(scored, key=lambda s: s.alpha)
        p_w = _load_power_w(design, f_out, pick.y_o)
        p_dbm = 10.0 * math.log10(p_w / 1e-3) if p_w > 0 else -math.inf
        branch = "S2" if abs(pick.z_o) > 1e-15 else "S1"
        if p_dbm < noise_floor_dbm:
            p_dbm = noise_floor_dbm
        rows.append((pin_dbm, p_dbm, branch))
    return rows
