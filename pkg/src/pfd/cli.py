"""Command-line front end: one subcommand per analysis, CSV/JSON file I/O.

Every file-writing subcommand also emits `<output>.manifest.json` recording
the subcommand, resolved parameters, tool version, input digest, and wall
duration. CSV bodies are locale-independent full-precision scientific
notation and reproduce byte-identically on identical inputs.

Exit codes: 0 success, 1 usage error, 2 computation error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .circuit import (DesignError, PfdDesign, VaractorModel, parse_design,
                      serialize_design, validate_design)
from .hb import classify_and_stability, pout_vs_pin
from .synthesis import (canonical_design, pth_surface, q_sensitivity,
                        quarter_wave_lsection, synthesize_canonical,
                        z0_for_target)
from .threshold import threshold_sweep, vth_closed_form
from .timedomain import SimConfig, integrate, poincare_map, td_threshold


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems via exception."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    v = float(value)
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def _write_csv(path: str, header: str, rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _manifest(out_path: str, subcommand: str, params: dict, digest: str,
              t0: float) -> None:
    doc = {
        "subcommand": subcommand,
        "parameters": params,
        "version": __version__,
        "input_digest_sha256": digest,
        "duration_s": time.time() - t0,
    }
    with open(out_path + ".manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _params_of(args) -> dict:
    skip = {"func"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        if value is None or isinstance(value, (bool, int, float, str)):
            out[key] = value
    return out


def _load_design(path: str) -> Tuple[PfdDesign, str]:
    with open(path) as fh:
        text = fh.read()
    return parse_design(text), _digest_text(text)


def _triplet(text: str, name: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise _UsageError(f"{name} must be START,STOP,POINTS")
    try:
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise _UsageError(f"{name}: {exc}") from exc
    if points < 1:
        raise _UsageError(f"{name}: POINTS must be >= 1")
    return np.linspace(start, stop, points)


def _workers() -> Optional[int]:
    raw = os.environ.get("PFD_THREADS", "").strip()
    if not raw or raw == "0":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"PFD_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise ValueError("PFD_THREADS must be >= 0")
    return n


def _pmap(fn, items: Sequence) -> List:
    """Order-preserving map over grid points, capped by PFD_THREADS."""
    items = list(items)
    workers = _workers()
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    if workers is None:
        workers = os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _sim_config(args) -> SimConfig:
    kw = {}
    if getattr(args, "periods", None) is not None:
        kw["periods_measure"] = args.periods
    if getattr(args, "settle", None) is not None:
        kw["periods_settle"] = args.settle
    return SimConfig(**kw)


def _cmd_validate(args, t0):
    design, _ = _load_design(args.design)
    diags = validate_design(design)
    for diag in diags:
        print(diag)
    if not diags:
        print("ok")
    return 2 if any(d.severity == "error" for d in diags) else 0


def _cmd_synth(args, t0):
    values = synthesize_canonical(args.l3, args.cdc, args.fout)
    if not values.feasible:
        print(f"error: l3 = {args.l3:g} H is outside the feasible window",
              file=sys.stderr)
        return 2
    transformer = None
    if args.transformer_z0 is not None:
        transformer = quarter_wave_lsection(args.transformer_z0, args.fout,
                                            args.r_load)
    varactor = VaractorModel(c_dc=args.cdc, c_d=args.cd, c_d2=args.cd2)
    design = canonical_design(values, varactor, args.fout,
                              r_source=args.r_source, r_load=args.r_load,
                              inductor_q=args.q, transformer=transformer)
    text = serialize_design(design)
    params = _params_of(args)
    digest = _digest_text(json.dumps(params, sort_keys=True))
    with open(args.out, "w") as fh:
        fh.write(text)
    _manifest(args.out, "synth", params, digest, t0)
    print(f"l1_h={_fmt(values.l1)}")
    print(f"c1_f={_fmt(values.c1)}")
    print(f"l2_h={_fmt(values.l2)}")
    print(f"c2_f={_fmt(values.c2)}")
    return 0


def _cmd_threshold(args, t0):
    design, _ = _load_design(args.design)
    res = vth_closed_form(design, args.fout)
    print(f"vth_v={_fmt(res.v_th_mag)}")
    print(f"pth_dbm={_fmt(res.p_th_dbm)}")
    return 0


def _cmd_sweep(args, t0):
    design, digest = _load_design(args.design)
    grid = np.linspace(args.fout_start, args.fout_stop, args.points)

    def point(f):
        return threshold_sweep(design, [f])[0]

    rows = _pmap(point, grid)
    _write_csv(args.out, "f_out_hz,vth_v,pth_dbm", rows)
    _manifest(args.out, "sweep", _params_of(args), digest, t0)
    return 0


def _cmd_surface(args, t0):
    l3_grid = _triplet(args.l3_range, "--l3-range")
    cdc_grid = _triplet(args.cdc_range, "--cdc-range")
    q = args.q

    def row_block(l3):
        return pth_surface([l3], cdc_grid, q, args.fout)

    rows = []
    for block in _pmap(row_block, l3_grid):
        rows.extend(block)
    out_rows = [(l3, cdc, q if q is not None else math.inf, pth,
                 1 if ok else 0) for (l3, cdc, pth, ok) in rows]
    _write_csv(args.out, "l3_h,cdc_f,q,pth_dbm,feasible", out_rows)
    params = _params_of(args)
    _manifest(args.out, "surface", params,
              _digest_text(json.dumps(params, sort_keys=True)), t0)
    return 0


def _cmd_qsens(args, t0):
    cdc_grid = _triplet(args.cdc_range, "--cdc-range")
    q_grid = _triplet(args.q_range, "--q-range")
    rows, argmin = q_sensitivity(args.l3, cdc_grid, q_grid, args.fout)
    _write_csv(args.out, "cdc_f,q,pth_dbm", rows)
    params = _params_of(args)
    _manifest(args.out, "qsens", params,
              _digest_text(json.dumps(params, sort_keys=True)), t0)
    for q in sorted(argmin):
        print(f"q={_fmt(q)} argmin_cdc_f={_fmt(argmin[q])}")
    return 0


def _cmd_hb(args, t0):
    design, digest = _load_design(args.design)
    f_out = args.fout if args.fout is not None else design.f_out
    grid = np.linspace(args.v1_start, args.v1_stop, args.points)
    result = classify_and_stability(design, f_out, grid)
    for note in result.diagnostics:
        print(f"note: {note}", file=sys.stderr)
    _write_csv(args.out, "v1_v,branch,zo_mag_c,alpha_per_s", result.rows())
    _manifest(args.out, "hb", _params_of(args), digest, t0)
    return 0


def _cmd_pout(args, t0):
    design, digest = _load_design(args.design)
    f_out = args.fout if args.fout is not None else design.f_out
    grid = np.linspace(args.pin_start, args.pin_stop, args.points)
    rows = pout_vs_pin(design, f_out, grid, noise_floor_dbm=args.floor)
    _write_csv(args.out, "pin_dbm,pout_dbm,branch", rows)
    _manifest(args.out, "pout", _params_of(args), digest, t0)
    return 0


def _cmd_sim(args, t0):
    design, digest = _load_design(args.design)
    traj = integrate(design, args.v1, _sim_config(args))
    rows = zip(traj.t, traj.q1, traj.q2, traj.q3, traj.dq3, traj.vout)
    _write_csv(args.csv, "t_s,q1_c,q2_c,q3_c,dq3_c_per_s,vout_v", rows)
    _manifest(args.csv, "sim", _params_of(args), digest, t0)
    return 0


def _cmd_tdthreshold(args, t0):
    design, _ = _load_design(args.design)
    vth = td_threshold(design, (args.vlo, args.vhi), _sim_config(args))
    print(f"vth_td_v={_fmt(vth)}")
    return 0


def _cmd_poincare(args, t0):
    design, digest = _load_design(args.design)
    grid = np.linspace(args.v1_start, args.v1_stop, args.points)
    rows = poincare_map(design, grid, _sim_config(args))
    _write_csv(args.out, "v1_v,r_even,r_odd", rows)
    _manifest(args.out, "poincare", _params_of(args), digest, t0)
    return 0


def _add_design(p):
    p.add_argument("--design", required=True, help="design JSON file")


def _build_parser() -> _Parser:
    parser = _Parser(prog="pfd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"pfd {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("validate", help="check a design file")
    _add_design(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("synth", help="synthesize a canonical design")
    p.add_argument("--l3", type=float, required=True)
    p.add_argument("--cdc", type=float, required=True)
    p.add_argument("--fout", type=float, required=True)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--cd", type=float, default=-0.3)
    p.add_argument("--cd2", type=float, default=0.02)
    p.add_argument("--r-source", type=float, default=50.0)
    p.add_argument("--r-load", type=float, default=50.0)
    p.add_argument("--transformer-z0", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("threshold", help="closed-form threshold")
    _add_design(p)
    p.add_argument("--fout", type=float, default=None)
    p.set_defaults(func=_cmd_threshold)

    p = sub.add_parser("sweep", help="threshold vs output frequency")
    _add_design(p)
    p.add_argument("--fout-start", type=float, required=True)
    p.add_argument("--fout-stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("surface", help="threshold power over (L3, C_DC)")
    p.add_argument("--l3-range", required=True, metavar="START,STOP,POINTS")
    p.add_argument("--cdc-range", required=True, metavar="START,STOP,POINTS")
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--fout", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_surface)

    p = sub.add_parser("qsens", help="threshold power vs (C_DC, Q)")
    p.add_argument("--l3", type=float, required=True)
    p.add_argument("--cdc-range", required=True, metavar="START,STOP,POINTS")
    p.add_argument("--q-range", required=True, metavar="START,STOP,POINTS")
    p.add_argument("--fout", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_qsens)

    p = sub.add_parser("hb", help="branch amplitudes and stability")
    _add_design(p)
    p.add_argument("--fout", type=float, default=None)
    p.add_argument("--v1-start", type=float, required=True)
    p.add_argument("--v1-stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_hb)

    p = sub.add_parser("pout", help="output vs input power")
    _add_design(p)
    p.add_argument("--fout", type=float, default=None)
    p.add_argument("--pin-start", type=float, required=True)
    p.add_argument("--pin-stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--floor", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pout)

    p = sub.add_parser("sim", help="time-domain trajectory")
    _add_design(p)
    p.add_argument("--v1", type=float, required=True)
    p.add_argument("--periods", type=int, default=None)
    p.add_argument("--settle", type=int, default=None)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=_cmd_sim)

    p = sub.add_parser("tdthreshold", help="bisected time-domain threshold")
    _add_design(p)
    p.add_argument("--vlo", type=float, required=True)
    p.add_argument("--vhi", type=float, required=True)
    p.add_argument("--settle", type=int, default=None)
    p.set_defaults(func=_cmd_tdthreshold)

    p = sub.add_parser("poincare", help="stroboscopic map vs drive")
    _add_design(p)
    p.add_argument("--v1-start", type=float, required=True)
    p.add_argument("--v1-stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--settle", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_poincare)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    t0 = time.time()
    try:
        args = parser.parse_args(argv)
        return args.func(args, t0)
    except _UsageError:
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (DesignError, ValueError, ArithmeticError, RuntimeError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
