"""Design and verification toolkit for varactor-based 2:1 parametric
frequency dividers: closed-form thresholds, component synthesis, two-tone
harmonic balance with branch stability, and adaptive time-domain simulation.
"""

from .circuit import (
    CanonicalMeta,
    DesignError,
    Diagnostic,
    Element,
    Parallel,
    PfdDesign,
    Series,
    TableZ,
    VaractorModel,
    VaractorStatic,
    canonical_branches,
    parse_design,
    serialize_design,
    validate_design,
)
from .impedance import (
    POLE_CAP_OHM,
    ImpedanceSample,
    ResonanceNotFound,
    TableRangeError,
    branch_impedance,
    design_impedances,
    element_impedance,
    find_resonance,
    z_eq,
)
from .threshold import (
    ThresholdError,
    ThresholdResult,
    dbm,
    det_A,
    det_A_matrix,
    threshold_sweep,
    vth_closed_form,
    vth_min_optimal,
)
from .synthesis import (
    CanonicalValues,
    TransformerValues,
    canonical_design,
    feasible_l3_window,
    pth_surface,
    q_sensitivity,
    quarter_wave_lsection,
    synthesize_canonical,
    z0_for_target,
)
from .hb import (
    BranchClassification,
    ClassifiedPoint,
    DegenerateNetworkError,
    HbSolution,
    classify_and_stability,
    hb_jacobian,
    hb_jacobian_fd,
    hb_residual,
    hb_solve,
    pout_vs_pin,
    pump_smallsignal,
    solution_alpha,
)
from .timedomain import (
    BracketError,
    NotSettledError,
    SimConfig,
    SpectrumResult,
    StiffnessError,
    Trajectory,
    UnsupportedTopologyError,
    WindowError,
    detect_period_doubling,
    integrate,
    poincare_map,
    state_derivative,
    steady_spectrum,
    td_threshold,
    varactor_voltage,
)

__version__ = "0.1.0"

__all__ = [
    "BracketError", "BranchClassification", "CanonicalMeta",
    "CanonicalValues", "ClassifiedPoint", "DegenerateNetworkError",
    "DesignError", "Diagnostic", "Element", "HbSolution", "ImpedanceSample",
    "NotSettledError", "POLE_CAP_OHM", "Parallel", "PfdDesign",
    "ResonanceNotFound", "Series", "SimConfig", "SpectrumResult",
    "StiffnessError", "TableRangeError", "TableZ", "ThresholdError",
    "ThresholdResult", "Trajectory", "TransformerValues",
    "UnsupportedTopologyError", "VaractorModel", "VaractorStatic",
    "WindowError", "branch_impedance", "canonical_branches",
    "canonical_design", "classify_and_stability", "dbm", "design_impedances",
    "det_A", "det_A_matrix", "detect_period_doubling", "element_impedance",
    "feasible_l3_window", "find_resonance", "hb_jacobian", "hb_jacobian_fd",
    "hb_residual", "hb_solve", "integrate", "parse_design", "poincare_map",
    "pout_vs_pin", "pth_surface", "pump_smallsignal", "q_sensitivity",
    "quarter_wave_lsection", "serialize_design", "solution_alpha",
    "state_derivative", "steady_spectrum", "synthesize_canonical",
    "td_threshold", "threshold_sweep", "validate_design", "varactor_voltage",
    "vth_closed_form", "vth_min_optimal", "z0_for_target", "z_eq",
]
