"""Circuit data model for parametric frequency divider designs.

A design is three one-port branches hanging off a single internal node:
z1 carries the source (with R_S), z2 carries the load (with R_L), and z3
is the shunt branch containing the pumped varactor. Branch networks are
small composition trees of R/L/C elements, series/parallel combinators,
tabulated impedances, and a single static-varactor placeholder.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union


class DesignError(ValueError):
    """Raised for malformed or invariant-violating design documents."""


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.message}"


@dataclass(frozen=True)
class VaractorModel:
    """Second-order expansion C(v) = c_dc * (1 + c_d*v + c_d2*v^2).

    c_dc is in farads, c_d in 1/V, c_d2 in 1/V^2. v_bias is carried as
    metadata only; the expansion is taken about the bias point.
    """

    c_dc: float
    c_d: float
    c_d2: float = 0.0
    v_bias: float = 0.0

    def __post_init__(self) -> None:
        if not self.c_dc > 0:
            raise DesignError("c_dc must be positive")

    def capacitance(self, v: float) -> float:
        return self.c_dc * (1.0 + self.c_d * v + self.c_d2 * v * v)

    def min_capacitance_in_window(self, v_max: float = 2.0) -> float:
        """Minimum of C(v) over |v| <= v_max (closed form for a quadratic)."""
        candidates = [-v_max, v_max]
        if self.c_d2 > 0:
            vertex = -self.c_d / (2.0 * self.c_d2)
            if abs(vertex) <= v_max:
                candidates.append(vertex)
        return min(self.capacitance(v) for v in candidates)


@dataclass(frozen=True)
class Element:
    """A lumped R, L, or C. q is an optional inductor quality factor."""

    kind: str  # "R" | "L" | "C"
    value: float
    q: Optional[float] = None
    role: Optional[str] = None  # "source" | "load" on resistors

    def __post_init__(self) -> None:
        if self.kind not in ("R", "L", "C"):
            raise DesignError(f"unknown element kind {self.kind!r}")
        if self.q is not None and self.kind != "L":
            raise DesignError("q applies to inductors only")


@dataclass(frozen=True)
class Series:
    items: tuple

    def __post_init__(self) -> None:
        if len(self.items) < 2:
            raise DesignError("series combinator needs at least 2 children")


@dataclass(frozen=True)
class Parallel:
    items: tuple

    def __post_init__(self) -> None:
        if len(self.items) < 2:
            raise DesignError("parallel combinator needs at least 2 children")


@dataclass(frozen=True)
class TableZ:
    """Tabulated one-port impedance: ((f_hz, re_ohm, im_ohm), ...)."""

    points: tuple

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise DesignError("tabulated impedance needs at least 2 points")
        freqs = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise DesignError("tabulated frequencies must be strictly increasing")


@dataclass(frozen=True)
class VaractorStatic:
    """Placeholder resolving to the static varactor capacitance c_dc."""


Network = Union[Element, Series, Parallel, TableZ, VaractorStatic]


@dataclass(frozen=True)
class CanonicalMeta:
    """Component values of the canonical three-tank topology, when known."""

    l1: float
    c1: float
    l2: float
    c2: float
    l3: float
    inductor_q: Optional[float] = None
    c_match: Optional[float] = None
    l_match: Optional[float] = None

    @property
    def has_transformer(self) -> bool:
        return self.c_match is not None


@dataclass(frozen=True)
class PfdDesign:
    z1: Network
    z2: Network
    z3: Network
    varactor: VaractorModel
    f_out: float
    r_source: float
    r_load: float
    noise_floor_dbm: float = -80.0
    canonical: Optional[CanonicalMeta] = None

    @property
    def omega_o(self) -> float:
        return 2.0 * math.pi * self.f_out

    @property
    def omega_p(self) -> float:
        return 4.0 * math.pi * self.f_out

    def with_f_out(self, f_out: float) -> "PfdDesign":
        return replace(self, f_out=f_out)


def _iter_nodes(net: Network):
    yield net
    if isinstance(net, (Series, Parallel)):
        for child in net.items:
            yield from _iter_nodes(child)


def count_varactors(net: Network) -> int:
    return sum(1 for n in _iter_nodes(net) if isinstance(n, VaractorStatic))


def _find_role_resistor(net: Network, role: str) -> Optional[Element]:
    for n in _iter_nodes(net):
        if isinstance(n, Element) and n.kind == "R" and n.role == role:
            return n
    return None


def canonical_branches(l1, c1, l2, c2, l3, r_source, r_load,
                       inductor_q=None, c_match=None, l_match=None):
    """Build the canonical-topology branch trees.

    z1 = R_S series (L1 || C1); z2 = R_L series (L2 || C2); z3 = L3 series
    varactor. With a transformer, z2 becomes tank - series C_match -
    (L_match || R_L), read from the tank side.
    """
    z1 = Series((
        Element("R", r_source, role="source"),
        Parallel((Element("L", l1, q=inductor_q), Element("C", c1))),
    ))
    tank2 = Parallel((Element("L", l2, q=inductor_q), Element("C", c2)))
    if c_match is not None:
        z2 = Series((
            tank2,
            Element("C", c_match),
            Parallel((Element("L", l_match), Element("R", r_load, role="load"))),
        ))
    else:
        z2 = Series((tank2, Element("R", r_load, role="load")))
    z3 = Series((Element("L", l3, q=inductor_q), VaractorStatic()))
    return z1, z2, z3


# ---------------------------------------------------------------------------
# Design-file parsing and serialization (JSON key/value tree)
# ---------------------------------------------------------------------------

_VALUE_KEYS = {"R": "value_ohm", "L": "value_h", "C": "value_f"}


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise DesignError(f"missing key {key!r} in {context}")
    return mapping[key]


def _positive(value, key: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise DesignError(f"{key} must be a number, got {value!r}") from None
    if not out > 0 or not math.isfinite(out):
        raise DesignError(f"{key} must be positive")
    return out


def _parse_node(node: dict, context: str) -> Network:
    if not isinstance(node, dict) or "kind" not in node:
        raise DesignError(f"branch node in {context} must be an object with a 'kind'")
    kind = node["kind"]
    if kind in ("series", "parallel"):
        items = _require(node, "items", f"{context}/{kind}")
        children = tuple(_parse_node(c, f"{context}/{kind}") for c in items)
        return Series(children) if kind == "series" else Parallel(children)
    if kind in ("R", "L", "C"):
        value = _positive(_require(node, _VALUE_KEYS[kind], context), _VALUE_KEYS[kind])
        q = None
        if "q" in node and node["q"] is not None:
            if kind != "L":
                raise DesignError(f"q is only valid on inductors ({context})")
            q = _positive(node["q"], "q")
        role = node.get("role")
        if role is not None and role not in ("source", "load"):
            raise DesignError(f"unknown resistor role {role!r}")
        return Element(kind, value, q=q, role=role)
    if kind == "table":
        points = _require(node, "points", f"{context}/table")
        return TableZ(tuple((float(f), float(re), float(im)) for f, re, im in points))
    if kind == "varactor_static":
        return VaractorStatic()
    raise DesignError(f"unknown node kind {kind!r} in {context}")


def _node_to_doc(net: Network) -> dict:
    if isinstance(net, Series):
        return {"kind": "series", "items": [_node_to_doc(c) for c in net.items]}
    if isinstance(net, Parallel):
        return {"kind": "parallel", "items": [_node_to_doc(c) for c in net.items]}
    if isinstance(net, TableZ):
        return {"kind": "table", "points": [list(p) for p in net.points]}
    if isinstance(net, VaractorStatic):
        return {"kind": "varactor_static"}
    doc = {"kind": net.kind, _VALUE_KEYS[net.kind]: net.value}
    if net.q is not None:
        doc["q"] = net.q
    if net.role is not None:
        doc["role"] = net.role
    return doc


def _tag_source_resistor(z1: Network, r_source: float) -> Network:
    """Ensure exactly one resistor in z1 carries the source role."""
    if _find_role_resistor(z1, "source") is not None:
        return z1
    matches = [n for n in _iter_nodes(z1)
               if isinstance(n, Element) and n.kind == "R" and n.value == r_source]
    if len(matches) != 1:
        raise DesignError(
            "z1 must contain exactly one resistor tagged (or matching) the "
            "source resistance")

    def retag(net: Network) -> Network:
        if net is matches[0]:
            return replace(net, role="source")
        if isinstance(net, (Series, Parallel)):
            return type(net)(tuple(retag(c) for c in net.items))
        return net

    return retag(z1)


def parse_design(document: str) -> PfdDesign:
    """Parse and validate a design file; raise DesignError on any violation."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise DesignError(
            f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise DesignError("design document must be a key/value tree")

    f_out = _positive(_require(doc, "f_out_hz", "design"), "f_out_hz")
    r_source = _positive(_require(doc, "source_resistance_ohm", "design"),
                         "source_resistance_ohm")
    r_load = _positive(_require(doc, "load_resistance_ohm", "design"),
                       "load_resistance_ohm")
    noise_floor = float(doc.get("noise_floor_dbm", -80.0))

    var_doc = _require(doc, "varactor", "design")
    c_dc = _require(var_doc, "c_dc_f", "varactor")
    try:
        c_dc = float(c_dc)
    except (TypeError, ValueError):
        raise DesignError("c_dc_f must be a number") from None
    if not c_dc > 0:
        raise DesignError("c_dc must be positive")
    varactor = VaractorModel(
        c_dc=c_dc,
        c_d=float(_require(var_doc, "c_d_per_v", "varactor")),
        c_d2=float(var_doc.get("c_d2_per_v2", 0.0)),
        v_bias=float(var_doc.get("v_bias_v", 0.0)),
    )

    canonical = None
    if doc.get("topology") == "canonical":
        vals = {k: _positive(_require(doc, k, "canonical topology"), k)
                for k in ("l1_h", "c1_f", "l2_h", "c2_f", "l3_h")}
        q = _positive(doc["inductor_q"], "inductor_q") if doc.get("inductor_q") else None
        c_match = l_match = None
        if "transformer" in doc and doc["transformer"]:
            tr = doc["transformer"]
            c_match = _positive(_require(tr, "c_match_f", "transformer"), "c_match_f")
            l_match = _positive(_require(tr, "l_match_h", "transformer"), "l_match_h")
        canonical = CanonicalMeta(
            l1=vals["l1_h"], c1=vals["c1_f"], l2=vals["l2_h"], c2=vals["c2_f"],
            l3=vals["l3_h"], inductor_q=q, c_match=c_match, l_match=l_match)
        z1, z2, z3 = canonical_branches(
            canonical.l1, canonical.c1, canonical.l2, canonical.c2, canonical.l3,
            r_source, r_load, inductor_q=q, c_match=c_match, l_match=l_match)
    elif "branches" in doc:
        branches = doc["branches"]
        z1 = _parse_node(_require(branches, "z1", "branches"), "z1")
        z2 = _parse_node(_require(branches, "z2", "branches"), "z2")
        z3 = _parse_node(_require(branches, "z3", "branches"), "z3")
        z1 = _tag_source_resistor(z1, r_source)
    else:
        raise DesignError("design needs either topology: \"canonical\" or branches")

    design = PfdDesign(z1=z1, z2=z2, z3=z3, varactor=varactor, f_out=f_out,
                       r_source=r_source, r_load=r_load,
                       noise_floor_dbm=noise_floor, canonical=canonical)
    errors = [d for d in validate_design(design) if d.severity == "error"]
    if errors:
        raise DesignError("; ".join(d.message for d in errors))
    return design


def serialize_design(design: PfdDesign) -> str:
    doc = {
        "f_out_hz": design.f_out,
        "source_resistance_ohm": design.r_source,
        "load_resistance_ohm": design.r_load,
        "noise_floor_dbm": design.noise_floor_dbm,
        "varactor": {
            "c_dc_f": design.varactor.c_dc,
            "c_d_per_v": design.varactor.c_d,
            "c_d2_per_v2": design.varactor.c_d2,
            "v_bias_v": design.varactor.v_bias,
        },
    }
    if design.canonical is not None:
        meta = design.canonical
        doc["topology"] = "canonical"
        doc.update(l1_h=meta.l1, c1_f=meta.c1, l2_h=meta.l2, c2_f=meta.c2,
                   l3_h=meta.l3)
        if meta.inductor_q is not None:
            doc["inductor_q"] = meta.inductor_q
        if meta.has_transformer:
            doc["transformer"] = {"c_match_f": meta.c_match,
                                  "l_match_h": meta.l_match}
    else:
        doc["branches"] = {"z1": _node_to_doc(design.z1),
                           "z2": _node_to_doc(design.z2),
                           "z3": _node_to_doc(design.z3)}
    return json.dumps(doc, indent=2)


def validate_design(design: PfdDesign) -> list:
    """Check design invariants; returns one Diagnostic per violation."""
    out = []
    if not design.f_out > 0:
        out.append(Diagnostic("error", "f_out must be positive"))
    if not design.r_source > 0:
        out.append(Diagnostic("error", "r_source must be positive"))

    n_var = count_varactors(design.z3)
    if n_var != 1:
        out.append(Diagnostic("error", "z3 must contain exactly one varactor"))
    for name, net in (("z1", design.z1), ("z2", design.z2)):
        if count_varactors(net) != 0:
            out.append(Diagnostic("error", f"{name} must not contain a varactor"))

    src = _find_role_resistor(design.z1, "source")
    if src is None:
        out.append(Diagnostic("error", "z1 must contain the source resistor"))
    elif src.value != design.r_source:
        out.append(Diagnostic(
            "error", "tagged source resistor does not equal r_source"))

    for name, net in (("z1", design.z1), ("z2", design.z2), ("z3", design.z3)):
        for node in _iter_nodes(net):
            if isinstance(node, Element):
                if not node.value > 0:
                    out.append(Diagnostic("error", f"{name}: value must be positive"))
                if node.q is not None:
                    if not node.q > 0:
                        out.append(Diagnostic("error", f"{name}: q must be positive"))
                    elif node.q < 10:
                        out.append(Diagnostic(
                            "warning", f"{name}: inductor q = {node.q:g} below 10"))

    if design.varactor.min_capacitance_in_window(2.0) <= 0:
        out.append(Diagnostic(
            "warning",
            "varactor C(v) becomes non-positive within |v| <= 2 V; the "
            "quadratic expansion is outside its validity window"))
    return out
