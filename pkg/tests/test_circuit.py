"""Design model: varactor law, branch trees, file round-trips, validation."""

import json

import pytest

from pfd import (DesignError, Element, Parallel, PfdDesign, Series,
                 VaractorModel, VaractorStatic, canonical_branches,
                 parse_design, serialize_design, validate_design)


def test_varactor_capacitance_quadratic():
    v = VaractorModel(c_dc=1.7e-12, c_d=-0.3, c_d2=0.02)
    assert v.capacitance(0.0) == pytest.approx(1.7e-12)
    assert v.capacitance(1.0) == pytest.approx(1.7e-12 * (1 - 0.3 + 0.02))
    assert v.capacitance(-1.0) == pytest.approx(1.7e-12 * (1 + 0.3 + 0.02))


def test_varactor_rejects_nonpositive_cdc():
    with pytest.raises(DesignError):
        VaractorModel(c_dc=0.0, c_d=-0.3)
    with pytest.raises(DesignError):
        VaractorModel(c_dc=-1e-12, c_d=-0.3)


def test_varactor_min_capacitance_window():
    v = VaractorModel(c_dc=1e-12, c_d=-0.3, c_d2=0.02)
    # parabola opens upward, vertex at v = 7.5 V, outside the window
    assert v.min_capacitance_in_window(2.0) == pytest.approx(
        v.capacitance(2.0))
    flat = VaractorModel(c_dc=1e-12, c_d=-0.6)
    assert flat.min_capacitance_in_window(2.0) == pytest.approx(
        flat.capacitance(2.0))
    assert flat.min_capacitance_in_window(2.0) < 0


def test_canonical_branch_shapes():
    z1, z2, z3 = canonical_branches(382.5e-9, 6.6e-12, 742.5e-9, 0.85e-12,
                                    500e-9, 50.0, 50.0)
    assert isinstance(z1, Series)
    src = z1.items[0]
    assert src.kind == "R" and src.role == "source" and src.value == 50.0
    assert isinstance(z1.items[1], Parallel)
    assert isinstance(z2.items[0], Parallel)
    assert z2.items[1].role == "load"
    assert isinstance(z3.items[1], VaractorStatic)


def test_canonical_branch_transformer_order():
    _, z2, _ = canonical_branches(382.5e-9, 6.6e-12, 742.5e-9, 0.85e-12,
                                  500e-9, 50.0, 50.0,
                                  c_match=227e-12, l_match=11.2e-9)
    assert isinstance(z2.items[0], Parallel)
    assert z2.items[1].kind == "C"  # series matching capacitor
    shunt = z2.items[2]
    assert isinstance(shunt, Parallel)
    kinds = sorted(c.kind for c in shunt.items)
    assert kinds == ["L", "R"]


def test_series_parallel_require_two_children():
    with pytest.raises(DesignError):
        Series((Element("R", 1.0),))
    with pytest.raises(DesignError):
        Parallel((Element("R", 1.0),))


def test_roundtrip_canonical(case_design):
    text = serialize_design(case_design)
    again = parse_design(text)
    assert serialize_design(again) == text
    assert again.canonical.l3 == case_design.canonical.l3
    assert again.varactor == case_design.varactor


def test_roundtrip_explicit_branches(case_design):
    explicit = PfdDesign(z1=case_design.z1, z2=case_design.z2,
                         z3=case_design.z3, varactor=case_design.varactor,
                         f_out=case_design.f_out, r_source=50.0, r_load=50.0)
    text = serialize_design(explicit)
    doc = json.loads(text)
    assert "branches" in doc
    again = parse_design(text)
    assert serialize_design(again) == text


def test_parse_reports_syntax_location():
    with pytest.raises(DesignError, match=r"line 4"):
        parse_design('{\n  "f_out_hz": 1e8,\n  "oops"\n}')


def test_parse_missing_keys():
    with pytest.raises(DesignError, match="f_out_hz"):
        parse_design("{}")
    with pytest.raises(DesignError, match="varactor"):
        parse_design(json.dumps({
            "f_out_hz": 1e8, "source_resistance_ohm": 50,
            "load_resistance_ohm": 50, "topology": "canonical"}))


def test_parse_rejects_unknown_kind():
    doc = {
        "f_out_hz": 1e8, "source_resistance_ohm": 50,
        "load_resistance_ohm": 50,
        "varactor": {"c_dc_f": 1.7e-12, "c_d_per_v": -0.3},
        "branches": {
            "z1": {"kind": "memristor"},
            "z2": {"kind": "R", "value_ohm": 50},
            "z3": {"kind": "varactor_static"},
        },
    }
    with pytest.raises(DesignError, match="memristor"):
        parse_design(json.dumps(doc))


def test_parse_tags_source_resistor():
    doc = {
        "f_out_hz": 1e8, "source_resistance_ohm": 50,
        "load_resistance_ohm": 50,
        "varactor": {"c_dc_f": 1.7e-12, "c_d_per_v": -0.3},
        "branches": {
            "z1": {"kind": "series", "items": [
                {"kind": "R", "value_ohm": 50},
                {"kind": "L", "value_h": 380e-9},
            ]},
            "z2": {"kind": "R", "value_ohm": 50, "role": "load"},
            "z3": {"kind": "series", "items": [
                {"kind": "L", "value_h": 500e-9},
                {"kind": "varactor_static"},
            ]},
        },
    }
    design = parse_design(json.dumps(doc))
    assert not validate_design(design)


def test_validate_clean_design(case_design):
    assert validate_design(case_design) == []


def test_validate_varactor_count(case_design):
    bad = PfdDesign(z1=case_design.z1, z2=case_design.z2,
                    z3=Series((Element("L", 500e-9),
                               VaractorStatic(), VaractorStatic())),
                    varactor=case_design.varactor, f_out=1e8,
                    r_source=50.0, r_load=50.0)
    msgs = [d.message for d in validate_design(bad) if d.severity == "error"]
    assert any("exactly one varactor" in m for m in msgs)


def test_validate_low_q_warning(case_values, varactor):
    from pfd import canonical_design
    design = canonical_design(case_values, varactor, 100e6, inductor_q=5.0)
    diags = validate_design(design)
    assert any(d.severity == "warning" and "below 10" in d.message
               for d in diags)
    assert not any(d.severity == "error" for d in diags)


def test_validate_expansion_window_warning(case_values):
    from pfd import canonical_design
    design = canonical_design(case_values, VaractorModel(1.7e-12, -0.8),
                              100e6)
    diags = validate_design(design)
    assert any("non-positive" in d.message for d in diags)


def test_with_f_out(case_design):
    shifted = case_design.with_f_out(95e6)
    assert shifted.f_out == 95e6
    assert shifted.omega_p == pytest.approx(4.0 * 3.141592653589793 * 95e6)
    assert case_design.f_out == 100e6
