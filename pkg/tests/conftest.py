import pytest

from pfd import (VaractorModel, canonical_design, quarter_wave_lsection,
                 synthesize_canonical)

F_OUT = 100e6
L3 = 500e-9
C_DC = 1.7e-12
C_D = -0.3
C_D2 = 0.02


@pytest.fixture(scope="session")
def varactor():
    return VaractorModel(c_dc=C_DC, c_d=C_D, c_d2=C_D2)


@pytest.fixture(scope="session")
def case_values():
    return synthesize_canonical(L3, C_DC, F_OUT)


@pytest.fixture(scope="session")
def case_design(case_values, varactor):
    """Lossless 200:100 MHz case-study divider, exactly resonated."""
    return canonical_design(case_values, varactor, F_OUT)


@pytest.fixture(scope="session")
def lossy_design(case_values, varactor):
    return canonical_design(case_values, varactor, F_OUT, inductor_q=50.0)


@pytest.fixture(scope="session")
def transformer_design(case_values, varactor):
    tr = quarter_wave_lsection(7.01, F_OUT, 50.0)
    return canonical_design(case_values, varactor, F_OUT, inductor_q=50.0,
                            transformer=tr)
