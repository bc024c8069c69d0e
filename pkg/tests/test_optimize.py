import math

import pytest

from hom_forecast.optimize import golden_section_max


@pytest.mark.parametrize("peak", [-3.0, 0.0, 0.37, 2.5])
def test_finds_maximum_of_parabola(peak):
    x, fx = golden_section_max(lambda v: -((v - peak) ** 2), -5, 5, 1e-9)
    assert x == pytest.approx(peak, abs=1e-8)
    assert fx == pytest.approx(0.0, abs=1e-12)


def test_maximum_on_boundary():
    x, _ = golden_section_max(lambda v: v, 0, 1, 1e-10)
    assert x == pytest.approx(1.0, abs=1e-9)


def test_degenerate_bracket():
    x, fx = golden_section_max(math.sin, 1.0, 1.0, 1e-6)
    assert x == 1.0
    assert fx == math.sin(1.0)


def test_invalid_bracket():
    with pytest.raises(ValueError):
        golden_section_max(math.sin, 1.0, 0.0, 1e-6)
