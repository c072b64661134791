import math

import numpy as np
import pytest

from blochgap.errors import InputError
from blochgap.geometry import (Interval, Rectangle, WaveguideConfig,
                               check_simplicity, quadrature_rule,
                               transverse_modes)

PI = math.pi


def test_interval_first_mode_closed_form():
    modes = transverse_modes(Interval(1.0), 3)
    assert modes[0].eigenvalue == pytest.approx(PI ** 2, rel=1e-14)
    x = np.array([0.1, 0.25, 0.5, 0.9])
    np.testing.assert_allclose(modes[0].psi(x), math.sqrt(2) * np.sin(PI * x), rtol=1e-14)
    np.testing.assert_allclose(modes[1].psi(x), math.sqrt(2) * np.sin(2 * PI * x), rtol=1e-14)


def test_rectangle_alpha2_first_mode():
    # sides (pi, pi/2): lowest eigenvalue 1 + 2^2 = 5
    modes = transverse_modes(Rectangle(PI, PI / 2), 4)
    assert modes[0].eigenvalue == pytest.approx(5.0, rel=1e-14)
    assert modes[0].numbers == (1, 1)
    assert modes[1].eigenvalue == pytest.approx(8.0, rel=1e-14)
    amp = 2 * math.sqrt(2) / PI
    val = modes[0].psi(0.7, 0.4)
    assert val == pytest.approx(amp * math.sin(0.7) * math.sin(2 * 0.4), rel=1e-13)


def test_mode_normalization_any_cross_section():
    for cs in (Interval(1.0), Interval(2.5), Rectangle(PI, PI / 2)):
        rule = quadrature_rule(cs, 32)
        mode = transverse_modes(cs, 1)[0]
        if isinstance(cs, Interval):
            vals = mode.psi(rule.points)
        else:
            vals = mode.psi(rule.points[:, 0], rule.points[:, 1])
        assert np.sum(rule.weights * vals ** 2) == pytest.approx(1.0, abs=1e-12)


def test_orthonormality_under_default_quadrature():
    for cs in (Interval(1.0), Rectangle(PI, PI / 2)):
        modes = transverse_modes(cs, 6)
        rule = quadrature_rule(cs, 32)
        coords = (rule.points,) if isinstance(cs, Interval) else \
            (rule.points[:, 0], rule.points[:, 1])
        table = np.array([m.psi(*coords) for m in modes])
        gram = (table * rule.weights) @ table.T
        np.testing.assert_allclose(gram, np.eye(6), atol=1e-10)


def test_gradient_reproduces_eigenvalue():
    for cs in (Interval(1.0), Rectangle(PI, PI / 2)):
        modes = transverse_modes(cs, 5)
        rule = quadrature_rule(cs, 48)
        coords = (rule.points,) if isinstance(cs, Interval) else \
            (rule.points[:, 0], rule.points[:, 1])
        for m in modes:
            grads = m.grad_psi(*coords)
            energy = sum(np.sum(rule.weights * g ** 2) for g in grads)
            assert energy == pytest.approx(m.eigenvalue, rel=1e-8)


def test_modes_vanish_on_boundary():
    modes = transverse_modes(Interval(1.0), 4)
    for m in modes:
        assert abs(m.psi(0.0)) < 1e-12 and abs(m.psi(1.0)) < 1e-12
    rect = transverse_modes(Rectangle(PI, PI / 2), 4)
    for m in rect:
        assert abs(m.psi(0.0, 0.3)) < 1e-12
        assert abs(m.psi(PI, 0.3)) < 1e-12
        assert abs(m.psi(1.0, PI / 2)) < 1e-11


def test_ordering_is_deterministic_with_ties():
    a = transverse_modes(Rectangle(PI, PI), 6)
    b = transverse_modes(Rectangle(PI, PI), 6)
    assert [m.numbers for m in a] == [m.numbers for m in b]
    # the degenerate pair at eigenvalue 5 is ordered lexicographically
    assert a[1].numbers == (1, 2) and a[2].numbers == (2, 1)
    assert a[1].eigenvalue == pytest.approx(a[2].eigenvalue, rel=1e-15)


def test_simplicity_checks():
    interval = transverse_modes(Interval(1.0), 4)
    assert check_simplicity(interval, 1)
    square = transverse_modes(Rectangle(PI, PI), 6)
    assert not check_simplicity(square, 2)   # 5 = 1+4 = 4+1
    alpha2 = transverse_modes(Rectangle(PI, PI / 2), 6)
    assert check_simplicity(alpha2, 1)       # 5 vs 8
    with pytest.raises(InputError):
        check_simplicity(interval, 0)
    with pytest.raises(InputError):
        check_simplicity(interval, 4)        # upper neighbor not visible


def test_quadrature_known_integrals():
    rule = quadrature_rule(Interval(1.0), 16)
    val = np.sum(rule.weights * np.sin(PI * rule.points) ** 2)
    assert val == pytest.approx(0.5, abs=1e-12)
    assert np.sum(rule.weights) == pytest.approx(1.0, rel=1e-14)
    rect = quadrature_rule(Rectangle(PI, PI / 2), 32)
    assert np.sum(rect.weights) == pytest.approx(PI ** 2 / 2, rel=1e-13)
    assert np.all(rule.weights > 0) and np.all(rect.weights > 0)


def test_quadrature_polynomial_exactness_degree():
    # order n is exact for degree 2n-1 per coordinate
    rule = quadrature_rule(Interval(1.0), 16)
    val = np.sum(rule.weights * rule.points ** 31)
    assert val == pytest.approx(1.0 / 32.0, rel=1e-13)


def test_quadrature_mode_product_closed_form():
    # int over (0,pi)x(0,pi/2) of (psi_1 psi_2)^2 = 3/pi^2 by hand integration
    cs = Rectangle(PI, PI / 2)
    modes = transverse_modes(cs, 2)
    rule = quadrature_rule(cs, 32)
    x1, x2 = rule.points[:, 0], rule.points[:, 1]
    prod = modes[0].psi(x1, x2) * modes[1].psi(x1, x2)
    assert np.sum(rule.weights * prod ** 2) == pytest.approx(3.0 / PI ** 2, rel=1e-12)


def test_invalid_inputs():
    with pytest.raises(InputError):
        transverse_modes(Interval(1.0), 0)
    with pytest.raises(InputError):
        Interval(-1.0)
    with pytest.raises(InputError):
        Rectangle(1.0, 0.0)
    with pytest.raises(InputError):
        quadrature_rule(Interval(1.0), 0)
    with pytest.raises(InputError):
        WaveguideConfig(Interval(1.0), 2.0, 3)
    with pytest.raises(InputError):
        WaveguideConfig(Rectangle(1.0, 1.0), 2.0, 2)
    with pytest.raises(InputError):
        WaveguideConfig(Interval(1.0), 0.0, 2)


def test_multiplicity_gap_interval():
    modes = transverse_modes(Interval(1.0), 3)
    assert modes[0].multiplicity_gap == pytest.approx(3 * PI ** 2, rel=1e-12)
