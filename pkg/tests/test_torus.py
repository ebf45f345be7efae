import numpy as np
import pytest
from numpy.testing import assert_allclose

from cmcurves.elliptic import lattice_distance, lattice_invariants, wp
from cmcurves.errors import DomainError, SaddleEncounter
from cmcurves.torus import (
    TorusDifferential,
    base_case_check,
    critical_leaf_start,
    half_periods,
    holomorphic_combination,
    level_set_frame,
    torus_real_basis,
    torus_zeros,
    trace_level_set,
)


@pytest.fixture(scope="module")
def square_basis(square):
    return torus_real_basis(square)


class TestRealBasis:
    def test_square_lattice_constants(self, square_basis):
        psi1, psi2 = square_basis
        assert_allclose(psi1.b, -np.pi, atol=1e-8)
        assert_allclose(psi2.b, 1j * np.pi, atol=1e-8)

    @pytest.mark.parametrize("tau", [1j, 0.3 + 1.1j, -0.45 + 0.6j, 0.1 + 2.7j])
    def test_periods_are_real(self, tau):
        for psi in torus_real_basis(lattice_invariants(tau)):
            assert psi.reality_defect() < 1e-10

    def test_integrated_periods_match_closed_form(self, skewed):
        for psi in torus_real_basis(skewed):
            assert_allclose(psi.integrated_periods(), psi.periods(), atol=1e-8)

    def test_holomorphic_combination(self, square_basis):
        assert_allclose(holomorphic_combination(*square_basis), -2 * np.pi, atol=1e-8)

    def test_combination_needs_cancelling_poles(self, square_basis):
        psi1, _ = square_basis
        with pytest.raises(DomainError):
            holomorphic_combination(psi1, psi1)

    def test_primitive_derivative(self, skewed):
        psi1, _ = torus_real_basis(skewed)
        z, h = 0.37 + 0.29j, 1e-5
        fd = (psi1.primitive(z + h) - psi1.primitive(z - h)) / (2 * h)
        assert_allclose(fd, psi1(z), rtol=1e-8)


class TestZeros:
    def test_zeros_solve_level(self, skewed):
        for psi in torus_real_basis(skewed):
            found = torus_zeros(psi)
            assert not found.double
            for z in found.zeros:
                assert abs(psi(z)) < 1e-8
            assert float(lattice_distance(found.zeros[0] + found.zeros[1], skewed)) < 1e-8

    def test_square_lattice_zeros(self, square_basis, square):
        for z in torus_zeros(square_basis[0]).zeros:
            assert_allclose(wp(z, square), np.pi, rtol=1e-9)

    def test_double_zero_at_half_period(self, skewed):
        omega = half_periods(skewed)[1]
        psi = TorusDifferential(skewed, -complex(wp(omega, skewed)))
        found = torus_zeros(psi)
        assert found.double
        assert found.zeros == (omega, omega)

    @pytest.mark.parametrize("tau", [1j, 0.3 + 1.1j, -0.2 + 0.8j])
    def test_base_case(self, tau):
        verdict = base_case_check(lattice_invariants(tau))
        assert verdict.passed
        assert verdict.min_distance > 1e-6

    def test_shared_level_is_detected(self, square_basis, square):
        psi1, _ = square_basis
        twin = TorusDifferential(square, 1j * psi1.b, 1j)
        verdict = base_case_check(square, (psi1, twin))
        assert not verdict.passed
        assert verdict.level_gap < 1e-12


class TestLevelSets:
    def test_level_is_kept(self, square_basis):
        leaf = trace_level_set(square_basis[0], 0.37 + 0.29j, 0.5)
        assert leaf.drift < 1e-6
        assert leaf.monotone
        assert_allclose(leaf.s[-1], 0.5)
        assert_allclose(leaf.values[-1].real - leaf.values[0].real, 0.5, atol=1e-6)

    def test_accumulated_values_follow_primitive(self, square_basis):
        psi1 = square_basis[0]
        leaf = trace_level_set(psi1, 0.37 + 0.29j, 0.5)
        assert_allclose(leaf.values, psi1.primitive(leaf.points), atol=1e-9)
        assert leaf.arc_defect < 1e-6

    def test_critical_leaf_stops_at_zero(self, square_basis, square):
        psi1 = square_basis[0]
        zero = torus_zeros(psi1).zeros[0]
        start = critical_leaf_start(psi1, zero)
        assert abs(psi1.primitive(start).imag - psi1.primitive(zero).imag) < 1e-10
        with pytest.raises(SaddleEncounter) as info:
            trace_level_set(psi1, start, 10.0)
        assert float(lattice_distance(info.value.location - zero, square)) < 1e-4
        assert info.value.polyline.drift < 1e-6

    @pytest.mark.parametrize("start", [1e-3, 1.0 + 1j + 5e-3j])
    def test_start_in_pole_guard(self, square_basis, start):
        with pytest.raises(DomainError):
            trace_level_set(square_basis[0], start, 1.0)

    def test_start_at_zero(self, square_basis):
        zero = torus_zeros(square_basis[0]).zeros[0]
        with pytest.raises(DomainError):
            trace_level_set(square_basis[0], zero, 1.0)

    def test_positive_arc_length(self, square_basis):
        with pytest.raises(DomainError):
            trace_level_set(square_basis[0], 0.37 + 0.29j, 0.0)

    def test_frame(self, square_basis):
        leaf = trace_level_set(square_basis[0], 0.37 + 0.29j, 0.05)
        frame = level_set_frame(leaf)
        assert list(frame.columns) == ["s", "re_z", "im_z", "re_F1", "im_F1"]
        assert len(frame) == len(leaf.points)
