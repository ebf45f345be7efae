import numpy as np
import pytest
from numpy.testing import assert_allclose

from cmcurves.errors import DomainError, UnsupportedCurveError
from cmcurves.monodromy import LiftedLoop
from cmcurves.periods import (
    DifferentialOnCurve,
    base_integral,
    degree_check,
    degree_pairing,
    homology_basis,
    period_payload,
    phi_period,
)
from cmcurves.spectral import curve_from_H

BASE = 0.31 + 0.27j


@pytest.fixture(scope="module")
def genus_two(skewed):
    return curve_from_H([0.4 + 0.3j, 0.2], skewed)


class TestDegreeOne:
    @pytest.mark.parametrize(
        "which, a, b, expected",
        [("phi1", 1, 0, 0), ("phi1", 0, 1, -1), ("phi2", 1, 0, 1), ("phi2", 0, 1, 0)],
    )
    def test_periods(self, skewed, which, a, b, expected):
        curve = curve_from_H([0.5 - 0.1j], skewed)
        result = phi_period(DifferentialOnCurve(curve, which), LiftedLoop(a, b, BASE))
        assert result.repetitions == 1
        assert abs(result.delta_k) < 1e-12
        assert result.nearest == expected
        assert result.is_integer

    def test_base_integral_is_path_independent(self, skewed):
        diff = DifferentialOnCurve(curve_from_H([0.5], skewed), "phi1")
        low = base_integral(diff, LiftedLoop(0, 1, 0.2 + 0.1j))
        high = base_integral(diff, LiftedLoop(0, 1, 0.7 + 0.1j))
        assert_allclose(low, high, atol=1e-9)
        assert_allclose(low, 2j * np.pi, atol=1e-8)

    def test_unknown_differential(self, skewed):
        with pytest.raises(DomainError):
            DifferentialOnCurve(curve_from_H([0.5], skewed), "phi3")

    def test_prefactor(self, skewed):
        curve = curve_from_H([0.5], skewed)
        assert DifferentialOnCurve(curve, "phi1").prefactor == 1.0
        assert DifferentialOnCurve(curve, "phi2").prefactor == skewed.tau


class TestDegreeTwo:
    def test_horizontal_lift(self, genus_two):
        loop = LiftedLoop(1, 0, BASE)
        phi1 = phi_period(DifferentialOnCurve(genus_two, "phi1"), loop)
        phi2 = phi_period(DifferentialOnCurve(genus_two, "phi2"), loop)
        assert phi1.is_integer and phi2.is_integer
        assert phi1.nearest == 0
        assert phi2.nearest == phi2.repetitions

    def test_vertical_lift(self, genus_two):
        loop = LiftedLoop(0, 1, BASE, sheet=1)
        phi1 = phi_period(DifferentialOnCurve(genus_two, "phi1"), loop)
        phi2 = phi_period(DifferentialOnCurve(genus_two, "phi2"), loop)
        assert phi1.nearest == -phi1.repetitions
        assert phi2.nearest == 0
        assert max(phi1.deviation, phi2.deviation) < 1e-6

    @pytest.mark.slow
    @pytest.mark.parametrize("a, b", [(1, 1), (1, -1), (2, 1), (-1, 2)])
    def test_integer_periods(self, genus_two, a, b):
        for sheet in (0, 1):
            loop = LiftedLoop(a, b, BASE, sheet=sheet)
            for which in ("phi1", "phi2"):
                assert phi_period(DifferentialOnCurve(genus_two, which), loop).is_integer

    @pytest.mark.slow
    def test_homology_basis(self, genus_two):
        cycles = homology_basis(genus_two)
        assert len(cycles) == 4
        assert all(c.repetitions == 1 for c in cycles)

    @pytest.mark.slow
    def test_degree_pairing(self, genus_two):
        result = degree_pairing(genus_two)
        assert abs(np.linalg.det(result.intersections)) == pytest.approx(1.0)
        assert abs(abs(result.pairing) - 2) < 1e-4

    @pytest.mark.slow
    def test_degree_check(self, genus_two):
        assert degree_check(genus_two) == 2


class TestDegreeCheck:
    def test_sheet_count(self, skewed):
        assert degree_check(curve_from_H([0.5], skewed)) == 1
        assert degree_check(curve_from_H([0.1, 0.2, 0.3], skewed)) == 3

    def test_degree_limit(self, skewed):
        with pytest.raises(UnsupportedCurveError):
            degree_check(curve_from_H([0.1, 0.2, 0.3, 0.4], skewed))

    def test_homology_basis_needs_degree_two(self, skewed):
        with pytest.raises(UnsupportedCurveError):
            homology_basis(curve_from_H([0.1, 0.2, 0.3], skewed))


def test_period_payload(skewed):
    curve = curve_from_H([0.5], skewed)
    payload = period_payload(phi_period(DifferentialOnCurve(curve, "phi2"), LiftedLoop(1, 0, BASE)))
    assert set(payload) == {"loop", "differential", "period", "nearest_int", "deviation"}
    assert payload["loop"] == {"a": 1, "b": 0, "sheet": 0}
    assert payload["nearest_int"] == 1
