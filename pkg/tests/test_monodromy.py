import numpy as np
import pytest
from numpy.testing import assert_allclose

from cmcurves.census import singularity_census
from cmcurves.errors import DomainError
from cmcurves.monodromy import (
    ClosedCycle,
    LiftedLoop,
    close_loop,
    cycle_intersection_matrix,
    permutation_orbit,
    sheet_track,
    sorted_roots,
)
from cmcurves.spectral import curve_from_H
from cmcurves.torus import TorusDifferential, torus_zeros

I0, I1 = 3.0, 0.0


@pytest.fixture(scope="module")
def curve(square):
    return curve_from_H([I0, I1], square)


@pytest.fixture(scope="module")
def branch_point(square):
    # roots of k^2 + I1 k + I0 - wp meet where wp(z) = I0 - I1^2 / 4, on Re z = 1/2 here
    return torus_zeros(TorusDifferential(square, b=-(I0 - I1**2 / 4))).zeros[0]


def _detour(branch_point, sheet=0):
    return LiftedLoop(0, 0, branch_point + 0.1, sheet=sheet, detour_center=branch_point, detour_radius=0.05)


class TestLiftedLoop:
    def test_vertices(self):
        assert_allclose(LiftedLoop(1, 1, 0.2).vertices(1j), [0.2, 1.2, 1.2 + 1j])

    def test_reversed_vertices_start_at_basepoint(self):
        loop = LiftedLoop(1, 1, 0.2).reversed()
        assert_allclose(loop.vertices(1j), [0.2, 0.2 - 1j, -0.8 - 1j])

    def test_detour_is_closed(self):
        verts = LiftedLoop(0, 0, 0.5, detour_center=0.4, detour_radius=0.05).vertices(1j)
        assert verts[0] == verts[-1]
        assert_allclose(np.abs(verts[1:-1] - 0.4), 0.05)

    @pytest.mark.parametrize("kwargs", [{"steps": 3}, {"detour_center": 0.1}])
    def test_validation(self, kwargs):
        with pytest.raises(DomainError):
            LiftedLoop(1, 0, 0.3 + 0.3j, **kwargs)


class TestSheetTracking:
    def test_sorted_roots(self, curve):
        k = sorted_roots(curve, 0.3 + 0.2j)
        assert k[0].real <= k[1].real

    def test_small_circle_is_trivial(self, curve):
        loop = LiftedLoop(0, 0, 0.3 + 0.2j, detour_center=0.32 + 0.2j, detour_radius=0.01)
        result = sheet_track(curve, loop)
        assert list(result.permutation) == [0, 1]
        assert_allclose(result.k_end, sorted_roots(curve, 0.3 + 0.2j)[0], atol=1e-8)

    def test_loop_and_inverse(self, curve):
        loop = LiftedLoop(1, 0, 0.25 + 0.5j)
        there = sheet_track(curve, loop)
        back = sheet_track(curve, loop.reversed(sheet=there.sheet))
        assert back.sheet == 0

    def test_detour_around_branch_point_swaps_sheets(self, curve, branch_point):
        result = sheet_track(curve, _detour(branch_point))
        assert list(result.permutation) == [1, 0]
        assert result.sheet == 1

    def test_path_samples(self, curve):
        result = sheet_track(curve, LiftedLoop(0, 1, 0.25 + 0.5j, steps=50))
        assert len(result.path_z) == len(result.path_k)
        assert_allclose(result.path_z[-1], 0.25 + 1.5j)

    def test_sheet_out_of_range(self, curve):
        with pytest.raises(DomainError):
            sheet_track(curve, LiftedLoop(1, 0, 0.25 + 0.5j, sheet=2))


class TestClosure:
    def test_closed_loop_needs_two_turns(self, curve, branch_point):
        cycle = close_loop(curve, _detour(branch_point))
        assert cycle.repetitions == 2
        assert len(cycle.pieces) == 2

    def test_trivial_loop_closes_at_once(self, curve):
        loop = LiftedLoop(0, 0, 0.3 + 0.2j, detour_center=0.32 + 0.2j, detour_radius=0.01)
        assert close_loop(curve, loop).repetitions == 1

    def test_permutation_orbit(self):
        assert permutation_orbit([[1, 0, 2], [0, 2, 1]]) == [0, 1, 2]
        assert permutation_orbit([[1, 0, 2]], start=2) == [2]


class TestIntersections:
    @staticmethod
    def _cycle(z, k):
        z = np.asarray(z, dtype=complex)
        return ClosedCycle(LiftedLoop(0, 0, z[0]), 1, ((z, np.full(len(z), k, dtype=complex)),))

    def test_transverse_cycles(self):
        horizontal = self._cycle(np.linspace(0.1, 1.1, 8) + 0.5j, 1.0)
        vertical = self._cycle(0.5 + 1j * np.linspace(0.1, 1.1, 8), 1.0)
        J = cycle_intersection_matrix([horizontal, vertical], 1j)
        assert J.tolist() == [[0, 1], [-1, 0]]

    def test_different_sheets_do_not_meet(self):
        horizontal = self._cycle(np.linspace(0.1, 1.1, 8) + 0.5j, 1.0)
        vertical = self._cycle(0.5 + 1j * np.linspace(0.1, 1.1, 8), 5.0)
        J = cycle_intersection_matrix([horizontal, vertical], 1j)
        assert J.tolist() == [[0, 0], [0, 0]]

    def test_lattice_translates_are_counted(self):
        horizontal = self._cycle(np.linspace(0.1, 1.1, 8) + 0.5j, 1.0)
        vertical = self._cycle(2.5 + 1j * np.linspace(-2.9, -1.9, 8), 1.0)
        J = cycle_intersection_matrix([horizontal, vertical], 1j)
        assert J[0, 1] == 1


@pytest.mark.slow
class TestDegreeThreeMonodromy:
    ACTIONS = [0.3 + 0.1j, -0.2 + 0.05j, 0.1j]
    BASE = 0.31 + 0.27j

    @staticmethod
    def _nearest_translate(z, base, tau):
        candidates = [z + m + n * tau for m in (-1, 0, 1) for n in (-1, 0, 1)]
        return min(candidates, key=lambda c: abs(c - base))

    def test_monodromy_group_is_transitive(self, square):
        curve = curve_from_H(self.ACTIONS, square)
        branch_points = singularity_census(curve).branch_points
        assert branch_points
        generators = []
        for z, _ in branch_points:
            centre = self._nearest_translate(z, self.BASE, square.tau)
            loop = LiftedLoop(0, 0, self.BASE, detour_center=centre, detour_radius=0.02)
            perm = sheet_track(curve, loop).permutation
            # a simple branch point swaps exactly two sheets
            assert sum(int(perm[i]) != i for i in range(3)) == 2
            generators.append(perm)
        generators += [sheet_track(curve, LiftedLoop(a, b, self.BASE)).permutation for a, b in ((1, 0), (0, 1))]
        for start in range(3):
            assert permutation_orbit(generators, start=start) == [0, 1, 2]
