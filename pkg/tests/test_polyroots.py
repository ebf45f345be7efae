import numpy as np
import pytest
from numpy.testing import assert_allclose

from cmcurves.errors import DomainError, TrackingError
from cmcurves.polyroots import aberth_roots, match_order, match_roots, min_root_gap


def _sorted(r):
    r = np.asarray(r)
    return r[np.lexsort((r.imag, r.real))]


class TestAberth:
    def test_real_roots(self):
        roots = aberth_roots(np.poly([1.0, 2.0, 3.0]))
        assert_allclose(_sorted(roots), [1, 2, 3], atol=1e-12)

    def test_random_complex_roots(self, rng):
        expected = rng.normal(size=5) + 1j * rng.normal(size=5)
        roots = aberth_roots(np.poly(expected))
        order, _ = match_order(expected, roots)
        assert_allclose(roots[order], expected, atol=1e-10)

    def test_warm_start(self):
        coeffs = np.poly([1 + 1j, -2, 0.5j])
        roots = aberth_roots(coeffs, initial=[1.01 + 1j, -2.02, 0.49j])
        assert_allclose(roots, [1 + 1j, -2, 0.5j], atol=1e-12)

    def test_leading_zeros_are_dropped(self):
        roots = aberth_roots([0, 0, 1, -3, 2])
        assert_allclose(_sorted(roots), [1, 2], atol=1e-12)

    def test_degree_one_and_zero(self):
        assert_allclose(aberth_roots([2, -4]), [2])
        assert len(aberth_roots([5])) == 0

    def test_zero_polynomial(self):
        with pytest.raises(DomainError):
            aberth_roots([0, 0])

    def test_initial_guess_size(self):
        with pytest.raises(DomainError):
            aberth_roots(np.poly([1, 2, 3]), initial=[1, 2])


class TestMatching:
    def test_min_root_gap(self):
        assert min_root_gap([0, 1, 3j]) == pytest.approx(1.0)
        assert min_root_gap([1]) == float("inf")

    def test_match_roots_follows_small_motion(self):
        previous = np.array([0.0, 1.0, 2j])
        current = np.array([2.01j, 0.01, 0.99])
        matched, ratio = match_roots(previous, current)
        assert_allclose(matched, [0.01, 0.99, 2.01j])
        assert ratio < 0.1

    def test_match_order_permutation(self):
        order, _ = match_order([0, 1], [1.001, 0.002])
        assert list(order) == [1, 0]

    def test_ambiguous_matching(self):
        with pytest.raises(TrackingError):
            match_order([0, 1], [0.5, 0.6])

    def test_size_mismatch(self):
        with pytest.raises(DomainError):
            match_order([0, 1], [0])
