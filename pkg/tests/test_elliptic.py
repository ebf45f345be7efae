import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cmcurves.elliptic import (
    Kind,
    Segment,
    c_constants,
    eisenstein_invariants,
    kr_kernel,
    kr_kernel_dx,
    lattice_distance,
    lattice_invariants,
    ode_residual,
    period_identities,
    reduce_mod_lattice,
    segment_integral,
    sigma,
    sigma_prime,
    sigma_z_derivs,
    weierstrass,
    weierstrass_lattice_sum,
    wp,
    wp_prime,
    zeta,
)
from cmcurves.errors import DomainError, PoleError, UnsupportedOrderError

Z = 0.31 + 0.22j


def _sigma_ratio_series(z, n_max, data):
    """sigma^(n)(z) / sigma(z) from the Taylor series of wp, wp'' = 6 wp^2 - g2 / 2."""
    p = np.zeros(n_max + 1, dtype=complex)
    p[0], p[1] = wp(z, data), wp_prime(z, data)
    for m in range(n_max - 1):
        rhs = 6 * sum(p[i] * p[m - i] for i in range(m + 1)) - (data.g2 / 2 if m == 0 else 0)
        p[m + 2] = rhs / ((m + 2) * (m + 1))
    # log sigma(z + h) - log sigma(z) = sum a_n h^n
    a = np.zeros(n_max + 1, dtype=complex)
    a[1] = zeta(z, data)
    for m in range(2, n_max + 1):
        a[m] = -p[m - 2] / (m * (m - 1))
    e = np.zeros(n_max + 1, dtype=complex)
    e[0] = 1.0
    for m in range(1, n_max + 1):
        e[m] = sum(j * a[j] * e[m - j] for j in range(1, m + 1)) / m
    return e * np.array([math.factorial(m) for m in range(n_max + 1)])


class TestLatticeInvariants:
    def test_square_lattice_quasi_period(self, square):
        assert abs(square.eta1 - np.pi / 2) < 1e-10

    def test_square_lattice_has_no_g3(self, square):
        assert abs(square.g3) < 1e-9

    def test_legendre_relation(self, rng):
        for _ in range(20):
            tau = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.5, 3.0))
            assert lattice_invariants(tau).legendre_defect() < 1e-9

    def test_invariants_match_lattice_sums(self, skewed):
        g2, g3 = eisenstein_invariants(skewed.tau, radius=200)
        assert abs(skewed.g2 - g2) / abs(g2) < 1e-3
        assert abs(skewed.g3 - g3) / abs(g3) < 1e-6

    @pytest.mark.parametrize("tau", [-1j, 0.5, 0.2 - 0.1j])
    def test_rejects_tau_outside_upper_half_plane(self, tau):
        with pytest.raises(DomainError):
            lattice_invariants(tau)

    def test_c_constants(self, square):
        c1, c2 = c_constants(square)
        assert_allclose(c1, -np.pi, atol=1e-10)
        assert_allclose(c2, -2 * square.eta2 / 1j, atol=1e-10)


class TestWeierstrass:
    def test_differential_equation(self, square, skewed):
        assert ode_residual(square) < 1e-9
        assert ode_residual(skewed) < 1e-9

    @pytest.mark.parametrize("kind", [Kind.P, Kind.PPRIME, Kind.ZETA])
    def test_matches_lattice_sum(self, skewed, kind):
        expected = weierstrass_lattice_sum(Z, kind, skewed.tau, radius=200)
        value = weierstrass(Z, kind, skewed)
        assert abs(value - expected) / abs(expected) < 1e-3

    def test_parity(self, skewed):
        assert_allclose(wp(-Z, skewed), wp(Z, skewed), rtol=1e-12)
        assert_allclose(wp_prime(-Z, skewed), -wp_prime(Z, skewed), rtol=1e-12)
        assert_allclose(zeta(-Z, skewed), -zeta(Z, skewed), rtol=1e-12)

    def test_periodicity(self, skewed):
        for omega in (1, skewed.tau, 2 - skewed.tau):
            assert_allclose(wp(Z + omega, skewed), wp(Z, skewed), rtol=1e-9)
            assert_allclose(wp_prime(Z + omega, skewed), wp_prime(Z, skewed), rtol=1e-9)

    def test_zeta_quasi_periodicity(self, skewed):
        assert_allclose(zeta(Z + 1, skewed) - zeta(Z, skewed), 2 * skewed.eta1, rtol=1e-10)
        assert_allclose(zeta(Z + skewed.tau, skewed) - zeta(Z, skewed), 2 * skewed.eta2, rtol=1e-10)

    def test_sigma_quasi_periodicity(self, skewed):
        expected = -np.exp(2 * skewed.eta1 * (Z + 0.5)) * sigma(Z, skewed)
        assert_allclose(sigma(Z + 1, skewed), expected, rtol=1e-9)

    def test_sigma_prime(self, skewed):
        assert_allclose(sigma_prime(Z, skewed), sigma(Z, skewed) * zeta(Z, skewed), rtol=1e-9)
        assert_allclose(sigma_prime(0.0, skewed), 1.0, atol=1e-12)

    def test_string_kind(self, square):
        assert weierstrass(Z, "P", square) == wp(Z, square)

    def test_vectorised(self, square):
        zs = np.array([Z, 2 * Z, Z + 0.1j])
        assert_allclose(wp(zs, square), [wp(z, square) for z in zs], rtol=1e-14)

    @pytest.mark.parametrize("z", [0.0, 1.0 + 1j, 1e-12])
    def test_pole(self, square, z):
        with pytest.raises(PoleError) as info:
            wp(z, square)
        assert info.value.nearest is not None

    def test_sigma_vanishes_at_lattice(self, square):
        assert abs(sigma(0.0, square)) < 1e-14
        assert abs(sigma(1.0, square)) < 1e-12


class TestReduction:
    def test_reduce_mod_lattice(self, skewed):
        w = reduce_mod_lattice(Z + 3 - 2 * skewed.tau, skewed)
        assert_allclose(w, Z, atol=1e-12)

    def test_lattice_distance(self, square):
        assert_allclose(lattice_distance(0.1 + 1j, square), 0.1, atol=1e-12)


class TestKernel:
    def test_product_identity(self, skewed):
        x, z = 0.23 + 0.17j, 0.41 + 0.6j
        product = kr_kernel(x, z, skewed) * kr_kernel(-x, z, skewed)
        assert_allclose(product, wp(z, skewed) - wp(x, skewed), rtol=1e-9)

    def test_bloch_factor(self, skewed):
        x, z = 0.23 + 0.17j, 0.41 + 0.6j
        ratio = kr_kernel(x + 1, z, skewed) / kr_kernel(x, z, skewed)
        assert_allclose(ratio, np.exp(zeta(z, skewed) - 2 * skewed.eta1 * z), rtol=1e-9)

    @pytest.mark.parametrize("bloch", [True, False])
    def test_derivative_matches_finite_difference(self, skewed, bloch):
        x, z, h = 0.23 + 0.17j, 0.41 + 0.6j, 1e-5
        fd = (kr_kernel(x + h, z, skewed, bloch) - kr_kernel(x - h, z, skewed, bloch)) / (2 * h)
        assert_allclose(kr_kernel_dx(x, z, skewed, bloch), fd, rtol=1e-7)

    def test_residue_at_x_zero(self, square):
        x = 1e-6
        assert_allclose(x * kr_kernel(x, 0.3 + 0.4j, square), 1.0, rtol=1e-5)

    def test_vanishes_on_diagonal(self, skewed):
        assert abs(kr_kernel(0.41 + 0.6j, 0.41 + 0.6j, skewed)) < 1e-12

    def test_pole_in_z(self, square):
        with pytest.raises(PoleError):
            kr_kernel(0.2, 0.0, square)


class TestSigmaDerivatives:
    def test_low_orders(self, skewed):
        d = sigma_z_derivs(Z, 2, skewed)
        s, ze = sigma(Z, skewed), zeta(Z, skewed)
        assert_allclose(d[0], s, rtol=1e-10)
        assert_allclose(d[1], s * ze, rtol=1e-9)
        assert_allclose(d[2], s * (ze**2 - wp(Z, skewed)), rtol=1e-8)

    def test_order_eight_matches_series(self, skewed):
        d = sigma_z_derivs(Z, 8, skewed)
        assert_allclose(d / d[0], _sigma_ratio_series(Z, 8, skewed), rtol=1e-7)

    def test_order_eight_taylor_series(self, skewed):
        d = sigma_z_derivs(Z, 8, skewed)
        h = 0.04 * np.exp(0.7j)
        taylor = sum(d[n] * h**n / math.factorial(n) for n in range(9))
        assert_allclose(taylor, sigma(Z + h, skewed), rtol=1e-9)

    def test_order_limit(self, square):
        with pytest.raises(UnsupportedOrderError):
            sigma_z_derivs(Z, 13, square)


class TestQuadrature:
    def test_smooth_integral(self):
        value = segment_integral(np.exp, Segment(0.0, 1.0))
        assert_allclose(value, np.e - 1, rtol=1e-12)

    def test_highest_starting_order(self):
        value = segment_integral(np.exp, Segment(0.0, 1.0, nodes=128))
        assert_allclose(value, np.e - 1, rtol=1e-12)

    @pytest.mark.parametrize("nodes", [0, 129, 200])
    def test_rejects_order_without_refinement(self, nodes):
        with pytest.raises(DomainError):
            Segment(0.0, 1.0, nodes=nodes)

    def test_segment_through_pole(self, square):
        with pytest.raises(PoleError):
            segment_integral(lambda z: wp(z, square), Segment(-0.5, 0.5), data=square)

    def test_period_identities(self, skewed):
        p = period_identities(skewed)
        assert abs(p["a_c1"]) < 1e-8
        assert abs(p["b_c2"]) < 1e-8
        assert abs(p["b_c1"] - 2j * np.pi) < 1e-8
        assert abs(p["a_c2"] + 2j * np.pi / skewed.tau) < 1e-8

    def test_lattice_sum_has_no_sigma(self, square):
        with pytest.raises(DomainError):
            weierstrass_lattice_sum(Z, Kind.SIGMA, square.tau)
