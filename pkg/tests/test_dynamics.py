import numpy as np
import pytest
from numpy.testing import assert_allclose

from cmcurves.dynamics import (
    FORCE_FACTOR,
    PhasePoint,
    Trajectory,
    calibrate_lax_convention,
    center_of_mass,
    eom_rhs,
    forces,
    hamiltonian,
    integrate,
    lax_pair,
    lax_residual,
    cyclic_equilibrium,
    linear_growth_rate,
    near_equilibrium_point,
    random_phase_point,
    trajectory_frame,
)
from cmcurves.elliptic import lattice_distance, wp
from cmcurves.errors import CollisionError, DomainError, StabilityError

ZS = (0.3 + 0.4j, 0.7 + 0.2j, 0.15 + 0.85j)


class TestPhasePoint:
    def test_positions_are_reduced(self, square):
        s = PhasePoint([0.1 + 0.2j + 2 - 1j], [0.5], square)
        assert_allclose(s.x, [0.1 + 0.2j], atol=1e-12)
        assert s.n == 1

    def test_arrays_are_read_only(self, three_particles):
        with pytest.raises(ValueError):
            three_particles.x[0] = 0

    def test_shape_mismatch(self, square):
        with pytest.raises(DomainError):
            PhasePoint([0.1, 0.5], [0.0], square)

    def test_empty(self, square):
        with pytest.raises(DomainError):
            PhasePoint([], [], square)

    @pytest.mark.parametrize("other", [0.2 + 1e-6, 1.2, 0.2 + 1j])
    def test_collision(self, square, other):
        with pytest.raises(CollisionError):
            PhasePoint([0.2, other], [0.0, 0.0], square)


class TestHamiltonian:
    def test_single_particle_is_free(self, square):
        s = PhasePoint([0.3 + 0.3j], [1.5 - 0.5j], square)
        assert_allclose(hamiltonian(s), 0.5 * (1.5 - 0.5j) ** 2)
        assert_allclose(forces(s.x, square), [0.0])

    def test_two_particles(self, square):
        s = PhasePoint([0.1, 0.5 + 0.3j], [1.0, -1.0], square)
        expected = 1.0 - 4.0 * wp(0.1 - 0.5 - 0.3j, square)
        assert_allclose(hamiltonian(s), expected, rtol=1e-12)

    def test_forces_sum_to_zero(self, three_particles):
        f = forces(three_particles.x, three_particles.data)
        assert abs(f.sum()) < 1e-9 * np.abs(f).max()

    def test_eom_rhs(self, three_particles):
        dx, dq = eom_rhs(three_particles)
        assert_allclose(dx, three_particles.q)
        assert_allclose(dq, forces(three_particles.x, three_particles.data, FORCE_FACTOR))

    def test_eom_rhs_is_hamiltonian_gradient(self, three_particles):
        s = three_particles
        h = 1e-4

        def derivative(shift):
            values = [hamiltonian(shift(c * h)) for c in (-2, -1, 1, 2)]
            return (values[0] - 8 * values[1] + 8 * values[2] - values[3]) / (12 * h)

        dx, dq = eom_rhs(s)
        for i in range(s.n):
            e = np.eye(s.n)[i]
            dh_dq = derivative(lambda d: s.with_arrays(s.x, s.q + d * e))
            dh_dx = derivative(lambda d: s.with_arrays(s.x + d * e, s.q))
            assert_allclose(dh_dq, dx[i], rtol=1e-9, atol=1e-9)
            assert_allclose(-dh_dx, dq[i], rtol=1e-7)

    def test_permutation_invariance(self, three_particles):
        s = three_particles
        order = [2, 0, 1]
        permuted = PhasePoint(s.x[order], s.q[order], s.data)
        assert_allclose(hamiltonian(permuted), hamiltonian(s), rtol=1e-12)


class TestIntegrate:
    def test_conserves_energy_and_momentum(self, calm_three):
        traj = integrate(calm_three, 0.2, 1e-3)
        assert traj.stats["max_energy_drift"] < 1e-7
        _, p = traj.center_of_mass_series()
        assert_allclose(p, p[0], atol=1e-9)

    def test_fourth_order_convergence(self, calm_three):
        reference = integrate(calm_three, 0.1, 1.25e-4).unwrapped[-1]
        errors = [
            np.abs(integrate(calm_three, 0.1, dt).unwrapped[-1] - reference).max()
            for dt in (1e-3, 5e-4)
        ]
        slope = np.log2(errors[0] / errors[1])
        assert 3.5 < slope < 4.5

    def test_time_reversal(self, calm_three):
        forward = integrate(calm_three, 0.1, 5e-4)
        end = forward.states[-1]
        back = integrate(end.with_arrays(end.x, -end.q), 0.1, 5e-4)
        assert np.max(lattice_distance(back.states[-1].x - calm_three.x, calm_three.data)) < 1e-8
        assert_allclose(-back.states[-1].q, calm_three.q, atol=1e-6)

    def test_ends_exactly_at_t_end(self, three_particles):
        traj = integrate(three_particles, 0.1025, 0.01)
        assert traj.times[-1] == 0.1025
        assert len(traj.times) == 12

    def test_record_every(self, three_particles):
        traj = integrate(three_particles, 0.1, 0.01, record_every=3)
        assert_allclose(traj.times, [0.0, 0.03, 0.06, 0.09, 0.1])
        assert traj.unwrapped.shape == (5, 3)

    def test_unwrapped_positions_follow_momenta(self, square):
        s = PhasePoint([0.9 + 0.5j], [2.0], square)
        traj = integrate(s, 0.1, 0.01)
        assert_allclose(traj.unwrapped[-1], [1.1 + 0.5j], atol=1e-12)
        assert_allclose(traj.states[-1].x, [0.1 + 0.5j], atol=1e-12)

    def test_records_lax_residual(self, three_particles):
        traj = integrate(three_particles, 0.02, 1e-3, lax_z=ZS[0])
        assert traj.stats["max_lax_residual"] < 1e-8

    def test_large_step_is_rejected(self, three_particles):
        with pytest.raises((StabilityError, CollisionError)):
            integrate(three_particles, 5.0, 0.5)

    @pytest.mark.parametrize("dt, t_end, every", [(0.0, 1.0, 1), (0.1, -1.0, 1), (0.1, 1.0, 0)])
    def test_invalid_arguments(self, three_particles, dt, t_end, every):
        with pytest.raises(DomainError):
            integrate(three_particles, t_end, dt, record_every=every)

    def test_trajectory_times_must_increase(self, three_particles):
        with pytest.raises(DomainError):
            Trajectory(
                times=np.array([0.0, 0.0]),
                states=(three_particles, three_particles),
                dt=0.1,
                unwrapped=np.zeros((2, 3)),
            )


class TestLax:
    @pytest.mark.parametrize("z", ZS)
    def test_lax_equation(self, three_particles, z):
        scale = max(1.0, np.linalg.norm(lax_pair(three_particles, z).L))
        assert lax_residual(three_particles, z) / scale < 1e-8

    def test_wrong_order_fails(self, three_particles):
        z = ZS[0]
        scale = max(1.0, np.linalg.norm(lax_pair(three_particles, z).L))
        assert lax_residual(three_particles, z, order="LM") / scale > 1e-6

    def test_unknown_order(self, three_particles):
        with pytest.raises(DomainError):
            lax_residual(three_particles, ZS[0], order="XY")

    def test_diagonal(self, three_particles):
        L = lax_pair(three_particles, ZS[1]).L
        assert_allclose(np.diag(L), three_particles.q / 2)

    def test_gauge_keeps_spectrum(self, three_particles):
        z = ZS[2]
        plain = np.sort_complex(np.linalg.eigvals(lax_pair(three_particles, z).L))
        gauged = np.sort_complex(np.linalg.eigvals(lax_pair(three_particles, z, gauge=True).L))
        assert_allclose(plain, gauged, atol=1e-9)

    def test_calibration_picks_literal_convention(self, three_particles):
        calibration = calibrate_lax_convention(three_particles, ZS)
        assert calibration.unique
        assert calibration.literal
        assert calibration.winner == (4.0, "ML")

    def test_calibration_needs_two_particles(self, square):
        with pytest.raises(DomainError):
            calibrate_lax_convention(PhasePoint([0.2], [1.0], square), ZS)


class TestHelpers:
    def test_center_of_mass(self, three_particles):
        x, q = center_of_mass(three_particles)
        assert_allclose(q, three_particles.q.sum())
        assert_allclose(x, three_particles.x.sum())

    def test_trajectory_frame(self, three_particles):
        traj = integrate(three_particles, 0.01, 0.005)
        frame = trajectory_frame(traj)
        assert list(frame.columns[:3]) == ["t", "re_x1", "im_x1"]
        assert len(frame.columns) == 15
        assert len(frame) == 3
        assert frame["lax_residual"].isna().all()
        assert frame["energy_drift"].iloc[0] == 0.0

    def test_trajectory_frame_with_lax(self, three_particles):
        traj = integrate(three_particles, 0.01, 0.005)
        frame = trajectory_frame(traj, ZS[0])
        assert (frame["lax_residual"] < 1e-8).all()

    def test_random_phase_point(self, square, rng):
        s = random_phase_point(4, square, rng)
        assert s.n == 4
        d = np.abs(s.x[:, None] - s.x[None, :]) + np.eye(4)
        assert d.min() > 0.0

    def test_random_phase_point_rejects_zero(self, square, rng):
        with pytest.raises(DomainError):
            random_phase_point(0, square, rng)


class TestEquilibria:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_cyclic_configuration_is_at_rest(self, square, n):
        x = cyclic_equilibrium(n, 1 + 1j, 0.13 + 0.41j)
        assert np.abs(forces(x, square)).max() < 1e-8

    def test_square_three_body_diagonal_is_oscillatory(self, square):
        assert linear_growth_rate(3, 1 + 1j, square) < 1e-6

    def test_square_two_body_half_period_is_unstable(self, square):
        # wp''(1/2) = 6 e1^2 - g2 / 2 > 0 on the square lattice
        assert linear_growth_rate(2, 1.0, square) > 1.0
        assert linear_growth_rate(2, 1 + 1j, square) < 1e-6

    def test_near_equilibrium_point(self, square, rng):
        s = near_equilibrium_point(3, square, rng, amplitude=0.01, momentum=0.5)
        assert abs(abs(s.q.mean()) - 0.5) < 0.05
        gap = s.x[1] - s.x[0]
        assert min(
            float(lattice_distance(gap - w / 3, square)) for w in (1 + 1j, 1 - 1j)
        ) < 0.1
