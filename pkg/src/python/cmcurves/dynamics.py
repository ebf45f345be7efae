"""
Elliptic Calogero-Moser flow and its Lax pair.

H = 1/2 sum q_i^2 - 2 sum_{i != j} wp(x_i - x_j), integrated with a fixed-step
classical Runge-Kutta scheme. The Lax equation holds in the form dL/dt = [M, L]
for L, M built from the Krichever kernel F(x, z).
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
import pandas as pd

from .elliptic import (
    EllipticData,
    kr_kernel,
    kr_kernel_dx,
    lattice_distance,
    reduce_mod_lattice,
    wp,
    wp_prime,
)
from .errors import CollisionError, DomainError, PoleError, StabilityError

logger = logging.getLogger(__name__)

DEFAULT_COLLISION_EPS = 1e-4
DEFAULT_MAX_ENERGY_DRIFT = 1e-4
FORCE_FACTOR = 4.0


def _closest_pair(x: np.ndarray, data: EllipticData) -> Tuple[float, Tuple[int, int]]:
    best, pair = np.inf, ()
    for i, j in itertools.combinations(range(len(x)), 2):
        d = float(lattice_distance(x[i] - x[j], data))
        if d < best:
            best, pair = d, (i, j)
    return best, pair


def _check_collisions(x: np.ndarray, data: EllipticData, eps: float, time: float = 0.0):
    if len(x) < 2:
        return
    dist, pair = _closest_pair(x, data)
    if dist < eps:
        raise CollisionError(
            f"Particles {pair} at distance {dist:.3e} < {eps:g} (t={time:.6g})",
            time=time,
            pair=pair,
        )


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """
    Positions (reduced modulo the lattice) and momenta of N particles.

    Args:
        x: N complex positions
        q: N complex momenta
        data: lattice the positions live on
        collision_eps: minimal admissible pairwise distance modulo the lattice
    """

    x: np.ndarray
    q: np.ndarray
    data: EllipticData
    collision_eps: float = DEFAULT_COLLISION_EPS

    def __post_init__(self):
        x = np.atleast_1d(np.array(self.x, dtype=complex))
        q = np.atleast_1d(np.array(self.q, dtype=complex))
        if x.ndim != 1 or x.shape != q.shape:
            raise DomainError(f"Positions {x.shape} and momenta {q.shape} must be matching vectors")
        if len(x) < 1:
            raise DomainError("Need at least one particle")
        _check_collisions(x, self.data, self.collision_eps)
        x = reduce_mod_lattice(x, self.data)
        x.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return len(self.x)

    def with_arrays(self, x: np.ndarray, q: np.ndarray) -> "PhasePoint":
        return PhasePoint(x, q, self.data, self.collision_eps)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution of the flow; ``unwrapped`` keeps positions without lattice reduction."""

    times: np.ndarray
    states: Tuple[PhasePoint, ...]
    dt: float
    unwrapped: np.ndarray
    stats: Dict[str, Optional[float]] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise DomainError("times and states differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise DomainError("Trajectory times must be strictly increasing")

    @property
    def data(self) -> EllipticData:
        return self.states[0].data

    @property
    def n(self) -> int:
        return self.states[0].n

    @property
    def momenta(self) -> np.ndarray:
        return np.array([s.q for s in self.states])

    def center_of_mass_series(self) -> Tuple[np.ndarray, np.ndarray]:
        """Sum of unwrapped positions and sum of momenta at each sample."""
        return self.unwrapped.sum(axis=1), self.momenta.sum(axis=1)


@dataclass(frozen=True, eq=False)
class LaxMatrices:
    L: np.ndarray
    M: np.ndarray
    z: complex


def hamiltonian(s: PhasePoint) -> complex:
    """H = 1/2 sum q_i^2 - 2 sum over ordered pairs of wp(x_i - x_j)."""
    _check_collisions(s.x, s.data, s.collision_eps)
    kinetic = 0.5 * np.sum(s.q**2)
    if s.n == 1:
        return complex(kinetic)
    i, j = np.where(~np.eye(s.n, dtype=bool))
    return complex(kinetic - 2.0 * np.sum(wp(s.x[i] - s.x[j], s.data)))


def forces(x: np.ndarray, data: EllipticData, factor: float = FORCE_FACTOR) -> np.ndarray:
    n = len(x)
    if n == 1:
        return np.zeros(1, dtype=complex)
    diff = x[:, None] - x[None, :]
    off = ~np.eye(n, dtype=bool)
    pp = np.zeros((n, n), dtype=complex)
    pp[off] = wp_prime(diff[off], data)
    return factor * pp.sum(axis=1)


def eom_rhs(s: PhasePoint) -> Tuple[np.ndarray, np.ndarray]:
    """Hamilton's equations: dx_i = q_i, dq_i = 4 sum_{j != i} wp'(x_i - x_j)."""
    _check_collisions(s.x, s.data, s.collision_eps)
    return s.q.copy(), forces(s.x, s.data)


def _rk4_step(x: np.ndarray, q: np.ndarray, h: float, data: EllipticData):
    k1x, k1q = q, forces(x, data)
    k2x, k2q = q + 0.5 * h * k1q, forces(x + 0.5 * h * k1x, data)
    k3x, k3q = q + 0.5 * h * k2q, forces(x + 0.5 * h * k2x, data)
    k4x, k4q = q + h * k3q, forces(x + h * k3x, data)
    x_new = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    q_new = q + h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
    return x_new, q_new


def integrate(
    s0: PhasePoint,
    t_end: float,
    dt: float,
    max_energy_drift: float = DEFAULT_MAX_ENERGY_DRIFT,
    record_every: int = 1,
    lax_z: Optional[complex] = None,
) -> Trajectory:
    """
    Fixed-step RK4 integration from s0 up to t_end.

    The last step is shortened so the trajectory ends exactly at t_end.
    Relative energy drift |H(t) - H(0)| / max(1, |H(0)|) above
    ``max_energy_drift`` raises StabilityError. If ``lax_z`` is given, the
    Lax residual is recorded at every sample.
    """
    if not dt > 0 or not t_end > 0:
        raise DomainError(f"dt and t_end must be positive, got dt={dt}, t_end={t_end}")
    if record_every < 1:
        raise DomainError("record_every must be at least 1")
    data = s0.data
    h0 = hamiltonian(s0)
    scale = max(1.0, abs(h0))

    x = np.array(s0.x, dtype=complex)
    q = np.array(s0.q, dtype=complex)
    times, states, unwrapped = [0.0], [s0], [x.copy()]
    max_drift = 0.0
    max_lax = lax_residual(s0, lax_z) if lax_z is not None else None

    n_steps = int(np.ceil(t_end / dt - 1e-9))
    t = 0.0
    for step in range(1, n_steps + 1):
        h = min(dt, t_end - t)
        x, q = _rk4_step(x, q, h, data)
        t = t_end if step == n_steps else t + h
        _check_collisions(x, data, s0.collision_eps, time=t)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(q))):
            raise StabilityError(f"Non-finite state at t={t:.6g}", drift=np.inf, time=t)
        state = s0.with_arrays(x, q)
        drift = abs(hamiltonian(state) - h0) / scale
        max_drift = max(max_drift, drift)
        if drift > max_energy_drift:
            raise StabilityError(
                f"Energy drift {drift:.3e} exceeds {max_energy_drift:g} at t={t:.6g} (dt={dt:g})",
                drift=drift,
                time=t,
            )
        if step % record_every == 0 or step == n_steps:
            times.append(t)
            states.append(state)
            unwrapped.append(x.copy())
            if lax_z is not None:
                max_lax = max(max_lax, lax_residual(state, lax_z))

    logger.debug(f"Integrated N={s0.n} to t={t_end} with dt={dt}: max drift {max_drift:.3e}")
    return Trajectory(
        times=np.array(times),
        states=tuple(states),
        dt=dt,
        unwrapped=np.array(unwrapped),
        stats={"max_energy_drift": max_drift, "max_lax_residual": max_lax},
    )


def _off_diagonal(x: np.ndarray, z: complex, data: EllipticData, fn, bloch: bool) -> np.ndarray:
    n = len(x)
    out = np.zeros((n, n), dtype=complex)
    for i, j in itertools.permutations(range(n), 2):
        try:
            out[i, j] = fn(x[i] - x[j], z, data, bloch=bloch)
        except PoleError as e:
            raise PoleError(
                f"Lax entry ({i}, {j}) is singular at z={z}: {e}", nearest=e.nearest, entry=(i, j)
            ) from e
    return out


def m_matrix(x: np.ndarray, z: complex, data: EllipticData, gauge: bool = False) -> np.ndarray:
    """M(z) for positions x (which need not be reduced)."""
    n = len(x)
    M = -2.0 * _off_diagonal(x, z, data, kr_kernel_dx, not gauge)
    wp_z = wp(z, data)
    if n > 1:
        diff = x[:, None] - x[None, :]
        off = ~np.eye(n, dtype=bool)
        pair = np.zeros((n, n), dtype=complex)
        pair[off] = wp(diff[off], data)
        M[np.diag_indices(n)] = wp_z - 2.0 * pair.sum(axis=1)
    else:
        M[0, 0] = wp_z
    return M


def l_matrix(x: np.ndarray, q: np.ndarray, z: complex, data: EllipticData, gauge: bool = False) -> np.ndarray:
    """L(z) for positions x (which need not be reduced) and momenta q."""
    L = _off_diagonal(x, z, data, kr_kernel, not gauge)
    L[np.diag_indices(len(x))] = np.asarray(q) / 2
    return L


def lax_pair(s: PhasePoint, z: complex, gauge: bool = False) -> LaxMatrices:
    """
    L_ii = q_i / 2, L_ij = F(x_i - x_j, z);
    M_ii = wp(z) - 2 sum_{j != i} wp(x_i - x_j), M_ij = -2 F'(x_i - x_j, z).

    ``gauge=True`` drops the factor exp(zeta(z) x) from F, which conjugates
    L by a diagonal matrix and leaves its spectrum unchanged.
    """
    _check_collisions(s.x, s.data, s.collision_eps)
    L = l_matrix(s.x, s.q, z, s.data, gauge)
    M = m_matrix(s.x, z, s.data, gauge)
    return LaxMatrices(L=L, M=M, z=complex(z))


def lax_time_derivative(s: PhasePoint, z: complex, force_factor: float = FORCE_FACTOR) -> np.ndarray:
    """dL/dt by the chain rule: q_dot_i / 2 on the diagonal, (q_i - q_j) F' off it."""
    dq = forces(s.x, s.data, force_factor)
    dL = (s.q[:, None] - s.q[None, :]) * _off_diagonal(s.x, z, s.data, kr_kernel_dx, True)
    dL[np.diag_indices(s.n)] = dq / 2
    return dL


def lax_residual(
    s: PhasePoint,
    z: complex,
    order: str = "ML",
    force_factor: float = FORCE_FACTOR,
) -> float:
    """Frobenius norm of dL/dt - [M, L] (or - [L, M] with order="LM")."""
    if order not in ("ML", "LM"):
        raise DomainError(f"order must be 'ML' or 'LM', got {order!r}")
    lax = lax_pair(s, z)
    dL = lax_time_derivative(s, z, force_factor)
    commutator = lax.M @ lax.L - lax.L @ lax.M
    if order == "LM":
        commutator = -commutator
    return float(np.linalg.norm(dL - commutator))


@dataclass(frozen=True)
class LaxCalibration:
    residuals: Dict[Tuple[float, str], float]
    winner: Tuple[float, str]
    unique: bool

    @property
    def literal(self) -> bool:
        """True when the winner is the literal transcription (factor 4, dL/dt = [M, L])."""
        return self.unique and self.winner == (FORCE_FACTOR, "ML")


def calibrate_lax_convention(
    s: PhasePoint,
    zs: Iterable[complex],
    accept: float = 1e-8,
    reject: float = 1e-6,
) -> LaxCalibration:
    """
    Scan force factors {+-2, +-4} and both commutator orders; the winner is
    unique when it alone has residual below ``accept`` and every other
    variant stays above ``reject`` (residuals relative to max(1, |L|)).
    """
    if s.n < 2:
        raise DomainError("Calibration needs at least two particles")
    zs = list(zs)
    residuals = {}
    for factor in (2.0, -2.0, 4.0, -4.0):
        for order in ("LM", "ML"):
            worst = 0.0
            for z in zs:
                scale = max(1.0, float(np.linalg.norm(lax_pair(s, z).L)))
                worst = max(worst, lax_residual(s, z, order, factor) / scale)
            residuals[(factor, order)] = worst
    ranked = sorted(residuals, key=residuals.get)
    winner = ranked[0]
    unique = residuals[winner] < accept and all(residuals[v] > reject for v in ranked[1:])
    if not unique:
        logger.warning(f"Lax convention calibration is ambiguous: {residuals}")
    else:
        logger.info(f"Lax convention calibrated: factor {winner[0]:g}, order {winner[1]}")
    return LaxCalibration(residuals=residuals, winner=winner, unique=unique)


def center_of_mass(s: PhasePoint) -> Tuple[complex, complex]:
    """(sum x_i, sum q_i) of a phase point (positions as stored, i.e. reduced)."""
    return complex(np.sum(s.x)), complex(np.sum(s.q))


def trajectory_frame(traj: Trajectory, z: Optional[complex] = None) -> pd.DataFrame:
    """
    Table with columns t, re_x1, im_x1, ..., re_qN, im_qN, energy_drift,
    lax_residual; the Lax residual column is empty unless z is given.
    """
    n = traj.n
    h0 = hamiltonian(traj.states[0])
    scale = max(1.0, abs(h0))
    rows = []
    for t, s in zip(traj.times, traj.states):
        row = {"t": float(t)}
        for i in range(n):
            row[f"re_x{i + 1}"] = s.x[i].real
            row[f"im_x{i + 1}"] = s.x[i].imag
        for i in range(n):
            row[f"re_q{i + 1}"] = s.q[i].real
            row[f"im_q{i + 1}"] = s.q[i].imag
        row["energy_drift"] = abs(hamiltonian(s) - h0) / scale
        row["lax_residual"] = lax_residual(s, z) if z is not None else np.nan
        rows.append(row)
    return pd.DataFrame(rows)


def random_phase_point(
    n: int,
    data: EllipticData,
    rng: np.random.Generator,
    momentum_scale: float = 1.0,
    min_separation: float = 0.15,
    max_tries: int = 1000,
) -> PhasePoint:
    """Random well-separated configuration with complex momenta of the given scale."""
    if n < 1:
        raise DomainError(f"Need at least one particle, got n={n}")
    for _ in range(max_tries):
        s, t = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
        x = s + t * data.tau
        if n == 1 or _closest_pair(x, data)[0] > min_separation:
            q = momentum_scale * (rng.normal(size=n) + 1j * rng.normal(size=n))
            return PhasePoint(x, q, data)
    raise DomainError(f"Could not place {n} particles {min_separation} apart")


def cyclic_equilibrium(n: int, omega: complex, x0: complex = 0j) -> np.ndarray:
    """Positions x0 + j omega / n, j = 0..n-1; forces vanish for any lattice vector omega."""
    if n < 1:
        raise DomainError(f"Need at least one particle, got n={n}")
    return x0 + np.arange(n) * complex(omega) / n


def linear_growth_rate(n: int, omega: complex, data: EllipticData) -> float:
    """
    Largest exponential rate of the linearised flow at the cyclic equilibrium.

    The linearisation is circulant with eigenvalues
    kappa_k = 4 sum_m wp''(m omega / n) (1 - cos(2 pi k m / n)); the rate is
    max |Re sqrt(kappa_k)|.
    """
    if n < 2:
        return 0.0
    m = np.arange(1, n)
    p = np.asarray(wp(m * complex(omega) / n, data), dtype=complex)
    wpp = 6 * p**2 - data.g2 / 2
    k = np.arange(n)[:, None]
    kappa = 4 * np.sum(wpp * (1 - np.cos(2 * np.pi * k * m / n)), axis=1)
    return float(np.max(np.abs(np.sqrt(kappa).real)))


def near_equilibrium_point(
    n: int,
    data: EllipticData,
    rng: np.random.Generator,
    amplitude: float = 0.02,
    momentum: float = 0.3,
) -> PhasePoint:
    """
    Small random deviation from the least unstable cyclic equilibrium,
    moving with a common momentum of modulus ``momentum``.

    Fixed-step truncation error scales with the deviation.
    """
    omegas = (1.0, data.tau, 1.0 + data.tau, 1.0 - data.tau)
    omega = min(omegas, key=lambda w: linear_growth_rate(n, w, data))
    x0 = rng.uniform(0, 1) + rng.uniform(0, 1) * data.tau
    x = cyclic_equilibrium(n, omega, x0)
    x = x + amplitude * (rng.normal(size=n) + 1j * rng.normal(size=n))
    common = momentum * np.exp(2j * np.pi * rng.uniform())
    q = common + amplitude * (rng.normal(size=n) + 1j * rng.normal(size=n))
    logger.debug(f"Near-equilibrium N={n} state about omega={omega}")
    return PhasePoint(x, q, data)
