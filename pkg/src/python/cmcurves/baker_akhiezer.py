"""
Baker-Akhiezer function of the elliptic Calogero-Moser flow.

psi(x, t) = sum_i c_i(t) F(x - x_i(t), z) exp(k x + k^2 t), with
(L(t, z) + k) C = 0 and dC/dt = M(t, z) C. It solves
(d/dt - d^2/dx^2 + u) psi = 0 for u = 2 sum_i wp(x - x_i(t)).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .dynamics import Trajectory, forces, l_matrix, m_matrix
from .elliptic import EllipticData, kr_kernel, lattice_distance, wp
from .errors import BranchCrossingError, DomainError, GridError

logger = logging.getLogger(__name__)

EIGEN_GAP = 1e-6
POLE_CLEARANCE = 1e-2


def _augmented_rhs(x, q, c, z, data):
    return q, forces(x, data), m_matrix(x, z, data) @ c


def _augmented_step(x, q, c, h, z, data):
    k1 = _augmented_rhs(x, q, c, z, data)
    k2 = _augmented_rhs(x + h / 2 * k1[0], q + h / 2 * k1[1], c + h / 2 * k1[2], z, data)
    k3 = _augmented_rhs(x + h / 2 * k2[0], q + h / 2 * k2[1], c + h / 2 * k2[2], z, data)
    k4 = _augmented_rhs(x + h * k3[0], q + h * k3[1], c + h * k3[2], z, data)
    return tuple(
        y + h / 6 * (a + 2 * b + 2 * c_ + d)
        for y, a, b, c_, d in zip((x, q, c), k1, k2, k3, k4)
    )


def _eigen_gap(eigenvalues: np.ndarray, idx: int) -> float:
    others = np.delete(eigenvalues, idx)
    return float(np.min(np.abs(others - eigenvalues[idx]))) if len(others) else np.inf


def _null_direction(matrix: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(matrix)
    return vh[-1].conj()


@dataclass(frozen=True, eq=False)
class BAFunction:
    """
    Evaluator psi(x, t) sampled along a trajectory.

    States between samples are produced by one Runge-Kutta step from the
    preceding sample, so psi is available at any t in [0, times[-1]].
    """

    data: EllipticData
    z: complex
    k: complex
    times: np.ndarray
    positions: np.ndarray
    momenta: np.ndarray
    coeffs: np.ndarray
    eigen_residuals: np.ndarray

    @property
    def max_eigen_residual(self) -> float:
        return float(np.max(self.eigen_residuals))

    def state_at(self, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unwrapped positions, momenta and coefficients C at time t."""
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise DomainError(f"t={t} outside the sampled interval [{self.times[0]}, {self.times[-1]}]")
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1))
        h = t - self.times[i]
        x, q, c = self.positions[i], self.momenta[i], self.coeffs[i]
        if abs(h) < 1e-15:
            return x, q, c
        return _augmented_step(x, q, c, h, self.z, self.data)

    def __call__(self, x, t: float):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=complex)
        xi, _, c = self.state_at(t)
        value = np.zeros(x.shape, dtype=complex)
        for ci, xj in zip(c, xi):
            value = value + ci * kr_kernel(x - xj, self.z, self.data)
        value = value * np.exp(self.k * x + self.k**2 * t)
        return complex(value) if scalar else value

    def potential(self, x, t: float):
        """u(x, t) = 2 sum_i wp(x - x_i(t))."""
        x = np.asarray(x, dtype=complex)
        xi, _, _ = self.state_at(t)
        return 2.0 * sum(wp(x - xj, self.data) for xj in xi)

    def bloch_factors(self, x, t: float) -> np.ndarray:
        """psi(x + 1, t) / psi(x, t) at each x."""
        x = np.asarray(x, dtype=complex)
        return self(x + 1.0, t) / self(x, t)


def ba_solution(traj: Trajectory, z: complex, branch: int = 0) -> BAFunction:
    """
    Build psi along ``traj`` for the eigenvalue of L(0, z) with index
    ``branch`` (eigenvalues sorted by real then imaginary part).

    The flow and C are advanced together with the trajectory's step size;
    after each step C is projected onto the null direction of L + k.
    """
    data = traj.data
    n = traj.n
    x = np.array(traj.unwrapped[0], dtype=complex)
    q = np.array(traj.states[0].q, dtype=complex)

    eig = np.linalg.eigvals(l_matrix(x, q, z, data))
    order = np.lexsort((eig.imag, eig.real))
    eig = eig[order]
    if not 0 <= branch < n:
        raise DomainError(f"branch must be in [0, {n}), got {branch}")
    if _eigen_gap(eig, branch) < EIGEN_GAP:
        raise BranchCrossingError(f"Eigenvalue {branch} of L is not simple at t=0", time=0.0)
    lam = eig[branch]
    k = -lam

    c = _null_direction(l_matrix(x, q, z, data) + k * np.eye(n))
    lead = np.flatnonzero(np.abs(c) > 1e-12 * np.max(np.abs(c)))[0]
    c = c / c[lead]

    t_end = float(traj.times[-1])
    dt = traj.dt
    n_steps = int(np.ceil(t_end / dt - 1e-9))
    times, xs, qs, cs, residuals = [0.0], [x], [q], [c], []
    L = l_matrix(x, q, z, data)
    residuals.append(np.linalg.norm((L + k * np.eye(n)) @ c) / np.linalg.norm(c))
    t = 0.0
    for step in range(1, n_steps + 1):
        h = min(dt, t_end - t)
        x, q, c = _augmented_step(x, q, c, h, z, data)
        t = t_end if step == n_steps else t + h
        L = l_matrix(x, q, z, data)
        eig = np.linalg.eigvals(L)
        idx = int(np.argmin(np.abs(eig - lam)))
        if _eigen_gap(eig, idx) < EIGEN_GAP:
            raise BranchCrossingError(f"Eigenvalues of L collide at t={t:.6g}", time=t)
        lam_t = eig[idx]
        v = _null_direction(L - lam_t * np.eye(n))
        c = v * (v.conj() @ c)
        residuals.append(np.linalg.norm((L + k * np.eye(n)) @ c) / np.linalg.norm(c))
        times.append(t)
        xs.append(x)
        qs.append(q)
        cs.append(c)

    logger.debug(f"Baker-Akhiezer function built over {len(times)} samples, k={k:.6g}")
    return BAFunction(
        data=data,
        z=complex(z),
        k=complex(k),
        times=np.array(times),
        positions=np.array(xs),
        momenta=np.array(qs),
        coeffs=np.array(cs),
        eigen_residuals=np.array(residuals),
    )


@dataclass(frozen=True)
class GridSpec:
    """Rectangular x-t grid: x = x_center + [-x_half_width, x_half_width] (real direction)."""

    x_center: complex
    x_half_width: float
    t_start: float
    t_end: float
    nx: int = 50
    nt: int = 50

    def __post_init__(self):
        if self.nx < 3 or self.nt < 3:
            raise DomainError("Grid needs at least 3 points per axis")
        if not self.x_half_width > 0 or not self.t_end > self.t_start:
            raise DomainError("Grid extents must be positive")

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        xs = self.x_center + np.linspace(-self.x_half_width, self.x_half_width, self.nx)
        ts = np.linspace(self.t_start, self.t_end, self.nt)
        return xs, ts

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(
            self.x_center, self.x_half_width, self.t_start, self.t_end,
            self.nx * factor, self.nt * factor,
        )


def pde_residual(
    psi: Callable[[np.ndarray, float], np.ndarray],
    potential: Callable[[np.ndarray, float], np.ndarray],
    grid: GridSpec,
) -> float:
    """
    max |(d/dt - d^2/dx^2 + u) psi| / max |psi| over the interior grid,
    by central differences.
    """
    xs, ts = grid.axes()
    hx = (xs[1] - xs[0]).real
    ht = ts[1] - ts[0]
    values = np.array([psi(xs, t) for t in ts])
    u = np.array([potential(xs[1:-1], t) for t in ts[1:-1]])
    dt_psi = (values[2:, 1:-1] - values[:-2, 1:-1]) / (2 * ht)
    dxx_psi = (values[1:-1, 2:] - 2 * values[1:-1, 1:-1] + values[1:-1, :-2]) / hx**2
    residual = dt_psi - dxx_psi + u * values[1:-1, 1:-1]
    return float(np.max(np.abs(residual)) / np.max(np.abs(values)))


def ba_pde_residual(psi: BAFunction, traj: Trajectory, grid: GridSpec) -> float:
    """PDE residual of psi with u = 2 sum wp(x - x_i(t)) taken from the trajectory flow."""
    xs, ts = grid.axes()
    if ts[0] < traj.times[0] - 1e-12 or ts[-1] > traj.times[-1] + 1e-12:
        raise GridError(f"Grid times [{ts[0]}, {ts[-1]}] leave the trajectory interval")
    for t in ts:
        xi, _, _ = psi.state_at(t)
        dist = lattice_distance(xs[:, None] - xi[None, :], psi.data)
        if np.min(dist) < POLE_CLEARANCE:
            raise GridError(
                f"Grid passes within {np.min(dist):.2e} of a particle at t={t:.6g}"
            )
    residual = pde_residual(psi, psi.potential, grid)
    logger.debug(f"BA PDE residual {residual:.3e} on {grid.nx}x{grid.nt} grid")
    return residual


def free_wave(k: complex) -> Callable[[np.ndarray, float], np.ndarray]:
    """exp(k x + k^2 t), the exact solution of the equation with u = 0."""

    def psi(x, t):
        return np.exp(k * np.asarray(x, dtype=complex) + k**2 * t)

    return psi


def zero_potential(x, t: float) -> np.ndarray:
    return np.zeros(np.shape(x), dtype=complex)


def resolved_grid(
    psi: BAFunction,
    x_center: complex,
    t_start: float = 0.0,
    nx: int = 50,
    nt: int = 50,
    target: float = 2e-5,
    step: float = 1e-3,
) -> GridSpec:
    """
    Grid whose central-difference truncation stays near ``target`` relative
    to |psi(x_center, t_start)|.

    Finite differences with spacing ``step`` estimate psi_xxxx and psi_ttt at
    the grid origin; the spacings then solve hx^2 |psi_xxxx| / 12 = target |psi|
    and ht^2 |psi_ttt| / 6 = target |psi|. The time span is capped at the end
    of the sampled interval.
    """
    t_room = float(psi.times[-1]) - t_start
    if not t_room > 0:
        raise GridError(f"No sampled time after t={t_start}")
    xs = x_center + step * np.arange(-2, 3)
    row = psi(xs, t_start)
    scale = abs(row[2])
    if scale == 0:
        raise GridError(f"psi vanishes at ({x_center}, {t_start})")
    d4x = abs(row[0] - 4 * row[1] + 6 * row[2] - 4 * row[3] + row[4]) / step**4
    dt = min(step, t_room / 3)
    col = [psi(x_center, t_start + m * dt) for m in range(4)]
    d3t = abs(col[3] - 3 * col[2] + 3 * col[1] - col[0]) / dt**3
    hx = (12 * target * scale / max(d4x, scale)) ** 0.5
    ht = (6 * target * scale / max(d3t, scale)) ** 0.5
    t_end = t_start + min(ht * (nt - 1), t_room)
    logger.debug(f"Resolved BA grid: hx={hx:.3g}, ht={ht:.3g}, t_end={t_end:.3g}")
    return GridSpec(x_center, hx * (nx - 1) / 2, t_start, t_end, nx, nt)
