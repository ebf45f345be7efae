"""
Real-period differentials on the torus and the leaves of their foliation.

On E = C / (Z + tau Z) the second-kind differentials with a double pole at 0
are Psi = (s wp(z) + b) dz. Given the singular part s (1 or i), exactly one b
makes both periods -2 s eta1 + b and -2 s eta2 + b tau real.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .elliptic import (
    EllipticData,
    Segment,
    lattice_distance,
    period_paths,
    reduce_mod_lattice,
    segment_integral,
    wp,
    wp_prime,
    zeta,
)
from .errors import DomainError, SaddleEncounter, SearchError

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-9
POLE_GUARD = 1e-2
SADDLE_GUARD = 1e-3

_STARTS = (
    (0.21, 0.13), (0.37, 0.61), (0.68, 0.29), (0.83, 0.77),
    (0.12, 0.54), (0.55, 0.88), (0.91, 0.41), (0.46, 0.19),
)


@dataclass(frozen=True)
class TorusDifferential:
    """Psi = (scale * wp(z) + b) dz."""

    data: EllipticData
    b: complex
    scale: complex = 1.0

    def __call__(self, z):
        return self.scale * wp(z, self.data) + self.b

    def derivative(self, z):
        return self.scale * wp_prime(z, self.data)

    def primitive(self, z):
        """F(z) = -scale * zeta(z) + b z, evaluated on the unwrapped argument."""
        return -self.scale * zeta(z, self.data) + self.b * np.asarray(z, dtype=complex)

    @property
    def level(self) -> complex:
        """The value of wp at the zeros of Psi."""
        return -self.b / self.scale

    def periods(self) -> Tuple[complex, complex]:
        """Closed-form periods over [0, 1] and [0, tau]."""
        d = self.data
        return -2 * self.scale * d.eta1 + self.b, -2 * self.scale * d.eta2 + self.b * d.tau

    def integrated_periods(self, tol: float = 1e-12) -> Tuple[complex, complex]:
        paths = period_paths(self.data)
        return tuple(segment_integral(self, paths[name], tol=tol, data=self.data) for name in ("a", "b"))

    def reality_defect(self) -> float:
        return float(max(abs(p.imag) for p in self.periods()))


def real_period_constant(data: EllipticData, scale: complex) -> complex:
    v = (2 * scale * data.eta1).imag
    u = ((2 * scale * data.eta2).imag - v * data.tau.real) / data.tau.imag
    return complex(u, v)


def torus_real_basis(data: EllipticData) -> Tuple[TorusDifferential, TorusDifferential]:
    """Psi_1, Psi_2 with singular parts dz/z^2 and i dz/z^2 and all periods real."""
    psi1 = TorusDifferential(data, real_period_constant(data, 1.0), 1.0)
    psi2 = TorusDifferential(data, real_period_constant(data, 1j), 1j)
    return psi1, psi2


def holomorphic_combination(psi1: TorusDifferential, psi2: TorusDifferential) -> complex:
    """The constant c with Psi_1 + i Psi_2 = c dz."""
    if abs(psi1.scale + 1j * psi2.scale) > 1e-14:
        raise DomainError("Singular parts do not cancel in Psi_1 + i Psi_2")
    return complex(psi1.b + 1j * psi2.b)


def half_periods(data: EllipticData) -> Tuple[complex, complex, complex]:
    return 0.5, data.tau / 2, (1 + data.tau) / 2


@dataclass(frozen=True)
class TorusZeros:
    zeros: Tuple[complex, complex]
    residuals: Tuple[float, float]
    double: bool = False


def _newton_level(z: complex, level: complex, data: EllipticData, max_iter: int = 60) -> Optional[complex]:
    max_step = 0.25 * min(1.0, data.tau.imag)
    for _ in range(max_iter):
        if float(lattice_distance(z, data)) < 1e-6:
            return None
        f = complex(wp(z, data)) - level
        if abs(f) < 1e-13 * max(1.0, abs(level)):
            return z
        step = f / complex(wp_prime(z, data))
        if abs(step) > max_step:
            step *= max_step / abs(step)
        z -= step
    return None


def _same_point(a: complex, b: complex, data: EllipticData, eps: float = 1e-7) -> bool:
    return float(lattice_distance(a - b, data)) < eps


def torus_zeros(psi: TorusDifferential) -> TorusZeros:
    """The two zeros of Psi (solutions of wp(z) = -b / scale), reduced to the centred cell."""
    data = psi.data
    level = psi.level
    for omega in half_periods(data):
        if abs(complex(wp(omega, data)) - level) < 1e-8:
            logger.warning(f"Psi has a double zero at the half period {omega}")
            return TorusZeros((complex(omega), complex(omega)), (0.0, 0.0), double=True)

    starts = [u + v * data.tau for u, v in _STARTS]
    found = _search(starts, level, data)
    if not found:
        grid = np.linspace(0.05, 0.95, 7)
        found = _search([u + v * data.tau for u in grid for v in grid], level, data)
    if not found:
        raise SearchError(f"Newton failed to solve wp(z) = {level:.6g} from every start")

    z0 = complex(reduce_mod_lattice(found[0], data))
    z1 = complex(reduce_mod_lattice(-z0, data))
    zeros = tuple(sorted((z0, z1), key=lambda z: (round(z.real, 9), round(z.imag, 9))))
    residuals = tuple(float(abs(complex(wp(z, data)) - level)) for z in zeros)
    if max(residuals) >= ZERO_TOL * max(1.0, abs(level)):
        raise SearchError(f"Zero verification failed: residuals {residuals}")
    return TorusZeros(zeros, residuals)


def _search(starts: Sequence[complex], level: complex, data: EllipticData) -> List[complex]:
    found: List[complex] = []
    for z in starts:
        root = _newton_level(complex(z), level, data)
        if root is None:
            continue
        if not any(_same_point(root, r, data) or _same_point(root, -r, data) for r in found):
            found.append(root)
    return found


@dataclass(frozen=True)
class BaseCaseVerdict:
    passed: bool
    min_distance: float
    level_gap: float
    zeros1: Tuple[complex, complex]
    zeros2: Tuple[complex, complex]


def base_case_check(
    data: EllipticData,
    basis: Optional[Tuple[TorusDifferential, TorusDifferential]] = None,
    eps: float = 1e-6,
) -> BaseCaseVerdict:
    """Psi_1 and Psi_2 have no common zero on the torus."""
    psi1, psi2 = torus_real_basis(data) if basis is None else basis
    z1 = torus_zeros(psi1).zeros
    z2 = torus_zeros(psi2).zeros
    distance = min(float(lattice_distance(a - b, data)) for a in z1 for b in z2)
    gap = float(abs(psi1.level - psi2.level))
    verdict = BaseCaseVerdict(distance > eps and gap > eps, distance, gap, z1, z2)
    if not verdict.passed:
        logger.warning(f"Psi_1 and Psi_2 share a zero at tau={data.tau}: distance {distance:.2e}, level gap {gap:.2e}")
    return verdict


@dataclass(frozen=True, eq=False)
class LevelSetPolyline:
    c_value: float
    points: np.ndarray
    s: np.ndarray
    values: np.ndarray = field(repr=False)
    closed_through_pole: bool = False

    @property
    def drift(self) -> float:
        return float(np.max(np.abs(self.values.imag - self.c_value)))

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.values.real) > 0))

    @property
    def arc_defect(self) -> float:
        """max |Re F_1 gain - s|; the flow is parametrised so that dF_1/ds = 1."""
        return float(np.max(np.abs(self.values.real - self.values.real[0] - self.s)))


def _flow(psi: TorusDifferential, z: complex) -> complex:
    return 1.0 / complex(psi(z))


def _rk4(psi, z, ds):
    k1 = _flow(psi, z)
    k2 = _flow(psi, z + ds / 2 * k1)
    k3 = _flow(psi, z + ds / 2 * k2)
    k4 = _flow(psi, z + ds * k3)
    return z + ds / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _refine_zero(psi: TorusDifferential, z: complex) -> complex:
    root = _newton_level(z, psi.level, psi.data)
    return z if root is None else root


def trace_level_set(
    psi1: TorusDifferential,
    start: complex,
    arc_length: float,
    h: float = 1e-3,
    max_steps: int = 200000,
) -> LevelSetPolyline:
    """
    Follow the level set of Im F_1 through ``start`` in the direction of
    increasing Re F_1, by integrating dz/ds = 1 / psi_1(z) so that dF_1/ds = 1.

    The F_1 values of the polyline are accumulated chord by chord from
    quadratures of Psi_1, starting at the closed-form value at ``start``.
    Stops after ``arc_length`` of F_1, or inside the pole guard around the
    lattice (closed_through_pole). Approaching a zero of Psi_1 raises
    SaddleEncounter with the refined zero and the partial polyline.
    """
    if arc_length <= 0:
        raise DomainError("arc_length must be positive")
    data = psi1.data
    zeros = torus_zeros(psi1).zeros
    z = complex(start)
    if float(lattice_distance(z, data)) < POLE_GUARD:
        raise DomainError(f"start {z} lies inside the pole guard")
    if min(float(lattice_distance(z - w, data)) for w in zeros) < SADDLE_GUARD:
        raise DomainError(f"start {z} lies at a zero of Psi_1")

    f0 = complex(psi1.primitive(z))
    points, arcs = [z], [0.0]
    s = 0.0
    closed = False
    for _ in range(max_steps):
        if s >= arc_length:
            break
        pole_dist = float(lattice_distance(z, data))
        zero_dist = min(float(lattice_distance(z - w, data)) for w in zeros)
        if pole_dist < POLE_GUARD:
            closed = True
            break
        if zero_dist < SADDLE_GUARD:
            polyline = _polyline(psi1, f0, points, arcs, False)
            location = _refine_zero(psi1, z)
            raise SaddleEncounter(
                f"Level set reached a zero of Psi_1 near {location:.8g} after s={s:.6g}",
                location=location,
                polyline=polyline,
            )
        step_z = min(h, 0.25 * pole_dist, 0.25 * zero_dist)
        ds = min(step_z * abs(complex(psi1(z))), arc_length - s)
        z = _rk4(psi1, z, ds)
        s += ds
        points.append(z)
        arcs.append(s)
    else:
        logger.warning(f"Level set tracing stopped after {max_steps} steps at s={s:.6g}")

    polyline = _polyline(psi1, f0, points, arcs, closed)
    logger.debug(f"Traced {len(points)} samples, Im F drift {polyline.drift:.2e}")
    return polyline


def _accumulate(psi: TorusDifferential, f0: complex, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """F_1 at every vertex: f0 plus the quadrature of Psi_1 along each chord."""
    gains = [
        segment_integral(psi, Segment(a, b), tol=tol, data=psi.data)
        for a, b in zip(pts[:-1], pts[1:])
    ]
    return f0 + np.concatenate(([0j], np.cumsum(gains)))


def _polyline(psi, f0, points, arcs, closed) -> LevelSetPolyline:
    pts = np.array(points, dtype=complex)
    return LevelSetPolyline(
        c_value=float(f0.imag),
        points=pts,
        s=np.array(arcs),
        values=_accumulate(psi, f0, pts),
        closed_through_pole=closed,
    )


def critical_leaf_start(psi1: TorusDifferential, zero: complex, offset: float = 0.05, iterations: int = 20) -> complex:
    """
    A point on the level of Im F_1 through ``zero``, about ``offset`` away,
    from which the flow of increasing Re F_1 runs into the zero.
    """
    f_zero = complex(psi1.primitive(zero))
    curvature = complex(psi1.derivative(zero))
    direction = 1j * np.sqrt(1 / curvature)
    z = zero + offset * direction / abs(direction)
    for _ in range(iterations):
        correction = 1j * (complex(psi1.primitive(z)) - f_zero).imag / complex(psi1(z))
        z -= correction
        if abs(correction) < 1e-14:
            break
    return complex(z)


def level_set_frame(polyline: LevelSetPolyline) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "s": polyline.s,
            "re_z": polyline.points.real,
            "im_z": polyline.points.imag,
            "re_F1": polyline.values.real,
            "im_F1": polyline.values.imag,
        }
    )
