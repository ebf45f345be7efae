"""
Periods of the integral differentials on a spectral curve.

Phi_1 = (dk - (wp - c1) dz) / 2 pi i and Phi_2 = tau (dk - (wp - c2) dz) / 2 pi i
have integer periods. Along a closed lifted cycle k returns to its starting
value, so only the base integral of (wp - c) dz contributes.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Union

import numpy as np

from .elliptic import Segment, c_constants, segment_integral, wp
from .errors import BranchPointError, ConsistencyError, DomainError, UnsupportedCurveError
from .monodromy import ClosedCycle, LiftedLoop, close_loop, cycle_intersection_matrix, sheet_track
from .spectral import CurveSpec

logger = logging.getLogger(__name__)

INTEGER_TOL = 1e-6
DEGREE_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class DifferentialOnCurve:
    curve: CurveSpec
    which: str = "phi1"

    def __post_init__(self):
        if self.which not in ("phi1", "phi2"):
            raise DomainError(f"which must be 'phi1' or 'phi2', got {self.which!r}")

    @property
    def c(self) -> complex:
        c1, c2 = c_constants(self.curve.data)
        return c1 if self.which == "phi1" else c2

    @property
    def prefactor(self) -> complex:
        return 1.0 if self.which == "phi1" else self.curve.data.tau


@dataclass(frozen=True)
class PeriodResult:
    loop: LiftedLoop
    differential: str
    period: complex
    repetitions: int
    delta_k: complex

    @property
    def nearest(self) -> int:
        return int(round(self.period.real))

    @property
    def deviation(self) -> float:
        return float(abs(self.period - self.nearest))

    @property
    def is_integer(self) -> bool:
        return self.deviation < INTEGER_TOL


def _polyline_integral(f, vertices: np.ndarray, data, tol: float) -> complex:
    total = 0j
    for a, b in zip(vertices[:-1], vertices[1:]):
        if a == b:
            continue
        total += segment_integral(f, Segment(complex(a), complex(b)), tol=tol, data=data)
    return total


def base_integral(diff: DifferentialOnCurve, loop: LiftedLoop, tol: float = 1e-12) -> complex:
    """Integral of (wp - c) dz along one traversal of the loop's z-path."""
    data = diff.curve.data
    c = diff.c
    return _polyline_integral(lambda z: wp(z, data) - c, loop.vertices(data.tau), data, tol)


def phi_period(
    diff: DifferentialOnCurve,
    loop: Union[LiftedLoop, ClosedCycle],
    tol: float = 1e-12,
) -> PeriodResult:
    """
    Period of Phi_1 or Phi_2 over the closure of ``loop``.

    The loop is repeated from the arrival sheet until the starting sheet
    returns; Delta k is accumulated from the tracked sheet and is zero up to
    continuation error.
    """
    cycle = loop if isinstance(loop, ClosedCycle) else close_loop(diff.curve, loop)
    base = base_integral(diff, cycle.loop, tol)
    delta_k = sum(complex(k[-1] - k[0]) for _, k in cycle.pieces)
    period = diff.prefactor / (2j * np.pi) * (delta_k - cycle.repetitions * base)
    result = PeriodResult(
        loop=cycle.loop,
        differential=diff.which,
        period=complex(period),
        repetitions=cycle.repetitions,
        delta_k=delta_k,
    )
    logger.debug(
        f"{diff.which} period over ({cycle.loop.a}, {cycle.loop.b}) x{cycle.repetitions}: "
        f"{result.period:.12g} (deviation {result.deviation:.2e})"
    )
    return result


def _trivial_loops(curve: CurveSpec, a: int, b: int, offsets: Sequence[float], fixed: float, steps: int):
    """Lifts of (a, b) at the given offsets whose monodromy is the identity."""
    tau = curve.data.tau
    for offset in offsets:
        base = offset * tau + fixed if a else offset + fixed * tau
        loop = LiftedLoop(a, b, base, steps=steps)
        try:
            track = sheet_track(curve, loop)
        except BranchPointError:
            continue
        if np.array_equal(track.permutation, np.arange(curve.n)):
            return loop
    return None


def homology_basis(curve: CurveSpec, steps: int = 200) -> List[ClosedCycle]:
    """
    Four closed cycles spanning the first homology of a smooth two-sheeted curve:
    a horizontal and a vertical base loop with trivial monodromy, each lifted to
    both sheets.
    """
    if curve.n != 2:
        raise UnsupportedCurveError(f"Homology basis construction needs N = 2, got {curve.n}")
    offsets = np.linspace(0.05, 0.95, 37)
    horizontal = _trivial_loops(curve, 1, 0, offsets, 0.037, steps)
    vertical = _trivial_loops(curve, 0, 1, offsets, 0.043, steps)
    if horizontal is None or vertical is None:
        raise UnsupportedCurveError("No base loop with trivial monodromy found; branch points share a height")
    cycles = []
    for loop in (horizontal, vertical):
        for sheet in range(curve.n):
            cycles.append(close_loop(curve, LiftedLoop(loop.a, loop.b, loop.basepoint, sheet, steps)))
    return cycles


@dataclass(frozen=True, eq=False)
class DegreePairing:
    pairing: complex
    intersections: np.ndarray
    phi1_periods: np.ndarray
    phi2_periods: np.ndarray


def degree_pairing(curve: CurveSpec, steps: int = 200, tol: float = 1e-12) -> DegreePairing:
    """
    sum_k (Phi_2(a_k) Phi_1(b_k) - Phi_2(b_k) Phi_1(a_k)) over a homology
    basis, written basis-independently as -alpha^T J^{-1} beta with J the
    intersection matrix.
    """
    cycles = homology_basis(curve, steps)
    J = cycle_intersection_matrix(cycles, curve.data.tau)
    if round(abs(np.linalg.det(J))) != 1:
        raise UnsupportedCurveError(f"Constructed cycles are not a unimodular basis (det J = {np.linalg.det(J):g})")
    phi1 = DifferentialOnCurve(curve, "phi1")
    phi2 = DifferentialOnCurve(curve, "phi2")
    beta = np.array([phi_period(phi1, c, tol).period for c in cycles])
    alpha = np.array([phi_period(phi2, c, tol).period for c in cycles])
    pairing = -alpha @ np.linalg.solve(J.astype(float), beta)
    return DegreePairing(complex(pairing), J, beta, alpha)


def degree_check(curve: CurveSpec, steps: int = 200) -> int:
    """
    Degree of the cover z: curve -> E.

    The sheet count is compared with the period pairing for N = 2; for other N
    only the sheet count is available.
    """
    if curve.n > 3:
        raise UnsupportedCurveError(f"degree_check supports N <= 3, got {curve.n}")
    sheets = len(curve.roots(0.31 + 0.27 * curve.data.tau))
    if curve.n != 2:
        return sheets
    pairing = degree_pairing(curve, steps).pairing
    value = abs(pairing)
    if abs(value - round(value)) > DEGREE_TOL or int(round(value)) != sheets:
        raise ConsistencyError(f"Period pairing {pairing:.8g} disagrees with sheet count {sheets}")
    logger.info(f"Degree {sheets} confirmed by period pairing {pairing:.10g}")
    return sheets


def period_payload(result: PeriodResult) -> Dict:
    return {
        "loop": {"a": result.loop.a, "b": result.loop.b, "sheet": result.loop.sheet},
        "differential": result.differential,
        "period": result.period,
        "nearest_int": result.nearest,
        "deviation": result.deviation,
    }
