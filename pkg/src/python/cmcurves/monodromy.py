"""
Continuation of the roots of R(k, z) = 0 along closed paths on the torus.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import BranchPointError, DomainError, InconsistencyError, TrackingError
from .polyroots import match_order, min_root_gap
from .spectral import CurveSpec

logger = logging.getLogger(__name__)

GAP_EPS = 1e-6
MAX_HALVINGS = 12


def sorted_roots(curve: CurveSpec, z: complex) -> np.ndarray:
    """Roots of R(., z) in the canonical sheet order (real part, then imaginary part)."""
    k = curve.roots(z)
    return k[np.lexsort((k.imag, k.real))]


@dataclass(frozen=True)
class LiftedLoop:
    """
    Closed path on the torus: an optional circular detour around ``detour_center``
    followed by the word a [0, 1] + b [0, tau], all starting at ``basepoint``.

    Args:
        a, b: integer winding numbers of the base word
        basepoint: start point z*, away from branch points
        sheet: index of the starting root in the canonical order at z*
        steps: continuation samples per unit of path length
        detour_center, detour_radius: circle traversed counter-clockwise before the word
        reverse: traverse the whole path backwards, starting from the lattice
            translate of z* where the forward path ends
    """

    a: int
    b: int
    basepoint: complex
    sheet: int = 0
    steps: int = 200
    detour_center: Optional[complex] = None
    detour_radius: float = 0.0
    reverse: bool = False

    def __post_init__(self):
        if self.steps < 4:
            raise DomainError("steps must be at least 4")
        if self.detour_center is not None and not self.detour_radius > 0:
            raise DomainError("A detour needs a positive radius")

    def vertices(self, tau: complex) -> np.ndarray:
        z0 = complex(self.basepoint)
        pts = [z0]
        if self.detour_center is not None:
            c, r = complex(self.detour_center), self.detour_radius
            start_angle = np.angle(z0 - c)
            count = max(16, int(math.ceil(2 * np.pi * r * self.steps)))
            angles = start_angle + 2 * np.pi * np.arange(count + 1) / count
            circle = c + r * np.exp(1j * angles)
            pts.extend(circle.tolist())
            pts.append(z0)
        if self.a:
            pts.append(pts[-1] + self.a)
        if self.b:
            pts.append(pts[-1] + self.b * tau)
        pts = np.array(pts, dtype=complex)
        if self.reverse:
            pts = (pts - (pts[-1] - pts[0]))[::-1]
        return pts

    def reversed(self, sheet: Optional[int] = None) -> "LiftedLoop":
        """The inverse path, starting on ``sheet`` (default: the same sheet index)."""
        return replace(self, reverse=not self.reverse, sheet=self.sheet if sheet is None else sheet)


@dataclass(frozen=True, eq=False)
class TrackResult:
    """
    Outcome of continuing every root along a path.

    ``permutation[i]`` is the canonical sheet reached from sheet i; ``path_z``
    and ``path_k`` hold the samples of the tracked starting sheet.
    """

    sheet: int
    k_end: complex
    permutation: np.ndarray
    path_z: np.ndarray
    path_k: np.ndarray
    halvings: int = 0


def _continue_segment(curve, z_from, z_to, roots, depth, stats):
    """Advance all roots from z_from to z_to, halving the step on ambiguity."""
    try:
        new = curve.roots(z_to, initial=roots)
        order, _ = match_order(roots, new)
        new = new[order]
        if min_root_gap(new) < GAP_EPS:
            raise TrackingError(f"root gap collapsed at z={z_to}")
        return [(z_to, new)]
    except TrackingError as e:
        if depth >= MAX_HALVINGS:
            raise BranchPointError(
                f"Continuation stalled near z={z_to} after {depth} halvings: {e}",
                location=complex(z_to),
            ) from e
        stats["halvings"] += 1
        mid = (z_from + z_to) / 2
        first = _continue_segment(curve, z_from, mid, roots, depth + 1, stats)
        second = _continue_segment(curve, mid, z_to, first[-1][1], depth + 1, stats)
        return first + second


def sheet_track(curve: CurveSpec, loop) -> TrackResult:
    """
    Continue the roots of R(k, z) = 0 along ``loop`` and report where the
    starting sheet arrives.
    """
    tau = curve.data.tau
    verts = loop.vertices(tau)
    start = sorted_roots(curve, verts[0])
    if min_root_gap(start) < GAP_EPS:
        raise BranchPointError(f"Basepoint {verts[0]} is a branch point", location=complex(verts[0]))
    if not 0 <= loop.sheet < curve.n:
        raise DomainError(f"sheet must be in [0, {curve.n}), got {loop.sheet}")

    stats = {"halvings": 0}
    roots = start
    zs, ks = [verts[0]], [start]
    for z_a, z_b in zip(verts[:-1], verts[1:]):
        count = max(2, int(math.ceil(abs(z_b - z_a) * loop.steps)))
        for z_next in z_a + (z_b - z_a) * np.arange(1, count + 1) / count:
            for z_s, r_s in _continue_segment(curve, zs[-1], z_next, roots, 0, stats):
                zs.append(z_s)
                ks.append(r_s)
            roots = ks[-1]

    # roots at the end point coincide with those at z* as a set
    end_order, _ = match_order(roots, start, ambiguity=0.25)
    permutation = np.asarray(end_order)
    path_k = np.array([k[loop.sheet] for k in ks])
    if stats["halvings"]:
        logger.debug(f"Sheet tracking used {stats['halvings']} step halvings")
    return TrackResult(
        sheet=int(permutation[loop.sheet]),
        k_end=complex(roots[loop.sheet]),
        permutation=permutation,
        path_z=np.array(zs),
        path_k=path_k,
        halvings=stats["halvings"],
    )


@dataclass(frozen=True, eq=False)
class ClosedCycle:
    """A lifted loop repeated until it closes on the curve; one piece per repetition."""

    loop: LiftedLoop
    repetitions: int
    pieces: Tuple[Tuple[np.ndarray, np.ndarray], ...] = field(default=())

    @property
    def path_z(self) -> np.ndarray:
        return np.concatenate([p[0] for p in self.pieces])


def close_loop(curve: CurveSpec, loop: LiftedLoop) -> ClosedCycle:
    """Repeat ``loop`` from successive arrival sheets until the start sheet returns."""
    sheet = loop.sheet
    pieces = []
    for rep in range(1, curve.n + 1):
        result = sheet_track(curve, replace(loop, sheet=sheet))
        pieces.append((result.path_z, result.path_k))
        sheet = result.sheet
        if sheet == loop.sheet:
            if rep > 1:
                logger.warning(f"Loop ({loop.a}, {loop.b}) needed {rep} repetitions to close")
            return ClosedCycle(loop=loop, repetitions=rep, pieces=tuple(pieces))
    raise InconsistencyError(
        f"Loop ({loop.a}, {loop.b}) from sheet {loop.sheet} did not close within {curve.n} repetitions"
    )


def permutation_orbit(generators: Sequence[Sequence[int]], start: int = 0) -> List[int]:
    """Orbit of ``start`` under the group generated by the given permutations."""
    seen, frontier = {start}, [start]
    while frontier:
        i = frontier.pop()
        for perm in generators:
            j = int(perm[i])
            if j not in seen:
                seen.add(j)
                frontier.append(j)
    return sorted(seen)


def _shift_range(lo: float, hi: float, period: float) -> range:
    return range(int(math.floor(lo / period)) - 1, int(math.ceil(hi / period)) + 2)


def _segment_crossings(za, ka, zb, kb, tau, k_tol):
    """Signed crossings of two polylines on the curve, counting lattice translates of the second."""
    total = 0
    a0, a1 = za[:-1], za[1:]
    da = a1 - a0
    span = np.concatenate([za, zb])
    n_range = _shift_range(span.imag.min() - zb.imag.max(), span.imag.max() - zb.imag.min(), tau.imag)
    for n in n_range:
        shifted_n = zb + n * tau
        m_range = _shift_range(za.real.min() - shifted_n.real.max() - 1, za.real.max() - shifted_n.real.min() + 1, 1.0)
        for m in m_range:
            b = shifted_n + m
            b0, b1 = b[:-1], b[1:]
            db = b1 - b0
            cross = (np.conj(da)[:, None] * db[None, :]).imag
            valid = np.abs(cross) > 1e-300
            safe = np.where(valid, cross, 1.0)
            w = b0[None, :] - a0[:, None]
            s = (np.conj(w) * db[None, :]).imag / safe
            t = (np.conj(w) * da[:, None]).imag / safe
            hit = valid & (s >= 0) & (s < 1) & (t >= 0) & (t < 1)
            if not np.any(hit):
                continue
            ia, ib = np.nonzero(hit)
            k_at_a = ka[ia] + s[ia, ib] * (ka[ia + 1] - ka[ia])
            k_at_b = kb[ib] + t[ia, ib] * (kb[ib + 1] - kb[ib])
            same = np.abs(k_at_a - k_at_b) < k_tol * (1 + np.abs(k_at_a))
            total += int(np.sum(np.sign(cross[ia, ib][same])))
    return total


def cycle_intersection_matrix(cycles: Sequence[ClosedCycle], tau: complex, k_tol: float = 1e-3) -> np.ndarray:
    """
    Oriented intersection numbers of closed lifted cycles: crossings of
    their z-projections (modulo the lattice) at which both cycles sit on the
    same sheet, counted +1 when (dz_a, dz_b) is positively oriented.
    """
    m = len(cycles)
    J = np.zeros((m, m), dtype=int)
    for i in range(m):
        for j in range(i + 1, m):
            count = 0
            for za, ka in cycles[i].pieces:
                for zb, kb in cycles[j].pieces:
                    count += _segment_crossings(za, ka, zb, kb, tau, k_tol)
            J[i, j] = count
            J[j, i] = -count
    return J
