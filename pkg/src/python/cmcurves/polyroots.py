"""
Roots of small complex polynomials.

Simultaneous Aberth-Ehrlich iteration with Newton polishing, warm-startable so
that continuation code can reuse the previous roots as the initial guess.
Coefficients are ordered highest degree first, as in ``numpy.polyval``.
"""

import itertools
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, TrackingError

logger = logging.getLogger(__name__)


def _initial_guess(coeffs: np.ndarray) -> np.ndarray:
    degree = len(coeffs) - 1
    # Cauchy bound on the root moduli
    radius = 1.0 + np.max(np.abs(coeffs[1:] / coeffs[0]))
    centre = -coeffs[1] / (degree * coeffs[0])
    angles = 2 * np.pi * np.arange(degree) / degree + 0.4
    return centre + 0.5 * radius * np.exp(1j * angles)


def aberth_roots(
    coeffs: Sequence[complex],
    initial: Optional[Sequence[complex]] = None,
    tol: float = 1e-14,
    max_iter: int = 500,
    polish: int = 2,
) -> np.ndarray:
    """
    All roots of the polynomial with the given coefficients.

    Falls back to companion-matrix eigenvalues if the iteration stalls.
    """
    c = np.asarray(coeffs, dtype=complex)
    nz = np.flatnonzero(c != 0)
    if len(nz) == 0:
        raise DomainError("Zero polynomial has no well-defined roots")
    c = c[nz[0]:]
    degree = len(c) - 1
    if degree == 0:
        return np.zeros(0, dtype=complex)
    if degree == 1:
        return np.array([-c[1] / c[0]])

    dc = np.polyder(c)
    z = _initial_guess(c) if initial is None else np.array(initial, dtype=complex)
    if z.shape != (degree,):
        raise DomainError(f"Expected {degree} initial roots, got {z.shape}")
    # coincident starts would make the Aberth correction singular
    z = z + 1e-12 * np.exp(1j * np.arange(degree)) * (1 + np.abs(z))

    converged = False
    for iteration in range(max_iter):
        p = np.polyval(c, z)
        dp = np.polyval(dc, z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            step = ratio / (1.0 - ratio * inv.sum(axis=1))
        step = np.where(np.isfinite(step), step, 0.0)
        z = z - step
        if np.all(np.abs(step) <= tol * np.maximum(1.0, np.abs(z))):
            converged = True
            break

    if not converged:
        logger.warning(f"Aberth iteration did not converge in {max_iter} steps; using companion matrix")
        z = np.roots(c)

    for _ in range(polish):
        dp = np.polyval(dc, z)
        safe = np.abs(dp) > 0
        z = np.where(safe, z - np.polyval(c, z) / np.where(safe, dp, 1.0), z)
    logger.debug(f"Aberth converged={converged} after {iteration + 1} iterations (degree {degree})")
    return z


def min_root_gap(roots: Sequence[complex]) -> float:
    """Smallest pairwise distance between roots (inf for fewer than two)."""
    r = np.asarray(roots, dtype=complex)
    if len(r) < 2:
        return float("inf")
    d = np.abs(r[:, None] - r[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def match_roots(
    previous: Sequence[complex],
    current: Sequence[complex],
    ambiguity: float = 0.5,
) -> Tuple[np.ndarray, float]:
    """
    Reorder ``current`` so that entry i continues ``previous[i]``.

    Returns the reordered roots and the ambiguity ratio (see match_order).
    """
    order, ratio = match_order(previous, current, ambiguity)
    return np.asarray(current, dtype=complex)[order], ratio


def match_order(
    previous: Sequence[complex],
    current: Sequence[complex],
    ambiguity: float = 0.5,
) -> Tuple[np.ndarray, float]:
    """
    Permutation p such that current[p[i]] continues previous[i].

    Uses the assignment of least total displacement. The ratio between the
    largest matched displacement and the smallest gap of ``current`` must
    stay below ``ambiguity``, else TrackingError.
    """
    prev = np.asarray(previous, dtype=complex)
    cur = np.asarray(current, dtype=complex)
    if prev.shape != cur.shape:
        raise DomainError("Root sets differ in size")
    n = len(cur)
    if n == 0:
        return np.zeros(0, dtype=int), 0.0
    cost = np.abs(prev[:, None] - cur[None, :])
    if n <= 7:
        best = min(itertools.permutations(range(n)), key=lambda p: cost[np.arange(n), p].sum())
        order = np.array(best)
    else:
        order = np.argmin(cost, axis=1)
        if len(set(order.tolist())) != n:
            raise TrackingError("Greedy root matching is not a bijection")
    moved = float(cost[np.arange(n), order].max())
    gap = min_root_gap(cur)
    ratio = moved / gap if np.isfinite(gap) else 0.0
    if ratio > ambiguity:
        raise TrackingError(
            f"Ambiguous root matching: displacement {moved:.3e} vs root gap {gap:.3e}"
        )
    return order, ratio
