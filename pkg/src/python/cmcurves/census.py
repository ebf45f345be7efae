"""
Singular points of spectral curves and the cusp/node bound 2 n + k < N.

Candidates are the zeros of the k-discriminant D(z) = Res_k(R, dR/dk),
isolated by argument-principle counts on a quadtree of cells covering one
period parallelogram, then refined by Newton iteration.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .elliptic import lattice_distance, reduce_mod_lattice
from .errors import DomainError, SearchError
from .spectral import CurveSpec, curve_from_H, fit_H

logger = logging.getLogger(__name__)

EPS_SING = 1e-8
CUBIC_EPS = 1e-6
MAX_CENSUS_DEGREE = 5


def sylvester_resultant(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Resultant of two stacks of polynomials (coefficients highest first) via the Sylvester determinant."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    n, m = p.shape[-1] - 1, q.shape[-1] - 1
    size = n + m
    batch = np.broadcast_shapes(p.shape[:-1], q.shape[:-1])
    S = np.zeros(batch + (size, size), dtype=complex)
    for row in range(m):
        S[..., row, row:row + n + 1] = p
    for row in range(n):
        S[..., m + row, row:row + m + 1] = q
    if size == 0:
        return np.ones(batch, dtype=complex)
    return np.linalg.det(S)


def discriminant(curve: CurveSpec, z) -> np.ndarray:
    """D(z) = Res_k(R, dR/dk) for scalar or array z."""
    c = curve.coefficients(z)
    dc = c[..., :-1] * np.arange(curve.n, 0, -1)
    return sylvester_resultant(c, dc)


@dataclass(frozen=True)
class SingularPoint:
    z: complex
    k: complex
    kind: str
    residuals: Tuple[float, float, float]
    hessian_singular_values: Tuple[float, float] = (0.0, 0.0)
    cubic: Optional[float] = None
    note: str = ""

    def to_dict(self) -> Dict:
        out = {"z": self.z, "k": self.k, "residuals": list(self.residuals)}
        if self.kind == "unclassified":
            out["note"] = self.note
            out["hessian_singular_values"] = list(self.hessian_singular_values)
        return out


@dataclass(frozen=True)
class CensusReport:
    n: int
    nodes: Tuple[SingularPoint, ...] = ()
    cusps: Tuple[SingularPoint, ...] = ()
    unclassified: Tuple[SingularPoint, ...] = ()
    branch_points: Tuple[Tuple[complex, complex], ...] = ()
    pole_order: int = 0
    zero_count: int = 0

    @property
    def complete(self) -> bool:
        return not self.unclassified


@dataclass(frozen=True)
class CuspBoundVerdict:
    cusps: int
    nodes: int
    n: int
    margin: int
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


# -- curve derivatives ------------------------------------------------------

def _r_kk(curve: CurveSpec, k, z):
    c = curve.coefficients(z)
    powers = np.arange(curve.n, 0, -1)
    d1 = c[..., :-1] * powers
    d2 = d1[..., :-1] * np.arange(curve.n - 1, 0, -1)
    out = np.zeros(np.broadcast_shapes(d2.shape[:-1], np.shape(k)), dtype=complex)
    for i in range(d2.shape[-1]):
        out = out * k + d2[..., i]
    return out


def _r_kz(curve: CurveSpec, k, z, h: float = 1e-3):
    def f(shift):
        return curve.dk(k, z + shift)

    return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)


def _r_zz(curve: CurveSpec, k, z, h: float = 1e-3):
    def f(shift):
        return curve.evaluate(k, z + shift)

    return (-f(2 * h) + 16 * f(h) - 30 * f(0) + 16 * f(-h) - f(-2 * h)) / (12 * h**2)


def _gradient(curve, k, z):
    return np.array([complex(curve.dk(k, z)), complex(curve.dz(k, z))])


def _hessian(curve, k, z):
    kk = complex(_r_kk(curve, k, z))
    kz = complex(_r_kz(curve, k, z))
    zz = complex(_r_zz(curve, k, z))
    return np.array([[kk, kz], [kz, zz]])


def _residuals(curve, k, z) -> Tuple[float, float, float]:
    return (
        float(abs(curve.evaluate(k, z))),
        float(abs(curve.dk(k, z))),
        float(abs(curve.dz(k, z))),
    )


def critical_point_newton(curve: CurveSpec, k: complex, z: complex, max_iter: int = 40, tol: float = 1e-12):
    """Newton iteration on (dR/dk, dR/dz) = 0; returns (k, z, converged)."""
    for _ in range(max_iter):
        H = _hessian(curve, k, z)
        g = _gradient(curve, k, z)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            return k, z, False
        k, z = k - step[0], z - step[1]
        if np.max(np.abs(step)) < tol * (1 + abs(k) + abs(z)):
            return k, z, True
    return k, z, False


def _directional_cubic(curve, k, z, v, h: float = 1e-2) -> float:
    def f(t):
        return curve.evaluate(k + t * v[0], z + t * v[1])

    return float(abs((f(2 * h) - 2 * f(h) + 2 * f(-h) - f(-2 * h)) / (2 * h**3)))


def classify_point(curve: CurveSpec, k: complex, z: complex, cubic_eps: float = CUBIC_EPS) -> SingularPoint:
    """Node if the Hessian is nondegenerate, cusp if rank one with nonzero cubic along the kernel."""
    H = _hessian(curve, k, z)
    _, sv, vh = np.linalg.svd(H)
    residuals = _residuals(curve, k, z)
    rank_eps = 1e-6 * max(1.0, sv[0])
    svs = (float(sv[0]), float(sv[1]))
    if sv[1] > rank_eps:
        return SingularPoint(complex(z), complex(k), "node", residuals, svs)
    if sv[0] > rank_eps:
        v = vh[-1].conj()
        cubic = _directional_cubic(curve, k, z, v)
        if cubic > cubic_eps:
            return SingularPoint(complex(z), complex(k), "cusp", residuals, svs, cubic)
        return SingularPoint(
            complex(z), complex(k), "unclassified", residuals, svs, cubic, "vanishing cubic along Hessian kernel"
        )
    return SingularPoint(complex(z), complex(k), "unclassified", residuals, svs, None, "Hessian vanishes")


# -- discriminant zeros -----------------------------------------------------

@dataclass
class _Domain:
    curve: CurveSpec
    base: complex
    tau: complex
    pole_order: int = 0
    evaluations: int = 0

    def point(self, s, t):
        return self.base + s + t * self.tau

    def winding(self, s0, t0, ds, dt, samples: int = 32, max_samples: int = 4096) -> float:
        corners = [(s0, t0), (s0 + ds, t0), (s0 + ds, t0 + dt), (s0, t0 + dt), (s0, t0)]
        while True:
            u = np.arange(samples) / samples
            pts = np.concatenate(
                [self.point(a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])) for a, b in zip(corners[:-1], corners[1:])]
            )
            pts = np.append(pts, pts[0])
            values = discriminant(self.curve, pts)
            self.evaluations += len(pts)
            jumps = np.angle(values[1:] / values[:-1])
            if np.max(np.abs(jumps)) < np.pi / 3 or samples >= max_samples:
                return float(np.sum(jumps) / (2 * np.pi))
            samples *= 2

    def contains_origin(self, s0, t0, ds, dt) -> bool:
        # origin = base + s_o + t_o tau
        w = -self.base
        t_o = w.imag / self.tau.imag
        s_o = w.real - t_o * self.tau.real
        return s0 <= s_o < s0 + ds and t0 <= t_o < t0 + dt


def _pole_order(curve: CurveSpec, radius: float) -> int:
    theta = 2 * np.pi * np.arange(257) / 256
    values = discriminant(curve, radius * np.exp(1j * theta))
    jumps = np.angle(values[1:] / values[:-1])
    return -int(round(np.sum(jumps) / (2 * np.pi)))


def _newton_discriminant(curve, z, multiplicity, max_iter=60, h=1e-6):
    for _ in range(max_iter):
        d = complex(discriminant(curve, z))
        dd = complex((discriminant(curve, z + h) - discriminant(curve, z - h)) / (2 * h))
        if dd == 0:
            return z, False
        step = multiplicity * d / dd
        z = z - step
        if abs(step) < 1e-10 * (1 + abs(z)):
            return z, True
    return z, False


def discriminant_zeros(
    curve: CurveSpec,
    grid: int = 6,
    min_cell: float = 1e-4,
    offset: Tuple[float, float] = (0.0137, 0.0213),
) -> Tuple[List[Tuple[complex, int, bool]], int]:
    """
    Zeros of D in one period cell as (z, multiplicity, converged), plus the
    order of the pole of D at z = 0.
    """
    tau = curve.data.tau
    base = -0.5 - 0.5 * tau + offset[0] + offset[1] * tau
    pole = _pole_order(curve, 0.02 * min(1.0, tau.imag))
    domain = _Domain(curve, base, tau, pole)
    queue = [((i / grid, j / grid, 1 / grid, 1 / grid)) for j in range(grid) for i in range(grid)]
    zeros = []
    while queue:
        s0, t0, ds, dt = queue.pop(0)
        count = int(round(domain.winding(s0, t0, ds, dt)))
        if domain.contains_origin(s0, t0, ds, dt):
            count += pole
        if count <= 0:
            continue
        centre = domain.point(s0 + ds / 2, t0 + dt / 2)
        size = max(ds, dt * abs(tau))
        if count == 1:
            z, ok = _newton_discriminant(curve, centre, 1)
            zeros.append((z, 1, ok))
        elif size > min_cell:
            half_s, half_t = ds / 2, dt / 2
            queue.extend(
                [(s0, t0, half_s, half_t), (s0 + half_s, t0, half_s, half_t),
                 (s0, t0 + half_t, half_s, half_t), (s0 + half_s, t0 + half_t, half_s, half_t)]
            )
        else:
            z, ok = _newton_discriminant(curve, centre, count)
            zeros.append((z, count, ok))
    total = sum(m for _, m, _ in zeros)
    if total != pole:
        logger.warning(f"Discriminant zero count {total} differs from its pole order {pole}")
    logger.debug(f"Discriminant scan: {len(zeros)} zero clusters, {domain.evaluations} evaluations")
    return zeros, pole


def _double_root(curve, z):
    k = curve.roots(z)
    d = np.abs(k[:, None] - k[None, :])
    np.fill_diagonal(d, np.inf)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    return (k[i] + k[j]) / 2


def _dedupe(points: List[SingularPoint], data) -> List[SingularPoint]:
    unique: List[SingularPoint] = []
    for p in points:
        zr = complex(reduce_mod_lattice(p.z, data))
        p = SingularPoint(zr, p.k, p.kind, p.residuals, p.hessian_singular_values, p.cubic, p.note)
        if any(float(lattice_distance(zr - u.z, data)) < 1e-6 and abs(p.k - u.k) < 1e-6 * (1 + abs(p.k)) for u in unique):
            continue
        unique.append(p)
    return sorted(unique, key=lambda p: (round(p.z.real, 9), round(p.z.imag, 9), round(p.k.real, 9), round(p.k.imag, 9)))


def singularity_census(
    curve: CurveSpec,
    eps_sing: float = EPS_SING,
    cubic_eps: float = CUBIC_EPS,
    grid: int = 6,
    min_cell: float = 1e-4,
    branch_eps: float = 1e-4,
) -> CensusReport:
    """
    Singular points (R = dR/dk = dR/dz = 0) of the curve in one period cell,
    excluding z = 0. Points that cannot be refined or classified are listed
    as unclassified with diagnostics.
    """
    n = curve.n
    if n > MAX_CENSUS_DEGREE:
        raise DomainError(f"Census supports N <= {MAX_CENSUS_DEGREE}, got {n}")
    if n == 1:
        return CensusReport(n=1)

    zeros, pole = discriminant_zeros(curve, grid=grid, min_cell=min_cell)
    found: List[SingularPoint] = []
    branch_points = []
    for z, mult, ok in zeros:
        if not ok:
            found.append(SingularPoint(complex(z), 0j, "unclassified", (np.nan,) * 3, note=f"discriminant Newton failed (multiplicity {mult})"))
            continue
        if float(lattice_distance(z, curve.data)) < 1e-3:
            continue
        k = _double_root(curve, z)
        r_z = abs(complex(curve.dz(k, z)))
        if r_z > branch_eps * max(1.0, abs(complex(curve.dk(k, z))) + 1.0) and mult == 1:
            branch_points.append((complex(reduce_mod_lattice(z, curve.data)), complex(k)))
            continue
        k_ref, z_ref, converged = critical_point_newton(curve, k, z)
        residuals = _residuals(curve, k_ref, z_ref)
        if not converged or max(residuals) >= eps_sing:
            if mult == 1 and r_z > branch_eps:
                branch_points.append((complex(reduce_mod_lattice(z, curve.data)), complex(k)))
                continue
            found.append(SingularPoint(
                complex(z_ref), complex(k_ref), "unclassified", residuals,
                note=f"refinement {'did not converge' if not converged else 'left residuals above eps_sing'}",
            ))
            continue
        found.append(classify_point(curve, k_ref, z_ref, cubic_eps))

    points = _dedupe(found, curve.data)
    report = CensusReport(
        n=n,
        nodes=tuple(p for p in points if p.kind == "node"),
        cusps=tuple(p for p in points if p.kind == "cusp"),
        unclassified=tuple(p for p in points if p.kind == "unclassified"),
        branch_points=tuple(sorted(branch_points, key=lambda b: (round(b[0].real, 9), round(b[0].imag, 9)))),
        pole_order=pole,
        zero_count=sum(m for _, m, _ in zeros),
    )
    if report.unclassified:
        logger.warning(f"Census found {len(report.unclassified)} unclassified singular points")
    logger.info(
        f"Census N={n}: {len(report.nodes)} nodes, {len(report.cusps)} cusps, "
        f"{len(report.branch_points)} branch points"
    )
    return report


def verify_cusp_bound(report: CensusReport) -> CuspBoundVerdict:
    """Check 2 (#cusps) + (#nodes) < N; incomplete reports are inconclusive."""
    n_c, n_n = len(report.cusps), len(report.nodes)
    margin = report.n - 2 * n_c - n_n
    if not report.complete:
        verdict = "inconclusive"
    elif margin > 0:
        verdict = "pass"
    else:
        verdict = "fail"
        logger.warning(f"Cusp/node bound violated: 2*{n_c} + {n_n} >= {report.n}; manual review needed")
    return CuspBoundVerdict(cusps=n_c, nodes=n_n, n=report.n, margin=margin, verdict=verdict)


@dataclass(frozen=True, eq=False)
class NodalConstruction:
    curve: CurveSpec
    k: complex
    z: complex
    shift: complex
    hessian_singular_values: Tuple[float, float] = field(default=(0.0, 0.0))


def nodal_degeneration(curve: CurveSpec, seeds: int = 3, rng: Optional[np.random.Generator] = None) -> NodalConstruction:
    """
    Move the curve onto the discriminant locus along the I_0 direction.

    R depends on I_0 as R = G + I_0, so a critical point (k*, z*) of R becomes
    a singular point once I_0 is replaced by I_0 - R(k*, z*). Determinant-backed
    curves are first converted with fit_H.
    """
    if curve.kind == "det":
        curve = fit_H(curve, rng=rng).curve(curve.data)
    if curve.n < 2:
        raise DomainError("A degree-1 curve cannot be made singular")
    tau = curve.data.tau
    candidates = []
    for i in range(seeds):
        for j in range(seeds):
            z0 = (i + 0.5) / seeds - 0.5 + ((j + 0.5) / seeds - 0.5) * tau + 0.031 + 0.017 * tau
            if float(lattice_distance(z0, curve.data)) < 0.1:
                continue
            dk_coeffs = curve.coefficients(z0)[:-1] * np.arange(curve.n, 0, -1)
            for k0 in np.roots(dk_coeffs):
                k, z, ok = critical_point_newton(curve, complex(k0), complex(z0))
                if not ok or float(lattice_distance(z, curve.data)) < 0.05:
                    continue
                sv = np.linalg.svd(_hessian(curve, k, z), compute_uv=False)
                candidates.append((complex(reduce_mod_lattice(z, curve.data)), k, sv))
    if not candidates:
        raise SearchError("No nondegenerate critical point of R found")
    candidates.sort(key=lambda c: (-round(float(c[2][1]), 6), round(c[0].real, 9), round(c[0].imag, 9)))
    z, k, sv = candidates[0]
    value = complex(curve.evaluate(k, z))
    actions = np.array(curve.actions, dtype=complex)
    actions[0] -= value
    nodal = curve_from_H(actions, curve.data, curve.cauchy_nodes, curve.cauchy_radius_factor)
    logger.info(f"Nodal degeneration at z={z:.6g}, k={k:.6g} (I_0 shifted by {-value:.6g})")
    return NodalConstruction(nodal, complex(k), complex(z), -value, (float(sv[0]), float(sv[1])))


def census_payload(report: CensusReport) -> Dict:
    """JSON-ready census with the cusp/node bound verdict."""
    bound = verify_cusp_bound(report)
    return {
        "N": report.n,
        "nodes": [p.to_dict() for p in report.nodes],
        "cusps": [p.to_dict() for p in report.cusps],
        "unclassified": [p.to_dict() for p in report.unclassified],
        "bound": {
            "n": bound.cusps,
            "k": bound.nodes,
            "N": bound.n,
            "margin": bound.margin,
            "pass": bound.passed,
            "verdict": bound.verdict,
        },
    }
