"""
Spectral curves R(k, z) = 0 of the elliptic Calogero-Moser system.

A curve is either determinant-backed, R = det(k + L(z)) for a phase point, or
H-backed, R(k, z) = f(k + zeta(z), z) with
f(phi, z) = sum_n (-1)^n sigma^(n)(z) / (n! sigma(z)) H^(n)(phi), that is
sigma(z)^-1 H(phi - d/dz) sigma(z), for a monic H of degree N. This is the
orientation of det(k + L) for the kernel sigma(z - x) / (sigma(z) sigma(x)):
both have roots k ~ -a / z near z = 0, a = 1 - N once and a = 1 with
multiplicity N - 1.
Coefficient arrays are ordered highest power of k first.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .dynamics import PhasePoint, Trajectory
from .elliptic import EllipticData, kr_kernel, sigma_z_derivs, zeta
from .errors import ConsistencyError, DomainError, SamplingError, TrackingError
from .polyroots import aberth_roots, match_order, min_root_gap

logger = logging.getLogger(__name__)

MAX_H_DEGREE = 8
MAX_FIT_DEGREE = 6


def faddeev_leverrier(A: np.ndarray) -> np.ndarray:
    """
    Coefficients [1, c_1, ..., c_N] of det(k - A) for a stack of N x N matrices
    (shape (..., N, N) -> (..., N + 1)).
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[-1]
    eye = np.broadcast_to(np.eye(n, dtype=complex), A.shape)
    coeffs = [np.ones(A.shape[:-2], dtype=complex)]
    Mk = np.zeros_like(A)
    for j in range(1, n + 1):
        Mk = A @ Mk + coeffs[-1][..., None, None] * eye
        coeffs.append(-np.trace(A @ Mk, axis1=-2, axis2=-1) / j)
    return np.stack(coeffs, axis=-1)


def _det_interpolated(L: np.ndarray) -> np.ndarray:
    """Coefficients of det(k + L) from LU determinants at scaled roots of unity."""
    n = L.shape[-1]
    rho = 1.0 + np.max(np.abs(L))
    nodes = rho * np.exp(2j * np.pi * np.arange(n + 1) / (n + 1))
    values = np.array([np.linalg.det(k * np.eye(n) + L) for k in nodes])
    ascending = np.fft.fft(values) / (n + 1) / rho ** np.arange(n + 1)
    return ascending[::-1]


def _alternating(derivs: np.ndarray) -> np.ndarray:
    """(-1)^n sigma^(n)(z) / sigma(z) from the stacked derivatives."""
    signs = (-1.0) ** np.arange(derivs.shape[-1])
    return signs * derivs / derivs[..., :1]


def _horner(coeffs: np.ndarray, k: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(coeffs.shape[:-1], np.shape(k)), dtype=complex)
    for i in range(coeffs.shape[-1]):
        out = out * k + coeffs[..., i]
    return out


@dataclass(frozen=True, eq=False)
class CurveSpec:
    """
    Spectral curve of degree N over the torus, backed either by a phase
    point (``state``) or by the coefficients I_0..I_{N-1} of H (``actions``).
    """

    n: int
    data: EllipticData
    state: Optional[PhasePoint] = None
    actions: Optional[np.ndarray] = None
    cauchy_nodes: int = 64
    cauchy_radius_factor: float = 0.25

    def __post_init__(self):
        if (self.state is None) == (self.actions is None):
            raise DomainError("A curve needs exactly one of a phase point or H coefficients")
        if self.n < 1:
            raise DomainError(f"Degree must be positive, got {self.n}")
        if self.state is not None and self.state.n != self.n:
            raise DomainError(f"Phase point has {self.state.n} particles, curve degree is {self.n}")
        if self.actions is not None:
            actions = np.array(self.actions, dtype=complex).ravel()
            if len(actions) != self.n:
                raise DomainError(f"H of degree {self.n} needs {self.n} coefficients, got {len(actions)}")
            if self.n > MAX_H_DEGREE:
                raise DomainError(f"H-backed curves support N <= {MAX_H_DEGREE}")
            actions.setflags(write=False)
            object.__setattr__(self, "actions", actions)

    @classmethod
    def from_state(cls, state: PhasePoint) -> "CurveSpec":
        return cls(n=state.n, data=state.data, state=state)

    @property
    def kind(self) -> str:
        return "det" if self.state is not None else "H"

    def lax_stack(self, z) -> np.ndarray:
        """Gauge-transformed L(z) for every z, shape (..., N, N)."""
        if self.state is None:
            raise DomainError("Only determinant-backed curves have a Lax matrix")
        z = np.asarray(z, dtype=complex)
        x = self.state.x
        L = np.zeros(z.shape + (self.n, self.n), dtype=complex)
        for i in range(self.n):
            L[..., i, i] = self.state.q[i] / 2
            for j in range(self.n):
                if i != j:
                    L[..., i, j] = kr_kernel(x[i] - x[j], z, self.data, bloch=False)
        return L

    def _h_coefficients(self, z: np.ndarray) -> np.ndarray:
        n = self.n
        h = np.append(self.actions, 1.0)  # ascending, monic
        derivs = sigma_z_derivs(
            z, n, self.data, nodes=self.cauchy_nodes, radius_factor=self.cauchy_radius_factor
        )
        s = _alternating(derivs)
        # coefficient of phi^m: sum_j (-1)^j s_j C(m + j, j) h_{m + j}
        a = np.zeros(z.shape + (n + 1,), dtype=complex)
        for m in range(n + 1):
            for j in range(0, n - m + 1):
                a[..., m] += s[..., j] * math.comb(m + j, j) * h[m + j]
        # shift phi = k + zeta(z): Horner in polynomials of k, ascending
        zz = np.asarray(zeta(z, self.data), dtype=complex)
        poly = np.zeros(z.shape + (n + 1,), dtype=complex)
        poly[..., 0] = a[..., n]
        for m in range(n - 1, -1, -1):
            shifted = np.zeros_like(poly)
            shifted[..., 1:] = poly[..., :-1]
            poly = shifted + zz[..., None] * poly
            poly[..., 0] += a[..., m]
        return poly[..., ::-1]

    def coefficients(self, z) -> np.ndarray:
        """[1, r_1(z), ..., r_N(z)] for scalar or array z."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "det":
            return faddeev_leverrier(-self.lax_stack(z))
        return self._h_coefficients(z)

    def evaluate(self, k, z) -> np.ndarray:
        return _horner(self.coefficients(z), np.asarray(k, dtype=complex))

    def dk(self, k, z) -> np.ndarray:
        c = self.coefficients(z)
        powers = np.arange(self.n, 0, -1)
        return _horner(c[..., :-1] * powers, np.asarray(k, dtype=complex))

    def dz(self, k, z, h: float = 1e-3) -> np.ndarray:
        """Fourth-order central difference in z."""
        k = np.asarray(k, dtype=complex)
        z = np.asarray(z, dtype=complex)

        def f(shift):
            return self.evaluate(k, z + shift)

        return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)

    def roots(self, z: complex, initial: Optional[Sequence[complex]] = None) -> np.ndarray:
        return aberth_roots(self.coefficients(z), initial=initial)


def curve_from_H(
    I: Sequence[complex],
    data: EllipticData,
    cauchy_nodes: int = 64,
    cauchy_radius_factor: float = 0.25,
) -> CurveSpec:
    """H-backed curve for H(phi) = phi^N + sum I_i phi^i."""
    I = np.array(I, dtype=complex).ravel()
    return CurveSpec(
        n=len(I),
        data=data,
        actions=I,
        cauchy_nodes=cauchy_nodes,
        cauchy_radius_factor=cauchy_radius_factor,
    )


def char_poly(curve: CurveSpec, z: complex, cross_check: bool = True, tol: float = 1e-9) -> np.ndarray:
    """
    Coefficients [1, r_1(z), ..., r_N(z)] of det(k + L(z)).

    For N <= 4 the Faddeev-LeVerrier recursion is cross-checked against LU
    determinants interpolated at roots of unity.
    """
    if curve.kind != "det":
        raise DomainError("char_poly needs a determinant-backed curve")
    L = curve.lax_stack(complex(z))
    coeffs = faddeev_leverrier(-L)
    if cross_check and curve.n <= 4:
        other = _det_interpolated(L)
        # compare r_m on the scale rho^m set by the interpolation circle
        rho = 1.0 + np.max(np.abs(L))
        weights = rho ** -np.arange(curve.n + 1.0)
        scale = max(1.0, float(np.max(np.abs(coeffs) * weights)))
        defect = float(np.max(np.abs(coeffs - other) * weights)) / scale
        if defect > tol:
            raise ConsistencyError(
                f"Characteristic polynomial routes disagree by {defect:.3e} at z={z}"
            )
    return coeffs


def isospectral_drift(traj: Trajectory, z: complex) -> float:
    """max_i,t |r_i(z, t) - r_i(z, 0)| / (1 + |r_i(z, 0)|)."""
    ref = char_poly(CurveSpec.from_state(traj.states[0]), z, cross_check=False)
    drift = 0.0
    for s in traj.states[1:]:
        c = char_poly(CurveSpec.from_state(s), z, cross_check=False)
        drift = max(drift, float(np.max(np.abs(c[1:] - ref[1:]) / (1.0 + np.abs(ref[1:])))))
    return drift


def leading_laurent(
    curve: CurveSpec,
    z0: Optional[complex] = None,
    levels: int = 6,
    separation: float = 1e-6,
) -> list:
    """
    Fit k_j(z) = -a_j / z - h_j + O(z) for every root of R(k, z) = 0 near
    z = 0 from the geometric sequence z0 2^-m, m = 0..levels-1.

    Returns (a_j, h_j) pairs, the branch with a closest to 1 - N first.
    """
    n = curve.n
    if z0 is None:
        z0 = 0.05 * min(1.0, curve.data.tau.imag) * np.exp(0.2j * np.pi)
    zs = z0 * 2.0 ** -np.arange(levels)
    tracked = None
    samples = []
    for z in zs:
        k = curve.roots(z)
        if min_root_gap(k) < separation:
            raise TrackingError(f"Roots of R(k, {z:.3g}) closer than {separation:g}")
        # k + a/z tends to -h, so branches are matched on it
        a_guess = np.round(-(k * z).real)
        g = k + a_guess / z
        if tracked is None:
            order = np.lexsort((g.imag, g.real, a_guess))
        else:
            try:
                order, _ = match_order(tracked, g, ambiguity=0.9)
            except TrackingError as e:
                raise TrackingError(f"Laurent root tracking failed at z={z:.3g}: {e}") from e
        tracked = g[order]
        samples.append(k[order] * z)
    y = np.array(samples)  # (levels, n): k z = -a - h z + c z^2
    design = np.stack([np.ones_like(zs), zs, zs**2], axis=1)
    fit, *_ = np.linalg.lstsq(design, y, rcond=None)
    a = -fit[0]
    h = -fit[1]
    pairs = sorted(
        zip(a, h),
        key=lambda p: (abs(p[0] - (1 - n)), p[1].real, p[1].imag),
    )
    logger.debug(f"Laurent data for N={n}: a={[complex(p[0]) for p in pairs]}")
    return [(complex(p[0]), complex(p[1])) for p in pairs]


@dataclass(frozen=True, eq=False)
class FitResult:
    """H coefficients fitted to a determinant-backed curve."""

    actions: np.ndarray
    residual: float
    condition: float

    def curve(self, data: EllipticData, **kwargs) -> CurveSpec:
        return curve_from_H(self.actions, data, **kwargs)


def _fit_samples(data: EllipticData, count: int, rng: np.random.Generator):
    side = int(np.ceil(np.sqrt(count)))
    grid = (np.arange(side) + 0.5) / side
    s, t = np.meshgrid(grid, grid, indexing="ij")
    offset = rng.uniform(-0.25, 0.25, 2) / side
    s = 0.1 + 0.8 * (s.ravel() + offset[0])
    t = 0.1 + 0.8 * (t.ravel() + offset[1])
    z = (s + t * data.tau)[:count]
    radius = 2.0 + np.abs(zeta(z, data))
    k = radius * np.exp(2j * np.pi * rng.uniform(0, 1, len(z)))
    return k, z


def _h_basis(curve_like: CurveSpec, k: np.ndarray, z: np.ndarray) -> np.ndarray:
    """B_i(k, z) = sum_{j <= i} (-1)^j s_j(z) C(i, j) phi^(i - j), i = 0..N, with phi = k + zeta(z)."""
    n = curve_like.n
    derivs = sigma_z_derivs(
        z, n, curve_like.data,
        nodes=curve_like.cauchy_nodes, radius_factor=curve_like.cauchy_radius_factor,
    )
    s = _alternating(derivs)
    phi = k + np.asarray(zeta(z, curve_like.data), dtype=complex)
    basis = np.zeros(z.shape + (n + 1,), dtype=complex)
    for i in range(n + 1):
        for j in range(i + 1):
            basis[..., i] += s[..., j] * math.comb(i, j) * phi ** (i - j)
    return basis


def fit_H(
    curve: CurveSpec,
    rng: Optional[np.random.Generator] = None,
    max_condition: float = 1e10,
    oversample: int = 3,
) -> FitResult:
    """
    Least-squares I_0..I_{N-1} with R_H = R_det at >= 3 N^2 random sample
    points; the residual max |R_det - R_H| / (1 + |R_det|) is measured on a
    disjoint validation set.
    """
    if curve.kind != "det":
        raise DomainError("fit_H needs a determinant-backed curve")
    n = curve.n
    if n > MAX_FIT_DEGREE:
        raise DomainError(f"fit_H supports N <= {MAX_FIT_DEGREE}, got {n}")
    rng = rng if rng is not None else np.random.default_rng(0)
    count = max(oversample * n * n, n + 2)

    k, z = _fit_samples(curve.data, count, rng)
    target = curve.evaluate(k, z)
    basis = _h_basis(curve, k, z)
    rhs = target - basis[:, n]
    design = basis[:, :n]
    col_scale = np.linalg.norm(design, axis=0)
    col_scale[col_scale == 0] = 1.0
    scaled = design / col_scale
    condition = float(np.linalg.cond(scaled))
    if not condition < max_condition:
        raise SamplingError(
            f"fit_H sample system has condition {condition:.3e}; retry with another seed",
            condition=condition,
        )
    solution, *_ = np.linalg.lstsq(scaled, rhs, rcond=None)
    actions = solution / col_scale

    kv, zv = _fit_samples(curve.data, count, rng)
    r_det = curve.evaluate(kv, zv)
    bv = _h_basis(curve, kv, zv)
    r_h = bv[:, :n] @ actions + bv[:, n]
    residual = float(np.max(np.abs(r_det - r_h) / (1.0 + np.abs(r_det))))
    logger.debug(f"fit_H N={n}: condition {condition:.3e}, validation residual {residual:.3e}")
    return FitResult(actions=actions, residual=residual, condition=condition)


def curve_samples_frame(curve: CurveSpec, zs: Sequence[complex]) -> pd.DataFrame:
    """Rows (re_z, im_z, i, re_ri, im_ri) for every sample z and i = 1..N."""
    zs = np.asarray(zs, dtype=complex)
    coeffs = curve.coefficients(zs)
    rows = []
    for z, c in zip(zs, coeffs):
        for i in range(1, curve.n + 1):
            rows.append(
                {"re_z": z.real, "im_z": z.imag, "i": i, "re_ri": c[i].real, "im_ri": c[i].imag}
            )
    return pd.DataFrame(rows, columns=["re_z", "im_z", "i", "re_ri", "im_ri"])
