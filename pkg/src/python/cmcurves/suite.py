"""
Acceptance suite: every numerical claim checked end to end.

Criteria run concurrently in an executor; results keep registry order, and
each criterion draws from its own child of the seeded generator, so reports
are identical for identical configurations.
"""

import asyncio
import logging
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .baker_akhiezer import ba_pde_residual, ba_solution, resolved_grid
from .census import nodal_degeneration, singularity_census, verify_cusp_bound
from .config import RunConfig
from .dynamics import (
    calibrate_lax_convention,
    integrate,
    lax_pair,
    lax_residual,
    near_equilibrium_point,
    random_phase_point,
)
from .elliptic import EllipticData, lattice_distance, lattice_invariants, ode_residual, period_identities
from .errors import CMCurvesError, SaddleEncounter
from .monodromy import LiftedLoop
from .periods import DifferentialOnCurve, degree_pairing, phi_period
from .spectral import CurveSpec, curve_from_H, fit_H, isospectral_drift, leading_laurent
from .storage import ArtifactStore, dumps
from .torus import (
    base_case_check,
    critical_leaf_start,
    torus_real_basis,
    torus_zeros,
    trace_level_set,
)

logger = logging.getLogger(__name__)

# halving dt gains 2^4 for RK4, halving grid spacings gains 2^2
ISOSPECTRAL_RATIO = 12.0
REFINEMENT_BAND = (3.0, 5.0)


@dataclass(frozen=True)
class CriterionResult:
    id: str
    description: str
    measured: Any
    bound: Any
    passed: bool
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "id": self.id,
            "description": self.description,
            "measured": self.measured,
            "bound": self.bound,
            "pass": self.passed,
        }
        if self.error:
            out["error"] = self.error
        return out


Criterion = Callable[[RunConfig, np.random.Generator], Tuple[Any, Any, bool]]


def random_tau(rng: np.random.Generator, box: Tuple[float, float, float]) -> complex:
    lo, hi, re_max = box
    return complex(rng.uniform(-re_max, re_max), rng.uniform(lo, hi))


def _data(config: RunConfig, tau: Optional[complex] = None) -> EllipticData:
    return lattice_invariants(
        config.tau if tau is None else tau,
        trunc=config.kernel.trunc,
        tol=config.tol,
        pole_eps=config.kernel.pole_eps,
    )


def _random_z(rng: np.random.Generator, data: EllipticData) -> complex:
    while True:
        z = rng.uniform(0.1, 0.9) + rng.uniform(0.1, 0.9) * data.tau
        if float(lattice_distance(z, data)) > 0.2:
            return complex(z)


def _random_actions(rng: np.random.Generator, n: int, scale: float = 0.5) -> np.ndarray:
    return scale * (rng.normal(size=n) + 1j * rng.normal(size=n))


# -- criteria ---------------------------------------------------------------

def check_kernel(config, rng):
    worst_legendre, worst_ode = 0.0, 0.0
    for _ in range(config.kernel.sample_count):
        d = _data(config, random_tau(rng, config.kernel.seed_tau_box))
        worst_legendre = max(worst_legendre, d.legendre_defect())
        worst_ode = max(worst_ode, ode_residual(d))
    square = _data(config, 1j)
    eta_error = float(abs(square.eta1 - np.pi / 2))
    measured = {"legendre": worst_legendre, "ode": worst_ode, "eta1_square": eta_error}
    bound = {"legendre": 1e-9, "ode": 1e-9, "eta1_square": 1e-10}
    return measured, bound, all(measured[k] < bound[k] for k in bound)


def check_period_identities(config, rng):
    worst = 0.0
    for _ in range(20):
        d = _data(config, random_tau(rng, config.kernel.seed_tau_box))
        p = period_identities(d)
        worst = max(
            worst,
            abs(p["b_c1"] - 2j * np.pi),
            abs(p["a_c2"] + 2j * np.pi / d.tau),
            abs(p["a_c1"]),
            abs(p["b_c2"]),
        )
    return float(worst), 1e-8, worst < 1e-8


def check_lax(config, rng):
    data = _data(config)
    worst = 0.0
    literal = True
    for n in (2, 3, 4):
        s = random_phase_point(n, data, rng)
        zs = [_random_z(rng, data) for _ in range(5)]
        for z in zs:
            scale = max(1.0, float(np.linalg.norm(lax_pair(s, z).L)))
            worst = max(worst, lax_residual(s, z) / scale)
        literal = literal and calibrate_lax_convention(s, zs).literal
    return {"residual": worst, "literal_convention": literal}, {"residual": 1e-8}, worst < 1e-8 and literal


def check_isospectral(config, rng):
    data = _data(config)
    s0 = near_equilibrium_point(3, data, rng)
    z = _random_z(rng, data)
    coarse = integrate(s0, config.t_end, config.dt, config.dynamics.max_energy_drift)
    fine = integrate(s0, config.t_end, config.dt / 2, config.dynamics.max_energy_drift)
    d_coarse = isospectral_drift(coarse, z)
    d_fine = isospectral_drift(fine, z)
    ratio = d_coarse / d_fine if d_fine > 0 else float("inf")
    converging = ratio > ISOSPECTRAL_RATIO or d_coarse < 1e-12
    measured = {
        "drift": d_coarse,
        "drift_half_step": d_fine,
        "ratio": ratio,
        "energy_drift": coarse.stats["max_energy_drift"],
    }
    return measured, {"drift": 1e-7, "ratio": ISOSPECTRAL_RATIO}, d_coarse < 1e-7 and converging


def check_laurent(config, rng):
    data = _data(config)
    worst = 0.0
    for n in (2, 3, 4):
        curve = CurveSpec.from_state(random_phase_point(n, data, rng))
        a = sorted((p[0].real for p in leading_laurent(curve)))
        expected = sorted([1.0 - n] + [1.0] * (n - 1))
        worst = max(worst, float(np.max(np.abs(np.array(a) - expected))))
    return worst, 1e-4, worst < 1e-4


def check_bridge(config, rng):
    data = _data(config)
    worst = 0.0
    for n in (1, 2, 3):
        curve = CurveSpec.from_state(random_phase_point(n, data, rng))
        worst = max(worst, fit_H(curve, rng=np.random.default_rng(rng.integers(2**32))).residual)
    s0 = near_equilibrium_point(3, data, rng)
    traj = integrate(s0, 0.2, min(config.dt, 5e-4), config.dynamics.max_energy_drift)
    fit_seed = int(rng.integers(2**32))
    start = fit_H(CurveSpec.from_state(traj.states[0]), rng=np.random.default_rng(fit_seed)).actions
    end = fit_H(CurveSpec.from_state(traj.states[-1]), rng=np.random.default_rng(fit_seed)).actions
    drift = float(np.max(np.abs(end - start) / (1 + np.abs(start))))
    measured = {"residual": worst, "action_drift": drift}
    return measured, {"residual": 1e-6, "action_drift": 1e-6}, worst < 1e-6 and drift < 1e-6


def _genus_two_curve(config, rng) -> CurveSpec:
    return curve_from_H(_random_actions(rng, 2), _data(config))


PERIOD_LOOPS = ((1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (-1, 2))


def check_integer_periods(config, rng):
    curve = _genus_two_curve(config, rng)
    base = 0.31 + 0.27 * curve.data.tau
    worst = 0.0
    for i, (a, b) in enumerate(PERIOD_LOOPS):
        loop = LiftedLoop(a, b, base, sheet=i % 2, steps=config.curve.track_steps)
        for which in ("phi1", "phi2"):
            worst = max(worst, phi_period(DifferentialOnCurve(curve, which), loop).deviation)
    return worst, 1e-6, worst < 1e-6


def check_degree(config, rng):
    curve = _genus_two_curve(config, rng)
    pairing = degree_pairing(curve, config.curve.track_steps).pairing
    deviation = float(abs(abs(pairing) - curve.n))
    return {"pairing": pairing, "deviation": deviation}, {"deviation": 1e-4}, deviation < 1e-4


def _clear_centre(psi, data, clearance: float) -> complex:
    best, best_dist = None, -1.0
    for i in range(8):
        for j in range(8):
            c = (i + 0.5) / 8 + (j + 0.5) / 8 * data.tau
            dist = min(
                float(np.min(lattice_distance(c - psi.state_at(t)[0], data)))
                for t in np.linspace(psi.times[0], psi.times[-1], 5)
            )
            if dist > best_dist:
                best, best_dist = complex(c), dist
    if best_dist < clearance:
        logger.warning(f"Best grid centre is only {best_dist:.3g} from a particle")
    return best


def check_baker_akhiezer(config, rng):
    data = _data(config)
    worst, worst_bloch = 0.0, 0.0
    ratios = []
    for n in (1, 2):
        s0 = random_phase_point(n, data, rng, momentum_scale=0.5, min_separation=0.3)
        traj = integrate(s0, 0.05, 1e-4, config.dynamics.max_energy_drift)
        psi = ba_solution(traj, _random_z(rng, data))
        centre = _clear_centre(psi, data, 0.1)
        grid = resolved_grid(psi, centre)
        coarse = ba_pde_residual(psi, traj, grid)
        fine = ba_pde_residual(psi, traj, grid.refined())
        worst = max(worst, coarse)
        ratio = coarse / fine if fine > 0 else float("inf")
        ratios.append(ratio)
        xs, _ = grid.axes()
        factors = psi.bloch_factors(xs, 0.025)
        worst_bloch = max(worst_bloch, float(np.max(np.abs(factors - factors[0]) / np.abs(factors[0]))))
    lo, hi = REFINEMENT_BAND
    in_band = all(lo < r < hi for r in ratios)
    measured = {"residual": worst, "refinement_ratios": ratios, "bloch_spread": worst_bloch}
    bound = {"residual": 1e-4, "refinement_ratio": list(REFINEMENT_BAND), "bloch_spread": 1e-6}
    passed = worst < 1e-4 and in_band and worst_bloch < 1e-6
    return measured, bound, passed


def check_cusp_bound(config, rng):
    data = _data(config)
    state = random_phase_point(3, data, rng, momentum_scale=0.5)
    fit = fit_H(CurveSpec.from_state(state), rng=np.random.default_rng(rng.integers(2**32)))
    curve = fit.curve(data)
    smooth = singularity_census(curve, config.curve.eps_sing, config.curve.cubic_eps, config.curve.census_grid)
    nodal = nodal_degeneration(curve).curve
    singular = singularity_census(nodal, config.curve.eps_sing, config.curve.cubic_eps, config.curve.census_grid)
    verdicts = [verify_cusp_bound(r) for r in (smooth, singular)]
    measured = {
        "margins": [v.margin for v in verdicts],
        "verdicts": [v.verdict for v in verdicts],
        "nodal_census": [len(singular.nodes), len(singular.cusps)],
        "fit_residual": fit.residual,
    }
    passed = (
        all(v.passed for v in verdicts)
        and len(singular.nodes) == 1
        and not singular.cusps
        and fit.residual < 1e-6
    )
    return measured, {"margin": "> 0", "fit_residual": 1e-6}, passed


def check_base_case(config, rng):
    worst_real, worst_gap = 0.0, float("inf")
    all_pass = True
    for _ in range(100):
        d = _data(config, random_tau(rng, config.kernel.seed_tau_box))
        psi1, psi2 = torus_real_basis(d)
        integrated = psi1.integrated_periods() + psi2.integrated_periods()
        worst_real = max(worst_real, max(abs(p.imag) for p in integrated))
        verdict = base_case_check(d, (psi1, psi2))
        worst_gap = min(worst_gap, verdict.level_gap)
        all_pass = all_pass and verdict.passed
    psi1, psi2 = torus_real_basis(_data(config, 1j))
    square = float(max(abs(psi1.b + np.pi), abs(psi2.b - 1j * np.pi)))
    measured = {"reality": worst_real, "level_gap": worst_gap, "square_lattice": square}
    bound = {"reality": 1e-8, "level_gap": 1e-6, "square_lattice": 1e-8}
    return measured, bound, all_pass and worst_real < 1e-8 and worst_gap > 1e-6 and square < 1e-8


def check_level_sets(config, rng):
    data = _data(config, 1j)
    psi1, _ = torus_real_basis(data)
    leaf = trace_level_set(psi1, _random_z(rng, data), 1.0)
    zero = torus_zeros(psi1).zeros[0]
    start = critical_leaf_start(psi1, zero)
    try:
        trace_level_set(psi1, start, 10.0)
        stop = float("inf")
    except SaddleEncounter as e:
        stop = min(float(lattice_distance(e.location - w, data)) for w in torus_zeros(psi1).zeros)
    measured = {"drift": leaf.drift, "monotone": leaf.monotone, "saddle_distance": stop}
    bound = {"drift": 1e-6, "saddle_distance": 1e-4}
    return measured, bound, leaf.drift < 1e-6 and leaf.monotone and stop < 1e-4


def check_determinism(config, rng):
    seed = int(rng.integers(2**32))
    runs = [dumps(check_kernel(config, np.random.default_rng(seed))) for _ in range(2)]
    runs += [dumps(check_laurent(config, np.random.default_rng(seed))) for _ in range(2)]
    identical = runs[0] == runs[1] and runs[2] == runs[3]
    return identical, True, identical


CRITERIA: List[Tuple[str, str, Criterion]] = [
    ("C01", "Legendre relation, Weierstrass ODE and eta1 at tau = i", check_kernel),
    ("C02", "Integrals of wp - c over the period paths", check_period_identities),
    ("C03", "Lax equation residual and convention calibration", check_lax),
    ("C04", "Isospectrality of r_i(z) with fourth-order convergence", check_isospectral),
    ("C05", "Leading Laurent coefficients {1 - N, 1, ..., 1}", check_laurent),
    ("C06", "fit_H residual and conservation of fitted actions", check_bridge),
    ("C07", "Integer periods of Phi_1 and Phi_2 on an N = 2 curve", check_integer_periods),
    ("C08", "Degree from the period pairing equals the sheet count", check_degree),
    ("C09", "Baker-Akhiezer heat-equation residual and Bloch factors", check_baker_akhiezer),
    ("C10", "Cusp/node bound on smooth and nodal N = 3 curves", check_cusp_bound),
    ("C11", "Real periods and disjoint zeros of Psi_1, Psi_2", check_base_case),
    ("C12", "Level-set leaves and saddle stops", check_level_sets),
    ("C13", "Repeated criteria give identical payloads", check_determinism),
]


class AcceptanceSuite:
    """
    Orchestrates the acceptance criteria and writes ``report.json``.
    """

    def __init__(
        self,
        config: Optional[RunConfig] = None,
        storage: Optional[ArtifactStore] = None,
        only: Optional[List[str]] = None,
    ):
        """
        Initialize the suite.

        Args:
            config: run configuration (default: from the environment)
            storage: artifact store for the report (optional)
            only: restrict to these criterion ids
        """
        self.config = config or RunConfig.from_env()
        self.storage = storage
        self.criteria = [c for c in CRITERIA if only is None or c[0] in only]
        self.results: Dict[str, CriterionResult] = {}
        self._running = False
        self._lock = threading.Lock()
        self._started = time.perf_counter()
        logger.info(f"Acceptance suite initialized with {len(self.criteria)} criteria")

    def _run_one(self, cid: str, description: str, fn: Criterion, seed: np.random.SeedSequence) -> CriterionResult:
        start = time.perf_counter()
        try:
            measured, bound, passed = fn(self.config, np.random.default_rng(seed))
            result = CriterionResult(cid, description, measured, bound, bool(passed))
        except CMCurvesError as e:
            logger.error(f"{cid} failed with {type(e).__name__}: {e}")
            result = CriterionResult(cid, description, None, None, False, f"{type(e).__name__}: {e}")
        except Exception as e:
            logger.error(f"{cid} crashed: {e}", exc_info=True)
            result = CriterionResult(cid, description, None, None, False, f"{type(e).__name__}: {e}")
        with self._lock:
            self.results[cid] = result
            self._flush_partial()
        verdict = "PASS" if result.passed else "FAIL"
        logger.info(f"{cid} {verdict} ({time.perf_counter() - start:.2f} s)")
        return result

    def _flush_partial(self):
        """Write the criteria finished so far, in registry order, as report.json."""
        if self.storage is None:
            return
        done = [self.results[cid] for cid, _, _ in self.criteria if cid in self.results]
        report = self.report(done, time.perf_counter() - self._started)
        try:
            self.storage.write_json("report.json", report)
        except OSError as e:
            logger.warning(f"Could not flush partial report: {e}")

    async def run(self) -> List[CriterionResult]:
        """Run every criterion; results are returned in registry order."""
        if self._running:
            logger.warning("Suite is already running")
            return []
        self._running = True
        self._started = time.perf_counter()
        logger.info("Starting acceptance suite...")
        loop = asyncio.get_running_loop()
        # one child per registered id keeps seeds stable when running a subset
        children = dict(zip((c[0] for c in CRITERIA), np.random.SeedSequence(self.config.seed).spawn(len(CRITERIA))))
        try:
            results = await asyncio.gather(
                *(
                    loop.run_in_executor(None, self._run_one, cid, desc, fn, children[cid])
                    for cid, desc, fn in self.criteria
                )
            )
        finally:
            self._running = False
        return list(results)

    def run_sync(self) -> List[CriterionResult]:
        """Run the suite synchronously."""
        return asyncio.run(self.run())

    def report(self, results: List[CriterionResult], wallclock: float) -> Dict[str, Any]:
        return {
            "version": __version__,
            "config": self.config.to_dict(),
            "criteria": [r.to_dict() for r in results],
            "complete": len(results) == len(self.criteria),
            "wallclock_seconds": wallclock,
        }

    def get_status(self) -> Dict[str, Any]:
        """Get suite status."""
        return {
            "running": self._running,
            "total": len(self.criteria),
            "completed": len(self.results),
            "failed": sorted(cid for cid, r in self.results.items() if not r.passed),
        }


def run_suite(config: RunConfig, storage: Optional[ArtifactStore] = None, only: Optional[List[str]] = None):
    """Run the suite, write report.json and return (exit status, report)."""
    suite = AcceptanceSuite(config, storage, only)
    start = time.perf_counter()
    results = suite.run_sync()
    report = suite.report(results, time.perf_counter() - start)
    if storage is not None:
        storage.write_json("report.json", report)
    status = 0 if all(r.passed for r in results) else 1
    logger.info(f"Suite finished: {sum(r.passed for r in results)}/{len(results)} passed")
    return status, report
