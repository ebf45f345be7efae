"""
Command-line interface for cmcurves.
"""

import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .census import census_payload, singularity_census
from .config import RunConfig, parse_complex
from .dynamics import integrate, random_phase_point, trajectory_frame
from .elliptic import lattice_invariants, period_identities
from .errors import CMCurvesError, ConfigurationError
from .monodromy import LiftedLoop
from .periods import DifferentialOnCurve, degree_check, period_payload, phi_period
from .spectral import CurveSpec, curve_samples_frame, fit_H, leading_laurent
from .storage import ArtifactStore, get_storage_backend
from .suite import PERIOD_LOOPS, run_suite
from .torus import (
    base_case_check,
    holomorphic_combination,
    level_set_frame,
    torus_real_basis,
    torus_zeros,
    trace_level_set,
)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmcurves",
        description="Elliptic Calogero-Moser systems, their spectral curves and period differentials",
    )
    parser.add_argument("command", choices=["simulate", "spectral", "periods", "torus", "verify"])
    parser.add_argument("--config", type=str, help="Configuration file (key = value, or YAML)")
    parser.add_argument("--tau", type=str, help="Modular parameter as RE,IM")
    parser.add_argument("--n", type=int, help="Number of particles / degree of the curve")
    parser.add_argument("--dt", type=float, help="Integrator step")
    parser.add_argument("--t-end", dest="t_end", type=float, help="Integration horizon")
    parser.add_argument("--seed", type=int, help="Seed of the random generator (CM_SEED overrides)")
    parser.add_argument("--tol", type=float, help="Series and quadrature tolerance")
    parser.add_argument("--out", dest="output_dir", type=str, help="Output directory")
    parser.add_argument("--format", choices=["json", "csv"], help="Table format")
    parser.add_argument("--log-level", default="INFO", help="Logging level (default: INFO)")
    return parser


def load_config(args: argparse.Namespace, environ: Optional[Dict[str, str]] = None) -> RunConfig:
    """Defaults < config file < flags < CM_SEED."""
    env = os.environ if environ is None else environ
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    try:
        tau = parse_complex(args.tau) if args.tau else None
    except ValueError as e:
        raise ConfigurationError(str(e)) from e
    flags = {
        "tau": tau,
        "n": args.n,
        "dt": args.dt,
        "t_end": args.t_end,
        "seed": args.seed,
        "tol": args.tol,
        "output_dir": args.output_dir,
        "format": args.format,
    }
    if env.get("CM_SEED"):
        flags["seed"] = env["CM_SEED"]
    return config.merged(flags)


def _write_table(store: ArtifactStore, config: RunConfig, name: str, frame: pd.DataFrame) -> str:
    if config.format == "csv":
        return store.write_table(f"{name}.csv", frame)
    return store.write_json(f"{name}.json", frame.to_dict(orient="records"))


def _data(config: RunConfig):
    return lattice_invariants(config.tau, trunc=config.kernel.trunc, tol=config.tol, pole_eps=config.kernel.pole_eps)


def cmd_simulate(config: RunConfig, store: ArtifactStore, rng: np.random.Generator) -> Dict[str, Any]:
    data = _data(config)
    s0 = random_phase_point(config.n, data, rng)
    z = 0.37 + 0.29 * data.tau
    traj = integrate(s0, config.t_end, config.dt, config.dynamics.max_energy_drift, lax_z=z)
    path = _write_table(store, config, "trajectory", trajectory_frame(traj, z))
    summary = {"n": config.n, "samples": len(traj.times), "stats": traj.stats, "trajectory": path}
    store.write_json("simulate.json", summary)
    return summary


def cmd_spectral(config: RunConfig, store: ArtifactStore, rng: np.random.Generator) -> Dict[str, Any]:
    data = _data(config)
    curve = CurveSpec.from_state(random_phase_point(config.n, data, rng))
    grid = (np.arange(8) + 0.5) / 8
    zs = (grid[:, None] + grid[None, :] * data.tau).ravel()
    samples = _write_table(store, config, "curve_samples", curve_samples_frame(curve, zs))
    laurent = leading_laurent(curve)
    fit = fit_H(curve, rng=rng)
    summary = {
        "n": config.n,
        "laurent": [{"a": a, "h": h} for a, h in laurent],
        "fit": {"actions": fit.actions, "residual": fit.residual, "condition": fit.condition},
        "curve_samples": samples,
    }
    if config.n <= 5:
        report = singularity_census(
            fit.curve(data), config.curve.eps_sing, config.curve.cubic_eps, config.curve.census_grid
        )
        summary["census"] = store.write_json("census.json", census_payload(report))
    store.write_json("spectral.json", summary)
    return summary


def cmd_periods(config: RunConfig, store: ArtifactStore, rng: np.random.Generator) -> Dict[str, Any]:
    data = _data(config)
    curve = fit_H(CurveSpec.from_state(random_phase_point(config.n, data, rng)), rng=rng).curve(data)
    base = 0.31 + 0.27 * data.tau
    periods = []
    for i, (a, b) in enumerate(PERIOD_LOOPS):
        loop = LiftedLoop(a, b, base, sheet=i % curve.n, steps=config.curve.track_steps)
        for which in ("phi1", "phi2"):
            periods.append(period_payload(phi_period(DifferentialOnCurve(curve, which), loop)))
    summary = {"n": curve.n, "periods": periods, "identities": period_identities(data)}
    if curve.n <= 3:
        summary["degree"] = degree_check(curve, config.curve.track_steps)
    store.write_json("periods.json", summary)
    return summary


def cmd_torus(config: RunConfig, store: ArtifactStore, rng: np.random.Generator) -> Dict[str, Any]:
    data = _data(config)
    psi1, psi2 = torus_real_basis(data)
    verdict = base_case_check(data, (psi1, psi2))
    start = 0.37 + 0.29 * data.tau
    leaf = trace_level_set(psi1, start, 1.0)
    summary = {
        "tau": data.tau,
        "b1": psi1.b,
        "b2": psi2.b,
        "periods": {"psi1": list(psi1.periods()), "psi2": list(psi2.periods())},
        "zeros": {"psi1": list(torus_zeros(psi1).zeros), "psi2": list(torus_zeros(psi2).zeros)},
        "holomorphic_combination": holomorphic_combination(psi1, psi2),
        "base_case": {"pass": verdict.passed, "min_distance": verdict.min_distance, "level_gap": verdict.level_gap},
        "level_set": {
            "drift": leaf.drift,
            "monotone": leaf.monotone,
            "closed_through_pole": leaf.closed_through_pole,
            "table": _write_table(store, config, "level_set", level_set_frame(leaf)),
        },
    }
    store.write_json("torus.json", summary)
    return summary


COMMANDS = {
    "simulate": cmd_simulate,
    "spectral": cmd_spectral,
    "periods": cmd_periods,
    "torus": cmd_torus,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )

    try:
        config = load_config(args)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    logger.info(f"Running {args.command} with tau={config.tau}, N={config.n}, seed={config.seed}")
    store = get_storage_backend("file", config.output_dir)

    if args.command == "verify":
        status, _ = run_suite(config, store)
        return status

    try:
        COMMANDS[args.command](config, store, np.random.default_rng(config.seed))
    except CMCurvesError as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        return EXIT_FAILURE
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
