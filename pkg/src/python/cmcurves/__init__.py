"""
cmcurves: elliptic Calogero-Moser systems and their spectral curves.

Weierstrass functions on the lattice Z + tau Z, the Calogero-Moser flow and
its Lax pair, spectral curves with their monodromy and singularities, and the
integer- and real-period differentials living on them.
"""

__version__ = "0.3.0"

from .config import RunConfig
from .dynamics import PhasePoint, Trajectory, integrate, lax_pair
from .elliptic import EllipticData, lattice_invariants, sigma, wp, wp_prime, zeta
from .spectral import CurveSpec, char_poly, curve_from_H, fit_H
from .suite import AcceptanceSuite, run_suite

__all__ = [
    "AcceptanceSuite",
    "CurveSpec",
    "EllipticData",
    "PhasePoint",
    "RunConfig",
    "Trajectory",
    "char_poly",
    "curve_from_H",
    "fit_H",
    "integrate",
    "lattice_invariants",
    "lax_pair",
    "run_suite",
    "sigma",
    "wp",
    "wp_prime",
    "zeta",
]
