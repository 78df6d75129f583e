"""
qkinetic services.

Lattice models, cumulant expansions, kinetic and Vlasov solvers, and the
mean-field experiment harness built on them.
"""

from .lattice_model import LatticeModel
from .cumulant_engine import CumulantEngine
from .gqke_solver import GQKESolver
from .vlasov_solver import VlasovSolver
from .meanfield_lab import MeanFieldLab
from .verification import VerificationSuite

__all__ = [
    "LatticeModel",
    "CumulantEngine",
    "GQKESolver",
    "VlasovSolver",
    "MeanFieldLab",
    "VerificationSuite",
]
