"""Numerics for a directed copolymer near a selective solvent interface.

The package covers the full pipeline: letter-disorder models and their
cumulant machinery (:mod:`copoly.disorder`), excursion-length laws and
exponential tilting (:mod:`copoly.excursions`), log-domain renewal dynamic
programming for quenched and annealed partition sums
(:mod:`copoly.partition`), closed-form annealed theory and the finite word
Gibbs variational principle (:mod:`copoly.annealed`), computable upper and
lower bounds on the localization transition (:mod:`copoly.bounds`),
weak-interaction slope constants (:mod:`copoly.slope`), exact path sampling
and interface-return diagnostics (:mod:`copoly.paths`), and a batch CLI
(:mod:`copoly.cli`).
"""

from copoly.disorder import DisorderModel, sample_disorder
from copoly.excursions import ExcursionLaw, TiltedLaw, power_law, simple_random_walk_law, tilt
from copoly.partition import FreeEnergyEstimate, LogDpTable, ModelParams

__all__ = [
    "DisorderModel",
    "ExcursionLaw",
    "FreeEnergyEstimate",
    "LogDpTable",
    "ModelParams",
    "TiltedLaw",
    "power_law",
    "sample_disorder",
    "simple_random_walk_law",
    "tilt",
]

__version__ = "0.1.0"
