"""bdfit: exact simulation and statistical verification of a fitness
birth-death model of virus type evolution.

Subpackages:
    engine         exact event-driven simulator
    regen          excursion / regeneration detection at returns to one type
    renewal        numerical renewal-equation solver and limit laws
    coupling       ordered-set lemma and the shared-randomness coupling
    stats          empirical distributions, GoF tests, closed-form oracles
    supercritical  fast exact-law samplers for the lam > 1 growth regime
    cli, verify    command line front end and verification pipelines
"""

__version__ = "0.1.0"

from .engine import (  # noqa: F401
    EventKind,
    EventRecord,
    ModelParams,
    Observation,
    PopulationState,
    SimulationResult,
    TypeRecord,
    simulate,
)
