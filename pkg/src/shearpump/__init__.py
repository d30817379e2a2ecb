"""Charge transport driven by shear deformations of Hückel rings and helical chains."""

from .bands import (
    BandStructure,
    ChernRecord,
    axial_curvature_integral,
    band_structure,
    chern_number,
    chern_numbers,
    gap_opening_order,
    gap_opening_slope,
    pump_charge,
    pump_rule,
    table_chern,
    table_order,
)
from .berry import (
    curvature_sum_over_states,
    curvature_trace,
    curvature_traces,
    longuet_higgins_phase,
    persistent_response,
    transport_cycle,
)
from .errors import *  # noqa: F401,F403
from .evolution import (
    EvolutionResult,
    Schedule,
    adiabatic_generator,
    evolve,
    operator_identity_residual,
    transported_charge_dynamical,
)
from .jahnteller import JTParameters, MinimizerReport, ampere_residual, jt_cycle_charge, minimize, total_energy
from .loop import DeformationLoop
from .model import HoppingLaw, NecklaceModel, NecklaceSpec, TrimerModel, TrimerShape, trimer_hamiltonian
from .spectral import EigenSystem, Projection, band_projection, eigensystem, spectral_gap, trimer_crossing_test
from .twolevel import (
    CrossingCoefficients,
    TwoLevelModel,
    circle_charge,
    leading_curvature,
    necklace_coefficients,
    trimer_coefficients,
)

__version__ = "0.1.0"
