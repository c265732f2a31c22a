"""Gaussian interferometric power as a witness of non-Markovian dynamics in two-mode Gaussian states."""

from .channels import (
    ChannelSnapshot,
    DampingModel,
    NonCPWarning,
    QbmModel,
    apply_channel,
    damping_gamma,
    damping_x,
    evolve_damping,
    evolve_qbm,
    intermediate_map,
    qbm_delta,
    qbm_gamma,
    snapshot,
)
from .exceptions import NumericalError, QuadratureError, ValidationError
from .gaussian import (
    OMEGA,
    ProbeEnergy,
    StandardFormParams,
    SymplecticInvariants,
    bona_fide_check,
    make_mts,
    make_sts,
    mean_excitations,
    mts_at_energy,
    random_state,
    standard_form,
    sts_at_energy,
    symplectic_invariants,
)
from .gip import gip_general, gip_reduced
from .nonmarkov import (
    DivisibilityResult,
    MeasureResult,
    ProbeFamily,
    WitnessResult,
    divisibility_G,
    divisibility_ND,
    gip_trajectory,
    measure,
    witness,
    witness_batch,
)
from .quadrature import QuadResult, SignedIntervals, integrate_adaptive, positive_part_integral

__version__ = "0.1.0"
