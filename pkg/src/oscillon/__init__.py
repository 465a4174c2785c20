"""Pseudo-spectral simulation of ``u_tt + H u_t - e^(-2Ht) u_xx + V'(u) = 0``
on the periodic unit interval, with exact checks of polynomial growth bounds
and numerical checks of the energy estimates they imply."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .potential import (  # noqa: F401
    GrowthCertificate,
    Potential,
    RateConstants,
    builtin,
    derive_constants,
    evaluate,
    verify_growth,
)
from .spectral import Grid, State, energy_X  # noqa: F401
from .dynamics import StepperConfig, apply_process, evolve, linear_propagate_exact, step  # noqa: F401
