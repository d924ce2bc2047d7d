"""Pseudo-spectral solver for a 2D moist tropical-atmosphere model.

Prognostic fields: barotropic velocity u (divergence-free), baroclinic
velocity v, temperature anomaly T and specific humidity q on a periodic
square. Precipitation switches on under supersaturation and updraft and
can be run with a mollified threshold (p_eps_eta, p_eps) or the exact
indicator threshold (limit).
"""

from tcm.spectral import Grid
from tcm.thermo import PhysConsts
from tcm.model import Forcing, State, SystemVariant
from tcm.stepping import StepPolicy, Trajectory, run, step

__all__ = [
    "Grid",
    "PhysConsts",
    "State",
    "SystemVariant",
    "Forcing",
    "StepPolicy",
    "Trajectory",
    "run",
    "step",
]
