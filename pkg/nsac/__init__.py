"""
nsac
~~~~
Structured grid simulator for the non-isothermal Navier-Stokes/Allen-Cahn phase-field system,
with energy and entropy diagnostics and sharp-interface benchmarks.
:license: MIT
"""

from .config import RunConfig, parse_config  # noqa: F401
from .const import __version__  # noqa: F401
from .constitutive import Constitutive, check_constitutive_properties  # noqa: F401
from .grid import GridSpec, ScalarField, VectorField  # noqa: F401
from .model import LatentHeatSpec, ModelParams, PhiSplitting, StepConfig  # noqa: F401
from .runner import run  # noqa: F401
from .timestepper import SimState, Stepper, coupled_step, stable_dt  # noqa: F401
