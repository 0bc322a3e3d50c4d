# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
acon - volume-constrained Allen-Cahn-Ohta-Nakazawa dynamics for ternary
systems.

acon evolves two phase fields on a periodic box with a pseudo-spectral
semi-implicit scheme, keeping the volume of each phase fixed by a Lagrange
multiplier, a penalty, or a minimizing-movement step.
"""
from acon.chemistry import ModelParams
from acon.config import RunConfig, default_config, load_config, parse_config
from acon.constraint import (
    DEFAULT_GUARD,
    MultiplierGuard,
    lagrange_multiplier,
    project_constraint,
)
from acon.diagnostics import DiagnosticsReport, summarize
from acon.dynamics import (
    InnerSweep,
    Scheme,
    StepConfig,
    StepReport,
    Trajectory,
    run,
    step,
)
from acon.energy import (
    EnergyBreakdown,
    PhaseState,
    energy,
    variational_derivatives,
)
from acon.errors import AconError
from acon.grid import PeriodicGrid, ScalarField
from acon.init_conditions import InitKind, InitSpec, generate
from acon.snapshot import read_snapshot, write_snapshot

__all__ = [
    "PeriodicGrid",
    "ScalarField",
    "ModelParams",
    "PhaseState",
    "EnergyBreakdown",
    "energy",
    "variational_derivatives",
    "MultiplierGuard",
    "DEFAULT_GUARD",
    "lagrange_multiplier",
    "project_constraint",
    # Time stepping
    "Scheme",
    "InnerSweep",
    "StepConfig",
    "StepReport",
    "Trajectory",
    "step",
    "run",
    "DiagnosticsReport",
    "summarize",
    # Setting up runs
    "InitKind",
    "InitSpec",
    "generate",
    "RunConfig",
    "default_config",
    "parse_config",
    "load_config",
    "read_snapshot",
    "write_snapshot",
    "AconError",
]

__version_info__ = ("0", "1", "0")
__version__ = ".".join(__version_info__)
