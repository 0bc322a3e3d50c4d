# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
Runtime checks of the properties the ACON flow is known to have.

These back both the test suite and the ``acon check`` subcommand. The H1
bounds only hold in the normalised setting ``eps = 1``, ``|T| = 1``, and
refuse to run anywhere else.
"""
from typing import TYPE_CHECKING, NamedTuple
from itertools import combinations
from math import sqrt

import numpy as np

from acon.chemistry import fprime_mass, volume_residual
from acon.constraint import DEFAULT_GUARD, constrained_force
from acon.energy import PhaseState, energy, variational_derivatives
from acon.errors import ConfigMismatch, ConstraintViolation
from acon.grid import (
    ScalarField,
    dirichlet_form,
    h1_norm_sq,
    inner,
    inv_neg_laplacian,
    l2_norm,
)

if TYPE_CHECKING:
    from typing import Callable, Iterator, Optional, Tuple

    from acon.constraint import MultiplierGuard
    from acon.dynamics import Trajectory
    from acon.typedefs import Pair

    Derivative = Callable[[PhaseState], Tuple[ScalarField, ScalarField]]

__all__ = [
    "CheckResult",
    "DiagnosticsReport",
    "check_h1_bound",
    "check_hls_identity",
    "dissipation_audit",
    "dissipation_rate",
    "gradient_check",
    "uniform_h1_audit",
    "time_regularity_constant",
    "check_time_regularity",
    "summarize",
]

#: Tolerance on ``|eps - 1|`` and ``||T| - 1|`` for the normalised checks.
NORMALISATION_TOL = 1e-12
#: Largest volume residual a state may have for the H1 bound to apply.
CONSTRAINT_TOL = 1e-10
#: Slack allowed on the H1 bound.
H1_SLACK = 1e-9
#: Largest energy increase `summarize` still counts as monotone.
MONOTONE_TOL = 1e-9


class CheckResult(NamedTuple):
    """Both sides of an inequality check, and whether it holds."""

    lhs: float
    rhs: float
    ok: bool


class DiagnosticsReport(NamedTuple):
    """
    A summary of a trajectory.

    ``h1_bound_satisfied`` is ``None`` when the run is not in the
    normalised setting and the bound doesn't apply.
    """

    h1_bound_satisfied: "Optional[bool]"
    min_fprime_mass: float
    energy_monotone: bool
    max_volume_residual: float
    field_range: "Tuple[Pair, Pair]"


def _require_normalised(state: "PhaseState") -> None:
    eps = state.params.epsilon
    volume = state.grid.total_volume
    if (
        abs(eps - 1.0) > NORMALISATION_TOL
        or abs(volume - 1.0) > NORMALISATION_TOL
    ):
        raise ConfigMismatch(
            f"The H1 bound needs eps = 1 and a box of volume 1, got "
            f"eps={eps} and volume {volume}."
        )


def _h1_lhs(state: "PhaseState") -> "float":
    return max(h1_norm_sq(state.phi1), h1_norm_sq(state.phi2))


def check_h1_bound(state: "PhaseState") -> "CheckResult":
    """
    Check ``max_i ||phi_i||_{H1}^2 <= 4 E(phi) + 2``.

    :param state: A state on both volume constraints.
    :type state: `PhaseState`

    :return: ``(max_i ||phi_i||_{H1}^2, 4E + 2, lhs <= rhs + 1e-9)``
    :rtype: `CheckResult`

    :raises ConfigMismatch: Outside the normalised setting.
    :raises ConstraintViolation: If a volume residual exceeds ``1e-10``.
    """
    _require_normalised(state)
    for i, omega in enumerate(state.params.omega, start=1):
        r = volume_residual(state.field(i), omega)
        if abs(r) > CONSTRAINT_TOL:
            raise ConstraintViolation(
                f"The H1 bound needs a state on the constraints, but phase "
                f"{i} is off by {r:.3e}."
            )
    lhs = _h1_lhs(state)
    rhs = 4.0 * energy(state).total + 2.0
    return CheckResult(lhs, rhs, lhs <= rhs + H1_SLACK)


def check_hls_identity(w: "ScalarField") -> "Tuple[float, float]":
    """
    The two sides of ``||grad Psi||^2 = <w, Psi>``, ``Psi = (-Lap)^-1 w``.

    The mean of ``w`` is removed by the inverse Laplacian, so any field is
    accepted. The left side goes through the Fourier symbol of ``Psi``, the
    right side is a plain grid sum; they agree to round-off.
    """
    psi = inv_neg_laplacian(w)
    return dirichlet_form(psi, psi), inner(w, psi)


def dissipation_audit(traj: "Trajectory") -> "float":
    """
    The largest energy increase between consecutive states of a run.

    0 for a run whose energy never goes up, including an empty one.
    """
    energies = traj.energies
    jumps = (b - a for a, b in zip(energies, energies[1:]))
    return max(0.0, max(jumps, default=0.0))


def dissipation_rate(
    state: "PhaseState", guard: "MultiplierGuard" = DEFAULT_GUARD
) -> "float":
    """
    ``sum_i ||-dE/dphi_i - lambda_i f'(phi_i)||^2``.

    The instantaneous rate ``-dE/dt`` at which the constrained flow
    dissipates energy.
    """
    return sum(
        l2_norm(constrained_force(state, i, guard)) ** 2 for i in (1, 2)
    )


def gradient_check(
    state: "PhaseState",
    derivative: "Derivative" = variational_derivatives,
    directions: "int" = 20,
    h: "float" = 1e-5,
    seed: "int" = 0,
) -> "float":
    """
    Compare a variational derivative with finite differences of the energy.

    For random directions ``v = (v_1, v_2)``, compares
    ``<dE/dphi_1, v_1> + <dE/dphi_2, v_2>`` with the central difference
    ``(E(phi + h v) - E(phi - h v)) / 2h``.

    :param state: Where to check.
    :type state: `PhaseState`

    :param derivative: The derivative to check; defaults to
                       `acon.energy.variational_derivatives`.
    :type derivative: Callable[[PhaseState], Tuple[ScalarField, ScalarField]]

    :param directions: Number of random directions.
    :type directions: int

    :param h: Finite difference step.
    :type h: float

    :param seed: Seed for the directions.
    :type seed: int

    :return: The largest relative discrepancy over all directions.
    :rtype: float
    """
    grid = state.grid
    rng = np.random.Generator(np.random.Philox(seed))
    d1, d2 = derivative(state)
    worst = 0.0
    for _ in range(directions):
        v1 = ScalarField(grid, rng.standard_normal(grid.points))
        v2 = ScalarField(grid, rng.standard_normal(grid.points))
        plus = state.with_fields(state.phi1 + h * v1, state.phi2 + h * v2)
        minus = state.with_fields(state.phi1 - h * v1, state.phi2 - h * v2)
        numeric = (energy(plus).total - energy(minus).total) / (2.0 * h)
        analytic = inner(d1, v1) + inner(d2, v2)
        scale = max(abs(numeric), abs(analytic))
        if scale > 0:
            worst = max(worst, abs(numeric - analytic) / scale)
    return worst


def _stored(traj: "Trajectory") -> "Iterator[Tuple[int, PhaseState]]":
    return iter(sorted(traj.snapshots.items()))


def uniform_h1_audit(traj: "Trajectory") -> "CheckResult":
    """
    Check ``max_i ||phi_i(t)||_{H1}^2 <= 4 E(phi(0)) + 2`` at every stored
    state of a run.

    :raises ConfigMismatch: Outside the normalised setting.
    """
    _require_normalised(traj.initial)
    lhs = max(_h1_lhs(state) for _, state in _stored(traj))
    rhs = 4.0 * traj.energies[0] + 2.0
    return CheckResult(lhs, rhs, lhs <= rhs + H1_SLACK)


def _difference(a: "PhaseState", b: "PhaseState") -> "float":
    return max(l2_norm(a.phi1 - b.phi1), l2_norm(a.phi2 - b.phi2))


def _ratios(traj: "Trajectory") -> "Iterator[float]":
    tau = traj.tau
    for (j, early), (k, late) in combinations(_stored(traj), 2):
        yield _difference(early, late) / sqrt((k - j) * tau + tau)


def time_regularity_constant(traj: "Trajectory") -> "float":
    """
    The smallest ``C`` with
    ``max_i ||phi_i(t) - phi_i(s)||_2 <= C sqrt(t - s + tau)`` over all pairs
    of stored states.
    """
    return max(_ratios(traj), default=0.0)


def check_time_regularity(
    traj: "Trajectory", constant: "float", factor: "float" = 1.1
) -> "CheckResult":
    """
    Check the time-difference estimate with a given constant.

    :return: ``(time_regularity_constant(traj), factor * constant, ok)``
    """
    observed = time_regularity_constant(traj)
    bound = factor * constant
    return CheckResult(observed, bound, observed <= bound)


def summarize(traj: "Trajectory") -> "DiagnosticsReport":
    """Collect the diagnostics of a run into one report."""
    states = [state for _, state in _stored(traj)]
    masses = [fprime_mass(s.field(i)) for s in states for i in (1, 2)]

    residuals = [
        abs(volume_residual(s.field(i), s.params.omega[i - 1]))
        for s in states
        for i in (1, 2)
    ]
    residuals.extend(
        abs(r) for rep in traj.reports for r in rep.volume_residuals
    )

    ranges = tuple(
        (
            min(float(s.field(i).values.min()) for s in states),
            max(float(s.field(i).values.max()) for s in states),
        )
        for i in (1, 2)
    )

    try:
        h1: "Optional[bool]" = uniform_h1_audit(traj).ok
    except ConfigMismatch:
        h1 = None

    return DiagnosticsReport(
        h1_bound_satisfied=h1,
        min_fprime_mass=min(masses),
        energy_monotone=dissipation_audit(traj) <= MONOTONE_TOL,
        max_volume_residual=max(residuals),
        field_range=ranges,  # type: ignore[arg-type]
    )
