# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
The volume constraints ``mean(f(phi_i)) = omega_i`` and how to keep them.

Three mechanisms live here:

- exact Lagrange multipliers, which make the driving force of each phase
  L2-orthogonal to the constraint gradient ``f'(phi_i)``;
- the penalty force ``M * integral(f(phi_i) - omega_i) * f'(phi_i)``;
- a projection ``phi -> phi + c * f'(phi)`` that restores a constraint
  exactly after a discrete step.

Multipliers and projections divide by ``integral(f'(phi_i)^2)``, which
vanishes when a phase is uniformly 0 or 1. A `MultiplierGuard` sets the
floor below which that is reported as a `DegenerateConstraint` instead of
producing garbage.
"""
from typing import TYPE_CHECKING
from math import isfinite
import logging

from scipy.optimize import brentq, root_scalar

from acon._detail import check_phase_index
from acon.chemistry import f, f_prime
from acon.energy import variational_derivatives
from acon.errors import DegenerateConstraint, ProjectionFailed
from acon.grid import ScalarField, _inner, _integrate

if TYPE_CHECKING:
    from acon.energy import PhaseState
    from acon.grid import PeriodicGrid
    from acon.typedefs import FloatArray

__all__ = [
    "MultiplierGuard",
    "DEFAULT_GUARD",
    "PROJECTION_TOL",
    "lagrange_multiplier",
    "constrained_force",
    "penalty_force",
    "projection_shift",
    "project_constraint",
    "discrete_multiplier",
]

log = logging.getLogger(__name__)

#: Largest ``|mean(f(phi)) - omega|`` a projected field may be left with.
PROJECTION_TOL = 1e-12

#: Search bracket for the projection shift when Newton's method fails.
_BRACKET = (-0.5, 0.5)
_MAX_ITERS = 100


class MultiplierGuard:
    """
    Floor for ``integral(f'(phi_i)^2)``, below which a phase counts as
    degenerate.

    :param beta_min: The floor, positive.
    :type beta_min: float

    :raises ValueError: If ``beta_min`` isn't positive.
    """

    __slots__ = ("beta_min",)

    def __init__(self, beta_min: "float" = 1e-8) -> None:
        beta_min = float(beta_min)
        if not (beta_min > 0 and isfinite(beta_min)):
            raise ValueError(
                f"Guard floor beta_min must be positive, got {beta_min}."
            )
        self.beta_min = beta_min

    def check(self, mass: "float", what: "str") -> None:
        """
        Raise `DegenerateConstraint` if ``mass`` is below the floor.

        :param what: Description of the phase, used in the error message.
        """
        if mass < self.beta_min:
            raise DegenerateConstraint(
                f"integral(f'(phi)^2) of {what} is {mass:.3e}, below the "
                f"guard floor {self.beta_min:.3e}; the phase is numerically "
                f"uniform at 0 or 1."
            )

    def __eq__(self, other: "object") -> "bool":
        if not isinstance(other, MultiplierGuard):
            return NotImplemented
        return self.beta_min == other.beta_min

    def __hash__(self) -> "int":
        return hash(self.beta_min)

    def __repr__(self) -> "str":
        return f"MultiplierGuard(beta_min={self.beta_min!r})"


DEFAULT_GUARD = MultiplierGuard()


# Array-level kernels, shared with acon.dynamics.


def _multiplier(
    force: "FloatArray",
    fp: "FloatArray",
    grid: "PeriodicGrid",
    guard: "MultiplierGuard",
    what: "str",
) -> "float":
    # The scalar making force - result * fp orthogonal to fp.
    mass = _inner(fp, fp, grid)
    guard.check(mass, what)
    return _inner(force, fp, grid) / mass


def _residual(
    values: "FloatArray", omega: "float", grid: "PeriodicGrid"
) -> "float":
    return _integrate(f(values), grid) / grid.total_volume - omega


def _shift(
    values: "FloatArray",
    omega: "float",
    grid: "PeriodicGrid",
    guard: "MultiplierGuard",
    tol: "float",
) -> "float":
    fp = f_prime(values)
    guard.check(_inner(fp, fp, grid), "the field to project")
    if abs(_residual(values, omega, grid)) <= tol:
        return 0.0

    def residual(c: "float") -> "float":
        return _residual(values + c * fp, omega, grid)

    def slope(c: "float") -> "float":
        return (
            _inner(f_prime(values + c * fp), fp, grid) / grid.total_volume
        )

    try:
        newton = root_scalar(
            residual,
            x0=0.0,
            fprime=slope,
            method="newton",
            xtol=1e-15,
            maxiter=_MAX_ITERS,
        )
    except (ArithmeticError, RuntimeError) as e:
        log.debug("Newton projection failed (%s), bisecting", e)
    else:
        c = float(newton.root)
        if (
            newton.converged
            and _BRACKET[0] <= c <= _BRACKET[1]
            and abs(residual(c)) <= tol
        ):
            return c
        log.debug(
            "Newton projection did not settle (c=%r), bisecting", c
        )

    lo, hi = _BRACKET
    if residual(lo) * residual(hi) > 0:
        raise ProjectionFailed(
            f"No shift c in [{lo}, {hi}] brings mean(f(phi + c f'(phi))) to "
            f"{omega}."
        )
    try:
        c = float(
            brentq(residual, lo, hi, xtol=1e-16, maxiter=_MAX_ITERS)
        )
    except RuntimeError as e:
        raise ProjectionFailed(f"Projection bisection failed: {e}") from e
    if abs(residual(c)) > tol:
        raise ProjectionFailed(
            f"Projection stalled at residual {residual(c):.3e} > {tol:.1e}."
        )
    return c


def _project(
    values: "FloatArray",
    omega: "float",
    grid: "PeriodicGrid",
    guard: "MultiplierGuard",
    tol: "float" = PROJECTION_TOL,
) -> "FloatArray":
    c = _shift(values, omega, grid, guard, tol)
    if c == 0.0:
        return values
    log.debug("Projection shift %.3e towards omega=%r", c, omega)
    return values + c * f_prime(values)  # type: ignore[no-any-return]


def lagrange_multiplier(
    state: "PhaseState", i: "int", guard: "MultiplierGuard" = DEFAULT_GUARD
) -> "float":
    """
    The Lagrange multiplier of phase ``i``.

    ``lambda_i = <-dE/dphi_i, f'(phi_i)> / integral(f'(phi_i)^2)``, the
    unique scalar for which the constrained force
    ``-dE/dphi_i - lambda_i f'(phi_i)`` is L2-orthogonal to ``f'(phi_i)``.

    :param state: The state to evaluate at.
    :type state: `PhaseState`

    :param i: The phase, 1 or 2.
    :type i: int

    :param guard: Floor for the denominator.
    :type guard: `MultiplierGuard`

    :raises DegenerateConstraint: If ``integral(f'(phi_i)^2)`` is below
                                  ``guard.beta_min``.
    """
    index = check_phase_index(i)
    derivative = variational_derivatives(state)[index]
    phi = state.field(i)
    return _multiplier(
        -derivative.values, f_prime(phi.values), phi.grid, guard, f"phase {i}"
    )


def constrained_force(
    state: "PhaseState", i: "int", guard: "MultiplierGuard" = DEFAULT_GUARD
) -> "ScalarField":
    """
    The right-hand side ``-dE/dphi_i - lambda_i f'(phi_i)`` of the flow.
    """
    index = check_phase_index(i)
    derivative = variational_derivatives(state)[index]
    phi = state.field(i)
    fp = f_prime(phi.values)
    lam = _multiplier(-derivative.values, fp, phi.grid, guard, f"phase {i}")
    return ScalarField(phi.grid, -derivative.values - lam * fp)


def penalty_force(state: "PhaseState", i: "int") -> "ScalarField":
    """
    The penalty force ``M * integral(f(phi_i) - omega_i) * f'(phi_i)``.

    It replaces ``lambda_i f'(phi_i)`` in the penalty form of the dynamics
    and needs no guard: there is no denominator.
    """
    phi = state.field(i)
    omega = state.params.omega[check_phase_index(i)]
    violation = _integrate(f(phi.values) - omega, phi.grid)
    return ScalarField(
        phi.grid, (state.params.penalty_m * violation) * f_prime(phi.values)
    )


def projection_shift(
    phi: "ScalarField",
    omega_i: "float",
    guard: "MultiplierGuard" = DEFAULT_GUARD,
    tol: "float" = PROJECTION_TOL,
) -> "float":
    """
    The scalar ``c`` with ``mean(f(phi + c f'(phi))) = omega_i``.

    Found by Newton's method from ``c = 0``, falling back to bisection on
    ``[-0.5, 0.5]``. A field already within ``tol`` of the target gives
    exactly 0.

    :raises DegenerateConstraint: If ``integral(f'(phi)^2)`` is below the
                                  guard floor.
    :raises ProjectionFailed: If no root is found in the bracket.
    """
    return _shift(phi.values, omega_i, phi.grid, guard, tol)


def project_constraint(
    phi: "ScalarField",
    omega_i: "float",
    guard: "MultiplierGuard" = DEFAULT_GUARD,
    tol: "float" = PROJECTION_TOL,
) -> "ScalarField":
    """
    Move ``phi`` along ``f'(phi)`` until ``mean(f(phi)) = omega_i``.

    The correction direction is the constraint gradient, the same direction
    the multiplier term acts in. Projecting a projected field returns it
    unchanged.

    :param phi: The field to correct.
    :type phi: `ScalarField`

    :param omega_i: Target volume fraction.
    :type omega_i: float

    :param guard: Floor for ``integral(f'(phi)^2)``.
    :type guard: `MultiplierGuard`

    :param tol: Accepted ``|mean(f(phi)) - omega_i|`` after projection.
    :type tol: float

    :return: The projected field, or ``phi`` itself if it already satisfies
             the constraint.
    :rtype: `ScalarField`

    :raises DegenerateConstraint: If ``integral(f'(phi)^2)`` is below the
                                  guard floor.
    :raises ProjectionFailed: If no shift in ``[-0.5, 0.5]`` restores the
                              constraint.
    """
    values = _project(phi.values, omega_i, phi.grid, guard, tol)
    if values is phi.values:
        return phi
    return ScalarField(phi.grid, values)


def discrete_multiplier(
    new: "PhaseState",
    old: "PhaseState",
    i: "int",
    tau: "float",
    guard: "MultiplierGuard" = DEFAULT_GUARD,
) -> "float":
    """
    The multiplier of one minimizing-movement step.

    Like `lagrange_multiplier` at ``new``, but the force also contains the
    time difference: ``-(new_i - old_i)/tau - dE/dphi_i(new)``, tested
    against ``f'(new_i)``.

    :raises ValueError: If ``tau`` isn't positive.
    """
    if not tau > 0:
        raise ValueError(f"Time step must be positive, got {tau}.")
    index = check_phase_index(i)
    derivative = variational_derivatives(new)[index]
    phi_new, phi_old = new.field(i), old.field(i)
    phi_new._same_grid(phi_old)
    force = -(phi_new.values - phi_old.values) / tau - derivative.values
    return _multiplier(
        force, f_prime(phi_new.values), phi_new.grid, guard, f"phase {i}"
    )
