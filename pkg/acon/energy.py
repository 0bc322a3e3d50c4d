# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
The Ohta-Nakazawa free energy and its variational derivatives.

For a state ``(phi_1, phi_2)`` the energy is the sum of

- the interfacial part
  ``(eps/2) * integral(|grad phi_1|^2 + |grad phi_2|^2
  + grad phi_1 . grad phi_2)``,
- the potential part ``(1 / 2eps) * integral(W_T(phi_1, phi_2))``,
- the long-range part
  ``sum_ij (gamma_ij / 2) * integral(grad Psi_i . grad Psi_j)``
  with ``Psi_i = (-Laplacian)^-1 (f(phi_i) - omega_i)``.

The long-range part is evaluated as ``<f(phi_i) - omega_i, Psi_j>``, which is
the same number since ``-Laplacian(Psi_j) = f(phi_j) - mean(f(phi_j))`` and
``Psi_i`` has zero mean.
"""
from typing import TYPE_CHECKING, NamedTuple

from acon._detail import check_phase_index
from acon.chemistry import f, f_prime, wt, wt_partial
from acon.grid import (
    ScalarField,
    _inner,
    _integrate,
    _inv_neg_laplacian,
    _laplacian,
)

if TYPE_CHECKING:
    from typing import Tuple

    from acon.chemistry import ModelParams
    from acon.grid import PeriodicGrid
    from acon.typedefs import FloatArray

__all__ = [
    "PhaseState",
    "EnergyBreakdown",
    "energy",
    "variational_derivative",
    "variational_derivatives",
    "penalty_energy",
    "step_functional",
]


class PhaseState:
    """
    A pair of phase fields together with the parameters they evolve under.

    The third species is implicit: its label is ``1 - phi1 - phi2``.

    :raises ValueError: If the two fields live on different grids.
    """

    __slots__ = ("phi1", "phi2", "params")

    def __init__(
        self, phi1: "ScalarField", phi2: "ScalarField", params: "ModelParams"
    ) -> None:
        if phi1.grid != phi2.grid:
            raise ValueError(
                f"Both phases must live on the same grid, got {phi1.grid} "
                f"and {phi2.grid}."
            )
        self.phi1 = phi1
        self.phi2 = phi2
        self.params = params

    @property
    def grid(self) -> "PeriodicGrid":
        return self.phi1.grid

    def field(self, i: "int") -> "ScalarField":
        """The field of phase ``i`` (1 or 2)."""
        return (self.phi1, self.phi2)[check_phase_index(i)]

    def with_fields(
        self, phi1: "ScalarField", phi2: "ScalarField"
    ) -> "PhaseState":
        """A new state with the same parameters and different fields."""
        return PhaseState(phi1, phi2, self.params)

    def __repr__(self) -> "str":
        return f"<PhaseState {self.phi1!r}, {self.phi2!r}>"


class EnergyBreakdown(NamedTuple):
    """The three parts of the free energy, and their sum."""

    interfacial: float
    potential: float
    longrange: float
    total: float


class _Terms(NamedTuple):
    # Everything both the energy and its derivative need, computed once.
    lap1: "FloatArray"
    lap2: "FloatArray"
    psi1: "FloatArray"
    psi2: "FloatArray"
    excess1: "FloatArray"
    excess2: "FloatArray"


def _terms(
    p1: "FloatArray",
    p2: "FloatArray",
    params: "ModelParams",
    grid: "PeriodicGrid",
) -> "_Terms":
    o1, o2 = params.omega
    excess1 = f(p1) - o1
    excess2 = f(p2) - o2
    return _Terms(
        lap1=_laplacian(p1, grid),
        lap2=_laplacian(p2, grid),
        psi1=_inv_neg_laplacian(excess1, grid),
        psi2=_inv_neg_laplacian(excess2, grid),
        excess1=excess1,
        excess2=excess2,
    )


def _energy_values(
    p1: "FloatArray",
    p2: "FloatArray",
    params: "ModelParams",
    grid: "PeriodicGrid",
    terms: "_Terms",
) -> "EnergyBreakdown":
    eps = params.epsilon
    g = params.gamma
    interfacial = (-0.5 * eps) * (
        _inner(p1, terms.lap1, grid)
        + _inner(p2, terms.lap2, grid)
        + _inner(p1, terms.lap2, grid)
    )
    potential = _integrate(wt(p1, p2), grid) / (2.0 * eps)
    cross = _inner(terms.excess1, terms.psi2, grid)
    longrange = 0.5 * (
        g[0, 0] * _inner(terms.excess1, terms.psi1, grid)
        + 2.0 * g[0, 1] * cross
        + g[1, 1] * _inner(terms.excess2, terms.psi2, grid)
    )
    return EnergyBreakdown(
        interfacial=interfacial,
        potential=potential,
        longrange=float(longrange),
        total=float(interfacial + potential + longrange),
    )


def _nonlinear_forces(
    p1: "FloatArray",
    p2: "FloatArray",
    params: "ModelParams",
    terms: "_Terms",
) -> "Tuple[FloatArray, FloatArray]":
    """
    The explicit part of the derivatives: well and long-range forces.
    """
    scale = 1.0 / (2.0 * params.epsilon)
    g = params.gamma
    n1 = scale * wt_partial(1, p1, p2) + (
        g[0, 0] * terms.psi1 + g[0, 1] * terms.psi2
    ) * f_prime(p1)
    n2 = scale * wt_partial(2, p1, p2) + (
        g[1, 0] * terms.psi1 + g[1, 1] * terms.psi2
    ) * f_prime(p2)
    return n1, n2


def _derivative_values(
    p1: "FloatArray",
    p2: "FloatArray",
    params: "ModelParams",
    terms: "_Terms",
) -> "Tuple[FloatArray, FloatArray]":
    eps = params.epsilon
    n1, n2 = _nonlinear_forces(p1, p2, params, terms)
    d1 = n1 - eps * terms.lap1 - (0.5 * eps) * terms.lap2
    d2 = n2 - eps * terms.lap2 - (0.5 * eps) * terms.lap1
    return d1, d2


def energy(state: "PhaseState") -> "EnergyBreakdown":
    """
    Evaluate the Ohta-Nakazawa free energy of a state.

    :param state: The state to evaluate.
    :type state: `PhaseState`

    :return: The interfacial, potential and long-range parts, and their sum.
             All parts are nonnegative.
    :rtype: `EnergyBreakdown`
    """
    p1, p2 = state.phi1.values, state.phi2.values
    grid = state.grid
    terms = _terms(p1, p2, state.params, grid)
    return _energy_values(p1, p2, state.params, grid, terms)


def variational_derivatives(
    state: "PhaseState",
) -> "Tuple[ScalarField, ScalarField]":
    """
    Both variational derivatives ``(dE/dphi_1, dE/dphi_2)`` of the energy.

    Cheaper than two calls to `variational_derivative`, since the nonlocal
    potentials are shared.
    """
    p1, p2 = state.phi1.values, state.phi2.values
    grid = state.grid
    terms = _terms(p1, p2, state.params, grid)
    d1, d2 = _derivative_values(p1, p2, state.params, terms)
    return ScalarField(grid, d1), ScalarField(grid, d2)


def variational_derivative(state: "PhaseState", i: "int") -> "ScalarField":
    """
    The variational derivative ``dE/dphi_i`` of the energy.

    With ``j`` the other phase, this is::

        -eps Lap(phi_i) - (eps/2) Lap(phi_j)
        + (1/2eps) (W'(phi_i) - W'(1 - phi_1 - phi_2))
        + sum_k gamma_ik Psi_k f'(phi_i)

    :param state: The state to differentiate at.
    :type state: `PhaseState`

    :param i: Which phase to differentiate with respect to, 1 or 2.
    :type i: int

    :raises ValueError: If ``i`` is neither 1 nor 2.
    """
    return variational_derivatives(state)[check_phase_index(i)]


def penalty_energy(state: "PhaseState") -> "float":
    """
    The energy whose L2 gradient flow is the penalty form of the dynamics.

    ``E + sum_i (M/2) * (integral(f(phi_i) - omega_i))^2``.
    """
    grid = state.grid
    m = state.params.penalty_m
    total = energy(state).total
    for phi, omega in zip((state.phi1, state.phi2), state.params.omega):
        violation = _integrate(f(phi.values) - omega, grid)
        total += 0.5 * m * violation * violation
    return total


def step_functional(
    state: "PhaseState", previous: "PhaseState", tau: "float"
) -> "float":
    """
    The minimizing-movement functional::

        F_tau(phi; phi*) = E(phi) + sum_i ||phi_i - phi*_i||^2 / 2tau

    :param state: Candidate state ``phi``.
    :param previous: The previous step ``phi*``.
    :param tau: Time step, positive.
    """
    if not tau > 0:
        raise ValueError(f"Time step must be positive, got {tau}.")
    grid = state.grid
    distance = 0.0
    for new, old in zip(
        (state.phi1, state.phi2), (previous.phi1, previous.phi2)
    ):
        new._same_grid(old)
        diff = new.values - old.values
        distance += _inner(diff, diff, grid)
    return energy(state).total + distance / (2.0 * tau)
