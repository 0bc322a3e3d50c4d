# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
Initial states on the volume constraints.

Every generator builds raw fields around base levels and then projects
each phase onto its constraint, so the result always satisfies
``|mean(f(phi_i)) - omega_i| <= 1e-12``.

Random draws come from ``numpy.random.Generator(numpy.random.Philox(seed))``:
Philox-4x64 is counter-based and platform independent, so a seed
reproduces the same state everywhere.
"""
from typing import TYPE_CHECKING, Optional
from dataclasses import dataclass
from enum import Enum
from math import isfinite, pi

import numpy as np

from acon.chemistry import omega_root
from acon.constraint import DEFAULT_GUARD, project_constraint
from acon.energy import PhaseState
from acon.grid import ScalarField

if TYPE_CHECKING:
    from typing import Tuple

    from acon.chemistry import ModelParams
    from acon.constraint import MultiplierGuard
    from acon.grid import PeriodicGrid
    from acon.typedefs import FloatArray, Pair

__all__ = ["InitKind", "InitSpec", "generate", "make_rng"]

_SEED_LIMIT = 2 ** 64


class InitKind(Enum):
    """Shapes of initial data."""

    RANDOM_UNIFORM = "random"
    LAMELLAR = "lamellar"
    SPOTS = "spots"
    CONSTANT_SYMMETRIC = "constant"

    @classmethod
    def from_name(cls, name: "str") -> "InitKind":
        """
        Look a kind up by value or member name, case-insensitively.

        :raises ValueError: If no kind goes by ``name``.
        """
        key = name.strip().lower()
        for kind in cls:
            if key in (kind.value, kind.name.lower()):
                return kind
        choices = ", ".join(k.value for k in cls)
        raise ValueError(
            f"Unknown initial condition {name!r}; expected one of {choices}."
        )


@dataclass(frozen=True)
class InitSpec:
    """
    How to build an initial state.

    :param kind: The shape of the data.
    :param seed: Seed for random draws, in ``[0, 2**64)``.
    :param amplitude: Size of the perturbation around the base levels.
    :param base_levels: Levels ``(b_1, b_2)`` the fields are built around.
                        ``None`` uses the constants ``c_i`` with
                        ``f(c_i) = omega_i``.
    :param stripes: Lamellar: number of stripe periods along the first axis.
    :param spot_radius: Spots: radius of every spot, in box units.
    :param spot_count: Spots: number of spots, alternately seeding phase 1
                       and phase 2.

    :raises ValueError: If a parameter is out of range.
    """

    kind: InitKind = InitKind.RANDOM_UNIFORM
    seed: int = 0
    amplitude: float = 0.05
    base_levels: "Optional[Pair]" = None
    stripes: int = 2
    spot_radius: float = 0.25
    spot_count: int = 4

    def __post_init__(self) -> None:
        if not 0 <= self.seed < _SEED_LIMIT:
            raise ValueError(
                f"seed must be an unsigned 64-bit integer, got {self.seed}."
            )
        if not (self.amplitude >= 0 and isfinite(self.amplitude)):
            raise ValueError(
                f"amplitude must be nonnegative, got {self.amplitude}."
            )
        if self.base_levels is not None:
            if len(self.base_levels) != 2 or not all(
                0.0 < b < 1.0 for b in self.base_levels
            ):
                raise ValueError(
                    f"base_levels must be two numbers in (0, 1), got "
                    f"{self.base_levels}."
                )
        if self.stripes < 1:
            raise ValueError(f"stripes must be positive, got {self.stripes}.")
        if not (self.spot_radius > 0 and isfinite(self.spot_radius)):
            raise ValueError(
                f"spot_radius must be positive, got {self.spot_radius}."
            )
        if self.spot_count < 1:
            raise ValueError(
                f"spot_count must be positive, got {self.spot_count}."
            )


def make_rng(seed: "int") -> "np.random.Generator":
    """The random generator acon uses for a given seed."""
    return np.random.Generator(np.random.Philox(seed))


def _random(
    spec: "InitSpec", grid: "PeriodicGrid", base: "Pair"
) -> "Tuple[FloatArray, FloatArray]":
    rng = make_rng(spec.seed)
    a = spec.amplitude
    p1 = base[0] + a * rng.uniform(-1.0, 1.0, grid.points)
    p2 = base[1] + a * rng.uniform(-1.0, 1.0, grid.points)
    return p1, p2


def _lamellar(
    spec: "InitSpec", grid: "PeriodicGrid", base: "Pair"
) -> "Tuple[FloatArray, FloatArray]":
    x = grid.coordinates()[0]
    length = grid.half_lengths[0]
    theta = pi * spec.stripes * (x + length) / length
    p1 = base[0] + spec.amplitude * np.cos(theta)
    p2 = base[1] + spec.amplitude * np.cos(theta - 2.0 * pi / 3.0)
    return p1, p2


def _spots(
    spec: "InitSpec",
    grid: "PeriodicGrid",
    base: "Pair",
    width: "float",
) -> "Tuple[FloatArray, FloatArray]":
    rng = make_rng(spec.seed)
    coords = grid.coordinates()
    half = np.array(grid.half_lengths)
    fields = [np.full(grid.points, base[0]), np.full(grid.points, base[1])]
    for k in range(spec.spot_count):
        centre = rng.uniform(-half, half)
        squared = np.zeros(grid.points)
        for x, c, h in zip(coords, centre, half):
            # Minimum-image distance on the periodic box.
            d = np.mod(x - c + h, 2.0 * h) - h
            squared = squared + d * d
        distance = np.sqrt(squared)
        profile = 0.5 * (1.0 - np.tanh((distance - spec.spot_radius) / width))
        fields[k % 2] = fields[k % 2] + spec.amplitude * profile
    return fields[0], fields[1]


def generate(
    spec: "InitSpec",
    grid: "PeriodicGrid",
    params: "ModelParams",
    guard: "MultiplierGuard" = DEFAULT_GUARD,
) -> "PhaseState":
    """
    Build an initial state satisfying both volume constraints.

    ``RANDOM_UNIFORM``
        ``phi_i = b_i + amplitude * U(-1, 1)``, independently per node.
    ``LAMELLAR``
        Stripes along the first axis: ``phi_1 = b_1 + amplitude cos(theta)``
        and ``phi_2 = b_2 + amplitude cos(theta - 2pi/3)``.
    ``SPOTS``
        ``b_i`` plus tanh-profiled discs (balls in 3D) of height
        ``amplitude`` and interface width ``eps``, at random centres.
    ``CONSTANT_SYMMETRIC``
        ``phi_i = c_i`` everywhere, where ``f(c_i) = omega_i``.

    Each phase is then projected onto its constraint.

    :param spec: What to build.
    :type spec: `InitSpec`

    :param grid: The grid to build it on.
    :type grid: `PeriodicGrid`

    :param params: Model parameters; the targets ``omega`` come from here.
    :type params: `ModelParams`

    :param guard: Floor for the projection denominators; runs pass the
                  guard of their `StepConfig`.
    :type guard: `MultiplierGuard`

    :return: The initial state. The same arguments always give the same
             state.
    :rtype: `PhaseState`

    :raises UnreachableTarget: If some ``omega_i`` is outside ``(0, 1)``.
    :raises DegenerateConstraint: If a raw field is below the guard floor.
    :raises ProjectionFailed: If a raw field can't be projected.
    """
    roots = (omega_root(params.omega[0]), omega_root(params.omega[1]))
    base = spec.base_levels if spec.base_levels is not None else roots

    if spec.kind is InitKind.CONSTANT_SYMMETRIC:
        p1 = np.full(grid.points, roots[0])
        p2 = np.full(grid.points, roots[1])
    elif spec.kind is InitKind.RANDOM_UNIFORM:
        p1, p2 = _random(spec, grid, base)
    elif spec.kind is InitKind.LAMELLAR:
        p1, p2 = _lamellar(spec, grid, base)
    else:
        p1, p2 = _spots(spec, grid, base, params.epsilon)

    phi1 = project_constraint(ScalarField(grid, p1), params.omega[0], guard)
    phi2 = project_constraint(ScalarField(grid, p2), params.omega[1], guard)
    return PhaseState(phi1, phi2, params)
