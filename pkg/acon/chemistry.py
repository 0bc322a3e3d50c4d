# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
Pointwise chemistry of the ternary system and the model parameters.

``phi_1`` and ``phi_2`` are the label functions of species A and B; species C
is ``1 - phi_1 - phi_2``. The pointwise functions here accept floats or numpy
arrays and return the same kind. None of them clamp their argument to
``[0, 1]``: the polynomials are defined everywhere, and the dynamics may
leave the unit interval for a while.
"""
from typing import TYPE_CHECKING
from math import isfinite

import numpy as np
from scipy.optimize import brentq

from acon._detail import check_phase_index
from acon.errors import UnreachableTarget
from acon.grid import _integrate

if TYPE_CHECKING:
    from typing import Sequence, Tuple

    from acon.grid import ScalarField
    from acon.typedefs import FloatArray, Pair, RealOrArray

__all__ = [
    "ModelParams",
    "DEFAULT_PENALTY_M",
    "w",
    "w_prime",
    "w_double_prime",
    "wt",
    "wt_partial",
    "f",
    "f_prime",
    "f_double_prime",
    "volume_residual",
    "fprime_mass",
    "omega_root",
]

#: Penalty constant used when none is given.
DEFAULT_PENALTY_M = 1.0e3


class ModelParams:
    """
    Physical parameters of the Ohta-Nakazawa energy.

    :param epsilon: Interface width, positive.
    :type epsilon: float

    :param gamma: The symmetric positive definite 2x2 matrix of long-range
                  interaction strengths, as nested sequences.
    :type gamma: Sequence[Sequence[float]]

    :param omega: Target volume fractions ``(omega_1, omega_2)``. Neither may
                  be 0 or 1 - a species can't fill the whole box.
    :type omega: Tuple[float, float]

    :param penalty_m: The penalty constant ``M`` used by the penalty form.
    :type penalty_m: float

    :param check_omega: Set to ``False`` to allow ``omega_i`` in ``{0, 1}``.
                        Only meant for probing the pure-phase states in
                        tests; such parameters have no well-defined
                        constrained dynamics.
    :type check_omega: bool

    :raises ValueError: If any of the invariants above is violated.
    """

    __slots__ = ("epsilon", "gamma", "omega", "penalty_m")

    def __init__(
        self,
        epsilon: "float",
        gamma: "Sequence[Sequence[float]]",
        omega: "Tuple[float, float]",
        penalty_m: "float" = DEFAULT_PENALTY_M,
        *,
        check_omega: "bool" = True,
    ) -> None:
        epsilon = float(epsilon)
        if not (epsilon > 0 and isfinite(epsilon)):
            raise ValueError(f"epsilon must be positive, got {epsilon}.")

        matrix = np.array(gamma, dtype=np.float64)
        if matrix.shape != (2, 2) or not np.isfinite(matrix).all():
            raise ValueError(
                f"gamma must be a finite 2x2 matrix, got {gamma}."
            )
        if matrix[0, 1] != matrix[1, 0]:
            raise ValueError(
                f"gamma must be symmetric, got gamma12={matrix[0, 1]} and "
                f"gamma21={matrix[1, 0]}."
            )
        if not (matrix[0, 0] > 0 and np.linalg.det(matrix) > 0):
            raise ValueError(
                f"gamma must be positive definite, got {matrix.tolist()}."
            )

        if len(omega) != 2:
            raise ValueError(
                f"Need exactly two volume fractions, got {omega}."
            )
        o1, o2 = float(omega[0]), float(omega[1])
        if not (isfinite(o1) and isfinite(o2)):
            raise ValueError(f"Volume fractions must be finite, got {omega}.")
        if check_omega and ({o1, o2} & {0.0, 1.0}):
            raise ValueError(
                f"Volume fractions must not be 0 or 1 (a single species "
                f"can't occupy the whole box), got {omega}."
            )

        penalty_m = float(penalty_m)
        if not (penalty_m > 0 and isfinite(penalty_m)):
            raise ValueError(
                f"Penalty constant must be positive, got {penalty_m}."
            )

        matrix.flags.writeable = False
        self.epsilon: "float" = epsilon
        self.gamma: "FloatArray" = matrix
        self.omega: "Pair" = (o1, o2)
        self.penalty_m: "float" = penalty_m

    def replace(self, **changes: "object") -> "ModelParams":
        """Return a copy with some of the parameters changed."""
        kwargs = {
            "epsilon": self.epsilon,
            "gamma": self.gamma.tolist(),
            "omega": self.omega,
            "penalty_m": self.penalty_m,
        }
        kwargs.update(changes)
        return ModelParams(**kwargs)  # type: ignore[arg-type]

    def __eq__(self, other: "object") -> "bool":
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (
            self.epsilon == other.epsilon
            and bool(np.array_equal(self.gamma, other.gamma))
            and self.omega == other.omega
            and self.penalty_m == other.penalty_m
        )

    def __hash__(self) -> "int":
        return hash(
            (
                self.epsilon,
                tuple(self.gamma.ravel()),
                self.omega,
                self.penalty_m,
            )
        )

    def __repr__(self) -> "str":
        return (
            f"ModelParams(epsilon={self.epsilon!r}, "
            f"gamma={self.gamma.tolist()!r}, omega={self.omega!r}, "
            f"penalty_m={self.penalty_m!r})"
        )


def w(s: "RealOrArray") -> "RealOrArray":
    """The double well ``W(s) = 18 (s^2 - s)^2``."""
    d = s * s - s
    return 18.0 * d * d  # type: ignore[return-value]


def w_prime(s: "RealOrArray") -> "RealOrArray":
    """``W'(s) = 36 (s^2 - s)(2s - 1)``."""
    return 36.0 * (s * s - s) * (2.0 * s - 1.0)  # type: ignore[return-value]


def w_double_prime(s: "RealOrArray") -> "RealOrArray":
    """``W''(s) = 36 (6s^2 - 6s + 1)``."""
    return 36.0 * (6.0 * s * s - 6.0 * s + 1.0)  # type: ignore[return-value]


def wt(p1: "RealOrArray", p2: "RealOrArray") -> "RealOrArray":
    """
    The triple well ``W(p1) + W(p2) + W(1 - p1 - p2)``.

    Zero exactly at the three pure phases ``(1, 0)``, ``(0, 1)`` and
    ``(0, 0)``, positive everywhere else.
    """
    return w(p1) + w(p2) + w(1.0 - p1 - p2)  # type: ignore[return-value]


def wt_partial(
    i: "int", p1: "RealOrArray", p2: "RealOrArray"
) -> "RealOrArray":
    """
    Partial derivative of `wt` with respect to ``p_i``.

    ``W'(p_i) - W'(1 - p1 - p2)``.
    """
    pi = (p1, p2)[check_phase_index(i)]
    return w_prime(pi) - w_prime(1.0 - p1 - p2)  # type: ignore[return-value]


def f(s: "RealOrArray") -> "RealOrArray":
    """The smooth indicator ``f(s) = 3s^2 - 2s^3``."""
    return s * s * (3.0 - 2.0 * s)  # type: ignore[return-value]


def f_prime(s: "RealOrArray") -> "RealOrArray":
    """``f'(s) = 6s(1 - s)``."""
    return 6.0 * s * (1.0 - s)  # type: ignore[return-value]


def f_double_prime(s: "RealOrArray") -> "RealOrArray":
    """``f''(s) = 6 - 12s``."""
    return 6.0 - 12.0 * s  # type: ignore[return-value]


def volume_residual(phi: "ScalarField", omega_i: "float") -> "float":
    """
    Signed violation of the volume constraint, ``mean(f(phi)) - omega_i``.
    """
    grid = phi.grid
    return _integrate(f(phi.values), grid) / grid.total_volume - omega_i


def fprime_mass(phi: "ScalarField") -> "float":
    """
    ``integral(f'(phi)^2)``, the squared norm of the constraint gradient.

    This is the denominator of the Lagrange multiplier; it vanishes only
    when ``phi`` is 0 or 1 everywhere.
    """
    fp = f_prime(phi.values)
    return _integrate(fp * fp, phi.grid)


def omega_root(omega: "float") -> "float":
    """
    The constant ``c`` in ``(0, 1)`` with ``f(c) = omega``.

    ``f`` maps ``[0, 1]`` monotonically onto itself, so the root exists and
    is unique for every ``omega`` in ``(0, 1)``.

    :raises UnreachableTarget: If ``omega`` is outside ``(0, 1)``.
    """
    if not 0.0 < omega < 1.0:
        raise UnreachableTarget(
            f"Volume fraction {omega} is outside (0, 1) and can't be "
            f"reached by a constant state."
        )
    return float(
        brentq(lambda c: f(c) - omega, 0.0, 1.0, xtol=1e-15, maxiter=200)
    )
