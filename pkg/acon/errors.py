# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
Exceptions raised by acon.

Every acon exception derives from `AconError` *and* from the builtin
exception it specialises, so ``except ValueError`` keeps catching a bad
configuration and ``except ArithmeticError`` keeps catching a degenerate
constraint.
"""
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from typing import Optional

__all__ = [
    "AconError",
    "BlowUp",
    "ConfigError",
    "ConfigMismatch",
    "ConstraintViolation",
    "DegenerateConstraint",
    "InnerSolveFailed",
    "ProjectionFailed",
    "UnreachableTarget",
]


class AconError(Exception):
    """
    Base class for all acon errors.

    :ivar step_index: The 1-based time step during which the error was
                      raised, filled in by `acon.dynamics.run`. ``None``
                      outside of a run.
    """

    step_index: "Optional[int]" = None

    def __str__(self) -> "str":
        message = super().__str__()
        if self.step_index is not None:
            return f"{message} (at step {self.step_index})"
        return message


class ConfigError(AconError, ValueError):
    """
    A run configuration could not be parsed or violates an invariant.

    :ivar line: 1-based line number in the configuration file the error
                refers to, or ``None`` if it can't be attributed to one.
    """

    def __init__(self, message: "str", line: "Optional[int]" = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigMismatch(AconError, ValueError):
    """A check was requested outside the configuration it is valid for."""


class ConstraintViolation(AconError, ValueError):
    """A state that must satisfy the volume constraints does not."""


class DegenerateConstraint(AconError, ArithmeticError):
    """
    The constraint gradient ``f'(phi)`` has (numerically) vanished.

    Happens when a phase is uniformly 0 or 1, where the Lagrange multiplier
    is undefined.
    """


class ProjectionFailed(AconError, ArithmeticError):
    """No shift along ``f'(phi)`` restoring the volume constraint was found."""


class UnreachableTarget(AconError, ValueError):
    """A target volume fraction can't be reached by a constant state."""


class BlowUp(AconError, FloatingPointError):
    """A field grew beyond any sensible bound; the time step is too large."""


class InnerSolveFailed(AconError, RuntimeError):
    """The minimizing-movement inner solver did not reach its tolerance."""
