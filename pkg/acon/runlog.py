# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
CSV output: the per-step run log and the scheme comparison table.

The run log has one row per step, with the columns in `LOG_HEADER`. Floats
are written with ``precision`` significant digits (17 by default, which
reads back exactly).
"""
from typing import TYPE_CHECKING
import csv

if TYPE_CHECKING:
    from typing import Iterable, List, Sequence, TextIO

    from acon.dynamics import StepReport

__all__ = ["LOG_HEADER", "RunLog", "format_float", "comparison_header"]

#: Columns of the run log, in order.
LOG_HEADER = (
    "step",
    "time",
    "energy_total",
    "energy_interfacial",
    "energy_potential",
    "energy_longrange",
    "lambda1",
    "lambda2",
    "volres1",
    "volres2",
    "inc1_l2",
    "inc2_l2",
    "inner_iters",
    "mm_slack",
)


def format_float(value: "float", precision: "int" = 17) -> "str":
    """Format ``value`` with ``precision`` significant digits."""
    return format(value, f".{precision}g")


class RunLog:
    """
    Writes `StepReport` rows to a text stream as CSV.

    The header is written on construction. The stream is not closed by
    the log.

    :param stream: Where to write.
    :type stream: TextIO

    :param precision: Significant digits of floats.
    :type precision: int
    """

    __slots__ = ("_writer", "precision", "rows")

    def __init__(self, stream: "TextIO", precision: "int" = 17) -> None:
        self._writer = csv.writer(stream, lineterminator="\n")
        self.precision = precision
        self.rows = 0
        self._writer.writerow(LOG_HEADER)

    def write(self, step: "int", time: "float", report: "StepReport") -> None:
        """Append the row of step ``step``, which ended at ``time``."""
        g = self._format
        e = report.energy_after
        self._writer.writerow(
            [
                str(step),
                g(time),
                g(e.total),
                g(e.interfacial),
                g(e.potential),
                g(e.longrange),
                *(g(x) for x in report.multipliers),
                *(g(x) for x in report.volume_residuals),
                *(g(x) for x in report.increment_l2),
                str(report.inner_iters),
                g(report.mm_inequality_slack),
            ]
        )
        self.rows += 1

    def _format(self, value: "float") -> "str":
        return format_float(value, self.precision)


def comparison_header(
    labels: "Sequence[str]", pairs: "Iterable[Sequence[str]]"
) -> "List[str]":
    """
    Columns of the comparison table.

    ``time``, then per label ``<label>_energy``, ``<label>_volres1`` and
    ``<label>_volres2``, then ``dist_<a>_<b>`` for every pair.
    """
    header = ["time"]
    for label in labels:
        header += [f"{label}_energy", f"{label}_volres1", f"{label}_volres2"]
    header += [f"dist_{a}_{b}" for a, b in pairs]
    return header
