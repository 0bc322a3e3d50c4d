# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
Binary snapshots of a state.

The format is little-endian throughout::

    b"ACON"                     magic
    uint32                      format version (1)
    uint32                      dim
    uint32 * dim                points per axis
    float64 * dim               half-lengths
    float64 * prod(points)      phi_1, row-major
    float64 * prod(points)      phi_2, row-major

Model parameters are not part of a snapshot; they belong to the run
configuration. Reading back a written snapshot reproduces the fields bit
for bit.
"""
from typing import TYPE_CHECKING, NamedTuple
from pathlib import Path
import logging
import struct

import numpy as np

from acon.energy import PhaseState
from acon.grid import PeriodicGrid, ScalarField

if TYPE_CHECKING:
    import os

    from acon.chemistry import ModelParams

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "Snapshot",
    "serialize_snapshot",
    "deserialize_snapshot",
    "write_snapshot",
    "read_snapshot",
    "snapshot_name",
]

log = logging.getLogger(__name__)

MAGIC = b"ACON"
FORMAT_VERSION = 1

_U32 = struct.Struct("<I")
_VALUES = np.dtype("<f8")


class Snapshot(NamedTuple):
    """The fields stored in a snapshot, and their grid."""

    grid: PeriodicGrid
    phi1: ScalarField
    phi2: ScalarField

    def state(self, params: "ModelParams") -> "PhaseState":
        """Pair the stored fields with model parameters."""
        return PhaseState(self.phi1, self.phi2, params)


def snapshot_name(step: "int") -> "str":
    """File name of the snapshot taken after ``step`` steps."""
    return f"snap_{step:06d}.acon"


def serialize_snapshot(state: "PhaseState") -> "bytes":
    """
    Encode the fields of a state in the snapshot format.

    :param state: The state to encode.
    :type state: `PhaseState`

    :return: The encoded snapshot.
    :rtype: bytes
    """
    grid = state.grid
    dim = grid.dim
    header = b"".join(
        (
            MAGIC,
            _U32.pack(FORMAT_VERSION),
            _U32.pack(dim),
            struct.pack(f"<{dim}I", *grid.points),
            struct.pack(f"<{dim}d", *grid.half_lengths),
        )
    )
    return b"".join(
        (
            header,
            state.phi1.values.astype(_VALUES).tobytes(order="C"),
            state.phi2.values.astype(_VALUES).tobytes(order="C"),
        )
    )


def deserialize_snapshot(data: "bytes") -> "Snapshot":
    """
    Decode the output of `serialize_snapshot`.

    :param data: An encoded snapshot.
    :type data: bytes

    :return: The grid and both fields.
    :rtype: `Snapshot`

    :raises ValueError: If ``data`` is not a valid snapshot: wrong magic,
                        unsupported version, or wrong length.
    """
    if data[:4] != MAGIC:
        raise ValueError(f"Not an acon snapshot: bad magic {data[:4]!r}.")
    offset = 4
    if len(data) < offset + 2 * _U32.size:
        raise ValueError("Truncated snapshot header.")
    (version,) = _U32.unpack_from(data, offset)
    (dim,) = _U32.unpack_from(data, offset + _U32.size)
    offset += 2 * _U32.size
    if version != FORMAT_VERSION:
        raise ValueError(
            f"Unsupported snapshot version {version}; this acon reads "
            f"version {FORMAT_VERSION}."
        )
    if dim not in (2, 3):
        raise ValueError(f"Snapshot has dimension {dim}, expected 2 or 3.")

    header_end = offset + dim * (4 + 8)
    if len(data) < header_end:
        raise ValueError("Truncated snapshot header.")
    points = struct.unpack_from(f"<{dim}I", data, offset)
    half_lengths = struct.unpack_from(f"<{dim}d", data, offset + 4 * dim)
    grid = PeriodicGrid(points, half_lengths)

    count = grid.size
    expected = header_end + 2 * count * _VALUES.itemsize
    if len(data) != expected:
        raise ValueError(
            f"Snapshot for a {points} grid should be {expected} bytes, got "
            f"{len(data)}."
        )
    values = np.frombuffer(data, dtype=_VALUES, offset=header_end)
    phi1 = ScalarField(grid, values[:count].reshape(points))
    phi2 = ScalarField(grid, values[count:].reshape(points))
    return Snapshot(grid, phi1, phi2)


def write_snapshot(path: "os.PathLike[str]", state: "PhaseState") -> "Path":
    """
    Write a state to ``path``, creating parent directories as needed.

    :return: The path written to.
    :raises OSError: If the file can't be written.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(serialize_snapshot(state))
    log.info("Wrote snapshot %s", target)
    return target


def read_snapshot(path: "os.PathLike[str]") -> "Snapshot":
    """
    Read a snapshot written by `write_snapshot`.

    :raises OSError: If the file can't be read.
    :raises ValueError: If it is not a valid snapshot.
    """
    return deserialize_snapshot(Path(path).read_bytes())
