# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
Periodic grids, scalar fields, and the spectral operators acting on them.

The box is ``[-X_1, X_1] x ... x [-X_d, X_d]`` with ``n_j`` uniformly spaced
nodes per axis, the node ``j`` sitting at ``-X + j * 2X / n``. Derivatives
are computed pseudo-spectrally with real FFTs; on an axis of half-length
``X`` the Fourier mode with integer index ``m`` has wavenumber
``k = pi * m / X``.

All operators are pure functions: they take `ScalarField` values and return
fresh ones. A `ScalarField` never holds NaN or infinity - constructing one
from non-finite data raises `ValueError`.
"""
from typing import TYPE_CHECKING
from math import pi, prod, sqrt

import numpy as np
from scipy import fft as _fft

from acon._detail import BoundedCache

if TYPE_CHECKING:
    from typing import Callable, Iterable, Sequence, Tuple, Union

    from acon.typedefs import ComplexArray, FloatArray

__all__ = [
    "PeriodicGrid",
    "ScalarField",
    "WaveTable",
    "wave_table",
    "to_spectral",
    "from_spectral",
    "mean",
    "integrate",
    "inner",
    "l2_norm",
    "laplacian",
    "inv_neg_laplacian",
    "resolvent",
    "gradient",
    "dirichlet_form",
    "h1_norm_sq",
]

#: Smallest number of nodes per axis.
MIN_POINTS = 4

#: Grids whose wave tables are kept at once.
WAVE_TABLE_CACHE_SIZE = 16


class PeriodicGrid:
    """
    A uniform periodic lattice on ``prod([-X_i, X_i])`` in 2 or 3 dimensions.

    Grids are immutable and hashable; two grids with the same sizes and
    half-lengths are equal, and share one cached `WaveTable`.

    :param points: Number of nodes along each axis. Powers of two are the
                   fastest, but any size >= 4 works.
    :type points: Sequence[int]

    :param half_lengths: The half-lengths ``X_i`` of the box along each axis.
    :type half_lengths: Sequence[float]

    :raises ValueError: If the dimension isn't 2 or 3, the two sequences
                        differ in length, an axis has fewer than 4 nodes, or
                        a half-length isn't positive.
    """

    __slots__ = (
        "points",
        "half_lengths",
        "spacing",
        "cell_volume",
        "total_volume",
    )

    def __init__(
        self, points: "Sequence[int]", half_lengths: "Sequence[float]"
    ) -> None:
        points = tuple(int(n) for n in points)
        half_lengths = tuple(float(x) for x in half_lengths)
        if len(points) not in (2, 3):
            raise ValueError(
                f"Only 2- and 3-dimensional grids are supported, got "
                f"{len(points)} axes."
            )
        if len(half_lengths) != len(points):
            raise ValueError(
                f"Got {len(points)} axis sizes but {len(half_lengths)} "
                f"half-lengths."
            )
        if any(n < MIN_POINTS for n in points):
            raise ValueError(
                f"Every axis needs at least {MIN_POINTS} points, got "
                f"{points}."
            )
        if not all(x > 0 and np.isfinite(x) for x in half_lengths):
            raise ValueError(
                f"Box half-lengths must be positive, got {half_lengths}."
            )
        self.points: "Tuple[int, ...]" = points
        self.half_lengths: "Tuple[float, ...]" = half_lengths
        self.spacing: "Tuple[float, ...]" = tuple(
            2.0 * x / n for x, n in zip(half_lengths, points)
        )
        self.cell_volume: "float" = prod(self.spacing)
        self.total_volume: "float" = prod(2.0 * x for x in half_lengths)

    @property
    def dim(self) -> "int":
        """Number of spatial dimensions."""
        return len(self.points)

    @property
    def size(self) -> "int":
        """Total number of nodes."""
        return prod(self.points)

    def coordinates(self) -> "Tuple[FloatArray, ...]":
        """
        Node coordinates, one array per axis, in ``ij`` (row-major) layout.
        """
        axes = [
            -x + h * np.arange(n)
            for x, h, n in zip(self.half_lengths, self.spacing, self.points)
        ]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def __eq__(self, other: "object") -> "bool":
        if not isinstance(other, PeriodicGrid):
            return NotImplemented
        return (
            self.points == other.points
            and self.half_lengths == other.half_lengths
        )

    def __hash__(self) -> "int":
        return hash((self.points, self.half_lengths))

    def __repr__(self) -> "str":
        return (
            f"PeriodicGrid(points={self.points}, "
            f"half_lengths={self.half_lengths})"
        )


class WaveTable:
    """
    Fourier symbols of a `PeriodicGrid`, laid out on the real-FFT spectrum.

    ``squared_wavenumbers`` holds ``|k|^2`` for every retained mode, exactly 0
    for the zero mode and positive everywhere else. ``wavenumbers`` holds the
    per-axis ``k_j`` used for first derivatives, with the Nyquist mode set to
    zero so that odd derivatives of real fields stay real.
    """

    __slots__ = ("squared_wavenumbers", "inverse_squared", "wavenumbers")

    def __init__(self, grid: "PeriodicGrid") -> None:
        axes = []
        last = grid.dim - 1
        for axis, (n, x) in enumerate(zip(grid.points, grid.half_lengths)):
            if axis == last:
                m = _fft.rfftfreq(n, 1.0 / n)
            else:
                m = _fft.fftfreq(n, 1.0 / n)
            shape = [1] * grid.dim
            shape[axis] = m.size
            axes.append((pi * m / x).reshape(shape))

        squared = sum(k * k for k in axes)
        squared = np.broadcast_to(squared, _spectral_shape(grid)).copy()
        inverse = np.zeros_like(squared)
        np.divide(1.0, squared, out=inverse, where=squared > 0)

        first = []
        for axis, k in enumerate(axes):
            k = k.copy()
            n = grid.points[axis]
            if n % 2 == 0:
                # fftfreq puts Nyquist at n/2, rfftfreq at its last entry;
                # in both cases that is index n // 2.
                k.reshape(-1)[n // 2] = 0.0
            first.append(k)

        self.squared_wavenumbers: "FloatArray" = squared
        self.inverse_squared: "FloatArray" = inverse
        self.wavenumbers: "Tuple[FloatArray, ...]" = tuple(first)
        for array in (squared, inverse, *first):
            array.flags.writeable = False


class _WaveTableCache(BoundedCache["PeriodicGrid", "WaveTable"]):
    __slots__ = ()

    maxsize = WAVE_TABLE_CACHE_SIZE

    def value_for(self, key: "PeriodicGrid") -> "WaveTable":
        return WaveTable(key)


_wave_tables: "_WaveTableCache" = _WaveTableCache()


def wave_table(grid: "PeriodicGrid") -> "WaveTable":
    """Get the (cached) `WaveTable` of a grid."""
    return _wave_tables[grid]


def _spectral_shape(grid: "PeriodicGrid") -> "Tuple[int, ...]":
    return grid.points[:-1] + (grid.points[-1] // 2 + 1,)


class ScalarField:
    """
    Real samples of a function on a `PeriodicGrid`, one per node.

    ``values`` is a read-only array of shape ``grid.points``; a flat sequence
    of the right length is accepted too and read in row-major order.

    Fields support ``+`` and ``-`` with fields on the same grid and ``*``
    with real scalars, which is all the finite-difference style checks in
    this package need.

    :param grid: The grid the samples live on.
    :type grid: `PeriodicGrid`

    :param values: The samples.
    :type values: array-like

    :raises ValueError: If the number of samples doesn't match the grid, or
                        any of them is NaN or infinite.
    """

    __slots__ = ("grid", "values")

    def __init__(
        self,
        grid: "PeriodicGrid",
        values: "Union[FloatArray, Iterable[float]]",
    ) -> None:
        array = np.array(values, dtype=np.float64)
        if array.shape != grid.points:
            if array.size != grid.size:
                raise ValueError(
                    f"Expected {grid.size} samples for {grid}, got "
                    f"{array.size}."
                )
            array = array.reshape(grid.points)
        if not np.isfinite(array).all():
            raise ValueError("Field samples must all be finite.")
        array.flags.writeable = False
        self.grid = grid
        self.values: "FloatArray" = array

    @classmethod
    def constant(cls, grid: "PeriodicGrid", value: "float") -> "ScalarField":
        """A field taking the same value at every node."""
        return cls(grid, np.full(grid.points, float(value)))

    @classmethod
    def from_function(
        cls,
        grid: "PeriodicGrid",
        function: "Callable[..., FloatArray]",
    ) -> "ScalarField":
        """
        Sample ``function(x, y[, z])`` at the grid nodes.

        The function receives one coordinate array per axis and must be
        vectorised over them.
        """
        values = np.broadcast_to(
            function(*grid.coordinates()), grid.points
        )
        return cls(grid, values)

    def _same_grid(self, other: "ScalarField") -> None:
        if other.grid != self.grid:
            raise ValueError(
                f"Fields live on different grids: {self.grid} and "
                f"{other.grid}."
            )

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if not isinstance(other, ScalarField):
            return NotImplemented
        self._same_grid(other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        if not isinstance(other, ScalarField):
            return NotImplemented
        self._same_grid(other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, scalar: "float") -> "ScalarField":
        if not isinstance(scalar, (int, float)):
            return NotImplemented
        return ScalarField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)

    def __repr__(self) -> "str":
        return (
            f"<ScalarField on {self.grid.points} grid, range "
            f"[{self.values.min():.6g}, {self.values.max():.6g}]>"
        )


# Array-level kernels. The time steppers call these directly to avoid
# wrapping every intermediate in a ScalarField.


def _axes(grid: "PeriodicGrid") -> "Tuple[int, ...]":
    return tuple(range(grid.dim))


def _forward(values: "FloatArray", grid: "PeriodicGrid") -> "ComplexArray":
    return _fft.rfftn(values, axes=_axes(grid))  # type: ignore[no-any-return]


def _inverse(hat: "ComplexArray", grid: "PeriodicGrid") -> "FloatArray":
    return _fft.irfftn(  # type: ignore[no-any-return]
        hat, s=grid.points, axes=_axes(grid)
    )


def _apply_symbol(
    values: "FloatArray", grid: "PeriodicGrid", symbol: "FloatArray"
) -> "FloatArray":
    return _inverse(_forward(values, grid) * symbol, grid)


def _laplacian(values: "FloatArray", grid: "PeriodicGrid") -> "FloatArray":
    return -_apply_symbol(values, grid, wave_table(grid).squared_wavenumbers)


def _inv_neg_laplacian(
    values: "FloatArray", grid: "PeriodicGrid"
) -> "FloatArray":
    # inverse_squared is 0 on the zero mode, which both discards the mean of
    # the input and makes the output zero-mean.
    return _apply_symbol(values, grid, wave_table(grid).inverse_squared)


def _integrate(values: "FloatArray", grid: "PeriodicGrid") -> "float":
    return grid.cell_volume * float(np.sum(values))


def _inner(a: "FloatArray", b: "FloatArray", grid: "PeriodicGrid") -> "float":
    return grid.cell_volume * float(np.vdot(a, b))


def to_spectral(f: "ScalarField") -> "ComplexArray":
    """Forward real FFT of a field's samples (unnormalised)."""
    return _forward(f.values, f.grid)


def from_spectral(hat: "ComplexArray", grid: "PeriodicGrid") -> "ScalarField":
    """Inverse of `to_spectral`."""
    return ScalarField(grid, _inverse(hat, grid))


def mean(f: "ScalarField") -> "float":
    """
    Average of a field over the box, ``(1/|T|) * integral(f)``.
    """
    return _integrate(f.values, f.grid) / f.grid.total_volume


def integrate(f: "ScalarField") -> "float":
    """Rectangle-rule integral of a field over the box."""
    return _integrate(f.values, f.grid)


def inner(a: "ScalarField", b: "ScalarField") -> "float":
    """The L2 inner product ``<a, b>``."""
    a._same_grid(b)
    return _inner(a.values, b.values, a.grid)


def l2_norm(f: "ScalarField") -> "float":
    """The L2 norm of a field."""
    return sqrt(_inner(f.values, f.values, f.grid))


def laplacian(f: "ScalarField") -> "ScalarField":
    """
    Spectral Laplacian: multiply every Fourier mode by ``-|k|^2``.

    The result always has zero mean.
    """
    return ScalarField(f.grid, _laplacian(f.values, f.grid))


def inv_neg_laplacian(w: "ScalarField") -> "ScalarField":
    """
    Zero-mean solution ``Psi`` of ``-Laplacian(Psi) = w - mean(w)``.

    The mean of ``w`` is discarded, so this is well defined for any field;
    a constant input gives the zero field.
    """
    return ScalarField(w.grid, _inv_neg_laplacian(w.values, w.grid))


def resolvent(f: "ScalarField", lambda_: "float") -> "ScalarField":
    """
    Apply the resolvent ``(I - lambda * Laplacian)^-1``.

    This is a smoothing contraction in L2 that leaves the mean unchanged
    and tends to the identity as ``lambda`` goes to 0.

    :raises ValueError: If ``lambda_`` isn't positive.
    """
    if not lambda_ > 0:
        raise ValueError(
            f"Resolvent parameter must be positive, got {lambda_}."
        )
    symbol = 1.0 / (1.0 + lambda_ * wave_table(f.grid).squared_wavenumbers)
    return ScalarField(f.grid, _apply_symbol(f.values, f.grid, symbol))


def gradient(f: "ScalarField") -> "Tuple[ScalarField, ...]":
    """
    Spectral first derivatives of a field, one per axis.

    The Nyquist mode of each derivative is dropped.
    """
    hat = _forward(f.values, f.grid)
    return tuple(
        ScalarField(f.grid, _inverse(1j * k * hat, f.grid))
        for k in wave_table(f.grid).wavenumbers
    )


def dirichlet_form(a: "ScalarField", b: "ScalarField") -> "float":
    """
    ``integral(grad(a) . grad(b))``, evaluated as ``<a, -Laplacian(b)>``.

    Going through the Laplacian (rather than `gradient`) keeps the Nyquist
    mode, so that every quadratic gradient energy in acon has exactly the
    spectral Laplacian as its variational derivative.
    """
    a._same_grid(b)
    return -_inner(a.values, _laplacian(b.values, b.grid), a.grid)


def h1_norm_sq(f: "ScalarField") -> "float":
    """``||f||_{L2}^2 + ||grad f||_{L2}^2``."""
    return _inner(f.values, f.values, f.grid) + dirichlet_form(f, f)
