# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
Type aliases to facilitate easier typing of acon-dependent code.
"""
from typing import Tuple, TypeVar, Union

import numpy as np
import numpy.typing as npt

__all__ = [
    "FloatArray",
    "ComplexArray",
    "Real",
    "RealOrArray",
    "Pair",
]

#: Real samples of a field, one per grid node.
FloatArray = npt.NDArray[np.float64]
#: Half-spectrum coefficients as produced by a real FFT.
ComplexArray = npt.NDArray[np.complex128]
#: Anything the pointwise chemistry accepts.
Real = Union[float, FloatArray]
#: Pointwise functions return whatever kind of value they were given.
RealOrArray = TypeVar("RealOrArray", float, FloatArray)
#: A per-phase pair of values, ``(phase 1, phase 2)``.
Pair = Tuple[float, float]
