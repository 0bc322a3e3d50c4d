# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
from typing import Callable, List
from functools import reduce
from pathlib import Path
from types import ModuleType

import numpy as np
import pytest
from acon.chemistry import ModelParams
from acon.dynamics import StepConfig
from acon.energy import PhaseState
from acon.grid import PeriodicGrid, ScalarField
from acon.init_conditions import InitKind, InitSpec, generate

#: f(1/3), the volume fraction of the symmetric constant state.
SYMMETRIC_OMEGA = 7.0 / 27.0


@pytest.fixture  # type: ignore[misc]
def missing_dunder_all_names() -> Callable[[ModuleType], List[str]]:
    def make_missing(module: ModuleType) -> List[str]:
        return [
            name
            for name in dir(module)
            if not name.startswith("_")
            and name not in ["TYPE_CHECKING"]
            and not isinstance(getattr(module, name), ModuleType)
            and getattr(getattr(module, name), "__module__", module.__name__)
            == module.__name__
            and name not in module.__all__  # type: ignore[attr-defined,misc]
        ]

    return make_missing


@pytest.fixture  # type: ignore[misc]
def unit_grid() -> PeriodicGrid:
    """16x16 nodes on [-1/2, 1/2]^2, a box of volume 1."""
    return PeriodicGrid((16, 16), (0.5, 0.5))


@pytest.fixture  # type: ignore[misc]
def normalised_params() -> ModelParams:
    """eps = 1, gamma = I and the symmetric volume fractions."""
    return ModelParams(
        1.0, [[1.0, 0.0], [0.0, 1.0]], (SYMMETRIC_OMEGA, SYMMETRIC_OMEGA)
    )


@pytest.fixture  # type: ignore[misc]
def symmetric_state(
    unit_grid: PeriodicGrid, normalised_params: ModelParams
) -> PhaseState:
    """phi_1 = phi_2 = 1/3 everywhere: a stationary state of every scheme."""
    third = ScalarField.constant(unit_grid, 1.0 / 3.0)
    return PhaseState(third, third, normalised_params)


@pytest.fixture  # type: ignore[misc]
def random_state() -> Callable[..., PhaseState]:
    def make(
        grid: PeriodicGrid,
        params: ModelParams,
        seed: int = 0,
        amplitude: float = 0.05,
    ) -> PhaseState:
        spec = InitSpec(InitKind.RANDOM_UNIFORM, seed, amplitude)
        return generate(spec, grid, params)

    return make


@pytest.fixture  # type: ignore[misc]
def dense_laplacian() -> Callable[[PeriodicGrid], np.ndarray]:
    """
    The spectral Laplacian of a grid as a dense matrix acting on row-major
    flattened samples, built from full complex DFT matrices.
    """

    def second_derivative(n: int, half_length: float) -> np.ndarray:
        dft = np.fft.fft(np.eye(n), axis=0)
        k = np.pi * np.fft.fftfreq(n, 1.0 / n) / half_length
        return np.real(np.linalg.inv(dft) @ np.diag(-k * k) @ dft)

    def make(grid: PeriodicGrid) -> np.ndarray:
        size = grid.size
        total = np.zeros((size, size))
        for axis, (n, x) in enumerate(zip(grid.points, grid.half_lengths)):
            factors = [np.eye(m) for m in grid.points]
            factors[axis] = second_derivative(n, x)
            total += reduce(np.kron, factors)
        return total

    return make


@pytest.fixture  # type: ignore[misc]
def write_config(tmp_path: Path) -> Callable[[str], Path]:
    def write(text: str, name: str = "run.ini") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write


@pytest.fixture  # type: ignore[misc]
def small_step() -> StepConfig:
    return StepConfig(tau=1e-3)
