# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
from itertools import combinations
from math import pi, sqrt

import acon.diagnostics
import numpy as np
import pytest
from acon.chemistry import ModelParams
from acon.diagnostics import (
    CheckResult,
    check_h1_bound,
    check_hls_identity,
    check_time_regularity,
    dissipation_audit,
    dissipation_rate,
    gradient_check,
    summarize,
    time_regularity_constant,
    uniform_h1_audit,
)
from acon.dynamics import Scheme, StepConfig, run, step_multiplier
from acon.energy import PhaseState, energy, variational_derivatives
from acon.errors import ConfigMismatch, ConstraintViolation
from acon.grid import PeriodicGrid, ScalarField, l2_norm
from acon.init_conditions import InitKind, InitSpec, generate


@pytest.fixture  # type: ignore[misc]
def mm_trajectory(unit_grid, normalised_params, random_state):
    initial = random_state(unit_grid, normalised_params, seed=21)
    cfg = StepConfig(tau=1e-2, scheme=Scheme.MINIMIZING_MOVEMENT)
    return run(initial, cfg, horizon=0.1, snapshot_every=1)


def test_dunder_all(missing_dunder_all_names):
    assert not missing_dunder_all_names(acon.diagnostics)


def test_h1_bound_on_symmetric_state(symmetric_state):
    lhs, rhs, ok = check_h1_bound(symmetric_state)
    assert lhs == pytest.approx(1.0 / 9.0, rel=1e-12)
    assert rhs == pytest.approx(22.0 / 3.0, rel=1e-12)
    assert ok


def test_h1_bound_on_pure_state(unit_grid):
    params = ModelParams(
        1.0, [[1.0, 0.0], [0.0, 1.0]], (1.0, 0.0), check_omega=False
    )
    state = PhaseState(
        ScalarField.constant(unit_grid, 1.0),
        ScalarField.constant(unit_grid, 0.0),
        params,
    )
    lhs, rhs, ok = check_h1_bound(state)
    assert lhs == pytest.approx(1.0, rel=1e-14)
    assert rhs == pytest.approx(2.0, rel=1e-14)
    assert ok


def test_h1_bound_on_random_states(
    unit_grid, normalised_params, random_state
):
    rng = np.random.default_rng(0)
    for seed in range(200):
        amplitude = float(rng.uniform(0.01, 0.5))
        state = random_state(unit_grid, normalised_params, seed, amplitude)
        assert check_h1_bound(state).ok


@pytest.mark.parametrize(
    "grid,epsilon",
    [
        (PeriodicGrid((16, 16), (0.5, 0.5)), 2.0),
        (PeriodicGrid((16, 16), (1.0, 0.5)), 1.0),
    ],
)
def test_h1_bound_needs_normalised_setting(normalised_params, grid, epsilon):
    third = ScalarField.constant(grid, 1.0 / 3.0)
    params = normalised_params.replace(epsilon=epsilon)
    with pytest.raises(ConfigMismatch, match="eps = 1"):
        check_h1_bound(PhaseState(third, third, params))


def test_h1_bound_needs_constraints(unit_grid, normalised_params):
    half = ScalarField.constant(unit_grid, 0.5)
    with pytest.raises(ConstraintViolation, match="phase 1"):
        check_h1_bound(PhaseState(half, half, normalised_params))


def test_hls_identity_of_constant(unit_grid):
    assert check_hls_identity(ScalarField.constant(unit_grid, 3.0)) == (
        0.0,
        0.0,
    )


@pytest.mark.parametrize("mode", [1, 3])
def test_hls_identity_of_cosine(mode):
    half_length = 0.5
    grid = PeriodicGrid((32, 16), (half_length, 0.5))
    k = mode * pi / half_length
    w = ScalarField.from_function(grid, lambda x, y: np.cos(k * x))
    expected = 0.5 * grid.total_volume / k ** 2
    lhs, rhs = check_hls_identity(w)
    assert lhs == pytest.approx(expected, rel=1e-12)
    assert rhs == pytest.approx(expected, rel=1e-12)


def test_hls_identity_of_random_fields():
    rng = np.random.default_rng(1)
    for points, half_lengths in (
        ((16, 16), (0.5, 0.5)),
        ((8, 12, 10), (1.0, 0.5, 0.75)),
        ((64,), (2.0,)),
    ):
        grid = PeriodicGrid(points, half_lengths)
        for _ in range(10):
            w = ScalarField(grid, rng.standard_normal(points))
            lhs, rhs = check_hls_identity(w)
            assert lhs == pytest.approx(rhs, rel=1e-10)
            assert lhs > 0


def test_dissipation_audit_of_empty_run(symmetric_state):
    traj = run(symmetric_state, StepConfig(tau=1.0), horizon=0.5)
    assert dissipation_audit(traj) == 0.0


def test_dissipation_audit_of_minimizing_movement(mm_trajectory):
    assert dissipation_audit(mm_trajectory) <= 1e-9
    energies = mm_trajectory.energies
    assert energies[-1] < energies[0]


def test_dissipation_rate_vanishes_at_symmetric_state(symmetric_state):
    assert dissipation_rate(symmetric_state) == pytest.approx(0.0, abs=1e-20)


def test_dissipation_rate_matches_energy_decrease(
    unit_grid, normalised_params, random_state
):
    state = random_state(unit_grid, normalised_params, seed=22)
    tau = 1e-7
    new, _ = step_multiplier(state, StepConfig(tau=tau))
    decrease = (energy(state).total - energy(new).total) / tau
    assert decrease == pytest.approx(dissipation_rate(state), rel=1e-2)


def test_gradient_check_accepts_the_derivative(
    unit_grid, normalised_params, random_state
):
    state = random_state(unit_grid, normalised_params, seed=23, amplitude=0.2)
    assert gradient_check(state) <= 1e-5


def test_gradient_check_catches_a_wrong_derivative(
    unit_grid, normalised_params, random_state
):
    state = random_state(unit_grid, normalised_params, seed=24, amplitude=0.2)

    def doubled(s):
        d1, d2 = variational_derivatives(s)
        return 2.0 * d1, d2

    assert gradient_check(state, doubled) > 1e-2


def test_gradient_check_is_seeded(unit_grid, normalised_params, random_state):
    state = random_state(unit_grid, normalised_params, seed=25, amplitude=0.2)
    assert gradient_check(state, seed=3) == gradient_check(state, seed=3)


def test_uniform_h1_audit(mm_trajectory):
    lhs, rhs, ok = uniform_h1_audit(mm_trajectory)
    assert ok
    assert rhs == pytest.approx(4.0 * mm_trajectory.energies[0] + 2.0)


def test_uniform_h1_audit_needs_normalised_setting(symmetric_state):
    params = symmetric_state.params.replace(epsilon=0.5)
    state = PhaseState(symmetric_state.phi1, symmetric_state.phi2, params)
    traj = run(state, StepConfig(tau=1e-3), horizon=2e-3)
    with pytest.raises(ConfigMismatch):
        uniform_h1_audit(traj)


def test_time_regularity_constant_by_brute_force(mm_trajectory):
    tau = mm_trajectory.tau
    stored = sorted(mm_trajectory.snapshots.items())
    expected = max(
        max(l2_norm(a.phi1 - b.phi1), l2_norm(a.phi2 - b.phi2))
        / sqrt((k - j) * tau + tau)
        for (j, a), (k, b) in combinations(stored, 2)
    )
    assert time_regularity_constant(mm_trajectory) == pytest.approx(expected)


def test_time_regularity_of_minimizing_movement(mm_trajectory):
    # Summing the discrete energy inequality bounds every increment over a
    # time t - s by sqrt(2 E(0) (t - s)).
    constant = time_regularity_constant(mm_trajectory)
    assert 0 < constant <= sqrt(2.0 * mm_trajectory.energies[0])


def test_check_time_regularity(mm_trajectory):
    observed = time_regularity_constant(mm_trajectory)
    result = check_time_regularity(mm_trajectory, observed)
    assert result == CheckResult(observed, 1.1 * observed, True)
    assert not check_time_regularity(mm_trajectory, observed / 2).ok


def test_time_regularity_of_empty_run(symmetric_state):
    traj = run(symmetric_state, StepConfig(tau=1.0), horizon=0.5)
    assert time_regularity_constant(traj) == 0.0


def test_summarize(mm_trajectory):
    report = summarize(mm_trajectory)
    assert report.h1_bound_satisfied is True
    assert report.energy_monotone
    assert report.max_volume_residual <= 1e-10
    assert report.min_fprime_mass > 0
    for low, high in report.field_range:
        assert low < 1.0 / 3.0 < high


def test_summarize_outside_normalised_setting(
    unit_grid, normalised_params, random_state
):
    params = normalised_params.replace(epsilon=0.5)
    initial = random_state(unit_grid, params, seed=26)
    traj = run(initial, StepConfig(tau=1e-4), horizon=1e-3)
    assert summarize(traj).h1_bound_satisfied is None


@pytest.mark.parametrize("scheme", [Scheme.MULTIPLIER, Scheme.PENALTY])
def test_dissipation_audit_of_semi_implicit_schemes(normalised_params, scheme):
    grid = PeriodicGrid((64, 64), (0.5, 0.5))
    initial = generate(InitSpec(seed=27), grid, normalised_params)
    cfg = StepConfig(
        tau=1e-4, scheme=scheme, project_each_step=scheme is Scheme.MULTIPLIER
    )
    traj = run(initial, cfg, horizon=2e-3)
    assert dissipation_audit(traj) <= 1e-4


@pytest.mark.parametrize(
    "scheme,taus,horizon",
    [
        (Scheme.MINIMIZING_MOVEMENT, (2e-3, 1e-3, 5e-4), 0.02),
        (Scheme.MULTIPLIER, (1e-3, 5e-4, 2.5e-4), 0.2),
    ],
)
def test_time_regularity_under_refinement(
    unit_grid, normalised_params, scheme, taus, horizon
):
    spec = InitSpec(InitKind.LAMELLAR, amplitude=0.1, stripes=1)
    initial = generate(spec, unit_grid, normalised_params)
    sample = 0.01
    constants = []
    for tau in taus:
        every = int(round(sample / tau))
        cfg = StepConfig(tau=tau, scheme=scheme)
        traj = run(initial, cfg, horizon, every)
        assert traj.steps == int(round(horizon / tau))
        constants.append(time_regularity_constant(traj))
    coarse = constants[0]
    assert coarse > 0
    for constant in constants[1:]:
        assert constant <= 1.1 * coarse
