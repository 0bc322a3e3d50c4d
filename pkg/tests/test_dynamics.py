# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
import logging
from math import isnan, pi

import acon.dynamics
import numpy as np
import pytest
from acon.chemistry import ModelParams, f_prime, volume_residual
from acon.constraint import MultiplierGuard
from acon.diagnostics import dissipation_audit
from acon.dynamics import (
    InnerSweep,
    Scheme,
    StepConfig,
    euler_lagrange_residual,
    run,
    step,
    step_minimizing_movement,
    step_multiplier,
    step_penalty,
)
from acon.energy import PhaseState, energy, penalty_energy, step_functional
from acon.errors import (
    AconError,
    ConstraintViolation,
    DegenerateConstraint,
    InnerSolveFailed,
)
from acon.grid import PeriodicGrid, ScalarField, l2_norm
from acon.init_conditions import InitKind, InitSpec, generate

from .conftest import SYMMETRIC_OMEGA

MM = Scheme.MINIMIZING_MOVEMENT


def distance(a, b):
    return np.sqrt(
        l2_norm(a.phi1 - b.phi1) ** 2 + l2_norm(a.phi2 - b.phi2) ** 2
    )


def max_residual(state):
    return max(
        abs(volume_residual(state.field(i), state.params.omega[i - 1]))
        for i in (1, 2)
    )


def test_dunder_all(missing_dunder_all_names):
    assert not missing_dunder_all_names(acon.dynamics)


@pytest.mark.parametrize(
    "name,scheme",
    [
        ("multiplier", Scheme.MULTIPLIER),
        ("Penalty", Scheme.PENALTY),
        ("mm", MM),
        ("MINIMIZING_MOVEMENT", MM),
        (" mm ", MM),
    ],
)
def test_scheme_from_name(name, scheme):
    assert Scheme.from_name(name) is scheme


def test_unknown_names():
    with pytest.raises(ValueError, match="multiplier, penalty, mm"):
        Scheme.from_name("euler")
    assert InnerSweep.from_name("Alternating") is InnerSweep.ALTERNATING
    with pytest.raises(ValueError, match="joint, alternating"):
        InnerSweep.from_name("random")


@pytest.mark.parametrize(
    "kwargs",
    [
        {"tau": 0.0},
        {"tau": float("nan")},
        {"tau": 1e-3, "inner_tol_grad": 0.0},
        {"tau": 1e-3, "inner_tol_constraint": -1.0},
        {"tau": 1e-3, "inner_max_iters": 0},
    ],
)
def test_step_config_validation(kwargs):
    with pytest.raises(ValueError):
        StepConfig(**kwargs)


def test_step_config_defaults():
    cfg = StepConfig(tau=1e-3)
    assert cfg.scheme is Scheme.MULTIPLIER
    assert cfg.project_each_step
    assert cfg.inner_tol_grad == 1e-9
    assert cfg.inner_tol_constraint == 1e-11
    assert cfg.inner_max_iters == 10000
    assert cfg.guard == MultiplierGuard(1e-8)
    assert cfg.inner_sweep is InnerSweep.JOINT


@pytest.mark.parametrize("scheme", list(Scheme))
def test_symmetric_state_is_a_fixed_point(symmetric_state, scheme):
    cfg = StepConfig(tau=1e-2, scheme=scheme)
    state = symmetric_state
    for _ in range(100):
        new, report = step(state, cfg)
        assert distance(new, state) <= 1e-12
        assert report.multipliers == pytest.approx((0.0, 0.0), abs=1e-12)
        if scheme is MM:
            assert report.inner_iters <= 2
        state = new
    assert distance(state, symmetric_state) <= 1e-12


def linearised_amplification(params, tau, k_squared):
    # Amplification matrix of one semi-implicit step for a single mode
    # around (1/3, 1/3), where W''(1/3) = -12 and f'(1/3) = 4/3.
    eps = params.epsilon
    coupling = np.array([[2.0, 1.0], [1.0, 2.0]])
    explicit = (-12.0 / (2.0 * eps)) * coupling + (
        (4.0 / 3.0) ** 2 / k_squared
    ) * np.asarray(params.gamma)
    implicit = np.eye(2) + tau * eps * k_squared * np.array(
        [[1.0, 0.5], [0.5, 1.0]]
    )
    return np.linalg.solve(implicit, np.eye(2) - tau * explicit)


@pytest.mark.parametrize("mode", [1, 2, 3])
def test_multiplier_step_matches_linearisation(mode):
    grid = PeriodicGrid((16, 16), (0.5, 0.5))
    params = ModelParams(
        0.1, [[2.0, 0.5], [0.5, 1.0]], (SYMMETRIC_OMEGA, SYMMETRIC_OMEGA)
    )
    tau = 1e-3
    k = mode * pi / 0.5
    x = grid.coordinates()[0]
    cosine = np.cos(k * x)
    delta = np.array([1e-6, -4e-7])
    state = PhaseState(
        ScalarField(grid, 1.0 / 3.0 + delta[0] * cosine),
        ScalarField(grid, 1.0 / 3.0 + delta[1] * cosine),
        params,
    )
    cfg = StepConfig(tau=tau, project_each_step=False)
    new, _ = step_multiplier(state, cfg)
    observed = np.array(
        [
            2.0 * np.mean((new.field(i).values - 1.0 / 3.0) * cosine)
            for i in (1, 2)
        ]
    )
    expected = linearised_amplification(params, tau, k * k) @ delta
    assert np.allclose(observed, expected, rtol=1e-3, atol=0)


def test_penalty_step_in_the_linear_regime(unit_grid):
    r = 1e-4
    m = 100.0
    tau = 1e-4
    params = ModelParams(
        1.0,
        [[1.0, 0.0], [0.0, 1.0]],
        (SYMMETRIC_OMEGA + r, SYMMETRIC_OMEGA + r),
        penalty_m=m,
    )
    third = ScalarField.constant(unit_grid, 1.0 / 3.0)
    state = PhaseState(third, third, params)
    cfg = StepConfig(tau=tau, scheme=Scheme.PENALTY, project_each_step=False)
    new, report = step_penalty(state, cfg)

    before = volume_residual(state.phi1, params.omega[0])
    after = volume_residual(new.phi1, params.omega[0])
    mean_fp_squared = f_prime(1.0 / 3.0) ** 2
    assert after - before == pytest.approx(
        -tau * m * before * mean_fp_squared, rel=1e-4
    )
    assert report.multipliers == pytest.approx((m * before, m * before))
    assert isnan(report.mm_inequality_slack)
    assert report.inner_iters == 0


def test_step_report(unit_grid, normalised_params, random_state):
    state = random_state(unit_grid, normalised_params, seed=1)
    new, report = step_multiplier(state, StepConfig(tau=1e-3))
    assert report.energy_before.total == pytest.approx(energy(state).total)
    assert report.energy_after.total == pytest.approx(energy(new).total)
    assert report.increment_l2[0] == pytest.approx(
        l2_norm(new.phi1 - state.phi1)
    )
    assert report.increment_l2[1] == pytest.approx(
        l2_norm(new.phi2 - state.phi2)
    )
    assert max(abs(r) for r in report.volume_residuals) <= 1e-12


def test_multiplier_step_is_degenerate_for_pure_phases(unit_grid):
    params = ModelParams(
        1.0, [[1.0, 0.0], [0.0, 1.0]], (1.0, 0.0), check_omega=False
    )
    state = PhaseState(
        ScalarField.constant(unit_grid, 1.0),
        ScalarField.constant(unit_grid, 0.0),
        params,
    )
    with pytest.raises(DegenerateConstraint):
        step_multiplier(state, StepConfig(tau=1e-3))


def test_projected_multiplier_run_conserves_volume(
    unit_grid, normalised_params, random_state
):
    initial = random_state(unit_grid, normalised_params, seed=2)
    cfg = StepConfig(tau=1e-3)
    traj = run(initial, cfg, horizon=5e-2, snapshot_every=1)
    assert traj.steps == 50
    for report in traj.reports:
        assert max(abs(r) for r in report.volume_residuals) <= 1e-10
    for state in traj.snapshots.values():
        assert max_residual(state) <= 1e-10


def test_unprojected_drift_shrinks_with_the_time_step(
    unit_grid, normalised_params, random_state
):
    initial = random_state(unit_grid, normalised_params, seed=3, amplitude=0.2)
    drifts = []
    for tau in (2e-3, 1e-3, 5e-4):
        cfg = StepConfig(tau=tau, project_each_step=False)
        traj = run(initial, cfg, horizon=2e-2)
        drifts.append(max_residual(traj.final))
    assert drifts[0] > drifts[1] > drifts[2]


def mm_run(initial, steps, tau=1e-2, **kwargs):
    cfg = StepConfig(tau=tau, scheme=MM, **kwargs)
    return run(initial, cfg, horizon=steps * tau, snapshot_every=1)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_minimizing_movement_energy_inequality(
    unit_grid, normalised_params, random_state, seed
):
    initial = random_state(unit_grid, normalised_params, seed=seed)
    tau = 1e-2
    traj = mm_run(initial, steps=5, tau=tau)
    for k, report in enumerate(traj.reports):
        old, new = traj.snapshots[k], traj.snapshots[k + 1]
        moved = sum(x ** 2 for x in report.increment_l2) / (2 * tau)
        assert (
            report.energy_after.total + moved
            <= report.energy_before.total + 1e-9
        )
        assert report.mm_inequality_slack <= 1e-9
        assert step_functional(new, old, tau) <= energy(old).total + 1e-9
    assert dissipation_audit(traj) <= 1e-9


def test_minimizing_movement_stays_on_constraints(
    unit_grid, normalised_params, random_state
):
    initial = random_state(unit_grid, normalised_params, seed=4)
    traj = mm_run(initial, steps=5)
    for state in traj.snapshots.values():
        assert max_residual(state) <= 1e-10


def test_minimizing_movement_euler_lagrange_residual(
    unit_grid, normalised_params, random_state
):
    initial = random_state(unit_grid, normalised_params, seed=5)
    tau = 1e-2
    cfg = StepConfig(tau=tau, scheme=MM)
    state = initial
    for _ in range(5):
        new, _ = step_minimizing_movement(state, cfg)
        r1, r2 = euler_lagrange_residual(new, state, tau)
        assert max(r1, r2) <= 10 * cfg.inner_tol_grad
        state = new


def test_minimizing_movement_rejects_states_off_the_constraints(
    unit_grid, normalised_params
):
    half = ScalarField.constant(unit_grid, 0.5)
    state = PhaseState(half, half, normalised_params)
    with pytest.raises(ConstraintViolation, match="phase 1"):
        step_minimizing_movement(state, StepConfig(tau=1e-2, scheme=MM))


def test_minimizing_movement_iteration_budget(
    unit_grid, normalised_params, random_state
):
    state = random_state(unit_grid, normalised_params, seed=6, amplitude=0.2)
    cfg = StepConfig(tau=1e-2, scheme=MM, inner_max_iters=1)
    with pytest.raises(InnerSolveFailed, match="1 iterations"):
        step_minimizing_movement(state, cfg)


def test_inner_sweep_order_does_not_change_the_solution(
    unit_grid, normalised_params, random_state
):
    initial = random_state(unit_grid, normalised_params, seed=7)
    joint = mm_run(initial, steps=3)
    alternating = mm_run(initial, steps=3, inner_sweep=InnerSweep.ALTERNATING)
    assert distance(joint.final, alternating.final) <= 1e-8


def test_inner_budget_does_not_change_a_converged_solution(
    unit_grid, normalised_params, random_state
):
    initial = random_state(unit_grid, normalised_params, seed=8)
    small = mm_run(initial, steps=3, inner_max_iters=1000)
    large = mm_run(initial, steps=3, inner_max_iters=10000)
    assert distance(small.final, large.final) <= 1e-8


def test_minimizing_movement_agrees_with_multiplier_step(
    unit_grid, normalised_params, random_state
):
    # Both schemes are consistent to first order, so one step from the same
    # state differs by O(tau^2).
    initial = random_state(unit_grid, normalised_params, seed=9)
    gaps = []
    for tau in (4e-5, 2e-5, 1e-5):
        mm, _ = step_minimizing_movement(
            initial, StepConfig(tau=tau, scheme=MM)
        )
        semi, _ = step_multiplier(initial, StepConfig(tau=tau))
        gaps.append(distance(mm, semi))
    assert gaps[0] / gaps[1] > 2.5
    assert gaps[1] / gaps[2] > 2.5


@pytest.mark.parametrize("scheme", [Scheme.MULTIPLIER, MM])
def test_runs_are_deterministic(
    unit_grid, normalised_params, random_state, scheme
):
    initial = random_state(unit_grid, normalised_params, seed=10)
    cfg = StepConfig(tau=1e-3, scheme=scheme)
    a = run(initial, cfg, horizon=5e-3)
    b = run(initial, cfg, horizon=5e-3)
    assert np.array_equal(a.final.phi1.values, b.final.phi1.values)
    assert np.array_equal(a.final.phi2.values, b.final.phi2.values)
    assert a.energies == b.energies


def test_penalty_approaches_multiplier_as_m_grows(
    unit_grid, normalised_params, random_state
):
    initial = random_state(
        unit_grid, normalised_params, seed=11, amplitude=0.2
    )
    tau, horizon = 5e-5, 1e-3
    reference = run(initial, StepConfig(tau=tau), horizon).final
    distances = []
    for m in (1e2, 1e3, 1e4):
        params = normalised_params.replace(penalty_m=m)
        start = PhaseState(initial.phi1, initial.phi2, params)
        cfg = StepConfig(
            tau=tau, scheme=Scheme.PENALTY, project_each_step=False
        )
        distances.append(distance(run(start, cfg, horizon).final, reference))
    assert distances[0] > distances[1] > distances[2]


def test_run_with_short_horizon(symmetric_state, small_step):
    traj = run(symmetric_state, small_step, horizon=small_step.tau / 2)
    assert traj.steps == 0
    assert traj.reports == ()
    assert traj.final is symmetric_state
    assert traj.energies == (energy(symmetric_state).total,)
    assert dissipation_audit(traj) == 0.0


@pytest.mark.parametrize("horizon", [0.0, -1.0, float("inf")])
def test_run_rejects_bad_horizon(symmetric_state, small_step, horizon):
    with pytest.raises(ValueError, match="Horizon"):
        run(symmetric_state, small_step, horizon)


def test_run_rejects_negative_snapshot_interval(symmetric_state, small_step):
    with pytest.raises(ValueError, match="snapshot_every"):
        run(symmetric_state, small_step, 1e-2, snapshot_every=-1)


def test_run_step_count_tolerates_round_off(symmetric_state):
    traj = run(symmetric_state, StepConfig(tau=0.1), horizon=0.3)
    assert traj.steps == 3
    assert traj.times == pytest.approx((0.1, 0.2, 0.3))


def test_run_calls_observer(symmetric_state, small_step):
    seen = []

    def observer(k, state, report):
        seen.append((k, report.energy_after.total))

    traj = run(symmetric_state, small_step, 5e-3, observer=observer)
    assert [k for k, _ in seen] == [1, 2, 3, 4, 5]
    assert [e for _, e in seen] == list(traj.energies[1:])


def test_run_snapshots(symmetric_state, small_step):
    traj = run(symmetric_state, small_step, 7e-3, snapshot_every=3)
    assert sorted(traj.snapshots) == [0, 3, 6, 7]
    assert traj.state_at(0.0) is symmetric_state
    assert traj.state_at(3e-3) is traj.snapshots[3]
    assert traj.state_at(5.5e-3) is traj.snapshots[6]
    assert traj.state_at(7e-3) is traj.final
    with pytest.raises(ValueError, match="not stored"):
        traj.state_at(1e-3)
    with pytest.raises(ValueError, match="past the end"):
        traj.state_at(1.0)


def test_interpolants_converge_under_tau_halving(
    unit_grid, normalised_params
):
    spec = InitSpec(InitKind.LAMELLAR, amplitude=0.1, stripes=1)
    initial = generate(spec, unit_grid, normalised_params)
    coarse, horizon = 2e-3, 0.02
    trajectories = [
        run(initial, StepConfig(tau=tau, scheme=MM), horizon, 1)
        for tau in (coarse, coarse / 2, coarse / 4)
    ]
    times = [k * coarse for k in range(1, 11)]

    def sup_distance(a, b):
        return max(distance(a.state_at(t), b.state_at(t)) for t in times)

    first = sup_distance(trajectories[0], trajectories[1])
    second = sup_distance(trajectories[1], trajectories[2])
    assert 0 < second < first
    assert second <= 0.75 * first


def test_run_attaches_step_index(unit_grid, normalised_params, random_state):
    initial = random_state(
        unit_grid, normalised_params, seed=12, amplitude=0.2
    )
    cfg = StepConfig(tau=10.0, project_each_step=False)
    with pytest.raises(AconError) as excinfo:
        run(initial, cfg, horizon=1000.0)
    assert excinfo.value.step_index is not None
    assert excinfo.value.step_index >= 1
    assert f"(at step {excinfo.value.step_index})" in str(excinfo.value)


def test_penalty_run_warns_about_stiffness(symmetric_state, caplog):
    params = symmetric_state.params.replace(penalty_m=1e4)
    state = PhaseState(symmetric_state.phi1, symmetric_state.phi2, params)
    cfg = StepConfig(tau=1e-3, scheme=Scheme.PENALTY)
    with caplog.at_level(logging.WARNING, logger="acon.dynamics"):
        run(state, cfg, horizon=1e-3)
    assert any("tau * M" in r.getMessage() for r in caplog.records)


def test_penalty_run_watches_penalised_energy(
    symmetric_state, monkeypatch, caplog
):
    levels = []

    def rising(state):
        levels.append(state)
        return float(len(levels))

    monkeypatch.setattr(acon.dynamics, "penalty_energy", rising)
    cfg = StepConfig(tau=1e-3, scheme=Scheme.PENALTY)
    with caplog.at_level(logging.WARNING, logger="acon.dynamics"):
        run(symmetric_state, cfg, horizon=3e-3)
    assert len(levels) == 4
    assert levels[0] is symmetric_state
    messages = [r.getMessage() for r in caplog.records]
    assert "Penalised energy increased on 3 of 3 penalty steps." in messages

    levels.clear()
    caplog.clear()
    run(symmetric_state, StepConfig(tau=1e-3), horizon=3e-3)
    assert not levels
    assert not any("increased" in r.getMessage() for r in caplog.records)


def test_penalty_run_descends_penalised_energy(
    unit_grid, normalised_params, random_state, caplog
):
    initial = random_state(unit_grid, normalised_params, seed=44)
    levels = [penalty_energy(initial)]

    def record(k, state, report):
        levels.append(penalty_energy(state))

    cfg = StepConfig(tau=1e-4, scheme=Scheme.PENALTY, project_each_step=False)
    with caplog.at_level(logging.WARNING, logger="acon.dynamics"):
        run(initial, cfg, horizon=2e-3, observer=record)
    assert len(levels) == 21
    for before, after in zip(levels, levels[1:]):
        assert after <= before + 1e-12
    assert not any("increased" in r.getMessage() for r in caplog.records)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_minimizing_movement_energy_inequality_long(normalised_params, seed):
    grid = PeriodicGrid((32, 32), (0.5, 0.5))
    initial = generate(InitSpec(seed=seed), grid, normalised_params)
    traj = mm_run(initial, steps=50)
    tau = 1e-2
    for report in traj.reports:
        moved = sum(x ** 2 for x in report.increment_l2) / (2 * tau)
        assert (
            report.energy_after.total + moved
            <= report.energy_before.total + 1e-9
        )
        assert max(abs(r) for r in report.volume_residuals) <= 1e-10
    assert dissipation_audit(traj) <= 1e-9
