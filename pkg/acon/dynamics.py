# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
Time stepping for the volume-constrained Allen-Cahn-Ohta-Nakazawa flow.

Three schemes advance a `PhaseState` by one step of size ``tau``:

``Scheme.MULTIPLIER``
    Semi-implicit: the coupled Laplacian block is implicit, solved mode by
    mode, everything else (triple-well forces, long-range forces, and the
    Lagrange multiplier term) is explicit. Optionally followed by a
    projection back onto the constraints.

``Scheme.PENALTY``
    The same skeleton, with the penalty force replacing the multiplier
    term.

``Scheme.MINIMIZING_MOVEMENT``
    Each step minimizes
    ``F_tau(phi) = E(phi) + sum_i ||phi_i - phi_i^k||^2 / 2tau`` over the
    constraint manifold, by preconditioned projected gradient descent with
    Armijo backtracking. The energy is then non-increasing by construction,
    up to the reported slack.

`run` iterates a stepper over a time horizon and collects a `Trajectory`.
"""
from typing import TYPE_CHECKING, NamedTuple
from dataclasses import dataclass
from enum import Enum
from math import ceil, floor, isfinite, nan, sqrt
import logging

import numpy as np

from acon.chemistry import f_prime
from acon.constraint import (
    DEFAULT_GUARD,
    MultiplierGuard,
    _multiplier,
    _project,
    _residual,
    discrete_multiplier,
)
from acon.energy import (
    PhaseState,
    _derivative_values,
    _energy_values,
    _nonlinear_forces,
    _terms,
    energy,
    penalty_energy,
    variational_derivatives,
)
from acon.errors import (
    AconError,
    BlowUp,
    ConstraintViolation,
    DegenerateConstraint,
    InnerSolveFailed,
    ProjectionFailed,
)
from acon.grid import ScalarField, _forward, _inner, _inverse, wave_table

if TYPE_CHECKING:
    from typing import Callable, Dict, Optional, Sequence, Tuple

    from acon.energy import EnergyBreakdown
    from acon.grid import PeriodicGrid
    from acon.typedefs import FloatArray, Pair

    StepFunction = Callable[
        [PhaseState, "StepConfig"], Tuple[PhaseState, "StepReport"]
    ]
    Observer = Callable[[int, PhaseState, "StepReport"], None]
    Forcing = Callable[[FloatArray, FloatArray, FloatArray, FloatArray], Pair]

__all__ = [
    "Scheme",
    "InnerSweep",
    "StepConfig",
    "StepReport",
    "Trajectory",
    "BLOWUP_BOUND",
    "step_multiplier",
    "step_penalty",
    "step_minimizing_movement",
    "euler_lagrange_residual",
    "step",
    "run",
]

log = logging.getLogger(__name__)

#: A field whose largest magnitude exceeds this is considered blown up.
BLOWUP_BOUND = 1e6

#: Constraint residual a minimizing-movement step accepts on its input.
MM_INPUT_TOL = 1e-10

_ARMIJO_C = 1e-4
_MIN_STEP = 1e-10


class Scheme(Enum):
    """The available time-stepping schemes."""

    MULTIPLIER = "multiplier"
    PENALTY = "penalty"
    MINIMIZING_MOVEMENT = "mm"

    @classmethod
    def from_name(cls, name: "str") -> "Scheme":
        """
        Look a scheme up by its value (``multiplier``, ``penalty``, ``mm``)
        or its member name, case-insensitively.

        :raises ValueError: If no scheme goes by ``name``.
        """
        key = name.strip().lower()
        for scheme in cls:
            if key in (scheme.value, scheme.name.lower()):
                return scheme
        choices = ", ".join(s.value for s in cls)
        raise ValueError(
            f"Unknown scheme {name!r}; expected one of {choices}."
        )


class InnerSweep(Enum):
    """
    How the minimizing-movement inner solver updates the two phases.

    ``JOINT`` moves both phases at once along the jointly preconditioned
    gradient. ``ALTERNATING`` moves one phase per iteration, using only its
    own diagonal block of the preconditioner.
    """

    JOINT = "joint"
    ALTERNATING = "alternating"

    @classmethod
    def from_name(cls, name: "str") -> "InnerSweep":
        """:raises ValueError: If no sweep order goes by ``name``."""
        key = name.strip().lower()
        for sweep in cls:
            if key == sweep.value:
                return sweep
        choices = ", ".join(s.value for s in cls)
        raise ValueError(
            f"Unknown inner sweep {name!r}; expected one of {choices}."
        )


@dataclass(frozen=True)
class StepConfig:
    """
    Everything a stepper needs besides the state.

    :param tau: Time step, positive.
    :param scheme: Which scheme `step` and `run` use.
    :param project_each_step: Project onto the constraints after every
                              multiplier or penalty step. Ignored by the
                              minimizing-movement scheme, which always
                              stays on the constraint manifold.
    :param inner_tol_grad: Minimizing movement: tolerance on the L2 norm of
                           the constrained gradient of ``F_tau``.
    :param inner_tol_constraint: Minimizing movement: tolerance on
                                 ``|mean(f(phi_i)) - omega_i|``.
    :param inner_max_iters: Minimizing movement: iteration budget per step.
    :param guard: Floor for the multiplier denominators.
    :param inner_sweep: Minimizing movement: update order of the phases.

    :raises ValueError: If ``tau`` or a tolerance isn't positive, or
                        ``inner_max_iters`` is less than 1.
    """

    tau: float
    scheme: Scheme = Scheme.MULTIPLIER
    project_each_step: bool = True
    inner_tol_grad: float = 1e-9
    inner_tol_constraint: float = 1e-11
    inner_max_iters: int = 10000
    guard: MultiplierGuard = DEFAULT_GUARD
    inner_sweep: InnerSweep = InnerSweep.JOINT

    def __post_init__(self) -> None:
        for name in ("tau", "inner_tol_grad", "inner_tol_constraint"):
            value = getattr(self, name)
            if not (value > 0 and isfinite(value)):
                raise ValueError(f"{name} must be positive, got {value}.")
        if self.inner_max_iters < 1:
            raise ValueError(
                f"inner_max_iters must be at least 1, got "
                f"{self.inner_max_iters}."
            )


class StepReport(NamedTuple):
    """
    What happened during one step.

    ``multipliers`` holds the Lagrange multipliers of the step, or for the
    penalty scheme their stand-ins ``M * integral(f(phi_i) - omega_i)``.
    ``mm_inequality_slack`` is
    ``E_after + sum_i ||increment_i||^2 / 2tau - E_before`` for
    minimizing-movement steps (nonpositive up to round-off) and NaN for the
    other schemes.
    """

    energy_before: "EnergyBreakdown"
    energy_after: "EnergyBreakdown"
    multipliers: "Pair"
    volume_residuals: "Pair"
    increment_l2: "Pair"
    inner_iters: int
    mm_inequality_slack: float


class Trajectory:
    """
    The outcome of `run`.

    ``reports[k]`` describes the step from time ``k * tau`` to
    ``(k + 1) * tau``. ``snapshots`` maps step numbers to the states
    stored along the way; step 0 and the final step are always stored.
    """

    __slots__ = ("tau", "initial", "final", "reports", "snapshots")

    def __init__(
        self,
        tau: "float",
        initial: "PhaseState",
        final: "PhaseState",
        reports: "Sequence[StepReport]",
        snapshots: "Dict[int, PhaseState]",
    ) -> None:
        self.tau = tau
        self.initial = initial
        self.final = final
        self.reports: "Tuple[StepReport, ...]" = tuple(reports)
        self.snapshots = snapshots

    @property
    def steps(self) -> "int":
        return len(self.reports)

    @property
    def times(self) -> "Tuple[float, ...]":
        """End time of every reported step."""
        return tuple((k + 1) * self.tau for k in range(self.steps))

    @property
    def energies(self) -> "Tuple[float, ...]":
        """Total energy at step 0 and after every step."""
        if not self.reports:
            return (energy(self.initial).total,)
        return (self.reports[0].energy_before.total,) + tuple(
            r.energy_after.total for r in self.reports
        )

    def state_at(self, t: "float") -> "PhaseState":
        """
        The piecewise-constant interpolant: the state of step ``k`` on
        ``((k - 1) * tau, k * tau]``, and the initial state for ``t <= 0``.

        :raises ValueError: If ``t`` is past the end of the run, or the
                            state it needs was not stored.
        """
        k = max(0, ceil(t / self.tau - 1e-9))
        if k > self.steps:
            raise ValueError(
                f"t={t} is past the end of the run at "
                f"{self.steps * self.tau}."
            )
        try:
            return self.snapshots[k]
        except KeyError:
            raise ValueError(
                f"The state of step {k} was not stored; run with a "
                f"snapshot interval that divides {k}."
            ) from None

    def __repr__(self) -> "str":
        return (
            f"<Trajectory of {self.steps} steps, tau={self.tau}, "
            f"{len(self.snapshots)} snapshots>"
        )


# Shared machinery


def _implicit_solve(
    r1: "FloatArray",
    r2: "FloatArray",
    grid: "PeriodicGrid",
    scale: "float",
) -> "Tuple[FloatArray, FloatArray]":
    # Solve (I + scale |k|^2 A) x = r mode by mode, A = [[1, 1/2], [1/2, 1]].
    a = scale * wave_table(grid).squared_wavenumbers
    diag = 1.0 + a
    off = 0.5 * a
    det = diag * diag - off * off
    h1, h2 = _forward(r1, grid), _forward(r2, grid)
    x1 = (diag * h1 - off * h2) / det
    x2 = (diag * h2 - off * h1) / det
    return _inverse(x1, grid), _inverse(x2, grid)


def _diagonal_solve(
    r: "FloatArray", grid: "PeriodicGrid", scale: "float"
) -> "FloatArray":
    symbol = 1.0 / (1.0 + scale * wave_table(grid).squared_wavenumbers)
    return _inverse(_forward(r, grid) * symbol, grid)


def _check_bounded(values: "FloatArray", i: "int") -> None:
    if not np.isfinite(values).all():
        raise BlowUp(
            f"phi_{i} became non-finite; the time step is likely too large."
        )
    peak = float(np.abs(values).max())
    if peak > BLOWUP_BOUND:
        raise BlowUp(
            f"max|phi_{i}| = {peak:.3e} exceeds {BLOWUP_BOUND:.0e}; the time "
            f"step is likely too large."
        )


def _l2(values: "FloatArray", grid: "PeriodicGrid") -> "float":
    return sqrt(_inner(values, values, grid))


def _finish(
    state: "PhaseState",
    x1: "FloatArray",
    x2: "FloatArray",
    before: "EnergyBreakdown",
    after: "Optional[EnergyBreakdown]",
    multipliers: "Pair",
    inner_iters: "int",
    slack: "float",
) -> "Tuple[PhaseState, StepReport]":
    grid = state.grid
    params = state.params
    new = state.with_fields(ScalarField(grid, x1), ScalarField(grid, x2))
    if after is None:
        after = energy(new)
    o1, o2 = params.omega
    report = StepReport(
        energy_before=before,
        energy_after=after,
        multipliers=multipliers,
        volume_residuals=(_residual(x1, o1, grid), _residual(x2, o2, grid)),
        increment_l2=(
            _l2(x1 - state.phi1.values, grid),
            _l2(x2 - state.phi2.values, grid),
        ),
        inner_iters=inner_iters,
        mm_inequality_slack=slack,
    )
    return new, report


def _semi_implicit(
    state: "PhaseState",
    cfg: "StepConfig",
    forcing: "Forcing",
) -> "Tuple[PhaseState, StepReport]":
    # ``forcing(d1, d2, fp1, fp2)`` returns the coefficients (c1, c2) of the
    # constraint terms c_i * f'(phi_i) added to the explicit forces.
    grid = state.grid
    params = state.params
    tau = cfg.tau
    p1, p2 = state.phi1.values, state.phi2.values

    terms = _terms(p1, p2, params, grid)
    before = _energy_values(p1, p2, params, grid, terms)
    n1, n2 = _nonlinear_forces(p1, p2, params, terms)
    eps = params.epsilon
    d1 = n1 - eps * terms.lap1 - (0.5 * eps) * terms.lap2
    d2 = n2 - eps * terms.lap2 - (0.5 * eps) * terms.lap1
    fp1, fp2 = f_prime(p1), f_prime(p2)
    c1, c2 = forcing(d1, d2, fp1, fp2)

    x1, x2 = _implicit_solve(
        p1 - tau * (n1 + c1 * fp1),
        p2 - tau * (n2 + c2 * fp2),
        grid,
        tau * eps,
    )
    _check_bounded(x1, 1)
    _check_bounded(x2, 2)
    if cfg.project_each_step:
        o1, o2 = params.omega
        x1 = _project(x1, o1, grid, cfg.guard)
        x2 = _project(x2, o2, grid, cfg.guard)
    return _finish(state, x1, x2, before, None, (c1, c2), 0, nan)


def step_multiplier(
    state: "PhaseState", cfg: "StepConfig"
) -> "Tuple[PhaseState, StepReport]":
    """
    One semi-implicit step with exact Lagrange multipliers.

    The multipliers are evaluated at the start of the step and frozen. The
    update solves, for each Fourier mode,
    ``(I + tau eps |k|^2 A) phi^{k+1} = phi^k - tau (N + lambda f'(phi^k))``
    where ``N`` collects the triple-well and long-range forces.

    :param state: The state at time ``k * tau``.
    :type state: `PhaseState`

    :param cfg: Step size, guard and projection setting.
    :type cfg: `StepConfig`

    :return: The new state and a report of the step.

    :raises DegenerateConstraint: If a phase is below the guard floor.
    :raises ProjectionFailed: If the post-step projection fails.
    :raises BlowUp: If a field exceeds `BLOWUP_BOUND` in magnitude.
    """
    grid = state.grid
    guard = cfg.guard

    def forcing(
        d1: "FloatArray",
        d2: "FloatArray",
        fp1: "FloatArray",
        fp2: "FloatArray",
    ) -> "Pair":
        return (
            _multiplier(-d1, fp1, grid, guard, "phase 1"),
            _multiplier(-d2, fp2, grid, guard, "phase 2"),
        )

    return _semi_implicit(state, cfg, forcing)


def step_penalty(
    state: "PhaseState", cfg: "StepConfig"
) -> "Tuple[PhaseState, StepReport]":
    """
    One semi-implicit step of the penalty form.

    ``lambda_i f'(phi_i)`` is replaced by
    ``M * integral(f(phi_i) - omega_i) * f'(phi_i)``, with ``M`` the
    ``penalty_m`` of the state's parameters. No denominators are involved,
    so no guard applies, except to the optional projection.

    Explicit penalty forcing is only stable for ``tau * M`` of order one;
    `run` warns above ``tau * M = 1``.

    :raises BlowUp: If a field exceeds `BLOWUP_BOUND` in magnitude.
    """
    grid = state.grid
    m = state.params.penalty_m
    o1, o2 = state.params.omega

    def forcing(
        d1: "FloatArray",
        d2: "FloatArray",
        fp1: "FloatArray",
        fp2: "FloatArray",
    ) -> "Pair":
        v1 = _residual(state.phi1.values, o1, grid) * grid.total_volume
        v2 = _residual(state.phi2.values, o2, grid) * grid.total_volume
        return m * v1, m * v2

    return _semi_implicit(state, cfg, forcing)


class _Evaluation(NamedTuple):
    u1: "FloatArray"
    u2: "FloatArray"
    energy: "EnergyBreakdown"
    value: float
    g1: "FloatArray"
    g2: "FloatArray"
    mu: "Pair"


class _StepFunctional:
    """``F_tau`` around a fixed previous state, and its gradient."""

    __slots__ = ("q1", "q2", "params", "grid", "tau", "guard")

    def __init__(self, previous: "PhaseState", cfg: "StepConfig") -> None:
        self.q1 = previous.phi1.values
        self.q2 = previous.phi2.values
        self.params = previous.params
        self.grid = previous.grid
        self.tau = cfg.tau
        self.guard = cfg.guard

    def evaluate(self, u1: "FloatArray", u2: "FloatArray") -> "_Evaluation":
        grid, tau = self.grid, self.tau
        terms = _terms(u1, u2, self.params, grid)
        e = _energy_values(u1, u2, self.params, grid, terms)
        d1, d2 = _derivative_values(u1, u2, self.params, terms)
        s1, s2 = u1 - self.q1, u2 - self.q2
        big1 = d1 + s1 / tau
        big2 = d2 + s2 / tau
        fp1, fp2 = f_prime(u1), f_prime(u2)
        mu1 = _multiplier(-big1, fp1, grid, self.guard, "phase 1")
        mu2 = _multiplier(-big2, fp2, grid, self.guard, "phase 2")
        distance = _inner(s1, s1, grid) + _inner(s2, s2, grid)
        return _Evaluation(
            u1=u1,
            u2=u2,
            energy=e,
            value=e.total + distance / (2.0 * tau),
            g1=big1 + mu1 * fp1,
            g2=big2 + mu2 * fp2,
            mu=(mu1, mu2),
        )


def step_minimizing_movement(
    state: "PhaseState", cfg: "StepConfig"
) -> "Tuple[PhaseState, StepReport]":
    """
    One minimizing-movement step.

    Approximately minimizes
    ``F_tau(phi) = E(phi) + sum_i ||phi_i - phi_i^k||^2 / 2tau`` over the
    states satisfying both volume constraints, starting from the current
    state. Each inner iteration

    1. forms the constrained gradient ``g_i = G_i + mu_i f'(u_i)``, where
       ``G_i = dE/dphi_i(u) + (u_i - phi_i^k)/tau`` and ``mu_i`` makes
       ``g_i`` orthogonal to ``f'(u_i)``,
    2. preconditions it with ``tau (I + tau eps |k|^2 A)^-1`` (or its
       diagonal, for `InnerSweep.ALTERNATING`),
    3. backtracks along the preconditioned direction, projecting every
       trial point onto the constraints, until ``F_tau`` decreases enough.

    The solver stops once ``||g||_2 <= cfg.inner_tol_grad`` and both
    constraint residuals are below ``cfg.inner_tol_constraint``.

    :raises ConstraintViolation: If the input state is off the constraints
                                 by more than ``1e-10``.
    :raises InnerSolveFailed: If the iteration budget runs out, the line
                              search stalls, or the discrete energy
                              inequality fails by more than
                              ``1e-10 * (1 + |E|)``.
    :raises DegenerateConstraint: If a phase is below the guard floor.
    """
    grid = state.grid
    params = state.params
    tau = cfg.tau
    scale = tau * params.epsilon
    o1, o2 = params.omega
    q1, q2 = state.phi1.values, state.phi2.values

    for i, (q, omega) in enumerate(((q1, o1), (q2, o2)), start=1):
        r = _residual(q, omega, grid)
        if abs(r) > MM_INPUT_TOL:
            raise ConstraintViolation(
                f"Minimizing movement needs a state on the constraints, but "
                f"phase {i} is off by {r:.3e}."
            )

    functional = _StepFunctional(state, cfg)
    before = energy(state)
    ev = functional.evaluate(
        _project(q1, o1, grid, cfg.guard), _project(q2, o2, grid, cfg.guard)
    )
    joint = cfg.inner_sweep is InnerSweep.JOINT

    iters = 0
    while True:
        iters += 1
        residual = sqrt(
            _inner(ev.g1, ev.g1, grid) + _inner(ev.g2, ev.g2, grid)
        )
        violation = max(
            abs(_residual(ev.u1, o1, grid)), abs(_residual(ev.u2, o2, grid))
        )
        if (
            residual <= cfg.inner_tol_grad
            and violation <= cfg.inner_tol_constraint
        ):
            break
        if iters >= cfg.inner_max_iters:
            raise InnerSolveFailed(
                f"Minimizing movement did not converge in "
                f"{cfg.inner_max_iters} iterations: |g|={residual:.3e}, "
                f"constraint residual {violation:.3e}."
            )
        log.debug(
            "Inner iteration %d: F=%.16g, |g|=%.3e, residual=%.3e",
            iters,
            ev.value,
            residual,
            violation,
        )

        if joint:
            d1, d2 = _implicit_solve(ev.g1, ev.g2, grid, scale)
            d1, d2 = -tau * d1, -tau * d2
        elif iters % 2:
            d1 = -tau * _diagonal_solve(ev.g1, grid, scale)
            d2 = np.zeros_like(d1)
        else:
            d2 = -tau * _diagonal_solve(ev.g2, grid, scale)
            d1 = np.zeros_like(d2)
        slope = _inner(ev.g1, d1, grid) + _inner(ev.g2, d2, grid)
        allowance = 64.0 * np.finfo(np.float64).eps * (1.0 + abs(ev.value))

        alpha = 1.0
        while True:
            trial = _trial(functional, ev, d1, d2, alpha, cfg)
            if (
                trial is not None
                and trial.value
                <= ev.value + _ARMIJO_C * alpha * slope + allowance
            ):
                ev = trial
                break
            alpha *= 0.5
            if alpha < _MIN_STEP:
                raise InnerSolveFailed(
                    f"Line search stalled at inner iteration {iters}: "
                    f"|g|={residual:.3e}, F={ev.value:.16g}."
                )

    slack = ev.value - before.total
    if slack > 1e-10 * (1.0 + abs(before.total)):
        raise InnerSolveFailed(
            f"Discrete energy inequality violated by {slack:.3e}."
        )
    log.debug("Minimizing movement converged in %d iterations", iters)
    return _finish(
        state, ev.u1, ev.u2, before, ev.energy, ev.mu, iters, slack
    )


def _trial(
    functional: "_StepFunctional",
    ev: "_Evaluation",
    d1: "FloatArray",
    d2: "FloatArray",
    alpha: "float",
    cfg: "StepConfig",
) -> "Optional[_Evaluation]":
    # The projected trial point, or None if it is out of bounds or can't
    # be projected.
    grid = functional.grid
    o1, o2 = functional.params.omega
    t1 = ev.u1 + alpha * d1
    t2 = ev.u2 + alpha * d2
    try:
        _check_bounded(t1, 1)
        _check_bounded(t2, 2)
        t1 = _project(t1, o1, grid, cfg.guard)
        t2 = _project(t2, o2, grid, cfg.guard)
        return functional.evaluate(t1, t2)
    except (BlowUp, ProjectionFailed, DegenerateConstraint) as e:
        log.debug("Rejected trial step alpha=%.3e: %s", alpha, e)
        return None


def euler_lagrange_residual(
    new: "PhaseState",
    old: "PhaseState",
    tau: "float",
    guard: "MultiplierGuard" = DEFAULT_GUARD,
) -> "Pair":
    """
    L2 norms of the Euler-Lagrange residuals of a minimizing-movement step.

    For each phase, the norm of
    ``(new_i - old_i)/tau + dE/dphi_i(new) + lambda_i f'(new_i)``, with
    ``lambda_i`` from `acon.constraint.discrete_multiplier`. Both vanish at
    an exact constrained minimizer of ``F_tau``.
    """
    derivatives = variational_derivatives(new)
    grid = new.grid
    norms = []
    for i, derivative in enumerate(derivatives, start=1):
        phi_new, phi_old = new.field(i), old.field(i)
        lam = discrete_multiplier(new, old, i, tau, guard)
        field = (
            (phi_new.values - phi_old.values) / tau
            + derivative.values
            + lam * f_prime(phi_new.values)
        )
        norms.append(_l2(field, grid))
    return norms[0], norms[1]


_STEPPERS: "Dict[Scheme, StepFunction]" = {
    Scheme.MULTIPLIER: step_multiplier,
    Scheme.PENALTY: step_penalty,
    Scheme.MINIMIZING_MOVEMENT: step_minimizing_movement,
}


def step(
    state: "PhaseState", cfg: "StepConfig"
) -> "Tuple[PhaseState, StepReport]":
    """Advance ``state`` by one step of the scheme named in ``cfg``."""
    return _STEPPERS[cfg.scheme](state, cfg)


def run(
    initial: "PhaseState",
    cfg: "StepConfig",
    horizon: "float",
    snapshot_every: "int" = 0,
    observer: "Optional[Observer]" = None,
) -> "Trajectory":
    """
    Advance ``initial`` by ``floor(horizon / tau)`` steps.

    :param initial: The state at time 0.
    :type initial: `PhaseState`

    :param cfg: Scheme and step parameters.
    :type cfg: `StepConfig`

    :param horizon: Final time, positive. A horizon shorter than one step
                    gives an empty trajectory.
    :type horizon: float

    :param snapshot_every: Store every ``snapshot_every``-th state in the
                           trajectory; 0 stores only the first and the last.
    :type snapshot_every: int

    :param observer: Called as ``observer(k, state, report)`` after every
                     step ``k`` (1-based).
    :type observer: Callable[[int, PhaseState, StepReport], None]

    :return: The trajectory.
    :rtype: `Trajectory`

    :raises ValueError: If ``horizon`` isn't positive or ``snapshot_every``
                        is negative.
    :raises AconError: Any stepper error, with ``step_index`` set to the
                       step that failed.
    """
    if not (horizon > 0 and isfinite(horizon)):
        raise ValueError(f"Horizon must be positive, got {horizon}.")
    if snapshot_every < 0:
        raise ValueError(
            f"snapshot_every must not be negative, got {snapshot_every}."
        )
    tau = cfg.tau
    steps = int(floor(horizon / tau * (1.0 + 1e-12)))
    stepper = _STEPPERS[cfg.scheme]
    m = initial.params.penalty_m
    if cfg.scheme is Scheme.PENALTY and tau * m > 1.0:
        log.warning(
            "tau * M = %g exceeds 1; the explicit penalty force may be "
            "unstable.",
            tau * m,
        )
    log.info(
        "Running %d %s steps with tau=%g on %s",
        steps,
        cfg.scheme.value,
        tau,
        initial.grid,
    )

    # The penalty scheme descends the penalised energy, not E itself.
    penalised = cfg.scheme is Scheme.PENALTY
    level = penalty_energy(initial) if penalised else 0.0
    state = initial
    reports = []
    snapshots = {0: initial}
    increases = 0
    for k in range(1, steps + 1):
        try:
            state, report = stepper(state, cfg)
        except AconError as e:
            e.step_index = k
            raise
        if penalised:
            before, after = level, penalty_energy(state)
            level = after
        else:
            before = report.energy_before.total
            after = report.energy_after.total
        if after > before + 1e-12 * (1.0 + abs(before)):
            increases += 1
        reports.append(report)
        if snapshot_every and k % snapshot_every == 0:
            snapshots[k] = state
        if observer is not None:
            observer(k, state, report)
    snapshots[steps] = state

    if increases and cfg.scheme is not Scheme.MINIMIZING_MOVEMENT:
        log.warning(
            "%s increased on %d of %d %s steps.",
            "Penalised energy" if penalised else "Energy",
            increases,
            steps,
            cfg.scheme.value,
        )
    log.info(
        "Finished %d steps at t=%g, E=%.16g",
        steps,
        steps * tau,
        reports[-1].energy_after.total if reports else energy(state).total,
    )
    return Trajectory(tau, initial, state, reports, snapshots)
