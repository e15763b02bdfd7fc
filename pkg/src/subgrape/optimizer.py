"""Iterative ascent on the gate fidelity: adaptive-step steepest ascent and a
limited-memory quasi-Newton variant, with restart support.

The update is u <- u + eps * grad(Phi) with a scalar step chosen adaptively:
a trial step is accepted only if it increases Phi, the step doubles after an
acceptance and halves on a rejection. The quasi-Newton method preconditions
the gradient with an L-BFGS inverse-Hessian approximation (memory 10) under
the same acceptance rule; it usually converges in far fewer iterations and is
an extrapolation beyond the plain ascent baseline.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import numpy.typing as npt

from .engine import GradientResult, fidelity, gradient, propagate
from .model import ControlProblem, validate_pulse
from .robust import PhaseEnsemble, phase_transfer_sets, robust_fidelity, robust_gradient
from .transfer import build_transfer_set

NDArrayFloat = npt.NDArray[np.float64]
ProgressCallback = Callable[[dict], None]

__all__ = [
    "OptimizerConfig",
    "OptimizationResult",
    "RestartRecord",
    "NumericalFailure",
    "optimize",
    "multistart",
    "random_initial_pulse",
]

_STATUSES = ("converged", "target_reached", "iteration_cap", "stalled")


class NumericalFailure(RuntimeError):
    """Non-finite fidelity or gradient; carries a diagnostic state dump."""

    def __init__(self, message: str, state: dict):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class OptimizerConfig:
    """Ascent settings.

    ``initial_step`` is the dimensionless scalar step of the update rule;
    ``grow``/``shrink`` rescale it after accepted/rejected trials. The run
    stops when the infidelity reaches ``target_infidelity``, the gradient
    sup-norm falls below ``gradient_norm_tolerance``, the iteration cap is
    hit, or a full line search fails (stalled).
    """

    method: str = "steepest"
    initial_step: float = 1.0
    grow: float = 2.0
    shrink: float = 0.5
    max_iterations: int = 500
    target_infidelity: float = 1e-6
    gradient_norm_tolerance: float = 1e-10
    max_line_search_steps: int = 40
    restarts: int = 1
    seed: int = 1234
    memory: int = 10
    initial_amplitude: float = 1.0
    use_exact_derivative: bool = True

    def __post_init__(self) -> None:
        if self.method not in ("steepest", "quasi_newton"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.grow > 1.0 > self.shrink > 0.0):
            raise ValueError(
                f"need grow > 1 > shrink > 0, got grow={self.grow}, shrink={self.shrink}"
            )
        if not 0.0 < self.target_infidelity < 1.0:
            raise ValueError(
                f"target_infidelity must be in (0, 1), got {self.target_infidelity}"
            )
        if self.initial_step <= 0:
            raise ValueError(f"initial_step must be positive, got {self.initial_step}")
        if self.max_iterations < 1 or self.max_line_search_steps < 1:
            raise ValueError("iteration and line-search caps must be >= 1")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.memory < 1:
            raise ValueError(f"memory must be >= 1, got {self.memory}")


@dataclass(frozen=True)
class RestartRecord:
    seed: int
    fidelity: float
    status: str
    iterations: int


@dataclass(frozen=True)
class OptimizationResult:
    """Outcome of one optimization run (or the best of a multistart)."""

    pulse: NDArrayFloat
    fidelity: float
    status: str
    iterations: int
    fidelity_history: NDArrayFloat
    trace: tuple[dict, ...]
    fidelity_evaluations: int
    gradient_evaluations: int
    seed: int
    restart_records: tuple[RestartRecord, ...] = field(default_factory=tuple)

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity


def random_initial_pulse(
    problem: ControlProblem, amplitude_scale: float, seed: int
) -> NDArrayFloat:
    """Seeded uniform draw in [-amplitude_scale, +amplitude_scale], shape (K, N)."""
    if amplitude_scale < 0:
        raise ValueError(f"amplitude_scale must be >= 0, got {amplitude_scale}")
    rng = np.random.default_rng(seed)
    shape = (problem.n_controls, problem.grid.pixel_count)
    return rng.uniform(-amplitude_scale, amplitude_scale, shape)


class _Objective:
    """Fidelity and gradient evaluations with prebuilt transfers and counters."""

    def __init__(
        self,
        problem: ControlProblem,
        ensemble: PhaseEnsemble | None,
        exact: bool,
    ):
        self.problem = problem
        self.ensemble = ensemble
        self.exact = exact
        if ensemble is None:
            self._transfers = build_transfer_set(problem, 0.0)
        else:
            self._transfer_sets = phase_transfer_sets(problem, ensemble)
        self.fidelity_evaluations = 0
        self.gradient_evaluations = 0

    def value(self, u: NDArrayFloat) -> float:
        self.fidelity_evaluations += 1
        if self.ensemble is None:
            record = propagate(self.problem, u, 0.0, self._transfers)
            return fidelity(self.problem, record)
        return robust_fidelity(self.problem, u, self.ensemble, self._transfer_sets)

    def value_and_gradient(self, u: NDArrayFloat) -> GradientResult:
        self.fidelity_evaluations += 1
        self.gradient_evaluations += 1
        if self.ensemble is None:
            return gradient(self.problem, u, 0.0, self._transfers, exact=self.exact)
        return robust_gradient(
            self.problem, u, self.ensemble, self._transfer_sets, exact=self.exact
        )


def _check_finite(phi: float, grad: NDArrayFloat, iteration: int, u: NDArrayFloat) -> None:
    if np.isfinite(phi) and np.all(np.isfinite(grad)):
        return
    raise NumericalFailure(
        f"non-finite objective at iteration {iteration}: fidelity={phi}",
        state={
            "iteration": iteration,
            "fidelity": float(phi),
            "pulse": u.tolist(),
            "gradient_finite": bool(np.all(np.isfinite(grad))),
        },
    )


def _clip(problem: ControlProblem, u: NDArrayFloat) -> NDArrayFloat:
    bound = problem.amplitude_bound
    if bound is None:
        return u
    return np.clip(u, -bound, bound)


def optimize(
    problem: ControlProblem,
    config: OptimizerConfig,
    initial: npt.ArrayLike | None = None,
    ensemble: PhaseEnsemble | None = None,
    progress: ProgressCallback | None = None,
) -> OptimizationResult:
    """Run one ascent from ``initial`` (or a seeded random pulse).

    When an ensemble is given the objective is the phase-averaged fidelity.
    Accepted steps never decrease the objective; padded transfer pixels are
    structurally fixed at zero (the pulse array holds only real pixels).
    """
    if initial is None:
        u = random_initial_pulse(problem, config.initial_amplitude, config.seed)
    else:
        u = validate_pulse(problem, initial).copy()
    obj = _Objective(problem, ensemble, config.use_exact_derivative)

    res = obj.value_and_gradient(u)
    phi, grad = res.fidelity, res.pixel_gradient
    _check_finite(phi, grad, 0, u)

    history = [phi]
    trace: list[dict] = []
    eps = config.initial_step
    status = "iteration_cap"
    iteration = 0
    memory: deque[tuple[NDArrayFloat, NDArrayFloat, float]] = deque(maxlen=config.memory)
    g_prev: NDArrayFloat | None = None
    u_prev: NDArrayFloat | None = None

    def emit(step_used: float) -> None:
        record = {
            "iteration": iteration,
            "fidelity": float(phi),
            "infidelity": float(1.0 - phi),
            "step": float(step_used),
            "gradient_norm": float(np.max(np.abs(grad))),
        }
        trace.append(record)
        if progress is not None:
            progress(record)

    emit(0.0)
    for iteration in range(1, config.max_iterations + 1):
        if 1.0 - phi < config.target_infidelity:
            status = "target_reached"
            iteration -= 1
            break
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm < config.gradient_norm_tolerance:
            status = "converged"
            iteration -= 1
            break

        if config.method == "steepest":
            accepted, u, phi, eps = _steepest_step(obj, problem, u, phi, grad, eps, config)
        else:
            accepted, u, phi, eps = _quasi_newton_step(
                obj, problem, u, phi, grad, memory, eps, config
            )
        if not accepted:
            status = "stalled"
            break

        res = obj.value_and_gradient(u)
        new_phi, new_grad = res.fidelity, res.pixel_gradient
        _check_finite(new_phi, new_grad, iteration, u)
        # The line search evaluated the objective at u already; reuse the
        # gradient-pass value (identical arithmetic) for the history.
        phi = new_phi
        if config.method == "quasi_newton" and u_prev is not None:
            _update_memory(memory, u, u_prev, new_grad, g_prev)
        u_prev, g_prev = u.copy(), new_grad.copy()
        grad = new_grad
        history.append(phi)
        emit(eps)
    else:
        iteration = config.max_iterations

    return OptimizationResult(
        pulse=u,
        fidelity=float(phi),
        status=status,
        iterations=iteration,
        fidelity_history=np.asarray(history),
        trace=tuple(trace),
        fidelity_evaluations=obj.fidelity_evaluations,
        gradient_evaluations=obj.gradient_evaluations,
        seed=config.seed,
    )


def _steepest_step(
    obj: _Objective,
    problem: ControlProblem,
    u: NDArrayFloat,
    phi: float,
    grad: NDArrayFloat,
    eps: float,
    config: OptimizerConfig,
) -> tuple[bool, NDArrayFloat, float, float]:
    for _ in range(config.max_line_search_steps):
        trial = _clip(problem, u + eps * grad)
        phi_trial = obj.value(trial)
        if np.isfinite(phi_trial) and phi_trial > phi:
            return True, trial, phi_trial, eps * config.grow
        eps *= config.shrink
    return False, u, phi, eps


def _update_memory(
    memory: deque,
    u: NDArrayFloat,
    u_prev: NDArrayFloat,
    grad: NDArrayFloat,
    grad_prev: NDArrayFloat | None,
) -> None:
    if grad_prev is None:
        return
    s = (u - u_prev).ravel()
    # Work with the descent convention on -Phi: y is the change of -grad.
    y = (grad_prev - grad).ravel()
    sy = float(s @ y)
    if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
        memory.append((s, y, 1.0 / sy))


def _lbfgs_direction(grad: NDArrayFloat, memory: deque) -> NDArrayFloat:
    """Ascent direction H * grad from the two-loop recursion on -Phi."""
    q = -grad.ravel().copy()  # gradient of -Phi
    alphas = []
    for s, y, rho in reversed(memory):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if memory:
        s, y, _ = memory[-1]
        gamma = float(s @ y) / float(y @ y)
    else:
        gamma = 1.0 / max(float(np.linalg.norm(q)), 1e-30)
    r = gamma * q
    for (s, y, rho), a in zip(memory, reversed(alphas)):
        b = rho * float(y @ r)
        r += (a - b) * s
    return (-r).reshape(grad.shape)  # descent on -Phi == ascent on Phi


def _quasi_newton_step(
    obj: _Objective,
    problem: ControlProblem,
    u: NDArrayFloat,
    phi: float,
    grad: NDArrayFloat,
    memory: deque,
    eps: float,
    config: OptimizerConfig,
) -> tuple[bool, NDArrayFloat, float, float]:
    direction = _lbfgs_direction(grad, memory)
    if float(np.sum(direction * grad)) <= 0.0:
        # Not an ascent direction (stale curvature); fall back to the gradient.
        memory.clear()
        direction = _lbfgs_direction(grad, memory)
    alpha = 1.0
    for _ in range(config.max_line_search_steps):
        trial = _clip(problem, u + alpha * direction)
        phi_trial = obj.value(trial)
        if np.isfinite(phi_trial) and phi_trial > phi:
            return True, trial, phi_trial, alpha
        alpha *= config.shrink
    if memory:
        # Retry once along the raw gradient before declaring a stall.
        memory.clear()
        return _quasi_newton_step(obj, problem, u, phi, grad, memory, eps, config)
    return False, u, phi, alpha


def multistart(
    problem: ControlProblem,
    config: OptimizerConfig,
    ensemble: PhaseEnsemble | None = None,
    warm_start: npt.ArrayLike | None = None,
    progress: ProgressCallback | None = None,
) -> OptimizationResult:
    """Run ``config.restarts`` seeded ascents and return the best result.

    Restart i uses seed ``config.seed + i``; when ``warm_start`` is given it
    replaces the first restart's random initial pulse. All runs are logged in
    ``restart_records`` of the returned result.
    """
    best: OptimizationResult | None = None
    records: list[RestartRecord] = []
    for i in range(config.restarts):
        run_config = replace(config, seed=config.seed + i)
        initial = warm_start if (i == 0 and warm_start is not None) else None
        result = optimize(problem, run_config, initial=initial, ensemble=ensemble,
                          progress=progress)
        records.append(
            RestartRecord(
                seed=run_config.seed,
                fidelity=result.fidelity,
                status=result.status,
                iterations=result.iterations,
            )
        )
        if best is None or result.fidelity > best.fidelity:
            best = result
    return replace(best, restart_records=tuple(records))
