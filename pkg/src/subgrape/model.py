"""Control-problem definition: drift and control generators, target unitary,
computational-subspace projector, and the two-level time grid.

The grid distinguishes pixels (hardware-limited control intervals of width
``pixel_width`` ns) from sub-pixels (integration slices of width
``pixel_width / n_sub``). Time-dependent quantities are sampled at sub-pixel
midpoints by default; a ``sample_at_left_edge`` switch restores literal
left-edge sampling for comparison runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable

import numpy as np
import numpy.typing as npt

from .linalg import HERMITICITY_ATOL, hermiticity_defect

if TYPE_CHECKING:  # only for annotations; transfer imports this module
    from .transfer import TransferSpec

NDArrayComplex = npt.NDArray[np.complex128]
NDArrayFloat = npt.NDArray[np.float64]

__all__ = [
    "TimeGrid",
    "GeneratorSampler",
    "ControlProblem",
    "ProblemDiagnostics",
    "ProblemValidationError",
    "sample_hamiltonian",
    "validate_problem",
    "validate_pulse",
]


@dataclass(frozen=True)
class TimeGrid:
    """Two-level time discretization.

    ``pixel_count`` pixels of width ``pixel_width`` ns, each split into
    ``n_sub`` integration sub-pixels. The sub-pixel width is always derived,
    so ``subpixel_count * subpixel_width == total_time`` holds exactly.
    """

    pixel_count: int
    pixel_width: float
    n_sub: int = 1

    def __post_init__(self) -> None:
        if self.pixel_count < 1:
            raise ValueError(f"pixel_count must be >= 1, got {self.pixel_count}")
        if self.pixel_width <= 0:
            raise ValueError(f"pixel_width must be positive, got {self.pixel_width}")
        if self.n_sub < 1:
            raise ValueError(f"n_sub must be >= 1, got {self.n_sub}")

    @property
    def subpixel_count(self) -> int:
        return self.pixel_count * self.n_sub

    @property
    def subpixel_width(self) -> float:
        return self.pixel_width / self.n_sub

    @property
    def total_time(self) -> float:
        return self.pixel_count * self.pixel_width

    def refined(self, refinement: int) -> "TimeGrid":
        """Return the same physical grid with ``n_sub`` multiplied."""
        if refinement < 1:
            raise ValueError(f"refinement must be >= 1, got {refinement}")
        return TimeGrid(self.pixel_count, self.pixel_width, self.n_sub * refinement)

    def subpixel_times(self, left_edge: bool = False) -> NDArrayFloat:
        """Sample times t_l in ns: midpoints (l + 1/2) * dt, or l * dt."""
        idx = np.arange(self.subpixel_count, dtype=np.float64)
        offset = 0.0 if left_edge else 0.5
        return (idx + offset) * self.subpixel_width


@dataclass(frozen=True)
class GeneratorSampler:
    """Deterministic map (t ns, psi rad) -> Hermitian generator matrix.

    ``func`` must be pure; ``batch`` optionally evaluates a whole time stack
    at once (shape (len(times), dim, dim)) and is used by the engine when
    present. ``time_dependent`` / ``phase_dependent`` let consumers skip
    redundant sampling.
    """

    func: Callable[[float, float], NDArrayComplex]
    dim: int
    time_dependent: bool = False
    phase_dependent: bool = False
    batch: Callable[[NDArrayFloat, float], NDArrayComplex] | None = field(
        default=None, compare=False
    )

    @classmethod
    def constant(cls, matrix: npt.ArrayLike) -> "GeneratorSampler":
        """Sampler for a time- and phase-independent generator."""
        mat = np.asarray(matrix, dtype=np.complex128)
        return cls(func=lambda t, psi: mat, dim=mat.shape[0])

    def sample(self, t: float, psi: float = 0.0) -> NDArrayComplex:
        return np.asarray(self.func(t, psi), dtype=np.complex128)

    def sample_stack(self, times: NDArrayFloat, psi: float = 0.0) -> NDArrayComplex:
        """Evaluate at every time in ``times``; shape (len(times), dim, dim)."""
        times = np.asarray(times, dtype=np.float64)
        if not self.time_dependent:
            one = self.sample(float(times[0]) if times.size else 0.0, psi)
            return np.broadcast_to(one, (times.size,) + one.shape)
        if self.batch is not None:
            return np.asarray(self.batch(times, psi), dtype=np.complex128)
        return np.stack([self.sample(float(t), psi) for t in times])


@dataclass(frozen=True)
class ControlProblem:
    """Full specification of a gate-synthesis problem.

    Attributes
    ----------
    drift, controls : GeneratorSampler
        Drift generator and the K control generators (rad/ns).
    target : ndarray
        Ideal unitary; must be unitary on the projector's subspace.
    projector : ndarray
        Idempotent Hermitian projector onto the computational subspace.
    subspace_dim : int
        Trace of the projector.
    grid : TimeGrid
    transfer_specs : tuple
        One TransferSpec per control, mapping pixels to field samples.
    phase_period : float or None
        Period of the carrier phase psi in rad; None marks a problem with no
        psi dependence anywhere.
    amplitude_bound : float or None
        Optional |u| clipping bound, enforced by the optimizer's line search.
    """

    drift: GeneratorSampler
    controls: tuple[GeneratorSampler, ...]
    target: NDArrayComplex
    projector: NDArrayComplex
    subspace_dim: int
    grid: TimeGrid
    transfer_specs: tuple["TransferSpec", ...]
    phase_period: float | None = None
    amplitude_bound: float | None = None
    sample_at_left_edge: bool = False
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "transfer_specs", tuple(self.transfer_specs))
        target = np.asarray(self.target, dtype=np.complex128)
        projector = np.asarray(self.projector, dtype=np.complex128)
        target.flags.writeable = False
        projector.flags.writeable = False
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "projector", projector)
        if len(self.transfer_specs) != len(self.controls):
            raise ValueError(
                f"need one transfer spec per control: {len(self.transfer_specs)} specs "
                f"for {len(self.controls)} controls"
            )

    @property
    def dim(self) -> int:
        return self.drift.dim

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    @property
    def phase_dependent(self) -> bool:
        return self.phase_period is not None

    def subpixel_times(self) -> NDArrayFloat:
        return self.grid.subpixel_times(left_edge=self.sample_at_left_edge)

    def refined(self, refinement: int) -> "ControlProblem":
        """Same problem on a grid with ``n_sub`` multiplied by ``refinement``."""
        return replace(self, grid=self.grid.refined(refinement))

    def with_grid(self, grid: TimeGrid) -> "ControlProblem":
        return replace(self, grid=grid)


def validate_pulse(problem: ControlProblem, pulse: npt.ArrayLike) -> NDArrayFloat:
    """Check a pulse array against a problem and return it as float64 (K, N)."""
    arr = np.asarray(pulse, dtype=np.float64)
    expected = (problem.n_controls, problem.grid.pixel_count)
    if arr.shape != expected:
        raise ValueError(f"pulse shape {arr.shape} does not match (K, N) = {expected}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("pulse contains non-finite entries")
    if problem.amplitude_bound is not None and np.max(np.abs(arr)) > problem.amplitude_bound:
        raise ValueError(
            f"pulse exceeds amplitude bound {problem.amplitude_bound}: "
            f"max |u| = {np.max(np.abs(arr)):.6g}"
        )
    return arr


def sample_hamiltonian(
    problem: ControlProblem,
    s: npt.ArrayLike,
    l: int,
    psi: float = 0.0,
) -> NDArrayComplex:
    """Assemble H_l = H_drift(t_l) + sum_k s[k] * H_k(t_l) at sub-pixel ``l``.

    ``s`` holds the K field samples at sub-pixel ``l`` (rad/ns); the sample
    time t_l follows the problem's edge/midpoint convention.
    """
    s_arr = np.asarray(s, dtype=np.float64)
    if s_arr.shape != (problem.n_controls,):
        raise ValueError(
            f"expected {problem.n_controls} field samples, got shape {s_arr.shape}"
        )
    if not np.all(np.isfinite(s_arr)):
        raise ValueError("field samples contain non-finite entries")
    m = problem.grid.subpixel_count
    if not 0 <= l < m:
        raise ValueError(f"sub-pixel index {l} outside [0, {m})")
    offset = 0.0 if problem.sample_at_left_edge else 0.5
    t_l = (l + offset) * problem.grid.subpixel_width
    h = problem.drift.sample(t_l, psi).copy()
    for k, ctrl in enumerate(problem.controls):
        h += s_arr[k] * ctrl.sample(t_l, psi)
    return h


@dataclass(frozen=True)
class ProblemDiagnostics:
    """Outcome of :func:`validate_problem`: issues plus measured residuals."""

    issues: tuple[str, ...]
    residuals: dict[str, float]

    @property
    def ok(self) -> bool:
        return not self.issues


class ProblemValidationError(ValueError):
    def __init__(self, diagnostics: ProblemDiagnostics):
        self.diagnostics = diagnostics
        super().__init__("invalid problem: " + "; ".join(diagnostics.issues))


def validate_problem(
    problem: ControlProblem, raise_on_error: bool = True
) -> ProblemDiagnostics:
    """Check every structural invariant of a problem.

    Samples drift and controls at a handful of times/phases and verifies
    Hermiticity, projector idempotency and trace, target unitarity on the
    subspace, and grid consistency. Violations name the offending field.
    """
    issues: list[str] = []
    residuals: dict[str, float] = {}
    grid = problem.grid
    dim = problem.dim

    if abs(grid.subpixel_count * grid.subpixel_width - grid.total_time) > 1e-12 * max(
        1.0, grid.total_time
    ):
        issues.append("TimeGrid: subpixel_count * subpixel_width != total_time")

    p = problem.projector
    if p.shape != (dim, dim):
        issues.append(f"projector: shape {p.shape} does not match dim {dim}")
    else:
        idem = float(np.max(np.abs(p @ p - p)))
        herm = hermiticity_defect(p)
        tr = float(np.real(np.trace(p)))
        residuals["projector_idempotency"] = idem
        residuals["projector_hermiticity"] = herm
        if idem > 1e-12:
            issues.append(f"projector: not idempotent, max |P^2 - P| = {idem:.3e}")
        if herm > HERMITICITY_ATOL:
            issues.append(f"projector: not Hermitian, defect {herm:.3e}")
        if abs(tr - problem.subspace_dim) > 1e-9:
            issues.append(
                f"projector: trace {tr:.6g} does not equal subspace_dim {problem.subspace_dim}"
            )

    u = problem.target
    if u.shape != (dim, dim):
        issues.append(f"target: shape {u.shape} does not match dim {dim}")
    elif p.shape == (dim, dim):
        sub_defect = float(np.max(np.abs(p @ (u.conj().T @ u) @ p - p)))
        residuals["target_subspace_unitarity"] = sub_defect
        if sub_defect > 1e-12:
            issues.append(
                f"target: not unitary on the projector subspace, defect {sub_defect:.3e}"
            )

    times = grid.total_time * np.array([0.0, 1.0 / 3.0, 0.77, 1.0])
    period = problem.phase_period if problem.phase_period is not None else 2 * np.pi
    phases = (0.0, period / 3.0)
    samplers = [("drift", problem.drift)] + [
        (f"controls[{k}]", c) for k, c in enumerate(problem.controls)
    ]
    for label, sampler in samplers:
        if sampler.dim != dim:
            issues.append(f"{label}: dim {sampler.dim} does not match problem dim {dim}")
            continue
        worst = 0.0
        for t in times:
            for psi in phases:
                worst = max(worst, hermiticity_defect(sampler.sample(float(t), psi)))
        residuals[f"{label}_hermiticity"] = worst
        if worst > HERMITICITY_ATOL:
            issues.append(f"{label}: samples not Hermitian, worst defect {worst:.3e}")
        if not sampler.time_dependent:
            diff = float(
                np.max(np.abs(sampler.sample(float(times[0])) - sampler.sample(float(times[2]))))
            )
            if diff > 0.0:
                issues.append(
                    f"{label}: flagged time-independent but samples differ by {diff:.3e}"
                )
        if not sampler.phase_dependent and problem.phase_dependent:
            diff = float(
                np.max(np.abs(sampler.sample(0.0, phases[0]) - sampler.sample(0.0, phases[1])))
            )
            if diff > 0.0:
                issues.append(
                    f"{label}: flagged phase-independent but samples differ by {diff:.3e}"
                )

    diagnostics = ProblemDiagnostics(issues=tuple(issues), residuals=residuals)
    if raise_on_error and issues:
        raise ProblemValidationError(diagnostics)
    return diagnostics
