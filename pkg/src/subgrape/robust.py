"""Carrier-phase-robust objective: averages the fidelity and its gradient
over an ensemble of phase samples, making optimized pulses insensitive to the
unknown offset between shaping envelope and carrier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .engine import GradientResult, fidelity, gradient, propagate
from .model import ControlProblem
from .transfer import TransferMatrix, build_transfer_set

NDArrayFloat = npt.NDArray[np.float64]

__all__ = ["PhaseEnsemble", "robust_fidelity", "robust_gradient", "phase_transfer_sets"]


@dataclass(frozen=True)
class PhaseEnsemble:
    """Discrete phase samples with weights summing to one.

    A uniform grid over one period integrates low carrier harmonics exactly
    (trapezoid rule on a periodic function), so the default of 8 samples is
    exact for the e^{+-2i psi} terms that appear in carrier-mixed problems.
    """

    phases: tuple[float, ...]
    weights: tuple[float, ...]
    period: float

    def __post_init__(self) -> None:
        phases = tuple(float(p) for p in self.phases)
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "weights", weights)
        if len(phases) != len(weights) or not phases:
            raise ValueError("phases and weights must be nonempty and equal length")
        if self.period <= 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if any(w < 0 for w in weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {sum(weights):.15g}")
        if any(not 0.0 <= p < self.period for p in phases):
            raise ValueError(f"phases must lie in [0, {self.period})")

    @classmethod
    def uniform(cls, count: int = 8, period: float = 2.0 * np.pi) -> "PhaseEnsemble":
        """Equally weighted phases i * period / count, i = 0..count-1."""
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        phases = tuple(i * period / count for i in range(count))
        return cls(phases=phases, weights=(1.0 / count,) * count, period=period)


def phase_transfer_sets(
    problem: ControlProblem, ensemble: PhaseEnsemble
) -> dict[float, tuple[TransferMatrix, ...]]:
    """Prebuild the transfer matrices for every ensemble phase (carrier
    transfers depend on psi; the others are rebuilt identically)."""
    return {psi: build_transfer_set(problem, psi) for psi in ensemble.phases}


def robust_fidelity(
    problem: ControlProblem,
    pulse: npt.ArrayLike,
    ensemble: PhaseEnsemble,
    transfer_sets: dict[float, tuple[TransferMatrix, ...]] | None = None,
) -> float:
    """Weighted average of the single-phase fidelity over the ensemble."""
    if transfer_sets is None:
        transfer_sets = phase_transfer_sets(problem, ensemble)
    total = 0.0
    for psi, w in zip(ensemble.phases, ensemble.weights):
        record = propagate(problem, pulse, psi, transfer_sets[psi])
        total += w * fidelity(problem, record)
    return total


def robust_gradient(
    problem: ControlProblem,
    pulse: npt.ArrayLike,
    ensemble: PhaseEnsemble,
    transfer_sets: dict[float, tuple[TransferMatrix, ...]] | None = None,
    keep_field_gradient: bool = False,
    exact: bool = True,
) -> GradientResult:
    """Weighted average of the per-phase fidelity gradients.

    Per-phase evaluations are independent; the reduction runs in fixed
    ensemble order for determinism.
    """
    if transfer_sets is None:
        transfer_sets = phase_transfer_sets(problem, ensemble)
    phi = 0.0
    pixel = np.zeros((problem.n_controls, problem.grid.pixel_count))
    field = (
        np.zeros((problem.n_controls, problem.grid.subpixel_count))
        if keep_field_gradient
        else None
    )
    for psi, w in zip(ensemble.phases, ensemble.weights):
        res = gradient(
            problem,
            pulse,
            psi,
            transfer_sets[psi],
            keep_field_gradient=keep_field_gradient,
            exact=exact,
        )
        phi += w * res.fidelity
        pixel += w * res.pixel_gradient
        if field is not None:
            field += w * res.field_gradient
    return GradientResult(fidelity=phi, pixel_gradient=pixel, field_gradient=field)
