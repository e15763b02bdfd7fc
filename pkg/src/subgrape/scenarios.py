"""Benchmark control problems: an anharmonic-qutrit pi pulse (with and
without the rotating-wave approximation) and a two-qubit sqrt(iSWAP) with a
time-dependent exchange drift.

All frequencies are accepted as cyclic values in GHz and converted to angular
rad/ns on ingestion (hbar = 1). Basis ordering for the two-qubit system is
|00>, |01>, |10>, |11> with qubit 1 the left factor.
"""
from __future__ import annotations

import numpy as np
import numpy.typing as npt

from .model import ControlProblem, GeneratorSampler, TimeGrid
from .transfer import PiecewiseConstant, TransferSpec

NDArrayComplex = npt.NDArray[np.complex128]

__all__ = [
    "anharmonic_pi_pulse_rwa",
    "anharmonic_pi_pulse_full",
    "coupled_qubit_sqrt_iswap",
    "sqrt_iswap_target",
    "SCENARIOS",
]

TWO_PI = 2.0 * np.pi

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)
SIGMA_MINUS = SIGMA_PLUS.conj().T

# Lowering operator of the three-level anharmonic ladder: |0><1| + sqrt2 |1><2|.
LADDER = np.array(
    [[0.0, 1.0, 0.0], [0.0, 0.0, np.sqrt(2.0)], [0.0, 0.0, 0.0]], dtype=np.complex128
)

QUTRIT_X_TARGET = np.array(
    [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], dtype=np.complex128
)
QUTRIT_PROJECTOR = np.diag([1.0, 1.0, 0.0]).astype(np.complex128)


def _pixel_grid(gate_time_ns: float, pixel_width_ns: float, n_sub: int) -> TimeGrid:
    count = gate_time_ns / pixel_width_ns
    n = round(count)
    if abs(count - n) > 1e-9 or n < 1:
        raise ValueError(
            f"gate time {gate_time_ns} ns is not a positive whole number of "
            f"{pixel_width_ns} ns pixels"
        )
    return TimeGrid(pixel_count=n, pixel_width=pixel_width_ns, n_sub=n_sub)


def _specs(transfer: TransferSpec | None, k: int) -> tuple[TransferSpec, ...]:
    spec = transfer if transfer is not None else PiecewiseConstant()
    return (spec,) * k


def anharmonic_pi_pulse_rwa(
    gate_time_ns: float = 4.0,
    pixel_width_ns: float = 1.0,
    n_sub: int = 1,
    detuning_ghz: float = -0.5,
    transfer: TransferSpec | None = None,
    sample_at_left_edge: bool = False,
) -> ControlProblem:
    """Three-level pi pulse in the rotating frame under the RWA.

    Drift Delta |2><2| with Delta = 2 pi * detuning_ghz; x/y quadrature
    controls (L + L^dag)/2 and (iL - iL^dag)/2 for the ladder operator L;
    target X on the {0, 1} subspace.
    """
    delta = TWO_PI * detuning_ghz
    drift = np.diag([0.0, 0.0, delta]).astype(np.complex128)
    h_x = (LADDER + LADDER.conj().T) / 2.0
    h_y = (1j * LADDER - 1j * LADDER.conj().T) / 2.0
    return ControlProblem(
        drift=GeneratorSampler.constant(drift),
        controls=(GeneratorSampler.constant(h_x), GeneratorSampler.constant(h_y)),
        target=QUTRIT_X_TARGET,
        projector=QUTRIT_PROJECTOR,
        subspace_dim=2,
        grid=_pixel_grid(gate_time_ns, pixel_width_ns, n_sub),
        transfer_specs=_specs(transfer, 2),
        phase_period=None,
        sample_at_left_edge=sample_at_left_edge,
        name="anharmonic_pi_pulse_rwa",
    )


def anharmonic_pi_pulse_full(
    gate_time_ns: float = 1.0,
    pixel_width_ns: float = 0.125,
    n_sub: int = 100,
    detuning_ghz: float = -0.5,
    carrier_ghz: float = 2.0,
    transfer: TransferSpec | None = None,
    sample_at_left_edge: bool = False,
) -> ControlProblem:
    """The same pi-pulse goal without the RWA: counter-rotating terms carry
    the factor (1 + e^{-2i w1 t - 2i psi}), so both control generators are
    time- and phase-dependent with phase period pi.

    Averaging the generators over one phase period recovers the RWA problem.
    """
    delta = TWO_PI * detuning_ghz
    omega1 = TWO_PI * carrier_ghz
    drift = np.diag([0.0, 0.0, delta]).astype(np.complex128)
    ladder_dag = LADDER.conj().T

    def rotating_factor(times: np.ndarray, psi: float) -> np.ndarray:
        return 1.0 + np.exp(-2j * (omega1 * np.asarray(times) + psi))

    def x_batch(times: np.ndarray, psi: float) -> NDArrayComplex:
        ph = rotating_factor(times, psi)
        return 0.5 * (ph[:, None, None] * LADDER + ph.conj()[:, None, None] * ladder_dag)

    def y_batch(times: np.ndarray, psi: float) -> NDArrayComplex:
        ph = rotating_factor(times, psi)
        return 0.5 * (
            1j * ph[:, None, None] * LADDER - 1j * ph.conj()[:, None, None] * ladder_dag
        )

    def x_func(t: float, psi: float) -> NDArrayComplex:
        return x_batch(np.array([t]), psi)[0]

    def y_func(t: float, psi: float) -> NDArrayComplex:
        return y_batch(np.array([t]), psi)[0]

    controls = (
        GeneratorSampler(
            func=x_func, dim=3, time_dependent=True, phase_dependent=True, batch=x_batch
        ),
        GeneratorSampler(
            func=y_func, dim=3, time_dependent=True, phase_dependent=True, batch=y_batch
        ),
    )
    return ControlProblem(
        drift=GeneratorSampler.constant(drift),
        controls=controls,
        target=QUTRIT_X_TARGET,
        projector=QUTRIT_PROJECTOR,
        subspace_dim=2,
        grid=_pixel_grid(gate_time_ns, pixel_width_ns, n_sub),
        transfer_specs=_specs(transfer, 2),
        phase_period=np.pi,
        sample_at_left_edge=sample_at_left_edge,
        name="anharmonic_pi_pulse_full",
    )


def sqrt_iswap_target() -> NDArrayComplex:
    """sqrt(iSWAP): identity on |00>, |11>; ((1, i), (i, 1))/sqrt2 on the
    single-excitation block. Its square is iSWAP."""
    u = np.eye(4, dtype=np.complex128)
    u[1:3, 1:3] = np.array([[1.0, 1.0j], [1.0j, 1.0]]) / np.sqrt(2.0)
    return u


def coupled_qubit_sqrt_iswap(
    gate_time_ns: float = 20.0,
    pixel_width_ns: float = 1.0,
    n_sub: int = 10,
    coupling_ghz: float = 0.094,
    splitting_ghz: float = 0.5,
    transfer: TransferSpec | None = None,
    sample_at_left_edge: bool = False,
) -> ControlProblem:
    """Two off-resonant qubits with an XX+YY exchange coupling, driven at two
    tones, in the frame rotating at each qubit's own frequency.

    The drift J (s+ s- e^{i Delta t} + h.c.) oscillates at the qubit-qubit
    splitting Delta and the qubit-1 drives carry e^{-+ i Delta t / 2}, so no
    frame removes all fast dynamics; the target is sqrt(iSWAP) on the full
    two-qubit space.
    """
    j = TWO_PI * coupling_ghz
    delta = TWO_PI * splitting_ghz
    eye2 = np.eye(2, dtype=np.complex128)
    sp1 = np.kron(SIGMA_PLUS, eye2)
    sm1 = np.kron(SIGMA_MINUS, eye2)
    exchange = np.kron(SIGMA_PLUS, SIGMA_MINUS)
    exchange_dag = exchange.conj().T
    sx2 = np.kron(eye2, SIGMA_X)
    sy2 = np.kron(eye2, SIGMA_Y)

    def drift_batch(times: np.ndarray, psi: float) -> NDArrayComplex:
        ph = np.exp(1j * delta * np.asarray(times))
        return j * (ph[:, None, None] * exchange + ph.conj()[:, None, None] * exchange_dag)

    def x1_batch(times: np.ndarray, psi: float) -> NDArrayComplex:
        ph = np.exp(-0.5j * delta * np.asarray(times))
        return 0.5 * (ph[:, None, None] * sp1 + ph.conj()[:, None, None] * sm1)

    def y1_batch(times: np.ndarray, psi: float) -> NDArrayComplex:
        ph = np.exp(-0.5j * delta * np.asarray(times))
        return 0.5 * (1j * ph[:, None, None] * sp1 - 1j * ph.conj()[:, None, None] * sm1)

    def _scalar(batch):
        def func(t: float, psi: float) -> NDArrayComplex:
            return batch(np.array([t]), psi)[0]

        return func

    drift = GeneratorSampler(
        func=_scalar(drift_batch), dim=4, time_dependent=True, batch=drift_batch
    )
    controls = (
        GeneratorSampler(func=_scalar(x1_batch), dim=4, time_dependent=True, batch=x1_batch),
        GeneratorSampler(func=_scalar(y1_batch), dim=4, time_dependent=True, batch=y1_batch),
        GeneratorSampler.constant(sx2 / 2.0),
        GeneratorSampler.constant(sy2 / 2.0),
    )
    return ControlProblem(
        drift=drift,
        controls=controls,
        target=sqrt_iswap_target(),
        projector=np.eye(4, dtype=np.complex128),
        subspace_dim=4,
        grid=_pixel_grid(gate_time_ns, pixel_width_ns, n_sub),
        transfer_specs=_specs(transfer, 4),
        phase_period=None,
        sample_at_left_edge=sample_at_left_edge,
        name="coupled_qubit_sqrt_iswap",
    )


SCENARIOS = {
    "example1": anharmonic_pi_pulse_rwa,
    "example2": anharmonic_pi_pulse_full,
    "example3": coupled_qubit_sqrt_iswap,
}
