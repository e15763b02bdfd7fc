"""Linear transfer matrices mapping pixel controls to sub-pixel field samples.

Supported shaping models: piecewise-constant (identity resampling), local
cubic-spline interpolation, Gaussian low-pass filtering (closed erf form),
arbitrary even frequency responses (adaptive quadrature), carrier mixing, and
Fourier synthesis. Smoothing transfers carry zero-valued padding pixels on
both sides of the gate window so every kernel row telescopes to unit sum; the
padded entries are structural and never optimized.

Row/column conventions: row l is the sub-pixel sample at time t_l, column j
is a (possibly padded) pixel of width ``pixel_width``. Fourier transfers are
the exception: columns index basis components, not time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import numpy.typing as npt
from scipy.integrate import quad
from scipy.special import erf

from .model import ControlProblem, TimeGrid

NDArrayFloat = npt.NDArray[np.float64]

__all__ = [
    "GAUSSIAN_3DB_RATIO",
    "omega0_from_bandwidth_ghz",
    "PiecewiseConstant",
    "CubicSpline",
    "GaussianFilter",
    "GeneralFilter",
    "Carrier",
    "FourierBasis",
    "TransferSpec",
    "TransferMatrix",
    "build",
    "build_transfer_set",
    "build_piecewise_constant",
    "build_cubic_spline",
    "build_gaussian_filter",
    "build_general_filter",
    "build_carrier",
    "build_fourier",
    "apply",
    "padding_pixels",
]

# A Gaussian response exp(-w^2/w0^2) is 3 dB down (|F|^2 = 1/2) at
# w_B = sqrt(ln2 / 2) * w0 = 0.5887 * w0.
GAUSSIAN_3DB_RATIO = 0.5887

# Response values below this fraction of F(0) count as fully decayed when
# locating the quadrature cutoff.
_DECAY_FLOOR = 1e-12


def omega0_from_bandwidth_ghz(bandwidth_ghz: float) -> float:
    """Convert a cyclic 3 dB bandwidth in GHz to the Gaussian reference
    frequency omega0 in rad/ns via omega_B = 0.5887 * omega0."""
    if bandwidth_ghz <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth_ghz}")
    return 2.0 * np.pi * bandwidth_ghz / GAUSSIAN_3DB_RATIO


@dataclass(frozen=True)
class PiecewiseConstant:
    """Each sub-pixel takes the value of its containing pixel."""


@dataclass(frozen=True)
class CubicSpline:
    """Local cubic interpolation through pixel centers, continuous in value
    and first derivative; two zero pixels are padded on each side."""


@dataclass(frozen=True)
class GaussianFilter:
    """Gaussian low-pass F(w) = exp(-w^2/omega0^2).

    Exactly one of ``omega0`` (rad/ns) or ``bandwidth_ghz`` (cyclic 3 dB
    point) must be given. ``n_r`` overrides the padding/truncation width
    ceil(2*pi / (omega_B * pixel_width)).
    """

    omega0: float | None = None
    bandwidth_ghz: float | None = None
    n_r: int | None = None

    def __post_init__(self) -> None:
        if (self.omega0 is None) == (self.bandwidth_ghz is None):
            raise ValueError("specify exactly one of omega0 or bandwidth_ghz")
        if self.omega0 is not None and self.omega0 <= 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")

    def resolve_omega0(self) -> float:
        if self.omega0 is not None:
            return self.omega0
        return omega0_from_bandwidth_ghz(self.bandwidth_ghz)


@dataclass(frozen=True)
class GeneralFilter:
    """Arbitrary even, real frequency response F(w), w in rad/ns.

    The transfer elements are computed by adaptive quadrature; ``omega_b``
    (3 dB point, rad/ns) and ``n_r`` are located numerically when omitted.
    """

    response: Callable[[float], float]
    omega_b: float | None = None
    n_r: int | None = None
    abs_tol: float = 1e-8


@dataclass(frozen=True)
class Carrier:
    """Row-wise modulation of a base transfer by a waveform f(t, psi)."""

    waveform: Callable[[float, float], float]
    base: "TransferSpec"


@dataclass(frozen=True)
class FourierBasis:
    """Sine synthesis: column j contributes sin(frequencies[j] * t_l).

    Columns index components rather than time. Inside a ControlProblem the
    component count must equal the grid's pixel count so pulses stay
    rectangular.
    """

    frequencies: tuple[float, ...]

    def __post_init__(self) -> None:
        freqs = tuple(float(f) for f in self.frequencies)
        if not freqs:
            raise ValueError("frequency list must be nonempty")
        if not all(math.isfinite(f) for f in freqs):
            raise ValueError("frequencies must be finite")
        object.__setattr__(self, "frequencies", freqs)


TransferSpec = Union[
    PiecewiseConstant, CubicSpline, GaussianFilter, GeneralFilter, Carrier, FourierBasis
]


@dataclass(frozen=True)
class TransferMatrix:
    """Dense storage of the (mostly banded) pixel-to-sample map.

    ``matrix`` has one row per sub-pixel and one column per padded pixel;
    the ``pad_left``/``pad_right`` margin columns correspond to zero-clamped
    virtual pixels outside the gate window. ``pixel_width`` is None when
    columns are basis components instead of time bins.
    """

    matrix: NDArrayFloat
    pad_left: int
    pad_right: int
    kind: str
    sample_times: NDArrayFloat
    pixel_width: float | None

    def __post_init__(self) -> None:
        matrix = np.ascontiguousarray(self.matrix, dtype=np.float64)
        times = np.ascontiguousarray(self.sample_times, dtype=np.float64)
        matrix.flags.writeable = False
        times.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "sample_times", times)

    @property
    def n_subpixels(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_pixels(self) -> int:
        """Number of real (optimizable) pixel columns."""
        return self.matrix.shape[1] - self.pad_left - self.pad_right

    @property
    def interior(self) -> NDArrayFloat:
        """View of the real pixel columns (padding stripped)."""
        return self.matrix[:, self.pad_left : self.pad_left + self.n_pixels]

    def apply(self, u: npt.ArrayLike) -> NDArrayFloat:
        """Map pixel values to sub-pixel field samples, s = T @ u_padded."""
        vec = np.asarray(u, dtype=np.float64)
        if vec.shape != (self.n_pixels,):
            raise ValueError(
                f"pixel vector shape {vec.shape} does not match {self.n_pixels} pixels"
            )
        return self.interior @ vec

    def row_sums(self) -> NDArrayFloat:
        """Row sums over all columns, padding included."""
        return self.matrix.sum(axis=1)

    def bandwidth(self) -> float | None:
        """Max distance (in pixels) from a sample time to the center of any
        pixel it couples to; None for component-indexed transfers."""
        if self.pixel_width is None:
            return None
        rows, cols = np.nonzero(self.matrix)
        if rows.size == 0:
            return 0.0
        centers = (cols - self.pad_left + 0.5) * self.pixel_width
        return float(np.max(np.abs(self.sample_times[rows] - centers)) / self.pixel_width)


def padding_pixels(spec: TransferSpec, grid: TimeGrid) -> int:
    """Zero pixels clamped on each side of the gate window for ``spec``."""
    if isinstance(spec, (PiecewiseConstant, FourierBasis)):
        return 0
    if isinstance(spec, CubicSpline):
        return 2
    if isinstance(spec, GaussianFilter):
        if spec.n_r is not None:
            return spec.n_r
        omega_b = GAUSSIAN_3DB_RATIO * spec.resolve_omega0()
        return math.ceil(2.0 * np.pi / (omega_b * grid.pixel_width))
    if isinstance(spec, GeneralFilter):
        if spec.n_r is not None:
            return spec.n_r
        omega_b = spec.omega_b
        if omega_b is None:
            omega_b = _locate_3db_point(spec.response)
        if omega_b is None:  # no 3 dB crossing: effectively all-pass
            return 0
        return math.ceil(2.0 * np.pi / (omega_b * grid.pixel_width))
    if isinstance(spec, Carrier):
        return padding_pixels(spec.base, grid)
    raise TypeError(f"unknown transfer spec {type(spec).__name__}")


def build_piecewise_constant(grid: TimeGrid, left_edge: bool = False) -> TransferMatrix:
    """Rectangle transfer: T[l][j] = 1 iff sub-pixel l lies in pixel j."""
    m, n = grid.subpixel_count, grid.pixel_count
    matrix = np.zeros((m, n))
    matrix[np.arange(m), np.arange(m) // grid.n_sub] = 1.0
    return TransferMatrix(
        matrix=matrix,
        pad_left=0,
        pad_right=0,
        kind="piecewise_constant",
        sample_times=grid.subpixel_times(left_edge),
        pixel_width=grid.pixel_width,
    )


def build_cubic_spline(grid: TimeGrid, left_edge: bool = False) -> TransferMatrix:
    """Local cubic-spline transfer with two zero-padding pixels per side.

    Each row has four elements against pixels j'-1 .. j'+2, where pixel j'
    is the one whose center interval contains t_l; the cubic pieces match
    pixel values at pixel centers and centered-difference slopes there, so
    the field and its first derivative are continuous and every row sums to
    one exactly.
    """
    m, n = grid.subpixel_count, grid.pixel_count
    dt = grid.pixel_width
    times = grid.subpixel_times(left_edge)
    x = times / dt
    jp = np.floor(x - 0.5).astype(int)  # in [-1, n-1]
    xt = x - (jp + 0.5)  # in [0, 1)
    weights = np.stack(
        [
            -0.5 * xt * (xt - 1.0) ** 2,
            1.0 + 1.5 * xt**3 - 2.5 * xt**2,
            0.5 * xt + 2.0 * xt**2 - 1.5 * xt**3,
            0.5 * xt**3 - 0.5 * xt**2,
        ],
        axis=1,
    )
    matrix = np.zeros((m, n + 4))
    cols = jp[:, None] + 2 + np.arange(-1, 3)[None, :]
    matrix[np.arange(m)[:, None], cols] = weights
    return TransferMatrix(
        matrix=matrix,
        pad_left=2,
        pad_right=2,
        kind="cubic_spline",
        sample_times=times,
        pixel_width=dt,
    )


def _truncate_beyond(matrix: NDArrayFloat, x: NDArrayFloat, j_phys: NDArrayFloat, n_r: int) -> None:
    # Zero entries whose sample lies more than n_r pixels from the column's
    # left edge; n_r = 0 degenerates to keeping the containing pixel only.
    reach = max(n_r, 1)
    matrix[np.abs(x[:, None] - j_phys[None, :]) > reach] = 0.0


def build_gaussian_filter(
    grid: TimeGrid,
    omega0: float,
    n_r: int | None = None,
    left_edge: bool = False,
) -> TransferMatrix:
    """Gaussian-filter transfer in closed form.

    T[l][j] = (erf[w0 (t_l - j dt)/2] - erf[w0 (t_l - (j+1) dt)/2]) / 2,
    truncated to zero beyond ``n_r`` pixels and zero-padded by ``n_r``
    pixels per side, with n_r = ceil(2 pi / (omega_B dt)) at the 3 dB point
    omega_B = 0.5887 * omega0.
    """
    if omega0 <= 0:
        raise ValueError(f"omega0 must be positive, got {omega0}")
    if n_r is None:
        n_r = math.ceil(2.0 * np.pi / (GAUSSIAN_3DB_RATIO * omega0 * grid.pixel_width))
    n = grid.pixel_count
    dt = grid.pixel_width
    times = grid.subpixel_times(left_edge)
    j_phys = np.arange(-n_r, n + n_r, dtype=np.float64)
    left = erf(omega0 * (times[:, None] - j_phys[None, :] * dt) / 2.0)
    right = erf(omega0 * (times[:, None] - (j_phys[None, :] + 1.0) * dt) / 2.0)
    matrix = 0.5 * (left - right)
    _truncate_beyond(matrix, times / dt, j_phys, n_r)
    return TransferMatrix(
        matrix=matrix,
        pad_left=n_r,
        pad_right=n_r,
        kind="gaussian_filter",
        sample_times=times,
        pixel_width=dt,
    )


def _locate_3db_point(
    response: Callable[[float], float], probe_max_factor: float = 1e6
) -> float | None:
    """Find the first w with F(w) = F(0)/sqrt(2), or None if F never drops."""
    from scipy.optimize import brentq

    f0 = float(response(0.0))
    if f0 <= 0:
        raise ValueError("response must be positive at w = 0")
    target = f0 / np.sqrt(2.0)
    lo, hi = 0.0, 1e-3
    while hi <= probe_max_factor:
        if float(response(hi)) < target:
            return float(brentq(lambda w: float(response(w)) - target, lo, hi))
        lo, hi = hi, hi * 2.0
    return None


def _quadrature_cutoff(response: Callable[[float], float], pixel_width: float) -> float:
    """Frequency beyond which F is treated as constant (fully decayed for
    ordinary filters); falls back to a finite window for non-decaying F."""
    f0 = abs(float(response(0.0)))
    w = 1.0 / pixel_width
    while w < 1e6 / pixel_width:
        if abs(float(response(w))) < _DECAY_FLOOR * max(f0, 1.0):
            return w
        w *= 2.0
    return 400.0 / pixel_width


def build_general_filter(
    grid: TimeGrid,
    response: Callable[[float], float],
    omega_b: float | None = None,
    n_r: int | None = None,
    abs_tol: float = 1e-8,
    left_edge: bool = False,
) -> TransferMatrix:
    """Transfer for an even, real frequency response by adaptive quadrature.

    Each element is the convolution integral
    T[l][j] = integral F(w) cos[w (t_l - (j+1/2) dt)] sin[w dt / 2] / (pi w) dw
    over all w, folded onto [0, w_cut] by evenness and evaluated by adaptive
    Gauss-Kronrod quadrature after splitting off the value F(w_cut), whose
    contribution is an exact Dirichlet integral. The split is a no-op for
    decaying responses and makes the ideal all-pass case recover the exact
    rectangle transfer.

    Raises
    ------
    ValueError
        If the quadrature cannot reach ``abs_tol``; the message reports the
        achieved tolerance.
    """
    if n_r is None:
        if omega_b is None:
            omega_b = _locate_3db_point(response)
        if omega_b is None:
            n_r = 0
        else:
            n_r = math.ceil(2.0 * np.pi / (omega_b * grid.pixel_width))
    n = grid.pixel_count
    dt = grid.pixel_width
    dts = grid.subpixel_width
    times = grid.subpixel_times(left_edge)
    w_cut = _quadrature_cutoff(response, dt)
    f_inf = float(response(w_cut))
    half = dt / 2.0

    # Product-to-sum: the element equals
    #   sum over c in {dt/2 + r, dt/2 - r} of (1/pi) int_0^inf F(w) sin(cw)/w dw
    # with r = t_l - (j+1/2) dt. Splitting F = F(w_cut) + [F - F(w_cut)] makes
    # the constant part the Dirichlet integral sign(c)/2 exactly, and leaves a
    # quadrature whose integrand vanishes at the cutoff (identically zero for
    # an ideal all-pass). Both c values are integer multiples of dts/2, so the
    # half-line integrals are cached by that integer.
    j_phys = np.arange(-n_r, n + n_r)
    m = times.size
    base_index = np.arange(m) * 2 + (0 if left_edge else 1)  # 2 t_l / dts
    cache: dict[int, float] = {}

    def half_line(mult: int) -> float:
        """(1/pi) int_0^w_cut [F(w) - F(w_cut)] sin(c w)/w dw at c = mult*dts/2,
        folded by oddness onto mult >= 0."""
        if mult == 0:
            return 0.0
        if abs(mult) not in cache:
            c = abs(mult) * dts / 2.0

            def integrand(w: float) -> float:
                if w == 0.0:
                    return (float(response(0.0)) - f_inf) * c / np.pi
                return (float(response(w)) - f_inf) * np.sin(c * w) / (np.pi * w)

            value, err = quad(integrand, 0.0, w_cut, epsabs=abs_tol / 4.0, limit=800)
            if err > abs_tol / 2.0:
                raise ValueError(
                    f"filter quadrature did not converge: achieved abs error "
                    f"{err:.3e} exceeds tolerance {abs_tol:.1e}"
                )
            cache[abs(mult)] = value
        return float(np.sign(mult)) * cache[abs(mult)]

    matrix = np.zeros((m, j_phys.size))
    x = times / dt
    keep = np.abs(x[:, None] - j_phys[None, :].astype(float)) <= max(n_r, 1)
    for li in range(m):
        for ji, j in enumerate(j_phys):
            if not keep[li, ji]:
                continue
            key = int(base_index[li] - (2 * int(j) + 1) * grid.n_sub)
            m1 = grid.n_sub + key  # c1 = dt/2 + r in units of dts/2
            m2 = grid.n_sub - key  # c2 = dt/2 - r
            matrix[li, ji] = (
                0.5 * f_inf * (np.sign(m1) + np.sign(m2)) + half_line(m1) + half_line(m2)
            )
    return TransferMatrix(
        matrix=matrix,
        pad_left=n_r,
        pad_right=n_r,
        kind="general_filter",
        sample_times=times,
        pixel_width=dt,
    )


def build_carrier(
    grid: TimeGrid,
    waveform: Callable[[float, float], float],
    base: TransferMatrix,
    psi: float = 0.0,
    left_edge: bool = False,
) -> TransferMatrix:
    """Scale each row of ``base`` by the carrier value f(t_l, psi)."""
    if base.n_subpixels != grid.subpixel_count:
        raise ValueError(
            f"base transfer has {base.n_subpixels} rows, grid has "
            f"{grid.subpixel_count} sub-pixels"
        )
    times = grid.subpixel_times(left_edge)
    gains = np.array([float(waveform(float(t), psi)) for t in times])
    return TransferMatrix(
        matrix=gains[:, None] * base.matrix,
        pad_left=base.pad_left,
        pad_right=base.pad_right,
        kind=f"carrier({base.kind})",
        sample_times=times,
        pixel_width=base.pixel_width,
    )


def build_fourier(
    grid: TimeGrid, frequencies: tuple[float, ...], left_edge: bool = False
) -> TransferMatrix:
    """Dense sine-synthesis transfer T[l][j] = sin(frequencies[j] * t_l)."""
    freqs = np.asarray(frequencies, dtype=np.float64)
    if freqs.size == 0:
        raise ValueError("frequency list must be nonempty")
    times = grid.subpixel_times(left_edge)
    matrix = np.sin(times[:, None] * freqs[None, :])
    return TransferMatrix(
        matrix=matrix,
        pad_left=0,
        pad_right=0,
        kind="fourier",
        sample_times=times,
        pixel_width=None,
    )


def build(
    spec: TransferSpec, grid: TimeGrid, psi: float = 0.0, left_edge: bool = False
) -> TransferMatrix:
    """Build the transfer matrix for ``spec`` on ``grid``."""
    if isinstance(spec, PiecewiseConstant):
        return build_piecewise_constant(grid, left_edge)
    if isinstance(spec, CubicSpline):
        return build_cubic_spline(grid, left_edge)
    if isinstance(spec, GaussianFilter):
        return build_gaussian_filter(grid, spec.resolve_omega0(), spec.n_r, left_edge)
    if isinstance(spec, GeneralFilter):
        return build_general_filter(
            grid, spec.response, spec.omega_b, spec.n_r, spec.abs_tol, left_edge
        )
    if isinstance(spec, Carrier):
        base = build(spec.base, grid, psi, left_edge)
        return build_carrier(grid, spec.waveform, base, psi, left_edge)
    if isinstance(spec, FourierBasis):
        return build_fourier(grid, spec.frequencies, left_edge)
    raise TypeError(f"unknown transfer spec {type(spec).__name__}")


def apply(transfer: TransferMatrix, u: npt.ArrayLike) -> NDArrayFloat:
    """Functional alias for :meth:`TransferMatrix.apply`."""
    return transfer.apply(u)


def build_transfer_set(problem: ControlProblem, psi: float = 0.0) -> tuple[TransferMatrix, ...]:
    """One transfer matrix per control, at the problem's sampling convention.

    Fourier specs must carry exactly ``pixel_count`` components so the pulse
    array stays rectangular (K, N).
    """
    transfers = []
    for k, spec in enumerate(problem.transfer_specs):
        t = build(spec, problem.grid, psi, problem.sample_at_left_edge)
        if t.n_pixels != problem.grid.pixel_count:
            raise ValueError(
                f"transfer for control {k} provides {t.n_pixels} parameters, "
                f"problem grid has {problem.grid.pixel_count} pixels"
            )
        transfers.append(t)
    return tuple(transfers)
