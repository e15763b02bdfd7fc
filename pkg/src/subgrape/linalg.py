"""Dense complex matrix kernel: Hermitian eigendecomposition, unitary
exponentials exp(-i*A*dt), and projected trace overlaps.

Conventions used throughout the package: hbar = 1, Hamiltonian entries in
rad/ns, times in ns, so A*dt is an angle in radians. All functions are pure
and never mutate their inputs; system dimensions are small (<= 4 in the
shipped scenarios), so everything is dense.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

NDArrayComplex = npt.NDArray[np.complex128]
NDArrayFloat = npt.NDArray[np.float64]

__all__ = [
    "HERMITICITY_ATOL",
    "UNITARITY_ATOL",
    "EigenDecomposition",
    "eig_hermitian",
    "expm_hermitian",
    "frobenius_overlap",
    "hermiticity_defect",
    "unitarity_defect",
    "require_hermitian",
]

# Entrywise absolute tolerance for calling a matrix Hermitian.
HERMITICITY_ATOL = 1e-12
# Entrywise absolute tolerance on |U^dag U - I| for calling a matrix unitary.
UNITARITY_ATOL = 1e-10


def _as_square(a: npt.ArrayLike, name: str = "matrix") -> NDArrayComplex:
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    return arr


def hermiticity_defect(a: npt.ArrayLike) -> float:
    """Return max |A - A^dag|, the entrywise deviation from Hermiticity."""
    arr = _as_square(a)
    return float(np.max(np.abs(arr - arr.conj().T)))


def unitarity_defect(u: npt.ArrayLike) -> float:
    """Return max |U^dag U - I|, the entrywise deviation from unitarity."""
    arr = _as_square(u)
    eye = np.eye(arr.shape[0])
    return float(np.max(np.abs(arr.conj().T @ arr - eye)))


def require_hermitian(
    a: npt.ArrayLike, tol: float = HERMITICITY_ATOL, name: str = "matrix"
) -> NDArrayComplex:
    """Validate Hermiticity and return the array, else raise with the defect.

    Raises
    ------
    ValueError
        If ``max |A - A^dag|`` exceeds ``tol``; the message carries the
        offending maximum asymmetry.
    """
    arr = _as_square(a, name)
    defect = float(np.max(np.abs(arr - arr.conj().T)))
    if defect > tol:
        raise ValueError(
            f"{name} is not Hermitian: max |A - A^dag| = {defect:.3e} exceeds {tol:.1e}"
        )
    return arr


@dataclass(frozen=True)
class EigenDecomposition:
    """Spectral decomposition A = V diag(w) V^dag of a Hermitian matrix.

    Attributes
    ----------
    eigenvalues : ndarray
        Real eigenvalues in ascending order, rad/ns.
    eigenvectors : ndarray
        Unitary matrix whose columns are the corresponding eigenvectors.
    """

    eigenvalues: NDArrayFloat
    eigenvectors: NDArrayComplex

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> NDArrayComplex:
        """Return V diag(w) V^dag."""
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eig_hermitian(a: npt.ArrayLike, tol: float = HERMITICITY_ATOL) -> EigenDecomposition:
    """Diagonalize a Hermitian matrix.

    Parameters
    ----------
    a : array_like
        Square Hermitian matrix (entries rad/ns for Hamiltonians).
    tol : float
        Maximum accepted entrywise asymmetry.

    Returns
    -------
    EigenDecomposition
        Eigenvalues ascending; eigenvector phases are solver-dependent, which
        downstream formulas are invariant to.
    """
    arr = require_hermitian(a, tol)
    w, v = np.linalg.eigh(arr)
    return EigenDecomposition(eigenvalues=w, eigenvectors=v)


def expm_hermitian(a: npt.ArrayLike, dt: float, tol: float = HERMITICITY_ATOL) -> NDArrayComplex:
    """Return the unitary exp(-i*A*dt) for Hermitian A via eigendecomposition.

    Parameters
    ----------
    a : array_like
        Hermitian generator, rad/ns.
    dt : float
        Duration in ns; must be positive.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    dec = eig_hermitian(a, tol)
    phases = np.exp(-1j * dec.eigenvalues * dt)
    v = dec.eigenvectors
    return (v * phases) @ v.conj().T


def frobenius_overlap(
    a: npt.ArrayLike, b: npt.ArrayLike, projector: npt.ArrayLike | None = None
) -> complex:
    """Return the projected trace overlap Tr(A^dag B P).

    ``projector`` defaults to the identity. Dimensions must agree.
    """
    am = _as_square(a, "a")
    bm = _as_square(b, "b")
    if am.shape != bm.shape:
        raise ValueError(f"dimension mismatch: {am.shape} vs {bm.shape}")
    prod = am.conj().T @ bm
    if projector is None:
        return complex(np.trace(prod))
    pm = _as_square(projector, "projector")
    if pm.shape != am.shape:
        raise ValueError(f"projector dimension mismatch: {pm.shape} vs {am.shape}")
    return complex(np.trace(prod @ pm))
