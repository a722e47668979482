"""Dense complex linear algebra for small systems (d <= 64).

Operators and states are plain ``numpy`` arrays. The ``as_*`` helpers
validate and return complex copies; every public routine that needs a
Hermitian operator or a normalized state checks it on entry.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError, HermiticityError, MatrixOverflowError, StateError

MAX_DIM = 64
HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10
IMAG_TOL = 1e-10
VARIANCE_CLAMP = 1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a finite square complex matrix."""
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square matrix, got shape {a.shape}")
    if a.shape[0] > MAX_DIM:
        raise DimensionError(f"dimension {a.shape[0]} exceeds the dense cap {MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def hermiticity_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_defect(np.asarray(m)) <= tol


def as_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate the Hermitian tag of ``m`` (max-entry deviation <= ``tol``)."""
    a = as_matrix(m)
    defect = hermiticity_defect(a)
    if defect > tol:
        raise HermiticityError(f"operator is not Hermitian: max |M - M^dag| = {defect:.3e}")
    return a


def as_state(v, normalized: bool = True) -> np.ndarray:
    """Return ``v`` as a complex state vector.

    A normalized state must have unit norm to ``NORM_TOL``; an unnormalized
    one only needs to be nonzero.
    """
    psi = np.array(v, dtype=complex)
    if psi.ndim != 1 or psi.size == 0:
        raise DimensionError(f"expected a non-empty 1-d state, got shape {psi.shape}")
    if psi.size > MAX_DIM:
        raise DimensionError(f"dimension {psi.size} exceeds the dense cap {MAX_DIM}")
    if not np.all(np.isfinite(psi)):
        raise StateError("state has non-finite amplitudes")
    nrm = np.linalg.norm(psi)
    if normalized:
        if abs(nrm - 1.0) > NORM_TOL:
            raise StateError(f"state is not normalized: norm = {nrm!r}")
    elif nrm == 0.0:
        raise StateError("zero vector is not a physical state")
    return psi


def normalize(v) -> np.ndarray:
    psi = as_state(v, normalized=False)
    return psi / np.linalg.norm(psi)


def _check_dims(op: np.ndarray, psi: np.ndarray) -> None:
    if op.shape[0] != psi.shape[0]:
        raise DimensionError(f"operator is {op.shape[0]}x{op.shape[0]} but state has dimension {psi.shape[0]}")


def _real(z: complex, scale: float, what: str) -> float:
    if abs(z.imag) > IMAG_TOL * max(1.0, scale):
        raise HermiticityError(f"{what} has imaginary residue {z.imag:.3e}")
    return float(z.real)


def expectation(op, psi) -> float:
    """<psi|op|psi> for Hermitian ``op`` and normalized ``psi``."""
    op = as_hermitian(op)
    psi = as_state(psi)
    _check_dims(op, psi)
    return _real(np.vdot(psi, op @ psi), float(np.max(np.abs(op))), "expectation value")


def variance(op, psi) -> float:
    """<op^2> - <op>^2, evaluated as ||(op - <op>) psi||^2."""
    op = as_hermitian(op)
    psi = as_state(psi)
    _check_dims(op, psi)
    mean = expectation(op, psi)
    w = op @ psi - mean * psi
    var = float(np.vdot(w, w).real)
    if -VARIANCE_CLAMP <= var < 0.0:
        var = 0.0
    return var


def covariance(op_a, op_b, psi) -> float:
    """Symmetrized covariance Re<psi|A B|psi> - <A><B>."""
    op_a = as_hermitian(op_a)
    op_b = as_hermitian(op_b)
    psi = as_state(psi)
    _check_dims(op_a, psi)
    _check_dims(op_b, psi)
    wa = op_a @ psi - expectation(op_a, psi) * psi
    wb = op_b @ psi - expectation(op_b, psi) * psi
    return float(np.vdot(wa, wb).real)


def commutator(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return a @ b - b @ a


def commutator_norm(a, b) -> float:
    """Max-entry norm of [a, b]."""
    return float(np.max(np.abs(commutator(a, b))))


def hermitian_eigh(op) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns."""
    op = as_hermitian(op)
    # symmetrize so LAPACK sees an exactly Hermitian input
    vals, vecs = np.linalg.eigh(0.5 * (op + op.conj().T))
    return vals, vecs


def hermitian_function(op, fn) -> np.ndarray:
    """Spectral calculus: V diag(fn(lambda)) V^dag."""
    vals, vecs = hermitian_eigh(op)
    mapped = np.asarray(fn(vals), dtype=complex)
    out = (vecs * mapped) @ vecs.conj().T
    return 0.5 * (out + out.conj().T) if np.all(mapped.imag == 0) else out


def exp_hermitian(op, factor: complex) -> np.ndarray:
    """exp(factor * op) for Hermitian ``op`` through its eigendecomposition."""
    vals, vecs = hermitian_eigh(op)
    return (vecs * np.exp(factor * vals)) @ vecs.conj().T


# Pade [13/13] coefficients and the 1-norm threshold below which the
# unscaled approximant is accurate to unit roundoff (Higham 2005).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def matrix_exp(m) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a [13/13] Pade approximant.

    Accepts a single ``(d, d)`` matrix or a stack ``(..., d, d)``; a stack
    shares one scaling exponent (the largest one needed).
    """
    a = np.array(m, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"expected square matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    d = a.shape[-1]
    norm1 = float(np.max(np.sum(np.abs(a), axis=-2))) if a.size else 0.0
    s = 0 if norm1 <= _THETA13 else int(math.ceil(math.log2(norm1 / _THETA13)))
    a = a / (2.0**s)

    b = _PADE13
    eye = np.broadcast_to(np.eye(d, dtype=complex), a.shape)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
    r = np.linalg.solve(v - u, v + u)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            r = r @ r
    if not np.all(np.isfinite(r)):
        raise MatrixOverflowError(f"matrix exponential overflowed (1-norm {norm1:.3e})")
    return r
