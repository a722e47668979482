"""Continuous-measurement model H1 = hbar f g((A - a(t)) / da).

Everything here is expressed in the eigenbasis {|a_i>} of the measured
observable A. The penalty ``g`` must satisfy g >= 0 and g(0) = 0 and is
applied to A by spectral calculus.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate

from .dynamics import SplitHamiltonian
from .errors import CommutatorError, DimensionError
from .linalg import as_hermitian, as_state, covariance, expectation, hermitian_eigh, variance

PENALTY_ZERO_TOL = 1e-15
TIE_RTOL = 1e-12
OVERLAP_TOL = 1e-12
SMALL_TIME_WINDOW = 0.1
COMMUTATOR_TOL = 1e-10
_PENALTY_PROBE = np.concatenate([np.linspace(-50.0, 50.0, 1001), [0.0]])


def quadratic_penalty(x):
    """g(x) = x^2 / 4."""
    return 0.25 * np.square(x)


def abs_penalty(x):
    return np.abs(x)


def quartic_penalty(x):
    return 0.25 * np.power(x, 4)


PENALTIES: dict[str, Callable] = {
    "quadratic": quadratic_penalty,
    "abs": abs_penalty,
    "quartic": quartic_penalty,
}

Record = Union[float, Callable[[float], float]]


@dataclass(frozen=True)
class MeasurementSpec:
    """Observable, record, accuracy, strength and penalty of the measurement."""

    observable: np.ndarray
    accuracy: float
    strength: float
    record: Record = 0.0
    penalty: Callable = quadratic_penalty

    def __post_init__(self):
        object.__setattr__(self, "observable", as_hermitian(self.observable))
        if not (math.isfinite(self.accuracy) and self.accuracy > 0):
            raise ValueError(f"accuracy must be positive, got {self.accuracy}")
        if not (math.isfinite(self.strength) and self.strength >= 0):
            raise ValueError(f"strength must be nonnegative, got {self.strength}")
        if not callable(self.record) and not math.isfinite(self.record):
            raise ValueError(f"record must be finite, got {self.record}")
        check_penalty(self.penalty)

    @property
    def constant_record(self) -> bool:
        return not callable(self.record)

    def record_at(self, t: float) -> float:
        return float(self.record(t)) if callable(self.record) else float(self.record)

    def with_strength(self, f: float) -> "MeasurementSpec":
        return MeasurementSpec(self.observable, self.accuracy, f, self.record, self.penalty)


def check_penalty(g: Callable) -> None:
    values = np.asarray(g(_PENALTY_PROBE), dtype=float)
    if values.shape != _PENALTY_PROBE.shape or not np.all(np.isfinite(values)):
        raise ValueError("penalty must map arrays elementwise to finite reals")
    if np.any(values < 0):
        raise ValueError("penalty must be nonnegative")
    if abs(values[-1]) > PENALTY_ZERO_TOL:
        raise ValueError(f"penalty must vanish at 0, got g(0) = {values[-1]!r}")


def penalty_values(spec: MeasurementSpec, t: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """(g((a_i - a(t)) / da) for each eigenvalue, eigenvectors of A)."""
    a, vecs = hermitian_eigh(spec.observable)
    return np.asarray(spec.penalty((a - spec.record_at(t)) / spec.accuracy), dtype=float), vecs


def penalty_operator(spec: MeasurementSpec, t: float = 0.0) -> np.ndarray:
    """g((A - a(t)) / da) as an operator."""
    g, vecs = penalty_values(spec, t)
    out = (vecs * g) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


def build_h1(spec: MeasurementSpec, t: float = 0.0, hbar: float = 1.0) -> np.ndarray:
    return hbar * spec.strength * penalty_operator(spec, t)


def split_hamiltonian(h0, spec: MeasurementSpec, hbar: float = 1.0) -> SplitHamiltonian:
    """H0 - i H1 with H1 built from ``spec``; time-dependent if the record is."""
    if spec.constant_record:
        return SplitHamiltonian(h0, build_h1(spec, 0.0, hbar), hbar)
    return SplitHamiltonian(h0, lambda t: build_h1(spec, t, hbar), hbar)


def accumulated_penalty(spec: MeasurementSpec, t: float) -> np.ndarray:
    """x_i(t) = integral_0^t g((a_i - a(s)) / da) ds for every eigenvalue."""
    if spec.constant_record:
        return penalty_values(spec)[0] * t
    a, _ = hermitian_eigh(spec.observable)
    g = spec.penalty
    return np.array([
        integrate.quad(lambda s, ai=ai: float(g((ai - spec.record_at(s)) / spec.accuracy)), 0.0, t, limit=200)[0]
        for ai in a
    ])


def to_eigenbasis(spec: MeasurementSpec, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=complex)
    _, vecs = hermitian_eigh(spec.observable)
    if phi.shape != (vecs.shape[0],):
        raise DimensionError(f"state shape {phi.shape} does not match observable {vecs.shape}")
    return vecs.conj().T @ phi


def amplitude_decay(spec: MeasurementSpec, coeffs, t: float) -> np.ndarray:
    """Phi_i(t) = exp(-f x_i(t)) Phi_i(0), coefficients in the A eigenbasis.

    Free evolution is neglected.
    """
    c = np.asarray(coeffs, dtype=complex)
    return np.exp(-spec.strength * accumulated_penalty(spec, t)) * c


def _populations(spec: MeasurementSpec, phi0, t: float) -> np.ndarray:
    # normalized weights |Phi_i(0)|^2 exp(-2 f x_i), shifted in log space
    p0 = np.abs(to_eigenbasis(spec, phi0)) ** 2
    logw = np.full(p0.shape, -np.inf)
    nz = p0 > 0
    logw[nz] = np.log(p0[nz]) - 2.0 * spec.strength * accumulated_penalty(spec, t)[nz]
    w = np.exp(logw - logw[nz].max())
    return w / w.sum()


def h1_expectation_ratio(spec: MeasurementSpec, phi0, t: float, hbar: float = 1.0) -> float:
    """<Psi(t)|H1|Psi(t)> from the ratio of exponentially weighted sums."""
    g, _ = penalty_values(spec, t)
    return float(np.dot(_populations(spec, phi0, t), hbar * spec.strength * g))


def h1_variance_ratio(spec: MeasurementSpec, phi0, t: float, hbar: float = 1.0) -> float:
    """Delta H1^2 in Psi(t) from the same weighted sums."""
    g, _ = penalty_values(spec, t)
    w = _populations(spec, phi0, t)
    vals = hbar * spec.strength * g
    mean = np.dot(w, vals)
    return float(np.dot(w, (vals - mean) ** 2))


@dataclass(frozen=True)
class ZenoPrediction:
    """Large-strength limit: the state freezes in the minimizing eigenspace."""

    indices: tuple[int, ...]
    attractor_state: np.ndarray
    limit_h1_expectation: float
    x_values: np.ndarray

    @property
    def r(self) -> int:
        return self.indices[0]

    @property
    def tie(self) -> bool:
        return len(self.indices) > 1


def zeno_prediction(spec: MeasurementSpec, phi0, t: float = 1.0, hbar: float = 1.0) -> ZenoPrediction:
    """Attractor of the f -> infinity limit for a constant record.

    Eigenvalues where ``phi0`` has no weight are skipped; all indices tying
    for the smallest accumulated penalty are reported, and the attractor is
    the normalized projection of ``phi0`` onto their span.
    """
    if not spec.constant_record:
        raise ValueError("zeno_prediction assumes a constant measurement record")
    phi0 = as_state(phi0)
    coeffs = to_eigenbasis(spec, phi0)
    x = accumulated_penalty(spec, t)
    live = np.flatnonzero(np.abs(coeffs) > OVERLAP_TOL)
    xmin = x[live].min()
    scale = max(abs(xmin), float(np.max(np.abs(x[live]))), 1.0)
    idx = tuple(int(i) for i in live if x[i] - xmin <= TIE_RTOL * scale)
    _, vecs = hermitian_eigh(spec.observable)
    state = vecs[:, idx] @ coeffs[list(idx)]
    state = state / np.linalg.norm(state)
    g, _ = penalty_values(spec)
    return ZenoPrediction(idx, state, float(hbar * spec.strength * g[idx[0]]), x)


@dataclass(frozen=True)
class SmallTimeSpeed:
    speed: float
    x_coefficient: float
    variance0: float
    in_window: bool

    @property
    def speeds_up(self) -> bool:
        return self.x_coefficient > 0


def small_time_speed(spec: MeasurementSpec, h0, psi0, t: float, hbar: float = 1.0) -> SmallTimeSpeed:
    """First-order-in-t speed for an observable commuting with H0.

    V = (2/hbar) sqrt(dH0^2(0) + 2 t f X) with
    X = 2 <H0> Cov(g, H0) - Cov(g, H0^2), all moments in the initial state.
    The measurement contribution dH1^2 is second order in f g and dropped.
    """
    if not spec.constant_record:
        raise ValueError("small_time_speed assumes a constant measurement record")
    h0 = as_hermitian(h0)
    psi0 = as_state(psi0)
    g_op = penalty_operator(spec)
    c = float(np.max(np.abs(g_op @ h0 - h0 @ g_op)))
    if c > COMMUTATOR_TOL:
        raise CommutatorError(f"[g(A), H0] has max entry {c:.3e} > {COMMUTATOR_TOL:g}")
    g_max = float(np.max(penalty_values(spec)[0]))
    in_window = 2.0 * spec.strength * g_max * t <= SMALL_TIME_WINDOW
    if not in_window:
        warnings.warn(
            f"2 f max(g) t = {2.0 * spec.strength * g_max * t:.3g} exceeds {SMALL_TIME_WINDOW}; "
            "linearization may be inaccurate",
            RuntimeWarning,
            stacklevel=2,
        )
    h0_sq = h0 @ h0
    x = 2.0 * expectation(h0, psi0) * covariance(g_op, h0, psi0) - covariance(g_op, 0.5 * (h0_sq + h0_sq.conj().T), psi0)
    var0 = variance(h0, psi0)
    radicand = max(0.0, var0 + 2.0 * t * spec.strength * x)
    return SmallTimeSpeed(2.0 / hbar * math.sqrt(radicand), x, var0, in_window)
