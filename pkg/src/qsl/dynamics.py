"""Pure-state evolution under H = H0 - i H1.

The linear equation ``i hbar dPhi/dt = (H0 - i H1) Phi`` is integrated for
the unnormalized state; the normalized state ``Psi = Phi / ||Phi||`` is only
ever a view of the result. Three routes are provided:

* :func:`evolve_rk4` -- classical fourth-order Runge-Kutta with step halving,
  works for a time-dependent ``H1``;
* :func:`evolve_exp` -- dense exponential of the constant generator;
* :func:`evolve_commuting` -- ``exp(-i H0 t/hbar) exp(-H1 t/hbar)`` when
  ``[H1, H0] = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import CommutatorError, DimensionError, FilteredOutError, StepSizeError
from .linalg import as_hermitian, as_state, commutator_norm, exp_hermitian, matrix_exp

SURVIVAL_FLOOR = 1e-300
COMMUTATOR_TOL = 1e-10
RK4_MAX_DT = 1e-3
RK4_MIN_STEPS = 2000
RK4_TOL = 1e-8
RK4_MAX_HALVINGS = 6

H1Like = Union[np.ndarray, Callable[[float], np.ndarray]]


@dataclass(frozen=True)
class SplitHamiltonian:
    """H = h0 - i h1 with Hermitian parts; ``h1`` may be a function of time."""

    h0: np.ndarray
    h1: H1Like
    hbar: float = 1.0

    def __post_init__(self):
        h0 = as_hermitian(self.h0)
        object.__setattr__(self, "h0", h0)
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if not callable(self.h1):
            h1 = as_hermitian(self.h1)
            if h1.shape != h0.shape:
                raise DimensionError(f"h0 is {h0.shape} but h1 is {h1.shape}")
            object.__setattr__(self, "h1", h1)

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    @property
    def time_independent(self) -> bool:
        return not callable(self.h1)

    def h1_at(self, t: float) -> np.ndarray:
        if not callable(self.h1):
            return self.h1
        h1 = as_hermitian(self.h1(t))
        if h1.shape != self.h0.shape:
            raise DimensionError(f"h1({t}) has shape {h1.shape}, expected {self.h0.shape}")
        return h1

    def generator(self, t: float = 0.0) -> np.ndarray:
        """The matrix M with dPhi/dt = M Phi, i.e. -(i H0 + H1)/hbar."""
        return -(1j * self.h0 + self.h1_at(t)) / self.hbar


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution: ``phi[k]`` is Phi(times[k]), ``psi[k]`` its normalized view."""

    times: np.ndarray
    phi: np.ndarray
    psi: np.ndarray = field(repr=False)
    survival: np.ndarray = field(repr=False)

    @classmethod
    def from_phi(cls, times, phi) -> "Trajectory":
        times = np.asarray(times, dtype=float)
        phi = np.asarray(phi, dtype=complex)
        norms2 = np.sum(np.abs(phi) ** 2, axis=1)
        bad = np.flatnonzero(~(norms2 >= SURVIVAL_FLOOR))
        if bad.size:
            k = bad[0]
            raise FilteredOutError(
                f"state fully filtered out: survival {norms2[k]:.3e} < {SURVIVAL_FLOOR:g} at t = {times[k]!r}"
            )
        psi = phi / np.sqrt(norms2)[:, None]
        return cls(times, phi, psi, norms2)

    def __len__(self) -> int:
        return self.times.size


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(t)):
        raise ValueError("time grid has non-finite entries")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def _initial(h: SplitHamiltonian, phi0) -> np.ndarray:
    phi0 = as_state(phi0)
    if phi0.size != h.dim:
        raise DimensionError(f"initial state has dimension {phi0.size}, Hamiltonian {h.dim}")
    return phi0


def _rk4_step_matrix(m: np.ndarray, dt: float) -> np.ndarray:
    # one classical RK4 step for constant M is exactly this Taylor polynomial
    x = dt * m
    eye = np.eye(m.shape[0], dtype=complex)
    return eye + x @ (eye + x @ (eye / 2 + x @ (eye / 6 + x / 24)))


def _rk4_pass(h: SplitHamiltonian, phi0: np.ndarray, t: np.ndarray, dt: float) -> np.ndarray:
    out = np.empty((t.size, phi0.size), dtype=complex)
    out[0] = phi0
    phi = phi0
    if h.time_independent:
        m = h.generator()
        cache: dict[tuple[int, float], np.ndarray] = {}
        for k in range(1, t.size):
            span = t[k] - t[k - 1]
            n = max(1, math.ceil(span / dt - 1e-9))
            key = (n, round(span, 15))
            prop = cache.get(key)
            if prop is None:
                prop = np.linalg.matrix_power(_rk4_step_matrix(m, span / n), n)
                cache[key] = prop
            phi = prop @ phi
            out[k] = phi
        return out

    for k in range(1, t.size):
        span = t[k] - t[k - 1]
        n = max(1, math.ceil(span / dt - 1e-9))
        step = span / n
        s = t[k - 1]
        for _ in range(n):
            m_a = h.generator(s)
            m_b = h.generator(s + step / 2)
            m_c = h.generator(s + step)
            k1 = m_a @ phi
            k2 = m_b @ (phi + step / 2 * k1)
            k3 = m_b @ (phi + step / 2 * k2)
            k4 = m_c @ (phi + step * k3)
            phi = phi + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            s += step
        out[k] = phi
    return out


def _rk4_discrepancy(coarse: np.ndarray, fine: np.ndarray) -> float:
    nc = np.linalg.norm(coarse, axis=1)
    nf = np.linalg.norm(fine, axis=1)
    if np.any(nf < math.sqrt(SURVIVAL_FLOOR)):
        raise FilteredOutError("state fully filtered out during Runge-Kutta integration")
    state_gap = np.linalg.norm(coarse / nc[:, None] - fine / nf[:, None], axis=1)
    norm_gap = np.abs(nc**2 - nf**2) / nf**2
    return float(max(state_gap.max(), norm_gap.max()))


def evolve_rk4(h: SplitHamiltonian, phi0, t_grid, dt: float | None = None, tol: float = RK4_TOL) -> Trajectory:
    """Integrate with classical RK4, halving the step until the result is stable.

    The default step is ``min(1e-3, T/2000)``. Each pass is compared with one
    at half the step; the finer pass is returned once both the normalized
    states and the relative survival agree to ``tol`` on every grid point.
    """
    t = _check_grid(t_grid)
    phi0 = _initial(h, phi0)
    if t.size == 1:
        return Trajectory.from_phi(t, phi0[None, :])
    total = t[-1] - t[0]
    if dt is None:
        dt = min(RK4_MAX_DT, total / RK4_MIN_STEPS)
    coarse = _rk4_pass(h, phi0, t, dt)
    for _ in range(RK4_MAX_HALVINGS):
        dt /= 2
        fine = _rk4_pass(h, phi0, t, dt)
        if not np.all(np.isfinite(fine)):
            raise StepSizeError("Runge-Kutta integration diverged")
        gap = _rk4_discrepancy(coarse, fine)
        if gap < tol:
            return Trajectory.from_phi(t, fine)
        coarse = fine
    raise StepSizeError(f"step halving did not converge: last change {gap:.3e} >= {tol:g} at dt = {dt:.3e}")


def evolve_exp(h: SplitHamiltonian, phi0, t_grid) -> Trajectory:
    """Phi(t) = exp(-i (H0 - i H1) (t - t0) / hbar) Phi(t0) for constant H1."""
    if not h.time_independent:
        raise ValueError("evolve_exp needs a time-independent H1; use evolve_rk4")
    t = _check_grid(t_grid)
    phi0 = _initial(h, phi0)
    props = matrix_exp((t - t[0])[:, None, None] * h.generator()[None, :, :])
    return Trajectory.from_phi(t, props @ phi0)


def evolve_commuting(h: SplitHamiltonian, phi0, t_grid, tol: float = COMMUTATOR_TOL) -> Trajectory:
    """Factorized propagator exp(-i H0 t/hbar) exp(-H1 t/hbar), valid when [H1, H0] = 0."""
    if not h.time_independent:
        raise ValueError("evolve_commuting needs a time-independent H1")
    c = commutator_norm(h.h1, h.h0)
    if c > tol:
        raise CommutatorError(f"[H1, H0] has max entry {c:.3e} > {tol:g}; factorization invalid")
    t = _check_grid(t_grid)
    phi0 = _initial(h, phi0)
    phi = np.empty((t.size, phi0.size), dtype=complex)
    for k, s in enumerate(t - t[0]):
        unitary = exp_hermitian(h.h0, -1j * s / h.hbar)
        damping = exp_hermitian(h.h1, -s / h.hbar)
        phi[k] = unitary @ (damping @ phi0)
    return Trajectory.from_phi(t, phi)


def evolve(h: SplitHamiltonian, phi0, t_grid, route: str = "exp") -> Trajectory:
    routes = {"exp": evolve_exp, "rk4": evolve_rk4, "commuting": evolve_commuting}
    try:
        fn = routes[route]
    except KeyError:
        raise ValueError(f"unknown route {route!r}; choose from {sorted(routes)}") from None
    return fn(h, phi0, t_grid)


def normalized_rhs_residual(h: SplitHamiltonian, traj: Trajectory) -> float:
    """Max over interior samples of ||centered dPsi/dt - rhs(Psi)||.

    ``rhs`` is the nonlinear equation for the normalized state,
    ``-(i/hbar) [H0 Psi - i (H1 - <H1>) Psi]``. The residual is a consistency
    diagnostic and shrinks as O(dt^2).
    """
    if len(traj) < 3:
        raise ValueError("need at least 3 samples for centered differences")
    t, psi = traj.times, traj.psi
    worst = 0.0
    for k in range(1, t.size - 1):
        dpsi = (psi[k + 1] - psi[k - 1]) / (t[k + 1] - t[k - 1])
        h1 = h.h1_at(t[k])
        p = psi[k]
        mean1 = np.vdot(p, h1 @ p).real
        rhs = (-1j * (h.h0 @ p) - (h1 @ p - mean1 * p)) / h.hbar
        worst = max(worst, float(np.linalg.norm(dpsi - rhs)))
    return worst
