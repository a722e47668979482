"""Fubini-Study speed, path length, geodesic distance and the QSL time.

Two independent evaluations of the evolution speed are provided:
:func:`speed_from_operators` uses the variances of the Hamiltonian parts,
:func:`speed_from_trajectory` differentiates a sampled normalized state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import SplitHamiltonian, Trajectory
from .errors import DimensionError, HermiticityError, QslError, RadicandError
from .linalg import IMAG_TOL, as_state, commutator, variance

RADICAND_TOL = 1e-10


def speed_from_operators(h: SplitHamiltonian, psi, t: float = 0.0) -> float:
    """V = (2/hbar) sqrt(dH0^2 + dH1^2 + i<[H1, H0]>) in the normalized state ``psi``."""
    psi = as_state(psi)
    h1 = h.h1_at(t)
    comm = commutator(h1, h.h0)
    raw = 1j * np.vdot(psi, comm @ psi)
    if abs(raw.imag) > IMAG_TOL * max(1.0, float(np.max(np.abs(comm)))):
        raise HermiticityError(f"i<[H1,H0]> has imaginary residue {raw.imag:.3e}")
    radicand = variance(h.h0, psi) + variance(h1, psi) + raw.real
    if radicand < 0.0:
        if radicand < -RADICAND_TOL:
            raise RadicandError(f"speed radicand {radicand:.3e} is negative beyond {RADICAND_TOL:g}")
        radicand = 0.0
    return 2.0 / h.hbar * math.sqrt(radicand)


def speeds_from_operators(h: SplitHamiltonian, traj: Trajectory) -> np.ndarray:
    """:func:`speed_from_operators` at every sample of ``traj``."""
    if not h.time_independent:
        return np.array([speed_from_operators(h, p, t) for t, p in zip(traj.times, traj.psi)])
    psi = traj.psi
    comm = commutator(h.h1, h.h0)

    def centered_sq(op):
        w = psi @ op.T
        mean = np.einsum("ki,ki->k", psi.conj(), w).real
        w -= mean[:, None] * psi
        return np.sum(np.abs(w) ** 2, axis=1)

    raw = 1j * np.einsum("ki,ki->k", psi.conj(), psi @ comm.T)
    worst = float(np.max(np.abs(raw.imag)))
    if worst > IMAG_TOL * max(1.0, float(np.max(np.abs(comm)))):
        raise HermiticityError(f"i<[H1,H0]> has imaginary residue {worst:.3e}")
    radicand = centered_sq(h.h0) + centered_sq(h.h1) + raw.real
    if np.any(radicand < -RADICAND_TOL):
        raise RadicandError(f"speed radicand {radicand.min():.3e} is negative beyond {RADICAND_TOL:g}")
    return 2.0 / h.hbar * np.sqrt(np.clip(radicand, 0.0, None))


def speed_from_trajectory(traj: Trajectory | tuple) -> np.ndarray:
    """V = 2 sqrt(<dPsi|dPsi> - |<Psi|dPsi>|^2) with second-order finite differences.

    Accepts a :class:`Trajectory` or a ``(times, psi)`` pair where ``psi`` rows
    are normalized states.
    """
    if isinstance(traj, Trajectory):
        times, psi = traj.times, traj.psi
    else:
        times, psi = traj
        times = np.asarray(times, dtype=float)
        psi = np.asarray(psi, dtype=complex)
    if times.size < 3:
        raise ValueError("need at least 3 samples")
    if not np.all(np.diff(times) > 0):
        raise ValueError("degenerate time grid: samples must be strictly increasing")
    dpsi = np.gradient(psi, times, axis=0, edge_order=2)
    kinetic = np.sum(np.abs(dpsi) ** 2, axis=1)
    overlap = np.einsum("ki,ki->k", psi.conj(), dpsi)
    metric = kinetic - np.abs(overlap) ** 2
    return 2.0 * np.sqrt(np.clip(metric, 0.0, None))


def path_length(v_samples, times) -> float:
    """Trapezoid integral of the speed over the sampled grid."""
    v = np.asarray(v_samples, dtype=float)
    t = np.asarray(times, dtype=float)
    if v.shape != t.shape:
        raise ValueError(f"speed samples {v.shape} and times {t.shape} are not aligned")
    return float(np.trapezoid(v, t))


def average_speed(v_samples, times) -> float:
    t = np.asarray(times, dtype=float)
    total = float(t[-1] - t[0]) if t.size else 0.0
    if total <= 0.0:
        raise ValueError("total time must be positive to average the speed")
    return path_length(v_samples, t) / total


def geodesic_distance(psi0, psi_t) -> float:
    """2 arccos |<psi0|psi_t>|, in [0, pi]."""
    a = as_state(psi0)
    b = as_state(psi_t)
    if a.size != b.size:
        raise DimensionError(f"state dimensions differ: {a.size} vs {b.size}")
    overlap = min(1.0, max(0.0, abs(np.vdot(a, b))))
    return 2.0 * math.acos(overlap)


@dataclass(frozen=True)
class QslReport:
    v_samples: np.ndarray
    v_bar: float
    path_length: float
    geodesic: float
    t_qsl: float
    total_time: float

    @property
    def bound_gap(self) -> float:
        """V_bar * T - S0; nonnegative whenever the QSL bound holds."""
        return self.v_bar * self.total_time - self.geodesic


def qsl_time(traj: Trajectory, v_samples=None, h: SplitHamiltonian | None = None, zero_tol: float = 1e-12) -> QslReport:
    """Assemble a :class:`QslReport` for a completed run.

    Speeds come from ``v_samples`` if given, otherwise from the operator
    formula (needs ``h``) or, failing that, from finite differences.
    """
    if v_samples is None:
        v_samples = speeds_from_operators(h, traj) if h is not None else speed_from_trajectory(traj)
    v = np.asarray(v_samples, dtype=float)
    total = float(traj.times[-1] - traj.times[0])
    v_bar = average_speed(v, traj.times)
    length = path_length(v, traj.times)
    s0 = geodesic_distance(traj.psi[0], traj.psi[-1])
    if v_bar > 0.0:
        t_qsl = s0 / v_bar
    elif s0 <= zero_tol:
        t_qsl = 0.0
    else:
        raise QslError(f"zero average speed with geodesic distance {s0:.3e}: inconsistent inputs")
    return QslReport(v, v_bar, length, s0, t_qsl, total)
