"""Spin-1/2 worked example and the three figure sweeps.

H0 = omega sigma_z + alpha sigma_x, the observable A is diagonal in the
eigenbasis of H0, g(x) = x^2/4 and the initial state is (|0> + |1>)/sqrt 2.
The sweep helpers at the bottom (``speed_vs_strength`` and friends) work for
any ``h0``/``MeasurementSpec`` pair; the ``figure*_sweep`` functions bind them
to this example.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import SplitHamiltonian, evolve_exp
from .errors import ConfigError
from .geometry import geodesic_distance, speed_from_operators, speeds_from_operators
from .linalg import SIGMA_X, SIGMA_Z, commutator_norm, hermitian_eigh, normalize
from .measurement import MeasurementSpec, quadratic_penalty, split_hamiltonian

STRUCTURE_TOL = 1e-12
FIG1_TIME = 0.1


@dataclass(frozen=True)
class SpinExampleConfig:
    omega: float = 1.0
    alpha: float = 1.0
    hbar: float = 1.0
    a1: float = 0.03
    a2: float = 0.05
    delta_a: float = 0.01
    a_record: float = 0.02
    f: float = 5.0
    t_final: float = 3.0
    samples: int = 300

    def __post_init__(self):
        for name in ("omega", "alpha", "hbar", "a1", "a2", "delta_a", "a_record", "f", "t_final"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not self.a2 > self.a1:
            raise ConfigError(f"a2 must exceed a1 (got a1={self.a1}, a2={self.a2})")
        if not self.delta_a > 0:
            raise ConfigError(f"delta_a must be positive (got {self.delta_a})")
        if not self.hbar > 0:
            raise ConfigError(f"hbar must be positive (got {self.hbar})")
        if self.f < 0:
            raise ConfigError(f"f must be nonnegative (got {self.f})")
        if self.samples < 3:
            raise ConfigError(f"samples must be at least 3 (got {self.samples})")

    def with_f(self, f: float) -> "SpinExampleConfig":
        return replace(self, f=f)


def free_hamiltonian(config: SpinExampleConfig) -> np.ndarray:
    return config.omega * SIGMA_Z + config.alpha * SIGMA_X


def observable(config: SpinExampleConfig) -> np.ndarray:
    """A = (a21 / 2 sqrt 2) [[sqrt2 trA/a21 + 1, 1], [1, sqrt2 trA/a21 - 1]]."""
    a21 = config.a2 - config.a1
    tr = config.a1 + config.a2
    r2 = math.sqrt(2.0)
    return a21 / (2 * r2) * np.array([[r2 * tr / a21 + 1, 1], [1, r2 * tr / a21 - 1]], dtype=complex)


def initial_state() -> np.ndarray:
    return np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)


def build_example(config: SpinExampleConfig) -> tuple[SplitHamiltonian, MeasurementSpec, np.ndarray]:
    """The example's split Hamiltonian, measurement spec and initial state.

    Raises ConfigError if A fails to commute with H0 (which happens whenever
    omega != alpha) or its spectrum is not {a1, a2}.
    """
    h0 = free_hamiltonian(config)
    a = observable(config)
    c = commutator_norm(a, h0)
    if c > STRUCTURE_TOL:
        raise ConfigError(f"observable does not commute with H0 (max |[A,H0]| = {c:.3e}); needs omega == alpha")
    eig = hermitian_eigh(a)[0]
    if np.max(np.abs(eig - [config.a1, config.a2])) > STRUCTURE_TOL:
        raise ConfigError(f"observable spectrum {eig} differs from ({config.a1}, {config.a2})")
    spec = MeasurementSpec(a, config.delta_a, config.f, config.a_record, quadratic_penalty)
    return split_hamiltonian(h0, spec, config.hbar), spec, initial_state()


@dataclass(frozen=True)
class ClosedFormCoefficients:
    """Exponents and prefactors of the closed-form propagated state.

    ``omega_exp`` is the exponent rate multiplying the a1 branch; it is not
    the sigma_z coupling ``omega`` of the Hamiltonian.
    """

    p: float
    delta: float
    gamma: complex
    omega_exp: complex
    energy: float

    def z1(self, t: float, da2: float) -> complex:
        r2 = math.sqrt(2.0)
        p = self.p
        num = (
            np.exp((self.gamma - self.delta) * t) * (8 * (2 + r2) * da2 - 1j * (1 + r2) * p)
            + np.exp((self.omega_exp - self.delta) * t) * (8 * (r2 - 2) * da2 + (r2 - 1) * 1j * p)
        )
        return complex(num / (2 * r2 * (8 * r2 * da2 - 1j * p)))

    def z2(self, t: float) -> complex:
        return complex(
            (np.exp((self.gamma - self.delta) * t) + np.exp((self.omega_exp - self.delta) * t)) / (2 * math.sqrt(2.0))
        )


def closed_form_coefficients(config: SpinExampleConfig) -> ClosedFormCoefficients:
    """p, delta, gamma and omega_exp for a constant record.

    The energy scale sqrt(2) omega / hbar generalizes the unit couplings the
    formulas were written for.
    """
    f, a1, a2, at = config.f, config.a1, config.a2, config.a_record
    da2 = config.delta_a**2
    energy = math.sqrt(2.0) * config.omega / config.hbar
    p = f * (2 * at - a1 - a2) * (a1 - a2)
    delta = f * (2 * at**2 - 2 * at * (a1 + a2) + a1**2 + a2**2) / (4 * da2)
    gamma = (f * (at - a1) ** 2 - 4j * energy * da2) / (4 * da2)
    omega_exp = (f * (at - a2) ** 2 + 4j * energy * da2) / (4 * da2)
    return ClosedFormCoefficients(p, delta, gamma, omega_exp, energy)


def closed_form_state(config: SpinExampleConfig, t: float) -> np.ndarray:
    """Normalized (z1 |0> + z2 |1>) / N(t)."""
    coeffs = closed_form_coefficients(config)
    z = np.array([coeffs.z1(t, config.delta_a**2), coeffs.z2(t)])
    n = np.linalg.norm(z)
    if not n > 0:
        raise ArithmeticError(f"closed-form normalization vanished at t = {t}")
    return z / n


# generic sweeps


def speed_vs_strength(h0, spec: MeasurementSpec, psi0, f_grid, t: float, hbar: float = 1.0) -> list[tuple[float, float, float]]:
    """Rows (f, t, V) with V evaluated at time ``t`` for each strength."""
    rows = []
    for f in f_grid:
        h = split_hamiltonian(h0, spec.with_strength(float(f)), hbar)
        psi_t = evolve_exp(h, psi0, [0.0, t]).psi[-1]
        rows.append((float(f), float(t), speed_from_operators(h, psi_t, t)))
    return rows


def _fine_grid(t_grid: np.ndarray, substeps: int) -> tuple[np.ndarray, np.ndarray]:
    knots = np.concatenate([[0.0], t_grid])
    pieces = [np.linspace(knots[k], knots[k + 1], substeps + 1)[1:] for k in range(t_grid.size)]
    fine = np.concatenate([[0.0], *pieces])
    return fine, substeps * np.arange(1, t_grid.size + 1)


def _check_times(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or t[0] <= 0 or np.any(np.diff(t) <= 0):
        raise ValueError("total-time grid must be positive and strictly increasing")
    return t


def average_speed_vs_time(h0, spec: MeasurementSpec, psi0, t_grid, f_values, hbar: float = 1.0,
                          substeps: int = 10) -> list[tuple[float, float, float]]:
    """Rows (T, f, V_bar) from one trajectory per f on a refined grid."""
    t_grid = _check_times(t_grid)
    fine, marks = _fine_grid(t_grid, substeps)
    rows = []
    for f in f_values:
        h = split_hamiltonian(h0, spec.with_strength(float(f)), hbar)
        traj = evolve_exp(h, psi0, fine)
        v = speeds_from_operators(h, traj)
        steps = np.diff(fine) * 0.5 * (v[1:] + v[:-1])
        length = np.concatenate([[0.0], np.cumsum(steps)])
        rows.extend((float(T), float(f), float(length[m] / T)) for T, m in zip(t_grid, marks))
    return rows


def distance_vs_time(h0, spec: MeasurementSpec, psi0, t_grid, f_values, hbar: float = 1.0) -> list[tuple[float, float, float]]:
    """Rows (T, f, S0) with S0 the geodesic distance from the initial state."""
    t_grid = _check_times(t_grid)
    rows = []
    for f in f_values:
        h = split_hamiltonian(h0, spec.with_strength(float(f)), hbar)
        traj = evolve_exp(h, psi0, np.concatenate([[0.0], t_grid]))
        rows.extend((float(T), float(f), geodesic_distance(traj.psi[0], p)) for T, p in zip(t_grid, traj.psi[1:]))
    return rows


def default_f_grid() -> np.ndarray:
    """0 plus 39 log-spaced strengths in [0.1, 100]."""
    return np.concatenate([[0.0], np.geomspace(0.1, 100.0, 39)])


def default_t_grid(t_final: float = 3.0, samples: int = 300) -> np.ndarray:
    return np.linspace(t_final / samples, t_final, samples)


def figure1_sweep(config: SpinExampleConfig, f_grid=None, t: float = FIG1_TIME) -> list[tuple[float, float, float]]:
    """Speed at time ``t`` versus measurement strength."""
    h, spec, psi0 = build_example(config)
    f_grid = default_f_grid() if f_grid is None else f_grid
    return speed_vs_strength(h.h0, spec, psi0, f_grid, t, config.hbar)


def figure2_sweep(config: SpinExampleConfig, t_grid=None, f_values=(0.0, 5.0)) -> list[tuple[float, float, float]]:
    """Time-averaged speed versus total time for each strength."""
    h, spec, psi0 = build_example(config)
    t_grid = default_t_grid(config.t_final, config.samples) if t_grid is None else t_grid
    return average_speed_vs_time(h.h0, spec, psi0, t_grid, f_values, config.hbar)


def figure3_sweep(config: SpinExampleConfig, t_grid=None, f_values=(0.0, 5.0)) -> list[tuple[float, float, float]]:
    """Geodesic distance from the initial state versus total time."""
    h, spec, psi0 = build_example(config)
    t_grid = default_t_grid(config.t_final, config.samples) if t_grid is None else t_grid
    return distance_vs_time(h.h0, spec, psi0, t_grid, f_values, config.hbar)


def attractor_overlap(config: SpinExampleConfig) -> float:
    """|<+|a1>|, the overlap that fixes the saturated distance."""
    _, vecs = hermitian_eigh(observable(config))
    return float(abs(np.vdot(vecs[:, 0], normalize(initial_state()))))
