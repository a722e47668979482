"""Config-driven experiment runner.

A run is described by a TOML document::

    experiment = "sweep-f"

    [system]
    kind = "spin"            # or "matrix" with h0 / psi0 arrays
    omega = 1.0
    alpha = 1.0

    [measurement]
    a1 = 0.03
    a2 = 0.05
    accuracy = 0.01
    record = 0.02

    [grid]
    t = 0.1

Unknown keys are rejected. Results are written as CSV after all computation
has finished, next to a ``manifest.txt`` that echoes the resolved config,
every tolerance in force and the wall time.
"""

from __future__ import annotations

import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, dynamics, geometry, linalg, measurement, spin
from .errors import ConfigError, QslError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("simulate", "sweep-f", "sweep-T-speed", "sweep-T-distance", "zeno-check", "smalltime-check")
ROUTES = ("exp", "rk4", "commuting")
ZENO_FIDELITY = 1 - 1e-6

CSV_HEADERS = {
    "fig1.csv": ("f", "t", "V"),
    "fig2.csv": ("T", "f", "V_bar"),
    "fig3.csv": ("T", "f", "S0"),
    "simulate.csv": ("t", "survival", "V", "V_fd", "S0"),
    "zeno.csv": ("t", "survival", "V", "fidelity"),
    "smalltime.csv": ("t", "V_full", "V_free", "V_small", "residual"),
}

_SECTIONS = {
    "system": {"kind", "omega", "alpha", "hbar", "h0", "h0_imag", "psi0", "psi0_imag"},
    "measurement": {"a1", "a2", "observable", "observable_imag", "accuracy", "record", "strength", "penalty"},
    "grid": {"t", "t_final", "samples", "f_min", "f_max", "f_points", "f_values", "route"},
    "output": {"dir"},
}


@dataclass
class RunConfig:
    experiment: str
    kind: str = "spin"
    omega: float = 1.0
    alpha: float = 1.0
    hbar: float = 1.0
    h0: np.ndarray | None = None
    psi0: np.ndarray | None = None
    a1: float = 0.03
    a2: float = 0.05
    observable: np.ndarray | None = None
    accuracy: float = 0.01
    record: float = 0.02
    strength: float = 5.0
    penalty: str = "quadratic"
    t: float = 0.1
    t_final: float = 3.0
    samples: int = 300
    f_min: float = 0.0
    f_max: float = 100.0
    f_points: int = 40
    f_values: tuple[float, ...] = (0.0, 5.0)
    route: str = "exp"
    out_dir: str = "results"

    def spin_config(self) -> spin.SpinExampleConfig:
        return spin.SpinExampleConfig(
            omega=self.omega, alpha=self.alpha, hbar=self.hbar, a1=self.a1, a2=self.a2,
            delta_a=self.accuracy, a_record=self.record, f=self.strength,
            t_final=self.t_final, samples=self.samples,
        )

    def system(self) -> tuple[np.ndarray, measurement.MeasurementSpec, np.ndarray]:
        """(h0, measurement spec, initial state) for either system kind."""
        if self.kind == "spin":
            h, spec, psi0 = spin.build_example(self.spin_config())
            return h.h0, spec, psi0
        spec = measurement.MeasurementSpec(
            self.observable, self.accuracy, self.strength, self.record, measurement.PENALTIES[self.penalty]
        )
        return self.h0, spec, self.psi0

    def f_grid(self) -> np.ndarray:
        """0 (if f_min is 0) followed by log-spaced strengths up to f_max."""
        if self.f_min > 0:
            return np.geomspace(self.f_min, self.f_max, self.f_points)
        lo = min(0.1, self.f_max / 10)
        return np.concatenate([[0.0], np.geomspace(lo, self.f_max, self.f_points - 1)])

    def t_grid(self) -> np.ndarray:
        return np.linspace(self.t_final / self.samples, self.t_final, self.samples)


def _line_of(text: str, needle: str) -> int | None:
    for k, line in enumerate(text.splitlines(), start=1):
        if line.strip().startswith(needle):
            return k
    return None


def _number(section: str, key: str, value, integer: bool = False):
    name = f"{section}.{key}" if section else key
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if integer:
        if not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return value
    if not math.isfinite(value):
        raise ConfigError(f"{name}: must be finite")
    return float(value)


def _complex_array(section: str, key: str, real, imag, ndim: int) -> np.ndarray:
    name = f"{section}.{key}"
    try:
        arr = np.array(real, dtype=float)
        if imag is not None:
            arr = arr + 1j * np.array(imag, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: not a numeric array ({exc})") from None
    if arr.ndim != ndim:
        raise ConfigError(f"{name}: expected a {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name}: must be finite")
    return arr.astype(complex)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML run description."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None

    for key, value in doc.items():
        if key == "experiment":
            continue
        if key not in _SECTIONS:
            line = _line_of(text, key) or _line_of(text, f"[{key}")
            raise ConfigError(f"unknown key {key!r}" + (f" (line {line})" if line else ""))
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected a [{key}] section")
        for sub in value:
            if sub not in _SECTIONS[key]:
                line = _line_of(text, sub)
                raise ConfigError(f"unknown key '{key}.{sub}'" + (f" (line {line})" if line else ""))

    if "experiment" not in doc:
        raise ConfigError("experiment: missing (one of " + ", ".join(EXPERIMENTS) + ")")
    experiment = doc["experiment"]
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: {experiment!r} is not one of " + ", ".join(EXPERIMENTS))

    cfg = RunConfig(experiment=experiment)
    if experiment == "smalltime-check":
        cfg.t = 0.01
    system = doc.get("system", {})
    meas = doc.get("measurement", {})
    grid = doc.get("grid", {})

    cfg.kind = system.get("kind", "spin")
    if cfg.kind not in ("spin", "matrix"):
        raise ConfigError(f"system.kind: {cfg.kind!r} is not 'spin' or 'matrix'")
    for key in ("omega", "alpha", "hbar"):
        if key in system:
            setattr(cfg, key, _number("system", key, system[key]))
    for key in ("a1", "a2", "accuracy", "record", "strength"):
        if key in meas:
            setattr(cfg, key, _number("measurement", key, meas[key]))
    for key in ("t", "t_final", "f_min", "f_max"):
        if key in grid:
            setattr(cfg, key, _number("grid", key, grid[key]))
    for key in ("samples", "f_points"):
        if key in grid:
            setattr(cfg, key, _number("grid", key, grid[key], integer=True))
    if "f_values" in grid:
        fv = grid["f_values"]
        if not isinstance(fv, list) or not fv:
            raise ConfigError("grid.f_values: expected a non-empty array of numbers")
        cfg.f_values = tuple(_number("grid", "f_values", v) for v in fv)
    cfg.route = grid.get("route", cfg.route)
    if cfg.route not in ROUTES:
        raise ConfigError(f"grid.route: {cfg.route!r} is not one of " + ", ".join(ROUTES))
    cfg.penalty = meas.get("penalty", cfg.penalty)
    if cfg.penalty not in measurement.PENALTIES:
        raise ConfigError(f"measurement.penalty: {cfg.penalty!r} is not one of " + ", ".join(measurement.PENALTIES))
    if "dir" in doc.get("output", {}):
        cfg.out_dir = str(doc["output"]["dir"])

    if not cfg.hbar > 0:
        raise ConfigError("system.hbar: must be positive")
    if not cfg.accuracy > 0:
        raise ConfigError("measurement.accuracy: must be positive")
    if cfg.strength < 0:
        raise ConfigError("measurement.strength: must be nonnegative")
    if not cfg.t > 0:
        raise ConfigError("grid.t: must be positive")
    if not cfg.t_final > 0:
        raise ConfigError("grid.t_final: must be positive")
    if cfg.samples < 3:
        raise ConfigError("grid.samples: must be at least 3")
    if cfg.f_points < 2:
        raise ConfigError("grid.f_points: must be at least 2")
    if not 0 <= cfg.f_min < cfg.f_max:
        raise ConfigError("grid.f_min/f_max: need 0 <= f_min < f_max")
    if any(f < 0 for f in cfg.f_values):
        raise ConfigError("grid.f_values: strengths must be nonnegative")

    if cfg.kind == "spin":
        for key in ("h0", "h0_imag", "psi0", "psi0_imag"):
            if key in system:
                raise ConfigError(f"system.{key}: only valid with kind = 'matrix'")
        for key in ("observable", "observable_imag"):
            if key in meas:
                raise ConfigError(f"measurement.{key}: only valid with kind = 'matrix'")
        if cfg.penalty != "quadratic":
            raise ConfigError("measurement.penalty: the spin example uses 'quadratic'")
        if not cfg.a2 > cfg.a1:
            raise ConfigError("measurement.a2: must exceed measurement.a1 (spin example needs a2 > a1)")
        try:
            spin.build_example(cfg.spin_config())
        except ConfigError as exc:
            raise ConfigError(f"system: {exc}") from None
    else:
        for key in ("a1", "a2"):
            if key in meas:
                raise ConfigError(f"measurement.{key}: only valid with kind = 'spin'")
        for key in ("h0", "psi0"):
            if key not in system:
                raise ConfigError(f"system.{key}: required with kind = 'matrix'")
        if "observable" not in meas:
            raise ConfigError("measurement.observable: required with kind = 'matrix'")
        cfg.h0 = _complex_array("system", "h0", system["h0"], system.get("h0_imag"), 2)
        cfg.psi0 = _complex_array("system", "psi0", system["psi0"], system.get("psi0_imag"), 1)
        cfg.observable = _complex_array("measurement", "observable", meas["observable"], meas.get("observable_imag"), 2)
        d = cfg.h0.shape[0]
        if cfg.h0.shape != (d, d) or not linalg.is_hermitian(cfg.h0):
            raise ConfigError("system.h0: must be a square Hermitian matrix")
        if cfg.observable.shape != (d, d) or not linalg.is_hermitian(cfg.observable):
            raise ConfigError(f"measurement.observable: must be a {d}x{d} Hermitian matrix")
        if cfg.psi0.shape != (d,) or np.linalg.norm(cfg.psi0) == 0:
            raise ConfigError(f"system.psi0: must be a nonzero vector of length {d}")
        cfg.psi0 = cfg.psi0 / np.linalg.norm(cfg.psi0)
    return cfg


def load_config(path: str | os.PathLike) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# computation


@dataclass
class RunResult:
    tables: dict[str, list[tuple]]
    summary: dict[str, object]


def _simulate(cfg: RunConfig) -> RunResult:
    h0, spec, psi0 = cfg.system()
    h = measurement.split_hamiltonian(h0, spec, cfg.hbar)
    times = np.linspace(0.0, cfg.t_final, cfg.samples)
    traj = dynamics.evolve(h, psi0, times, cfg.route)
    v = geometry.speeds_from_operators(h, traj)
    v_fd = geometry.speed_from_trajectory(traj)
    rep = geometry.qsl_time(traj, v)
    s0 = [geometry.geodesic_distance(traj.psi[0], p) for p in traj.psi]
    rows = list(zip(times, traj.survival, v, v_fd, s0))
    summary = {
        "v_bar": rep.v_bar,
        "path_length": rep.path_length,
        "geodesic": rep.geodesic,
        "t_qsl": rep.t_qsl,
        "total_time": rep.total_time,
        "bound_gap": rep.bound_gap,
        "final_survival": float(traj.survival[-1]),
    }
    return RunResult({"simulate.csv": rows}, summary)


def _zeno(cfg: RunConfig) -> RunResult:
    h0, spec, psi0 = cfg.system()
    h = measurement.split_hamiltonian(h0, spec, cfg.hbar)
    pred = measurement.zeno_prediction(spec, psi0, t=cfg.t_final, hbar=cfg.hbar)
    times = np.linspace(0.0, cfg.t_final, cfg.samples)
    traj = dynamics.evolve(h, psi0, times, cfg.route)
    v = geometry.speeds_from_operators(h, traj)
    fid = np.abs(traj.psi @ pred.attractor_state.conj()) ** 2
    final = float(fid[-1])
    summary = {
        "attractor_index": pred.r,
        "attractor_indices": list(pred.indices),
        "tie": pred.tie,
        "x_values": [float(x) for x in pred.x_values],
        "limit_h1_expectation": pred.limit_h1_expectation,
        "final_fidelity": final,
        "final_fidelity_ok": final >= ZENO_FIDELITY,
        "final_speed": float(v[-1]),
    }
    return RunResult({"zeno.csv": list(zip(times, traj.survival, v, fid))}, summary)


def _smalltime(cfg: RunConfig) -> RunResult:
    import warnings

    h0, spec, psi0 = cfg.system()
    h = measurement.split_hamiltonian(h0, spec, cfg.hbar)
    times = np.linspace(0.0, cfg.t, cfg.samples)
    traj = dynamics.evolve(h, psi0, times, cfg.route)
    v_full = geometry.speeds_from_operators(h, traj)
    v_free = np.array([2.0 / cfg.hbar * math.sqrt(linalg.variance(h0, p)) for p in traj.psi])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        small = [measurement.small_time_speed(spec, h0, psi0, t, cfg.hbar) for t in times]
    v_small = np.array([s.speed for s in small])
    rows = list(zip(times, v_full, v_free, v_small, np.abs(v_free - v_small)))
    summary = {
        "X": small[0].x_coefficient,
        "speeds_up": small[0].speeds_up,
        "variance0": small[0].variance0,
        "linearization_window_exceeded": bool(caught),
        "max_residual": float(np.max(np.abs(v_free - v_small))),
    }
    return RunResult({"smalltime.csv": rows}, summary)


def compute(cfg: RunConfig) -> RunResult:
    """Run the configured experiment in memory."""
    if cfg.experiment == "simulate":
        return _simulate(cfg)
    if cfg.experiment == "zeno-check":
        return _zeno(cfg)
    if cfg.experiment == "smalltime-check":
        return _smalltime(cfg)

    h0, spec, psi0 = cfg.system()
    if cfg.experiment == "sweep-f":
        rows = spin.speed_vs_strength(h0, spec, psi0, cfg.f_grid(), cfg.t, cfg.hbar)
        vs = [r[2] for r in rows]
        k = int(np.argmax(vs))
        summary = {"V_at_f0": vs[0], "V_at_fmax": vs[-1], "argmax_f": rows[k][0], "max_V": vs[k]}
        return RunResult({"fig1.csv": rows}, summary)
    if cfg.experiment == "sweep-T-speed":
        rows = spin.average_speed_vs_time(h0, spec, psi0, cfg.t_grid(), cfg.f_values, cfg.hbar)
        return RunResult({"fig2.csv": rows}, {"rows": len(rows)})
    rows = spin.distance_vs_time(h0, spec, psi0, cfg.t_grid(), cfg.f_values, cfg.hbar)
    summary = {f"max_S0_f={f!r}": max(r[2] for r in rows if r[1] == f) for f in cfg.f_values}
    return RunResult({"fig3.csv": rows}, summary)


# output


def format_number(x) -> str:
    """Shortest round-trip decimal representation."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(format_number(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def tolerances() -> dict[str, float]:
    return {
        "linalg.HERMITIAN_TOL": linalg.HERMITIAN_TOL,
        "linalg.NORM_TOL": linalg.NORM_TOL,
        "linalg.IMAG_TOL": linalg.IMAG_TOL,
        "linalg.VARIANCE_CLAMP": linalg.VARIANCE_CLAMP,
        "linalg.MAX_DIM": linalg.MAX_DIM,
        "dynamics.SURVIVAL_FLOOR": dynamics.SURVIVAL_FLOOR,
        "dynamics.COMMUTATOR_TOL": dynamics.COMMUTATOR_TOL,
        "dynamics.RK4_MAX_DT": dynamics.RK4_MAX_DT,
        "dynamics.RK4_MIN_STEPS": dynamics.RK4_MIN_STEPS,
        "dynamics.RK4_TOL": dynamics.RK4_TOL,
        "dynamics.RK4_MAX_HALVINGS": dynamics.RK4_MAX_HALVINGS,
        "geometry.RADICAND_TOL": geometry.RADICAND_TOL,
        "measurement.PENALTY_ZERO_TOL": measurement.PENALTY_ZERO_TOL,
        "measurement.TIE_RTOL": measurement.TIE_RTOL,
        "measurement.OVERLAP_TOL": measurement.OVERLAP_TOL,
        "measurement.SMALL_TIME_WINDOW": measurement.SMALL_TIME_WINDOW,
        "measurement.COMMUTATOR_TOL": measurement.COMMUTATOR_TOL,
        "spin.STRUCTURE_TOL": spin.STRUCTURE_TOL,
        "runner.ZENO_FIDELITY": ZENO_FIDELITY,
    }


def _echo(cfg: RunConfig) -> dict[str, object]:
    out = {}
    for key, value in asdict(cfg).items():
        if value is None:
            continue
        if isinstance(value, np.ndarray):
            value = np.array2string(value, precision=17, separator=",").replace("\n", "")
        out[f"config.{key}"] = value
    return out


def write_manifest(path: Path, cfg: RunConfig, result: RunResult, files: list[str], wall: float) -> None:
    entries: dict[str, object] = {"version": __version__, "experiment": cfg.experiment}
    entries.update(_echo(cfg))
    entries.update({f"tolerance.{k}": v for k, v in tolerances().items()})
    entries.update({f"result.{k}": v for k, v in result.summary.items()})
    entries["outputs"] = files
    entries["wall_time_s"] = round(wall, 6)
    lines = [f"{k} = {format_number(v) if isinstance(v, (float, int, np.floating)) else v}" for k, v in entries.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def check_writable(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(dir=out_dir, prefix=".qsl-probe-"):
        pass


def run(cfg: RunConfig, out_dir: str | os.PathLike | None = None, emit_plot: bool = False) -> tuple[RunResult, list[Path]]:
    """Compute, then write CSVs and the manifest. Written files are removed on failure."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    check_writable(out)
    start = time.perf_counter()
    result = compute(cfg)
    wall = time.perf_counter() - start
    if cfg.experiment == "zeno-check" and not result.summary["final_fidelity_ok"]:
        raise QslError(
            f"zeno-check: final fidelity {result.summary['final_fidelity']!r} below {ZENO_FIDELITY!r}"
        )
    written: list[Path] = []
    try:
        for name, rows in result.tables.items():
            path = out / name
            written.append(path)
            write_csv(path, CSV_HEADERS[name], rows)
        manifest = out / "manifest.txt"
        written.append(manifest)
        write_manifest(manifest, cfg, result, [p.name for p in written[:-1]], wall)
        if emit_plot:
            written.append(out / PLOT_SCRIPT)
            emit_plot_script(out)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return result, written


# plotting

PLOT_SCRIPT = "plot_results.py"

_PLOT_TEMPLATE = '''"""Render figures from the CSV tables in this directory.

Generated by `qsl run --emit-plot`; reads only the CSV files next to it.
"""
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
COLORS = {{0.0: "red", 5.0: "blue"}}


def read(name):
    with open(HERE / name, newline="", encoding="utf-8") as fh:
        return [{{k: float(v) for k, v in row.items()}} for row in csv.DictReader(fh)]


def by_f(rows, x, y):
    curves = {{}}
    for row in rows:
        xs, ys = curves.setdefault(row["f"], ([], []))
        xs.append(row[x])
        ys.append(row[y])
    return curves


def two_curve(name, y, ylabel, title, out):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for f, (xs, ys) in sorted(by_f(read(name), "T", y).items()):
        ax.plot(xs, ys, color=COLORS.get(f), label=f"f = {{f:g}}")
    ax.set_xlabel("total time T")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(HERE / out, dpi=150)


def series(name, x, ys, out):
    rows = read(name)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for y in ys:
        ax.plot([r[x] for r in rows], [r[y] for r in rows], label=y)
    ax.set_xlabel(x)
    ax.legend()
    fig.tight_layout()
    fig.savefig(HERE / out, dpi=150)


def main():
{body}

if __name__ == "__main__":
    main()
'''

_PLOT_BODIES = {
    "fig1.csv": '''    rows = read("fig1.csv")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot([r["f"] for r in rows], [r["V"] for r in rows], "k.-")
    ax.set_xlabel("measurement strength f")
    ax.set_ylabel("evolution speed V(t)")
    ax.set_title("speed vs measurement strength")
    fig.tight_layout()
    fig.savefig(HERE / "fig1.png", dpi=150)
''',
    "fig2.csv": '''    two_curve("fig2.csv", "V_bar", "time-averaged speed", "average speed vs total time", "fig2.png")
''',
    "fig3.csv": '''    two_curve("fig3.csv", "S0", "geodesic distance S0", "distance from the initial state vs total time", "fig3.png")
''',
    "simulate.csv": '''    series("simulate.csv", "t", ["V", "V_fd", "S0", "survival"], "simulate.png")
''',
    "zeno.csv": '''    series("zeno.csv", "t", ["V", "fidelity", "survival"], "zeno.png")
''',
    "smalltime.csv": '''    series("smalltime.csv", "t", ["V_full", "V_free", "V_small"], "smalltime.png")
''',
}


def emit_plot_script(results_dir: str | os.PathLike) -> Path:
    """Write a matplotlib script rendering every result CSV found in ``results_dir``."""
    out = Path(results_dir)
    present = [name for name in _PLOT_BODIES if (out / name).is_file()]
    if not present:
        raise FileNotFoundError(
            f"no result CSVs in {out}; expected one of: " + ", ".join(_PLOT_BODIES)
        )
    body = "".join(_PLOT_BODIES[name] for name in present)
    path = out / PLOT_SCRIPT
    path.write_text(_PLOT_TEMPLATE.format(body=body), encoding="utf-8")
    return path
