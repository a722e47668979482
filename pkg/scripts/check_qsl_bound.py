"""Check Vbar * T >= S0 on randomly drawn systems and report the tightest case."""

import argparse

import numpy as np

from qsl import MeasurementSpec, evolve_exp, qsl_time, split_hamiltonian


def random_hermitian(rng, d, scale=1.0):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (m + m.conj().T) / 2


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-dim", type=int, default=8)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    worst = None
    for k in range(args.count):
        d = int(rng.integers(2, args.max_dim + 1))
        spec = MeasurementSpec(random_hermitian(rng, d), rng.uniform(0.5, 2.0), rng.uniform(0, 5), rng.uniform(-1, 1))
        h = split_hamiltonian(random_hermitian(rng, d, rng.uniform(0.1, 2.0)), spec)
        psi0 = rng.normal(size=d) + 1j * rng.normal(size=d)
        traj = evolve_exp(h, psi0 / np.linalg.norm(psi0), np.linspace(0, rng.uniform(0.05, 2.0), 2001))
        rep = qsl_time(traj, h=h)
        if worst is None or rep.bound_gap < worst[2].bound_gap:
            worst = (k, d, rep)
    k, d, rep = worst
    print(f"{args.count} systems; tightest #{k}: d={d} T={rep.total_time:.4f} T_qsl={rep.t_qsl:.4f} gap={rep.bound_gap:.3e}")
    return 0 if rep.bound_gap >= -1e-6 else 1


if __name__ == "__main__":
    raise SystemExit(main())
