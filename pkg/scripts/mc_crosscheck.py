#!/usr/bin/env python3
"""Monte-Carlo cross-check of the analytic model at a chosen operating point.

Simulates the full pipeline event by event (pair emission, per-photon loss,
time-bin occupancy) and compares the empirical detection distribution,
herald rate and conditional moments against the analytic results, printing
one z-score per checked quantity.

Usage:
    python scripts/mc_crosscheck.py [--m 5] [--eta 0.66] [--g 1.0] [--mu 1]
                                    [--n-i 4] [--N 5] [--trials 1000000] [--seed 1]
"""

import argparse
import math

from heralded_fock.detector import DetectorConfig, det_prob
from heralded_fock.herald import herald_state
from heralded_fock.mc import McConfig, simulate_detection, simulate_herald
from heralded_fock.source import SourceConfig


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--m", type=int, default=5, help="splitter stages (M = 2^m)")
    parser.add_argument("--eta", type=float, default=0.66)
    parser.add_argument("--g", type=float, default=1.0)
    parser.add_argument("--mu", type=int, default=1)
    parser.add_argument("--n-i", dest="n_i", type=int, default=4)
    parser.add_argument("--N", type=int, default=5)
    parser.add_argument("--trials", type=int, default=1_000_000)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    det = DetectorConfig(args.m, args.eta)
    src = SourceConfig(args.g, args.mu)
    cfg = McConfig(trials=args.trials, seed=args.seed, det=det, src=src)

    print(f"detection at N = {args.N}:")
    emp = simulate_detection(cfg, args.N)
    for n in range(emp.masses.size):
        p = det_prob(det, n, args.N)
        if p * args.trials < 10:
            continue
        se = math.sqrt(p * (1 - p) / args.trials)
        z = (emp.masses[n] - p) / se
        print(f"  P({n} clicks)  analytic {p:.6e}  empirical {emp.masses[n]:.6e}  z {z:+.2f}")

    print(f"herald at n_i = {args.n_i}:")
    emp_post, rate, rate_se = simulate_herald(cfg, args.n_i)
    state = herald_state(det, src, args.n_i)
    z = (rate - state.herald_prob) / rate_se
    print(f"  herald prob   analytic {state.herald_prob:.6e}  empirical {rate:.6e}  z {z:+.2f}")
    z = (emp_post.mean() - state.cond_mean) / math.sqrt(state.cond_var / emp_post.trials)
    print(f"  cond mean     analytic {state.cond_mean:.6f}  empirical {emp_post.mean():.6f}  z {z:+.2f}")
    post = state.posterior
    m4 = float(((post.support - state.cond_mean) ** 4) @ post.masses)
    vv = max(m4 - state.cond_var**2, 0.0) / emp_post.trials
    z = (emp_post.variance() - state.cond_var) / math.sqrt(vv)
    print(f"  cond var      analytic {state.cond_var:.6f}  empirical {emp_post.variance():.6f}  z {z:+.2f}")


if __name__ == "__main__":
    main()
