"""Log-log slope of the occupation-density MISE against the number of paths.

    python3 scripts/risk_rate.py --model 1 --reps 20 --out results/risk_rate.json
"""

import argparse
from pathlib import Path

from driftkit import io
from driftkit.experiments import ExperimentConfig, risk_rate_study
from driftkit.sde import make_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", type=int, choices=[1, 2, 3, 4], default=1)
    ap.add_argument("--Ns", type=lambda s: [int(v) for v in s.split(",")], default=[25, 50, 100, 200, 400])
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--ref-factor", type=int, default=50, help="reference paths = factor * max(Ns)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    res = risk_rate_study(make_preset(args.model), args.Ns, ExperimentConfig(base_seed=args.seed),
                          reps=args.reps, ref_factor=args.ref_factor)
    for p in res.points:
        print(f"N={p.N:5d}  h={p.h:.4f}  MISE={p.mise:.5f}  sd={p.ise_std:.5f}")
    print(f"slope {res.slope:.3f} (kernel-order rate {res.theory_slope:.3f})")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        io.write_json(args.out, res.as_dict())


if __name__ == "__main__":
    main()
