"""Distribution of the strong-learning time on the exponential-demand example.

The state is revealed the first period whose demand exceeds 4, so the
learning time is geometric with success probability exp(-4 / mean).

    python3 scripts/learning_time.py [--seeds 1000] [--out times.csv]
"""

from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np

from routelearn.learning import check_strong_learning, run_dynamics
from routelearn.scenario_file import load_scenario

HERE = Path(__file__).resolve().parent.parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--scenario", default=str(HERE / "scenarios" / "sec6_exponential.scn"))
    ap.add_argument("--seeds", type=int, default=1000)
    ap.add_argument("--out")
    args = ap.parse_args()

    sc = load_scenario(args.scenario)
    solver = sc.solver_for()
    times = []
    for seed in range(args.seeds):
        v = check_strong_learning(run_dynamics(sc, seed=seed, solver=solver))
        times.append(v.period if v.ok else -1)
    t = np.array([x for x in times if x > 0], dtype=float)
    p = math.exp(-4.0 / sc.demand.mean)
    print(f"learned in {len(t)}/{args.seeds} runs")
    print(f"mean learning time {t.mean():.3f}  (geometric prediction {1 / p:.3f})")
    print(f"median {np.median(t):.0f}, max {t.max():.0f}")
    if args.out:
        Path(args.out).write_text("seed,learned_at\n" + "".join(f"{i},{x}\n" for i, x in enumerate(times)))


if __name__ == "__main__":
    main()
