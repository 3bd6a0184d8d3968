"""Smoke test for the pflow Python extension.

Build and install first:  pip install --no-build-isolation ./crates/py
Then run:                 python python/smoke_test.py
"""

import math
import random

import pflow


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL: {msg}")
    print(f"ok   {msg}")


def main():
    # Tail probabilities of |xi| for a standard normal in R^10.
    check(abs(pflow.tail_prob(2.0, 10) - 0.372291) < 1e-6, "tail_prob(2, 10)")
    table = pflow.tail_table()
    check(len(table) == 5 and len(table[0][1]) == 6, "tail_table shape")

    # A singleton dataset is reproduced exactly.
    single = pflow.Dataset([[0.5, 1.5]])
    out = pflow.generate(single, samples=3, steps=5, seed=1)
    check(all(abs(r[0] - 0.5) < 1e-12 and abs(r[1] - 1.5) < 1e-12 for r in out), "generate on a singleton")

    # Generated points land on the data for a small uniform set.
    rng = random.Random(0)
    data = pflow.Dataset([[rng.random(), rng.random()] for _ in range(200)])
    out = pflow.generate(data, samples=20, steps=500, seed=2)
    worst = max(data.min_l1(x) for x in out)
    check(worst < 5e-2, f"generate lands on data (max min-L1 {worst:.2e})")
    check(out == pflow.generate(data, samples=20, steps=500, seed=2), "generate is deterministic")

    # Semicircle sampling against its own reference draws.
    semi = pflow.Density("semicircle")
    check(semi.dim == 1 and semi([0.0]) > 0.0, "density evaluation")
    xs = [r[0] for r in pflow.sample(semi, samples=2000, steps=50, mc_points=5000, seed=3)]
    ref = [r[0] for r in semi.reference_samples(2000, seed=4)]
    w1 = pflow.wasserstein1(xs, ref)
    check(w1 < 0.05, f"semicircle W1 {w1:.4f}")

    pts = [[rng.gauss(0, 1), rng.gauss(0, 1)] for _ in range(300)]
    check(pflow.sliced_w2(pts, pts) < 1e-12, "sliced_w2 of identical clouds")

    # Optimizer on a registered objective and on a Python callable.
    res = pflow.minimize("quad-u5", mc_points=5000, seed=0)
    check(abs(res["u_star"] - 0.04) < 1e-2 and len(res["rounds"]) == 5, f"minimize quad-u5 ({res['u_star']:.6f})")
    res = pflow.minimize(lambda x: (x[0] - 0.3) ** 2 + (x[1] + 0.2) ** 2, mc_points=5000, seed=0)
    check(math.hypot(res["x_star"][0] - 0.3, res["x_star"][1] + 0.2) < 0.1, "minimize a Python callable")

    try:
        pflow.Density("no-such-law")
    except ValueError:
        check(True, "unknown density raises ValueError")
    else:
        check(False, "unknown density raises ValueError")

    checks = pflow.validate("fast")
    check(all(c["passed"] for c in checks), f"fast validation suite ({len(checks)} checks)")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
