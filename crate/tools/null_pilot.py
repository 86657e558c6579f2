"""Monte Carlo null distribution of the per-trial best eps_max.

Setting: randomized response with eps_true = 0, m = 1000 canaries, r = 0,
binary game plus a K = 2 reconstruction game, each swept over budgets
10, 20, ... at alpha = 0.05. The guess rules (stable sorts, lower index first,
margin ranking) and the bisection (tolerance 1e-4, lower bracket end) are
reimplemented here with numpy/scipy; no code is shared with the Rust crate.

Prints the mean, standard deviation and median of the per-trial maximum.
"""
import functools
import math
import sys

import numpy as np
from scipy.stats import binom

M = 1000
STEP = 10
ALPHA = 0.05
TRIALS = int(sys.argv[1]) if len(sys.argv) > 1 else 10000


def p_success(eps, K):
    return 1.0 / (1.0 + (K - 1) * math.exp(-eps))


@functools.lru_cache(maxsize=None)
def eps_lb(k, c, K=2):
    if k == 0 or c == 0:
        return 0.0
    tail = lambda e: binom.sf(c - 1, k, p_success(e, K))
    if tail(0.0) >= ALPHA:
        return 0.0
    lo, hi = 0.0, 1.0
    while tail(hi) < ALPHA:
        if hi >= 50.0:
            return 50.0
        lo, hi = hi, min(2 * hi, 50.0)
    while hi - lo > 1e-4:
        mid = 0.5 * (lo + hi)
        if tail(mid) < ALPHA:
            lo = mid
        else:
            hi = mid
    return lo


def best_binary(rng):
    s = -np.ones(M, dtype=int)
    s[rng.choice(M, M // 2, replace=False)] = 1
    y = np.where(rng.random(M) < 0.5, s, -s)  # eps = 0: keep w.p. 1/2
    desc = np.argsort(-y, kind="stable")
    best = 0.0
    for budget in range(STEP, M + 1, STEP):
        half = budget // 2
        t = np.zeros(M, dtype=int)
        t[desc[:half]] = 1
        rest = np.flatnonzero(t == 0)
        asc = rest[np.argsort(y[rest], kind="stable")]
        t[asc[:half]] = -1
        k = int(np.abs(t).sum())
        c = int(((t == s) & (t != 0)).sum())
        best = max(best, eps_lb(k, c))
    return best


def best_kary(rng):
    sets = M // 2
    chosen = rng.integers(0, 2, sets)
    keep = rng.random(sets) < 0.5
    released = np.where(keep, chosen, 1 - chosen)
    # One-hot rows all have margin 1, so sets are taken in index order.
    correct = np.cumsum(released == chosen)
    best = 0.0
    for budget in range(STEP, sets + 1, STEP):
        best = max(best, eps_lb(budget, int(correct[budget - 1])))
    return best


def main():
    rng = np.random.default_rng(20240917)
    vals = np.array([max(best_binary(rng), best_kary(rng)) for _ in range(TRIALS)])
    print(f"trials {TRIALS}")
    print(f"mean {vals.mean():.6f}")
    print(f"sd {vals.std(ddof=1):.6f}")
    print(f"median {np.median(vals):.6f}")
    print(f"q90 {np.quantile(vals, 0.9):.6f}")


if __name__ == "__main__":
    main()
