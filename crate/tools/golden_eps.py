"""Independent high-precision oracle for frozen estimator/erf test values.

Uses exact binomial tails in mpmath (50 digits) and mpmath bisection; shares
no code with the Rust implementation.
"""
import mpmath as mp

mp.mp.dps = 50


def tail(k, c, p):
    return mp.fsum(mp.binomial(k, i) * p**i * (1 - p) ** (k - i) for i in range(c, k + 1))


def eps_lb(k, c, K, alpha):
    f = lambda e: tail(k, c, mp.e**e / (mp.e**e + K - 1)) - alpha
    if f(0) >= 0:
        return mp.mpf(0)
    return mp.findroot(f, (mp.mpf(0), mp.mpf(50)), solver="bisect", tol=mp.mpf(10) ** -40)


if __name__ == "__main__":
    for (k, c, K) in [(10, 10, 2), (1, 1, 100), (100, 90, 2), (100, 50, 2), (1000, 600, 2), (500, 200, 4)]:
        print(f"eps_lb k={k} c={c} K={K}:", mp.nstr(eps_lb(k, c, K, mp.mpf("0.05")), 15))
    for (k, c, p) in [(2, 1, "0.5"), (4, 4, "0.3"), (100, 60, "0.5"), (1000, 550, "0.5"), (50, 10, "0.1")]:
        print(f"tail k={k} c={c} p={p}:", mp.nstr(tail(k, c, mp.mpf(p)), 20))
    print("Phi(1):", mp.nstr(mp.ncdf(1), 20))
    for x in ["0.1", "0.5", "1", "2", "3", "4.5", "6"]:
        print(f"erf({x}) = {mp.nstr(mp.erf(mp.mpf(x)), 20)}  erfc({x}) = {mp.nstr(mp.erfc(mp.mpf(x)), 20)}")
