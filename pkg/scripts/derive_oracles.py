"""Recompute the frozen reference values used in the test suite.

Everything here is evaluated in 30-digit arithmetic with mpmath,
independently of the package code.
"""
import mpmath as mp

mp.mp.dps = 30


def q(x):
    return mp.quad(lambda t: mp.exp(-t * t / 2), [x, mp.inf]) / mp.sqrt(2 * mp.pi)


def hb(p):
    return -p * mp.log(p) - (1 - p) * mp.log(1 - p)


def prob_distinct(n, d):
    return mp.fprod(1 - mp.mpf(k) / d for k in range(2 * n))


def gap(n):
    n = mp.mpf(n)
    return (n * mp.power(2, -n * n) + n * mp.exp(-n * n / 18)
            + 2 * n ** 5 * mp.power(2, n) * mp.exp(-mp.power(2, n) / n)
            + 12 * n ** 3 * mp.exp(-n * n / 18) + 1)


def main():
    for x in (0.5, 1, 2, 3, 5, 8):
        print(f"Q({x})", mp.nstr(q(x), 20))
    print("h_b(1/4) nats", mp.nstr(hb(mp.mpf(1) / 4), 20))
    print("KL((0.9,0.1)||uniform)", mp.nstr(mp.mpf("0.9") * mp.log(mp.mpf("1.8"))
                                             + mp.mpf("0.1") * mp.log(mp.mpf("0.2")), 20))
    print("fano(10, 0.02)", mp.nstr(hb(mp.mpf("0.02")) + mp.mpf("0.02") * 10, 20))
    print("h_b(3/4) bits", mp.nstr(hb(mp.mpf(3) / 4) / mp.log(2), 20))
    print("gd_opt(0.1, 10, 1, 1)", mp.nstr(mp.mpf("0.5") + (mp.log(10) + 2) * mp.mpf("0.05"), 20))
    print("pac_bayes(1, 1, 100, 0.05, 0)", mp.nstr(mp.sqrt(mp.log(2000) / 100), 20))
    n = mp.mpf(10)
    print("proberror(10)", mp.nstr(n * n * 2 ** n * mp.exp(-2 ** n / n) + 6 * mp.exp(-n * n / 18), 20))
    print("gap(15), gap(16)", mp.nstr(gap(15), 20), mp.nstr(gap(16), 20))
    n = mp.mpf(16)
    tail = 3 * n ** 3 * mp.exp(n * mp.log(2) - n * n / 18)
    print("classical(16)", mp.nstr((mp.mpf("0.6") * n ** 3 - mp.mpf("0.5") - tail) / (mp.mpf("4.4") * n ** 3 + mp.mpf("1.5")), 20))
    print("P(E=1) (3,18), (2,8)", mp.nstr(prob_distinct(3, 18), 20), mp.nstr(prob_distinct(2, 8), 20))
    print("(49/64) log 2", mp.nstr(mp.mpf(49) / 64 * mp.log(2), 20))


if __name__ == "__main__":
    main()
