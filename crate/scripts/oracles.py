"""High-precision reference values frozen into the Rust tests.

Run with `python3 scripts/oracles.py`; needs mpmath.
"""
import mpmath as mp

mp.mp.dps = 40


def bessel_table():
    print("# (n, x, I_n(x), I_n'(x))")
    for n, x in [(0, 0.5), (1, 1.0), (2, 1.0), (3, 2.5), (10, 5.0), (0, 29.0), (0, 31.0),
                 (1, 45.0), (5, 40.0), (2, 100.0), (20, 300.0), (7, 0.01)]:
        v = mp.besseli(n, x)
        d = mp.besseli(n, x, derivative=1)
        print(f"({n}, {x}, {mp.nstr(v, 20)}, {mp.nstr(d, 20)}),")
    print("# scaled e^-x I_n(x) at x beyond overflow")
    for n, x in [(0, 800.0), (3, 1000.0), (15, 2500.0)]:
        print(f"({n}, {x}, {mp.nstr(mp.besseli(n, x) * mp.exp(-x), 20)}),")


def disk_mu(n, R, p):
    if p == 0:
        return mp.mpf(n) / R
    x = R * mp.sqrt(p)
    return mp.sqrt(p) * mp.besseli(n, x, derivative=1) / mp.besseli(n, x)


def disk_table():
    for p in [1, 0.01, 1000]:
        vals = [disk_mu(0, 1, p)]
        for n in range(1, 11):
            vals += [disk_mu(n, 1, p)] * 2
        print(f"disk p={p}:", [mp.nstr(v, 16) for v in vals])
    # d mu_0 / dp at p = 1
    print("dmu0/dp at p=1:", mp.nstr(mp.diff(lambda q: disk_mu(0, 1, q), 1), 16))
    print("R=2, p=0.25, n=3:", mp.nstr(disk_mu(3, 2, 0.25), 16))


def rect_mu(alpha, b, plus):
    # mu_+ = (alpha/b) coth(alpha/2), mu_- = (alpha/b) tanh(alpha/2), with
    # alpha real or purely imaginary (passed as mpc).
    return alpha / b * (mp.coth(alpha / 2) if plus else mp.tanh(alpha / 2))


def rectangle_table(b1, b2, p, mu_max, steps=40000):
    """Scan a1sq = alpha_1^2 over its admissible range and refine every sign
    change of mu_{s1}(alpha_1) - mu_{s2}(alpha_2) that is not a pole."""
    roots = []
    hi = (b1 * (mu_max + 4.0)) ** 2
    lo = -((b2 * (mu_max + 4.0)) ** 2) * (b1 / b2) ** 2 + p * b1 ** 2
    for s1 in (True, False):
        for s2 in (True, False):
            def g(a1sq):
                a1sq = mp.mpf(a1sq)
                a2sq = (p - a1sq / b1 ** 2) * b2 ** 2
                if a1sq == 0 or a2sq == 0:
                    a1sq += mp.mpf(10) ** -30
                    a2sq = (p - a1sq / b1 ** 2) * b2 ** 2
                a1 = mp.sqrt(mp.mpc(a1sq))
                a2 = mp.sqrt(mp.mpc(a2sq))
                return mp.re(rect_mu(a1, b1, s1) - rect_mu(a2, b2, s2))
            xs = [lo + (hi - lo) * i / steps for i in range(steps + 1)]
            gs = [g(x) for x in xs]
            for i in range(steps):
                if gs[i] == 0:
                    r = xs[i]
                elif gs[i] * gs[i + 1] < 0 and abs(gs[i]) + abs(gs[i + 1]) < 50:
                    r = mp.findroot(g, (xs[i], xs[i + 1]), solver="anderson")
                else:
                    continue
                a1 = mp.sqrt(mp.mpc(r))
                mu = mp.re(rect_mu(a1, b1, s1))
                if 0 <= mu <= mu_max:
                    roots.append((mu, s1, s2))
    roots.sort()
    return roots


def rectangle_tables():
    for (b1, b2, p, mu_max) in [(1, 2, 1, 7.0), (2, 2, 0, 5.0), (2, 2, 1, 5.0)]:
        r = rectangle_table(b1, b2, p, mu_max)
        print(f"rect {b1}x{b2} p={p}:", [mp.nstr(m, 16) for m, _, _ in r])


def misc():
    # Neumann disk: squared first zero of J_1'.
    j = mp.besseljzero(1, 1, derivative=1)
    print("neumann disk lambda_1:", mp.nstr(j ** 2, 16))
    # Koch generation 1 on a side-2 triangle.
    area = mp.sqrt(3) * (1 + mp.mpf(3) / 9)
    print("koch g1 area/perimeter:", mp.nstr(area / 8, 16))


if __name__ == "__main__":
    bessel_table()
    disk_table()
    rectangle_tables()
    misc()
