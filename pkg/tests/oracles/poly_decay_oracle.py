"""Independent oracle for the polynomial-decay complexity values frozen in the tests.

Sums min(r^2, l^(-2a)) term by term up to N terms in mpmath, then brackets the
tail between the integral bounds int_{N+1}^inf and int_N^inf of x^(-2a) dx.
The fixed point is located by plain bisection at 40 digits. Run directly to
print the constants.
"""
import mpmath as mp

mp.mp.dps = 40
N = 200_000
_SUFFIX = {}


def _suffix(alpha):
    # _suffix(alpha)[k] = sum_{l=k+1}^{N} l^(-2 alpha)
    if alpha not in _SUFFIX:
        out = [mp.mpf(0)] * (N + 1)
        for l in range(N, 0, -1):
            out[l - 1] = out[l] + mp.mpf(l) ** (-2 * alpha)
        _SUFFIX[alpha] = out
    return _SUFFIX[alpha]


def q_sq_sum(alpha, r):
    r2 = mp.mpf(r) ** 2
    L = int(mp.floor(r2 ** (-1 / (2 * mp.mpf(alpha)))))  # eigenvalues >= r^2
    while L >= 1 and mp.mpf(L) ** (-2 * alpha) < r2:
        L -= 1
    while mp.mpf(L + 1) ** (-2 * alpha) >= r2:
        L += 1
    L = min(L, N)
    head = L * r2 + _suffix(alpha)[L]
    e = 2 * alpha - 1
    lo = head + mp.mpf(N + 1) ** (-e) / e
    hi = head + mp.mpf(N) ** (-e) / e
    return lo, hi


def q_n(alpha, n, r):
    lo, hi = q_sq_sum(alpha, r)
    return mp.sqrt(lo / n), mp.sqrt(hi / n)


def nu_n(alpha, n, iters=80):
    a, b = mp.mpf("1e-12"), mp.mpf(1)
    for _ in range(iters):
        c = mp.sqrt(a * b)
        lo, hi = q_n(alpha, n, c)
        if 40 * c * c >= (lo + hi) / 2:
            b = c
        else:
            a = c
    return b


if __name__ == "__main__":
    print("q_n(alpha=1, n=100, r=0.5) in", [mp.nstr(v, 20) for v in q_n(1, 100, 0.5)])
    for alpha in (1, 2):
        for n in (1000, 10000):
            print(f"nu_n(alpha={alpha}, n={n}) =", mp.nstr(nu_n(alpha, n), 17))
