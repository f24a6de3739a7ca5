"""High-precision reference values frozen into the C++ unit tests.

Run with: python3 tests/oracles/scalar_oracles.py
"""
from mpmath import mp, mpf, exp, log, sqrt, pi, quad, inf, npdf

mp.dps = 40


def phi(u):
    return exp(-u * u / 2) / sqrt(2 * pi)


# product kernel, query (0,0), sample (1,2), bandwidths (1,2)
print("two_dim_density", phi(mpf(1)) * (mpf(1) / 2) * phi(mpf(1)))

# initial bandwidth c0 / ln ln n
for n in (150, 1000):
    print("h0", n, 1 / log(log(mpf(n))))

# n^((2+r)/(4+r))
print("A r=2 n=100", mpf(100) ** (mpf(4) / 6))

# single flat point, r=1, k=1, f=1: (2 sqrt(pi))^(-1/2)
print("B flat", (2 * sqrt(pi)) ** mpf(-0.5))

# 1-D standard normal integrals: int |f''| and int sqrt(f)
f2 = lambda x: abs((x * x - 1) * npdf(x))
print("int|f''|", quad(f2, [-inf, -1, 1, inf]))
print("int sqrt f", quad(lambda x: sqrt(npdf(x)), [-inf, inf]))
