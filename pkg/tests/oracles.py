"""Independent reference implementations: plain loops over cells and cubes.

Deliberately slow and free of the pyramid tables the package uses.
"""

import itertools
import math

import numpy as np


def cubes(L):
    for k in range(L + 1):
        for j in range(1 << k):
            yield k, j


def cell_range(k, j, L):
    w = 1 << (L - k)
    return j * w, (j + 1) * w


def mass(k, j, L, dens=None):
    lo, hi = cell_range(k, j, L)
    if dens is None:
        return (hi - lo) / (1 << L)
    return sum(dens[i] for i in range(lo, hi)) / (1 << L)


def avg(f, r, k, j, L, dens=None):
    lo, hi = cell_range(k, j, L)
    if math.isinf(r):
        return max(abs(f[i]) for i in range(lo, hi))
    N = 1 << L
    tot = sum(abs(f[i]) ** r * (1.0 if dens is None else dens[i]) / N for i in range(lo, hi))
    return (tot / mass(k, j, L, dens)) ** (1.0 / r)


def mean(b, k, j, L, dens=None):
    lo, hi = cell_range(k, j, L)
    N = 1 << L
    tot = sum(b[i] * (1.0 if dens is None else dens[i]) / N for i in range(lo, hi))
    return tot / mass(k, j, L, dens)


def maximal(fs, r, eta, L, dens=None):
    out = np.zeros(1 << L)
    for k, j in cubes(L):
        v = mass(k, j, L, dens) ** eta
        for f, rj in zip(fs, r):
            v *= avg(f, rj, k, j, L, dens)
        lo, hi = cell_range(k, j, L)
        for i in range(lo, hi):
            out[i] = max(out[i], v)
    return out


def sparse_op(S, fs, r, eta, L, dens=None):
    out = np.zeros(1 << L)
    for k, j in S:
        v = mass(k, j, L, dens) ** eta
        for f, rj in zip(fs, r):
            v *= avg(f, rj, k, j, L, dens)
        lo, hi = cell_range(k, j, L)
        out[lo:hi] += v
    return out


def form_A(fs, g, bs, r, s_prime, eta, k, t, tau, S, L, dens=None):
    """Term-by-term sum of the symbol-twisted sparse form."""
    total = 0.0
    m = len(fs)
    for (lev, j) in sorted(S):
        term = mass(lev, j, L, dens) ** (eta + 1)
        osc = [np.abs(np.asarray(bs[i]) - mean(bs[i], lev, j, L, dens)) for i in range(m)]
        for i in range(m):
            if i in tau:
                term *= avg(np.abs(fs[i]) * osc[i] ** t[i], r[i], lev, j, L, dens)
            else:
                term *= avg(fs[i], r[i], lev, j, L, dens)
        h = np.abs(np.asarray(g, float)).copy()
        for i in tau:
            h = h * osc[i] ** (k[i] - t[i])
        term *= avg(h, s_prime, lev, j, L, dens)
        total += term
    return total


def form_B(fs, g, bs, r, s_prime, eta, k, tau, tau_prime, S, L, dens=None):
    total = 0.0
    m = len(fs)
    for (lev, j) in sorted(S):
        term = mass(lev, j, L, dens) ** (eta + 1)
        osc = [np.abs(np.asarray(bs[i]) - mean(bs[i], lev, j, L, dens)) for i in range(m)]
        for i in range(m):
            if i in tau_prime:
                term *= avg(np.abs(fs[i]) * osc[i] ** k[i], r[i], lev, j, L, dens)
            else:
                term *= avg(fs[i], r[i], lev, j, L, dens)
        h = np.abs(np.asarray(g, float)).copy()
        for i in set(tau) - set(tau_prime):
            h = h * osc[i] ** k[i]
        term *= avg(h, s_prime, lev, j, L, dens)
        total += term
    return total


def ap(w, p, L):
    best = 0.0
    for k, j in cubes(L):
        a = mean(w, k, j, L)
        b = mean(w ** (1.0 / (1.0 - p)), k, j, L)
        best = max(best, a * b ** (p - 1))
    return best


def bmo(b, p, L, nu=None):
    best = 0.0
    N = 1 << L
    for k, j in cubes(L):
        lo, hi = cell_range(k, j, L)
        bq = mean(b, k, j, L)
        dev = [abs(b[i] - bq) for i in range(lo, hi)]
        if nu is None:
            v = (sum(d ** p for d in dev) / (hi - lo)) ** (1.0 / p)
        else:
            v = (sum(dev) / N) / (sum(nu[lo:hi]) / N)
        best = max(best, v)
    return best


def weak_quasinorm(F, p, dens=None):
    """Sup over every threshold value of ``v * mu(|F| >= v)^(1/p)``."""
    N = len(F)
    best = 0.0
    for v in set(np.abs(F)):
        m = sum((1.0 if dens is None else dens[i]) / N for i in range(N) if abs(F[i]) >= v)
        best = max(best, v * m ** (1.0 / p))
    return best


def all_pairs_osc(F, lo, hi, s):
    d = [abs(F[a] - F[b]) for a, b in itertools.product(range(lo, hi), repeat=2)]
    if math.isinf(s):
        return max(d)
    return (sum(x ** s for x in d) / len(d)) ** (1.0 / s)


def frac_integral_1d(f, eta, L, skip=True):
    """``sum_y min(2 d(x,y), 1)^(eta-1) f(y) h`` with the shared cell skipped."""
    N = 1 << L
    out = np.zeros(N)
    for x in range(N):
        acc = 0.0
        for y in range(N):
            if x == y:
                if skip:
                    continue
                ball = 1.0 / N
            else:
                d = min(abs(x - y), N - abs(x - y)) / N
                ball = min(2 * d, 1.0)
            acc += ball ** (eta - 1) * f[y] / N
        out[x] = acc
    return out
