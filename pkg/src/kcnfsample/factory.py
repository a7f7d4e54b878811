"""Bernoulli factory for the overflow law nu(1) = (p - (1-delta)/2) / delta.

Reverse-time martingale construction. The target is extended to all of [0, 1]
as f = h(g(p)), where g is the affine map above and h is a C^1 clamp with
|h''| <= 1/eps onto [eps/2, 1 - eps/2]. Hence |f''| <= M = 1/(eps*delta^2).

At stage size n (n = n0 * 2^i) with H heads, the bounds are
    L_n = f(H/n) - M/(4n),    U_n = f(H/n) + M/(4n).
Going from n to 2n, the hypergeometric conditional mean of f(H_n/n)
deviates from f(H_2n/(2n)) by at most M/(8(2n-1)). That is at most
M/(4n) - M/(8n), so the lower bounds form a reverse-time sub-martingale
and the upper bounds a super-martingale. Choosing n0 >= M/(2 eps) keeps
both inside [0, 1].

The output is exactly Bernoulli(f(p)). That equals nu(1) whenever
nu(1) lies in [eps, 1 - eps]. Outside that window the output is biased
toward the window edge. No factory can be exact with zero slack there,
because the target vanishes at p = (1-delta)/2.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.special import gammaln


def _log_choose(a, b):
    return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)


def hypergeom_weights(n: int, heads: int, draws: int) -> np.ndarray:
    """P(j heads among `draws` of n coins holding `heads` heads), j = 0..draws."""
    j = np.arange(draws + 1)
    ok = (j <= heads) & (draws - j <= n - heads)
    out = np.zeros(draws + 1)
    jj = j[ok]
    out[ok] = np.exp(_log_choose(heads, jj) + _log_choose(n - heads, draws - jj) - _log_choose(n, draws))
    return out


def smooth_clamp(y, eps: float):
    y = np.asarray(y, dtype=float)
    lo = eps / 2 + np.square(np.clip(y, 0.0, eps)) / (2 * eps)
    hi = 1 - eps / 2 - np.square(np.clip(1 - y, 0.0, eps)) / (2 * eps)
    out = np.where(y < eps, lo, np.where(y > 1 - eps, hi, y))
    return out


class NuFactory:
    def __init__(self, delta, eps: float = 0.1):
        if not 0 < eps < 0.5:
            raise ValueError("eps must lie in (0, 1/2)")
        self.delta = float(Fraction(delta))
        self.eps = eps
        self.a = (1 - self.delta) / 2
        self.M = 1.0 / (eps * self.delta**2)
        self.n0 = max(1, math.ceil(self.M / (2 * eps)))
        self._coef: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._prior: dict[tuple[int, int], tuple[float, float]] = {}

    def target(self, p):
        """f(p); equals nu(1) on the exact window."""
        return smooth_clamp((np.asarray(p, dtype=float) - self.a) / self.delta, self.eps)

    def exact_window(self) -> tuple[float, float]:
        """Range of p on which the output law is exactly nu(1)."""
        return self.a + self.eps * self.delta, 1 - self.a - self.eps * self.delta

    def coefficients(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if n not in self._coef:
            fx = self.target(np.arange(n + 1) / n)
            c = self.M / (4 * n)
            self._coef[n] = (fx - c, fx + c)
        return self._coef[n]

    def prior_bounds(self, pn: int, n: int, heads: int) -> tuple[float, float]:
        """Conditional means of the stage-pn bounds given `heads` of n coins."""
        key = (n, heads)
        if key not in self._prior:
            w = hypergeom_weights(n, heads, pn)
            plo, phi = self.coefficients(pn)
            self._prior[key] = (float(w @ plo), float(w @ phi))
        return self._prior[key]

    def stage(self, i: int) -> int:
        return self.n0 << i

    def draw(self, coins: Callable[[int], np.ndarray], rng: np.random.Generator, max_stages: int = 40):
        """One Bernoulli(f(p)) output from p-coins; returns (bit, coins used)."""
        g = rng.random()
        lstar, ustar = 0.0, 1.0
        heads = 0
        used = 0
        prev = None
        for i in range(max_stages):
            n = self.stage(i)
            batch = np.asarray(coins(n - used))
            heads += int(batch.sum())
            used = n
            lo, hi = self.coefficients(n)
            L, U = lo[heads], hi[heads]
            if prev is None:
                lt, ut = 0.0, 1.0
            else:
                lt, ut = self.prior_bounds(prev, n, heads)
            gap = ut - lt
            width = ustar - lstar
            lstar, ustar = lstar + (L - lt) / gap * width, ustar - (ut - U) / gap * width
            if g <= lstar:
                return 1, used
            if g > ustar:
                return 0, used
            prev = n
        raise RuntimeError("factory did not terminate within the stage limit")
