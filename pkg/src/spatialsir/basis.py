"""Smooth compactly supported test functions with exact derivatives.

Members are tensor products over axes of 1-d factors, each factor being a
smooth part (Hermite-function series or polynomial) times a compact plateau
bump.  Every piece is polynomial on its interval, so derivatives of any order
are exact; pieces are stored as Chebyshev series on their own interval to
keep evaluation stable at high degree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.chebyshev import Chebyshev


def hermite_function_values(u, nmax):
    """Values of the L2-orthonormal Hermite functions psi_0..psi_nmax at u.

    Returns an array of shape (nmax+1, len(u)).  Uses the stable three-term
    recurrence; values stay O(1) for all n.
    """
    u = np.asarray(u, dtype=float)
    out = np.empty((nmax + 1, u.size))
    out[0] = math.pi ** (-0.25) * np.exp(-0.5 * u * u)
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * u * out[0]
    for n in range(1, nmax):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * u * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


class HermiteSeries:
    """f(x) = sum_n c_n psi_n((x - center)/scale), closed under d/dx."""

    def __init__(self, coef, center=0.0, scale=1.0):
        self.coef = np.asarray(coef, dtype=float)
        self.center = float(center)
        self.scale = float(scale)

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.scale
        vals = hermite_function_values(u.ravel(), len(self.coef) - 1)
        return (self.coef @ vals).reshape(np.shape(u))

    def deriv(self):
        # psi_n' = sqrt(n/2) psi_{n-1} - sqrt((n+1)/2) psi_{n+1}
        c = self.coef
        n = len(c)
        out = np.zeros(n + 1)
        for k in range(n):
            if k >= 1:
                out[k - 1] += math.sqrt(k / 2.0) * c[k]
            out[k + 1] -= math.sqrt((k + 1) / 2.0) * c[k]
        return HermiteSeries(out / self.scale, self.center, self.scale)


class MappedPoly:
    """Polynomial in (x - center)/scale with exact derivatives."""

    def __init__(self, poly: Polynomial, center=0.0, scale=1.0):
        self.poly = poly
        self.center = float(center)
        self.scale = float(scale)

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.scale
        return self.poly(u)

    def deriv(self):
        return MappedPoly(self.poly.deriv() / self.scale, self.center, self.scale)


class PiecewiseCheb:
    """Piecewise polynomial (Chebyshev pieces on their intervals), zero outside."""

    def __init__(self, breaks, pieces):
        self.breaks = np.asarray(breaks, dtype=float)   # ascending, len = npieces+1
        self.pieces = pieces                            # Chebyshev or float constant

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        idx = np.searchsorted(self.breaks, x, side="right") - 1
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if not mask.any():
                continue
            if isinstance(piece, Chebyshev):
                out[mask] = piece(x[mask])
            else:
                out[mask] = piece
        return out

    def deriv(self):
        new = []
        for piece in self.pieces:
            if isinstance(piece, Chebyshev):
                new.append(piece.deriv())
            else:
                new.append(0.0)
        return PiecewiseCheb(self.breaks, new)

    @property
    def support(self):
        return self.breaks[0], self.breaks[-1]


def plateau_bump(l0, l, a=6, b=5):
    """Bump that is 1 on [-l0, l0], (1-s^a)^b on the rings, 0 beyond |x| = l.

    C^{min(a,b)-1} overall; with l0 = 0, a must be even (single polynomial
    piece).  Pieces are exact Chebyshev interpolants of the ring polynomial.
    """
    if not l > l0 >= 0:
        raise ValueError("need l > l0 >= 0")
    if l0 == 0 and a % 2 != 0:
        raise ValueError("centered bump needs even inner exponent")
    w = l - l0
    deg = a * b
    if l0 == 0:
        f = lambda x: (1.0 - np.abs(x / l) ** a) ** b
        piece = Chebyshev.interpolate(f, deg, domain=[-l, l])
        return PiecewiseCheb([-l, l], [piece])
    left = Chebyshev.interpolate(
        lambda x: (1.0 - ((-x - l0) / w) ** a) ** b, deg, domain=[-l, -l0])
    right = Chebyshev.interpolate(
        lambda x: (1.0 - ((x - l0) / w) ** a) ** b, deg, domain=[l0, l])
    return PiecewiseCheb([-l, -l0, l0, l], [left, 1.0, right])


class Factor1D:
    """One axis factor: smooth part times bump, exact derivatives via Leibniz."""

    def __init__(self, smooth, bump: PiecewiseCheb):
        self.smooth = smooth
        self.bump = bump
        self._smooth_derivs = [smooth]
        self._bump_derivs = [bump]

    def _ensure(self, order):
        while len(self._smooth_derivs) <= order:
            self._smooth_derivs.append(self._smooth_derivs[-1].deriv())
        while len(self._bump_derivs) <= order:
            self._bump_derivs.append(self._bump_derivs[-1].deriv())

    def eval(self, x, order=0):
        self._ensure(order)
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for j in range(order + 1):
            out += math.comb(order, j) * self._smooth_derivs[j](x) * self._bump_derivs[order - j](x)
        return out

    @property
    def support(self):
        return self.bump.support


class TensorMember:
    """Product over axes of Factor1D; exact partials of any order."""

    def __init__(self, factors):
        self.factors = list(factors)
        self.dim = len(self.factors)

    def partial(self, x, orders):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(x.shape[0])
        for axis, order in enumerate(orders):
            out *= self.factors[axis].eval(x[:, axis], order)
        return out

    def value(self, x):
        return self.partial(x, (0,) * self.dim)

    __call__ = value

    def grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty((x.shape[0], self.dim))
        for e in range(self.dim):
            orders = [0] * self.dim
            orders[e] = 1
            out[:, e] = self.partial(x, orders)
        return out

    def hess(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        out = np.empty((n, self.dim, self.dim))
        for e in range(self.dim):
            for f in range(e, self.dim):
                orders = [0] * self.dim
                orders[e] += 1
                orders[f] += 1
                val = self.partial(x, orders)
                out[:, e, f] = val
                out[:, f, e] = val
        return out

    @property
    def support_box(self):
        return [f.support for f in self.factors]


class LinearCombination:
    """Linear combination of TensorMember seeds (an orthonormalized member)."""

    def __init__(self, seeds, weights):
        self.seeds = seeds
        self.weights = np.asarray(weights, dtype=float)
        self.dim = seeds[0].dim

    def partial(self, x, orders):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[0])
        for w, s in zip(self.weights, self.seeds):
            if w != 0.0:
                out += w * s.partial(x, orders)
        return out

    def value(self, x):
        return self.partial(x, (0,) * self.dim)

    __call__ = value

    def grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty((x.shape[0], self.dim))
        for e in range(self.dim):
            orders = [0] * self.dim
            orders[e] = 1
            out[:, e] = self.partial(x, orders)
        return out

    def hess(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        out = np.empty((n, self.dim, self.dim))
        for e in range(self.dim):
            for f in range(e, self.dim):
                orders = [0] * self.dim
                orders[e] += 1
                orders[f] += 1
                val = self.partial(x, orders)
                out[:, e, f] = val
                out[:, f, e] = val
        return out

    @property
    def support_box(self):
        return self.seeds[0].support_box


def hermite_seed(degrees, center, scale, bump_1d):
    """Tensor seed: product over axes of psi_degree((x-c)/s) * bump."""
    factors = []
    for axis, deg in enumerate(degrees):
        coef = np.zeros(deg + 1)
        coef[deg] = 1.0
        factors.append(Factor1D(HermiteSeries(coef, center[axis], scale[axis]), bump_1d[axis]))
    return TensorMember(factors)


def monomial_seed(degrees, center, scale, bump_1d):
    factors = []
    for axis, deg in enumerate(degrees):
        coef = np.zeros(deg + 1)
        coef[deg] = 1.0
        factors.append(Factor1D(MappedPoly(Polynomial(coef), center[axis], scale[axis]), bump_1d[axis]))
    return TensorMember(factors)


def seed_degree_list(dim, count):
    """First `count` multi-degrees ordered by total degree, then lexicographic."""
    degs = []
    total = 0
    while len(degs) < count:
        level = []
        if dim == 1:
            level = [(total,)]
        else:
            for i in range(total + 1):
                level.append((i, total - i))
        degs.extend(sorted(level))
        total += 1
    return degs[:count]


def multi_indices(dim, max_order):
    """All derivative multi-indices with |gamma| <= max_order."""
    out = []
    if dim == 1:
        return [(k,) for k in range(max_order + 1)]
    for total in range(max_order + 1):
        for i in range(total + 1):
            out.append((i, total - i))
    return out
