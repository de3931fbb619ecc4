"""Empirical-measure functionals and the weighted test-function dictionary.

The dictionary is a finite orthonormal family in the weighted inner product
<phi, psi> = sum_{|gamma| <= m} int D^gamma phi D^gamma psi / (1 + |x|^(2 sigma)) dx,
computed on a fixed tensor quadrature grid and orthonormalized by Cholesky.
It stands in for the infinite weighted Sobolev space: every fluctuation
statement tested downstream is a finite-dimensional pairing against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from . import basis
from .model import CompartmentLabel


@dataclass
class SignedMeasureCoords:
    values: np.ndarray
    compartment: int
    t: float
    n: int


class TestDictionary:
    def __init__(self, seeds, coeffs, sigma, order, quad_axes, seed_tag, gram_dev,
                 recipe=None):
        self.seeds = seeds
        self.coeffs = coeffs              # (P, Q) lower-triangular combo matrix
        self.sigma = float(sigma)
        self.order = int(order)           # derivative order m of the inner product
        self.quad_axes = quad_axes
        self.seed_tag = seed_tag
        self.gram_deviation = gram_dev    # max |gram - I| after orthonormalization
        self.recipe = recipe              # batched-evaluation shortcut data
        self.members = [basis.LinearCombination(seeds, row) for row in coeffs]
        self.dim = seeds[0].dim

    def __len__(self):
        return len(self.members)

    @property
    def support_box(self):
        return self.seeds[0].support_box

    # -- quadrature ---------------------------------------------------------

    def quad_points_weights(self, refine=1):
        axes = []
        weights = []
        for lo_hi, n in self.quad_axes:
            n_r = (n - 1) * refine + 1
            ax = np.linspace(lo_hi[0], lo_hi[1], n_r)
            w = np.full(n_r, ax[1] - ax[0])
            w[0] *= 0.5
            w[-1] *= 0.5
            axes.append(ax)
            weights.append(w)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        wmesh = np.meshgrid(*weights, indexing="ij")
        quad_w = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
        return pts, quad_w

    def weight_values(self, pts):
        rad2s = np.sum(pts ** 2, axis=1) ** self.sigma
        return 1.0 / (1.0 + rad2s)

    # -- batched member evaluation -------------------------------------------

    def seed_partials(self, pts, orders):
        if self.recipe is not None and all(o == 0 for o in orders):
            return self._seed_values_fast(pts)
        return np.stack([s.partial(pts, orders) for s in self.seeds])

    def _seed_values_fast(self, pts):
        """Batched seed values: one recurrence per axis instead of per seed."""
        fam = self.recipe["family"]
        degrees = self.recipe["degrees"]
        center, scale = self.recipe["center"], self.recipe["scale"]
        bumps = self.recipe["bumps"]
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        axis_tables = []
        for a in range(self.dim):
            u = (pts[:, a] - center[a]) / scale[a]
            max_deg = max(d[a] for d in degrees)
            if fam == "hermite":
                table = basis.hermite_function_values(u, max_deg)
            else:
                table = np.stack([u ** k for k in range(max_deg + 1)])
            axis_tables.append(table * bumps[a](pts[:, a])[None, :])
        out = np.empty((len(self.seeds), pts.shape[0]))
        for q, degs in enumerate(degrees):
            row = axis_tables[0][degs[0]]
            for a in range(1, self.dim):
                row = row * axis_tables[a][degs[a]]
            out[q] = row
        return out

    def partial_matrix(self, pts, orders):
        """D^orders of every member at pts: (P, n)."""
        return self.coeffs @ self.seed_partials(pts, orders)

    def value_matrix(self, pts):
        return self.partial_matrix(pts, (0,) * self.dim)

    def grad_matrices(self, pts):
        """Gradients of every member: (P, n, d)."""
        out = np.empty((len(self.members), pts.shape[0], self.dim))
        for axis in range(self.dim):
            orders = [0] * self.dim
            orders[axis] = 1
            out[:, :, axis] = self.partial_matrix(pts, tuple(orders))
        return out

    # -- inner products on the quadrature grid --------------------------------

    def gram_on_grid(self, refine=1):
        pts, qw = self.quad_points_weights(refine)
        w = self.weight_values(pts) * qw
        gram = np.zeros((len(self.members), len(self.members)))
        for gamma in basis.multi_indices(self.dim, self.order):
            vals = self.partial_matrix(pts, gamma)
            gram += (vals * w) @ vals.T
        return gram

    def projection_context(self):
        """Precomputed member partial tables on the quadrature grid."""
        if getattr(self, "_proj_ctx", None) is None:
            pts, qw = self.quad_points_weights()
            w = self.weight_values(pts) * qw
            tables = {gamma: self.partial_matrix(pts, gamma)
                      for gamma in basis.multi_indices(self.dim, self.order)}
            self._proj_ctx = {"pts": pts, "w": w, "tables": tables}
        return self._proj_ctx

    def project_function(self, gamma_values, refine=1):
        """Coordinates <f, phi_p> and the norm of f, given D^gamma f on the
        quadrature grid (dict gamma -> flat array)."""
        if refine == 1:
            ctx = self.projection_context()
            w, tables = ctx["w"], ctx["tables"]
        else:
            pts, qw = self.quad_points_weights(refine)
            w = self.weight_values(pts) * qw
            tables = {gamma: self.partial_matrix(pts, gamma)
                      for gamma in basis.multi_indices(self.dim, self.order)}
        coords = np.zeros(len(self.members))
        norm2 = 0.0
        for gamma, vals in tables.items():
            fv = gamma_values[gamma]
            coords += vals @ (fv * w)
            norm2 += float(np.sum(fv * fv * w))
        return coords, math.sqrt(max(norm2, 0.0))

    def describe(self):
        lines = [
            f"members: {len(self.members)}",
            f"seed family: {self.seed_tag}",
            f"inner product order m = {self.order}, weight exponent sigma = {self.sigma}",
            f"support box: {self.support_box}",
            f"quadrature: {[n for _, n in self.quad_axes]} nodes per axis (trapezoid)",
            f"gram deviation from identity: {self.gram_deviation:.3e}",
        ]
        return "\n".join(lines)


def basis_build(seed_family, count, order, sigma, dim=1, center=None, scale=None,
                plateau=4.0, support=6.0, bump_inner=6, bump_outer=5,
                quad_nodes=None) -> TestDictionary:
    """Orthonormal dictionary from polynomial-type seeds times a plateau bump.

    seed_family: 'hermite' (Gaussian-damped, default) or 'monomial'.
    Raises if the seed Gram matrix is numerically dependent (cond > 1e10).
    """
    if count < 1:
        raise ValueError("need at least one member")
    if order not in (1, 2):
        raise ValueError("inner-product order must be 1 or 2")
    if sigma <= dim / 2:
        raise ValueError("sigma must exceed d/2")
    center = np.zeros(dim) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    scale = np.ones(dim) if scale is None else np.atleast_1d(np.asarray(scale, dtype=float))
    if quad_nodes is None:
        quad_nodes = 4801 if dim == 1 else 401

    bump = basis.plateau_bump(plateau, support, bump_inner, bump_outer)
    bumps = [bump] * dim
    maker = {"hermite": basis.hermite_seed, "monomial": basis.monomial_seed}.get(seed_family)
    if maker is None:
        raise ValueError(f"unknown seed family {seed_family!r}")
    seeds = [maker(degs, center, scale, bumps)
             for degs in basis.seed_degree_list(dim, count)]

    quad_axes = [((-support, support), quad_nodes)] * dim
    proto = TestDictionary(seeds, np.eye(len(seeds)), sigma, order, quad_axes,
                           seed_family, gram_dev=float("nan"))
    gram = proto.gram_on_grid()
    cond = np.linalg.cond(gram)
    if cond > 1e10:
        raise ValueError(f"seed family numerically dependent (cond {cond:.3g})")
    chol = cholesky(gram, lower=True)
    coeffs = solve_triangular(chol, np.eye(len(seeds)), lower=True)
    recipe = {"family": seed_family, "degrees": basis.seed_degree_list(dim, count),
              "center": center, "scale": scale, "bumps": bumps}
    final = TestDictionary(seeds, coeffs, sigma, order, quad_axes,
                           seed_family, gram_dev=0.0, recipe=recipe)
    dev = float(np.max(np.abs(final.gram_on_grid() - np.eye(len(seeds)))))
    final.gram_deviation = dev
    return final


# ---------------------------------------------------------------------------
# empirical-measure functionals


def _phi_values(phi, pts):
    if hasattr(phi, "value"):
        return np.asarray(phi.value(pts), dtype=float)
    return np.asarray(phi(pts), dtype=float)


def pair(state, compartment, phi) -> float:
    """(mu^{A,N}, phi) = (1/N) sum over compartment-A individuals of phi(X_i)."""
    mask = state.labels == int(compartment)
    if not mask.any():
        return 0.0
    return float(_phi_values(phi, state.positions[mask]).sum()) / state.n


def pairing_matrix(state, dictionary: TestDictionary) -> np.ndarray:
    """(3, P) matrix of (mu^{A,N}, phi_p) for all compartments and members."""
    seed_vals = dictionary.seed_partials(state.positions, (0,) * dictionary.dim)
    out = np.zeros((3, len(dictionary)))
    for a in range(3):
        mask = state.labels == a
        if mask.any():
            out[a] = dictionary.coeffs @ seed_vals[:, mask].sum(axis=1)
    return out / state.n


@dataclass
class KDEResult:
    values: np.ndarray
    bandwidth: float
    coverage_ok: bool
    integral: float


def kde(state, compartment, bandwidth, grid, chunk=4096) -> KDEResult:
    """Gaussian-kernel estimate of the compartment sub-density on a grid.

    Integrates to the compartment fraction; bandwidth=None applies the
    Silverman rule.  A coverage flag warns when the grid misses more than
    0.1% of the compartment's particles.
    """
    mask = state.labels == int(compartment)
    pts = state.positions[mask]
    n_a = pts.shape[0]
    if n_a == 0:
        return KDEResult(np.zeros(grid.shape), float("nan"), True, 0.0)
    d = grid.dim
    if bandwidth is None:
        spread = np.mean(np.std(pts, axis=0))
        bandwidth = float((4.0 / (d + 2)) ** (1.0 / (d + 4)) * n_a ** (-1.0 / (d + 4))
                          * max(spread, 1e-12))
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    inside = np.all((pts >= grid.lo) & (pts <= grid.hi), axis=1)
    coverage_ok = bool(inside.mean() >= 0.999)

    nodes = grid.points()
    acc = np.zeros(nodes.shape[0])
    inv2h2 = 1.0 / (2.0 * bandwidth ** 2)
    for lo in range(0, n_a, chunk):
        block = pts[lo:lo + chunk]
        d2 = ((nodes[:, None, :] - block[None, :, :]) ** 2).sum(axis=2)
        acc += np.exp(-d2 * inv2h2).sum(axis=1)
    norm = state.n * (2.0 * math.pi * bandwidth ** 2) ** (d / 2.0)
    values = (acc / norm).reshape(grid.shape)
    return KDEResult(values, bandwidth, coverage_ok, grid.integrate(values))


def dual_norm(coords) -> float:
    """Truncation lower-bound proxy for the dual norm: sqrt(sum c_p^2)."""
    values = coords.values if isinstance(coords, SignedMeasureCoords) else coords
    return float(np.sqrt(np.sum(np.asarray(values, dtype=float) ** 2)))


def delta_norm(y, dictionary: TestDictionary) -> float:
    """sqrt(sum_p phi_p(y)^2): the point-evaluation functional's proxy norm."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    vals = dictionary.value_matrix(y[None, :])
    return float(np.sqrt(np.sum(vals ** 2)))


def delta_norm_envelope(dictionary: TestDictionary, probe_pts) -> dict:
    """Fitted constant for delta_norm(y)^2 <= C (1 + |y|^(2 sigma))."""
    vals = dictionary.value_matrix(probe_pts)
    sq = np.sum(vals ** 2, axis=0)
    weights = 1.0 + np.sum(probe_pts ** 2, axis=1) ** dictionary.sigma
    ratio = sq / weights
    k = int(np.argmax(ratio))
    return {"constant": float(ratio[k]), "argmax": probe_pts[k], "ratios": ratio}


def field_coords(field, dictionary: TestDictionary, member_values=None) -> np.ndarray:
    """(3, P) matrix of (f^A_t, phi_p) by quadrature on the field's grid."""
    if member_values is None:
        member_values = dictionary.value_matrix(field.grid.points())
    vol = field.grid.cell_volume
    out = np.empty((3, len(dictionary)))
    for a, arr in enumerate((field.fS, field.fI, field.fR)):
        out[a] = member_values @ arr.ravel() * vol
    return out


def fluctuation(state, field, compartment, phi) -> float:
    """sqrt(N) ((mu^{A,N}, phi) - (f^A, phi)) at the matching time."""
    if abs(state.t - field.t) > 1e-9 + 1e-9 * abs(field.t):
        raise ValueError(f"state time {state.t} does not match field time {field.t}")
    emp = pair(state, compartment, phi)
    arr = (field.fS, field.fI, field.fR)[int(compartment)]
    limit = float((_phi_values(phi, field.grid.points()) * arr.ravel()).sum()
                  * field.grid.cell_volume)
    return math.sqrt(state.n) * (emp - limit)
