"""Mean-field limit system on a truncated box.

Explicit conservative finite-volume transport-diffusion for each compartment
plus a pointwise exact-exponential nonlocal reaction step, composed by Lie
splitting.  The domain truncation is absorbing; lost mass goes into an
explicit leakage ledger.  A fixed-point (successive substitution) driver
reuses the same stepping with the infected series frozen from the previous
iterate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .model import CompartmentLabel, ModelSpec, validate_model

S, I, R = int(CompartmentLabel.S), int(CompartmentLabel.I), int(CompartmentLabel.R)


@dataclass
class Grid:
    dim: int
    lo: np.ndarray
    hi: np.ndarray
    h: float
    shape: tuple

    @classmethod
    def from_box(cls, lo, hi, h):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        dim = lo.shape[0]
        if dim not in (1, 2):
            raise ValueError("grid supports d in {1, 2}")
        shape = tuple(int(round((hi[a] - lo[a]) / h)) for a in range(dim))
        hi = lo + h * np.array(shape)
        return cls(dim, lo, hi, float(h), shape)

    def axis_nodes(self, a):
        return self.lo[a] + (np.arange(self.shape[a]) + 0.5) * self.h

    def axis_edges(self, a):
        return self.lo[a] + np.arange(self.shape[a] + 1) * self.h

    def points(self):
        axes = [self.axis_nodes(a) for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @property
    def cell_volume(self):
        return self.h ** self.dim

    def integrate(self, arr):
        return float(np.sum(arr) * self.cell_volume)

    def quad_values(self, fn):
        return fn(self.points()).reshape(self.shape)


def margin_requirement(spec: ModelSpec, t_end: float) -> float:
    theta_sup = max(cf.diffusion_sup for cf in spec.coefficients)
    return 3.0 * max(spec.kernel.support_radius,
                     math.sqrt(2.0 * t_end * theta_sup ** 2 * spec.dim))


def check_margin(grid: Grid, spec: ModelSpec, t_end: float):
    m = margin_requirement(spec, t_end)
    g_lo, g_hi = spec.initial.density.support_box(1e-8)
    if np.any(grid.lo > g_lo - m) or np.any(grid.hi < g_hi + m):
        raise ValueError(
            f"grid box {grid.lo}..{grid.hi} too small: need margin {m:.3g} "
            f"around initial support {g_lo}..{g_hi}")


@dataclass
class DensityField:
    t: float
    fS: np.ndarray
    fI: np.ndarray
    fR: np.ndarray
    leakage: float
    grid: Grid

    def mass(self):
        return self.grid.integrate(self.fS + self.fI + self.fR)

    def l1(self, which):
        return self.grid.integrate(np.abs(getattr(self, "f" + which)))

    def copy(self):
        return DensityField(self.t, self.fS.copy(), self.fI.copy(),
                            self.fR.copy(), self.leakage, self.grid)


# ---------------------------------------------------------------------------
# initial data (exact per-axis cell averages for the separable families)


def _axis_cell_masses(density, region, grid, axis):
    edges = grid.axis_edges(axis)
    g_mass = np.diff(density.axis_cdf(axis, edges))
    if region is None:
        return g_mass, None
    if region.kind == "box":
        lo_c = np.clip(edges[:-1], region.lo[axis], region.hi[axis])
        hi_c = np.clip(edges[1:], region.lo[axis], region.hi[axis])
        a_mass = np.maximum(density.axis_cdf(axis, hi_c) - density.axis_cdf(axis, lo_c), 0.0)
        return g_mass, a_mass
    raise ValueError("non-box region is not separable")


def initial_field(spec: ModelSpec, grid: Grid) -> DensityField:
    g = spec.initial.density
    region = spec.initial.region
    p = spec.initial.p_infect

    if g.separable and region.kind == "box":
        g_axes, a_axes = [], []
        for axis in range(grid.dim):
            gm, am = _axis_cell_masses(g, region, grid, axis)
            g_axes.append(gm)
            a_axes.append(am)
        if grid.dim == 1:
            g_mass, a_mass = g_axes[0], a_axes[0]
        else:
            g_mass = np.outer(g_axes[0], g_axes[1])
            a_mass = np.outer(a_axes[0], a_axes[1])
    else:
        # subsampled cell averages (ball regions etc.)
        sub = 4
        pts = grid.points()
        offs = (np.arange(sub) + 0.5) / sub - 0.5
        mesh = np.meshgrid(*([offs * grid.h] * grid.dim), indexing="ij")
        shifts = np.stack([m.ravel() for m in mesh], axis=1)
        dens = np.zeros(pts.shape[0])
        reg = np.zeros(pts.shape[0])
        for sh in shifts:
            q = pts + sh
            dv = g.density(q)
            dens += dv
            reg += dv * region.indicator(q)
        g_mass = (dens / len(shifts) * grid.cell_volume).reshape(grid.shape)
        a_mass = (reg / len(shifts) * grid.cell_volume).reshape(grid.shape)

    f_i = p * a_mass / grid.cell_volume
    f_s = (g_mass - p * a_mass) / grid.cell_volume
    f_r = np.zeros(grid.shape)
    leak0 = 1.0 - grid.integrate(f_s + f_i)
    return DensityField(0.0, f_s, f_i, f_r, leak0, grid)


# ---------------------------------------------------------------------------
# transport-diffusion step


class FPOperator:
    """Conservative finite-volume step of d/dt f = -div(m f) + 1/2 D^2:(a f)."""

    def __init__(self, coeff, grid: Grid):
        self.grid = grid
        pts = grid.points()
        self.m = coeff.drift(pts).reshape(grid.shape + (grid.dim,))
        self.a = coeff.diffusion_sq(pts).reshape(grid.shape + (grid.dim, grid.dim))
        self.m_max = float(np.max(np.abs(self.m)))
        self.a_max = float(np.max(np.abs(self.a)))

    def check_cfl(self, dt):
        h = self.grid.h
        d = self.grid.dim
        if self.a_max > 0 and dt > h * h / (d * self.a_max) + 1e-15:
            raise ValueError(
                f"CFL violation: dt={dt:.3g} > h^2/(d max|a|)={h*h/(d*self.a_max):.3g}")
        if self.m_max > 0 and dt * self.m_max / h > 1.0 + 1e-12:
            raise ValueError(
                f"CFL violation: dt*max|m|/h = {dt*self.m_max/h:.3g} > 1")

    def step(self, f, dt):
        """One explicit step; returns (new_field, outflow_mass)."""
        h = self.grid.h
        if self.grid.dim == 1:
            m = self.m[:, 0]
            g = self.a[:, 0, 0] * f
            m_face = np.empty(f.size + 1)
            m_face[1:-1] = 0.5 * (m[:-1] + m[1:])
            m_face[0] = m[0]
            m_face[-1] = m[-1]
            f_ext = np.concatenate([[0.0], f, [0.0]])
            g_ext = np.concatenate([[0.0], g, [0.0]])
            upwind = np.where(m_face > 0, f_ext[:-1], f_ext[1:])
            flux = m_face * upwind - (g_ext[1:] - g_ext[:-1]) / (2.0 * h)
            new = f - dt / h * (flux[1:] - flux[:-1])
            out = self.grid.integrate(f) - self.grid.integrate(new)
            return new, out

        m1 = self.m[:, :, 0]
        m2 = self.m[:, :, 1]
        g11 = self.a[:, :, 0, 0] * f
        g22 = self.a[:, :, 1, 1] * f
        g12 = self.a[:, :, 0, 1] * f

        def pad(arr):
            return np.pad(arr, 1, mode="constant")

        fp = pad(f)
        g11p = pad(g11)
        g22p = pad(g22)
        g12p = pad(g12)
        # central y-derivative of (a12 f) at nodes (ghost zero)
        dyg12 = (g12p[1:-1, 2:] - g12p[1:-1, :-2]) / (2.0 * h)
        dxg12 = (g12p[2:, 1:-1] - g12p[:-2, 1:-1]) / (2.0 * h)
        dyg12p = pad(dyg12)
        dxg12p = pad(dxg12)

        # x faces: shape (nx+1, ny)
        m1p = np.vstack([m1[:1], m1, m1[-1:]])
        m1_face = 0.5 * (m1p[:-1] + m1p[1:])
        f_lo = fp[:-1, 1:-1]
        f_hi = fp[1:, 1:-1]
        upw = np.where(m1_face > 0, f_lo, f_hi)
        flux_x = m1_face * upw \
            - (g11p[1:, 1:-1] - g11p[:-1, 1:-1]) / (2.0 * h) \
            - 0.5 * 0.5 * (dyg12p[1:, 1:-1] + dyg12p[:-1, 1:-1])
        # y faces: shape (nx, ny+1)
        m2p = np.hstack([m2[:, :1], m2, m2[:, -1:]])
        m2_face = 0.5 * (m2p[:, :-1] + m2p[:, 1:])
        f_lo = fp[1:-1, :-1]
        f_hi = fp[1:-1, 1:]
        upw = np.where(m2_face > 0, f_lo, f_hi)
        flux_y = m2_face * upw \
            - (g22p[1:-1, 1:] - g22p[1:-1, :-1]) / (2.0 * h) \
            - 0.5 * 0.5 * (dxg12p[1:-1, 1:] + dxg12p[1:-1, :-1])

        new = f - dt / h * (flux_x[1:, :] - flux_x[:-1, :]) \
                - dt / h * (flux_y[:, 1:] - flux_y[:, :-1])
        out = self.grid.integrate(f) - self.grid.integrate(new)
        return new, out


def fokker_planck_step(f, coeff, dt, grid: Grid):
    """Single explicit transport-diffusion step (checks CFL)."""
    op = FPOperator(coeff, grid)
    op.check_cfl(dt)
    return op.step(np.asarray(f, dtype=float), dt)


# ---------------------------------------------------------------------------
# nonlocal reaction


def kernel_stencil(kernel, grid: Grid):
    reach = int(math.floor(kernel.support_radius / grid.h))
    offs = np.arange(-reach, reach + 1) * grid.h
    if grid.dim == 1:
        r = np.abs(offs)
    else:
        ox, oy = np.meshgrid(offs, offs, indexing="ij")
        r = np.sqrt(ox ** 2 + oy ** 2)
    return kernel.shape(r)


def convolve_kernel(f_i, kernel, grid: Grid, stencil=None, beta_nodes=None):
    """x -> integral of K(x, y) f_I(y) dy by banded quadrature on the grid."""
    if stencil is None:
        stencil = kernel_stencil(kernel, grid)
    if beta_nodes is None:
        beta_nodes = kernel.beta(grid.points()).reshape(grid.shape)
    src = beta_nodes * np.asarray(f_i, dtype=float)
    return ndimage.convolve(src, stencil, mode="constant", cval=0.0) * grid.cell_volume


def reaction_step(field: DensityField, kernel, alpha, dt,
                  pressure=None, stencil=None, beta_nodes=None) -> DensityField:
    """Pointwise exact-exponential transfer S->I->R; nodewise sum preserved."""
    if pressure is None:
        pressure = convolve_kernel(field.fI, kernel, field.grid, stencil, beta_nodes)
    transfer = field.fS * (-np.expm1(-pressure * dt))
    f_s = field.fS - transfer
    f_i = field.fI + transfer
    rec = f_i * (-np.expm1(-alpha * dt))
    f_i = f_i - rec
    f_r = field.fR + rec
    return DensityField(field.t, f_s, f_i, f_r, field.leakage, field.grid)


# ---------------------------------------------------------------------------
# full solves


@dataclass
class FieldSeries:
    grid: Grid
    times: np.ndarray
    fS: np.ndarray       # (n_rec, *shape)
    fI: np.ndarray
    fR: np.ndarray
    leakage: np.ndarray

    def at_time(self, t) -> DensityField:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 + 1e-9 * abs(t):
            raise ValueError(f"time {t} not in recorded series")
        return DensityField(self.times[k], self.fS[k], self.fI[k], self.fR[k],
                            float(self.leakage[k]), self.grid)

    def index_of(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 + 1e-9 * abs(t):
            raise ValueError(f"time {t} not in recorded series")
        return k

    def l1_norms(self):
        vol = self.grid.cell_volume
        axes = tuple(range(1, 1 + self.grid.dim))
        return (np.abs(self.fS).sum(axis=axes) * vol,
                np.abs(self.fI).sum(axis=axes) * vol,
                np.abs(self.fR).sum(axis=axes) * vol)

    def mass_accounting(self):
        vol = self.grid.cell_volume
        axes = tuple(range(1, 1 + self.grid.dim))
        total = (self.fS + self.fI + self.fR).sum(axis=axes) * vol
        return total + self.leakage

    def check_l1_growth_bounds(self, kernel_sup, alpha, slack=1e-3):
        """Compartment L1 norms against their exponential growth envelopes."""
        s_l1, i_l1, r_l1 = self.l1_norms()
        t = self.times
        ok_s = np.all(s_l1 <= 1.0 * (1.0 + slack))
        ok_i = np.all(i_l1 <= np.exp(t * kernel_sup) * (1.0 + slack))
        ok_r = np.all(r_l1 <= alpha * t * np.exp(t * kernel_sup) * (1.0 + slack) + 1e-15)
        return {"S": bool(ok_s), "I": bool(ok_i), "R": bool(ok_r)}


def _prepare(spec, grid, dt, t_end):
    report = validate_model(spec)
    if not report.ok:
        names = ", ".join(c.name for c in report.failures)
        raise ValueError(f"model validation failed: {names}")
    check_margin(grid, spec, t_end)
    ops = [FPOperator(spec.coeff(lbl), grid) for lbl in (S, I, R)]
    for op in ops:
        op.check_cfl(dt)
    stencil = kernel_stencil(spec.kernel, grid)
    beta_nodes = spec.kernel.beta(grid.points()).reshape(grid.shape)
    return ops, stencil, beta_nodes


def solve(spec: ModelSpec, grid: Grid, dt: float, t_end: float,
          record_every: int = 1, leakage_abort: float = 1e-3) -> FieldSeries:
    """March the limit system by splitting: transport-diffusion then reaction."""
    ops, stencil, beta_nodes = _prepare(spec, grid, dt, t_end)
    field = initial_field(spec, grid)
    n_steps = int(round(t_end / dt))

    times, fs_rec, fi_rec, fr_rec, leak_rec = [0.0], [field.fS.copy()], \
        [field.fI.copy()], [field.fR.copy()], [field.leakage]
    for step in range(n_steps):
        new_arrays = []
        leak = field.leakage
        for op, arr in zip(ops, (field.fS, field.fI, field.fR)):
            new, out = op.step(arr, dt)
            new_arrays.append(new)
            leak += out
        field = DensityField(field.t + dt, *new_arrays, leak, grid)
        field = reaction_step(field, spec.kernel, spec.alpha, dt,
                              stencil=stencil, beta_nodes=beta_nodes)
        if field.leakage > leakage_abort:
            raise RuntimeError(
                f"boundary leakage {field.leakage:.3g} exceeded {leakage_abort:.3g} "
                f"at t={field.t:.3g}: enlarge the grid box")
        if (step + 1) % record_every == 0 or step == n_steps - 1:
            times.append(field.t)
            fs_rec.append(field.fS.copy())
            fi_rec.append(field.fI.copy())
            fr_rec.append(field.fR.copy())
            leak_rec.append(field.leakage)
    return FieldSeries(grid, np.array(times), np.array(fs_rec),
                       np.array(fi_rec), np.array(fr_rec), np.array(leak_rec))


@dataclass
class PicardConfig:
    max_iters: int = 40
    tol_l1: float = 1e-4
    relaxation: float = 1.0

    def __post_init__(self):
        if self.tol_l1 <= 0:
            raise ValueError("tol_l1 must be positive")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")


@dataclass
class PicardResult:
    series: FieldSeries
    iterations: int
    gaps: list


def picard_solve(spec: ModelSpec, grid: Grid, dt: float, t_end: float,
                 cfg: PicardConfig, record_every: int = 1) -> PicardResult:
    """Successive substitution: the infection pressure of iterate n+1 is
    built from iterate n's infected series; each linear sub-problem is solved
    by the splitting machinery."""
    ops, stencil, beta_nodes = _prepare(spec, grid, dt, t_end)
    init = initial_field(spec, grid)
    n_steps = int(round(t_end / dt))
    vol = grid.cell_volume

    def march(pressure_series):
        """Forward march; reaction pressure frozen from the given series
        (post-transport sampling).  Returns stored post-transport infected
        series and the per-step full states."""
        field = init.copy()
        g_store = np.empty((n_steps, *grid.shape))
        f_store = np.empty((n_steps + 1, *grid.shape))
        h_store = np.empty((n_steps + 1, *grid.shape))
        gi_store = np.empty((n_steps + 1, *grid.shape))
        f_store[0], gi_store[0], h_store[0] = field.fS, field.fI, field.fR
        leak_series = [field.leakage]
        for step in range(n_steps):
            new_arrays = []
            leak = field.leakage
            for op, arr in zip(ops, (field.fS, field.fI, field.fR)):
                new, out = op.step(arr, dt)
                new_arrays.append(new)
                leak += out
            field = DensityField(field.t + dt, *new_arrays, leak, grid)
            g_store[step] = field.fI
            if pressure_series is None:
                pressure = np.zeros(grid.shape)
            else:
                pressure = pressure_series[step]
            field = reaction_step(field, spec.kernel, spec.alpha, dt,
                                  pressure=pressure)
            f_store[step + 1], gi_store[step + 1], h_store[step + 1] = \
                field.fS, field.fI, field.fR
            leak_series.append(field.leakage)
        return g_store, f_store, gi_store, h_store, np.array(leak_series)

    def pressures_from(g_store):
        out = np.empty_like(g_store)
        for k in range(g_store.shape[0]):
            out[k] = convolve_kernel(g_store[k], spec.kernel, grid,
                                     stencil, beta_nodes)
        return out

    g_prev, f_prev, gi_prev, h_prev, leaks = march(None)
    gaps = []
    for iteration in range(1, cfg.max_iters + 1):
        pressure_series = pressures_from(g_prev)
        g_new, f_new, gi_new, h_new, leaks = march(pressure_series)
        if cfg.relaxation < 1.0:
            g_new = cfg.relaxation * g_new + (1.0 - cfg.relaxation) * g_prev
        gap = max(
            float(np.max(np.abs(f_new - f_prev).sum(axis=tuple(range(1, 1 + grid.dim)))) * vol),
            float(np.max(np.abs(gi_new - gi_prev).sum(axis=tuple(range(1, 1 + grid.dim)))) * vol),
            float(np.max(np.abs(h_new - h_prev).sum(axis=tuple(range(1, 1 + grid.dim)))) * vol))
        gaps.append(gap)
        g_prev, f_prev, gi_prev, h_prev = g_new, f_new, gi_new, h_new
        if gap <= cfg.tol_l1:
            break
    else:
        raise RuntimeError(
            f"fixed-point iteration did not reach tol {cfg.tol_l1:.3g} in "
            f"{cfg.max_iters} iterations (last gap {gaps[-1]:.3g})")

    keep = [0] + [k + 1 for k in range(n_steps)
                  if (k + 1) % record_every == 0 or k == n_steps - 1]
    times = np.array([k * dt for k in keep])
    series = FieldSeries(grid, times, f_prev[keep], gi_prev[keep],
                         h_prev[keep], leaks[keep])
    return PicardResult(series, iteration, gaps)


# ---------------------------------------------------------------------------
# homogeneous reduction oracle


def sir_ode_reduce(beta, alpha, s0, i0, t_end, dt):
    """Classical SIR by fixed-step RK4: S' = -b S I, I' = b S I - a I, R' = a I."""
    if s0 + i0 > 1.0 + 1e-12:
        raise ValueError("s0 + i0 must be <= 1")
    n = int(round(t_end / dt))
    times = np.linspace(0.0, n * dt, n + 1)
    out = np.empty((n + 1, 3))
    y = np.array([s0, i0, 0.0])

    def rhs(y):
        s, i, _ = y
        return np.array([-beta * s * i, beta * s * i - alpha * i, alpha * i])

    out[0] = y
    for k in range(n):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = y
    return times, out[:, 0], out[:, 1], out[:, 2]


# ---------------------------------------------------------------------------
# probe check of the transition-operator mass envelope


@dataclass
class SemigroupMassReport:
    max_mass: float
    mass_series: np.ndarray   # (n_probes, n_times)
    times: np.ndarray
    c_hat: float

    def within_envelope(self, slack=0.05):
        bound = np.exp(self.c_hat * self.times)[None, :] * (1.0 + slack) + 1e-9
        return bool(np.all(self.mass_series <= bound))


def semigroup_mass_check(coeff, t, grid: Grid, dt=None, probes=None) -> SemigroupMassReport:
    """Propagate near-point initial data through the (non-adjoint) transition
    operator and track total mass against the exp(C t) envelope, with C
    fitted from coefficient derivative bounds on the grid."""
    pts = grid.points()
    m = coeff.drift(pts).reshape(grid.shape + (grid.dim,))
    a = coeff.diffusion_sq(pts).reshape(grid.shape + (grid.dim, grid.dim))
    h = grid.h
    a_max = float(np.max(np.abs(a)))
    m_max = float(np.max(np.abs(m)))
    if dt is None:
        dt = 0.4 * h * h / max(grid.dim * a_max, 1e-12)
        if m_max > 0:
            dt = min(dt, 0.4 * h / m_max)
    n_steps = max(int(round(t / dt)), 1)
    dt = t / n_steps

    # C estimate: sup | -div m + 1/2 sum_{lu} d^2 a_lu | by grid differences
    if grid.dim == 1:
        div_m = np.gradient(m[:, 0], h)
        d2a = np.gradient(np.gradient(a[:, 0, 0], h), h)
    else:
        div_m = np.gradient(m[:, :, 0], h, axis=0) + np.gradient(m[:, :, 1], h, axis=1)
        d2a = (np.gradient(np.gradient(a[:, :, 0, 0], h, axis=0), h, axis=0)
               + np.gradient(np.gradient(a[:, :, 1, 1], h, axis=1), h, axis=1)
               + 2.0 * np.gradient(np.gradient(a[:, :, 0, 1], h, axis=0), h, axis=1))
    c_hat = float(np.max(np.abs(-div_m + 0.5 * d2a)))

    if probes is None:
        fracs = [0.3, 0.4, 0.5, 0.6, 0.7]
        if grid.dim == 1:
            probes = [(int(f * grid.shape[0]),) for f in fracs]
        else:
            probes = [(int(f * grid.shape[0]), int(f * grid.shape[1])) for f in fracs]

    def step_generator(u):
        # u_t = m . grad u + 1/2 sum a_lu d2_lu u, upwind advection
        up = np.pad(u, 1, mode="constant")
        if grid.dim == 1:
            fwd = (up[2:] - up[1:-1]) / h
            bwd = (up[1:-1] - up[:-2]) / h
            adv = m[:, 0] * np.where(m[:, 0] > 0, fwd, bwd)
            lap = a[:, 0, 0] * (up[2:] - 2 * up[1:-1] + up[:-2]) / h ** 2
            return u + dt * (adv + 0.5 * lap)
        fwd_x = (up[2:, 1:-1] - up[1:-1, 1:-1]) / h
        bwd_x = (up[1:-1, 1:-1] - up[:-2, 1:-1]) / h
        fwd_y = (up[1:-1, 2:] - up[1:-1, 1:-1]) / h
        bwd_y = (up[1:-1, 1:-1] - up[1:-1, :-2]) / h
        adv = m[:, :, 0] * np.where(m[:, :, 0] > 0, fwd_x, bwd_x) \
            + m[:, :, 1] * np.where(m[:, :, 1] > 0, fwd_y, bwd_y)
        lap = a[:, :, 0, 0] * (up[2:, 1:-1] - 2 * u + up[:-2, 1:-1]) / h ** 2 \
            + a[:, :, 1, 1] * (up[1:-1, 2:] - 2 * u + up[1:-1, :-2]) / h ** 2 \
            + 2 * a[:, :, 0, 1] * (up[2:, 2:] - up[2:, :-2] - up[:-2, 2:] + up[:-2, :-2]) / (4 * h ** 2)
        return u + dt * (adv + 0.5 * lap)

    sample_every = max(n_steps // 20, 1)
    series = []
    for pi, probe in enumerate(probes):
        u = np.zeros(grid.shape)
        u[probe] = 1.0 / grid.cell_volume
        local = [1.0]
        for k in range(n_steps):
            u = step_generator(u)
            if (k + 1) % sample_every == 0 or k == n_steps - 1:
                local.append(grid.integrate(u))
        series.append(local)
    times = [0.0] + [dt * k for k in range(1, n_steps + 1)
                     if k % sample_every == 0 or k == n_steps]
    mass_series = np.array(series)
    return SemigroupMassReport(float(mass_series.max()), mass_series,
                               np.array(times), c_hat)
