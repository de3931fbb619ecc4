"""Model definition: compartment coefficient fields, contact kernel, initial law.

All objects here are immutable after construction and safe to share across
threads.  Coefficient and kernel specification is a closed menu of parametric
families (constant, tanh-clamped affine, Gaussian bump sums; kernel = beta
times a compact polynomial bump) plus custom callables with user-supplied
bounds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf


class CompartmentLabel(enum.IntEnum):
    S = 0
    I = 1
    R = 2


S, I, R = CompartmentLabel.S, CompartmentLabel.I, CompartmentLabel.R


# ---------------------------------------------------------------------------
# coefficient fields


class CoefficientField:
    """Drift vector field and diffusion matrix field for one compartment."""

    def __init__(self, compartment, family_tag, drift_fn, diffusion_fn,
                 drift_sup, diffusion_sup, smoothness_order):
        self.compartment = CompartmentLabel(compartment)
        self.family_tag = family_tag
        self._drift_fn = drift_fn
        self._diffusion_fn = diffusion_fn
        self.drift_sup = float(drift_sup)
        self.diffusion_sup = float(diffusion_sup)
        self.smoothness_order = smoothness_order

    def drift(self, x):
        """Drift at positions x, shape (n, d)."""
        return self._drift_fn(np.atleast_2d(np.asarray(x, dtype=float)))

    def diffusion(self, x):
        """Diffusion matrix at positions x, shape (n, d, d)."""
        return self._diffusion_fn(np.atleast_2d(np.asarray(x, dtype=float)))

    def diffusion_sq(self, x):
        """theta theta^T at positions x, shape (n, d, d)."""
        th = self.diffusion(x)
        return np.einsum("nij,nkj->nik", th, th)


def constant_field(compartment, drift, theta):
    drift = np.atleast_1d(np.asarray(drift, dtype=float))
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    d = drift.shape[0]

    def drift_fn(x):
        return np.broadcast_to(drift, (x.shape[0], d)).copy()

    def diff_fn(x):
        return np.broadcast_to(theta, (x.shape[0], d, d)).copy()

    return CoefficientField(compartment, "constant", drift_fn, diff_fn,
                            np.max(np.abs(drift), initial=0.0),
                            np.max(np.abs(theta)), math.inf)


def tanh_field(compartment, drift0, drift_gain, theta0, theta_amp=0.0,
               theta_dir=None, length=1.0):
    """Smoothly clamped affine family.

    drift(x) = drift0 + drift_gain @ tanh(x / length)
    theta(x) = theta0 * (1 + theta_amp * tanh(<theta_dir, x> / length)),
    with |theta_amp| < 1 so theta theta^T stays definite.
    """
    drift0 = np.atleast_1d(np.asarray(drift0, dtype=float))
    gain = np.atleast_2d(np.asarray(drift_gain, dtype=float))
    theta0 = np.atleast_2d(np.asarray(theta0, dtype=float))
    d = drift0.shape[0]
    if abs(theta_amp) >= 1.0:
        raise ValueError("theta_amp must satisfy |amp| < 1")
    direction = np.ones(d) if theta_dir is None else np.asarray(theta_dir, dtype=float)

    def drift_fn(x):
        return drift0 + np.tanh(x / length) @ gain.T

    def diff_fn(x):
        mod = 1.0 + theta_amp * np.tanh((x @ direction) / length)
        return theta0[None, :, :] * mod[:, None, None]

    drift_sup = np.max(np.abs(drift0)) + np.max(np.sum(np.abs(gain), axis=1))
    diff_sup = np.max(np.abs(theta0)) * (1.0 + abs(theta_amp))
    return CoefficientField(compartment, "affine-clamped", drift_fn, diff_fn,
                            drift_sup, diff_sup, math.inf)


def gaussian_bump_field(compartment, drift0, theta0, centers, amplitudes,
                        widths, theta_amps=None):
    """Sum-of-Gaussian-bumps family.

    drift(x) = drift0 + sum_k amplitudes[k] * exp(-|x-c_k|^2 / (2 w_k^2));
    theta(x) = theta0 * (1 + sum_k theta_amps[k] * exp(...)).
    """
    drift0 = np.atleast_1d(np.asarray(drift0, dtype=float))
    theta0 = np.atleast_2d(np.asarray(theta0, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    amps = np.atleast_2d(np.asarray(amplitudes, dtype=float))
    widths = np.atleast_1d(np.asarray(widths, dtype=float))
    tamps = np.zeros(len(centers)) if theta_amps is None else np.asarray(theta_amps, dtype=float)
    if np.sum(np.abs(tamps)) >= 1.0:
        raise ValueError("sum |theta_amps| must be < 1 to keep theta definite")

    def bumps(x):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        return np.exp(-0.5 * d2 / widths[None, :] ** 2)

    def drift_fn(x):
        return drift0 + bumps(x) @ amps

    def diff_fn(x):
        mod = 1.0 + bumps(x) @ tamps
        return theta0[None, :, :] * mod[:, None, None]

    drift_sup = np.max(np.abs(drift0)) + np.sum(np.max(np.abs(amps), axis=1))
    diff_sup = np.max(np.abs(theta0)) * (1.0 + np.sum(np.abs(tamps)))
    return CoefficientField(compartment, "gaussian-bump-sum", drift_fn, diff_fn,
                            drift_sup, diff_sup, math.inf)


def custom_field(compartment, drift_fn, diffusion_fn, drift_sup, diffusion_sup,
                 smoothness_order):
    """Extension point: user-registered evaluators with declared bounds."""
    return CoefficientField(compartment, "custom", drift_fn, diffusion_fn,
                            drift_sup, diffusion_sup, smoothness_order)


# ---------------------------------------------------------------------------
# contact kernel


class ContactKernel:
    """K(x, y) = beta(y) * shape(|x - y|), shape a compact plateau bump.

    shape(r) = 1 for r <= plateau_radius, (1 - s^a)^b on the decay ring with
    s = (r - plateau_radius)/ring_width, 0 beyond support_radius.
    """

    def __init__(self, beta_fn, beta_sup, support_radius, plateau_radius=0.0,
                 inner_exponent=6, outer_exponent=5, beta_tag="constant"):
        if support_radius <= plateau_radius:
            raise ValueError("support_radius must exceed plateau_radius")
        if plateau_radius == 0.0 and inner_exponent % 2 != 0:
            raise ValueError("inner exponent must be even for a centered bump")
        self._beta_fn = beta_fn
        self.beta_sup = float(beta_sup)
        self.support_radius = float(support_radius)
        self.plateau_radius = float(plateau_radius)
        self.inner_exponent = int(inner_exponent)
        self.outer_exponent = int(outer_exponent)
        self.beta_tag = beta_tag
        self.smoothness_order = min(inner_exponent, outer_exponent) - 1

    @property
    def sup_norm(self):
        return self.beta_sup  # shape peaks at 1

    @property
    def ring_width(self):
        return self.support_radius - self.plateau_radius

    def beta(self, y):
        return self._beta_fn(np.atleast_2d(np.asarray(y, dtype=float)))

    def shape(self, r):
        r = np.asarray(r, dtype=float)
        s = np.clip((r - self.plateau_radius) / self.ring_width, 0.0, 1.0)
        return (1.0 - s ** self.inner_exponent) ** self.outer_exponent

    def eval_pairs(self, x, y):
        """K on all pairs: x (n, d), y (m, d) -> (n, m)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        dist = np.sqrt(((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2))
        return self.shape(dist) * self.beta(y)[None, :]


def constant_beta_kernel(beta, support_radius, plateau_radius=0.0,
                         inner_exponent=6, outer_exponent=5):
    beta = float(beta)

    def beta_fn(y):
        return np.full(y.shape[0], beta)

    return ContactKernel(beta_fn, beta, support_radius, plateau_radius,
                         inner_exponent, outer_exponent, beta_tag="constant")


def custom_beta_kernel(beta_fn, beta_sup, support_radius, plateau_radius=0.0,
                       inner_exponent=6, outer_exponent=5):
    return ContactKernel(beta_fn, beta_sup, support_radius, plateau_radius,
                         inner_exponent, outer_exponent, beta_tag="custom")


def kernel_eval(kernel: ContactKernel, x, y) -> float:
    """K(x, y) for a single pair of positions."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.sqrt(((x - y) ** 2).sum()))
    return float(kernel.shape(r) * kernel.beta(y[None, :])[0])


# ---------------------------------------------------------------------------
# initial law


class UniformBox:
    family = "uniform"
    separable = True

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if np.any(self.hi <= self.lo):
            raise ValueError("box must have positive volume")
        self.dim = self.lo.shape[0]
        self._vol = float(np.prod(self.hi - self.lo))

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    def density(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.all((x >= self.lo) & (x <= self.hi), axis=1)
        return inside / self._vol

    def axis_cdf(self, axis, pts):
        width = self.hi[axis] - self.lo[axis]
        return np.clip((pts - self.lo[axis]) / width, 0.0, 1.0)

    @property
    def sup_density(self):
        return 1.0 / self._vol

    def support_box(self, tail_mass=1e-8):
        return self.lo.copy(), self.hi.copy()

    def moment(self, order):
        # E|X|^order by quadrature over the (compact) box
        grids = [np.linspace(self.lo[a], self.hi[a], 201) for a in range(self.dim)]
        mesh = np.meshgrid(*grids, indexing="ij")
        rad = np.sqrt(sum(m ** 2 for m in mesh))
        vol_el = np.prod([(g[1] - g[0]) for g in grids])
        return float(np.sum(rad ** order) * vol_el / self._vol)


class GaussianDiag:
    family = "gaussian"
    separable = True

    def __init__(self, mean, std):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.std = np.atleast_1d(np.asarray(std, dtype=float))
        if np.any(self.std <= 0):
            raise ValueError("std must be positive")
        self.dim = self.mean.shape[0]

    def sample(self, rng, n):
        return self.mean + self.std * rng.standard_normal((n, self.dim))

    def density(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = (x - self.mean) / self.std
        norm = np.prod(self.std) * (2 * math.pi) ** (self.dim / 2)
        return np.exp(-0.5 * (z ** 2).sum(axis=1)) / norm

    def axis_cdf(self, axis, pts):
        z = (pts - self.mean[axis]) / (self.std[axis] * math.sqrt(2.0))
        return 0.5 * (1.0 + erf(z))

    @property
    def sup_density(self):
        return 1.0 / (np.prod(self.std) * (2 * math.pi) ** (self.dim / 2))

    def support_box(self, tail_mass=1e-8):
        # per-axis quantile box
        k = math.sqrt(2.0) * math.sqrt(-math.log(tail_mass))
        return self.mean - k * self.std, self.mean + k * self.std

    def moment(self, order):
        box = self.support_box(1e-12)
        grids = [np.linspace(box[0][a], box[1][a], 401) for a in range(self.dim)]
        mesh = np.meshgrid(*grids, indexing="ij")
        rad = np.sqrt(sum(m ** 2 for m in mesh))
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vol_el = np.prod([(g[1] - g[0]) for g in grids])
        return float(np.sum(rad.ravel() ** order * self.density(pts)) * vol_el)


class PowerTail1D:
    """Symmetric heavy tail on R: g(x) = (tail/2) (1+|x|)^(-tail-1)."""

    family = "power-tail"
    separable = True

    def __init__(self, tail_exponent):
        if tail_exponent <= 0:
            raise ValueError("tail exponent must be positive")
        self.tail = float(tail_exponent)
        self.dim = 1

    def sample(self, rng, n):
        u = rng.uniform(0.0, 1.0, size=n)
        mag = (1.0 - u) ** (-1.0 / self.tail) - 1.0
        sign = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
        return (sign * mag)[:, None]

    def density(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return 0.5 * self.tail * (1.0 + np.abs(x[:, 0])) ** (-self.tail - 1.0)

    def axis_cdf(self, axis, pts):
        pts = np.asarray(pts, dtype=float)
        mag = 0.5 * (1.0 + np.abs(pts)) ** (-self.tail)
        return np.where(pts >= 0, 1.0 - mag, mag)

    @property
    def sup_density(self):
        return 0.5 * self.tail

    def support_box(self, tail_mass=1e-8):
        m = (tail_mass) ** (-1.0 / self.tail) - 1.0
        return np.array([-m]), np.array([m])

    def moment(self, order):
        if order >= self.tail:
            return math.inf
        # exact: int |x|^q tail (1+|x|)^(-tail-1) dx via substitution
        grid = np.linspace(0.0, 1.0, 20001)[1:-1]
        x = grid / (1.0 - grid)
        jac = 1.0 / (1.0 - grid) ** 2
        vals = x ** order * self.tail * (1.0 + x) ** (-self.tail - 1.0) * jac
        return float(np.trapz(vals, grid))


class BoxRegion:
    kind = "box"

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))

    def indicator(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all((x >= self.lo) & (x <= self.hi), axis=1)


class BallRegion:
    kind = "ball"

    def __init__(self, center, radius):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)

    def indicator(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return ((x - self.center) ** 2).sum(axis=1) <= self.radius ** 2


@dataclass
class InitialLaw:
    """I.i.d. placement density g, seeded-infection region, infection probability."""

    density: object
    region: object
    p_infect: float
    sigma_moment: float

    def __post_init__(self):
        if not 0.0 <= self.p_infect <= 1.0:
            raise ValueError("p_infect must lie in [0, 1]")
        if self.sigma_moment <= self.density.dim / 2:
            raise ValueError("sigma_moment must exceed d/2")


@dataclass
class ModelSpec:
    dim: int
    coefficients: tuple          # (S, I, R) CoefficientField
    kernel: ContactKernel
    alpha: float
    initial: InitialLaw
    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma != 1.0:
            raise ValueError(
                "only the gamma = 1 rate normalization is supported; "
                "exponents in (0, 1) are reserved for future work")
        if self.alpha < 0:
            raise ValueError("recovery rate must be nonnegative")
        if len(self.coefficients) != 3:
            raise ValueError("need coefficient fields for S, I, R")

    def coeff(self, label):
        return self.coefficients[int(label)]

    @property
    def smoothness_requirement(self):
        return math.ceil(self.dim / 2)


# ---------------------------------------------------------------------------
# operations


def generator_apply(coeff: CoefficientField, phi, x):
    """m . grad(phi) + 1/2 tr[(theta theta^T) Hess(phi)] at x.

    phi must carry exact .grad and .hess evaluators; x is (d,) or (n, d).
    Returns a scalar for a single point, else an (n,) array.
    """
    x_arr = np.atleast_2d(np.asarray(x, dtype=float))
    drift = coeff.drift(x_arr)
    a = coeff.diffusion_sq(x_arr)
    out = np.einsum("ne,ne->n", drift, phi.grad(x_arr))
    out = out + 0.5 * np.einsum("neu,neu->n", a, phi.hess(x_arr))
    if np.ndim(x) == 1:
        return float(out[0])
    return out


def infection_pressure(state, kernel: ContactKernel, i: int) -> float:
    """lambda_i = (1/N) sum over infected j of K(X_i, X_j)."""
    n = state.positions.shape[0]
    if not 0 <= i < n:
        raise IndexError(f"individual index {i} out of range for N={n}")
    infected = state.positions[state.labels == int(I)]
    if infected.shape[0] == 0:
        return 0.0
    vals = kernel.eval_pairs(state.positions[i][None, :], infected)
    return float(np.sum(vals)) / n


@dataclass
class Check:
    name: str
    passed: bool
    witness: dict = field(default_factory=dict)


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            wit = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                            for k, v in c.witness.items())
            lines.append(f"[{status}] {c.name}" + (f"  ({wit})" if wit else ""))
        return "\n".join(lines)


def _probe_grid(spec, pts_per_axis=None):
    lo, hi = spec.initial.density.support_box(1e-6)
    pad = 3.0 * spec.kernel.support_radius + 1.0
    lo, hi = lo - pad, hi + pad
    if pts_per_axis is None:
        pts_per_axis = {1: 257, 2: 33, 3: 13}.get(spec.dim, 9)
    axes = [np.linspace(lo[a], hi[a], pts_per_axis) for a in range(spec.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def validate_model(spec: ModelSpec) -> ValidationReport:
    """Check the standing assumptions for the built-in families.

    Returns per-check pass/fail with witnessing quantities; never raises on
    a failed assumption.
    """
    checks = []
    d = spec.dim
    need = spec.smoothness_requirement

    checks.append(Check("dimension_supported", d <= 3, {"d": d}))
    checks.append(Check("gamma_fixed_at_one", spec.gamma == 1.0, {"gamma": spec.gamma}))

    probes = _probe_grid(spec) if d <= 3 else None
    for cf in spec.coefficients:
        tag = CompartmentLabel(cf.compartment).name
        checks.append(Check(f"drift_bounded[{tag}]",
                            math.isfinite(cf.drift_sup), {"sup": cf.drift_sup}))
        checks.append(Check(f"diffusion_bounded[{tag}]",
                            math.isfinite(cf.diffusion_sup), {"sup": cf.diffusion_sup}))
        order_ok = cf.smoothness_order >= 3 + need
        checks.append(Check(f"coefficient_smoothness[{tag}]", order_ok,
                            {"order": cf.smoothness_order, "required": 3 + need}))
        if probes is not None:
            eigs = np.linalg.eigvalsh(cf.diffusion_sq(probes))
            min_eig = float(eigs.min())
            checks.append(Check(f"diffusion_invertible[{tag}]", min_eig > 1e-12,
                                {"min_eig": min_eig}))

    k = spec.kernel
    checks.append(Check("kernel_compact_support",
                        math.isfinite(k.support_radius) and k.support_radius > 0,
                        {"support_radius": k.support_radius}))
    checks.append(Check("kernel_smoothness", k.smoothness_order >= 2 + need,
                        {"order": k.smoothness_order, "required": 2 + need}))
    checks.append(Check("kernel_bounded", math.isfinite(k.sup_norm),
                        {"sup_norm": k.sup_norm}))

    g = spec.initial.density
    checks.append(Check("initial_density_bounded", math.isfinite(g.sup_density),
                        {"sup": float(g.sup_density)}))
    mass = _density_mass(g)
    checks.append(Check("initial_density_normalized", abs(mass - 1.0) < 1e-6,
                        {"mass": mass}))

    mom = g.moment(2.0 * spec.initial.sigma_moment)
    mom_ok = math.isfinite(mom) and _moment_quadrature_converges(g, spec.initial.sigma_moment)
    checks.append(Check("initial_moment_finite", mom_ok,
                        {"sigma": spec.initial.sigma_moment, "moment": mom}))

    return ValidationReport(checks)


def _density_mass(g):
    lo, hi = g.support_box(1e-10)
    if g.dim == 1:
        x = np.linspace(lo[0], hi[0], 100001)
        return float(np.trapz(g.density(x[:, None]), x))
    axes = [np.linspace(lo[a], hi[a], 401) for a in range(g.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vol_el = np.prod([(ax[1] - ax[0]) for ax in axes])
    return float(np.sum(g.density(pts)) * vol_el)


def _moment_quadrature_converges(g, sigma, levels=5):
    """Integrate |x|^(2 sigma) g over expanding shells beyond the effective
    support; a convergent moment needs vanishing shell contributions."""
    if g.dim > 2:
        return math.isfinite(g.moment(2.0 * sigma))
    order = 2.0 * sigma
    lo, hi = g.support_box(1e-8)
    core = float(max(np.max(np.abs(lo)), np.max(np.abs(hi)), 1.0))
    body = g.moment(order)
    if not math.isfinite(body):
        body = 1.0
    shells = []
    for k in range(levels):
        a, b = core * 2.0 ** k, core * 2.0 ** (k + 1)
        if g.dim == 1:
            val = 0.0
            for sgn in (-1.0, 1.0):
                x = np.linspace(min(sgn * a, sgn * b), max(sgn * a, sgn * b), 10001)
                val += float(np.trapezoid(np.abs(x) ** order * g.density(x[:, None]), x))
        else:
            axes = [np.linspace(-b, b, 401)] * 2
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=1)
            inner = np.all(np.abs(pts) <= a, axis=1)
            rad = np.sqrt((pts ** 2).sum(axis=1))
            vol_el = np.prod([(ax[1] - ax[0]) for ax in axes])
            val = float(np.sum(rad[~inner] ** order * g.density(pts[~inner])) * vol_el)
        shells.append(val)
    return bool(shells[-1] < 1e-3 * max(body, 1.0))
