"""Fluctuation ensembles, bracket quadrature, and the Galerkin noise model.

Everything here is a finite-dimensional pairing against an orthonormal test
dictionary: replicate ensembles of sqrt(N)-scaled deviations, their
theoretical covariance assembled from the limit densities, and a linear
(Ornstein-Uhlenbeck type) coordinate system whose drift is the dictionary
projection of the limit generators and whose noise rate differentiates the
bracket quadrature.

Two bracket conventions are computed side by side: 'representation' (from
the driving-white-noise form, including the recovery-noise term in the
infected bracket) and 'statement' (the variant without it and with the
recovered/infected roles swapped in the third bracket and the opposite
recovery cross sign).  The representation variant is the one the acceptance
gate uses; replicate ensembles arbitrate empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import rngstream as rs
from .measures import TestDictionary, field_coords, pairing_matrix
from .model import CompartmentLabel, ModelSpec
from .particle import SimConfig, simulate
from .pde import FieldSeries, convolve_kernel, kernel_stencil

S, I, R = int(CompartmentLabel.S), int(CompartmentLabel.I), int(CompartmentLabel.R)


# ---------------------------------------------------------------------------
# replicate ensembles


@dataclass
class ReplicateEnsemble:
    n: int
    master_seed: int
    times: np.ndarray
    coords: np.ndarray      # (R, T, 3, P) fluctuation coordinates
    pairings: np.ndarray    # (R, T, 3, P) raw empirical pairings
    limits: np.ndarray      # (T, 3, P) limit coordinates

    @property
    def replicates(self):
        return self.coords.shape[0]

    def flat(self, t_index):
        """(R, 3P) coordinate matrix at one sample time."""
        r = self.coords.shape[0]
        return self.coords[:, t_index].reshape(r, -1)


def _sample_stride(times, dt):
    steps = []
    for t in times:
        k = int(round(t / dt))
        if abs(k * dt - t) > 1e-9:
            raise ValueError(f"sample time {t} is not a multiple of dt={dt}")
        steps.append(k)
    stride = steps[0]
    for k in steps[1:]:
        stride = math.gcd(stride, k)
    return steps, max(stride, 1)


def run_ensemble(spec: ModelSpec, n: int, replicates: int,
                 dictionary: TestDictionary, times, fields: FieldSeries,
                 dt: float, master_seed: int = 0, scheme: str = "frozen-rate",
                 t_end=None) -> ReplicateEnsemble:
    """Fluctuation coordinates over independent replicates.

    The limit coordinates come from the supplied density series, which must
    contain every requested sample time.
    """
    times = np.asarray(sorted(times), dtype=float)
    steps, stride = _sample_stride(times, dt)
    horizon = t_end if t_end is not None else float(times[-1])

    member_vals = dictionary.value_matrix(fields.grid.points())
    limits = np.empty((len(times), 3, len(dictionary)))
    for j, t in enumerate(times):
        limits[j] = field_coords(fields.at_time(t), dictionary, member_vals)

    seeds = rs.replicate_seeds(master_seed, replicates)
    coords = np.empty((replicates, len(times), 3, len(dictionary)))
    pairings = np.empty_like(coords)
    sqrt_n = math.sqrt(n)
    for r in range(replicates):
        sim = SimConfig(dt=dt, t_end=horizon, seed=int(seeds[r]), scheme=scheme,
                        record_stride=stride, store_snapshots=True)
        traj = simulate(spec, n, sim)
        rec_index = {int(round(t / dt)): j for j, t in enumerate(traj.times)}
        for j, (t, k) in enumerate(zip(times, steps)):
            pos, lab = traj.snapshots[rec_index[k]]
            state = _Snapshot(t, pos, lab, n)
            pairings[r, j] = pairing_matrix(state, dictionary)
            coords[r, j] = sqrt_n * (pairings[r, j] - limits[j])
    return ReplicateEnsemble(n, master_seed, times, coords, pairings, limits)


class _Snapshot:
    def __init__(self, t, positions, labels, n):
        self.t = t
        self.positions = positions
        self.labels = labels
        self.n = n


# ---------------------------------------------------------------------------
# initial fluctuation covariance (analytic, by white-noise expansion)


@dataclass
class InitialFluctuationCov:
    uu: np.ndarray
    vv: np.ndarray
    uv: np.ndarray

    def full(self):
        p = self.uu.shape[0]
        out = np.zeros((3 * p, 3 * p))
        out[:p, :p] = self.uu
        out[p:2 * p, p:2 * p] = self.vv
        out[:p, p:2 * p] = self.uv
        out[p:2 * p, :p] = self.uv.T
        return out


def initial_fluct_cov(spec: ModelSpec, dictionary: TestDictionary) -> InitialFluctuationCov:
    """Covariance of the time-zero fluctuation coordinates.

    Expands the two independent driving white noises of the initial-condition
    limit: one carries the placement randomness weighted by the susceptible/
    infected split, the other the Bernoulli thinning inside the seeded
    region; entries reduce to quadratures of g-weighted member products over
    the region and its complement.
    """
    pts, qw = dictionary.quad_points_weights()
    g = spec.initial.density.density(pts)
    ind_a = spec.initial.region.indicator(pts).astype(float)
    p = spec.initial.p_infect
    mv = dictionary.value_matrix(pts)

    sqrt_g = np.sqrt(g)
    w_s = (1.0 - p) * ind_a + (1.0 - ind_a)          # susceptible thinning profile
    h_u = mv * (sqrt_g * w_s)[None, :]               # W1 argument for U
    v_i = mv * (p * ind_a * sqrt_g)[None, :]         # W1 argument for V
    k_b = mv * (ind_a * np.sqrt((p - p * p) * g))[None, :]   # W2 argument

    def dot(a, b):
        return (a * qw[None, :]) @ b.T

    c_u = h_u @ (sqrt_g * qw)        # <h_p, sqrt g> = int phi g w_s
    c_v = v_i @ (sqrt_g * qw)        # p int_A phi g
    gg = float(np.sum(g * qw))       # total mass under the quadrature

    uu = dot(h_u, h_u) - np.outer(c_u, c_u) - np.outer(c_u, c_u).T \
        + gg * np.outer(c_u, c_u) + dot(k_b, k_b)
    vv = dot(v_i, v_i) - np.outer(c_v, c_v) - np.outer(c_v, c_v).T \
        + gg * np.outer(c_v, c_v) + dot(k_b, k_b)
    uv = dot(h_u, v_i) - np.outer(c_u, c_v) - np.outer(c_u, c_v) \
        + gg * np.outer(c_u, c_v) - dot(k_b, k_b)
    return InitialFluctuationCov(uu, vv, uv)


# ---------------------------------------------------------------------------
# bracket quadrature


@dataclass
class BracketSpec:
    variant: str
    times: np.ndarray
    blocks: dict             # '11','22','33','12','23','13' -> (T, P, P)

    def full_matrix(self, t) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 + 1e-9 * abs(t):
            raise ValueError(f"time {t} not on the bracket grid")
        b = {key: arr[k] for key, arr in self.blocks.items()}
        p = b["11"].shape[0]
        out = np.zeros((3 * p, 3 * p))
        out[:p, :p] = b["11"]
        out[p:2 * p, p:2 * p] = b["22"]
        out[2 * p:, 2 * p:] = b["33"]
        out[:p, p:2 * p] = b["12"]
        out[p:2 * p, :p] = b["12"].T
        out[p:2 * p, 2 * p:] = b["23"]
        out[2 * p:, p:2 * p] = b["23"].T
        out[:p, 2 * p:] = b["13"]
        out[2 * p:, :p] = b["13"].T
        return out

    def rate_matrices(self):
        """d/dt of the full bracket by centered differences on the time grid."""
        p = self.blocks["11"].shape[1]
        full = np.stack([self.full_matrix(t) for t in self.times])
        rate = np.empty_like(full)
        dt = np.diff(self.times)
        rate[0] = (full[1] - full[0]) / dt[0]
        rate[-1] = (full[-1] - full[-2]) / dt[-1]
        for k in range(1, len(self.times) - 1):
            rate[k] = (full[k + 1] - full[k - 1]) / (self.times[k + 1] - self.times[k - 1])
        return rate


def bracket_quadrature(fields: FieldSeries, dictionary: TestDictionary,
                       spec: ModelSpec, variant: str = "representation") -> BracketSpec:
    """Time-quadrature of the martingale bracket integrands from the limit
    densities.  variant 'representation' or 'statement'."""
    if variant not in ("representation", "statement"):
        raise ValueError(f"unknown bracket variant {variant!r}")
    grid = fields.grid
    pts = grid.points()
    vol = grid.cell_volume
    mv = dictionary.value_matrix(pts)                 # (P, nn)
    mg = dictionary.grad_matrices(pts)                # (P, nn, d)
    stencil = kernel_stencil(spec.kernel, grid)
    beta_nodes = spec.kernel.beta(pts).reshape(grid.shape)

    a_fields = [spec.coeff(lbl).diffusion_sq(pts) for lbl in (S, I, R)]
    # theta-quadratic forms: T_A[p, n] = sum_u dphi_p/du * a_A[n, u, e]
    theta_half = [np.einsum("pnu,nue->pne", mg, a) for a in a_fields]

    n_t = len(fields.times)
    n_p = len(dictionary)
    integrands = {key: np.empty((n_t, n_p, n_p)) for key in
                  ("sk", "thS", "thI", "thR", "qI", "qR")}
    for k in range(n_t):
        f_s = fields.fS[k].ravel()
        f_i = fields.fI[k].ravel()
        f_r = fields.fR[k].ravel()
        kappa = convolve_kernel(fields.fI[k], spec.kernel, grid,
                                stencil, beta_nodes).ravel()
        w_sk = f_s * kappa * vol
        integrands["sk"][k] = (mv * w_sk) @ mv.T
        integrands["qI"][k] = (mv * (f_i * vol)) @ mv.T
        integrands["qR"][k] = (mv * (f_r * vol)) @ mv.T
        for key, f_a, th in (("thS", f_s, theta_half[S]),
                             ("thI", f_i, theta_half[I]),
                             ("thR", f_r, theta_half[R])):
            integrands[key][k] = np.einsum("pne,qne,n->pq", th, mg, f_a * vol)

    def cumulative(arr):
        out = np.zeros_like(arr)
        for k in range(1, n_t):
            dt = fields.times[k] - fields.times[k - 1]
            out[k] = out[k - 1] + 0.5 * dt * (arr[k] + arr[k - 1])
        return out

    sk = cumulative(integrands["sk"])
    th_s = cumulative(integrands["thS"])
    th_i = cumulative(integrands["thI"])
    th_r = cumulative(integrands["thR"])
    q_i = cumulative(integrands["qI"])
    q_r = cumulative(integrands["qR"])
    alpha = spec.alpha

    blocks = {"11": sk + th_s, "12": -sk,
              "13": np.zeros_like(sk)}
    if variant == "representation":
        blocks["22"] = sk + th_i + alpha * q_i
        blocks["33"] = th_r + alpha * q_i
        blocks["23"] = -alpha * q_i
    else:
        blocks["22"] = sk + th_i
        blocks["33"] = alpha * q_r + th_i
        blocks["23"] = alpha * q_i
    return BracketSpec(variant, fields.times.copy(), blocks)


# ---------------------------------------------------------------------------
# Galerkin coordinate system


@dataclass
class OUGalerkinSystem:
    times: np.ndarray
    drift: np.ndarray            # (T, 3P, 3P)
    noise_rate: np.ndarray       # (T, 3P, 3P)
    projection_residuals: np.ndarray   # (3, P) generator-projection residuals
    coupling_residuals: np.ndarray     # (2, P) max-over-time G-term residuals
    dictionary: TestDictionary
    bracket_variant: str


def _grid_partials(values_flat, quad_axes, order):
    """D^gamma by finite differences on the quadrature grid, |gamma| <= order."""
    shape = tuple(n for _, n in quad_axes)
    steps = [(hi - lo) / (n - 1) for (lo, hi), n in quad_axes]
    arr = values_flat.reshape(shape)
    out = {}
    dim = len(shape)
    from .basis import multi_indices
    for gamma in multi_indices(dim, order):
        cur = arr
        for axis, g in enumerate(gamma):
            for _ in range(g):
                cur = np.gradient(cur, steps[axis], axis=axis, edge_order=2)
        out[gamma] = cur.ravel()
    return out


def _spline_partials(points, grid, values, order):
    """D^gamma (|gamma| <= order) of a smooth grid field at arbitrary points,
    via cubic-spline interpolation (analytic spline derivatives)."""
    from .basis import multi_indices
    out = {}
    if grid.dim == 1:
        from scipy.interpolate import CubicSpline
        sp = CubicSpline(grid.axis_nodes(0), values.ravel(), extrapolate=False)
        x = points[:, 0]
        for gamma in multi_indices(1, order):
            v = sp(x, nu=gamma[0])
            out[gamma] = np.nan_to_num(v, nan=0.0)
        return out
    from scipy.interpolate import RectBivariateSpline
    sp = RectBivariateSpline(grid.axis_nodes(0), grid.axis_nodes(1), values,
                             kx=3, ky=3)
    inside = np.all((points >= grid.lo + 0.5 * grid.h)
                    & (points <= grid.hi - 0.5 * grid.h), axis=1)
    for gamma in multi_indices(2, order):
        v = np.zeros(points.shape[0])
        v[inside] = sp(points[inside, 0], points[inside, 1],
                       dx=gamma[0], dy=gamma[1], grid=False)
        out[gamma] = v
    return out


def _leibniz_product(member_tables, p, factor_partials, dim, order):
    """D^gamma of phi_p * f from member partial tables and factor partials."""
    from .basis import multi_indices
    out = {}
    for gamma in multi_indices(dim, order):
        acc = np.zeros_like(factor_partials[gamma])
        # sum over sub-multi-indices beta <= gamma of C(gamma, beta) terms
        ranges = [range(g + 1) for g in gamma]
        grids = np.meshgrid(*[np.arange(len(r)) for r in ranges], indexing="ij")
        subs = np.stack([m.ravel() for m in grids], axis=1)
        for sub in subs:
            comb = 1.0
            for g, s in zip(gamma, sub):
                comb *= math.comb(g, int(s))
            beta = tuple(int(s) for s in sub)
            rem = tuple(g - s for g, s in zip(gamma, beta))
            acc += comb * member_tables[beta][p] * factor_partials[rem]
        out[gamma] = acc
    return out


def ou_galerkin_build(fields: FieldSeries, dictionary: TestDictionary,
                      spec: ModelSpec, brackets: BracketSpec = None) -> OUGalerkinSystem:
    """Drift matrices from dictionary projections of the limit generators,
    noise rate from the bracket time-derivative."""
    if brackets is None:
        brackets = bracket_quadrature(fields, dictionary, spec, "representation")
    qpts, _ = dictionary.quad_points_weights()
    n_p = len(dictionary)
    from .model import generator_apply

    gen_mats = np.empty((3, n_p, n_p))
    gen_resid = np.empty((3, n_p))
    for a in (S, I, R):
        cf = spec.coeff(a)
        for p in range(n_p):
            vals = generator_apply(cf, dictionary.members[p], qpts)
            gam = _grid_partials(vals, dictionary.quad_axes, dictionary.order)
            coords, norm = dictionary.project_function(gam)
            gen_mats[a, p] = coords
            gen_resid[a, p] = math.sqrt(max(norm ** 2 - float(coords @ coords), 0.0))

    grid = fields.grid
    stencil = kernel_stencil(spec.kernel, grid)
    grid_pts = grid.points()
    beta_nodes = spec.kernel.beta(grid_pts).reshape(grid.shape)
    member_grid = dictionary.value_matrix(grid_pts)
    ctx = dictionary.projection_context()
    member_tables = ctx["tables"]

    n_t = len(fields.times)
    bi_mats = np.empty((n_t, n_p, n_p))
    gs_mats = np.empty((n_t, n_p, n_p))
    bi_resid = np.zeros((n_t, n_p))
    gs_resid = np.zeros((n_t, n_p))
    for k in range(n_t):
        kappa_grid = convolve_kernel(fields.fI[k], spec.kernel, grid,
                                     stencil, beta_nodes)
        kappa_parts = _spline_partials(qpts, grid, kappa_grid, dictionary.order)
        f_s = fields.fS[k]
        for p in range(n_p):
            # multiply-then-project: phi_p(x) * int K(x, .) f_I
            gam = _leibniz_product(member_tables, p, kappa_parts,
                                   dictionary.dim, dictionary.order)
            coords, norm = dictionary.project_function(gam)
            bi_mats[k, p] = coords
            bi_resid[k, p] = math.sqrt(max(norm ** 2 - float(coords @ coords), 0.0))
            # adjoint side: y -> int phi_p(x) K(x, y) f_S(x) dx
            src = (member_grid[p] * f_s.ravel()).reshape(grid.shape)
            gs_grid = convolve_kernel(src, spec.kernel, grid, stencil,
                                      np.ones(grid.shape)) * beta_nodes
            gam = _spline_partials(qpts, grid, gs_grid, dictionary.order)
            coords, norm = dictionary.project_function(gam)
            gs_mats[k, p] = coords
            gs_resid[k, p] = math.sqrt(max(norm ** 2 - float(coords @ coords), 0.0))

    alpha = spec.alpha
    eye = np.eye(n_p)
    drift = np.zeros((n_t, 3 * n_p, 3 * n_p))
    for k in range(n_t):
        drift[k, :n_p, :n_p] = gen_mats[S] - bi_mats[k]
        drift[k, :n_p, n_p:2 * n_p] = -gs_mats[k]
        drift[k, n_p:2 * n_p, :n_p] = bi_mats[k]
        drift[k, n_p:2 * n_p, n_p:2 * n_p] = gen_mats[I] + gs_mats[k] - alpha * eye
        drift[k, 2 * n_p:, n_p:2 * n_p] = alpha * eye
        drift[k, 2 * n_p:, 2 * n_p:] = gen_mats[R]

    noise_rate = brackets.rate_matrices()
    coupling = np.stack([bi_resid.max(axis=0), gs_resid.max(axis=0)])
    return OUGalerkinSystem(fields.times.copy(), drift, noise_rate,
                            gen_resid, coupling, dictionary, brackets.variant)


def _psd_factor(mat, floor=-1e-10):
    sym = 0.5 * (mat + mat.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals.min() < floor * max(1.0, abs(vals.max())):
        raise ValueError(f"noise matrix has eigenvalue {vals.min():.3e} below tolerance")
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)[None, :]


def ou_galerkin_simulate(system: OUGalerkinSystem, init_cov, replicates,
                         seed=0, init_mean=None):
    """Euler-Maruyama paths of the linear coordinate system on its time grid.

    Returns (times, paths) with paths of shape (R, T, 3P).
    """
    times = system.times
    dim = system.drift.shape[1]
    factor0 = _psd_factor(np.asarray(init_cov, dtype=float))
    gen = np.random.Generator(np.random.Philox(key=rs.master_key(seed)))
    z0 = gen.standard_normal((replicates, dim))
    paths = np.empty((replicates, len(times), dim))
    paths[:, 0] = z0 @ factor0.T
    if init_mean is not None:
        paths[:, 0] += init_mean
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        drift = system.drift[k]
        factor = _psd_factor(system.noise_rate[k])
        z = gen.standard_normal((replicates, dim))
        paths[:, k + 1] = paths[:, k] + paths[:, k] @ (drift.T * dt) \
            + z @ factor.T * math.sqrt(dt)
    return times, paths


def lyapunov_covariance(system: OUGalerkinSystem, init_cov):
    """Deterministic covariance evolution dC = D C + C D^T + Sigma_rate."""
    times = system.times
    cov = np.asarray(init_cov, dtype=float).copy()
    out = np.empty((len(times),) + cov.shape)
    out[0] = cov
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]

        def rhs(c, j):
            d = system.drift[j]
            s = system.noise_rate[j]
            return d @ c + c @ d.T + 0.5 * (s + s.T)

        k1 = rhs(cov, k)
        k2 = rhs(cov + 0.5 * dt * k1, k)
        k3 = rhs(cov + 0.5 * dt * k2, k)
        k4 = rhs(cov + dt * k3, min(k + 1, len(times) - 1))
        cov = cov + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = cov
    return out


# ---------------------------------------------------------------------------
# distributional diagnostics


@dataclass
class GaussianityReport:
    n: int
    mean: float
    std: float
    skewness: float
    excess_kurtosis: float
    ecdf_distance: float
    skew_band: tuple
    kurt_band: tuple
    ecdf_band: tuple
    degenerate: bool

    @property
    def normal_consistent(self):
        if self.degenerate:
            return False
        return (self.skew_band[0] <= self.skewness <= self.skew_band[1]
                and self.kurt_band[0] <= self.excess_kurtosis <= self.kurt_band[1]
                and self.ecdf_distance <= self.ecdf_band[1])


def gaussianity_report(samples, n_boot=400, seed=0) -> GaussianityReport:
    """Moment and ECDF diagnostics against a fitted normal with parametric
    bootstrap bands."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n < 200:
        raise ValueError("need at least 200 replicates for the diagnostics")
    mean, std = float(samples.mean()), float(samples.std(ddof=1))
    if std < 1e-300 or not math.isfinite(std):
        return GaussianityReport(n, mean, std, 0.0, 0.0, 0.0, (0, 0), (0, 0),
                                 (0, 0), True)

    def ecdf_dist(x):
        z = np.sort((x - x.mean()) / x.std(ddof=1))
        cdf = stats.norm.cdf(z)
        up = np.arange(1, x.size + 1) / x.size
        lo = np.arange(x.size) / x.size
        return float(max((up - cdf).max(), (cdf - lo).max()))

    skew = float(stats.skew(samples))
    kurt = float(stats.kurtosis(samples))
    dist = float(ecdf_dist(samples))

    gen = np.random.Generator(np.random.Philox(key=rs.master_key(seed)))
    sk_b, ku_b, ec_b = [], [], []
    for _ in range(n_boot):
        x = gen.standard_normal(n)
        sk_b.append(stats.skew(x))
        ku_b.append(stats.kurtosis(x))
        ec_b.append(ecdf_dist(x))
    def lo_hi(v):
        return (float(np.quantile(v, 0.005)), float(np.quantile(v, 0.995)))

    return GaussianityReport(n, mean, std, skew, kurt, dist,
                             lo_hi(sk_b), lo_hi(ku_b), lo_hi(ec_b), False)


def cov_compare(ensemble: ReplicateEnsemble, theory_cov, t, pairs=None,
                n_boot=300, seed=0):
    """Empirical vs theoretical covariance entries with bootstrap intervals.

    theory_cov: (3P, 3P) matrix at time t.  pairs: list of ((a, p), (b, q))
    index pairs; defaults to all diagonal entries.
    """
    t_index = int(np.argmin(np.abs(ensemble.times - t)))
    if abs(ensemble.times[t_index] - t) > 1e-9 + 1e-9 * abs(t):
        raise ValueError(f"time {t} not sampled by the ensemble")
    flat = ensemble.flat(t_index)
    n_p = ensemble.coords.shape[-1]
    if pairs is None:
        pairs = [((a, p), (a, p)) for a in range(3) for p in range(n_p)]

    emp_cov = np.cov(flat.T, ddof=1)
    gen = np.random.Generator(np.random.Philox(key=rs.master_key(seed)))
    r = flat.shape[0]
    boots = np.empty((n_boot, len(pairs)))
    for b in range(n_boot):
        idx = gen.integers(0, r, size=r)
        sub = flat[idx]
        c = np.cov(sub.T, ddof=1)
        boots[b] = [c[a * n_p + p, bb * n_p + q] for (a, p), (bb, q) in pairs]

    rows = []
    for j, ((a, p), (b, q)) in enumerate(pairs):
        i1, i2 = a * n_p + p, b * n_p + q
        emp = float(emp_cov[i1, i2]) if flat.shape[0] > 1 else float("nan")
        th = float(np.asarray(theory_cov)[i1, i2])
        rows.append({
            "row_compartment": a, "row_member": p,
            "col_compartment": b, "col_member": q,
            "empirical": emp, "theoretical": th,
            "ratio": emp / th if abs(th) > 1e-300 else float("inf"),
            "ci_lo": float(np.quantile(boots[:, j], 0.025)),
            "ci_hi": float(np.quantile(boots[:, j], 0.975)),
        })
    return rows
