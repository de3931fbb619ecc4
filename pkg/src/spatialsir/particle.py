"""N-individual stochastic simulation.

Individuals move by Euler-Maruyama with compartment-dependent coefficients;
infection and recovery fire from per-step frozen rates (default) or by exact
thinning against the kernel sup-norm majorant.  All draws come from
counter-based streams keyed by (seed, step, phase), so a trajectory is a
pure function of its seed regardless of threading.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rngstream as rs
from ._pressure import pressure_sums
from .cells import CellIndex, build_cell_index
from .model import CompartmentLabel, ModelSpec, validate_model

S, I, R = int(CompartmentLabel.S), int(CompartmentLabel.I), int(CompartmentLabel.R)


@dataclass
class PopulationState:
    t: float
    positions: np.ndarray   # (N, d)
    labels: np.ndarray      # (N,) int8

    @property
    def n(self):
        return self.positions.shape[0]

    def counts(self):
        return np.bincount(self.labels, minlength=3)


@dataclass
class SimConfig:
    dt: float
    t_end: float
    seed: int = 0
    scheme: str = "frozen-rate"   # or "thinning"
    record_stride: int = 1
    store_snapshots: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("frozen-rate", "thinning"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    def check_rates(self, kernel_sup, alpha):
        if self.dt * kernel_sup > 0.1 + 1e-12:
            raise ValueError(
                f"dt*|K|_inf = {self.dt * kernel_sup:.4g} exceeds the 0.1 cap")
        if self.dt * alpha > 0.1 + 1e-12:
            raise ValueError(f"dt*alpha = {self.dt * alpha:.4g} exceeds the 0.1 cap")


@dataclass
class TrajectoryRecord:
    dt: float
    seed: int
    scheme: str
    step_times: np.ndarray          # every step
    step_counts: np.ndarray         # (n_steps+1, 3)
    times: np.ndarray               # recorded (stride) times
    snapshots: list                 # [(positions, labels)] or []
    events: np.ndarray              # (n_events, 4): step, individual, from, to
    event_times: np.ndarray
    initial_labels: np.ndarray
    final_state: PopulationState

    def replay_labels(self):
        labels = self.initial_labels.copy()
        for step, ind, frm, to in self.events:
            if labels[ind] != frm:
                raise ValueError("event log inconsistent with label history")
            labels[ind] = to
        return labels


# ---------------------------------------------------------------------------
# elementary operations


def init_population(spec: ModelSpec, n: int, key) -> PopulationState:
    """Positions i.i.d. from g; infected with prob p inside the seeded region."""
    if n < 1:
        raise ValueError("need at least one individual")
    if np.isscalar(key) or (isinstance(key, np.ndarray) and key.ndim == 0):
        key = rs.master_key(key)
    positions = spec.initial.density.sample(rs.init_stream(key, rs.INIT_POS), n)
    positions = np.ascontiguousarray(positions, dtype=float)
    u = rs.init_stream(key, rs.INIT_LABEL).uniform(size=n)
    inside = spec.initial.region.indicator(positions)
    labels = np.where(inside & (u < spec.initial.p_infect), I, S).astype(np.int8)
    return PopulationState(0.0, positions, labels)


def motion_step(state: PopulationState, spec: ModelSpec, dt: float,
                gen) -> PopulationState:
    """One Euler-Maruyama step; labels unchanged, time advanced by dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = gen.standard_normal(state.positions.shape)
    new = np.empty_like(state.positions)
    sqdt = np.sqrt(dt)
    for label in (S, I, R):
        mask = state.labels == label
        if not mask.any():
            continue
        x = state.positions[mask]
        cf = spec.coeff(label)
        new[mask] = x + cf.drift(x) * dt + np.einsum(
            "nij,nj->ni", cf.diffusion(x), z[mask]) * sqdt
    return PopulationState(state.t + dt, new, state.labels.copy())


def _infected_csr(index: CellIndex, positions, labels):
    inf_idx = np.flatnonzero(labels == I)
    inf_pos = np.ascontiguousarray(positions[inf_idx])
    ids = index.cell_ids(inf_pos) if inf_idx.size else np.empty(0, dtype=np.int64)
    order = np.argsort(ids, kind="stable").astype(np.int64)
    counts = np.bincount(ids, minlength=index.total_cells) if inf_idx.size \
        else np.zeros(index.total_cells, dtype=np.int64)
    starts = np.zeros(index.total_cells + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    return inf_idx, np.ascontiguousarray(inf_pos[order]), starts


def infection_pressures_all(state: PopulationState, kernel,
                            index: CellIndex) -> np.ndarray:
    """lambda_i for every individual, identical summation set to the naive sum."""
    if index.is_stale_for(state.positions):
        raise ValueError("cell index is stale: rebuild from current positions")
    n = state.n

    # plateau covering the whole population: shape == 1 on every pair, so the
    # sum collapses to sum beta(X_j) over infected (ascending j, as naive)
    if kernel.plateau_radius > 0.0:
        span = state.positions.max(axis=0) - state.positions.min(axis=0)
        if float(np.sqrt((span ** 2).sum())) <= kernel.plateau_radius:
            inf_pos = state.positions[state.labels == I]
            if inf_pos.shape[0] == 0:
                return np.zeros(n)
            total = np.sum(kernel.beta(inf_pos))
            return np.full(n, total / n)

    inf_idx, inf_sorted, starts = _infected_csr(index, state.positions, state.labels)
    if inf_idx.size == 0:
        return np.zeros(n)
    beta_sorted = np.ascontiguousarray(kernel.beta(inf_sorted))
    sums = pressure_sums(state.positions, inf_sorted, beta_sorted, index.lo,
                         index.edge, index.ncells, index.strides, starts, kernel)
    return sums / n


def infection_pressures_naive(state: PopulationState, kernel) -> np.ndarray:
    """O(N^2) reference: ascending-index sum over infected for every i."""
    inf_pos = state.positions[state.labels == I]
    if inf_pos.shape[0] == 0:
        return np.zeros(state.n)
    out = np.empty(state.n)
    block = max(1, int(2e6 // max(inf_pos.shape[0], 1)))
    for lo in range(0, state.n, block):
        hi = min(lo + block, state.n)
        out[lo:hi] = kernel.eval_pairs(state.positions[lo:hi], inf_pos).sum(axis=1)
    return out / state.n


def epidemic_step(state: PopulationState, spec: ModelSpec, dt: float,
                  gen_inf, gen_rec, pressures=None):
    """Frozen-rate transitions: S->I with prob 1-exp(-lambda dt), I->R with
    1-exp(-alpha dt); at most one transition per individual per step."""
    if pressures is None:
        index = build_cell_index(state.positions, spec.kernel.support_radius)
        pressures = infection_pressures_all(state, spec.kernel, index)
    u_inf = gen_inf.uniform(size=state.n)
    u_rec = gen_rec.uniform(size=state.n)

    labels = state.labels.copy()
    was_s = state.labels == S
    was_i = state.labels == I
    p_inf = -np.expm1(-pressures * dt)
    new_inf = was_s & (u_inf < p_inf)
    p_rec = -np.expm1(-spec.alpha * dt)
    new_rec = was_i & (u_rec < p_rec)
    labels[new_inf] = I
    labels[new_rec] = R

    inf_ids = np.flatnonzero(new_inf)
    rec_ids = np.flatnonzero(new_rec)
    events = np.concatenate([
        np.stack([inf_ids, np.full_like(inf_ids, S), np.full_like(inf_ids, I)], axis=1),
        np.stack([rec_ids, np.full_like(rec_ids, I), np.full_like(rec_ids, R)], axis=1),
    ]) if inf_ids.size + rec_ids.size else np.empty((0, 3), dtype=np.int64)
    return PopulationState(state.t, state.positions, labels), events


def _pressure_single(x, kernel, inf_pos_sorted, index_geom):
    """Rate at one point against currently infected (thinning helper)."""
    if inf_pos_sorted.shape[0] == 0:
        return 0.0
    d2 = ((inf_pos_sorted - x) ** 2).sum(axis=1)
    mask = d2 < kernel.support_radius ** 2
    if not mask.any():
        return 0.0
    pts = inf_pos_sorted[mask]
    return float(np.sum(kernel.shape(np.sqrt(d2[mask])) * kernel.beta(pts)))


def _thinning_window(state, spec, dt, key, step):
    """Exact jump mechanism over one window with positions frozen."""
    n = state.n
    ksup = spec.kernel.sup_norm
    counts = rs.stream(key, step, rs.THIN_COUNT).poisson(ksup * dt, size=n)
    total = int(counts.sum())
    times = rs.stream(key, step, rs.THIN_TIME).uniform(0.0, dt, size=total)
    accept = rs.stream(key, step, rs.THIN_ACCEPT).uniform(size=total)
    rec_first = rs.stream(key, step, rs.THIN_RECOVER).exponential(size=n)
    rec_second = rs.stream(key, step, rs.THIN_RECOVER2).exponential(size=n)

    cand_ind = np.repeat(np.arange(n), counts)
    # event kinds: 0 = infection candidate, 1 = recovery
    ev_times = [times]
    ev_inds = [cand_ind]
    ev_kinds = [np.zeros(total, dtype=np.int64)]
    ev_accept = [accept]
    if spec.alpha > 0:
        infected0 = np.flatnonzero(state.labels == I)
        rec_t = rec_first[infected0] / spec.alpha
        mask = rec_t < dt
        ev_times.append(rec_t[mask])
        ev_inds.append(infected0[mask])
        ev_kinds.append(np.ones(int(mask.sum()), dtype=np.int64))
        ev_accept.append(np.zeros(int(mask.sum())))
    ev_times = np.concatenate(ev_times)
    order = np.argsort(ev_times, kind="stable")
    ev_times = ev_times[order]
    ev_inds = np.concatenate(ev_inds)[order]
    ev_kinds = np.concatenate(ev_kinds)[order]
    ev_accept = np.concatenate(ev_accept)[order]

    labels = state.labels.copy()
    events = []
    # simple per-event queue; labels evolve inside the window
    extra = []   # scheduled recoveries of individuals infected mid-window
    ptr = 0
    all_events = list(zip(ev_times, ev_inds, ev_kinds, ev_accept))
    while ptr < len(all_events) or extra:
        if extra and (ptr >= len(all_events) or extra[0][0] <= all_events[ptr][0]):
            t_ev, ind = extra.pop(0)
            if labels[ind] == I:
                labels[ind] = R
                events.append((ind, I, R))
            continue
        t_ev, ind, kind, acc = all_events[ptr]
        ptr += 1
        if kind == 1:
            if labels[ind] == I:
                labels[ind] = R
                events.append((ind, I, R))
            continue
        if labels[ind] != S:
            continue
        inf_pos = state.positions[labels == I]
        lam = _pressure_single(state.positions[ind], spec.kernel, inf_pos, None) / n
        if acc < lam / ksup:
            labels[ind] = I
            events.append((ind, S, I))
            if spec.alpha > 0:
                t_rec = t_ev + rec_second[ind] / spec.alpha
                if t_rec < dt:
                    # keep schedule sorted by time
                    extra.append((t_rec, ind))
                    extra.sort(key=lambda e: e[0])
    ev = np.array(events, dtype=np.int64).reshape(-1, 3)
    return PopulationState(state.t, state.positions, labels), ev


# ---------------------------------------------------------------------------
# full simulation


def simulate(spec: ModelSpec, n: int, sim: SimConfig) -> TrajectoryRecord:
    report = validate_model(spec)
    if not report.ok:
        names = ", ".join(c.name for c in report.failures)
        raise ValueError(f"model validation failed: {names}")
    sim.check_rates(spec.kernel.sup_norm, spec.alpha)

    key = rs.master_key(sim.seed)
    state = init_population(spec, n, key)
    n_steps = int(round(sim.t_end / sim.dt))

    step_times = [0.0]
    step_counts = [state.counts()]
    rec_times = [0.0]
    snapshots = [(state.positions.copy(), state.labels.copy())] \
        if sim.store_snapshots else []
    events = []
    event_times = []
    initial_labels = state.labels.copy()

    for step in range(n_steps):
        state = motion_step(state, spec, sim.dt, rs.stream(key, step, rs.MOTION))
        if sim.scheme == "frozen-rate":
            index = build_cell_index(state.positions, spec.kernel.support_radius)
            pressures = infection_pressures_all(state, spec.kernel, index)
            state, ev = epidemic_step(state, spec, sim.dt,
                                      rs.stream(key, step, rs.INFECT),
                                      rs.stream(key, step, rs.RECOVER),
                                      pressures)
        else:
            state, ev = _thinning_window(state, spec, sim.dt, key, step)
        if ev.shape[0]:
            events.append(np.column_stack([np.full(ev.shape[0], step, dtype=np.int64), ev]))
            event_times.append(np.full(ev.shape[0], state.t))
        step_times.append(state.t)
        step_counts.append(state.counts())
        if (step + 1) % sim.record_stride == 0 or step == n_steps - 1:
            rec_times.append(state.t)
            if sim.store_snapshots:
                snapshots.append((state.positions.copy(), state.labels.copy()))

    events = np.concatenate(events) if events else np.empty((0, 4), dtype=np.int64)
    event_times = np.concatenate(event_times) if event_times else np.empty(0)
    return TrajectoryRecord(
        dt=sim.dt, seed=sim.seed, scheme=sim.scheme,
        step_times=np.array(step_times), step_counts=np.array(step_counts),
        times=np.array(rec_times), snapshots=snapshots,
        events=events, event_times=event_times,
        initial_labels=initial_labels, final_state=state)


# ---------------------------------------------------------------------------
# drift-compensated residual (the per-test-function martingale term)


def martingale_track(traj: TrajectoryRecord, spec: ModelSpec, phi,
                     compartment=CompartmentLabel.S) -> tuple:
    """Residual of the compartment pairing after removing the drift terms.

    Left-endpoint quadrature at the recording step; requires stride-1
    snapshots.  Returns (times, track).
    """
    if not traj.snapshots:
        raise ValueError("martingale_track needs store_snapshots=True")
    if len(traj.snapshots) != len(traj.step_times):
        raise ValueError("martingale_track needs record_stride == 1")
    from .model import generator_apply

    comp = int(compartment)
    dt = traj.dt
    n = traj.snapshots[0][0].shape[0]
    times = traj.times
    alpha = spec.alpha

    track = np.empty(len(times))
    pair0 = None
    integral = 0.0
    for k, (positions, labels) in enumerate(traj.snapshots):
        mask = labels == comp
        pair_k = float(phi.value(positions[mask]).sum()) / n
        if pair0 is None:
            pair0 = pair_k
        track[k] = pair_k - pair0 - integral

        # accumulate left-endpoint integrand for the next step
        state = PopulationState(times[k], positions, labels)
        gen_pair = float(generator_apply(spec.coeff(comp), phi, positions[mask]).sum()) / n \
            if mask.any() else 0.0
        integrand = gen_pair
        if comp in (S, I):
            index = build_cell_index(positions, spec.kernel.support_radius)
            lam = infection_pressures_all(state, spec.kernel, index)
            s_mask = labels == S
            drive = float((phi.value(positions[s_mask]) * lam[s_mask]).sum()) / n \
                if s_mask.any() else 0.0
            integrand += -drive if comp == S else drive
        if comp in (I, R):
            i_mask = labels == I
            ipair = float(phi.value(positions[i_mask]).sum()) / n if i_mask.any() else 0.0
            integrand += -alpha * ipair if comp == I else alpha * ipair
        integral += dt * integrand
    return times, track
