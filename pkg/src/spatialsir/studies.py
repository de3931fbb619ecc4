"""Experiment orchestration: population-size convergence and fluctuation studies."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import rngstream as rs
from . import serialize, svgplot
from .config import ExperimentConfig
from .fluctuations import (bracket_quadrature, cov_compare, gaussianity_report,
                           initial_fluct_cov, lyapunov_covariance,
                           ou_galerkin_build, run_ensemble)
from .measures import field_coords, pairing_matrix
from .particle import SimConfig, simulate
from .pde import solve


@dataclass
class StudyResult:
    csv_paths: list
    svg_paths: list
    fitted: dict
    checks: list               # (name, passed, value)

    @property
    def ok(self):
        return all(passed for _, passed, _ in self.checks)

    def summary(self):
        lines = []
        for name, passed, value in self.checks:
            lines.append(f"[{'pass' if passed else 'FAIL'}] {name} = {value}")
        for key, val in self.fitted.items():
            lines.append(f"fitted {key} = {val}")
        return "\n".join(lines)


def _set_threads(threads):
    if threads:
        import numba
        numba.set_num_threads(int(threads))


def _pde_series(cfg: ExperimentConfig):
    grid = cfg.build_grid()
    record_every = max(int(round(cfg.sim["dt"] / cfg.pde["dt"])), 1)
    return solve(cfg.spec, grid, cfg.pde["dt"], cfg.sim["t_end"],
                 record_every=record_every)


def run_lln_study(cfg: ExperimentConfig, out_dir=None, threads=None,
                  master_seed=None) -> StudyResult:
    """RMS dictionary-coordinate error against the limit densities per N,
    with a log-log rate fit when several N are present."""
    _set_threads(threads)
    out_dir = out_dir or cfg.study["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    seed = cfg.sim["master_seed"] if master_seed is None else master_seed

    fields = _pde_series(cfg)
    dictionary = cfg.build_dictionary()
    times = cfg.sample_times
    member_vals = dictionary.value_matrix(fields.grid.points())
    limits = np.stack([field_coords(fields.at_time(t), dictionary, member_vals)
                       for t in times])            # (T, 3, P)

    n_list = cfg.n_list
    replicates = cfg.sim["replicates"]
    dt = cfg.sim["dt"]
    n_seeds = rs.replicate_seeds(seed, len(n_list))

    rows = []
    rms_per_n = []
    for i, n in enumerate(n_list):
        ens = run_ensemble(cfg.spec, n, replicates, dictionary, times, fields,
                           dt, master_seed=int(n_seeds[i]),
                           scheme=cfg.sim["scheme"], t_end=cfg.sim["t_end"])
        err = ens.pairings - limits[None, :, :, :]       # (R, T, 3, P)
        rms = np.sqrt(np.mean(err ** 2, axis=0))         # (T, 3, P)
        for j, t in enumerate(times):
            for a in range(3):
                for p in range(len(dictionary)):
                    rows.append((n, t, a, p, rms[j, a, p]))
        rms_per_n.append(float(np.sqrt(np.mean(err ** 2))))

    err_csv = os.path.join(out_dir, "lln_errors.csv")
    serialize.write_csv(err_csv, ["N", "t", "compartment", "member_id", "rms_error"], rows)
    sum_csv = os.path.join(out_dir, "lln_summary.csv")
    serialize.write_csv(sum_csv, ["N", "rms_error"], list(zip(n_list, rms_per_n)))

    fitted = {}
    checks = []
    if len(n_list) > 1:
        slope, intercept = np.polyfit(np.log(n_list), np.log(rms_per_n), 1)
        fitted["slope"] = float(slope)
        fitted["intercept"] = float(intercept)
        checks.append(("lln_rate_slope_in_[-0.65,-0.35]",
                       -0.65 <= slope <= -0.35, float(slope)))

    plot = svgplot.SvgPlot(title="coordinate RMS error vs N", xlabel="N",
                           ylabel="RMS error", logx=True, logy=True)
    plot.add_series("rms", n_list, rms_per_n, marker=True)
    if "slope" in fitted:
        plot.add_annotation(f"fitted slope = {fitted['slope']:.4f}")
    svg_path = os.path.join(out_dir, "lln_rate.svg")
    plot.write(svg_path)
    return StudyResult([err_csv, sum_csv], [svg_path], fitted, checks)


def run_clt_study(cfg: ExperimentConfig, out_dir=None, threads=None,
                  master_seed=None) -> StudyResult:
    """Fluctuation ensembles per N: variance stabilization, normality
    diagnostics, and covariance against the Galerkin noise model (both
    bracket variants reported; the representation variant is the gate)."""
    _set_threads(threads)
    replicates = cfg.sim["replicates"]
    if replicates < 200:
        raise ValueError(f"fluctuation study needs >= 200 replicates, got {replicates}")
    out_dir = out_dir or cfg.study["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    seed = cfg.sim["master_seed"] if master_seed is None else master_seed

    fields = _pde_series(cfg)
    dictionary = cfg.build_dictionary()
    n_p = len(dictionary)
    times = cfg.sample_times
    t_star = cfg.study["compare_time"] or times[-1]
    gate = min(cfg.study["gate_members"], n_p)

    icov = initial_fluct_cov(cfg.spec, dictionary).full()
    theory = {}
    for variant in ("representation", "statement"):
        brackets = bracket_quadrature(fields, dictionary, cfg.spec, variant)
        system = ou_galerkin_build(fields, dictionary, cfg.spec, brackets)
        cov_series = lyapunov_covariance(system, icov)
        theory[variant] = cov_series[fields.index_of(t_star)]

    n_list = cfg.n_list
    n_seeds = rs.replicate_seeds(seed, len(n_list))
    ensembles = {}
    var_rows = []
    for i, n in enumerate(n_list):
        ens = run_ensemble(cfg.spec, n, replicates, dictionary, times, fields,
                           cfg.sim["dt"], master_seed=int(n_seeds[i]),
                           scheme=cfg.sim["scheme"], t_end=cfg.sim["t_end"])
        ensembles[n] = ens
        t_idx = int(np.argmin(np.abs(ens.times - t_star)))
        flat = ens.flat(t_idx)
        var = flat.var(axis=0, ddof=1)
        for a in range(3):
            for p in range(n_p):
                var_rows.append((n, t_star, a, p, var[a * n_p + p]))
    var_csv = os.path.join(out_dir, "clt_variances.csv")
    serialize.write_csv(var_csv, ["N", "t", "compartment", "member_id", "variance"],
                        var_rows)

    checks = []
    fitted = {}
    # stabilization across the two largest N (infected compartment, gated members)
    if len(n_list) >= 2:
        na, nb = n_list[-2], n_list[-1]
        ia = int(np.argmin(np.abs(ensembles[na].times - t_star)))
        va = ensembles[na].flat(ia).var(axis=0, ddof=1)
        vb = ensembles[nb].flat(ia).var(axis=0, ddof=1)
        for p in range(gate):
            ratio = float(vb[n_p + p] / va[n_p + p])
            checks.append((f"variance_stabilization[I,{p}] in [0.7,1.3]",
                           0.7 <= ratio <= 1.3, ratio))

    # normality at the largest N
    n_big = n_list[-1]
    ens_big = ensembles[n_big]
    t_idx = int(np.argmin(np.abs(ens_big.times - t_star)))
    gauss_rows = []
    for p in range(gate):
        samples = ens_big.coords[:, t_idx, 1, p]
        rep = gaussianity_report(samples)
        gauss_rows.append((n_big, t_star, 1, p, rep.skewness, rep.excess_kurtosis,
                           rep.ecdf_distance, int(rep.degenerate)))
        checks.append((f"abs_skewness[I,{p}] <= 0.2",
                       abs(rep.skewness) <= 0.2, rep.skewness))
        checks.append((f"abs_excess_kurtosis[I,{p}] <= 0.4",
                       abs(rep.excess_kurtosis) <= 0.4, rep.excess_kurtosis))
    gauss_csv = os.path.join(out_dir, "clt_gaussianity.csv")
    serialize.write_csv(gauss_csv, ["N", "t", "compartment", "member_id", "skewness",
                                    "excess_kurtosis", "ecdf_distance", "degenerate"],
                        gauss_rows)

    # covariance vs both theory variants; representation is the gate
    cov_rows = []
    pairs = [((1, p), (1, p)) for p in range(gate)]
    for variant in ("representation", "statement"):
        table = cov_compare(ens_big, theory[variant], t_star, pairs)
        for row in table:
            cov_rows.append((variant, n_big, t_star, row["row_compartment"],
                             row["row_member"], row["empirical"],
                             row["theoretical"], row["ratio"],
                             row["ci_lo"], row["ci_hi"]))
            if variant == "representation":
                checks.append(
                    (f"variance_vs_noise_model[I,{row['row_member']}] within 20%",
                     0.8 <= row["ratio"] <= 1.2, row["ratio"]))
    cov_csv = os.path.join(out_dir, "clt_cov_compare.csv")
    serialize.write_csv(cov_csv, ["variant", "N", "t", "compartment", "member_id",
                                  "empirical", "theoretical", "ratio",
                                  "ci_lo", "ci_hi"], cov_rows)

    labels = [f"I:{p}" for p in range(gate)]
    rep_rows = [r for r in cov_rows if r[0] == "representation"]
    svg = svgplot.bar_plot("empirical vs noise-model variance", labels,
                           [(r[5], r[6]) for r in rep_rows])
    svg_path = os.path.join(out_dir, "clt_cov_compare.svg")
    with open(svg_path, "w", newline="\n") as fh:
        fh.write(svg if isinstance(svg, str) else svg.render())

    verdict_path = os.path.join(out_dir, "clt_verdicts.txt")
    result = StudyResult([var_csv, gauss_csv, cov_csv], [svg_path], fitted, checks)
    with open(verdict_path, "w", newline="\n") as fh:
        fh.write(result.summary() + "\n")
    result.csv_paths.append(verdict_path)
    return result
