"""Command-line front end.

Exit codes: 0 pass, 1 run error, 2 acceptance/validation failure.  The
--threads flag may change scheduling only, never results.
"""

import argparse
import os
import sys

import numpy as np


def _common(sub):
    sub.add_argument("--config", required=True, help="experiment config (JSON)")
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="master seed override")
    sub.add_argument("--threads", type=int, default=None,
                     help="worker threads (must not change results)")


def build_parser():
    parser = argparse.ArgumentParser(prog="spatialsir")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "simulate", "pde", "lln-study", "clt-study"):
        _common(subs.add_parser(name))
    plot = subs.add_parser("plot")
    plot.add_argument("csvs", nargs="+", help="study CSV files")
    plot.add_argument("--out", default=".", help="output directory")
    return parser


def _cmd_validate(cfg, args):
    from .model import validate_model
    report = validate_model(cfg.spec)
    print(report)
    return 0 if report.ok else 2


def _cmd_simulate(cfg, args):
    from . import serialize
    from .particle import SimConfig, simulate
    from .studies import _set_threads
    _set_threads(args.threads)
    seed = args.seed if args.seed is not None else cfg.sim["master_seed"]
    n = cfg.n_list[0]
    sim = SimConfig(dt=cfg.sim["dt"], t_end=cfg.sim["t_end"], seed=seed,
                    scheme=cfg.sim["scheme"])
    traj = simulate(cfg.spec, n, sim)
    out = args.out or cfg.study["out_dir"]
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "trajectory.csv")
    serialize.write_counts_csv(traj, path)
    snap = os.path.join(out, "final_state.bin")
    serialize.write_snapshot_binary(snap, traj.final_state.t,
                                    traj.final_state.positions,
                                    traj.final_state.labels)
    print(f"wrote {path} and {snap}")
    return 0


def _cmd_pde(cfg, args):
    from . import serialize
    from .pde import PicardConfig, picard_solve, solve
    grid = cfg.build_grid()
    record_every = max(int(round(cfg.sim["dt"] / cfg.pde["dt"])), 1)
    fields = solve(cfg.spec, grid, cfg.pde["dt"], cfg.sim["t_end"], record_every)
    out = args.out or cfg.study["out_dir"]
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "density.csv")
    serialize.write_density_csv(fields, path)
    bounds = fields.check_l1_growth_bounds(cfg.spec.kernel.sup_norm, cfg.spec.alpha)
    acct = np.abs(fields.mass_accounting() - 1.0).max()
    print(f"wrote {path}")
    print(f"l1 growth bounds: {bounds}; mass accounting max dev {acct:.3e}")
    ok = all(bounds.values()) and acct < 1e-6
    return 0 if ok else 2


def _cmd_lln(cfg, args):
    from .studies import run_lln_study
    result = run_lln_study(cfg, out_dir=args.out, threads=args.threads,
                           master_seed=args.seed)
    print(result.summary())
    return 0 if result.ok else 2


def _cmd_clt(cfg, args):
    from .studies import run_clt_study
    result = run_clt_study(cfg, out_dir=args.out, threads=args.threads,
                           master_seed=args.seed)
    print(result.summary())
    return 0 if result.ok else 2


def _cmd_plot(args):
    from . import serialize, svgplot
    os.makedirs(args.out, exist_ok=True)
    written = []
    for path in args.csvs:
        names, rows = serialize.read_csv(path)
        base = os.path.splitext(os.path.basename(path))[0]
        out_path = os.path.join(args.out, base + ".svg")
        if names[:4] == ["t", "S_count", "I_count", "R_count"]:
            plot = svgplot.SvgPlot(title=base, xlabel="t", ylabel="count")
            ts = [float(r[0]) for r in rows]
            for j, label in enumerate(("S", "I", "R")):
                plot.add_series(label, ts, [float(r[j + 1]) for r in rows])
            if not rows:
                plot.add_annotation("warning: empty input CSV")
            plot.write(out_path)
        elif names[:2] == ["N", "rms_error"]:
            plot = svgplot.SvgPlot(title=base, xlabel="N", ylabel="RMS error",
                                   logx=True, logy=True)
            ns = [float(r[0]) for r in rows]
            es = [float(r[1]) for r in rows]
            plot.add_series("rms", ns, es, marker=True)
            if len(ns) > 1:
                slope = np.polyfit(np.log(ns), np.log(es), 1)[0]
                plot.add_annotation(f"fitted slope = {slope:.4f}")
            if not rows:
                plot.add_annotation("warning: empty input CSV")
            plot.write(out_path)
        elif "empirical" in names and "theoretical" in names:
            ie, it = names.index("empirical"), names.index("theoretical")
            labels = [f"{r[3]}:{r[4]}" for r in rows]
            pairs = [(float(r[ie]), float(r[it])) for r in rows]
            svg = svgplot.bar_plot(base, labels, pairs)
            with open(out_path, "w", newline="\n") as fh:
                fh.write(svg if isinstance(svg, str) else svg.render())
        else:
            raise ValueError(f"{path}: unrecognized CSV schema {names}")
        written.append(out_path)
    print("wrote " + " ".join(written))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            return _cmd_plot(args)
        from .config import load_config
        cfg = load_config(args.config, check_model=args.command != "validate")
        handler = {"validate": _cmd_validate, "simulate": _cmd_simulate,
                   "pde": _cmd_pde, "lln-study": _cmd_lln,
                   "clt-study": _cmd_clt}[args.command]
        return handler(cfg, args)
    except Exception as exc:   # run errors -> exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
