"""Experiment configuration: JSON tree with strict unknown-key rejection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import model as M
from . import pde
from .measures import basis_build


class ConfigError(ValueError):
    pass


# schema: key -> (required, default); nested dicts validated recursively
_COEFF_KEYS = {"family": (True, None), "drift": (False, None), "theta": (False, None),
               "drift_gain": (False, None), "theta_amp": (False, 0.0),
               "theta_dir": (False, None), "length": (False, 1.0),
               "centers": (False, None), "amplitudes": (False, None),
               "widths": (False, None), "theta_amps": (False, None)}
_SCHEMA = {
    "model": {
        "dim": (True, None),
        "coefficients": {"S": _COEFF_KEYS, "I": _COEFF_KEYS, "R": _COEFF_KEYS},
        "kernel": {"beta": (True, None), "support_radius": (True, None),
                   "plateau_radius": (False, 0.0), "inner_exponent": (False, 6),
                   "outer_exponent": (False, 5)},
        "alpha": (True, None),
        "initial": {
            "density": {"family": (True, None), "lo": (False, None),
                        "hi": (False, None), "mean": (False, None),
                        "std": (False, None), "tail_exponent": (False, None)},
            "region": {"kind": (True, None), "lo": (False, None),
                       "hi": (False, None), "center": (False, None),
                       "radius": (False, None)},
            "p_infect": (True, None),
            "sigma_moment": (True, None),
        },
        "gamma": (False, 1.0),
    },
    "sim": {
        "dt": (True, None), "t_end": (True, None),
        "n": (False, None), "n_list": (False, None),
        "replicates": (False, 100), "master_seed": (False, 0),
        "scheme": (False, "frozen-rate"),
    },
    "pde": {
        "lo": (True, None), "hi": (True, None), "h": (True, None),
        "dt": (True, None), "record_every": (False, 1),
        "picard_tol": (False, 1e-4), "picard_max_iters": (False, 40),
        "picard_relaxation": (False, 1.0),
    },
    "dict": {
        "family": (False, "hermite"), "members": (False, 10),
        "order": (False, 2), "sigma": (False, 3.0),
        "center": (False, None), "scale": (False, None),
        "plateau": (False, 4.0), "support": (False, 6.0),
        "quad_nodes": (False, None),
    },
    "study": {
        "kind": (False, "lln"), "times": (False, None),
        "compare_time": (False, None), "gate_members": (False, 3),
        "out_dir": (False, "out"),
    },
}


def _check_tree(data, schema, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'top level'}: expected an object")
    for key in data:
        if key not in schema:
            raise ConfigError(f"unknown key {path + key!r}")
    out = {}
    for key, spec in schema.items():
        if isinstance(spec, dict):
            if key not in data:
                raise ConfigError(f"missing section {path + key!r}")
            out[key] = _check_tree(data[key], spec, path + key + ".")
        else:
            required, default = spec
            if key in data:
                out[key] = data[key]
            elif required:
                raise ConfigError(f"missing required key {path + key!r}")
            else:
                out[key] = default
    return out


@dataclass
class ExperimentConfig:
    raw: dict
    spec: M.ModelSpec
    sim: dict
    pde: dict
    dict_params: dict
    study: dict

    def build_grid(self):
        return pde.Grid.from_box(self.pde["lo"], self.pde["hi"], self.pde["h"])

    def build_dictionary(self):
        d = self.dict_params
        return basis_build(d["family"], d["members"], d["order"], d["sigma"],
                           dim=self.spec.dim, center=d["center"], scale=d["scale"],
                           plateau=d["plateau"], support=d["support"],
                           quad_nodes=d["quad_nodes"])

    @property
    def n_list(self):
        if self.sim["n_list"]:
            return list(self.sim["n_list"])
        if self.sim["n"]:
            return [self.sim["n"]]
        raise ConfigError("config needs sim.n or sim.n_list")

    @property
    def sample_times(self):
        times = self.study["times"]
        if times is None:
            times = [self.sim["t_end"]]
        return [float(t) for t in times]


def _build_coeff(label, section):
    fam = section["family"]
    if fam == "constant":
        return M.constant_field(label, section["drift"], section["theta"])
    if fam == "affine-clamped":
        return M.tanh_field(label, section["drift"], section["drift_gain"],
                            section["theta"], section["theta_amp"],
                            section["theta_dir"], section["length"])
    if fam == "gaussian-bump-sum":
        return M.gaussian_bump_field(label, section["drift"], section["theta"],
                                     section["centers"], section["amplitudes"],
                                     section["widths"], section["theta_amps"])
    raise ConfigError(f"unknown coefficient family {fam!r}")


def _build_density(section):
    fam = section["family"]
    if fam == "uniform":
        return M.UniformBox(section["lo"], section["hi"])
    if fam == "gaussian":
        return M.GaussianDiag(section["mean"], section["std"])
    if fam == "power-tail":
        return M.PowerTail1D(section["tail_exponent"])
    raise ConfigError(f"unknown density family {fam!r}")


def _build_region(section):
    if section["kind"] == "box":
        return M.BoxRegion(section["lo"], section["hi"])
    if section["kind"] == "ball":
        return M.BallRegion(section["center"], section["radius"])
    raise ConfigError(f"unknown region kind {section['kind']!r}")


def build_config(data: dict, check_model=True) -> ExperimentConfig:
    tree = _check_tree(data, _SCHEMA, "")
    m = tree["model"]
    if m["gamma"] != 1.0:
        raise ConfigError(
            "only the gamma = 1 rate normalization is supported; exponents in "
            "(0, 1) are reserved for future work")
    if tree["sim"]["dt"] <= 0 or tree["pde"]["dt"] <= 0:
        raise ConfigError("time steps must be positive")
    n_list = tree["sim"]["n_list"]
    if n_list is not None and list(n_list) != sorted(set(int(n) for n in n_list)):
        raise ConfigError("sim.n_list must be strictly increasing")

    coeffs = tuple(_build_coeff(lbl, m["coefficients"][name])
                   for lbl, name in zip((0, 1, 2), ("S", "I", "R")))
    k = m["kernel"]
    beta = k["beta"]
    if not isinstance(beta, (int, float)):
        raise ConfigError("kernel.beta must be a number (constant family)")
    kernel = M.constant_beta_kernel(beta, k["support_radius"], k["plateau_radius"],
                                    k["inner_exponent"], k["outer_exponent"])
    init = M.InitialLaw(_build_density(m["initial"]["density"]),
                        _build_region(m["initial"]["region"]),
                        m["initial"]["p_infect"], m["initial"]["sigma_moment"])
    spec = M.ModelSpec(int(m["dim"]), coeffs, kernel, float(m["alpha"]),
                       init, float(m["gamma"]))

    if check_model:
        report = M.validate_model(spec)
        if not report.ok:
            names = ", ".join(c.name for c in report.failures)
            raise ConfigError(f"model fails validation gates: {names}")
    return ExperimentConfig(tree, spec, tree["sim"], tree["pde"],
                            tree["dict"], tree["study"])


def load_config(path, check_model=True) -> ExperimentConfig:
    """Parse and validate a config file; unknown keys are rejected."""
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    return build_config(data, check_model)


def echo_config(cfg: ExperimentConfig) -> str:
    """Canonical dump of the validated tree (defaults filled)."""
    return json.dumps(cfg.raw, indent=2, sort_keys=True)
