"""Command line entry point.

    gibbsnls run conservation --k 3 --dt 1e-3 --t-final 1
    gibbsnls run gibbs-invariance --config my.cfg --set sampling.n_samples=20000
    gibbsnls list --json

Config files hold one ``dotted.key = value`` per line with JSON values; lines
starting with ``#`` are comments.  Resolution order: built-in defaults,
per-experiment defaults, the config file, ``--set`` pairs, then the dedicated
flags.  The resolved config is written to ``config.cfg`` in the output directory and
parses back to the same settings.

Exit status: 0 pass, 1 the experiment ran and failed (or aborted), 2 bad
configuration or unwritable output.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import harness
from .dynamics import SCHEMES, FlowConfig
from .errors import ConfigInvalid, GibbsNLSError, IoFailure
from .gibbs import POTENTIALS, make_potential
from .spectral import ParameterSet, set_threads

OUTPUT_ROOT_ENV = "GIBBSNLS_OUTPUT_ROOT"
CONFIG_NAME = "config.cfg"

EXPERIMENTS = {
    "linear-invariance": "invariance of the Gaussian measure mu_k under the free flow L(t)",
    "gibbs-invariance": "invariance of the truncated Gibbs measure rho_k under psi_k",
    "cauchy-rate": "C_s 2^-m Cauchy bound for coupled refinements of phi_{N,M}",
    "convergence-rate": "M_k^(s'-s) rate of psi_k towards the limiting flow",
    "energy-growth": "energy of the forced part bounded by the time integral of the L^4 forcing",
    "kernel-bounds": "far-field bound |K_t(z)| <= C/(M_k z^2) for the kernel of L(t) Pi_k",
    "conservation": "mass and truncated Hamiltonian conserved by psi_k",
}

DEFAULTS = {
    "experiment": "conservation",
    "output_dir": "",
    "threads": 0,
    "params.s0": 0.45, "params.s_inf": 0.3, "params.alpha": 1.25, "params.p": 4.5,
    "params.k": 3, "params.Lambda": 1.0, "params.dealias": 2,
    "chi.name": "power", "chi.c": 1.0, "chi.decay": 1.25, "chi.width": 1.0,
    "flow.dt": 1e-3, "flow.substeps": 1, "flow.scheme": "strang", "flow.t_final": 1.0,
    "flow.record_every": 1,
    "sampling.n_samples": 10000, "sampling.master_seed": 0,
    "emit.json": True, "emit.csv": True, "emit.snapshots": False,
    "test.level": 0.01, "test.times": [0.5, 2.0], "test.resamples": 1000,
    "cauchy.s": -0.6, "cauchy.m_min": 3, "cauchy.m_max": 7, "cauchy.M": 2,
    "convergence.k_min": 3, "convergence.k_max": 6, "convergence.K_ref": 9,
    "convergence.s": 0.45, "convergence.s_prime": 0.3, "convergence.n_seeds": 5,
    "energy.n_data": 10,
    "kernel.k_min": 2, "kernel.k_max": 5, "kernel.t": 0.5, "kernel.T": 0.5,
}

EXPERIMENT_DEFAULTS = {
    "gibbs-invariance": {"flow.t_final": 0.5, "sampling.master_seed": 1},
    "cauchy-rate": {"sampling.n_samples": 1000},
    "convergence-rate": {"flow.t_final": 0.25, "flow.record_every": 5},
    "energy-growth": {"flow.t_final": 2.0},
    "kernel-bounds": {"sampling.n_samples": 100, "sampling.master_seed": 1},
}


# --------------------------------------------------------------------------
# config text


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigInvalid(f"{source}:{lineno}", "expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = _parse_value(key, value)
    return out


def _parse_value(key, text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text          # bare words are strings


def format_config(cfg: dict) -> str:
    return "".join(f"{k} = {json.dumps(cfg[k])}\n" for k in sorted(cfg))


def _coerce(key: str, value):
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                if value.lower() in ("true", "1", "yes"):
                    return True
                if value.lower() in ("false", "0", "no"):
                    return False
                raise ValueError(value)
            return bool(value)
        if isinstance(default, int):
            f = float(value)
            if f != int(f):
                raise ValueError(value)
            return int(f)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            if isinstance(value, str):
                value = json.loads(value) if value.startswith("[") else value.split(",")
            return [float(v) for v in (value if isinstance(value, list) else [value])]
        return str(value)
    except (TypeError, ValueError, json.JSONDecodeError):
        raise ConfigInvalid(key, f"cannot read {value!r} as {type(default).__name__}") from None


def resolve(experiment: str, config_file=None, sets=(), overrides=None) -> dict:
    """Merge defaults, config file, --set pairs and flag overrides; validate."""
    if experiment not in EXPERIMENTS:
        raise ConfigInvalid("experiment", f"unknown experiment {experiment!r}")
    cfg = dict(DEFAULTS)
    cfg.update(EXPERIMENT_DEFAULTS.get(experiment, {}))
    layers = []
    if config_file is not None:
        try:
            text = Path(config_file).read_text()
        except OSError as exc:
            raise ConfigInvalid("config", str(exc)) from exc
        layers.append(parse_config_text(text, str(config_file)))
    pairs = {}
    for item in sets:
        if "=" not in item:
            raise ConfigInvalid(item, "expected key=value")
        k, v = item.split("=", 1)
        pairs[k.strip()] = _parse_value(k, v.strip())
    layers.append(pairs)
    layers.append({k: v for k, v in (overrides or {}).items() if v is not None})
    for layer in layers:
        for k, v in layer.items():
            if k not in DEFAULTS:
                raise ConfigInvalid(k, "unknown key")
            cfg[k] = _coerce(k, v)
    if cfg["experiment"] != experiment and any("experiment" in layer for layer in layers):
        raise ConfigInvalid("experiment", f"config names {cfg['experiment']!r}, "
                                          f"command line asks for {experiment!r}")
    cfg["experiment"] = experiment
    if not cfg["output_dir"]:
        root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
        cfg["output_dir"] = str(Path(root) / experiment)
    build_params(cfg)
    build_chi(cfg)
    build_flow(cfg)
    if cfg["threads"] < 0:
        raise ConfigInvalid("threads", "must be >= 0 (0 means all cores)")
    if cfg["sampling.n_samples"] < 1:
        raise ConfigInvalid("sampling.n_samples", "must be positive")
    if not 0 < cfg["test.level"] < 1:
        raise ConfigInvalid("test.level", "must lie in (0, 1)")
    return cfg


def build_params(cfg: dict) -> ParameterSet:
    values = {name: cfg[f"params.{name}"] for name in
              ("s0", "s_inf", "alpha", "p", "k", "Lambda", "dealias")}
    try:
        return ParameterSet(**values)
    except ValueError as exc:
        name, _, msg = str(exc).partition(": ")
        raise ConfigInvalid(f"params.{name}", msg) from None


def build_chi(cfg: dict):
    name = cfg["chi.name"]
    if name not in POTENTIALS:
        raise ConfigInvalid("chi.name", f"choose from {sorted(POTENTIALS)}")
    kw = {"alpha": cfg["params.alpha"]}
    if name == "power":
        kw.update(c=cfg["chi.c"], decay=cfg["chi.decay"])
    elif name == "bump":
        kw.update(c=cfg["chi.c"], width=cfg["chi.width"])
    try:
        return make_potential(name, **kw)
    except ValueError as exc:
        raise ConfigInvalid("chi", str(exc)) from None


def build_flow(cfg: dict) -> FlowConfig:
    if cfg["flow.scheme"] not in SCHEMES:
        raise ConfigInvalid("flow.scheme", f"choose from {SCHEMES}")
    for key in ("flow.dt",):
        if not cfg[key] > 0:
            raise ConfigInvalid(key, "must be positive")
    for key in ("flow.substeps", "flow.record_every"):
        if cfg[key] < 1:
            raise ConfigInvalid(key, "must be >= 1")
    try:
        return FlowConfig(dt=cfg["flow.dt"], substeps=cfg["flow.substeps"],
                          scheme=cfg["flow.scheme"], t_final=cfg["flow.t_final"],
                          record_every=cfg["flow.record_every"])
    except ValueError as exc:
        raise ConfigInvalid("flow.t_final", str(exc)) from None


# --------------------------------------------------------------------------
# dispatch


def execute(cfg: dict):
    """Run the configured experiment and return its report."""
    params = build_params(cfg)
    chi = build_chi(cfg)
    flow = build_flow(cfg)
    seed = cfg["sampling.master_seed"]
    n = cfg["sampling.n_samples"]
    exp = cfg["experiment"]
    if exp == "conservation":
        return harness.conservation_experiment(params, chi, flow, seed,
                                               snapshots=cfg["emit.snapshots"])
    if exp == "linear-invariance":
        return harness.test_linear_invariance(params, cfg["test.times"], n, chi=chi, seed=seed,
                                              level=cfg["test.level"])
    if exp == "gibbs-invariance":
        return harness.test_gibbs_invariance(params, chi, flow.t_final, n, flow, seed=seed,
                                             level=cfg["test.level"],
                                             resamples=cfg["test.resamples"])
    if exp == "cauchy-rate":
        return harness.cauchy_rate_check(cfg["cauchy.s"],
                                         range(cfg["cauchy.m_min"], cfg["cauchy.m_max"] + 1),
                                         cfg["cauchy.M"], n, seed)
    if exp == "convergence-rate":
        seeds = [seed + i for i in range(cfg["convergence.n_seeds"])]
        return harness.convergence_rate_study(
            seeds, range(cfg["convergence.k_min"], cfg["convergence.k_max"] + 1),
            cfg["convergence.K_ref"], cfg["convergence.s"], cfg["convergence.s_prime"],
            flow.t_final, flow, chi, params, flow.record_every)
    if exp == "energy-growth":
        seeds = [seed + i for i in range(cfg["energy.n_data"])]
        return harness.energy_growth_sweep(seeds, params, chi, flow.t_final, flow)
    return harness.kernel_bounds_experiment(
        range(cfg["kernel.k_min"], cfg["kernel.k_max"] + 1), cfg["kernel.t"], cfg["kernel.T"],
        params, seed, n)


def run(cfg: dict) -> int:
    out = Path(cfg["output_dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / CONFIG_NAME).write_text(format_config(cfg))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    set_threads(cfg["threads"] or os.cpu_count() or 1)
    report = execute(cfg)
    report.write(out, csv_tables=cfg["emit.csv"])
    if not cfg["emit.json"]:
        (out / "report.json").unlink()
    print(report.to_text(), end="")
    return 0 if report.passed else 1


def list_experiments(as_json: bool = False) -> str:
    if as_json:
        return json.dumps([{"name": k, "anchor": v} for k, v in EXPERIMENTS.items()], indent=2)
    width = max(map(len, EXPERIMENTS))
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in EXPERIMENTS.items())


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gibbsnls", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("experiment", help="one of: " + ", ".join(EXPERIMENTS))
    r.add_argument("--config", help="file of 'dotted.key = value' lines")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--k", type=int, dest="params.k")
    r.add_argument("--dt", type=float, dest="flow.dt")
    r.add_argument("--t-final", type=float, dest="flow.t_final")
    r.add_argument("--n-samples", type=int, dest="sampling.n_samples")
    r.add_argument("--seed", type=int, dest="sampling.master_seed")
    r.add_argument("--threads", type=int, dest="threads")
    r.add_argument("--output-dir", dest="output_dir")
    r.add_argument("--no-csv", action="store_const", const=False, dest="emit.csv")
    r.add_argument("--snapshots", action="store_const", const=True, dest="emit.snapshots")
    ls = sub.add_parser("list", help="list the experiments")
    ls.add_argument("--json", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        print(list_experiments(args.json))
        return 0
    flags = {k: v for k, v in vars(args).items()
             if k in DEFAULTS and k != "experiment"}
    try:
        cfg = resolve(args.experiment, args.config, args.set, flags)
        return run(cfg)
    except (ConfigInvalid, IoFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GibbsNLSError as exc:
        print(f"experiment aborted: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
