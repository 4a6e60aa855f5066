"""Command-line front end: ``nsl {validate,dulac,theta,tails,limits}``.

Configuration precedence, lowest first: built-in defaults, the JSON document
given by ``--config``, command-line flags, and finally ``NSL_OUT`` for the
output directory.  Exit codes: 0 success, 1 computational failure, 2 invalid
configuration or usage.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from pathlib import Path
from typing import Optional


from . import artifacts
from .dulac_analysis import ConvergenceReport, convergence_study
from .errors import ComputationError, InvalidConfig, SaddleError
from .flow_integrator import IntegratorSettings, SectionConfig
from .observable_integrals import M_SUBSTITUTION, TRAJECTORY, scaling_fit
from .saddle_model import (
    QuarticPerturbation,
    SaddleParams,
    is_divergence_free,
    perturbation_from_dict,
    reduced_family,
    validate,
)
from .statistics import (
    BirkhoffConfig,
    birkhoff_experiment,
    sample_entry,
    simulate_sums,
    tail_constant_theory,
    tail_fit,
    tau_samples,
)

COMMANDS = ("validate", "dulac", "theta", "tails", "limits")
STOCHASTIC = ("tails", "limits")

DEFAULTS = {
    "saddle": {"gamma": 0.0},
    "sections": {"eta": 1.0, "zeta0": 1.0, "eta_range": [1.0, 1.4]},
    "integrator": IntegratorSettings().to_dict(),
    "perturbed": False,
    "threads": 1,
    "plot": False,
    "dulac": {"T_grid": [100.0, 316.22776601683796, 1000.0, 3162.2776601683795, 10000.0]},
    "theta": {"rho": [-1.0, 0.0, 1.0, 2.0, 3.0],
              "T_grid": [100.0, 316.22776601683796, 1000.0, 3162.2776601683795, 10000.0],
              "method": TRAJECTORY},
    "tails": {"n": 100000, "xi_max": 1e-3, "c_bdry": 1.0, "rho": 0.0, "method": "hill",
              "k": None, "n_boot": 200, "dump_samples": True},
    "limits": {"rho": 0.5, "horizons": [10000.0], "n_paths": 1000, "xi_max": 1e-3,
               "c_bdry": 1.0, "nuisance_amp": 1.0, "tail_samples": 1000000},
}


class UsageError(InvalidConfig):
    code = "usage_error"


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(command: str, args: argparse.Namespace,
                   env: Optional[dict] = None) -> tuple[dict, Optional[Path]]:
    """Merge defaults, the config file and flags; return (config, out_dir)."""
    env = os.environ if env is None else env
    user = {}
    if args.config:
        try:
            with open(args.config) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(user, dict):
            raise UsageError("config must be a JSON object")
    cfg = _merge(DEFAULTS, user)
    # the saddle block is replaced, not merged: gamma and explicit coefficients exclude each other
    if "saddle" in user:
        cfg["saddle"] = copy.deepcopy(user["saddle"])
    cfg.pop("out", None)
    cfg.pop("command", None)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.threads is not None:
        cfg["threads"] = args.threads
    if args.plot:
        cfg["plot"] = True
    if args.perturbed:
        cfg["perturbed"] = True
    if command in STOCHASTIC and cfg.get("seed") is None:
        raise UsageError(f"command {command!r} needs a seed (--seed or \"seed\" in the config)")
    if "seed" in cfg and cfg["seed"] is not None:
        seed = cfg["seed"]
        if not (isinstance(seed, int) and 0 <= seed < 2 ** 64):
            raise UsageError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    out = env.get("NSL_OUT") or args.out or user.get("out")
    return cfg, (Path(out) if out else None)


def build_params(cfg: dict) -> SaddleParams:
    block = dict(cfg["saddle"])
    pert = block.pop("perturbation", None)
    if "gamma" in block:
        extra = set(block) - {"gamma"}
        if extra:
            raise InvalidConfig(f"saddle block mixes gamma with {sorted(extra)}")
        params = reduced_family(float(block["gamma"]))
    else:
        params = SaddleParams.from_dict(block)
    if pert is not None:
        params = params.with_perturbation(perturbation_from_dict(pert))
    elif cfg.get("perturbed"):
        params = params.with_perturbation(QuarticPerturbation())
    return params


def _sections(cfg: dict) -> SectionConfig:
    return SectionConfig.from_dict(cfg["sections"])


def _settings(cfg: dict) -> IntegratorSettings:
    return IntegratorSettings.from_dict(cfg["integrator"])


def _echo(cfg: dict, payload: dict) -> dict:
    return {"config": cfg, "seed": cfg.get("seed"), **payload}


def _need_out(out: Optional[Path], command: str) -> Path:
    if out is None:
        raise UsageError(f"command {command!r} needs --out DIR (or NSL_OUT)")
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_validate(cfg: dict, out: Optional[Path]) -> dict:
    params = build_params(cfg)
    exp = validate(params)
    summary = {**exp.to_dict(), "divergence_free": is_divergence_free(params),
               "params": params.to_dict()}
    if out is not None:
        artifacts.write_json(out / "validate.json", _echo(cfg, {"exponents": summary}))
    return summary


def cmd_dulac(cfg: dict, out: Optional[Path]) -> dict:
    out = _need_out(out, "dulac")
    params = build_params(cfg)
    perturbed = bool(cfg.get("perturbed")) or params.perturbation.bound != 0.0
    report = convergence_study(params, _sections(cfg), cfg["dulac"]["T_grid"],
                               perturbed=perturbed, settings=_settings(cfg),
                               threads=int(cfg.get("threads", 1)))
    artifacts.write_csv(out / "dulac.csv", ConvergenceReport.CSV_HEADER, report.csv_rows())
    summary = report.to_json_dict()
    artifacts.write_json(out / "dulac.json", _echo(cfg, {"report": summary}))
    if cfg.get("plot"):
        from .plotting import plot_dulac
        plot_dulac(report, out / "dulac.svg")
    return summary


def cmd_theta(cfg: dict, out: Optional[Path]) -> dict:
    out = _need_out(out, "theta")
    params = build_params(cfg)
    block = cfg["theta"]
    rhos = block["rho"] if isinstance(block["rho"], list) else [block["rho"]]
    method = block.get("method", TRAJECTORY)
    if method not in (TRAJECTORY, M_SUBSTITUTION):
        raise InvalidConfig(f"unknown theta method {method!r}")
    fits = [scaling_fit(params, _sections(cfg), float(r), block["T_grid"], method,
                        _settings(cfg), int(cfg.get("threads", 1))) for r in rhos]
    rows = [(f.rho, T, th, method) for f in fits for T, th in zip(f.T_grid, f.thetas)]
    artifacts.write_csv(out / "theta.csv", ("rho", "T", "theta", "method"), rows)
    summary = {"fits": [{k: v for k, v in f.to_dict().items() if k not in ("T_grid", "thetas")}
                        for f in fits]}
    artifacts.write_json(out / "theta.json", _echo(cfg, summary))
    if cfg.get("plot"):
        from .plotting import plot_theta
        plot_theta(fits, out / "theta.svg")
    return summary


def cmd_tails(cfg: dict, out: Optional[Path]) -> dict:
    out = _need_out(out, "tails")
    params = build_params(cfg)
    if params.perturbation.bound != 0.0:
        raise InvalidConfig("tail sampling covers the unperturbed field only")
    block = cfg["tails"]
    sections = _sections(cfg)
    entries = sample_entry(sections, int(block["n"]), cfg["seed"], xi_max=block["xi_max"])
    samples = tau_samples(params, sections, entries, rho=float(block["rho"]),
                          c_bdry=float(block["c_bdry"]))
    est = tail_fit(samples, block["method"], k=block.get("k"), n_boot=int(block["n_boot"]),
                   seed=cfg["seed"])
    exp = validate(params)
    summary = {
        "estimate": est.to_dict(),
        "beta2_theory": exp.beta2,
        "C_theory": tail_constant_theory(params, sections, block["xi_max"]),
        "n_censored": samples.n_censored,
        "censored_fraction": samples.n_censored / max(1, len(samples)),
    }
    if block.get("dump_samples", True):
        artifacts.write_csv(out / "tails_samples.csv", ("tau", "vbar"), samples.csv_rows())
    artifacts.write_json(out / "tails.json", _echo(cfg, summary))
    if cfg.get("plot"):
        from .plotting import plot_tail
        plot_tail(samples.tau[~samples.censored], est, out / "tails.svg")
    return summary


def cmd_limits(cfg: dict, out: Optional[Path]) -> dict:
    out = _need_out(out, "limits")
    saddle = cfg["saddle"]
    if set(saddle) - {"gamma"}:
        raise InvalidConfig("limit-law experiments run on the reduced family; give gamma only")
    block = cfg["limits"]
    sec = cfg["sections"]
    bcfg = BirkhoffConfig(
        rho=float(block["rho"]), horizons=tuple(float(t) for t in block["horizons"]),
        n_paths=int(block["n_paths"]), seed=int(cfg["seed"]), gamma=float(saddle["gamma"]),
        xi_max=float(block["xi_max"]), eta_range=tuple(sec["eta_range"]),
        zeta0=float(sec["zeta0"]), c_bdry=float(block["c_bdry"]),
        nuisance_amp=float(block["nuisance_amp"]), tail_samples=int(block["tail_samples"]),
        threads=int(cfg.get("threads", 1)))
    sums = simulate_sums(bcfg)
    report = birkhoff_experiment(bcfg, sums=sums)
    d = report.to_dict()
    d.pop("config")
    rows = zip(report.horizons, report.var_scaled, report.var_scaled_robust,
               report.var_sqrt_t, report.var_sqrt_t_robust)
    artifacts.write_csv(out / "limits.csv", ("t", "var_scaled", "var_scaled_robust",
                                            "var_sqrt_t", "var_sqrt_t_robust"), rows)
    artifacts.write_json(out / "limits.json", _echo(cfg, {"report": d}))
    if cfg.get("plot"):
        from .plotting import plot_limits
        from .statistics import normalizer
        plot_limits(sums[:, -1] / normalizer(bcfg.rho, bcfg.horizons[-1]), report,
                    out / "limits.svg")
    return d


HANDLERS = {"validate": cmd_validate, "dulac": cmd_dulac, "theta": cmd_theta,
            "tails": cmd_tails, "limits": cmd_limits}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsl", description="Neutral saddle laboratory")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="JSON run configuration")
    p.add_argument("--out", metavar="DIR", help="output directory (NSL_OUT overrides)")
    p.add_argument("--seed", type=int, metavar="U64", help="RNG seed")
    p.add_argument("--threads", type=int, metavar="N", help="worker process cap")
    p.add_argument("--plot", action="store_true", help="also write SVG figures")
    p.add_argument("--perturbed", action="store_true",
                   help="add the quartic remainder (K = 0.5 unless configured)")
    return p


def _error(exc: SaddleError, status: int) -> int:
    sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc)}) + "\n")
    return status


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, out = resolve_config(args.command, args)
        result = HANDLERS[args.command](cfg, out)
    except InvalidConfig as exc:
        return _error(exc, 2)
    except ComputationError as exc:
        return _error(exc, 1)
    sys.stdout.write(artifacts.dumps_json(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
