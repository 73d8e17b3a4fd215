"""Batch experiment runner.

Every subcommand can be driven by flags or by a JSON config file
(``qfeedback run config.json``). Each run writes ``<command>_summary.json``
and ``<command>_trials.csv`` into the output directory.

Exit status: 0 when every asserted bound holds, 1 on a bound violation
(reports are still written), 2 on a configuration or input error.

Randomness: trial ``t`` uses seed ``SeedSequence(seed).spawn(trials)[t]``
reduced to one uint64 (see :func:`qfeedback.feedback.trial_seeds`); the Holevo
optimizer uses ``seed`` directly.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from ._accel import backend_name
from .channels import KrausChannel, channel_from_dict, is_entanglement_breaking, make_channel, parse_channel_spec
from .exceptions import ChannelFormatError, HypothesisError, ParameterError, QFeedbackError
from .feedback import (
    BOUND_TOL,
    GRID_SLACK,
    ROW_FIELDS,
    explore_entangled_feedback,
    sweep_eb_bounds,
    sweep_feedback_bounds,
)
from .holevo import OptimizerOptions, chi_grid_oracle_qubit, maximize_holevo

COMMANDS = ("chi", "eb-test", "verify-feedback", "verify-eb", "explore-entangled", "additivity-check")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2

# additivity window: [2 chi - below, 2 chi + above]
ADDITIVITY_BELOW = 1e-2
ADDITIVITY_ABOVE = 1e-3


class ConfigError(QFeedbackError, ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    channel: object = None
    omega: object = None
    lam: object = None
    trials: int = 100
    seed: int = 0
    restarts: int = 16
    max_iters: int = 5000
    opt_tol: float = 1e-8
    ensemble_size: int | None = None
    out: str = "results"
    tol: float = BOUND_TOL
    slack: float = GRID_SLACK
    resolution: int = 24
    input_classes: list[str] = field(default_factory=lambda: ["product", "separable"])
    n_messages: int = 4
    bisect: str | None = None
    bisect_tol: float = 1e-7
    # override the grid-oracle capacity references
    chi1_ref: float | None = None
    chi2_ref: float | None = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"command: unknown command {self.command!r}")
        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        if self.tol <= 0 or self.slack < 0 or self.opt_tol <= 0 or self.bisect_tol <= 0:
            raise ConfigError("tolerances: must be positive")
        if self.restarts < 1 or self.max_iters < 1:
            raise ConfigError("optimizer: restarts and max_iters must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be an object")
        data = dict(data)
        opt = data.pop("optimizer", {}) or {}
        tols = data.pop("tolerances", {}) or {}
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        kw = {}
        for key in ("restarts", "max_iters", "ensemble_size"):
            if key in opt:
                kw[key] = opt[key]
        if "tol" in opt:
            kw["opt_tol"] = opt["tol"]
        if "seed" in opt:
            kw["seed"] = opt["seed"]
        if "bound" in tols:
            kw["tol"] = tols["bound"]
        if "slack" in tols:
            kw["slack"] = tols["slack"]
        known = set(cls.__dataclass_fields__)
        for key, val in data.items():
            if key not in known:
                raise ConfigError(f"{key}: unknown config field")
            kw[key] = val
        if "command" not in kw:
            raise ConfigError("command: missing field")
        try:
            cfg = cls(**kw)
            for name in ("trials", "seed", "restarts", "max_iters", "resolution", "n_messages"):
                setattr(cfg, name, int(getattr(cfg, name)))
            for name in ("tol", "slack", "opt_tol", "bisect_tol"):
                setattr(cfg, name, float(getattr(cfg, name)))
            for name in ("chi1_ref", "chi2_ref"):
                if getattr(cfg, name) is not None:
                    setattr(cfg, name, float(getattr(cfg, name)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config: {exc}") from None
        cfg.validate()
        return cfg

    def options(self) -> OptimizerOptions:
        return OptimizerOptions(restarts=self.restarts, max_iters=self.max_iters, tol=self.opt_tol, seed=self.seed)


def resolve_channel(spec, field_name: str) -> KrausChannel:
    if spec is None:
        raise ConfigError(f"{field_name}: no channel given")
    try:
        if isinstance(spec, dict):
            return channel_from_dict(spec)
        return parse_channel_spec(str(spec))
    except ChannelFormatError as exc:
        raise ConfigError(f"{field_name}: {exc}") from None
    except (ParameterError, ValueError) as exc:
        raise ConfigError(f"{field_name}: {exc}") from None


def _legs(cfg: ExperimentConfig) -> tuple[KrausChannel, KrausChannel]:
    omega = resolve_channel(cfg.omega if cfg.omega is not None else cfg.channel, "omega")
    lam = resolve_channel(cfg.lam if cfg.lam is not None else cfg.channel, "lambda")
    return omega, lam


# --------------------------------------------------------------------------
# report writing
# --------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return "" if x is None else str(x)


def write_rows(rows: Sequence[dict], path, fields: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r.get(f)) for f in fields])
    return path


def write_report(rows: Sequence[dict], path) -> Path:
    """CSV of per-trial protocol records with the fixed column set."""
    return write_rows(rows, path, ROW_FIELDS)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _write_summary(cfg: ExperimentConfig, payload: dict, status: int, started: float, t0: float) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg_dict = asdict(cfg)
    for key in ("channel", "omega", "lam"):
        if isinstance(cfg_dict[key], dict):
            cfg_dict[key] = "<inline channel>"
    summary = {
        "version": __version__,
        "command": cfg.command,
        "config": cfg_dict,
        "status": status,
        "passed": status == EXIT_OK,
        "results": payload,
        # only this block changes between identical runs
        "timing": {
            "started_utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
            "runtime_s": time.perf_counter() - t0,
            "backend": backend_name(),
        },
    }
    path = out / f"{cfg.command}_summary.json"
    path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return path


def _csv_path(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out) / f"{cfg.command}_trials.csv"


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _chi_ref(ch: KrausChannel, cfg: ExperimentConfig, override: float | None = None) -> float:
    if override is not None:
        return float(override)
    if ch.d_in != 2:
        raise ConfigError("channel: capacity references need a qubit input (grid oracle)")
    return chi_grid_oracle_qubit(ch, cfg.resolution)


def _cmd_chi(cfg):
    ch = resolve_channel(cfg.channel, "channel")
    res = maximize_holevo(ch, cfg.ensemble_size, cfg.options())
    rows = [{"restart": r, "value": v, "iterations": it}
            for r, (v, it) in enumerate(zip(res.restart_values, res.iterations))]
    write_rows(rows, _csv_path(cfg), ("restart", "value", "iterations"))
    payload = {
        "chi_estimate": res.chi_estimate,
        "converged": res.converged,
        "restarts_used": res.restarts_used,
        "seed": res.seed,
        "ensemble_probs": list(res.best_ensemble.probs),
    }
    return EXIT_OK, payload


def _eb_rows_for(kind: str, cfg):
    lo, hi = 0.0, 1.0
    rows = []

    def verdict_at(p):
        v = is_entanglement_breaking(make_channel(kind, [p]))
        rows.append({"p": p, "min_pt_eigenvalue": v.min_pt_eigenvalue, "verdict": v.verdict})
        return v.verdict

    if verdict_at(hi) != "yes" or verdict_at(lo) == "yes":
        raise ConfigError(f"bisect: {kind} does not change verdict on [0, 1]")
    while hi - lo > cfg.bisect_tol:
        mid = 0.5 * (lo + hi)
        if verdict_at(mid) == "yes":
            hi = mid
        else:
            lo = mid
    return rows, 0.5 * (lo + hi)


def _cmd_eb_test(cfg):
    if cfg.bisect:
        kind = cfg.bisect.replace("-", "_")
        rows, boundary = _eb_rows_for(kind, cfg)
        write_rows(rows, _csv_path(cfg), ("p", "min_pt_eigenvalue", "verdict"))
        return EXIT_OK, {"bisect": kind, "boundary": boundary, "bracket_tol": cfg.bisect_tol, "steps": len(rows)}
    ch = resolve_channel(cfg.channel, "channel")
    v = is_entanglement_breaking(ch)
    write_rows([{"verdict": v.verdict, "min_pt_eigenvalue": v.min_pt_eigenvalue}], _csv_path(cfg),
               ("verdict", "min_pt_eigenvalue"))
    return EXIT_OK, {"verdict": v.verdict, "min_pt_eigenvalue": v.min_pt_eigenvalue}


def _cmd_verify_feedback(cfg):
    omega, lam = _legs(cfg)
    chi1, chi2 = _chi_ref(omega, cfg, cfg.chi1_ref), _chi_ref(lam, cfg, cfg.chi2_ref)
    rows, payload, ok = [], {"chi1_ref": chi1, "chi2_ref": chi2, "slack": cfg.slack, "tol": cfg.tol}, True
    for n, cls in enumerate(cfg.input_classes):
        if cls == "entangled":
            raise ConfigError("input_classes: the capacity-sum bound is not asserted for entangled inputs")
        sw = sweep_feedback_bounds(omega, lam, cls, cfg.trials, cfg.seed + n, chi1, chi2, cfg.tol, cfg.slack,
                                   cfg.n_messages)
        rows += sw.rows
        ok &= sw.passed
        payload[cls] = {
            "trials": len(sw.rows),
            "violations": sw.violations,
            "max_excess": max(r["excess"] for r in sw.rows),
            "min_pt_eigenvalue": sw.min_pt_eigenvalue,
            "chain_rule_max_residual": sw.chain_rule_max_residual,
        }
    write_report(rows, _csv_path(cfg))
    return (EXIT_OK if ok else EXIT_VIOLATION), payload


def _cmd_verify_eb(cfg):
    omega, lam = _legs(cfg)
    v = is_entanglement_breaking(omega)
    if v.verdict != "yes":
        raise ConfigError(f"omega: not certified entanglement breaking (verdict {v.verdict})")
    chi1, chi2 = _chi_ref(omega, cfg, cfg.chi1_ref), _chi_ref(lam, cfg, cfg.chi2_ref)
    classes = cfg.input_classes if cfg.input_classes != ["product", "separable"] else ["entangled"]
    rows, payload, ok = [], {"chi1_ref": chi1, "chi2_ref": chi2, "slack": cfg.slack, "tol": cfg.tol}, True
    for n, cls in enumerate(classes):
        sw = sweep_eb_bounds(omega, lam, cfg.trials, cfg.seed + n, chi1, chi2, cls, cfg.tol, cfg.slack,
                             cfg.n_messages)
        rows += sw.rows
        ok &= sw.passed
        payload[cls] = {"trials": len(sw.rows), "violations": sw.violations,
                        "max_excess": max(r["excess"] for r in sw.rows)}
    write_report(rows, _csv_path(cfg))
    return (EXIT_OK if ok else EXIT_VIOLATION), payload


def _cmd_explore(cfg):
    ch = resolve_channel(cfg.channel, "channel")
    if ch.d_in != 2:
        raise ConfigError("channel: exploration needs a qubit channel")
    rep = explore_entangled_feedback(ch, cfg.trials, cfg.seed, cfg.n_messages, resolution=cfg.resolution)
    write_report(rep.rows, _csv_path(cfg))
    counts, edges = rep.histogram()
    payload = {"chi_ref": rep.chi_ref, "max_excess": rep.max_excess, "argmax_seed": rep.argmax_seed,
               "histogram": {"counts": counts.tolist(), "edges": edges.tolist()}}
    return EXIT_OK, payload


def _cmd_additivity(cfg):
    ch = resolve_channel(cfg.channel, "channel")
    single = maximize_holevo(ch, cfg.ensemble_size, cfg.options())
    double = maximize_holevo(ch.power(2), None, cfg.options())
    ref = single.chi_estimate
    grid = None
    if ch.d_in == 2:
        grid = chi_grid_oracle_qubit(ch, cfg.resolution)
        ref = max(ref, grid)
    low = 2 * single.chi_estimate - ADDITIVITY_BELOW
    high = 2 * ref + ADDITIVITY_ABOVE
    ok = low <= double.chi_estimate <= high
    rows = [{"block": 1, "chi_estimate": single.chi_estimate, "converged": single.converged},
            {"block": 2, "chi_estimate": double.chi_estimate, "converged": double.converged}]
    write_rows(rows, _csv_path(cfg), ("block", "chi_estimate", "converged"))
    payload = {"chi_single": single.chi_estimate, "chi_double": double.chi_estimate, "grid_reference": grid,
               "window": [low, high], "within_window": ok}
    return (EXIT_OK if ok else EXIT_VIOLATION), payload


_DISPATCH = {
    "chi": _cmd_chi,
    "eb-test": _cmd_eb_test,
    "verify-feedback": _cmd_verify_feedback,
    "verify-eb": _cmd_verify_eb,
    "explore-entangled": _cmd_explore,
    "additivity-check": _cmd_additivity,
}


def run_config(cfg: ExperimentConfig) -> int:
    """Execute ``cfg`` and write its reports. Returns the exit status."""
    started, t0 = time.time(), time.perf_counter()
    try:
        cfg.validate()
        status, payload = _DISPATCH[cfg.command](cfg)
    except (ConfigError, ChannelFormatError, ParameterError, HypothesisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _write_summary(cfg, payload, status, started, t0)
    return status


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config: no such file {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    return ExperimentConfig.from_dict(data)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qfeedback", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a JSON experiment config")
    run.add_argument("config")

    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--channel", help="channel file (.json) or name:params, e.g. depolarizing:0.5")
        if name in ("verify-feedback", "verify-eb"):
            p.add_argument("--omega", help="first channel (defaults to --channel)")
            p.add_argument("--lambda", dest="lam", help="second channel (defaults to --channel)")
            p.add_argument("--input-class", action="append", dest="input_classes",
                           choices=("product", "separable", "entangled"))
            p.add_argument("--chi1-ref", type=float, help="capacity reference for the first channel")
            p.add_argument("--chi2-ref", type=float, help="capacity reference for the second channel")
        p.add_argument("--trials", type=int, default=100)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--restarts", type=int, default=16)
        p.add_argument("--max-iters", type=int, default=5000)
        p.add_argument("--ensemble-size", type=int)
        p.add_argument("--resolution", type=int, default=24, help="grid-oracle resolution for capacity references")
        p.add_argument("--n-messages", type=int, default=4)
        p.add_argument("--slack", type=float, default=GRID_SLACK)
        p.add_argument("--out", default="results")
        if name in ("chi", "additivity-check"):
            p.add_argument("--tol", type=float, default=1e-8, help="optimizer convergence tolerance")
        elif name == "eb-test":
            p.add_argument("--bisect", help="channel family to bisect in its parameter, e.g. depolarizing")
            p.add_argument("--tol", type=float, default=1e-7, help="bisection bracket width")
        else:
            p.add_argument("--tol", type=float, default=BOUND_TOL, help="bound tolerance")
    return ap


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig(
        command=ns.command,
        channel=ns.channel,
        omega=getattr(ns, "omega", None),
        lam=getattr(ns, "lam", None),
        trials=ns.trials,
        seed=ns.seed,
        restarts=ns.restarts,
        max_iters=ns.max_iters,
        ensemble_size=ns.ensemble_size,
        out=ns.out,
        slack=ns.slack,
        resolution=ns.resolution,
        n_messages=ns.n_messages,
    )
    if ns.command in ("chi", "additivity-check"):
        cfg.opt_tol = ns.tol
    elif ns.command == "eb-test":
        cfg.bisect, cfg.bisect_tol = ns.bisect, ns.tol
    else:
        cfg.tol = ns.tol
    if getattr(ns, "input_classes", None):
        cfg.input_classes = ns.input_classes
    cfg.chi1_ref = getattr(ns, "chi1_ref", None)
    cfg.chi2_ref = getattr(ns, "chi2_ref", None)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    ns = _parser().parse_args(argv)
    try:
        cfg = load_config(ns.config) if ns.command == "run" else config_from_args(ns)
        cfg.validate()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_config(cfg)


if __name__ == "__main__":
    sys.exit(main())
