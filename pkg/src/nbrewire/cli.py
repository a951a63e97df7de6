"""Experiment driver.

Subcommands: tau-tail, mix-profile, exact-verify, static-mix,
shortcut-audit. Each reads a key=value config file, applies command-line
overrides, emits a fully resolved copy of the config next to the results
(so runs are self-describing), and writes CSV/JSON tables with theory
overlays. Identical (config, seed) runs produce byte-identical CSV.

Exit codes: 0 success, 2 config error, 3 cap or precondition violation,
4 verification failure in verify-style commands.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from .dynamics import DynamicsSpec
from .estimators import (estimate_dynamic_tv_plugin, estimate_tau_tail,
                         exact_dynamic_tv_walk_independent, shortcut_experiment,
                         _setup_start)
from .exactlab import run_exact_battery
from .graphcore import (build_halfedge_space, make_degree_sequence,
                        read_degree_sequence, sample_uniform_configuration,
                        size_biased_nu, c_stat as c_stat_of)
from .resultio import ResultTable
from .theory import (exact_tau_tail_conditional, predict_mixing_profile,
                     predict_tau_tail_limit, steps_for_scale, TIME_SCALES)
from .walk import static_mixing_time, static_tv_curve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAP = 3
EXIT_VERIFY = 4


class ConfigError(Exception):
    pass


class CapError(Exception):
    pass


@dataclass
class ExperimentConfig:
    """Flat experiment description; every field has an explicit default."""

    command: str = ""
    # graph
    degree_kind: str = "regular"  # regular | two-point | power-law | file
    n: int = 1000
    degree_d: int = 3
    degree_d1: int = 3
    degree_d2: int = 2
    degree_fraction: float = 0.5
    degree_exponent: float = 2.5
    degree_min: int = 3
    degree_max: int = 50
    degree_file: str = ""
    n_grid: list = field(default_factory=list)
    # dynamics
    mechanism: str = "global"
    alpha: float = 0.001
    r: int = 1
    # time grids
    t_grid: list = field(default_factory=list)
    c_grid: list = field(default_factory=list)
    time_scale: str = "steps"
    # budgets
    replicas: int = 10000
    tv_samples: int = 0  # 0: auto (max(10 |H|, replicas))
    graph_replicas: int = 200
    annealed: bool = True
    epsilon: float = 0.25
    # profile regime inputs
    regime: str = ""
    gamma: float = float("nan")
    beta: float = float("nan")
    c_star: float = float("nan")
    # battery
    battery_sizes: list = field(default_factory=lambda: [4, 6, 8])
    battery_alphas: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    battery_mechanisms: list = field(default_factory=lambda: ["local", "near", "global"])
    battery_tol: float = 1e-12
    # run control
    seed: int = 1
    out_dir: str = "out"
    format: str = "both"  # csv | json | both
    threads: int = 0

    def validate(self) -> None:
        if self.mechanism not in ("local", "near", "global"):
            raise ConfigError(f"mechanism: unknown value {self.mechanism!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha: {self.alpha} outside [0, 1]")
        if self.replicas < 1:
            raise ConfigError(f"replicas: must be >= 1, got {self.replicas}")
        if self.mechanism == "near" and self.r < 1:
            raise ConfigError(f"r: near mechanism needs r >= 1, got {self.r}")
        if self.time_scale not in TIME_SCALES:
            raise ConfigError(f"time_scale: {self.time_scale!r} not in {TIME_SCALES}")
        if self.format not in ("csv", "json", "both"):
            raise ConfigError(f"format: {self.format!r} not one of csv/json/both")
        if self.degree_kind not in ("regular", "two-point", "power-law", "file"):
            raise ConfigError(f"degree_kind: unknown value {self.degree_kind!r}")
        if self.degree_kind == "file" and not self.degree_file:
            raise ConfigError("degree_file: required when degree_kind=file")
        if self.degree_kind == "file" and not Path(self.degree_file).exists():
            raise ConfigError(f"degree_file: {self.degree_file} does not exist")
        if not self.t_grid and not self.c_grid and self.command in (
                "tau-tail", "mix-profile", "shortcut-audit"):
            raise ConfigError("t_grid or c_grid: one must be nonempty")


_LIST_FIELDS = {"n_grid": int, "t_grid": int, "c_grid": float,
                "battery_sizes": int, "battery_alphas": float,
                "battery_mechanisms": str}


def parse_config(text: str) -> ExperimentConfig:
    """Parse the key = value format (one pair per line, # comments)."""
    values: dict = {}
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        val = val.strip()
        if key not in fields:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(key, val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return ExperimentConfig(**values)


def _parse_value(key: str, val: str):
    if key in _LIST_FIELDS:
        if not val:
            return []
        return [_LIST_FIELDS[key](tok.strip()) for tok in val.split(",")]
    typ = ExperimentConfig.__dataclass_fields__[key].type
    if typ == "bool" or isinstance(getattr(ExperimentConfig(), key), bool):
        low = val.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"expected boolean, got {val!r}")
    default = getattr(ExperimentConfig(), key)
    if isinstance(default, int) and not isinstance(default, bool):
        return int(val)
    if isinstance(default, float):
        return float(val)
    return val


def emit_config(cfg: ExperimentConfig) -> str:
    """Canonical emission: every field explicit, lists comma-joined."""
    lines = []
    for f in dataclasses.fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, list):
            out = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        elif isinstance(v, bool):
            out = "true" if v else "false"
        elif isinstance(v, float):
            out = repr(v)
        else:
            out = str(v)
        lines.append(f"{f.name} = {out}")
    return "\n".join(lines) + "\n"


def _build_space(cfg: ExperimentConfig, n: int | None = None):
    n = n if n is not None else cfg.n
    rng = np.random.default_rng(cfg.seed)
    if cfg.degree_kind == "regular":
        res = make_degree_sequence("regular", n, rng, d=cfg.degree_d)
    elif cfg.degree_kind == "two-point":
        res = make_degree_sequence("two-point", n, rng, d1=cfg.degree_d1,
                                   d2=cfg.degree_d2, fraction=cfg.degree_fraction)
    elif cfg.degree_kind == "power-law":
        res = make_degree_sequence("power-law", n, rng, exponent=cfg.degree_exponent,
                                   min=cfg.degree_min, max=cfg.degree_max)
    else:
        degrees = read_degree_sequence(cfg.degree_file)
        return build_halfedge_space(degrees), False
    return build_halfedge_space(res.degrees), res.parity_adjusted


def _resolve_grid(cfg: ExperimentConfig, space) -> list[tuple[float | None, int]]:
    """(c, t) pairs sorted by t; c None when the grid was given in steps."""
    if cfg.t_grid:
        out = [(None, int(t)) for t in cfg.t_grid]
    else:
        out = []
        for c in cfg.c_grid:
            t = steps_for_scale(cfg.time_scale, c, alpha=cfg.alpha, r=cfg.r,
                                n=space.n)
            out.append((float(c), t))
    # estimators report grids in ascending t; keep rows aligned
    out.sort(key=lambda pair: pair[1])
    return out


def _spec_of(cfg: ExperimentConfig) -> DynamicsSpec:
    return DynamicsSpec(mode=cfg.mechanism, alpha=cfg.alpha,
                        r=cfg.r if cfg.mechanism == "near" else None)


def _emit(table: ResultTable, cfg: ExperimentConfig, name: str,
          wall_time_s: float) -> None:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(emit_config(cfg))
    if cfg.format in ("csv", "both"):
        table.to_csv(out / f"{name}.csv")
    if cfg.format in ("json", "both"):
        table.to_json(out / f"{name}.json", wall_time_s=wall_time_s)


def cmd_tau_tail(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    space, _ = _build_space(cfg)
    spec = _spec_of(cfg)
    grid = _resolve_grid(cfg, space)
    ts = [t for _c, t in grid]
    tail = estimate_tau_tail(space, spec, ts, cfg.replicas, cfg.seed,
                             annealed=cfg.annealed)
    table = ResultTable(seed=cfg.seed, replicas=cfg.replicas)
    table.metadata["annealed"] = cfg.annealed
    beta = cfg.alpha * cfg.r * cfg.r if cfg.mechanism == "near" else None
    for (c, t), est, lo, hi in zip(grid, tail.estimates, tail.ci_lo, tail.ci_hi):
        theory = exact_tau_tail_conditional(cfg.mechanism, cfg.alpha, t,
                                            cfg.r if cfg.mechanism == "near" else None)
        limit = (predict_tau_tail_limit(cfg.mechanism, c, beta)
                 if c is not None else None)
        table.add_row(mode=cfg.mechanism, n=space.n, alpha=cfg.alpha,
                      r=cfg.r if cfg.mechanism == "near" else None, t=t,
                      estimate=float(est), ci_lo=float(lo), ci_hi=float(hi),
                      theory=theory, residual=float(est) - theory,
                      c=c, time_scale=cfg.time_scale, limit=limit)
    _emit(table, cfg, "tau_tail", time.perf_counter() - t0)
    return EXIT_OK


def cmd_mix_profile(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    space, _ = _build_space(cfg)
    spec = _spec_of(cfg)
    grid = _resolve_grid(cfg, space)
    ts = [t for _c, t in grid]
    regime_args = {}
    if cfg.regime:
        for name in ("gamma", "beta", "c_star"):
            v = getattr(cfg, name)
            if not math.isnan(v):
                regime_args[name] = v
        try:
            # reject unreachable or under-specified regimes before any heavy work
            predict_mixing_profile(cfg.mechanism, cfg.regime, 0.0, **regime_args)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    cfg0, x0 = _setup_start(space, cfg.seed, None, None)
    stat = static_tv_curve(space, cfg0, x0, max(ts))
    tail = estimate_tau_tail(space, spec, ts, cfg.replicas, cfg.seed,
                             annealed=False, cfg0=cfg0, x0=x0)
    use_exact = cfg.mechanism == "global" and cfg.graph_replicas > 1
    if use_exact:
        tv = exact_dynamic_tv_walk_independent(space, cfg0, x0, spec, ts,
                                               cfg.graph_replicas, cfg.seed)
        dyn = {int(t): (float(e), float(lo), float(hi)) for t, e, lo, hi in
               zip(tv.t_grid, tv.estimates, tv.ci_lo, tv.ci_hi)}
    else:
        samples = cfg.tv_samples or max(10 * space.total_halfedges, cfg.replicas)
        dyn = {}
        for t in sorted(set(ts)):
            est = estimate_dynamic_tv_plugin(space, spec, t, samples, cfg.seed,
                                             cfg0=cfg0, x0=x0)
            dyn[int(t)] = (est.estimate, None, None)
    table = ResultTable(seed=cfg.seed, replicas=cfg.replicas)
    table.metadata["tv_estimator"] = ("exact-per-trajectory" if use_exact
                                      else "plugin")
    for j, (c, t) in enumerate(grid):
        d_dyn, lo, hi = dyn[int(t)]
        product = float(tail.estimates[j]) * float(stat[t])
        profile = (predict_mixing_profile(cfg.mechanism, cfg.regime, c,
                                          **regime_args)
                   if cfg.regime and c is not None else None)
        table.add_row(mode=cfg.mechanism, n=space.n, alpha=cfg.alpha,
                      r=cfg.r if cfg.mechanism == "near" else None, t=t,
                      estimate=d_dyn, ci_lo=lo, ci_hi=hi, theory=profile,
                      residual=(d_dyn - profile) if profile is not None else None,
                      c=c, tau_tail=float(tail.estimates[j]),
                      d_stat=float(stat[t]), product=product)
    _emit(table, cfg, "mix_profile", time.perf_counter() - t0)
    return EXIT_OK


def cmd_exact_verify(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    report = run_exact_battery(sizes=tuple(cfg.battery_sizes),
                               alphas=tuple(cfg.battery_alphas),
                               mechanisms=tuple(cfg.battery_mechanisms),
                               tol=cfg.battery_tol)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(emit_config(cfg))
    payload = dict(report)
    payload["wall_time_s"] = time.perf_counter() - t0
    with open(out / "exact_verify.json", "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=float)
        fh.write("\n")
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def cmd_static_mix(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    ns = [int(x) for x in (cfg.n_grid or [cfg.n])]
    table = ResultTable(seed=cfg.seed, replicas=1)
    curves = ResultTable(seed=cfg.seed, replicas=1)
    for n in ns:
        space, _ = _build_space(cfg, n=n)
        if int(space.degrees.min()) < 3:
            raise CapError("static-mix needs min degree >= 3 "
                           "(log forward degrees must be positive)")
        cstat = c_stat_of(space)
        rng = np.random.default_rng(cfg.seed + n)
        cfg0 = sample_uniform_configuration(space, rng)
        x0 = int(rng.integers(space.total_halfedges))
        res = static_mixing_time(space, cfg0, x0, cfg.epsilon)
        theory = cstat * math.log(n)
        est = res.time if res.mixed else None
        table.add_row(mode="static", n=n, alpha=None, r=None,
                      t=res.time, estimate=est, theory=theory,
                      residual=(est - theory) if est is not None else None,
                      c_stat=cstat, epsilon=cfg.epsilon, mixed=res.mixed,
                      horizon=res.horizon, nu=size_biased_nu(space.degrees))
        curve = static_tv_curve(space, cfg0, x0,
                                res.time if res.mixed else res.horizon)
        for t, tv in enumerate(curve):
            curves.add_row(mode="static", n=n, alpha=None, r=None, t=t,
                           estimate=float(tv))
    _emit(table, cfg, "static_mix", time.perf_counter() - t0)
    if cfg.format in ("csv", "both"):
        curves.to_csv(Path(cfg.out_dir) / "tv_curves.csv")
    if cfg.format in ("json", "both"):
        curves.to_json(Path(cfg.out_dir) / "tv_curves.json")
    return EXIT_OK


def cmd_shortcut_audit(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    space, _ = _build_space(cfg)
    grid = _resolve_grid(cfg, space)
    table = ResultTable(seed=cfg.seed, replicas=cfg.replicas)
    for _c, t in grid:
        ex = shortcut_experiment(space, cfg.r, t, cfg.replicas, cfg.seed,
                                 annealed=cfg.annealed)
        audited = ex.audited
        mean_chi = float(ex.chi[ex.skipped == 0].mean()) if audited else None
        table.add_row(mode="shortcut", n=space.n, alpha=None, r=cfg.r, t=t,
                      estimate=ex.fraction_positive,
                      audited=audited, skipped=int(ex.skipped.sum()),
                      mean_chi=mean_chi)
    _emit(table, cfg, "shortcut_audit", time.perf_counter() - t0)
    return EXIT_OK


_COMMANDS = {
    "tau-tail": cmd_tau_tail,
    "mix-profile": cmd_mix_profile,
    "exact-verify": cmd_exact_verify,
    "static-mix": cmd_static_mix,
    "shortcut-audit": cmd_shortcut_audit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nbrewire",
        description="Walks on rewired configuration models: simulation and "
                    "verification experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--format", choices=("csv", "json", "both"), default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(Path(args.config).read_text())
    except FileNotFoundError:
        print(f"config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg.command = args.command
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    if args.threads is not None:
        cfg.threads = args.threads
    if args.format is not None:
        cfg.format = args.format
    try:
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.threads:
        _backend.set_num_threads(cfg.threads)
    try:
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ValueError as exc:
        print(f"runtime rejection: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
